#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <memory>
#include <sstream>

#include "latentmark/attacks.hpp"
#include "latentmark/audio.hpp"
#include "latentmark/codec.hpp"
#include "latentmark/corpus.hpp"
#include "latentmark/detector.hpp"
#include "latentmark/embedder.hpp"
#include "latentmark/errors.hpp"
#include "latentmark/key.hpp"

namespace py = pybind11;
using namespace latentmark;

namespace {

using CodecPtr = std::shared_ptr<SurrogateCodec>;
using KeyPtr = std::shared_ptr<SecretKey>;

py::array_t<double> to_array(const std::vector<double>& v) {
  return py::array_t<double>(py::ssize_t(v.size()), v.data());
}

Committee to_committee(const std::vector<std::pair<CodecPtr, KeyPtr>>& members) {
  Committee c;
  for (const auto& [codec, key] : members) {
    if (!codec || !key) throw ConfigError("committee member needs a codec and a key");
    c.push_back({codec, key});
  }
  return c;
}

py::dict trace_dict(const EmbedTrace& t) {
  py::dict d;
  d["loss"] = t.loss;
  d["scores"] = t.scores;
  d["delta_linf"] = t.delta_linf;
  d["codec_ids"] = t.codec_ids;
  d["epsilon"] = t.epsilon;
  d["best_step"] = t.best_step;
  d["final_scores"] = t.final_scores;
  d["final_delta_linf"] = t.final_delta_linf;
  return d;
}

}  // namespace

PYBIND11_MODULE(_latentmark, m) {
  m.doc() = "Latent-projection audio watermarking";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  auto format = py::register_exception<FormatError>(m, "FormatError", base);
  py::register_exception<ConsistencyError>(m, "ConsistencyError", format);
  py::register_exception<IoError>(m, "IoError", base);
  py::register_exception<EmptyInputError>(m, "EmptyInputError", base);
  py::register_exception<ShapeError>(m, "ShapeError", base);
  py::register_exception<RateError>(m, "RateError", base);
  py::register_exception<LengthError>(m, "LengthError", base);
  py::register_exception<ConfigError>(m, "ConfigError", base);
  py::register_exception<DegeneracyError>(m, "DegeneracyError", base);
  py::register_exception<NumericError>(m, "NumericError", base);

  py::enum_<LatentMode>(m, "LatentMode")
      .value("PreQuantization", LatentMode::PreQuantization)
      .value("Quantized", LatentMode::Quantized);
  py::enum_<AxisMethod>(m, "AxisMethod")
      .value("Cluster", AxisMethod::Cluster)
      .value("PCA", AxisMethod::PCA)
      .value("Random", AxisMethod::Random);
  py::enum_<MarginMode>(m, "MarginMode")
      .value("Sigma", MarginMode::Sigma)
      .value("Alpha", MarginMode::Alpha);
  py::enum_<HingeTarget>(m, "HingeTarget")
      .value("Gamma", HingeTarget::Gamma)
      .value("Normalized", HingeTarget::Normalized);
  py::enum_<Domain>(m, "Domain")
      .value("Ambient", Domain::Ambient)
      .value("Speech", Domain::Speech)
      .value("Music", Domain::Music);

  // --- audio ---
  py::class_<Waveform>(m, "Waveform")
      .def(py::init([](const std::vector<double>& s, int rate) { return Waveform(s, rate); }),
           py::arg("samples"), py::arg("rate"))
      .def_property(
          "samples", [](const Waveform& w) { return to_array(w.samples); },
          [](Waveform& w, const std::vector<double>& s) { w.samples = s; })
      .def_readwrite("rate", &Waveform::rate)
      .def_property_readonly("seconds", &Waveform::seconds)
      .def("__len__", &Waveform::size)
      .def("__repr__", [](const Waveform& w) {
        std::ostringstream os;
        os << "Waveform(" << w.size() << " samples @ " << w.rate << " Hz)";
        return os.str();
      });

  m.def("load_wav", &load_wav, py::arg("path"));
  m.def("save_wav", &save_wav, py::arg("wave"), py::arg("path"));
  m.def("resample", &resample, py::arg("wave"), py::arg("rate"));
  m.def("si_snr", py::overload_cast<const Waveform&, const Waveform&>(&si_snr),
        py::arg("reference"), py::arg("estimate"));

  // --- codec ---
  py::class_<CodecSpec>(m, "CodecSpec")
      .def(py::init([](std::string family, int rate, int frame, int latent_dim,
                       int codebook_size, int num_stages, std::uint64_t seed) {
             CodecSpec s{std::move(family), rate, frame, latent_dim, codebook_size, num_stages, seed};
             return s;
           }),
           py::arg("family_id") = "", py::arg("rate") = 24000, py::arg("frame") = 64,
           py::arg("latent_dim") = 64, py::arg("codebook_size") = 64, py::arg("num_stages") = 4,
           py::arg("seed") = 0)
      .def_readwrite("family_id", &CodecSpec::family_id)
      .def_readwrite("rate", &CodecSpec::rate)
      .def_readwrite("frame", &CodecSpec::frame)
      .def_readwrite("latent_dim", &CodecSpec::latent_dim)
      .def_readwrite("codebook_size", &CodecSpec::codebook_size)
      .def_readwrite("num_stages", &CodecSpec::num_stages)
      .def_readwrite("seed", &CodecSpec::seed)
      .def_property_readonly("hop", &CodecSpec::hop)
      .def("id", &CodecSpec::id)
      .def("validate", &CodecSpec::validate);

  py::class_<SurrogateCodec, CodecPtr>(m, "SurrogateCodec")
      .def_property_readonly("spec", &SurrogateCodec::spec)
      .def_property_readonly("id", &SurrogateCodec::id)
      .def_property_readonly("analysis", &SurrogateCodec::analysis)
      .def_property_readonly("codebooks", &SurrogateCodec::codebooks)
      .def("frames_for", &SurrogateCodec::frames_for, py::arg("num_samples"))
      .def("encode",
           [](const SurrogateCodec& c, const Waveform& w) { return c.encode(w).frames; },
           py::arg("wave"), "d x L latent matrix")
      .def(
          "quantize",
          [](const SurrogateCodec& c, const Eigen::MatrixXd& z, int stages) {
            auto q = c.quantize(LatentSequence{z, c.spec().rate}, stages);
            Eigen::MatrixXi tokens = q.tokens.indices;
            return py::make_tuple(q.latent.frames, tokens);
          },
          py::arg("latent"), py::arg("stages") = -1, "(quantized latent, tokens)")
      .def(
          "decode",
          [](const SurrogateCodec& c, const Eigen::MatrixXd& z) {
            return c.decode(LatentSequence{z, c.spec().rate});
          },
          py::arg("latent"))
      .def("resynthesize", &SurrogateCodec::resynthesize, py::arg("wave"),
           py::call_guard<py::gil_scoped_release>());

  m.def(
      "make_codec", [](const CodecSpec& s) { return std::make_shared<SurrogateCodec>(make_codec(s)); },
      py::arg("spec"), py::call_guard<py::gil_scoped_release>());
  m.def("save_codec", [](const CodecPtr& c, const std::filesystem::path& p) { save_codec(*c, p); },
        py::arg("codec"), py::arg("path"));
  m.def(
      "load_codec",
      [](const std::filesystem::path& p) { return std::make_shared<SurrogateCodec>(load_codec(p)); },
      py::arg("path"));

  // --- keys ---
  py::class_<SecretAxis>(m, "SecretAxis")
      .def_readwrite("v", &SecretAxis::v)
      .def_readwrite("method", &SecretAxis::method)
      .def_readwrite("codec_id", &SecretAxis::codec_id);

  py::class_<CalibrationStats>(m, "CalibrationStats")
      .def(py::init<>())
      .def_readwrite("mu", &CalibrationStats::mu)
      .def_readwrite("sigma", &CalibrationStats::sigma)
      .def_readwrite("k", &CalibrationStats::k)
      .def_readwrite("tau", &CalibrationStats::tau)
      .def_readwrite("alpha", &CalibrationStats::alpha)
      .def_readwrite("n_null", &CalibrationStats::n_null);

  py::class_<SecretKey, KeyPtr>(m, "SecretKey")
      .def(py::init([](SecretAxis axis, std::optional<CalibrationStats> stats, double gamma) {
             return std::make_shared<SecretKey>(SecretKey{std::move(axis), stats, gamma});
           }),
           py::arg("axis"), py::arg("stats") = std::nullopt, py::arg("gamma") = 1.5)
      .def_readwrite("axis", &SecretKey::axis)
      .def_readwrite("stats", &SecretKey::stats)
      .def_readwrite("gamma", &SecretKey::gamma);

  m.def(
      "derive_axis",
      [](const CodecPtr& c, AxisMethod method, std::uint64_t seed, int stage) {
        return derive_axis(*c, method, seed, stage);
      },
      py::arg("codec"), py::arg("method") = AxisMethod::Cluster, py::arg("seed") = 0,
      py::arg("stage") = 0);
  m.def(
      "projection_score",
      [](const CodecPtr& c, const Waveform& w, const Eigen::VectorXd& axis, LatentMode mode) {
        return projection_score(*c, w, axis, mode);
      },
      py::arg("codec"), py::arg("wave"), py::arg("axis"),
      py::arg("mode") = LatentMode::PreQuantization);
  m.def("calibrate_from_scores",
        [](const std::vector<double>& s, double k) { return calibrate_from_scores(s, k); },
        py::arg("scores"), py::arg("k") = 1.5);
  m.def(
      "calibrate",
      [](const CodecPtr& c, const SecretAxis& axis, const std::vector<Waveform>& null_corpus,
         double k, LatentMode mode) { return calibrate(*c, axis, null_corpus, k, mode); },
      py::arg("codec"), py::arg("axis"), py::arg("null_corpus"), py::arg("k") = 1.5,
      py::arg("mode") = LatentMode::PreQuantization, py::call_guard<py::gil_scoped_release>());
  m.def("default_null_corpus", &default_null_corpus, py::arg("rate"), py::arg("count") = 64,
        py::arg("seconds") = 3.0, py::arg("seed") = 0x5EED);
  m.def("save_key", [](const KeyPtr& k, const std::filesystem::path& p) { save_key(*k, p); },
        py::arg("key"), py::arg("path"));
  m.def(
      "load_key",
      [](const std::filesystem::path& p) { return std::make_shared<SecretKey>(load_key(p)); },
      py::arg("path"));

  // --- embedding ---
  py::class_<EmbedConfig>(m, "EmbedConfig")
      .def(py::init<>())
      .def_readwrite("gamma", &EmbedConfig::gamma)
      .def_readwrite("sdr_db", &EmbedConfig::sdr_db)
      .def_readwrite("beta", &EmbedConfig::beta)
      .def_readwrite("eps_min", &EmbedConfig::eps_min)
      .def_readwrite("eps_max", &EmbedConfig::eps_max)
      .def_readwrite("n_steps", &EmbedConfig::n_steps)
      .def_readwrite("step_size", &EmbedConfig::step_size)
      .def_readwrite("adam_eps", &EmbedConfig::adam_eps)
      .def_readwrite("work_rate", &EmbedConfig::work_rate)
      .def_readwrite("pad_block", &EmbedConfig::pad_block);

  m.def("compute_budget", &compute_budget, py::arg("wave"), py::arg("config"));
  m.def(
      "embed_single",
      [](const Waveform& w, const CodecPtr& c, const KeyPtr& k, const EmbedConfig& cfg,
         HingeTarget target) {
        EmbedResult r;
        {
          py::gil_scoped_release nogil;
          r = embed_single(w, *c, *k, cfg, target);
        }
        return py::make_tuple(r.watermarked, trace_dict(r.trace));
      },
      py::arg("wave"), py::arg("codec"), py::arg("key"), py::arg("config") = EmbedConfig{},
      py::arg("target") = HingeTarget::Gamma, "returns (watermarked, trace)");
  m.def(
      "embed_joint",
      [](const Waveform& w, const std::vector<std::pair<CodecPtr, KeyPtr>>& members,
         const EmbedConfig& cfg) {
        const Committee c = to_committee(members);
        EmbedResult r;
        {
          py::gil_scoped_release nogil;
          r = embed_joint(w, c, cfg);
        }
        return py::make_tuple(r.watermarked, trace_dict(r.trace));
      },
      py::arg("wave"), py::arg("committee"), py::arg("config") = EmbedConfig{},
      "committee is a list of (codec, key) pairs; returns (watermarked, trace)");

  // --- detection ---
  py::class_<DetectionResult>(m, "DetectionResult")
      .def_readonly("raw_score", &DetectionResult::raw_score)
      .def_readonly("margin", &DetectionResult::margin)
      .def_readonly("detected", &DetectionResult::detected)
      .def_readonly("codec_id", &DetectionResult::codec_id);
  py::class_<EnsembleResult>(m, "EnsembleResult")
      .def_readonly("per_codec", &EnsembleResult::per_codec)
      .def_readonly("score", &EnsembleResult::score)
      .def_readonly("detected", &EnsembleResult::detected);

  m.def(
      "margin_single",
      [](const Waveform& w, const CodecPtr& c, const KeyPtr& k, MarginMode mode, LatentMode latent) {
        return margin_single(w, *c, *k, mode, latent);
      },
      py::arg("wave"), py::arg("codec"), py::arg("key"), py::arg("mode") = MarginMode::Sigma,
      py::arg("latent") = LatentMode::PreQuantization);
  m.def("median_rule", &median_rule, py::arg("margins"));
  m.def(
      "score_ensemble",
      [](const Waveform& w, const std::vector<std::pair<CodecPtr, KeyPtr>>& members,
         LatentMode latent) { return score_ensemble(w, to_committee(members), latent); },
      py::arg("wave"), py::arg("committee"), py::arg("latent") = LatentMode::PreQuantization);
  m.def(
      "delta_score",
      [](const Waveform& wm, const Waveform& clean, const CodecPtr& attacker,
         const std::vector<std::pair<CodecPtr, KeyPtr>>& members) {
        return delta_score(wm, clean, *attacker, to_committee(members));
      },
      py::arg("watermarked"), py::arg("clean"), py::arg("attacker"), py::arg("committee"));

  // --- attacks and baseline ---
  m.def("attack_gaussian", &attack_gaussian, py::arg("wave"), py::arg("snr_db"),
        py::arg("seed") = 0);
  m.def("attack_amplitude", &attack_amplitude, py::arg("wave"), py::arg("factor"));
  m.def("attack_lowpass", &attack_lowpass, py::arg("wave"), py::arg("cutoff_hz"));
  m.def("attack_resample", &attack_resample, py::arg("wave"), py::arg("intermediate_rate"));
  m.def(
      "attack_resynthesis",
      [](const Waveform& w, const CodecPtr& c) { return attack_resynthesis(w, *c); },
      py::arg("wave"), py::arg("codec"));

  m.def(
      "baseline_additive",
      [](const Waveform& w, std::uint64_t seed, double sdr_db) {
        auto r = baseline_additive(w, seed, sdr_db);
        return py::make_tuple(r.watermarked, to_array(r.pattern), r.score);
      },
      py::arg("wave"), py::arg("seed"), py::arg("sdr_db") = 30.0,
      "returns (watermarked, pattern, score)");
  m.def("baseline_score", &baseline_score, py::arg("suspect"), py::arg("reference"),
        py::arg("pattern"));

  // --- corpus ---
  m.def("synth_clip", &synth_clip, py::arg("domain"), py::arg("rate"), py::arg("seconds"),
        py::arg("seed"));
  m.def(
      "synthetic_corpus",
      [](std::size_t n, int rate, double seconds, std::uint64_t seed, std::optional<Domain> d) {
        return d ? synthetic_corpus(n, rate, seconds, seed, *d)
                 : synthetic_corpus(n, rate, seconds, seed);
      },
      py::arg("count"), py::arg("rate"), py::arg("seconds"), py::arg("seed") = 0,
      py::arg("domain") = std::nullopt);
}
