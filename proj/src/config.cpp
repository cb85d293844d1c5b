#include "latentmark/config.hpp"

#include <fstream>
#include <set>

#include "latentmark/errors.hpp"

namespace latentmark {

using nlohmann::json;

namespace {

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [k, v] : j.items())
    if (!allowed.count(k)) throw ConfigError(where + ": unknown field '" + k + "'");
}

template <class T>
void read(const json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end()) out = it->get<T>();
}

std::string latent_mode_name(LatentMode m) {
  return m == LatentMode::Quantized ? "quantized" : "pre";
}

LatentMode latent_mode_from_string(const std::string& s) {
  if (s == "pre") return LatentMode::PreQuantization;
  if (s == "quantized") return LatentMode::Quantized;
  throw ConfigError("unknown latent mode '" + s + "'");
}

std::string target_name(HingeTarget t) { return t == HingeTarget::Gamma ? "gamma" : "normalized"; }

HingeTarget target_from_string(const std::string& s) {
  if (s == "gamma") return HingeTarget::Gamma;
  if (s == "normalized") return HingeTarget::Normalized;
  throw ConfigError("unknown hinge target '" + s + "'");
}

}  // namespace

json to_json(const CodecSpec& s) {
  return {{"family_id", s.family_id}, {"rate", s.rate},
          {"frame", s.frame},         {"latent_dim", s.latent_dim},
          {"codebook_size", s.codebook_size}, {"num_stages", s.num_stages},
          {"seed", s.seed}};
}

CodecSpec codec_spec_from_json(const json& j) {
  check_keys(j, {"family_id", "rate", "frame", "latent_dim", "codebook_size", "num_stages", "seed"},
             "codec");
  CodecSpec s;
  read(j, "family_id", s.family_id);
  read(j, "rate", s.rate);
  read(j, "frame", s.frame);
  read(j, "latent_dim", s.latent_dim);
  read(j, "codebook_size", s.codebook_size);
  read(j, "num_stages", s.num_stages);
  read(j, "seed", s.seed);
  s.validate();
  return s;
}

json to_json(const EmbedConfig& c) {
  return {{"gamma", c.gamma},       {"sdr_db", c.sdr_db},     {"beta", c.beta},
          {"eps_min", c.eps_min},   {"eps_max", c.eps_max},   {"n_steps", c.n_steps},
          {"step_size", c.step_size}, {"beta1", c.beta1},     {"beta2", c.beta2},
          {"adam_eps", c.adam_eps}, {"work_rate", c.work_rate}, {"pad_block", c.pad_block}};
}

EmbedConfig embed_config_from_json(const json& j) {
  check_keys(j, {"gamma", "sdr_db", "beta", "eps_min", "eps_max", "n_steps", "step_size", "beta1",
                 "beta2", "adam_eps", "work_rate", "pad_block"},
             "embed");
  EmbedConfig c;
  read(j, "gamma", c.gamma);
  read(j, "sdr_db", c.sdr_db);
  read(j, "beta", c.beta);
  read(j, "eps_min", c.eps_min);
  read(j, "eps_max", c.eps_max);
  read(j, "n_steps", c.n_steps);
  read(j, "step_size", c.step_size);
  read(j, "beta1", c.beta1);
  read(j, "beta2", c.beta2);
  read(j, "adam_eps", c.adam_eps);
  read(j, "work_rate", c.work_rate);
  read(j, "pad_block", c.pad_block);
  c.validate();
  return c;
}

json to_json(const RunConfig& c) {
  json j;
  j["codecs"] = json::array();
  for (const auto& s : c.codecs) j["codecs"].push_back(to_json(s));
  j["axis"] = {{"method", to_string(c.axis.method)}, {"seed", c.axis.seed}, {"stage", c.axis.stage}};
  j["calibration"] = {{"k", c.calibration.k},
                      {"clips", c.calibration.clips},
                      {"seconds", c.calibration.seconds},
                      {"seed", c.calibration.seed}};
  j["embed"] = to_json(c.embed);
  j["detector"] = {{"margin_mode", to_string(c.margin_mode)},
                   {"latent", latent_mode_name(c.latent_mode)}};
  j["corpus"] = {{"clips", c.corpus.clips},
                 {"seconds", c.corpus.seconds},
                 {"rate", c.corpus.rate},
                 {"seed", c.corpus.seed}};
  json b = {{"dataset", c.bench.dataset},
            {"per_class", c.bench.per_class},
            {"split_seed", c.bench.split_seed},
            {"baseline_seed", c.bench.baseline_seed},
            {"workers", c.bench.workers}};
  b["methods"] = json::array();
  for (const auto& m : c.methods)
    b["methods"].push_back({{"name", m.name},
                            {"kind", to_string(m.kind)},
                            {"target", target_name(m.target)},
                            {"member", m.member}});
  b["attacks"] = json::array();
  for (const auto& a : c.attacks) {
    json ja = {{"kind", to_string(a.spec.kind)},
               {"parameter", a.spec.parameter},
               {"seed", a.spec.seed},
               {"label", a.spec.label}};
    if (a.codec) ja["codec"] = to_json(*a.codec);
    b["attacks"].push_back(ja);
  }
  j["bench"] = b;
  return j;
}

RunConfig run_config_from_json(const json& j) {
  check_keys(j, {"codecs", "axis", "calibration", "embed", "detector", "corpus", "bench"}, "config");
  RunConfig c;
  try {
    if (j.contains("codecs")) {
      c.codecs.clear();
      for (const auto& s : j.at("codecs")) c.codecs.push_back(codec_spec_from_json(s));
      if (c.codecs.empty()) throw ConfigError("config: codecs must not be empty");
    }
    if (j.contains("axis")) {
      const auto& a = j.at("axis");
      check_keys(a, {"method", "seed", "stage"}, "axis");
      if (a.contains("method")) c.axis.method = axis_method_from_string(a.at("method").get<std::string>());
      read(a, "seed", c.axis.seed);
      read(a, "stage", c.axis.stage);
    }
    if (j.contains("calibration")) {
      const auto& a = j.at("calibration");
      check_keys(a, {"k", "clips", "seconds", "seed"}, "calibration");
      read(a, "k", c.calibration.k);
      read(a, "clips", c.calibration.clips);
      read(a, "seconds", c.calibration.seconds);
      read(a, "seed", c.calibration.seed);
    }
    if (j.contains("embed")) c.embed = embed_config_from_json(j.at("embed"));
    if (j.contains("detector")) {
      const auto& d = j.at("detector");
      check_keys(d, {"margin_mode", "latent"}, "detector");
      if (d.contains("margin_mode"))
        c.margin_mode = margin_mode_from_string(d.at("margin_mode").get<std::string>());
      if (d.contains("latent"))
        c.latent_mode = latent_mode_from_string(d.at("latent").get<std::string>());
    }
    if (j.contains("corpus")) {
      const auto& a = j.at("corpus");
      check_keys(a, {"clips", "seconds", "rate", "seed"}, "corpus");
      read(a, "clips", c.corpus.clips);
      read(a, "seconds", c.corpus.seconds);
      read(a, "rate", c.corpus.rate);
      read(a, "seed", c.corpus.seed);
    }
    if (j.contains("bench")) {
      const auto& b = j.at("bench");
      check_keys(b, {"dataset", "per_class", "split_seed", "baseline_seed", "workers", "methods",
                     "attacks"},
                 "bench");
      read(b, "dataset", c.bench.dataset);
      read(b, "per_class", c.bench.per_class);
      read(b, "split_seed", c.bench.split_seed);
      read(b, "baseline_seed", c.bench.baseline_seed);
      read(b, "workers", c.bench.workers);
      if (b.contains("methods")) {
        for (const auto& m : b.at("methods")) {
          check_keys(m, {"name", "kind", "target", "member"}, "method");
          MethodConfig mc;
          mc.kind = method_kind_from_string(m.at("kind").get<std::string>());
          mc.name = m.value("name", to_string(mc.kind));
          if (m.contains("target")) mc.target = target_from_string(m.at("target").get<std::string>());
          read(m, "member", mc.member);
          c.methods.push_back(mc);
        }
      }
      if (b.contains("attacks")) {
        for (const auto& a : b.at("attacks")) {
          check_keys(a, {"kind", "parameter", "seed", "label", "codec"}, "attack");
          AttackConfig ac;
          ac.spec.kind = attack_kind_from_string(a.at("kind").get<std::string>());
          read(a, "parameter", ac.spec.parameter);
          read(a, "seed", ac.spec.seed);
          read(a, "label", ac.spec.label);
          if (a.contains("codec")) ac.codec = codec_spec_from_json(a.at("codec"));
          if (ac.spec.kind == AttackKind::Resynthesis && !ac.codec)
            throw ConfigError("resynthesis attack needs a codec spec");
          if (ac.spec.kind != AttackKind::Resynthesis) ac.spec.validate();
          c.attacks.push_back(ac);
        }
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  c.bench.margin_mode = c.margin_mode;
  c.bench.latent_mode = c.latent_mode;
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return run_config_from_json(j);
}

void save_run_config(const RunConfig& cfg, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << to_json(cfg).dump(2) << '\n';
}

RunConfig default_run_config() {
  RunConfig c;
  c.codecs = {CodecSpec{"fam", 24000, 64, 64, 64, 4, 1}};
  c.methods = {{"Latent-Cluster", MethodKind::Single, HingeTarget::Gamma, 0},
               {"Baseline-Additive", MethodKind::Baseline, HingeTarget::Gamma, 0}};
  c.attacks.push_back({AttackSpec{AttackKind::Identity, 0, nullptr, 0, "none"}, std::nullopt});
  for (const auto& a : standard_dsp_attacks()) c.attacks.push_back({a, std::nullopt});
  c.attacks.push_back({AttackSpec{AttackKind::Resynthesis, 0, nullptr, 0, "RSY"}, c.codecs[0]});
  return c;
}

}  // namespace latentmark
