// latentmark command-line tool.

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>

#include "latentmark/attacks.hpp"
#include "latentmark/bench.hpp"
#include "latentmark/config.hpp"
#include "latentmark/corpus.hpp"
#include "latentmark/detector.hpp"
#include "latentmark/embedder.hpp"
#include "latentmark/errors.hpp"
#include "latentmark/key.hpp"

namespace fs = std::filesystem;
using namespace latentmark;

namespace {

constexpr int kExitError = 2;

Committee load_committee(const std::vector<std::string>& codecs, const std::vector<std::string>& keys) {
  if (codecs.size() != keys.size())
    throw ConfigError("--codec and --key must be given the same number of times");
  Committee c;
  for (std::size_t i = 0; i < codecs.size(); ++i) {
    auto codec = std::make_shared<const SurrogateCodec>(load_codec(codecs[i]));
    auto key = std::make_shared<const SecretKey>(load_key(keys[i]));
    if (key->axis.codec_id != codec->id())
      throw ConfigError(keys[i] + " belongs to " + key->axis.codec_id + ", not " + codec->id());
    c.push_back({codec, key});
  }
  return c;
}

std::vector<Waveform> load_wavs(const std::vector<std::string>& paths, int rate) {
  std::vector<Waveform> out;
  for (const auto& p : paths) out.push_back(resample(load_wav(p), rate));
  return out;
}

// Build (or fetch) codecs by spec so a bench run builds each one once.
class CodecCache {
 public:
  std::shared_ptr<const SurrogateCodec> get(const CodecSpec& spec) {
    const std::string id = spec.id() + "/" + std::to_string(spec.frame) + "/" +
                           std::to_string(spec.latent_dim) + "/" + std::to_string(spec.codebook_size) +
                           "/" + std::to_string(spec.num_stages);
    auto it = cache_.find(id);
    if (it != cache_.end()) return it->second;
    std::cerr << "building codec " << spec.id() << "\n";
    auto c = std::make_shared<const SurrogateCodec>(make_codec(spec));
    cache_[id] = c;
    return c;
  }

 private:
  std::map<std::string, std::shared_ptr<const SurrogateCodec>> cache_;
};

SecretKey make_key(const SurrogateCodec& codec, const RunConfig& cfg) {
  SecretKey key;
  key.axis = derive_axis(codec, cfg.axis.method, cfg.axis.seed, cfg.axis.stage);
  key.gamma = cfg.embed.gamma;
  const auto null = default_null_corpus(codec.spec().rate, cfg.calibration.clips,
                                        cfg.calibration.seconds, cfg.calibration.seed);
  key.stats = calibrate(codec, key.axis, null, cfg.calibration.k, cfg.latent_mode);
  return key;
}

void print_detection(const DetectionResult& r, MarginMode mode) {
  std::cout << "codec\t" << r.codec_id << "\tp\t" << std::setprecision(9) << r.raw_score
            << "\tmargin_" << to_string(mode) << '\t' << r.margin << "\tverdict\t"
            << (r.detected ? "detected" : "not-detected") << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Zero-bit latent-space audio watermarking"};
  app.require_subcommand(1);

  // make-codec
  auto* mk = app.add_subcommand("make-codec", "Build a surrogate codec and save it");
  CodecSpec spec;
  std::string mk_out;
  mk->add_option("--family", spec.family_id, "Family label (empty: independent codec)");
  mk->add_option("--rate", spec.rate, "Sample rate")->capture_default_str();
  mk->add_option("--frame", spec.frame, "Frame length")->capture_default_str();
  mk->add_option("--latent-dim", spec.latent_dim, "Latent dimension")->capture_default_str();
  mk->add_option("--codebook-size", spec.codebook_size, "Codewords per stage")->capture_default_str();
  mk->add_option("--stages", spec.num_stages, "Residual stages")->capture_default_str();
  mk->add_option("--seed", spec.seed, "Member seed")->capture_default_str();
  mk->add_option("-o,--output", mk_out, "Codec file")->required();

  // keygen
  auto* kg = app.add_subcommand("keygen", "Derive a secret axis for a codec");
  std::string kg_codec, kg_out, kg_method = "cluster";
  std::uint64_t kg_seed = 7;
  int kg_stage = 0;
  double kg_gamma = 1.5;
  bool kg_calibrate = false;
  double cal_k = 1.5;
  std::size_t cal_clips = 64;
  double cal_seconds = 3.0;
  std::uint64_t cal_seed = 0x5EED;
  kg->add_option("--codec", kg_codec, "Codec file")->required();
  kg->add_option("--method", kg_method, "cluster, pca or random")->capture_default_str();
  kg->add_option("--seed", kg_seed, "Seed for the random axis")->capture_default_str();
  kg->add_option("--stage", kg_stage, "Codebook stage")->capture_default_str();
  kg->add_option("--gamma", kg_gamma, "Target alignment score")->capture_default_str();
  kg->add_flag("--calibrate", kg_calibrate, "Calibrate on the default synthetic null corpus");
  kg->add_option("-o,--output", kg_out, "Key file")->required();

  // calibrate
  auto* cal = app.add_subcommand("calibrate", "Estimate the detection threshold of a key");
  std::string cal_codec, cal_key, cal_out;
  std::vector<std::string> cal_null;
  bool cal_quantized = false;
  cal->add_option("--codec", cal_codec, "Codec file")->required();
  cal->add_option("--key", cal_key, "Key file")->required();
  cal->add_option("--k", cal_k, "Threshold multiplier")->capture_default_str();
  cal->add_option("--null", cal_null, "Null-corpus WAV files (default: synthetic)");
  cal->add_option("--clips", cal_clips, "Synthetic null clips")->capture_default_str();
  cal->add_option("--seconds", cal_seconds, "Synthetic clip length")->capture_default_str();
  cal->add_option("--null-seed", cal_seed, "Synthetic null seed")->capture_default_str();
  cal->add_flag("--quantized", cal_quantized, "Score quantized latents");
  cal->add_option("-o,--output", cal_out, "Output key file (default: overwrite --key)");
  kg->add_option("--k", cal_k, "Threshold multiplier")->capture_default_str();
  kg->add_option("--clips", cal_clips, "Synthetic null clips")->capture_default_str();
  kg->add_option("--seconds", cal_seconds, "Synthetic clip length")->capture_default_str();
  kg->add_option("--null-seed", cal_seed, "Synthetic null seed")->capture_default_str();

  // embed
  auto* em = app.add_subcommand("embed", "Embed a watermark");
  std::string em_in, em_out, em_config, em_trace, em_mode = "single", em_target = "gamma";
  std::vector<std::string> em_codecs, em_keys;
  em->add_option("-i,--input", em_in, "Input WAV")->required();
  em->add_option("--codec", em_codecs, "Codec file (repeat for a committee)")->required();
  em->add_option("--key", em_keys, "Key file, paired with --codec")->required();
  em->add_option("--config", em_config, "Config file (JSON)");
  em->add_option("--mode", em_mode, "single or joint")->capture_default_str();
  em->add_option("--target", em_target, "Single-codec hinge: gamma or normalized")->capture_default_str();
  em->add_option("--trace", em_trace, "Write the optimization trace here");
  em->add_option("-o,--output", em_out, "Output WAV")->required();

  // detect
  auto* de = app.add_subcommand("detect", "Test a recording for the watermark");
  std::string de_in, de_mode = "sigma";
  std::vector<std::string> de_codecs, de_keys;
  bool de_quantized = false;
  de->add_option("-i,--input", de_in, "Suspect WAV")->required();
  de->add_option("--codec", de_codecs, "Codec file (repeat for a committee)")->required();
  de->add_option("--key", de_keys, "Key file, paired with --codec")->required();
  de->add_option("--margin", de_mode, "Single-codec denominator: sigma or alpha")->capture_default_str();
  de->add_flag("--quantized", de_quantized, "Score quantized latents");

  // attack
  auto* at = app.add_subcommand("attack", "Apply one attack to a WAV");
  std::string at_in, at_out, at_kind, at_codec;
  double at_param = 0.0;
  std::uint64_t at_seed = 0;
  at->add_option("-i,--input", at_in, "Input WAV")->required();
  at->add_option("--kind", at_kind, "gaussian, amplitude, lowpass, resample, resynthesis")->required();
  at->add_option("--param", at_param, "SNR dB, factor, cutoff Hz or intermediate rate");
  at->add_option("--seed", at_seed, "Noise seed")->capture_default_str();
  at->add_option("--codec", at_codec, "Codec file for resynthesis");
  at->add_option("-o,--output", at_out, "Output WAV")->required();

  // bench
  auto* be = app.add_subcommand("bench", "Run the detection/robustness benchmark");
  std::string be_config, be_tsv = "bench.tsv", be_json = "bench.json", be_write_default;
  std::vector<std::string> be_wavs;
  unsigned be_workers = 0;
  be->add_option("--config", be_config, "Config file (JSON); defaults when omitted");
  be->add_option("--corpus", be_wavs, "WAV files to use instead of the synthetic corpus");
  be->add_option("--workers", be_workers, "Worker threads (overrides config)");
  be->add_option("--tsv", be_tsv, "Report table")->capture_default_str();
  be->add_option("--json", be_json, "Summary file")->capture_default_str();
  be->add_option("--write-default-config", be_write_default, "Write the default config and exit");

  // corpus
  auto* co = app.add_subcommand("corpus", "Write a seeded synthetic corpus");
  std::size_t co_count = 12;
  int co_rate = 24000;
  double co_seconds = 3.0;
  std::uint64_t co_seed = 2024;
  std::string co_domain, co_dir;
  co->add_option("--count", co_count, "Clips")->capture_default_str();
  co->add_option("--rate", co_rate, "Sample rate")->capture_default_str();
  co->add_option("--seconds", co_seconds, "Clip length")->capture_default_str();
  co->add_option("--seed", co_seed, "Seed")->capture_default_str();
  co->add_option("--domain", co_domain, "ambient, speech or music (default: all)");
  co->add_option("-o,--output-dir", co_dir, "Directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitError;
  }

  try {
    if (*mk) {
      const auto codec = make_codec(spec);
      save_codec(codec, mk_out);
      std::cout << codec.id() << '\n';
      return 0;
    }

    if (*kg) {
      const auto codec = load_codec(kg_codec);
      SecretKey key;
      key.axis = derive_axis(codec, axis_method_from_string(kg_method), kg_seed, kg_stage);
      key.gamma = kg_gamma;
      if (kg_calibrate)
        key.stats = calibrate(codec, key.axis,
                              default_null_corpus(codec.spec().rate, cal_clips, cal_seconds, cal_seed), cal_k);
      save_key(key, kg_out);
      return 0;
    }

    if (*cal) {
      const auto codec = load_codec(cal_codec);
      SecretKey key = load_key(cal_key);
      if (key.axis.codec_id != codec.id())
        throw ConfigError("key belongs to " + key.axis.codec_id + ", not " + codec.id());
      const auto null = cal_null.empty()
                            ? default_null_corpus(codec.spec().rate, cal_clips, cal_seconds, cal_seed)
                            : load_wavs(cal_null, codec.spec().rate);
      key.stats = calibrate(codec, key.axis, null, cal_k,
                            cal_quantized ? LatentMode::Quantized : LatentMode::PreQuantization);
      save_key(key, cal_out.empty() ? cal_key : cal_out);
      const auto& s = *key.stats;
      std::cout << "mu\t" << s.mu << "\nsigma\t" << s.sigma << "\ntau\t" << s.tau << "\nalpha\t"
                << s.alpha << "\nn_null\t" << s.n_null << '\n';
      return 0;
    }

    if (*em) {
      const RunConfig cfg = em_config.empty() ? RunConfig{} : load_run_config(em_config);
      const Committee committee = load_committee(em_codecs, em_keys);
      const Waveform input = load_wav(em_in);
      EmbedResult r;
      if (em_mode == "single") {
        if (committee.size() != 1) throw ConfigError("single mode takes exactly one codec");
        const HingeTarget target = em_target == "gamma" ? HingeTarget::Gamma
                                   : em_target == "normalized"
                                       ? HingeTarget::Normalized
                                       : throw ConfigError("unknown target '" + em_target + "'");
        r = embed_single(input, *committee[0].codec, *committee[0].key, cfg.embed, target);
      } else if (em_mode == "joint") {
        r = embed_joint(input, committee, cfg.embed);
      } else {
        throw ConfigError("unknown mode '" + em_mode + "'");
      }
      save_wav(r.watermarked, em_out);
      if (!em_trace.empty()) {
        std::ofstream tr(em_trace);
        if (!tr) throw IoError("cannot write " + em_trace);
        write_trace(r.trace, tr);
      }
      std::cout << "epsilon\t" << r.trace.epsilon << "\nbest_step\t" << r.trace.best_step
                << "\nloss\t" << r.trace.loss[std::size_t(r.trace.best_step)] << "\nsi_snr_db\t"
                << si_snr(input, r.watermarked) << '\n';
      return 0;
    }

    if (*de) {
      const Committee committee = load_committee(de_codecs, de_keys);
      const Waveform suspect = load_wav(de_in);
      const LatentMode lm = de_quantized ? LatentMode::Quantized : LatentMode::PreQuantization;
      if (committee.size() == 1) {
        const MarginMode mode = margin_mode_from_string(de_mode);
        const auto r = margin_single(suspect, *committee[0].codec, *committee[0].key, mode, lm);
        print_detection(r, mode);
        return r.detected ? 0 : 1;
      }
      const auto e = score_ensemble(suspect, committee, lm);
      for (const auto& r : e.per_codec) print_detection(r, MarginMode::Alpha);
      std::cout << "ensemble_score\t" << e.score << "\tverdict\t"
                << (e.detected ? "detected" : "not-detected") << '\n';
      return e.detected ? 0 : 1;
    }

    if (*at) {
      const Waveform input = load_wav(at_in);
      AttackSpec a;
      a.kind = attack_kind_from_string(at_kind);
      a.parameter = at_param;
      a.seed = at_seed;
      if (a.kind == AttackKind::Resynthesis) {
        if (at_codec.empty()) throw ConfigError("resynthesis needs --codec");
        a.codec = std::make_shared<const SurrogateCodec>(load_codec(at_codec));
      }
      save_wav(apply_attack(input, a), at_out);
      return 0;
    }

    if (*be) {
      if (!be_write_default.empty()) {
        save_run_config(default_run_config(), be_write_default);
        return 0;
      }
      RunConfig cfg = be_config.empty() ? default_run_config() : load_run_config(be_config);
      if (be_workers > 0) cfg.bench.workers = be_workers;
      CodecCache cache;
      Committee committee;
      for (const auto& s : cfg.codecs) {
        auto codec = cache.get(s);
        committee.push_back({codec, std::make_shared<const SecretKey>(make_key(*codec, cfg))});
      }
      std::vector<AttackSpec> attacks;
      for (auto a : cfg.attacks) {
        if (a.codec) a.spec.codec = cache.get(*a.codec);
        attacks.push_back(a.spec);
      }
      std::vector<MethodSpec> methods;
      for (const auto& m : cfg.methods) methods.push_back({m.name, m.kind, cfg.embed, m.target, m.member});
      const auto corpus = be_wavs.empty()
                              ? synthetic_corpus(cfg.corpus.clips, cfg.corpus.rate,
                                                 cfg.corpus.seconds, cfg.corpus.seed)
                              : load_wavs(be_wavs, cfg.corpus.rate);
      const auto report = run_benchmark(corpus, methods, attacks, committee, cfg.bench);
      {
        std::ofstream tsv(be_tsv);
        if (!tsv) throw IoError("cannot write " + be_tsv);
        write_tsv(report, tsv);
      }
      {
        std::ofstream js(be_json);
        if (!js) throw IoError("cannot write " + be_json);
        auto j = summary_json(report);
        j["run_config"] = to_json(cfg);
        js << j.dump(2) << '\n';
      }
      write_tsv(report, std::cout);
      for (const auto& e : report.errors)
        std::cerr << "clip " << e.clip << " (" << e.method << "): " << e.message << '\n';
      return 0;
    }

    if (*co) {
      fs::create_directories(co_dir);
      const auto clips = co_domain.empty()
                             ? synthetic_corpus(co_count, co_rate, co_seconds, co_seed)
                             : synthetic_corpus(co_count, co_rate, co_seconds, co_seed,
                                                domain_from_string(co_domain));
      for (std::size_t i = 0; i < clips.size(); ++i) {
        std::ostringstream name;
        name << "clip_" << std::setw(4) << std::setfill('0') << i << ".wav";
        save_wav(clips[i], fs::path(co_dir) / name.str());
      }
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitError;
  }
  return kExitError;
}
