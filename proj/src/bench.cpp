#include "latentmark/bench.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <random>
#include <thread>

#include "latentmark/errors.hpp"
#include "latentmark/seed.hpp"

namespace latentmark {

std::string to_string(MethodKind k) {
  switch (k) {
    case MethodKind::None: return "none";
    case MethodKind::Single: return "single";
    case MethodKind::Joint: return "joint";
    case MethodKind::Baseline: return "baseline";
  }
  return "unknown";
}

MethodKind method_kind_from_string(const std::string& s) {
  if (s == "none") return MethodKind::None;
  if (s == "single") return MethodKind::Single;
  if (s == "joint") return MethodKind::Joint;
  if (s == "baseline") return MethodKind::Baseline;
  throw ConfigError("unknown method kind '" + s + "'");
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(
    std::size_t corpus_size, std::size_t per_class, std::uint64_t seed) {
  if (corpus_size < 2 * per_class)
    throw ConfigError("corpus of " + std::to_string(corpus_size) + " clips cannot supply " +
                      std::to_string(per_class) + " clips per class");
  std::vector<std::size_t> idx(corpus_size);
  for (std::size_t i = 0; i < corpus_size; ++i) idx[i] = i;
  // Fisher-Yates with an explicit draw so the split does not depend on the
  // standard library's shuffle.
  std::mt19937_64 rng(seed);
  for (std::size_t i = corpus_size; i > 1; --i) std::swap(idx[i - 1], idx[rng() % i]);
  std::vector<std::size_t> pos(idx.begin(), idx.begin() + std::ptrdiff_t(per_class));
  std::vector<std::size_t> neg(idx.begin() + std::ptrdiff_t(per_class),
                               idx.begin() + std::ptrdiff_t(2 * per_class));
  return {pos, neg};
}

namespace {

struct ClipOutcome {
  bool ok = true;
  std::string error;
  bool positive = false;
  bool detected = false;
  double sisnr = 0.0;
  std::vector<char> attacked_detected;
  std::vector<double> dscore;
};

// Detection and transfer score of one method.
class MethodDetector {
 public:
  MethodDetector(const MethodSpec& m, const Committee& committee, const BenchConfig& cfg)
      : method_(m), committee_(committee), cfg_(cfg) {
    if (m.kind == MethodKind::Single || m.kind == MethodKind::None) {
      if (committee.empty()) throw ConfigError("method " + m.name + " needs a committee");
      if (m.member >= committee.size())
        throw ConfigError("method " + m.name + ": committee member out of range");
    }
    if (m.kind == MethodKind::Joint && committee.empty())
      throw ConfigError("method " + m.name + " needs a committee");
  }

  struct Mark {
    Waveform wave;
    std::vector<double> pattern;
  };

  Mark embed(const Waveform& clean, std::uint64_t clip_seed) const {
    switch (method_.kind) {
      case MethodKind::None: return {clean, {}};
      case MethodKind::Single: {
        const auto& m = committee_[method_.member];
        return {embed_single(clean, *m.codec, *m.key, method_.embed, method_.target).watermarked, {}};
      }
      case MethodKind::Joint: return {embed_joint(clean, committee_, method_.embed).watermarked, {}};
      case MethodKind::Baseline: {
        auto b = baseline_additive(clean, clip_seed, method_.embed.sdr_db);
        return {std::move(b.watermarked), std::move(b.pattern)};
      }
    }
    throw ConfigError("unknown method kind");
  }

  bool detect(const Waveform& suspect, const Waveform& clean, const Mark& mark) const {
    switch (method_.kind) {
      case MethodKind::None:
      case MethodKind::Single: {
        const auto& m = committee_[method_.member];
        return margin_single(suspect, *m.codec, *m.key, cfg_.margin_mode, cfg_.latent_mode).detected;
      }
      case MethodKind::Joint: return score_ensemble(suspect, committee_, cfg_.latent_mode).detected;
      case MethodKind::Baseline:
        return baseline_score(suspect, clean, mark.pattern) > kBaselineThreshold;
    }
    return false;
  }

  // The quantity whose watermarked-minus-clean difference is reported as dScore.
  double score(const Waveform& suspect, const Waveform& clean, const Mark& mark) const {
    switch (method_.kind) {
      case MethodKind::None:
      case MethodKind::Single: {
        const auto& m = committee_[method_.member];
        return margin_single(suspect, *m.codec, *m.key, MarginMode::Alpha, cfg_.latent_mode).margin;
      }
      case MethodKind::Joint: return score_ensemble(suspect, committee_, cfg_.latent_mode).score;
      case MethodKind::Baseline: return baseline_score(suspect, clean, mark.pattern);
    }
    return 0.0;
  }

 private:
  const MethodSpec& method_;
  const Committee& committee_;
  const BenchConfig& cfg_;
};

AttackSpec attack_for_clip(const AttackSpec& a, std::size_t clip) {
  AttackSpec out = a;
  if (a.kind == AttackKind::Gaussian) out.seed = derive_seed(a.seed, clip);
  return out;
}

ClipOutcome run_positive(const MethodDetector& det, const Waveform& clean, std::size_t clip,
                         const std::vector<AttackSpec>& attacks, std::uint64_t seed) {
  ClipOutcome o;
  o.positive = true;
  const auto mark = det.embed(clean, derive_seed(seed, clip));
  o.detected = det.detect(mark.wave, clean, mark);
  o.sisnr = si_snr(clean, mark.wave);
  for (const auto& a : attacks) {
    const AttackSpec spec = attack_for_clip(a, clip);
    const Waveform wm = apply_attack(mark.wave, spec);
    const Waveform cl = apply_attack(clean, spec);
    o.attacked_detected.push_back(det.detect(wm, clean, mark));
    o.dscore.push_back(det.score(wm, clean, mark) - det.score(cl, clean, mark));
  }
  return o;
}

ClipOutcome run_negative(const MethodDetector& det, const Waveform& clean, std::size_t clip,
                         std::uint64_t seed) {
  ClipOutcome o;
  // The baseline detector needs a pattern; a clean clip is tested against the
  // pattern it would have received.
  MethodDetector::Mark mark{clean, baseline_pattern(clean.size(), derive_seed(seed, clip))};
  o.detected = det.detect(clean, clean, mark);
  return o;
}

template <class F>
void parallel_for(std::size_t n, unsigned workers, F&& f) {
  workers = std::max(1u, std::min<unsigned>(workers, unsigned(std::max<std::size_t>(n, 1))));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) f(i);
    });
  for (auto& t : pool) t.join();
}

std::optional<double> ratio(std::size_t num, std::size_t den) {
  if (den == 0) return std::nullopt;
  return double(num) / double(den);
}

nlohmann::json config_snapshot(const std::vector<MethodSpec>& methods,
                               const std::vector<AttackSpec>& attacks, const Committee& committee,
                               const BenchConfig& cfg) {
  nlohmann::json j;
  j["dataset"] = cfg.dataset;
  j["per_class"] = cfg.per_class;
  j["split_seed"] = cfg.split_seed;
  j["baseline_seed"] = cfg.baseline_seed;
  j["margin_mode"] = to_string(cfg.margin_mode);
  j["latent_mode"] = cfg.latent_mode == LatentMode::Quantized ? "quantized" : "pre";
  for (const auto& m : committee) j["committee"].push_back(m.codec->id());
  for (const auto& m : methods) {
    nlohmann::json jm;
    jm["name"] = m.name;
    jm["kind"] = to_string(m.kind);
    jm["member"] = m.member;
    jm["target"] = m.target == HingeTarget::Gamma ? "gamma" : "normalized";
    jm["sdr_db"] = m.embed.sdr_db;
    jm["gamma"] = m.embed.gamma;
    jm["n_steps"] = m.embed.n_steps;
    j["methods"].push_back(jm);
  }
  for (const auto& a : attacks) j["attacks"].push_back(a.name());
  return j;
}

}  // namespace

BenchReport run_benchmark(const std::vector<Waveform>& corpus,
                          const std::vector<MethodSpec>& methods,
                          const std::vector<AttackSpec>& attacks, const Committee& committee,
                          const BenchConfig& cfg) {
  for (const auto& a : attacks) a.validate();
  const auto [pos, neg] = split_indices(corpus.size(), cfg.per_class, cfg.split_seed);

  BenchReport report;
  report.n_watermarked = pos.size();
  report.n_clean = neg.size();
  report.config = config_snapshot(methods, attacks, committee, cfg);

  for (const auto& method : methods) {
    const MethodDetector det(method, committee, cfg);
    // With no embedding both halves are clean.
    std::vector<std::pair<std::size_t, bool>> jobs;
    for (std::size_t i : pos) jobs.emplace_back(i, method.kind != MethodKind::None);
    for (std::size_t i : neg) jobs.emplace_back(i, false);

    std::vector<ClipOutcome> out(jobs.size());
    parallel_for(jobs.size(), cfg.workers, [&](std::size_t j) {
      const auto [clip, positive] = jobs[j];
      try {
        out[j] = positive ? run_positive(det, corpus[clip], clip, attacks, cfg.baseline_seed)
                          : run_negative(det, corpus[clip], clip, cfg.baseline_seed);
      } catch (const std::exception& e) {
        out[j] = ClipOutcome{};
        out[j].ok = false;
        out[j].error = e.what();
      }
    });

    std::size_t tp = 0, p = 0, fp = 0, n = 0;
    double sisnr = 0.0;
    std::vector<std::size_t> survived(attacks.size(), 0);
    std::vector<double> dsum(attacks.size(), 0.0);
    for (std::size_t j = 0; j < jobs.size(); ++j) {
      const auto& o = out[j];
      if (!o.ok) {
        report.errors.push_back({method.name, jobs[j].first, o.error});
        continue;
      }
      if (o.positive) {
        ++p;
        tp += o.detected;
        sisnr += o.sisnr;
        for (std::size_t a = 0; a < attacks.size(); ++a) {
          survived[a] += o.attacked_detected[a] != 0;
          dsum[a] += o.dscore[a];
        }
      } else {
        ++n;
        fp += o.detected;
      }
    }

    for (std::size_t a = 0; a < std::max<std::size_t>(attacks.size(), 1); ++a) {
      BenchRow row;
      row.dataset = cfg.dataset;
      row.method = method.name;
      row.attack = attacks.empty() ? "none" : attacks[a].name();
      row.n_pos = p;
      row.n_neg = n;
      row.tpr = ratio(tp, p);
      row.fpr = ratio(fp, n);
      row.acc = ratio(tp + (n - fp), p + n);
      if (p > 0) {
        row.dsisnr = sisnr / double(p);
        if (!attacks.empty()) {
          row.sur = ratio(survived[a], p);
          row.dscore = dsum[a] / double(p);
        }
      }
      report.rows.push_back(row);
    }
  }
  return report;
}

void write_tsv(const BenchReport& report, std::ostream& out) {
  auto cell = [&](const std::optional<double>& v) {
    if (v) {
      out << std::setprecision(6) << *v;
    } else {
      out << "NA";
    }
  };
  out << "dataset\tmethod\tattack\tTPR\tFPR\tAcc\tSur\tdSISNR\tdScore\n";
  for (const auto& r : report.rows) {
    out << r.dataset << '\t' << r.method << '\t' << r.attack << '\t';
    cell(r.tpr);
    out << '\t';
    cell(r.fpr);
    out << '\t';
    cell(r.acc);
    out << '\t';
    cell(r.sur);
    out << '\t';
    cell(r.dsisnr);
    out << '\t';
    cell(r.dscore);
    out << '\n';
  }
}

nlohmann::json summary_json(const BenchReport& report) {
  auto opt = [](const std::optional<double>& v) -> nlohmann::json {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
  };
  nlohmann::json j;
  j["n_watermarked"] = report.n_watermarked;
  j["n_clean"] = report.n_clean;
  j["config"] = report.config;
  j["rows"] = nlohmann::json::array();
  for (const auto& r : report.rows) {
    j["rows"].push_back({{"dataset", r.dataset},
                         {"method", r.method},
                         {"attack", r.attack},
                         {"TPR", opt(r.tpr)},
                         {"FPR", opt(r.fpr)},
                         {"Acc", opt(r.acc)},
                         {"Sur", opt(r.sur)},
                         {"dSISNR", opt(r.dsisnr)},
                         {"dScore", opt(r.dscore)},
                         {"n_pos", r.n_pos},
                         {"n_neg", r.n_neg}});
  }
  j["errors"] = nlohmann::json::array();
  for (const auto& e : report.errors)
    j["errors"].push_back({{"method", e.method}, {"clip", e.clip}, {"message", e.message}});
  return j;
}

}  // namespace latentmark
