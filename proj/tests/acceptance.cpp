// Acceptance run: prints one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <map>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "latentmark/attacks.hpp"
#include "latentmark/bench.hpp"
#include "latentmark/codec.hpp"
#include "latentmark/corpus.hpp"
#include "latentmark/detector.hpp"
#include "latentmark/embedder.hpp"
#include "latentmark/key.hpp"

using namespace latentmark;

namespace {

using Clock = std::chrono::steady_clock;

constexpr int kRate = 24000;
constexpr double kSeconds = 3.0;
constexpr std::size_t kClips = 50;

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::map<int, Verdict> verdicts;
std::vector<EmbedTrace> traces;  // every embedding run, for the budget check

void progress(const std::string& msg) { std::cout << "# " << msg << std::endl; }

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::shared_ptr<const SurrogateCodec> build(const CodecSpec& s) {
  return std::make_shared<const SurrogateCodec>(make_codec(s));
}

std::shared_ptr<const SecretKey> key_for(const SurrogateCodec& c, AxisMethod m) {
  SecretKey k;
  k.axis = derive_axis(c, m);
  k.stats = calibrate(c, k.axis, default_null_corpus(c.spec().rate), 1.5);
  return std::make_shared<const SecretKey>(std::move(k));
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

std::vector<double> gaussian(std::size_t n, std::uint64_t seed, double sigma = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, sigma);
  std::vector<double> v(n);
  for (auto& x : v) x = nd(rng);
  return v;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Central 95% acceptance region of Binomial(n, q).
std::pair<int, int> binomial_region(int n, double q) {
  std::vector<double> pmf(std::size_t(n) + 1);
  for (int k = 0; k <= n; ++k)
    pmf[std::size_t(k)] = std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0) +
                                   k * std::log(q) + (n - k) * std::log1p(-q));
  int lo = 0, hi = n;
  double c = 0.0;
  for (int k = 0; k <= n; ++k) {
    c += pmf[std::size_t(k)];
    if (c > 0.025) {
      lo = k;
      break;
    }
  }
  c = 0.0;
  for (int k = n; k >= 0; --k) {
    c += pmf[std::size_t(k)];
    if (c > 0.025) {
      hi = k;
      break;
    }
  }
  return {lo, hi};
}

// --- 1 and 2 ------------------------------------------------------------------

void failure_mode_and_detectability(const std::shared_ptr<const SurrogateCodec>& codec) {
  progress("criteria 1-2: single-codec contrast and clean detectability");
  const auto t0 = Clock::now();
  const auto key = key_for(*codec, AxisMethod::Cluster);
  const auto corpus = synthetic_corpus(2 * kClips, kRate, kSeconds, 2024);
  const auto [pos, neg] = split_indices(corpus.size(), kClips, 0);
  const EmbedConfig cfg;  // gamma 1.5, 150 steps, 30 dB

  int tp = 0, latent_sur = 0, base_sur = 0, fp = 0;
  double sisnr = 0.0;
  for (std::size_t i = 0; i < pos.size(); ++i) {
    const Waveform& x = corpus[pos[i]];
    auto r = embed_single(x, *codec, *key, cfg);
    sisnr += si_snr(x, r.watermarked);
    tp += margin_single(r.watermarked, *codec, *key).detected;
    latent_sur += margin_single(attack_resynthesis(r.watermarked, *codec), *codec, *key).detected;
    traces.push_back(std::move(r.trace));

    const auto b = baseline_additive(x, 1000 + pos[i], cfg.sdr_db);
    base_sur += baseline_score(attack_resynthesis(b.watermarked, *codec), x, b.pattern) > kBaselineThreshold;
  }
  for (std::size_t i : neg) fp += margin_single(corpus[i], *codec, *key).detected;
  const double elapsed = seconds_since(t0);

  const double n = double(kClips);
  const bool ok1 = base_sur / n <= 0.10 && latent_sur / n >= 0.80 && elapsed <= 300.0;
  verdicts[1] = {ok1, fmt("baseline Sur %.2f (<= 0.10), latent Sur %.2f (>= 0.80), mean SI-SNR %.1f dB, %.0f s (<= 300 s)",
                          base_sur / n, latent_sur / n, sisnr / n, elapsed)};

  // Null tail on held-out clean clips, same key.
  const auto held = default_null_corpus(kRate, 256, kSeconds, 0x7A11);
  int over = 0;
  for (const auto& x : held) over += margin_single(x, *codec, *key).detected;
  const double q = over / 256.0;
  const auto [lo, hi] = binomial_region(int(kClips), q);
  const double acc = (tp + (n - fp)) / (2 * n);
  const bool ok2 = acc >= 0.90 && fp >= lo && fp <= hi;
  verdicts[2] = {ok2, fmt("Acc %.2f (>= 0.90), TPR %.2f, FP %d/50; held-out tail %.3f gives 95%% region [%d, %d]",
                          acc, tp / n, fp, q, lo, hi)};
}

// --- 3 ------------------------------------------------------------------------

void transferability(const std::shared_ptr<const SurrogateCodec>& first) {
  progress("criterion 3: joint committee vs single member under a held-out family codec");
  Committee committee;
  for (std::uint64_t s = 1; s <= 3; ++s) {
    auto c = s == 1 ? first : build(CodecSpec{"fam", kRate, 64, 64, 64, 4, s});
    committee.push_back({c, key_for(*c, AxisMethod::Cluster)});
  }
  const auto attacker = build(CodecSpec{"fam", kRate, 64, 64, 64, 4, 4});
  const auto corpus = synthetic_corpus(kClips, kRate, kSeconds, 2024);
  const EmbedConfig cfg;

  int joint_sur = 0, single_sur = 0, positive = 0;
  double delta_sum = 0.0;
  for (const auto& x : corpus) {
    auto j = embed_joint(x, committee, cfg);
    auto s = embed_single(x, *committee[0].codec, *committee[0].key, cfg);
    joint_sur += score_ensemble(attack_resynthesis(j.watermarked, *attacker), committee).detected;
    single_sur += margin_single(attack_resynthesis(s.watermarked, *attacker), *committee[0].codec,
                                *committee[0].key)
                      .detected;
    const double d = delta_score(j.watermarked, x, *attacker, committee);
    delta_sum += d;
    positive += d > 0.0;
    traces.push_back(std::move(j.trace));
    traces.push_back(std::move(s.trace));
  }
  const double n = double(kClips);
  const bool ok = joint_sur > single_sur && delta_sum / n > 0.0;
  verdicts[3] = {ok, fmt("joint Sur %.2f vs single Sur %.2f (strictly higher required), mean dScore %.2f (> 0), "
                         "dScore > 0 on %d/50",
                         joint_sur / n, single_sur / n, delta_sum / n, positive)};
}

// --- 4 ------------------------------------------------------------------------

void axis_ordering() {
  progress("criterion 4: cluster vs PCA axis, 5 repetitions x 5 codecs x 50 clips");
  const EmbedConfig cfg;
  int wins = 0;
  std::ostringstream detail;
  for (int rep = 0; rep < 5; ++rep) {
    const auto corpus = synthetic_corpus(kClips, kRate, kSeconds, 3000 + std::uint64_t(rep));
    double sur_c = 0.0, sur_p = 0.0;
    for (int i = 0; i < 5; ++i) {
      const auto codec = build(CodecSpec{"", kRate, 64, 64, 64, 4, std::uint64_t(100 + 5 * rep + i)});
      for (AxisMethod m : {AxisMethod::Cluster, AxisMethod::PCA}) {
        const auto key = key_for(*codec, m);
        int survived = 0;
        for (const auto& x : corpus) {
          auto r = embed_single(x, *codec, *key, cfg);
          survived += margin_single(attack_resynthesis(r.watermarked, *codec), *codec, *key).detected;
          traces.push_back(std::move(r.trace));
        }
        (m == AxisMethod::Cluster ? sur_c : sur_p) += survived / double(kClips) / 5.0;
      }
    }
    wins += sur_c >= sur_p;
    detail << (rep ? ", " : "") << fmt("%.3f/%.3f", sur_c, sur_p);
    progress(fmt("  repetition %d: cluster %.3f, PCA %.3f", rep + 1, sur_c, sur_p));
  }
  verdicts[4] = {wins >= 4, fmt("cluster >= PCA in %d/5 repetitions (>= 4); Sur cluster/PCA: ", wins) + detail.str()};
}

// --- 5 ------------------------------------------------------------------------

void budget_law() {
  progress("criterion 5: budget law");
  EmbedConfig cfg;
  struct Case {
    double level, sdr, expected;
  };
  bool exact = true;
  std::ostringstream detail;
  for (const Case& c : {Case{0.1, 20.0, 0.025}, Case{1.0, 0.0, 0.1}, Case{0.001, 60.0, 1e-4}}) {
    const Waveform w(std::vector<double>(4800, c.level), kRate);
    cfg.sdr_db = c.sdr;
    const double got = compute_budget(w, cfg);
    const double formula = std::clamp(cfg.beta * rms(w) * std::pow(10.0, -c.sdr / 20.0), cfg.eps_min, cfg.eps_max);
    exact = exact && got == formula && rel_err(got, c.expected) <= 1e-12;
    detail << fmt("%.6g ", got);
  }
  std::size_t steps = 0, violations = 0;
  for (const auto& t : traces) {
    for (double d : t.delta_linf) {
      ++steps;
      violations += d > t.epsilon;
    }
    violations += t.final_delta_linf > t.epsilon * (1.0 + 1e-12);
  }
  verdicts[5] = {exact && violations == 0 && steps > 0,
                 std::string("clamp examples -> ") + detail.str() +
                     fmt("(exact: %s); %zu traced steps over %zu runs, %zu with |delta| > eps", exact ? "yes" : "no",
                         steps, traces.size(), violations)};
}

// --- 6 ------------------------------------------------------------------------

void gradients(const std::shared_ptr<const SurrogateCodec>& codec) {
  progress("criterion 6: gradient checks");
  const double h = 1e-5;
  double worst_vjp = 0.0, worst_single = 0.0, worst_joint = 0.0, worst_adj = 0.0;

  const std::size_t T = 2400;
  for (std::uint64_t p = 0; p < 10; ++p) {
    const auto u = gaussian(T, 10 + p, 0.1);
    const LatentSequence z = codec->encode(Waveform(u, kRate));
    LatentSequence g{Eigen::MatrixXd(z.dim(), z.length()), kRate};
    const auto gv = gaussian(std::size_t(g.frames.size()), 20 + p);
    std::copy(gv.begin(), gv.end(), g.frames.data());
    const double lhs = (z.frames.array() * g.frames.array()).sum();
    const auto back = codec->encode_vjp(g, T).samples;
    worst_adj = std::max(worst_adj, rel_err(dot(u, back), lhs));

    // Central difference of <encode(s), g> along a random direction.
    const auto dir = gaussian(T, 30 + p);
    Waveform plus(u, kRate), minus(u, kRate);
    for (std::size_t i = 0; i < T; ++i) {
      plus.samples[i] += h * dir[i];
      minus.samples[i] -= h * dir[i];
    }
    auto f = [&](const Waveform& w) { return (codec->encode(w).frames.array() * g.frames.array()).sum(); };
    worst_vjp = std::max(worst_vjp, rel_err((f(plus) - f(minus)) / (2 * h), dot(back, dir)));
  }

  SecretKey key;
  key.axis = derive_axis(*codec, AxisMethod::Cluster);
  const Waveform s(gaussian(T, 40, 0.1), kRate);
  const auto gs = loss_single_grad(s, *codec, key);
  for (std::uint64_t p = 0; p < 10; ++p) {
    const auto dir = gaussian(T, 50 + p);
    Waveform plus = s, minus = s;
    for (std::size_t i = 0; i < T; ++i) {
      plus.samples[i] += h * dir[i];
      minus.samples[i] -= h * dir[i];
    }
    const double fd = (loss_single(plus, *codec, key) - loss_single(minus, *codec, key)) / (2 * h);
    worst_single = std::max(worst_single, rel_err(fd, dot(gs, dir)));
  }

  // Joint loss on a 44.1 kHz signal read by codecs at two other rates.
  Committee committee;
  for (const CodecSpec& spec : {CodecSpec{"g", 24000, 32, 32, 16, 2, 1}, CodecSpec{"g", 16000, 32, 32, 16, 2, 2}}) {
    auto c = build(spec);
    SecretKey k;
    k.axis = derive_axis(*c, AxisMethod::Cluster);
    CalibrationStats st;
    st.k = 1.5;
    st.mu = 0.5;
    st.sigma = 0.2;
    st.tau = st.mu + st.k * st.sigma;
    st.alpha = 0.7;
    st.n_null = 2;
    k.stats = st;
    committee.push_back({c, std::make_shared<const SecretKey>(k)});
  }
  const Waveform w(gaussian(4410, 60, 0.1), 44100);
  const auto gj = loss_joint_grad(w, committee);
  for (std::uint64_t p = 0; p < 10; ++p) {
    const auto dir = gaussian(w.size(), 70 + p);
    Waveform plus = w, minus = w;
    for (std::size_t i = 0; i < w.size(); ++i) {
      plus.samples[i] += h * dir[i];
      minus.samples[i] -= h * dir[i];
    }
    const double fd = (loss_joint(plus, committee) - loss_joint(minus, committee)) / (2 * h);
    worst_joint = std::max(worst_joint, rel_err(fd, dot(gj, dir)));
  }

  const bool ok = worst_vjp <= 1e-4 && worst_single <= 1e-4 && worst_joint <= 1e-4 && worst_adj <= 1e-10;
  verdicts[6] = {ok, fmt("worst relative error: encode_vjp %.2e, single loss %.2e, joint loss %.2e (<= 1e-4); "
                         "adjoint %.2e (<= 1e-10)",
                         worst_vjp, worst_single, worst_joint, worst_adj)};
}

// --- 7 ------------------------------------------------------------------------

void quantizer_fixpoint(const std::shared_ptr<const SurrogateCodec>& codec) {
  progress("criterion 7: quantizer fixpoint");
  const auto corpus = synthetic_corpus(20, kRate, kSeconds, 7000);
  std::size_t same = 0, total = 0;
  for (const auto& x : corpus) {
    const auto first = codec->quantize(codec->encode(x));
    const auto again = codec->quantize(codec->encode(codec->decode(first.latent)));
    const auto& a = first.tokens.indices;
    const auto& b = again.tokens.indices;
    for (Eigen::Index t = 1; t + 1 < a.cols(); ++t) {
      ++total;
      same += a.col(t) == b.col(t);
    }
  }
  const double frac = double(same) / double(total);
  verdicts[7] = {frac >= 0.99, fmt("%.4f of %zu interior frames keep all %d tokens (>= 0.99)", frac, total,
                                   codec->spec().num_stages)};
}

// --- 8 ------------------------------------------------------------------------

void median_rule_check() {
  progress("criterion 8: median rule");
  bool ok = median_rule({-1.0, 0.5, 2.0}) == 0.5 && median_rule({-1.0, 0.5, 0.7, 2.0}) == 0.5 &&
            median_rule({-0.2}) == -0.2;
  std::mt19937_64 rng(8);
  std::normal_distribution<double> nd;
  int stable = 0;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<DetectionResult> per(std::size_t(1 + trial % 9));
    for (std::size_t i = 0; i < per.size(); ++i) per[i] = {0.0, nd(rng), false, std::to_string(i)};
    const double base = ensemble_from(per).score;
    bool same = true;
    for (int p = 0; p < 10; ++p) {
      std::shuffle(per.begin(), per.end(), rng);
      same = same && ensemble_from(per).score == base;
    }
    stable += same;
  }
  ok = ok && stable == 100;
  verdicts[8] = {ok, fmt("odd/even/singleton examples exact; %d/100 random committees permutation invariant", stable)};
}

// --- 9 ------------------------------------------------------------------------

void dsp_reporting(const std::shared_ptr<const SurrogateCodec>& codec) {
  progress("criterion 9: DSP robustness rows and the amplitude law");
  const auto key = key_for(*codec, AxisMethod::Cluster);
  Committee committee{{codec, key}};
  const auto corpus = synthetic_corpus(20, kRate, kSeconds, 9000);
  BenchConfig cfg;
  cfg.dataset = "synthetic";
  cfg.per_class = 10;
  const EmbedConfig e;
  const std::vector<MethodSpec> methods{{"Latent-Cluster", MethodKind::Single, e},
                                        {"Baseline-Additive", MethodKind::Baseline, e}};
  const auto report = run_benchmark(corpus, methods, standard_dsp_attacks(9), committee, cfg);
  std::ostringstream table;
  write_tsv(report, table);
  std::cout << table.str();

  int found = 0;
  for (const auto& m : methods)
    for (const char* a : {"GAU", "AMP", "LPF", "RSM"})
      for (const auto& r : report.rows) found += r.method == m.name && r.attack == a && r.sur.has_value();

  const auto& st = key->calibration();
  double worst = 0.0;
  for (const auto& x : corpus) {
    const double p = projection_score(*codec, x, key->axis.v);
    const double m = margin_single(attack_amplitude(x, 0.5), *codec, *key).margin;
    const double law = (0.5 * p - st.tau) / st.sigma;
    worst = std::max(worst, std::abs(m - law) / std::max(1.0, std::abs(law)));
  }
  verdicts[9] = {found == 8 && worst <= 1e-12 && report.errors.empty(),
                 fmt("%d/8 method x attack rows emitted; amplitude law worst deviation %.1e (<= 1e-12)", found, worst)};
}

}  // namespace

int main() {
  const auto t0 = Clock::now();
  progress("building codec fam@24000#1");
  const auto codec = build(CodecSpec{"fam", kRate, 64, 64, 64, 4, 1});

  gradients(codec);
  quantizer_fixpoint(codec);
  median_rule_check();
  failure_mode_and_detectability(codec);
  transferability(codec);
  axis_ordering();
  dsp_reporting(codec);
  budget_law();

  int failed = 0;
  for (const auto& [id, v] : verdicts) {
    std::cout << "criterion " << id << ": " << (v.pass ? "PASS" : "FAIL") << " - " << v.detail << '\n';
    failed += !v.pass;
  }
  std::cout << "acceptance: " << verdicts.size() << " criteria evaluated, " << failed << " failed, "
            << fmt("%.0f s", seconds_since(t0)) << std::endl;
  return failed;
}
