#include <doctest.h>

#include <cmath>
#include <sstream>

#include "helpers.hpp"
#include "latentmark/detector.hpp"
#include "latentmark/embedder.hpp"
#include "latentmark/errors.hpp"

using namespace latentmark;

namespace {

// Key whose hinge sits `gap` above the current score of `x`.
SecretKey key_with_gap(const SurrogateCodec& c, const Waveform& x, double gap, double alpha) {
  SecretKey key;
  key.axis = derive_axis(c, AxisMethod::Cluster);
  const double p = projection_score(c, x, key.axis.v);
  CalibrationStats s;
  s.k = 0.0;
  s.sigma = 1.0;
  s.mu = p + gap;
  s.tau = s.mu;
  s.alpha = alpha;
  s.n_null = 2;
  key.stats = s;
  key.gamma = p + gap;
  return key;
}

template <class T>
std::shared_ptr<const T> share(T v) {
  return std::make_shared<const T>(std::move(v));
}

CodecSpec family_member(std::uint64_t seed) { return CodecSpec{"fam", 16000, 16, 16, 8, 2, seed}; }

void check_trace_budget(const EmbedTrace& t) {
  for (double d : t.delta_linf) CHECK(d <= t.epsilon);
  CHECK(t.final_delta_linf <= t.epsilon);
  CHECK(t.loss[std::size_t(t.best_step)] <= t.loss.front());
}

}  // namespace

TEST_CASE("budget") {
  EmbedConfig cfg;
  const Waveform a(std::vector<double>(1000, 0.1), 16000);
  const Waveform b(std::vector<double>(1000, 1.0), 16000);
  const Waveform c(std::vector<double>(1000, 0.001), 16000);

  cfg.sdr_db = 20.0;
  CHECK(compute_budget(a, cfg) == 2.5 * rms(a) * std::pow(10.0, -20.0 / 20.0));
  CHECK(compute_budget(a, cfg) == doctest::Approx(0.025).epsilon(1e-12));
  cfg.sdr_db = 0.0;
  CHECK(compute_budget(b, cfg) == 0.1);
  cfg.sdr_db = 60.0;
  CHECK(compute_budget(c, cfg) == 1e-4);
}

TEST_CASE("config validation") {
  auto bad = [](auto&& change) {
    EmbedConfig cfg;
    change(cfg);
    return cfg;
  };
  CHECK_NOTHROW(EmbedConfig{}.validate());
  CHECK_THROWS_AS(bad([](auto& c) { c.gamma = 0.0; }).validate(), ConfigError);
  CHECK_THROWS_AS(bad([](auto& c) { c.eps_min = 0.2; }).validate(), ConfigError);
  CHECK_THROWS_AS(bad([](auto& c) { c.eps_min = 0.0; }).validate(), ConfigError);
  CHECK_THROWS_AS(bad([](auto& c) { c.n_steps = 0; }).validate(), ConfigError);
  CHECK_THROWS_AS(bad([](auto& c) { c.beta1 = 1.0; }).validate(), ConfigError);
  CHECK_THROWS_AS(bad([](auto& c) { c.pad_block = 0; }).validate(), ConfigError);
  CHECK_THROWS_AS(bad([](auto& c) { c.sdr_db = INFINITY; }).validate(), ConfigError);
}

TEST_CASE("single loss values") {
  const auto& c = testing::small_codec();
  const auto x = testing::noise_wave(800, 16000, 5);
  CHECK(loss_single(x, c, key_with_gap(c, x, 0.0, 1.0)) == 0.0);
  CHECK(loss_single(x, c, key_with_gap(c, x, -5.0, 1.0)) == 0.0);
  CHECK(loss_single(x, c, key_with_gap(c, x, 0.3, 1.0)) == doctest::Approx(0.3).epsilon(1e-12));
}

TEST_CASE("joint loss values") {
  const auto& c = testing::small_codec();
  const auto x = testing::noise_wave(800, 16000, 5);
  auto member = [&](double gap, double alpha) {
    return CommitteeMember{std::shared_ptr<const SurrogateCodec>(&c, [](auto*) {}),
                           share(key_with_gap(c, x, gap, alpha))};
  };
  CHECK(loss_joint(x, {member(-0.5, 1.0), member(-2.0, 3.0)}) == 0.0);
  CHECK(loss_joint(x, {member(1.5, 1.5)}) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(loss_joint(x, {member(-1.0, 1.5), member(1.5, 1.5)}) == doctest::Approx(0.5).epsilon(1e-12));
  // Equal gap ratios weigh equally regardless of scale.
  CHECK(loss_joint(x, {member(0.2, 0.1)}) == doctest::Approx(loss_joint(x, {member(6.0, 3.0)})).epsilon(1e-12));
  CHECK_THROWS_AS(loss_joint(x, {}), ConfigError);

  SecretKey bare = key_with_gap(c, x, 1.0, 1.0);
  bare.stats.reset();
  CHECK_THROWS_AS(loss_joint(x, {{std::shared_ptr<const SurrogateCodec>(&c, [](auto*) {}), share(bare)}}),
                  ConfigError);
}

TEST_CASE("loss gradients match finite differences") {
  const double h = 1e-5;
  SUBCASE("single") {
    const auto& c = testing::small_codec();
    const auto x = testing::noise_wave(600, 16000, 6);
    const auto key = key_with_gap(c, x, 0.4, 1.0);
    const auto g = loss_single_grad(x, c, key);
    for (std::uint64_t p = 0; p < 10; ++p) {
      const auto u = testing::gaussian(600, 50 + p);
      Waveform plus = x, minus = x;
      for (std::size_t i = 0; i < 600; ++i) {
        plus.samples[i] += h * u[i];
        minus.samples[i] -= h * u[i];
      }
      const double fd = (loss_single(plus, c, key) - loss_single(minus, c, key)) / (2 * h);
      const double an = testing::dot(g, u);
      CHECK(std::abs(fd - an) <= 1e-4 * std::abs(an));
    }
  }
  SUBCASE("joint across rates") {
    auto a = share(make_codec(family_member(1)));
    auto b = share(make_codec(CodecSpec{"", 8000, 16, 16, 8, 1, 9}));
    const auto x = testing::noise_wave(1470, 44100, 7);
    Committee committee{{a, share(key_with_gap(*a, x, 0.3, 0.7))}, {b, share(key_with_gap(*b, x, 0.2, 1.3))}};
    const auto g = loss_joint_grad(x, committee);
    REQUIRE(g.size() == x.size());
    for (std::uint64_t p = 0; p < 10; ++p) {
      const auto u = testing::gaussian(1470, 70 + p);
      Waveform plus = x, minus = x;
      for (std::size_t i = 0; i < x.size(); ++i) {
        plus.samples[i] += h * u[i];
        minus.samples[i] -= h * u[i];
      }
      const double fd = (loss_joint(plus, committee) - loss_joint(minus, committee)) / (2 * h);
      const double an = testing::dot(g, u);
      CHECK(std::abs(fd - an) <= 1e-4 * std::abs(an));
    }
  }
  SUBCASE("inactive hinge has zero gradient") {
    const auto& c = testing::small_codec();
    const auto x = testing::noise_wave(600, 16000, 6);
    for (double v : loss_single_grad(x, c, key_with_gap(c, x, -0.1, 1.0))) CHECK(v == 0.0);
  }
}

TEST_CASE("embed_single") {
  const auto& c = testing::small_codec();
  EmbedConfig cfg;

  SUBCASE("satisfied input is returned unchanged") {
    const auto x = testing::noise_wave(1600, 16000, 8);
    const auto r = embed_single(x, c, key_with_gap(c, x, -0.01, 1.0), cfg);
    CHECK(r.watermarked.samples == x.samples);
    CHECK(r.trace.loss.size() == 1);
    CHECK(r.trace.best_step == 0);
  }

  SUBCASE("3 s clip: best effort within budget") {
    const auto& d = testing::default_codec();
    SecretKey key;
    key.axis = derive_axis(d, AxisMethod::Cluster);
    const auto x = synth_clip(Domain::Speech, 24000, 3.0, 12);
    const auto r = embed_single(x, d, key, cfg);
    REQUIRE(r.trace.loss.size() == std::size_t(cfg.n_steps + 1));
    CHECK(r.trace.epsilon == compute_budget(x, cfg));
    check_trace_budget(r.trace);

    // The score is linear, so the best any perturbation with |delta| <= eps
    // can do is p0 + eps * ||grad p||_1.
    const double p0 = projection_score(d, x, key.axis.v);
    const auto g = loss_single_grad(x, d, key);
    double l1 = 0.0;
    for (double v : g) l1 += std::abs(v);
    const double reachable = p0 + r.trace.epsilon * l1;
    const double p = projection_score(d, r.watermarked, key.axis.v);
    MESSAGE("score " << p0 << " -> " << p << ", reachable " << reachable << ", gamma " << key.gamma);
    CHECK(p == doctest::Approx(r.trace.final_scores[0]).epsilon(1e-9));
    CHECK(p <= reachable + 1e-12);
    if (reachable >= key.gamma) {
      CHECK(p >= key.gamma);
    } else {
      CHECK(p >= 0.95 * reachable);
    }
    double linf = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) linf = std::max(linf, std::abs(r.watermarked.samples[i] - x.samples[i]));
    CHECK(linf <= r.trace.epsilon * (1.0 + 1e-12));
  }

  SUBCASE("reaches gamma when the budget allows it") {
    const auto& d = testing::default_codec();
    SecretKey key;
    key.axis = derive_axis(d, AxisMethod::Cluster);
    const auto x = synth_clip(Domain::Speech, 24000, 3.0, 12);
    const double p0 = projection_score(d, x, key.axis.v);
    double l1 = 0.0;
    for (double v : loss_single_grad(x, d, key)) l1 += std::abs(v);
    key.gamma = p0 + 0.5 * compute_budget(x, cfg) * l1;
    const auto r = embed_single(x, d, key, cfg);
    CHECK(projection_score(d, r.watermarked, key.axis.v) >= key.gamma);
    check_trace_budget(r.trace);
  }

  SUBCASE("tighter SDR target gives a smaller budget") {
    const auto& d = testing::default_codec();
    SecretKey key;
    key.axis = derive_axis(d, AxisMethod::Cluster);
    const auto x = synth_clip(Domain::Music, 24000, 3.0, 13);
    EmbedConfig loose = cfg, tight = cfg;
    loose.sdr_db = 20.0;
    tight.sdr_db = 40.0;
    CHECK(compute_budget(x, tight) < compute_budget(x, loose));
    for (const auto& k : {loose, tight}) {
      const auto r = embed_single(x, d, key, k);
      check_trace_budget(r.trace);
      const double q = si_snr(x, r.watermarked);
      MESSAGE("SDR target " << k.sdr_db << " -> SI-SNR " << q);
      // An infinity-norm budget of beta * rms * 10^(-SDR/20) caps the distortion
      // power at beta^2 times the target.
      CHECK(q >= k.sdr_db - 20.0 * std::log10(k.beta));
    }
  }

  SUBCASE("input at another rate keeps its rate and length") {
    const auto x = testing::noise_wave(2205, 22050, 9);
    const auto r = embed_single(x, c, key_with_gap(c, resample(x, 16000), 0.05, 1.0), cfg);
    CHECK(r.watermarked.rate == 22050);
    CHECK(r.watermarked.size() == 2205);
    check_trace_budget(r.trace);
  }

  SUBCASE("output samples stay in [-1, 1]") {
    std::vector<double> s(1600);
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = (i % 2 ? 1.0 : -1.0);
    const Waveform x(s, 16000);
    const auto r = embed_single(x, c, key_with_gap(c, x, 0.5, 1.0), cfg);
    for (double v : r.watermarked.samples) CHECK(std::abs(v) <= 1.0);
  }

  SUBCASE("non-finite loss is reported with its step") {
    const auto x = testing::noise_wave(800, 16000, 5);
    const auto r = [&] {
      try {
        embed_single(x, c, key_with_gap(c, x, 0.5, 0.0), cfg, HingeTarget::Normalized);
      } catch (const NumericError& e) {
        return std::string(e.what());
      }
      return std::string();
    }();
    CHECK(r.find("step 0") != std::string::npos);
  }
}

TEST_CASE("embed_joint") {
  SUBCASE("a committee of one matches the normalized single embedder") {
    const auto& c = testing::small_codec();
    const auto x = testing::noise_wave(3000, 16000, 10);
    const auto key = key_with_gap(c, x, 0.2, 0.4);
    EmbedConfig cfg;
    cfg.work_rate = 16000;
    cfg.n_steps = 40;
    const auto single = embed_single(x, c, key, cfg, HingeTarget::Normalized);
    const auto joint = embed_joint(x, {{std::shared_ptr<const SurrogateCodec>(&c, [](auto*) {}), share(key)}}, cfg);
    REQUIRE(single.trace.loss.size() == joint.trace.loss.size());
    for (std::size_t i = 0; i < single.trace.loss.size(); ++i)
      CHECK(std::abs(single.trace.loss[i] - joint.trace.loss[i]) <= 1e-10);
    for (std::size_t i = 0; i < x.size(); ++i)
      CHECK(std::abs(single.watermarked.samples[i] - joint.watermarked.samples[i]) <= 1e-10);
  }

  SUBCASE("three family members all end with positive margins") {
    Committee committee;
    for (std::uint64_t s = 1; s <= 3; ++s) {
      auto codec = share(make_codec(family_member(s)));
      committee.push_back({codec, share(testing::calibrated_key(*codec))});
    }
    const auto x = synth_clip(Domain::Ambient, 16000, 3.0, 14);
    EmbedConfig cfg;
    const auto r = embed_joint(x, committee, cfg);
    check_trace_budget(r.trace);
    CHECK(r.watermarked.size() == x.size());
    CHECK(r.trace.codec_ids.size() == 3);
    for (const auto& m : committee) {
      const auto d = margin_single(r.watermarked, *m.codec, *m.key, MarginMode::Alpha);
      MESSAGE(m.codec->id() << " margin " << d.margin);
      CHECK(d.margin > 0.0);
    }
    // Work signal is padded to whole blocks.
    CHECK(r.trace.loss.size() >= 1);
  }

  SUBCASE("empty committee") {
    CHECK_THROWS_AS(embed_joint(testing::noise_wave(800, 16000, 1), {}, EmbedConfig{}), ConfigError);
  }
}

TEST_CASE("trace file") {
  EmbedTrace t;
  t.codec_ids = {"a@1#0", "b@2#0"};
  t.loss = {1.0, 0.5};
  t.delta_linf = {0.0, 0.01};
  t.scores = {{0.1, 0.2}, {0.3, 0.4}};
  std::ostringstream out;
  write_trace(t, out);
  CHECK(out.str() == "step\tloss\tdelta_linf\tp_a@1#0\tp_b@2#0\n0\t1\t0\t0.1\t0.2\n1\t0.5\t0.01\t0.3\t0.4\n");
}
