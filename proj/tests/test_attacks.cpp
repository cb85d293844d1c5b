#include <doctest.h>

#include <cmath>
#include <numbers>

#include "helpers.hpp"
#include "latentmark/attacks.hpp"
#include "latentmark/detector.hpp"
#include "latentmark/errors.hpp"
#include "oracle_values.hpp"

using namespace latentmark;

namespace {

Waveform tone(double freq, int rate, std::size_t n, double amp = 0.5) {
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = amp * std::sin(2.0 * std::numbers::pi * freq * double(i) / rate);
  return Waveform(std::move(x), rate);
}

double interior_rms(const Waveform& w, std::size_t edge) {
  return rms(std::span<const double>(w.samples).subspan(edge, w.size() - 2 * edge));
}

double interior_si_snr(const Waveform& ref, const Waveform& est, std::size_t edge) {
  return si_snr(std::span<const double>(ref.samples).subspan(edge, ref.size() - 2 * edge),
                std::span<const double>(est.samples).subspan(edge, est.size() - 2 * edge));
}

}  // namespace

TEST_CASE("gaussian noise") {
  const auto x = testing::noise_wave(100000, 24000, 1, 0.2);
  for (double snr : {0.0, 20.0, 60.0}) {
    const auto y = attack_gaussian(x, snr, 7);
    double ps = 0.0, pn = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      ps += x.samples[i] * x.samples[i];
      pn += (y.samples[i] - x.samples[i]) * (y.samples[i] - x.samples[i]);
    }
    CHECK(std::abs(10.0 * std::log10(ps / pn) - snr) <= 0.5);
  }
  CHECK(si_snr(x, attack_gaussian(x, 100.0, 3)) >= 95.0);
  CHECK(attack_gaussian(x, 30.0, 3).samples == attack_gaussian(x, 30.0, 3).samples);
  CHECK(attack_gaussian(x, 30.0, 3).samples != attack_gaussian(x, 30.0, 4).samples);
  CHECK_THROWS_AS(attack_gaussian(x, INFINITY, 1), ConfigError);
  CHECK_THROWS_AS(attack_gaussian(Waveform(std::vector<double>(10, 0.0), 8000), 30.0, 1), DegeneracyError);
}

TEST_CASE("amplitude") {
  const Waveform x({1.0, -1.0}, 8000);
  CHECK(attack_amplitude(x, 0.5).samples == std::vector<double>{0.5, -0.5});
  const auto y = testing::noise_wave(5000, 8000, 2);
  CHECK(attack_amplitude(y, 1.0).samples == y.samples);
  CHECK(std::abs(rms(attack_amplitude(y, 0.3)) - 0.3 * rms(y)) <= 1e-12);
  CHECK_THROWS_AS(attack_amplitude(y, 0.0), ConfigError);
  CHECK_THROWS_AS(attack_amplitude(y, -2.0), ConfigError);
}

TEST_CASE("amplitude attack follows the affine margin law") {
  const auto& c = testing::small_codec();
  const auto key = testing::calibrated_key(c, AxisMethod::Cluster, 16);
  const auto x = synth_clip(Domain::Speech, 16000, 1.0, 3);
  const auto& s = key.calibration();
  const double p = projection_score(c, x, key.axis.v);
  for (double a : {0.5, 0.9, 1.7}) {
    const auto r = margin_single(attack_amplitude(x, a), c, key);
    CHECK(r.margin == doctest::Approx((a * p - s.tau) / s.sigma).epsilon(1e-12));
  }
}

TEST_CASE("low-pass") {
  SUBCASE("kernel matches the reference") {
    const auto h = lowpass_kernel(4000, 24000);
    REQUIRE(h.size() == 255);
    for (std::size_t i = 0; i < 8; ++i) CHECK(h[i] == doctest::Approx(oracle::kLowpassKernelHead[i]).epsilon(1e-9));
    CHECK(h[127] == doctest::Approx(oracle::kLowpassKernelCenter[0]).epsilon(1e-12));
    for (std::size_t i = 0; i < 127; ++i) CHECK(h[i] == h[254 - i]);
  }
  SUBCASE("8 kHz tone is removed") {
    const auto x = tone(8000, 24000, 24000);
    const auto y = attack_lowpass(x, 4000);
    CHECK(rms(y) <= 1e-2 * rms(x));
    const double ratio = interior_rms(y, 2000) / interior_rms(x, 2000);
    CHECK(ratio <= 1e-9);
    CHECK(std::abs(std::log10(ratio) - std::log10(oracle::kLowpass8kInteriorRmsRatio[0])) <= 0.05);
  }
  SUBCASE("40 dB down at 1.25x cutoff") {
    const auto x = tone(5000, 24000, 24000);
    CHECK(interior_rms(attack_lowpass(x, 4000), 2000) <= 1e-2 * interior_rms(x, 2000));
  }
  SUBCASE("1 kHz tone passes") {
    const auto x = tone(1000, 24000, 24000);
    const auto y = attack_lowpass(x, 4000);
    CHECK(si_snr(x, y) >= 30.0);
    CHECK(si_snr(x, y) == doctest::Approx(oracle::kLowpass1kSiSnr[0]).epsilon(1e-6));
  }
  SUBCASE("DC is preserved") {
    const auto y = attack_lowpass(Waveform(std::vector<double>(3000, 0.25), 24000), 4000);
    for (double v : y.samples) CHECK(std::abs(v - 0.25) <= 1e-3);
  }
  SUBCASE("cutoff near Nyquist is close to identity") {
    const auto x = synth_clip(Domain::Music, 24000, 1.0, 5);
    CHECK(si_snr(x, attack_lowpass(x, 0.45 * 24000)) >= 40.0);
  }
  SUBCASE("bad cutoff") {
    const auto x = testing::noise_wave(1000, 24000, 3);
    CHECK_THROWS_AS(attack_lowpass(x, 12000), ConfigError);
    CHECK_THROWS_AS(attack_lowpass(x, 0), ConfigError);
  }
}

TEST_CASE("resample attack") {
  SUBCASE("same rate") {
    const auto x = synth_clip(Domain::Ambient, 24000, 1.0, 6);
    CHECK(si_snr(x, attack_resample(x, 24000)) >= 60.0);
  }
  SUBCASE("1 kHz through 16 kHz") {
    const auto x = tone(1000, 44100, 44100);
    const auto y = attack_resample(x, 16000);
    REQUIRE(y.size() == x.size());
    CHECK(y.rate == 44100);
    CHECK(si_snr(x, y) >= 30.0);
  }
  SUBCASE("10 kHz above the intermediate band") {
    const auto x = tone(10000, 44100, 44100);
    const auto y = attack_resample(x, 16000);
    CHECK(20.0 * std::log10(interior_rms(y, 2000) / interior_rms(x, 2000)) <= -20.0);
  }
  SUBCASE("odd lengths are kept") {
    const auto x = testing::noise_wave(1001, 22050, 2);
    CHECK(attack_resample(x, 7919).size() == 1001);
  }
}

TEST_CASE("resynthesis attack delegates to the codec") {
  const auto& c = testing::small_codec();
  const auto x = testing::noise_wave(1200, 16000, 4);
  CHECK(attack_resynthesis(x, c).samples == c.resynthesize(x).samples);
  AttackSpec spec{AttackKind::Resynthesis, 0.0, std::shared_ptr<const SurrogateCodec>(&c, [](auto*) {}), 0, ""};
  CHECK(apply_attack(x, spec).samples == c.resynthesize(x).samples);
  CHECK(spec.name() == "RSY(" + c.id() + ")");
}

TEST_CASE("attack specs") {
  const auto std4 = standard_dsp_attacks(9);
  REQUIRE(std4.size() == 4);
  CHECK(std4[0].kind == AttackKind::Gaussian);
  CHECK(std4[0].parameter == 60.0);
  CHECK(std4[0].seed == 9);
  CHECK(std4[1].parameter == 0.5);
  CHECK(std4[2].parameter == 4000.0);
  CHECK(std4[3].parameter == 16000.0);
  CHECK(std4[0].name() == "GAU");
  CHECK((AttackSpec{AttackKind::LowPass, 3000.0}.name()) == "LPF(3000Hz)");
  CHECK(AttackSpec{}.name() == "none");
  for (const char* s : {"identity", "gaussian", "amplitude", "lowpass", "resample", "resynthesis"})
    CHECK(to_string(attack_kind_from_string(s)) == s);
  CHECK_THROWS_AS(attack_kind_from_string("reverb"), ConfigError);
  CHECK_THROWS_AS((AttackSpec{AttackKind::Amplitude, 0.0}.validate()), ConfigError);
  CHECK_THROWS_AS((AttackSpec{AttackKind::Resample, 1.5}.validate()), ConfigError);
  CHECK_THROWS_AS((AttackSpec{AttackKind::Gaussian, NAN}.validate()), ConfigError);
  CHECK_THROWS_AS((AttackSpec{AttackKind::Resynthesis, 0.0}.validate()), ConfigError);

  const auto x = testing::noise_wave(4000, 24000, 5);
  for (const auto& a : std4) {
    const auto y1 = apply_attack(x, a);
    CHECK(y1.samples == apply_attack(x, a).samples);
    CHECK(y1.size() == x.size());
    CHECK(y1.rate == x.rate);
  }
  CHECK(apply_attack(x, AttackSpec{}).samples == x.samples);
}

TEST_CASE("additive baseline") {
  const auto x = synth_clip(Domain::Speech, 24000, 1.0, 8);
  const auto b = baseline_additive(x, 42, 30.0);
  CHECK(std::abs(rms(b.pattern) - 1.0) <= 1e-12);
  CHECK(b.pattern == baseline_pattern(x.size(), 42));
  CHECK(b.score >= 0.9);
  CHECK(b.score > kBaselineThreshold);
  // Mark power sits at the SDR target.
  double pn = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) pn += std::pow(b.watermarked.samples[i] - x.samples[i], 2);
  CHECK(10.0 * std::log10(std::pow(rms(x), 2) * double(x.size()) / pn) == doctest::Approx(30.0).epsilon(1e-9));

  CHECK(baseline_score(attack_amplitude(b.watermarked, 0.5), x, b.pattern) == doctest::Approx(b.score).epsilon(1e-9));
  CHECK(std::abs(baseline_score(x, x, b.pattern)) <= 1e-12);
  CHECK(std::abs(baseline_score(attack_amplitude(x, 0.5), x, b.pattern)) <= 1e-9);
  CHECK(std::abs(baseline_score(baseline_additive(x, 43, 30.0).watermarked, x, b.pattern)) < kBaselineThreshold);
  CHECK_THROWS_AS(baseline_score(x, x, std::vector<double>(10, 1.0)), ShapeError);
}

TEST_CASE("baseline does not survive resynthesis" * doctest::timeout(900)) {
  const auto& c = testing::default_codec();
  const auto corpus = synthetic_corpus(50, 24000, 3.0, 77);
  int detected = 0;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto b = baseline_additive(corpus[i], 1000 + i, 30.0);
    detected += baseline_score(attack_resynthesis(b.watermarked, c), corpus[i], b.pattern) > kBaselineThreshold;
  }
  MESSAGE("baseline survivors " << detected << "/50");
  CHECK(detected <= 5);
}
