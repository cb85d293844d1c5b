#include "latentmark/attacks.hpp"

#include <cmath>
#include <iomanip>
#include <random>
#include <sstream>

#include "dsp_util.hpp"
#include "latentmark/errors.hpp"

namespace latentmark {

namespace {

constexpr int kLowpassTaps = 255;
constexpr double kLowpassKaiserBeta = 6.0;

// Centered FIR with odd symmetric kernel. Near the edges each output is divided
// by the sum of the taps that landed inside the signal, so DC passes exactly.
std::vector<double> filter_centered(const std::vector<double>& x, const std::vector<double>& h) {
  const auto n = std::ptrdiff_t(x.size());
  const auto half = std::ptrdiff_t(h.size() / 2);
  std::vector<double> y(x.size(), 0.0);
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(-half, -i);
    const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(half, n - 1 - i);
    double acc = 0.0, wsum = 0.0;
    for (std::ptrdiff_t k = lo; k <= hi; ++k) {
      const double w = h[std::size_t(k + half)];
      acc += w * x[std::size_t(i + k)];
      wsum += w;
    }
    y[std::size_t(i)] = acc / wsum;
  }
  return y;
}

std::string format_number(double v) {
  std::ostringstream os;
  os << std::setprecision(6) << v;
  return os.str();
}

}  // namespace

std::string to_string(AttackKind k) {
  switch (k) {
    case AttackKind::Identity: return "identity";
    case AttackKind::Gaussian: return "gaussian";
    case AttackKind::Amplitude: return "amplitude";
    case AttackKind::LowPass: return "lowpass";
    case AttackKind::Resample: return "resample";
    case AttackKind::Resynthesis: return "resynthesis";
  }
  return "unknown";
}

AttackKind attack_kind_from_string(const std::string& s) {
  if (s == "identity" || s == "none") return AttackKind::Identity;
  if (s == "gaussian" || s == "GAU") return AttackKind::Gaussian;
  if (s == "amplitude" || s == "AMP") return AttackKind::Amplitude;
  if (s == "lowpass" || s == "LPF") return AttackKind::LowPass;
  if (s == "resample" || s == "RSM") return AttackKind::Resample;
  if (s == "resynthesis" || s == "RSY") return AttackKind::Resynthesis;
  throw ConfigError("unknown attack kind '" + s + "'");
}

std::string AttackSpec::name() const {
  if (!label.empty()) return label;
  switch (kind) {
    case AttackKind::Identity: return "none";
    case AttackKind::Gaussian: return "GAU(" + format_number(parameter) + "dB)";
    case AttackKind::Amplitude: return "AMP(" + format_number(parameter) + ")";
    case AttackKind::LowPass: return "LPF(" + format_number(parameter) + "Hz)";
    case AttackKind::Resample: return "RSM(" + format_number(parameter) + "Hz)";
    case AttackKind::Resynthesis: return "RSY(" + (codec ? codec->id() : std::string("?")) + ")";
  }
  return "unknown";
}

void AttackSpec::validate() const {
  switch (kind) {
    case AttackKind::Identity: break;
    case AttackKind::Gaussian:
      if (!std::isfinite(parameter)) throw ConfigError("gaussian SNR must be finite");
      break;
    case AttackKind::Amplitude:
      if (!(parameter > 0) || !std::isfinite(parameter))
        throw ConfigError("amplitude factor must be positive");
      break;
    case AttackKind::LowPass:
      if (!(parameter > 0) || !std::isfinite(parameter))
        throw ConfigError("low-pass cutoff must be positive");
      break;
    case AttackKind::Resample:
      if (!(parameter >= 1) || parameter != std::floor(parameter) || parameter > 1e7)
        throw ConfigError("intermediate rate must be a positive integer");
      break;
    case AttackKind::Resynthesis:
      if (!codec) throw ConfigError("resynthesis attack needs a codec");
      break;
  }
}

std::vector<AttackSpec> standard_dsp_attacks(std::uint64_t seed) {
  return {
      AttackSpec{AttackKind::Gaussian, 60.0, nullptr, seed, "GAU"},
      AttackSpec{AttackKind::Amplitude, 0.5, nullptr, 0, "AMP"},
      AttackSpec{AttackKind::LowPass, 4000.0, nullptr, 0, "LPF"},
      AttackSpec{AttackKind::Resample, 16000.0, nullptr, 0, "RSM"},
  };
}

Waveform attack_gaussian(const Waveform& wave, double snr_db, std::uint64_t seed) {
  validate(wave);
  if (!std::isfinite(snr_db)) throw ConfigError("gaussian SNR must be finite");
  const double r = rms(wave);
  if (r == 0.0) throw DegeneracyError("gaussian attack on a zero-power signal");
  const double noise_rms = r * std::pow(10.0, -snr_db / 20.0);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, noise_rms);
  Waveform out = wave;
  for (auto& v : out.samples) v += normal(rng);
  return out;
}

Waveform attack_amplitude(const Waveform& wave, double factor) {
  if (!(factor > 0) || !std::isfinite(factor)) throw ConfigError("amplitude factor must be positive");
  Waveform out = wave;
  for (auto& v : out.samples) v *= factor;
  return out;
}

std::vector<double> lowpass_kernel(double cutoff_hz, int rate) {
  if (rate <= 0) throw RateError("sample rate must be positive");
  if (!(cutoff_hz > 0) || !(cutoff_hz < 0.5 * rate))
    throw ConfigError("low-pass cutoff must lie in (0, rate/2)");
  const double fc = cutoff_hz / rate;
  const int half = kLowpassTaps / 2;
  std::vector<double> h(kLowpassTaps);
  double sum = 0.0;
  for (int i = -half; i <= half; ++i) {
    const double w = detail::kaiser(double(i) / (half + 1), kLowpassKaiserBeta);
    const double v = 2.0 * fc * detail::sinc(2.0 * fc * i) * w;
    h[std::size_t(i + half)] = v;
    sum += v;
  }
  for (auto& v : h) v /= sum;
  return h;
}

Waveform attack_lowpass(const Waveform& wave, double cutoff_hz) {
  validate(wave);
  const auto h = lowpass_kernel(cutoff_hz, wave.rate);
  // Forward then backward pass; the kernel is symmetric so both are the same
  // centered convolution.
  return Waveform(filter_centered(filter_centered(wave.samples, h), h), wave.rate);
}

Waveform attack_resample(const Waveform& wave, int intermediate_rate) {
  validate(wave);
  if (intermediate_rate <= 0) throw ConfigError("intermediate rate must be positive");
  return fit_length(resample(resample(wave, intermediate_rate), wave.rate), wave.size());
}

Waveform attack_resynthesis(const Waveform& wave, const SurrogateCodec& codec) {
  return codec.resynthesize(wave);
}

Waveform apply_attack(const Waveform& wave, const AttackSpec& spec) {
  spec.validate();
  switch (spec.kind) {
    case AttackKind::Identity: return wave;
    case AttackKind::Gaussian: return attack_gaussian(wave, spec.parameter, spec.seed);
    case AttackKind::Amplitude: return attack_amplitude(wave, spec.parameter);
    case AttackKind::LowPass: return attack_lowpass(wave, spec.parameter);
    case AttackKind::Resample: return attack_resample(wave, int(spec.parameter));
    case AttackKind::Resynthesis: return attack_resynthesis(wave, *spec.codec);
  }
  throw ConfigError("unknown attack kind");
}

// --- Additive baseline -------------------------------------------------------

std::vector<double> baseline_pattern(std::size_t length, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::vector<double> p(length);
  for (auto& v : p) v = normal(rng);
  const double r = rms(p);
  for (auto& v : p) v /= r;
  return p;
}

BaselineResult baseline_additive(const Waveform& wave, std::uint64_t seed, double sdr_db) {
  validate(wave);
  if (!std::isfinite(sdr_db)) throw ConfigError("baseline SDR must be finite");
  BaselineResult res;
  res.pattern = baseline_pattern(wave.size(), seed);
  const double scale = rms(wave) * std::pow(10.0, -sdr_db / 20.0);
  res.watermarked = wave;
  for (std::size_t i = 0; i < wave.size(); ++i)
    res.watermarked.samples[i] += scale * res.pattern[i];
  res.score = baseline_score(res.watermarked, wave, res.pattern);
  return res;
}

double baseline_score(const Waveform& suspect, const Waveform& reference,
                      const std::vector<double>& pattern) {
  validate(reference);
  const Waveform s = fit_length(resample(suspect, reference.rate), reference.size());
  if (pattern.size() != reference.size()) throw ShapeError("baseline pattern length mismatch");
  double sr = 0.0, rr = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    sr += s.samples[i] * reference.samples[i];
    rr += reference.samples[i] * reference.samples[i];
  }
  const double a = rr > 0.0 ? sr / rr : 0.0;
  double rp = 0.0, res2 = 0.0, pp = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double r = s.samples[i] - a * reference.samples[i];
    rp += r * pattern[i];
    res2 += r * r;
    pp += pattern[i] * pattern[i];
  }
  if (res2 <= 1e-300 || pp == 0.0) return 0.0;
  return rp / std::sqrt(res2 * pp);
}

}  // namespace latentmark
