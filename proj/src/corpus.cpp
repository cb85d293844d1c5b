#include "latentmark/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "latentmark/errors.hpp"

namespace latentmark {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::uint64_t clip_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed ^ (0xD1B54A32D192ED03ull * (index + 1));
  z = (z ^ (z >> 33)) * 0xFF51AFD7ED558CCDull;
  z = (z ^ (z >> 33)) * 0xC4CEB9FE1A85EC53ull;
  return z ^ (z >> 33);
}

void one_pole_lowpass(std::vector<double>& x, double cutoff_hz, int rate) {
  const double a = std::exp(-kTwoPi * cutoff_hz / rate);
  double y = 0.0;
  for (auto& v : x) {
    y = (1.0 - a) * v + a * y;
    v = y;
  }
}

std::vector<double> ambient(std::size_t n, int rate, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::vector<double> x(n);
  for (auto& v : x) v = normal(rng);
  one_pole_lowpass(x, 400.0 + 2600.0 * uni(rng), rate);
  one_pole_lowpass(x, 2000.0 + 4000.0 * uni(rng), rate);

  const double swell_hz = 0.1 + 0.4 * uni(rng);
  const double phase = kTwoPi * uni(rng);
  for (std::size_t i = 0; i < n; ++i)
    x[i] *= 0.6 + 0.4 * std::sin(kTwoPi * swell_hz * double(i) / rate + phase);

  // Sparse decaying clicks.
  const int clicks = 2 + int(6 * uni(rng));
  for (int c = 0; c < clicks; ++c) {
    const auto start = std::size_t(uni(rng) * double(n));
    const double amp = 2.0 + 3.0 * uni(rng);
    const double decay = 0.002 + 0.01 * uni(rng);
    for (std::size_t i = start; i < n && i < start + std::size_t(0.1 * rate); ++i)
      x[i] += amp * normal(rng) * std::exp(-double(i - start) / (decay * rate));
  }
  return x;
}

std::vector<double> speech(std::size_t n, int rate, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const double f0 = 90.0 + 130.0 * uni(rng);
  const double vib_hz = 3.0 + 3.0 * uni(rng);
  const double f1 = 450.0 + 400.0 * uni(rng);
  const double f2 = 1100.0 + 1000.0 * uni(rng);
  const double syll_hz = 3.0 + 2.5 * uni(rng);
  const double nyq = 0.5 * rate;

  std::vector<double> x(n, 0.0);
  double phase = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = double(i) / rate;
    const double f = f0 * (1.0 + 0.03 * std::sin(kTwoPi * vib_hz * t));
    phase += kTwoPi * f / rate;
    double s = 0.0;
    for (int h = 1; h * f < std::min(4000.0, 0.45 * rate); ++h) {
      const double fh = h * f;
      const double formant = std::exp(-std::pow((fh - f1) / 200.0, 2)) +
                             0.6 * std::exp(-std::pow((fh - f2) / 300.0, 2)) + 0.05;
      s += formant / h * std::sin(h * phase);
    }
    const double env = std::pow(std::max(0.0, std::sin(kTwoPi * syll_hz * t)), 2);
    x[i] = env * s;
  }
  std::vector<double> breath(n);
  for (auto& v : breath) v = normal(rng);
  one_pole_lowpass(breath, std::min(3000.0, 0.4 * nyq), rate);
  for (std::size_t i = 0; i < n; ++i) x[i] += 0.05 * breath[i];
  return x;
}

std::vector<double> music(std::size_t n, int rate, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::vector<double> x(n, 0.0);
  std::size_t pos = 0;
  while (pos < n) {
    const auto len = std::size_t((0.25 + 0.35 * uni(rng)) * rate);
    const int midi = 48 + int(36 * uni(rng));
    const double f = 440.0 * std::pow(2.0, (midi - 69) / 12.0);
    const int harmonics = 3 + int(4 * uni(rng));
    const double decay = 0.1 + 0.4 * uni(rng);
    const double p0 = kTwoPi * uni(rng);
    for (std::size_t i = 0; i < len && pos + i < n; ++i) {
      const double t = double(i) / rate;
      double s = 0.0;
      for (int h = 1; h <= harmonics && h * f < 0.45 * rate; ++h)
        s += std::sin(kTwoPi * h * f * t + h * p0) / (h * h);
      const double attack = std::min(1.0, t / 0.01);
      x[pos + i] += attack * std::exp(-t / decay) * s;
    }
    pos += len;
  }
  return x;
}

}  // namespace

std::string to_string(Domain d) {
  switch (d) {
    case Domain::Ambient: return "ambient";
    case Domain::Speech: return "speech";
    case Domain::Music: return "music";
  }
  return "unknown";
}

Domain domain_from_string(const std::string& s) {
  if (s == "ambient") return Domain::Ambient;
  if (s == "speech") return Domain::Speech;
  if (s == "music") return Domain::Music;
  throw ConfigError("unknown corpus domain '" + s + "'");
}

Waveform synth_clip(Domain domain, int rate, double seconds, std::uint64_t seed) {
  if (rate <= 0 || seconds <= 0) throw ConfigError("synth_clip: rate and duration must be positive");
  const auto n = std::size_t(std::llround(seconds * rate));
  std::mt19937_64 rng(seed);
  std::vector<double> x;
  switch (domain) {
    case Domain::Ambient: x = ambient(n, rate, rng); break;
    case Domain::Speech: x = speech(n, rate, rng); break;
    case Domain::Music: x = music(n, rate, rng); break;
  }
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const double target = 0.05 + 0.15 * uni(rng);
  const double r = rms(x);
  double gain = r > 0 ? target / r : 0.0;
  double peak = 0.0;
  for (double v : x) peak = std::max(peak, std::abs(v));
  if (peak * gain > 0.95) gain = 0.95 / peak;
  for (auto& v : x) v *= gain;
  return Waveform(std::move(x), rate);
}

std::vector<Waveform> synthetic_corpus(std::size_t count, int rate, double seconds,
                                       std::uint64_t seed) {
  std::vector<Waveform> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i)
    out.push_back(synth_clip(Domain(i % 3), rate, seconds, clip_seed(seed, i)));
  return out;
}

std::vector<Waveform> synthetic_corpus(std::size_t count, int rate, double seconds,
                                       std::uint64_t seed, Domain domain) {
  std::vector<Waveform> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i)
    out.push_back(synth_clip(domain, rate, seconds, clip_seed(seed, i)));
  return out;
}

}  // namespace latentmark
