#include "latentmark/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numeric>

#include "dsp_util.hpp"
#include "latentmark/errors.hpp"

namespace latentmark {

void validate(const Waveform& wave) {
  if (wave.rate <= 0) throw RateError("waveform rate must be positive");
  if (wave.samples.empty()) throw EmptyInputError("waveform is empty");
  for (double x : wave.samples)
    if (!std::isfinite(x)) throw NumericError("waveform contains non-finite samples");
}

// --- WAV --------------------------------------------------------------------

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

template <class T>
T read_le(const std::uint8_t* p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  return v;
}

template <class T>
void write_le(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

}  // namespace

Waveform load_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    throw FormatError(path.string() + ": not a RIFF/WAVE file");

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  const std::uint8_t* data = nullptr;
  std::size_t data_size = 0;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const auto* chunk = bytes.data() + pos;
    const auto size = read_le<std::uint32_t>(chunk + 4);
    const std::size_t body = pos + 8;
    const std::size_t avail = std::min<std::size_t>(size, bytes.size() - body);
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (avail < 16) throw FormatError(path.string() + ": truncated fmt chunk");
      format = read_le<std::uint16_t>(chunk + 8);
      channels = read_le<std::uint16_t>(chunk + 10);
      rate = read_le<std::uint32_t>(chunk + 12);
      bits = read_le<std::uint16_t>(chunk + 22);
      if (format == kFormatExtensible) {
        if (avail < 26) throw FormatError(path.string() + ": truncated extensible fmt");
        format = read_le<std::uint16_t>(chunk + 8 + 24);
      }
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = chunk + 8;
      data_size = avail;
    }
    pos = body + size + (size & 1u);
  }
  if (!have_fmt || data == nullptr) throw FormatError(path.string() + ": missing fmt or data chunk");
  if (channels != 1 && channels != 2)
    throw FormatError(path.string() + ": only mono or stereo is supported");
  if (rate == 0) throw FormatError(path.string() + ": zero sample rate");

  const bool pcm16 = format == kFormatPcm && bits == 16;
  const bool f32 = format == kFormatFloat && bits == 32;
  if (!pcm16 && !f32)
    throw FormatError(path.string() + ": unsupported encoding (need PCM16 or float32)");

  const std::size_t bytes_per_sample = bits / 8;
  const std::size_t frames = data_size / (bytes_per_sample * channels);
  if (frames == 0) throw EmptyInputError(path.string() + ": empty data chunk");

  std::vector<double> out(frames);
  for (std::size_t i = 0; i < frames; ++i) {
    double acc = 0.0;
    for (std::size_t c = 0; c < channels; ++c) {
      const auto* p = data + (i * channels + c) * bytes_per_sample;
      acc += pcm16 ? read_le<std::int16_t>(p) / 32768.0 : double(read_le<float>(p));
    }
    out[i] = channels == 1 ? acc : acc / channels;
  }
  return Waveform(std::move(out), int(rate));
}

void save_wav(const Waveform& wave, const std::filesystem::path& path) {
  validate(wave);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());

  const auto n = static_cast<std::uint32_t>(wave.samples.size());
  const std::uint32_t data_bytes = n * 4;
  out.write("RIFF", 4);
  write_le<std::uint32_t>(out, 4 + (8 + 16) + (8 + 4) + (8 + data_bytes));
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  write_le<std::uint32_t>(out, 16);
  write_le<std::uint16_t>(out, kFormatFloat);
  write_le<std::uint16_t>(out, 1);
  write_le<std::uint32_t>(out, std::uint32_t(wave.rate));
  write_le<std::uint32_t>(out, std::uint32_t(wave.rate) * 4);
  write_le<std::uint16_t>(out, 4);
  write_le<std::uint16_t>(out, 32);
  out.write("fact", 4);
  write_le<std::uint32_t>(out, 4);
  write_le<std::uint32_t>(out, n);
  out.write("data", 4);
  write_le<std::uint32_t>(out, data_bytes);
  for (double x : wave.samples) write_le<float>(out, static_cast<float>(x));
  if (!out) throw IoError("write failed for " + path.string());
}

// --- Resampler --------------------------------------------------------------

namespace {
constexpr double kCutoffFraction = 0.45;  // of the lower rate
constexpr int kZeroCrossings = 16;        // per side, at the lower rate
constexpr double kKaiserBeta = 6.0;
}  // namespace

Resampler::Resampler(int from_rate, int to_rate) : from_(from_rate), to_(to_rate) {
  if (from_rate <= 0 || to_rate <= 0) throw ConfigError("resampler rates must be positive");
  const long g = std::gcd(long(from_rate), long(to_rate));
  up_ = to_rate / g;
  down_ = from_rate / g;

  const double lower = std::min(from_rate, to_rate);
  const double fc = kCutoffFraction * lower / from_rate;  // cycles per input sample
  const double reach = kZeroCrossings * double(from_rate) / lower;
  half_width_ = int(std::ceil(reach));

  const int taps = 2 * half_width_ + 1;
  table_.assign(std::size_t(up_) * taps, 0.0);
  for (long p = 0; p < up_; ++p) {
    const double frac = double(p) / double(up_);
    for (int j = -half_width_; j <= half_width_; ++j) {
      const double x = j - frac;
      table_[std::size_t(p) * taps + (j + half_width_)] =
          detail::sinc(2.0 * fc * x) * detail::kaiser(x / reach, kKaiserBeta);
    }
  }
}

std::size_t Resampler::output_length(std::size_t input_length) const {
  return std::size_t(std::llround(double(input_length) * to_ / from_));
}

template <class Visit>
void Resampler::for_each_output(std::size_t input_length, std::size_t output_length,
                                Visit&& visit) const {
  const int taps = 2 * half_width_ + 1;
  const long n_in = long(input_length);
  for (std::size_t n = 0; n < output_length; ++n) {
    const long num = long(n) * down_;
    const long base = num / up_;
    const long phase = num % up_;
    const double* w = table_.data() + std::size_t(phase) * taps;
    const long j0 = std::max<long>(-half_width_, -base);
    const long j1 = std::min<long>(half_width_, n_in - 1 - base);
    double norm = 0.0;
    for (long j = j0; j <= j1; ++j) norm += w[j + half_width_];
    visit(n, base, w + half_width_, j0, j1, norm);
  }
}

std::vector<double> Resampler::apply(std::span<const double> input) const {
  return apply(input, output_length(input.size()));
}

std::vector<double> Resampler::apply(std::span<const double> input,
                                     std::size_t out_len) const {
  if (from_ == to_) {
    std::vector<double> y(out_len, 0.0);
    std::copy_n(input.begin(), std::min(out_len, input.size()), y.begin());
    return y;
  }
  std::vector<double> y(out_len, 0.0);
  for_each_output(input.size(), out_len,
                  [&](std::size_t n, long base, const double* w, long j0, long j1, double norm) {
                    if (j0 > j1 || norm == 0.0) return;
                    double acc = 0.0;
                    for (long j = j0; j <= j1; ++j) acc += w[j] * input[std::size_t(base + j)];
                    y[n] = acc / norm;
                  });
  return y;
}

std::vector<double> Resampler::apply_adjoint(std::span<const double> output,
                                             std::size_t input_length) const {
  std::vector<double> x(input_length, 0.0);
  if (from_ == to_) {
    std::copy_n(output.begin(), std::min(input_length, output.size()), x.begin());
    return x;
  }
  for_each_output(input_length, output.size(),
                  [&](std::size_t n, long base, const double* w, long j0, long j1, double norm) {
                    if (j0 > j1 || norm == 0.0) return;
                    const double g = output[n] / norm;
                    for (long j = j0; j <= j1; ++j) x[std::size_t(base + j)] += w[j] * g;
                  });
  return x;
}

Waveform resample(const Waveform& wave, int target_rate) {
  if (target_rate <= 0) throw ConfigError("target rate must be positive");
  if (wave.rate <= 0) throw ConfigError("waveform rate must be positive");
  if (target_rate == wave.rate) return wave;
  Resampler r(wave.rate, target_rate);
  return Waveform(r.apply(wave.samples), target_rate);
}

Waveform pad_to_multiple(const Waveform& wave, std::size_t block) {
  if (block == 0) throw ConfigError("pad block must be at least 1");
  const std::size_t n = wave.samples.size();
  const std::size_t padded = (n + block - 1) / block * block;
  if (padded == n) return wave;
  Waveform out = wave;
  out.samples.resize(padded, 0.0);
  return out;
}

Waveform fit_length(const Waveform& wave, std::size_t length) {
  Waveform out = wave;
  out.samples.resize(length, 0.0);
  return out;
}

// --- Metrics ----------------------------------------------------------------

double rms(std::span<const double> samples) {
  if (samples.empty()) throw EmptyInputError("rms of empty signal");
  double acc = 0.0;
  for (double x : samples) acc += x * x;
  return std::sqrt(acc / double(samples.size()));
}

double si_snr(std::span<const double> reference, std::span<const double> estimate) {
  if (reference.size() != estimate.size())
    throw ShapeError("si_snr: reference and estimate lengths differ");
  if (reference.empty()) throw EmptyInputError("si_snr of empty signals");
  double ref_energy = 0.0, dot = 0.0;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    ref_energy += reference[i] * reference[i];
    dot += reference[i] * estimate[i];
  }
  if (ref_energy == 0.0) throw DegeneracyError("si_snr: reference is identically zero");
  const double scale = dot / ref_energy;
  double target = 0.0, noise = 0.0;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    const double t = scale * reference[i];
    const double e = estimate[i] - t;
    target += t * t;
    noise += e * e;
  }
  if (target == 0.0) return -kSiSnrCapDb;
  if (noise == 0.0) return kSiSnrCapDb;
  return std::clamp(10.0 * std::log10(target / noise), -kSiSnrCapDb, kSiSnrCapDb);
}

double si_snr(const Waveform& reference, const Waveform& estimate) {
  if (reference.rate != estimate.rate) throw RateError("si_snr: sample rates differ");
  return si_snr(std::span<const double>(reference.samples),
                std::span<const double>(estimate.samples));
}

}  // namespace latentmark
