#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

namespace latentmark {

/// Mono sample buffer at a fixed sample rate. Amplitudes are nominally in [-1, 1].
struct Waveform {
  std::vector<double> samples;
  int rate = 0;  // Hz

  Waveform() = default;
  Waveform(std::vector<double> s, int r) : samples(std::move(s)), rate(r) {}

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  double seconds() const { return rate > 0 ? double(samples.size()) / rate : 0.0; }
};

/// Throws if the waveform is empty, has a non-positive rate or holds non-finite samples.
void validate(const Waveform& wave);

// --- WAV I/O ----------------------------------------------------------------

/// Reads a RIFF/WAVE file holding 16-bit PCM or 32-bit float samples, mono or
/// stereo. Stereo is downmixed by channel mean.
Waveform load_wav(const std::filesystem::path& path);

/// Writes a mono 32-bit float WAV. Samples are rounded to the nearest float.
void save_wav(const Waveform& wave, const std::filesystem::path& path);

// --- Resampling -------------------------------------------------------------

/// Band-limited sample-rate converter between two fixed integer rates.
///
/// Polyphase windowed sinc (Kaiser window, 16 zero crossings per side measured
/// at the lower rate, cutoff at 0.45 times the lower rate). Each output sample
/// is normalized by the sum of its in-range taps, which keeps DC exact up to
/// the edges. The operator is linear in its input; apply_adjoint() applies its
/// exact transpose and is what cross-rate gradients go through.
class Resampler {
 public:
  Resampler(int from_rate, int to_rate);

  int from_rate() const { return from_; }
  int to_rate() const { return to_; }

  /// round(n * to / from)
  std::size_t output_length(std::size_t input_length) const;

  std::vector<double> apply(std::span<const double> input) const;
  std::vector<double> apply(std::span<const double> input, std::size_t output_length) const;

  /// Transpose of apply(., output.size()) for inputs of length input_length.
  std::vector<double> apply_adjoint(std::span<const double> output,
                                    std::size_t input_length) const;

 private:
  template <class Visit>
  void for_each_output(std::size_t input_length, std::size_t output_length,
                       Visit&& visit) const;

  int from_ = 0;
  int to_ = 0;
  long up_ = 1;    // output phases
  long down_ = 1;  // input step per `up_` outputs
  int half_width_ = 0;           // taps per side, in input samples
  std::vector<double> table_;    // up_ x (2*half_width_+1)
};

Waveform resample(const Waveform& wave, int target_rate);

/// Zero-pads the tail to the next multiple of `block` samples.
Waveform pad_to_multiple(const Waveform& wave, std::size_t block);

/// Truncates or zero-pads to exactly `length` samples.
Waveform fit_length(const Waveform& wave, std::size_t length);

// --- Metrics ----------------------------------------------------------------

double rms(std::span<const double> samples);
inline double rms(const Waveform& wave) { return rms(std::span<const double>(wave.samples)); }

inline constexpr double kSiSnrCapDb = 100.0;

/// Scale-invariant SNR in dB, capped to [-100, 100]. No mean removal is applied.
double si_snr(std::span<const double> reference, std::span<const double> estimate);
double si_snr(const Waveform& reference, const Waveform& estimate);

}  // namespace latentmark
