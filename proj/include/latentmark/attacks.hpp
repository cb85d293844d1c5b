#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "latentmark/audio.hpp"
#include "latentmark/codec.hpp"

namespace latentmark {

enum class AttackKind { Identity, Gaussian, Amplitude, LowPass, Resample, Resynthesis };

std::string to_string(AttackKind k);
AttackKind attack_kind_from_string(const std::string& s);

struct AttackSpec {
  AttackKind kind = AttackKind::Identity;
  /// SNR dB, scale factor, cutoff Hz or intermediate rate Hz depending on kind.
  double parameter = 0.0;
  std::shared_ptr<const SurrogateCodec> codec;  // Resynthesis only
  std::uint64_t seed = 0;                       // Gaussian only
  /// Row label; derived from kind and parameter when empty.
  std::string label;

  std::string name() const;
  void validate() const;
};

/// The four DSP settings of the robustness table: GAU 60 dB, AMP 0.5,
/// LPF 4 kHz, RSM 16 kHz.
std::vector<AttackSpec> standard_dsp_attacks(std::uint64_t seed = 0);

Waveform attack_gaussian(const Waveform& wave, double snr_db, std::uint64_t seed);
Waveform attack_amplitude(const Waveform& wave, double factor);
Waveform attack_lowpass(const Waveform& wave, double cutoff_hz);
Waveform attack_resample(const Waveform& wave, int intermediate_rate);
Waveform attack_resynthesis(const Waveform& wave, const SurrogateCodec& codec);

Waveform apply_attack(const Waveform& wave, const AttackSpec& spec);

/// 255-tap Kaiser windowed-sinc low-pass kernel, unit DC gain.
std::vector<double> lowpass_kernel(double cutoff_hz, int rate);

// --- Additive baseline -------------------------------------------------------

inline constexpr double kBaselineThreshold = 0.1;

struct BaselineResult {
  Waveform watermarked;
  std::vector<double> pattern;  // unit-RMS seeded pattern
  double score = 0.0;           // detection score on the unattacked output
};

/// Seeded white pattern scaled so that the SNR of the mark against the host
/// equals `sdr_db`.
std::vector<double> baseline_pattern(std::size_t length, std::uint64_t seed);
BaselineResult baseline_additive(const Waveform& wave, std::uint64_t seed, double sdr_db);

/// Normalized correlation between the pattern and the residual left after
/// removing the least-squares scaled reference from the suspect.
double baseline_score(const Waveform& suspect, const Waveform& reference,
                      const std::vector<double>& pattern);

}  // namespace latentmark
