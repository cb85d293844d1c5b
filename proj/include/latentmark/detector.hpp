#pragma once

#include <string>
#include <vector>

#include "latentmark/audio.hpp"
#include "latentmark/codec.hpp"
#include "latentmark/embedder.hpp"
#include "latentmark/key.hpp"

namespace latentmark {

enum class MarginMode { Sigma, Alpha };

std::string to_string(MarginMode m);
MarginMode margin_mode_from_string(const std::string& s);

struct DetectionResult {
  double raw_score = 0.0;  // p-bar
  double margin = 0.0;
  bool detected = false;   // margin > 0
  std::string codec_id;
};

struct EnsembleResult {
  std::vector<DetectionResult> per_codec;
  double score = 0.0;
  bool detected = false;
};

/// (p - tau) / sigma or (p - tau) / alpha. Throws ConfigError for an
/// uncalibrated key or a key bound to another codec.
double margin_from_score(double raw_score, const CalibrationStats& stats, MarginMode mode);

DetectionResult margin_single(const Waveform& wave, const SurrogateCodec& codec,
                              const SecretKey& key, MarginMode mode = MarginMode::Sigma,
                              LatentMode latent = LatentMode::PreQuantization);

/// The ceil(n/2)-th smallest value (1-indexed).
double median_rule(std::vector<double> margins);

EnsembleResult ensemble_from(std::vector<DetectionResult> per_codec);

/// Alpha-mode margins of every member, combined with the median rule.
EnsembleResult score_ensemble(const Waveform& wave, const Committee& committee,
                              LatentMode latent = LatentMode::PreQuantization);

/// score(R_a(watermarked)) - score(R_a(clean)).
double delta_score(const Waveform& watermarked, const Waveform& clean,
                   const SurrogateCodec& attacker, const Committee& committee);

}  // namespace latentmark
