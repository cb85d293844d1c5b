#include "latentmark/detector.hpp"

#include <algorithm>

#include "latentmark/errors.hpp"

namespace latentmark {

std::string to_string(MarginMode m) { return m == MarginMode::Sigma ? "sigma" : "alpha"; }

MarginMode margin_mode_from_string(const std::string& s) {
  if (s == "sigma") return MarginMode::Sigma;
  if (s == "alpha") return MarginMode::Alpha;
  throw ConfigError("unknown margin mode '" + s + "'");
}

double margin_from_score(double raw_score, const CalibrationStats& stats, MarginMode mode) {
  const double denom = mode == MarginMode::Sigma ? stats.sigma : stats.alpha;
  return (raw_score - stats.tau) / denom;
}

DetectionResult margin_single(const Waveform& wave, const SurrogateCodec& codec,
                              const SecretKey& key, MarginMode mode, LatentMode latent) {
  const CalibrationStats& stats = key.calibration();
  if (!key.axis.codec_id.empty() && key.axis.codec_id != codec.id())
    throw ConfigError("key was derived for " + key.axis.codec_id + ", not " + codec.id());
  DetectionResult r;
  r.codec_id = codec.id();
  r.raw_score = projection_score(codec, wave, key.axis.v, latent);
  r.margin = margin_from_score(r.raw_score, stats, mode);
  r.detected = r.margin > 0.0;
  return r;
}

double median_rule(std::vector<double> margins) {
  if (margins.empty()) throw ConfigError("median rule needs at least one margin");
  const std::size_t idx = (margins.size() + 1) / 2 - 1;
  std::nth_element(margins.begin(), margins.begin() + std::ptrdiff_t(idx), margins.end());
  return margins[idx];
}

EnsembleResult ensemble_from(std::vector<DetectionResult> per_codec) {
  std::vector<double> m;
  for (const auto& r : per_codec) m.push_back(r.margin);
  EnsembleResult e;
  e.score = median_rule(std::move(m));
  e.detected = e.score > 0.0;
  e.per_codec = std::move(per_codec);
  return e;
}

EnsembleResult score_ensemble(const Waveform& wave, const Committee& committee,
                              LatentMode latent) {
  if (committee.empty()) throw ConfigError("committee must not be empty");
  std::vector<DetectionResult> per;
  for (const auto& m : committee)
    per.push_back(margin_single(wave, *m.codec, *m.key, MarginMode::Alpha, latent));
  return ensemble_from(std::move(per));
}

double delta_score(const Waveform& watermarked, const Waveform& clean,
                   const SurrogateCodec& attacker, const Committee& committee) {
  if (watermarked.rate != clean.rate) throw RateError("delta_score: rates differ");
  if (watermarked.size() != clean.size()) throw ShapeError("delta_score: lengths differ");
  const double wm = score_ensemble(attacker.resynthesize(watermarked), committee).score;
  const double cl = score_ensemble(attacker.resynthesize(clean), committee).score;
  return wm - cl;
}

}  // namespace latentmark
