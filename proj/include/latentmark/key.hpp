#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "latentmark/audio.hpp"
#include "latentmark/codec.hpp"

namespace latentmark {

enum class AxisMethod { Cluster, PCA, Random };

std::string to_string(AxisMethod m);
AxisMethod axis_method_from_string(const std::string& s);

/// Which latent the projection score is read from.
enum class LatentMode { PreQuantization, Quantized };

/// Unit-norm direction in a codec's latent space.
struct SecretAxis {
  Eigen::VectorXd v;
  AxisMethod method = AxisMethod::Cluster;
  std::string codec_id;
  std::uint64_t seed = 0;  // Random only
};

struct CalibrationStats {
  double mu = 0.0;
  double sigma = 0.0;
  double k = 1.5;
  double tau = 0.0;    // mu + k * sigma
  double alpha = 0.0;  // mean clean-audio hinge gap
  std::size_t n_null = 0;
};

inline constexpr double kSigmaFloor = 1e-8;
inline constexpr double kAlphaFloor = 1e-8;

struct SecretKey {
  SecretAxis axis;
  std::optional<CalibrationStats> stats;
  double gamma = 1.5;

  const CalibrationStats& calibration() const;  // throws ConfigError if uncalibrated
};

// --- Axis derivation --------------------------------------------------------

/// Two-means split of the codebook rows (farthest-pair initialization, up to
/// 100 Lloyd rounds); the axis joins the two centroids.
SecretAxis derive_axis_cluster(const Eigen::MatrixXd& codebook);

/// First right-singular vector of the mean-centered codebook.
SecretAxis derive_axis_pca(const Eigen::MatrixXd& codebook);

/// Seeded standard-Gaussian direction, normalized.
SecretAxis derive_axis_random(int dim, std::uint64_t seed);

/// Derives an axis for `codec` from the codebook of the given RVQ stage.
SecretAxis derive_axis(const SurrogateCodec& codec, AxisMethod method, std::uint64_t seed = 0,
                       int stage = 0);

// --- Scoring and calibration -------------------------------------------------

/// Temporal mean of <z_t, v>.
double projection_score(const LatentSequence& latent, const Eigen::VectorXd& axis);

/// Projection score of a waveform for a codec, resampling to the codec rate.
double projection_score(const SurrogateCodec& codec, const Waveform& wave,
                        const Eigen::VectorXd& axis,
                        LatentMode mode = LatentMode::PreQuantization);

/// Null statistics from precomputed clean-audio projection scores.
CalibrationStats calibrate_from_scores(std::span<const double> scores, double k);

CalibrationStats calibrate(const SurrogateCodec& codec, const SecretAxis& axis,
                           const std::vector<Waveform>& null_corpus, double k,
                           LatentMode mode = LatentMode::PreQuantization);

/// Default null corpus: `count` seeded clips of shaped noise plus tones.
std::vector<Waveform> default_null_corpus(int rate, std::size_t count = 64, double seconds = 3.0,
                                          std::uint64_t seed = 0x5EED);

// --- Persistence ------------------------------------------------------------

void save_key(const SecretKey& key, const std::filesystem::path& path);
SecretKey load_key(const std::filesystem::path& path);

/// Throws FormatError/ConsistencyError if the key violates an invariant.
void validate(const SecretKey& key);

}  // namespace latentmark
