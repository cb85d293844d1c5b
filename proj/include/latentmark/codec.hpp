#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "latentmark/audio.hpp"

namespace latentmark {

/// Construction parameters of a surrogate codec.
///
/// Codecs sharing a non-empty `family_id` derive their analysis matrix from a
/// common base (seeded by the family label) plus a small member-specific
/// perturbation seeded by `seed`. An empty family means an independent codec.
struct CodecSpec {
  std::string family_id;
  int rate = 24000;
  int frame = 64;
  int latent_dim = 64;
  int codebook_size = 64;
  int num_stages = 4;
  std::uint64_t seed = 0;

  int hop() const { return frame / 2; }

  /// Stable identifier used to bind keys to codecs.
  std::string id() const;

  /// Throws ConfigError unless the spec satisfies every structural invariant.
  void validate() const;

  bool operator==(const CodecSpec&) const = default;
};

/// d x L latent matrix, one column per analysis frame.
struct LatentSequence {
  Eigen::MatrixXd frames;
  int source_rate = 0;

  Eigen::Index dim() const { return frames.rows(); }
  Eigen::Index length() const { return frames.cols(); }
};

/// N_q x L residual-quantizer indices.
struct TokenSequence {
  Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic> indices;
};

struct Quantized {
  LatentSequence latent;
  TokenSequence tokens;
};

/// Framed linear encoder, residual vector quantizer, overlap-add decoder.
///
/// encode: sqrt-Hann windowed frames at hop frame/2, projected by `analysis`
/// (d x frame, orthonormal rows). decode: analysis^T, window, overlap-add. With
/// d == frame the pair reconstructs perfectly away from the boundary frames,
/// and decode is exactly the adjoint of encode.
class SurrogateCodec {
 public:
  SurrogateCodec(CodecSpec spec, Eigen::MatrixXd analysis, std::vector<Eigen::MatrixXd> codebooks);

  const CodecSpec& spec() const { return spec_; }
  const Eigen::MatrixXd& analysis() const { return analysis_; }
  const std::vector<double>& window() const { return window_; }
  const std::vector<Eigen::MatrixXd>& codebooks() const { return codebooks_; }  // each K x d
  std::string id() const { return spec_.id(); }

  /// Number of latent frames produced for `num_samples` input samples (0 if too short).
  Eigen::Index frames_for(std::size_t num_samples) const;
  /// Samples spanned by `num_frames` latent frames: frame + (L-1)*hop.
  std::size_t samples_for(Eigen::Index num_frames) const;

  LatentSequence encode(const Waveform& wave) const;
  /// Nearest-codeword residual quantization over all stages (or the first `stages`).
  Quantized quantize(const LatentSequence& latent, int stages = -1) const;
  Waveform decode(const LatentSequence& latent) const;
  /// decode(quantize(encode(.))) with rate round-trip and length restored.
  Waveform resynthesize(const Waveform& wave) const;

  /// Gradient of <encode(s), cotangent> with respect to s, as a waveform of
  /// `num_samples` samples (defaults to samples_for(L)). Independent of s.
  Waveform encode_vjp(const LatentSequence& cotangent, std::size_t num_samples = 0) const;

 private:
  CodecSpec spec_;
  Eigen::MatrixXd analysis_;
  std::vector<double> window_;
  std::vector<Eigen::MatrixXd> codebooks_;
  std::vector<Eigen::MatrixXd> codebooks_t_;  // d x K copies, codewords contiguous
};

/// sqrt of the periodic Hann window; squared copies at hop frame/2 sum to one.
std::vector<double> sqrt_hann(int frame);

/// Builds a codec deterministically from its spec: QR-orthonormalized seeded
/// Gaussian analysis rows, codebooks fitted by k-means on the latents of a
/// seeded 60 s pink-noise signal, one residual stage at a time.
SurrogateCodec make_codec(const CodecSpec& spec);

/// Seeded pink (1/f) noise with the given RMS.
Waveform pink_noise(std::size_t num_samples, int rate, std::uint64_t seed, double target_rms = 0.1);

/// Binary persistence. load_codec() re-checks every invariant.
void save_codec(const SurrogateCodec& codec, const std::filesystem::path& path);
SurrogateCodec load_codec(const std::filesystem::path& path);

// --- k-means ----------------------------------------------------------------

struct KMeansResult {
  Eigen::MatrixXd centroids;  // k x d
  std::vector<int> assignment;
};

/// Lloyd's algorithm over the rows of `data` (n x d), `iterations` rounds,
/// initialized from k distinct rows drawn with `seed`. Empty clusters are
/// re-seeded with the point farthest from its centroid.
KMeansResult kmeans(const Eigen::MatrixXd& data, int k, int iterations, std::uint64_t seed);

}  // namespace latentmark
