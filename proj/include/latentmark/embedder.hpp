#pragma once

#include <iosfwd>
#include <memory>
#include <vector>

#include "latentmark/audio.hpp"
#include "latentmark/codec.hpp"
#include "latentmark/key.hpp"

namespace latentmark {

/// A codec paired with the key calibrated for it.
struct CommitteeMember {
  std::shared_ptr<const SurrogateCodec> codec;
  std::shared_ptr<const SecretKey> key;
};
using Committee = std::vector<CommitteeMember>;

/// Optimization hyperparameters. Defaults follow the published setup where one
/// exists (gamma, steps, beta, budget clamps, work rate, padding block).
struct EmbedConfig {
  double gamma = 1.5;
  double sdr_db = 30.0;
  double beta = 2.5;
  double eps_min = 1e-4;
  double eps_max = 0.1;
  int n_steps = 150;
  /// Adam base step, in units of the per-clip budget epsilon.
  double step_size = 0.1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  int work_rate = 44100;
  std::size_t pad_block = 4096;

  void validate() const;
};

/// Which hinge the single-codec embedder minimizes: ReLU(gamma - p) or
/// ReLU(tau - p) / alpha.
enum class HingeTarget { Gamma, Normalized };

struct EmbedTrace {
  std::vector<double> loss;                 // one entry per evaluated iterate
  std::vector<std::vector<double>> scores;  // [iterate][member] projection scores
  std::vector<double> delta_linf;           // max |delta| of each evaluated iterate
  std::vector<std::string> codec_ids;
  double epsilon = 0.0;
  int best_step = 0;
  std::vector<double> final_scores;  // scores of the returned iterate
  double final_delta_linf = 0.0;     // of the returned perturbation, at the output rate
};

struct EmbedResult {
  Waveform watermarked;
  EmbedTrace trace;
};

/// clip(beta * RMS(s) * 10^(-SDR/20), eps_min, eps_max)
double compute_budget(const Waveform& wave, const EmbedConfig& cfg);

/// ReLU(gamma - p) on the pre-quantization latent.
double loss_single(const Waveform& wave, const SurrogateCodec& codec, const SecretKey& key);
/// Gradient of loss_single with respect to the samples of `wave`.
std::vector<double> loss_single_grad(const Waveform& wave, const SurrogateCodec& codec,
                                     const SecretKey& key);

/// Mean over members of ReLU(tau_c - p_c) / alpha_c, each member reading
/// `wave` resampled to its own rate.
double loss_joint(const Waveform& wave, const Committee& committee);
std::vector<double> loss_joint_grad(const Waveform& wave, const Committee& committee);

EmbedResult embed_single(const Waveform& wave, const SurrogateCodec& codec,
                         const SecretKey& key, const EmbedConfig& cfg,
                         HingeTarget target = HingeTarget::Gamma);

EmbedResult embed_joint(const Waveform& wave, const Committee& committee, const EmbedConfig& cfg);

/// Tab-separated trace: step, loss, max|delta|, then one projection score
/// column per codec.
void write_trace(const EmbedTrace& trace, std::ostream& out);

}  // namespace latentmark
