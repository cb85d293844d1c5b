#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "latentmark/attacks.hpp"
#include "latentmark/detector.hpp"
#include "latentmark/embedder.hpp"

namespace latentmark {

enum class MethodKind { None, Single, Joint, Baseline };

std::string to_string(MethodKind k);
MethodKind method_kind_from_string(const std::string& s);

struct MethodSpec {
  std::string name;
  MethodKind kind = MethodKind::Single;
  EmbedConfig embed;
  HingeTarget target = HingeTarget::Gamma;  // Single only
  std::size_t member = 0;                   // committee member used by Single
};

struct BenchConfig {
  std::string dataset = "synthetic";
  std::size_t per_class = 50;
  std::uint64_t split_seed = 0;
  std::uint64_t baseline_seed = 0;
  MarginMode margin_mode = MarginMode::Sigma;  // single-codec detection
  LatentMode latent_mode = LatentMode::PreQuantization;
  unsigned workers = 1;
};

struct BenchRow {
  std::string dataset, method, attack;
  std::optional<double> tpr, fpr, acc, sur, dsisnr, dscore;
  std::size_t n_pos = 0, n_neg = 0;
};

struct ClipError {
  std::string method;
  std::size_t clip = 0;  // index into the corpus
  std::string message;
};

struct BenchReport {
  std::vector<BenchRow> rows;
  std::size_t n_watermarked = 0, n_clean = 0;
  std::vector<ClipError> errors;
  nlohmann::json config;
};

/// Seeded split of `corpus_size` indices into a watermarked and a clean half
/// of `per_class` clips each.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(
    std::size_t corpus_size, std::size_t per_class, std::uint64_t seed);

/// Embeds the watermarked half with every method, applies every attack and
/// detects. Per-clip failures are recorded in `errors` and excluded from the
/// rates. Identical inputs give identical reports for any worker count.
BenchReport run_benchmark(const std::vector<Waveform>& corpus,
                          const std::vector<MethodSpec>& methods,
                          const std::vector<AttackSpec>& attacks, const Committee& committee,
                          const BenchConfig& cfg);

/// Columns: dataset method attack TPR FPR Acc Sur dSISNR dScore. Missing
/// values are written as NA.
void write_tsv(const BenchReport& report, std::ostream& out);
nlohmann::json summary_json(const BenchReport& report);

}  // namespace latentmark
