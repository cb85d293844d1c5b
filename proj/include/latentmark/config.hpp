#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "latentmark/bench.hpp"
#include "latentmark/codec.hpp"
#include "latentmark/embedder.hpp"
#include "latentmark/key.hpp"

namespace latentmark {

struct AxisConfig {
  AxisMethod method = AxisMethod::Cluster;
  std::uint64_t seed = 7;
  int stage = 0;
};

struct CalibrationConfig {
  double k = 1.5;
  std::size_t clips = 64;
  double seconds = 3.0;
  std::uint64_t seed = 0x5EED;
};

struct CorpusConfig {
  std::size_t clips = 100;
  double seconds = 3.0;
  int rate = 24000;
  std::uint64_t seed = 2024;
};

/// An attack as written in a config file. Resynthesis attacks name a codec by
/// spec; the tool builds it.
struct AttackConfig {
  AttackSpec spec;
  std::optional<CodecSpec> codec;
};

struct MethodConfig {
  std::string name;
  MethodKind kind = MethodKind::Single;
  HingeTarget target = HingeTarget::Gamma;
  std::size_t member = 0;
};

/// Everything one run needs: codecs, key derivation, embedding, detection and
/// benchmark settings.
struct RunConfig {
  std::vector<CodecSpec> codecs{CodecSpec{}};
  AxisConfig axis;
  CalibrationConfig calibration;
  EmbedConfig embed;
  MarginMode margin_mode = MarginMode::Sigma;
  LatentMode latent_mode = LatentMode::PreQuantization;
  CorpusConfig corpus;
  BenchConfig bench;
  std::vector<MethodConfig> methods;
  std::vector<AttackConfig> attacks;
};

nlohmann::json to_json(const CodecSpec& spec);
CodecSpec codec_spec_from_json(const nlohmann::json& j);

nlohmann::json to_json(const EmbedConfig& cfg);
EmbedConfig embed_config_from_json(const nlohmann::json& j);

nlohmann::json to_json(const RunConfig& cfg);
/// Missing fields keep their defaults; unknown fields are rejected.
RunConfig run_config_from_json(const nlohmann::json& j);

RunConfig load_run_config(const std::filesystem::path& path);
void save_run_config(const RunConfig& cfg, const std::filesystem::path& path);

/// Default benchmark: Latent-Cluster on the first codec and the additive
/// baseline, under identity, the four DSP attacks and resynthesis by the first
/// codec.
RunConfig default_run_config();

}  // namespace latentmark
