#include "latentmark/key.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <random>

#include "latentmark/corpus.hpp"
#include "latentmark/errors.hpp"

namespace latentmark {

namespace {

constexpr int kAxisKMeansIterations = 100;
constexpr double kUnitTol = 1e-9;
constexpr int kKeyVersion = 1;

// Flip so the first component that is not numerically zero is positive.
void fix_sign(Eigen::VectorXd& v) {
  const double tiny = 1e-12 * v.cwiseAbs().maxCoeff();
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (std::abs(v(i)) > tiny) {
      if (v(i) < 0) v = -v;
      return;
    }
  }
}

}  // namespace

std::string to_string(AxisMethod m) {
  switch (m) {
    case AxisMethod::Cluster: return "cluster";
    case AxisMethod::PCA: return "pca";
    case AxisMethod::Random: return "random";
  }
  return "unknown";
}

AxisMethod axis_method_from_string(const std::string& s) {
  if (s == "cluster") return AxisMethod::Cluster;
  if (s == "pca") return AxisMethod::PCA;
  if (s == "random") return AxisMethod::Random;
  throw ConfigError("unknown axis method '" + s + "'");
}

const CalibrationStats& SecretKey::calibration() const {
  if (!stats) throw ConfigError("key for " + axis.codec_id + " is not calibrated");
  return *stats;
}

// --- Axis derivation --------------------------------------------------------

SecretAxis derive_axis_cluster(const Eigen::MatrixXd& codebook) {
  const Eigen::Index k = codebook.rows();
  if (k < 2) throw ConfigError("cluster axis needs at least two codebook rows");

  Eigen::Index a = 0, b = 1;
  double far = -1.0;
  for (Eigen::Index i = 0; i < k; ++i)
    for (Eigen::Index j = i + 1; j < k; ++j) {
      const double dist = (codebook.row(i) - codebook.row(j)).squaredNorm();
      if (dist > far) {
        far = dist;
        a = i;
        b = j;
      }
    }
  if (far <= 0.0) throw DegeneracyError("cluster axis: all codebook rows are identical");

  Eigen::RowVectorXd mu0 = codebook.row(a), mu1 = codebook.row(b);
  std::vector<int> assign(static_cast<std::size_t>(k), -1);
  for (int it = 0; it < kAxisKMeansIterations; ++it) {
    bool changed = false;
    Eigen::RowVectorXd s0 = Eigen::RowVectorXd::Zero(codebook.cols()), s1 = s0;
    int n0 = 0, n1 = 0;
    for (Eigen::Index i = 0; i < k; ++i) {
      const int c = (codebook.row(i) - mu1).squaredNorm() < (codebook.row(i) - mu0).squaredNorm();
      if (assign[std::size_t(i)] != c) changed = true;
      assign[std::size_t(i)] = c;
      if (c) {
        s1 += codebook.row(i);
        ++n1;
      } else {
        s0 += codebook.row(i);
        ++n0;
      }
    }
    if (n0 > 0) mu0 = s0 / n0;
    if (n1 > 0) mu1 = s1 / n1;
    if (!changed) break;
  }
  Eigen::VectorXd v = (mu1 - mu0).transpose();
  const double norm = v.norm();
  if (!(norm > 0.0)) throw DegeneracyError("cluster axis: centroids coincide");
  v /= norm;
  fix_sign(v);
  return SecretAxis{std::move(v), AxisMethod::Cluster, {}, 0};
}

SecretAxis derive_axis_pca(const Eigen::MatrixXd& codebook) {
  if (codebook.rows() < 2) throw ConfigError("PCA axis needs at least two codebook rows");
  const Eigen::MatrixXd centered = codebook.rowwise() - codebook.colwise().mean();
  Eigen::BDCSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0 || !(sv(0) > 1e-12 * std::max(1.0, codebook.cwiseAbs().maxCoeff())))
    throw DegeneracyError("PCA axis: codebook has zero variance");
  Eigen::VectorXd v = svd.matrixV().col(0);
  v.normalize();
  fix_sign(v);
  return SecretAxis{std::move(v), AxisMethod::PCA, {}, 0};
}

SecretAxis derive_axis_random(int dim, std::uint64_t seed) {
  if (dim < 1) throw ConfigError("random axis dimension must be >= 1");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd v(dim);
  do {
    for (Eigen::Index i = 0; i < dim; ++i) v(i) = normal(rng);
  } while (v.norm() == 0.0);
  v.normalize();
  return SecretAxis{std::move(v), AxisMethod::Random, {}, seed};
}

SecretAxis derive_axis(const SurrogateCodec& codec, AxisMethod method, std::uint64_t seed,
                       int stage) {
  if (stage < 0 || stage >= codec.spec().num_stages)
    throw ConfigError("axis stage out of range");
  const Eigen::MatrixXd& cb = codec.codebooks()[std::size_t(stage)];
  SecretAxis axis;
  switch (method) {
    case AxisMethod::Cluster: axis = derive_axis_cluster(cb); break;
    case AxisMethod::PCA: axis = derive_axis_pca(cb); break;
    case AxisMethod::Random: axis = derive_axis_random(codec.spec().latent_dim, seed); break;
  }
  axis.codec_id = codec.id();
  return axis;
}

// --- Scoring and calibration -------------------------------------------------

double projection_score(const LatentSequence& latent, const Eigen::VectorXd& axis) {
  if (latent.dim() != axis.size()) throw ShapeError("projection_score: axis dimension mismatch");
  if (latent.length() == 0) throw LengthError("projection_score: empty latent");
  return (axis.transpose() * latent.frames).mean();
}

double projection_score(const SurrogateCodec& codec, const Waveform& wave,
                        const Eigen::VectorXd& axis, LatentMode mode) {
  const Waveform x = resample(wave, codec.spec().rate);
  if (codec.frames_for(x.size()) == 0)
    throw LengthError("signal shorter than one codec frame");
  LatentSequence z = codec.encode(x);
  if (mode == LatentMode::Quantized) z = codec.quantize(z).latent;
  return projection_score(z, axis);
}

CalibrationStats calibrate_from_scores(std::span<const double> scores, double k) {
  if (scores.size() < 2) throw ConfigError("calibration needs at least two null clips");
  CalibrationStats s;
  s.k = k;
  s.n_null = scores.size();
  const double n = double(scores.size());
  double sum = 0.0;
  for (double p : scores) sum += p;
  s.mu = sum / n;
  double var = 0.0;
  for (double p : scores) var += (p - s.mu) * (p - s.mu);
  s.sigma = std::max(std::sqrt(var / n), kSigmaFloor);
  s.tau = s.mu + k * s.sigma;
  double gap = 0.0;
  for (double p : scores) gap += std::max(0.0, s.tau - p);
  s.alpha = std::max(gap / n, kAlphaFloor);
  return s;
}

CalibrationStats calibrate(const SurrogateCodec& codec, const SecretAxis& axis,
                           const std::vector<Waveform>& null_corpus, double k, LatentMode mode) {
  if (null_corpus.size() < 2) throw ConfigError("calibration needs at least two null clips");
  std::vector<double> scores;
  scores.reserve(null_corpus.size());
  for (const auto& clip : null_corpus) scores.push_back(projection_score(codec, clip, axis.v, mode));
  return calibrate_from_scores(scores, k);
}

std::vector<Waveform> default_null_corpus(int rate, std::size_t count, double seconds,
                                          std::uint64_t seed) {
  return synthetic_corpus(count, rate, seconds, seed);
}

// --- Persistence ------------------------------------------------------------

void validate(const SecretKey& key) {
  const double norm = key.axis.v.norm();
  if (key.axis.v.size() == 0 || std::abs(norm - 1.0) > kUnitTol)
    throw ConsistencyError("key axis is not unit norm (|v| = " + std::to_string(norm) + ")");
  if (!(key.gamma > 0.0)) throw ConsistencyError("key gamma must be positive");
  if (!key.stats) return;
  const CalibrationStats& s = *key.stats;
  if (s.tau != s.mu + s.k * s.sigma) throw ConsistencyError("key tau != mu + k*sigma");
  if (s.sigma < kSigmaFloor) throw ConsistencyError("key sigma below floor");
  if (s.alpha < kAlphaFloor) throw ConsistencyError("key alpha below floor");
  if (s.n_null < 2) throw ConsistencyError("key null corpus smaller than two clips");
}

void save_key(const SecretKey& key, const std::filesystem::path& path) {
  validate(key);
  nlohmann::json j;
  j["format"] = "latentmark-key";
  j["version"] = kKeyVersion;
  j["method"] = to_string(key.axis.method);
  j["codec_id"] = key.axis.codec_id;
  j["seed"] = key.axis.seed;
  j["v"] = std::vector<double>(key.axis.v.data(), key.axis.v.data() + key.axis.v.size());
  j["gamma"] = key.gamma;
  j["calibrated"] = key.stats.has_value();
  if (key.stats) {
    j["mu"] = key.stats->mu;
    j["sigma"] = key.stats->sigma;
    j["k"] = key.stats->k;
    j["tau"] = key.stats->tau;
    j["alpha"] = key.stats->alpha;
    j["n_null"] = key.stats->n_null;
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write failed for " + path.string());
}

SecretKey load_key(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  SecretKey key;
  try {
    const nlohmann::json j = nlohmann::json::parse(in);
    if (j.at("format").get<std::string>() != "latentmark-key")
      throw FormatError(path.string() + ": not a key file");
    if (j.at("version").get<int>() != kKeyVersion)
      throw FormatError(path.string() + ": unsupported key version");
    key.axis.method = axis_method_from_string(j.at("method").get<std::string>());
    key.axis.codec_id = j.at("codec_id").get<std::string>();
    key.axis.seed = j.at("seed").get<std::uint64_t>();
    const auto v = j.at("v").get<std::vector<double>>();
    key.axis.v = Eigen::Map<const Eigen::VectorXd>(v.data(), Eigen::Index(v.size()));
    key.gamma = j.at("gamma").get<double>();
    if (j.at("calibrated").get<bool>()) {
      CalibrationStats s;
      s.mu = j.at("mu").get<double>();
      s.sigma = j.at("sigma").get<double>();
      s.k = j.at("k").get<double>();
      s.tau = j.at("tau").get<double>();
      s.alpha = j.at("alpha").get<double>();
      s.n_null = j.at("n_null").get<std::size_t>();
      key.stats = s;
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  } catch (const ConfigError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  validate(key);
  return key;
}

}  // namespace latentmark
