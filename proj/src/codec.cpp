#include "latentmark/codec.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>

#include "latentmark/errors.hpp"

namespace latentmark {

namespace {

constexpr double kFamilyPerturbation = 0.05;  // relative Frobenius norm
constexpr double kCalibrationSeconds = 60.0;
constexpr int kCodebookIterations = 25;
constexpr double kOrthonormalTol = 1e-10;

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

// splitmix64 step; derives independent sub-seeds from one seed.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (salt + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

Eigen::MatrixXd gaussian_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = normal(rng);
  return m;
}

// Orthonormalizes the rows of `m` (d x frame, d <= frame) by Householder QR of
// m^T, with the sign of each basis vector fixed by the diagonal of R.
Eigen::MatrixXd orthonormal_rows(const Eigen::MatrixXd& m) {
  const Eigen::MatrixXd mt = m.transpose();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(mt);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(mt.rows(), mt.cols());
  const Eigen::MatrixXd r = qr.matrixQR().topRows(mt.cols()).triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < q.cols(); ++j)
    if (r(j, j) < 0) q.col(j) = -q.col(j);
  return q.transpose();
}

Eigen::MatrixXd make_analysis(const CodecSpec& spec) {
  const Eigen::Index d = spec.latent_dim, f = spec.frame;
  if (spec.family_id.empty()) return orthonormal_rows(gaussian_matrix(d, f, spec.seed));
  const Eigen::MatrixXd base = gaussian_matrix(d, f, fnv1a(spec.family_id));
  const Eigen::MatrixXd noise = gaussian_matrix(d, f, mix_seed(spec.seed, 1));
  const double scale = kFamilyPerturbation * base.norm() / noise.norm();
  return orthonormal_rows(base + scale * noise);
}

int nearest_row(const Eigen::MatrixXd& codebook_t, const double* residual) {
  // codebook_t is d x K so each codeword is a contiguous column.
  const Eigen::Index d = codebook_t.rows(), k = codebook_t.cols();
  int best = 0;
  double best_dist = std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < k; ++j) {
    const double* c = codebook_t.data() + j * d;
    double dist = 0.0;
    for (Eigen::Index i = 0; i < d; ++i) {
      const double e = residual[i] - c[i];
      dist += e * e;
    }
    if (dist < best_dist) {
      best_dist = dist;
      best = int(j);
    }
  }
  return best;
}

template <class T>
void put(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::ifstream& in, const std::filesystem::path& path) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw FormatError(path.string() + ": truncated codec file");
  return v;
}

constexpr char kCodecMagic[8] = {'L', 'M', 'C', 'O', 'D', 'E', 'C', '\0'};
constexpr std::uint32_t kCodecVersion = 1;

}  // namespace

// --- CodecSpec --------------------------------------------------------------

std::string CodecSpec::id() const {
  return (family_id.empty() ? std::string("solo") : family_id) + "@" + std::to_string(rate) +
         "#" + std::to_string(seed);
}

void CodecSpec::validate() const {
  if (rate <= 0) throw ConfigError("codec rate must be positive");
  if (frame < 2 || (frame & (frame - 1)) != 0)
    throw ConfigError("codec frame must be a power of two >= 2");
  if (latent_dim < 1 || latent_dim > frame)
    throw ConfigError("codec latent_dim must be in [1, frame]");
  if (codebook_size < 2) throw ConfigError("codec codebook_size must be >= 2");
  if (num_stages < 1) throw ConfigError("codec num_stages must be >= 1");
}

// --- SurrogateCodec ---------------------------------------------------------

std::vector<double> sqrt_hann(int frame) {
  std::vector<double> w(static_cast<std::size_t>(frame));
  for (int n = 0; n < frame; ++n)
    w[std::size_t(n)] = std::sqrt(0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * n / frame)));
  return w;
}

SurrogateCodec::SurrogateCodec(CodecSpec spec, Eigen::MatrixXd analysis,
                               std::vector<Eigen::MatrixXd> codebooks)
    : spec_(std::move(spec)), analysis_(std::move(analysis)), codebooks_(std::move(codebooks)) {
  spec_.validate();
  if (analysis_.rows() != spec_.latent_dim || analysis_.cols() != spec_.frame)
    throw ConfigError("analysis matrix has wrong shape");
  if (!analysis_.allFinite()) throw ConfigError("analysis matrix is not finite");
  const Eigen::MatrixXd gram = analysis_ * analysis_.transpose();
  const Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(gram.rows(), gram.cols());
  if ((gram - identity).cwiseAbs().maxCoeff() > kOrthonormalTol)
    throw ConfigError("analysis rows are not orthonormal");
  if (int(codebooks_.size()) != spec_.num_stages)
    throw ConfigError("codebook count does not match num_stages");
  for (const auto& cb : codebooks_) {
    if (cb.rows() != spec_.codebook_size || cb.cols() != spec_.latent_dim)
      throw ConfigError("codebook has wrong shape");
    if (!cb.allFinite()) throw ConfigError("codebook is not finite");
    for (Eigen::Index i = 0; i < cb.rows(); ++i)
      for (Eigen::Index j = i + 1; j < cb.rows(); ++j)
        if (cb.row(i) == cb.row(j)) throw ConfigError("codebook rows are not distinct");
  }
  window_ = sqrt_hann(spec_.frame);
  for (const auto& cb : codebooks_) codebooks_t_.push_back(cb.transpose());
}

Eigen::Index SurrogateCodec::frames_for(std::size_t num_samples) const {
  const auto f = std::size_t(spec_.frame);
  if (num_samples < f) return 0;
  return Eigen::Index(1 + (num_samples - f) / std::size_t(spec_.hop()));
}

std::size_t SurrogateCodec::samples_for(Eigen::Index num_frames) const {
  if (num_frames <= 0) return 0;
  return std::size_t(spec_.frame) + std::size_t(num_frames - 1) * std::size_t(spec_.hop());
}

LatentSequence SurrogateCodec::encode(const Waveform& wave) const {
  if (wave.rate != spec_.rate)
    throw RateError("encode: waveform rate " + std::to_string(wave.rate) + " != codec rate " +
                    std::to_string(spec_.rate));
  const Eigen::Index n_frames = frames_for(wave.size());
  if (n_frames == 0) throw LengthError("encode: waveform shorter than one frame");
  const int f = spec_.frame, hop = spec_.hop();
  Eigen::MatrixXd framed(f, n_frames);
  for (Eigen::Index t = 0; t < n_frames; ++t) {
    const double* src = wave.samples.data() + t * hop;
    for (int i = 0; i < f; ++i) framed(i, t) = window_[std::size_t(i)] * src[i];
  }
  return LatentSequence{analysis_ * framed, spec_.rate};
}

Quantized SurrogateCodec::quantize(const LatentSequence& latent, int stages) const {
  if (latent.dim() != spec_.latent_dim) throw ShapeError("quantize: latent dimension mismatch");
  const int n_stages = stages < 0 ? spec_.num_stages : std::min(stages, spec_.num_stages);
  const Eigen::Index d = latent.dim(), n = latent.length();

  Quantized out;
  out.latent.source_rate = latent.source_rate;
  out.latent.frames = Eigen::MatrixXd::Zero(d, n);
  out.tokens.indices.resize(n_stages, n);

  Eigen::VectorXd residual(d);
  for (Eigen::Index t = 0; t < n; ++t) {
    residual = latent.frames.col(t);
    for (int s = 0; s < n_stages; ++s) {
      const int idx = nearest_row(codebooks_t_[std::size_t(s)], residual.data());
      out.tokens.indices(s, t) = idx;
      residual -= codebooks_t_[std::size_t(s)].col(idx);
      out.latent.frames.col(t) += codebooks_t_[std::size_t(s)].col(idx);
    }
  }
  return out;
}

Waveform SurrogateCodec::decode(const LatentSequence& latent) const {
  if (latent.dim() != spec_.latent_dim) throw ShapeError("decode: latent dimension mismatch");
  return encode_vjp(latent);
}

Waveform SurrogateCodec::encode_vjp(const LatentSequence& cotangent, std::size_t num_samples) const {
  if (cotangent.dim() != spec_.latent_dim)
    throw ShapeError("encode_vjp: cotangent dimension mismatch");
  const Eigen::Index n_frames = cotangent.length();
  const std::size_t span = samples_for(n_frames);
  if (num_samples == 0) num_samples = span;
  if (num_samples < span || frames_for(num_samples) != n_frames)
    throw ShapeError("encode_vjp: cotangent length does not match the signal length");

  const int f = spec_.frame, hop = spec_.hop();
  const Eigen::MatrixXd synth = analysis_.transpose() * cotangent.frames;  // frame x L
  std::vector<double> out(num_samples, 0.0);
  for (Eigen::Index t = 0; t < n_frames; ++t) {
    double* dst = out.data() + t * hop;
    for (int i = 0; i < f; ++i) dst[i] += window_[std::size_t(i)] * synth(i, t);
  }
  return Waveform(std::move(out), spec_.rate);
}

Waveform SurrogateCodec::resynthesize(const Waveform& wave) const {
  validate(wave);
  const Waveform x = resample(wave, spec_.rate);
  const auto hop = std::size_t(spec_.hop());
  // One hop of leading zeros and enough trailing zeros that every input sample
  // sits under two frames; the frame grid stays aligned with encode(x).
  const std::size_t covered = x.size() + 2 * hop;
  const std::size_t n_frames = covered <= std::size_t(spec_.frame)
                                   ? 1
                                   : 1 + (covered - std::size_t(spec_.frame) + hop - 1) / hop;
  std::vector<double> padded(samples_for(Eigen::Index(n_frames)), 0.0);
  std::copy(x.samples.begin(), x.samples.end(), padded.begin() + std::ptrdiff_t(hop));

  const Waveform y = decode(quantize(encode(Waveform(std::move(padded), spec_.rate))).latent);
  std::vector<double> core(y.samples.begin() + std::ptrdiff_t(hop),
                           y.samples.begin() + std::ptrdiff_t(hop + x.size()));
  return fit_length(resample(Waveform(std::move(core), spec_.rate), wave.rate), wave.size());
}

// --- Construction -----------------------------------------------------------

Waveform pink_noise(std::size_t num_samples, int rate, std::uint64_t seed, double target_rms) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  // Paul Kellet's refined pink filter.
  double b0 = 0, b1 = 0, b2 = 0, b3 = 0, b4 = 0, b5 = 0, b6 = 0;
  std::vector<double> x(num_samples);
  for (auto& v : x) {
    const double w = normal(rng);
    b0 = 0.99886 * b0 + w * 0.0555179;
    b1 = 0.99332 * b1 + w * 0.0750759;
    b2 = 0.96900 * b2 + w * 0.1538520;
    b3 = 0.86650 * b3 + w * 0.3104856;
    b4 = 0.55000 * b4 + w * 0.5329522;
    b5 = -0.7616 * b5 - w * 0.0168980;
    v = b0 + b1 + b2 + b3 + b4 + b5 + b6 + w * 0.5362;
    b6 = w * 0.115926;
  }
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= double(std::max<std::size_t>(1, x.size()));
  for (auto& v : x) v -= mean;
  if (!x.empty()) {
    const double r = rms(x);
    if (r > 0) for (auto& v : x) v *= target_rms / r;
  }
  return Waveform(std::move(x), rate);
}

SurrogateCodec make_codec(const CodecSpec& spec) {
  spec.validate();
  const Eigen::MatrixXd analysis = make_analysis(spec);

  // Encoder-only view to produce calibration latents.
  const auto n = std::size_t(std::llround(kCalibrationSeconds * spec.rate));
  const Waveform calib = pink_noise(n, spec.rate, mix_seed(spec.seed, 2));
  const std::vector<double> window = sqrt_hann(spec.frame);
  const int f = spec.frame, hop = spec.hop();
  const Eigen::Index n_frames = Eigen::Index(1 + (calib.size() - std::size_t(f)) / std::size_t(hop));
  Eigen::MatrixXd framed(f, n_frames);
  for (Eigen::Index t = 0; t < n_frames; ++t)
    for (int i = 0; i < f; ++i)
      framed(i, t) = window[std::size_t(i)] * calib.samples[std::size_t(t * hop + i)];
  Eigen::MatrixXd residual = (analysis * framed).transpose();  // N x d

  std::vector<Eigen::MatrixXd> codebooks;
  for (int s = 0; s < spec.num_stages; ++s) {
    KMeansResult km = kmeans(residual, spec.codebook_size, kCodebookIterations,
                             mix_seed(spec.seed, 100 + std::uint64_t(s)));
    for (Eigen::Index i = 0; i < residual.rows(); ++i)
      residual.row(i) -= km.centroids.row(km.assignment[std::size_t(i)]);
    codebooks.push_back(std::move(km.centroids));
  }
  return SurrogateCodec(spec, analysis, std::move(codebooks));
}

KMeansResult kmeans(const Eigen::MatrixXd& data, int k, int iterations, std::uint64_t seed) {
  const Eigen::Index n = data.rows(), d = data.cols();
  if (k < 1 || n < k) throw ConfigError("kmeans: need at least k data rows");

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) order[std::size_t(i)] = i;
  std::mt19937_64 rng(seed);
  for (int j = 0; j < k; ++j) {
    std::uniform_int_distribution<Eigen::Index> pick(j, n - 1);
    std::swap(order[std::size_t(j)], order[std::size_t(pick(rng))]);
  }
  Eigen::MatrixXd centroids(k, d);
  for (int j = 0; j < k; ++j) centroids.row(j) = data.row(order[std::size_t(j)]);

  const Eigen::VectorXd data_norm = data.rowwise().squaredNorm();
  std::vector<int> assign(std::size_t(n), -1);
  std::vector<double> dist(std::size_t(n), 0.0);

  auto assign_all = [&]() {
    const Eigen::MatrixXd dots = data * centroids.transpose();  // n x k
    const Eigen::VectorXd cn = centroids.rowwise().squaredNorm();
    bool changed = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      int best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (int j = 0; j < k; ++j) {
        const double dd = cn(j) - 2.0 * dots(i, j);
        if (dd < best_d) {
          best_d = dd;
          best = j;
        }
      }
      dist[std::size_t(i)] = std::max(0.0, best_d + data_norm(i));
      if (assign[std::size_t(i)] != best) changed = true;
      assign[std::size_t(i)] = best;
    }
    return changed;
  };

  for (int it = 0; it < iterations; ++it) {
    if (!assign_all() && it > 0) break;
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, d);
    std::vector<Eigen::Index> counts(std::size_t(k), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.row(assign[std::size_t(i)]) += data.row(i);
      ++counts[std::size_t(assign[std::size_t(i)])];
    }
    std::vector<bool> taken(std::size_t(n), false);
    for (int j = 0; j < k; ++j) {
      if (counts[std::size_t(j)] > 0) {
        centroids.row(j) = sums.row(j) / double(counts[std::size_t(j)]);
        continue;
      }
      Eigen::Index far = -1;
      for (Eigen::Index i = 0; i < n; ++i)
        if (!taken[std::size_t(i)] && (far < 0 || dist[std::size_t(i)] > dist[std::size_t(far)]))
          far = i;
      taken[std::size_t(far)] = true;
      dist[std::size_t(far)] = 0.0;
      centroids.row(j) = data.row(far);
    }
  }
  assign_all();
  return KMeansResult{std::move(centroids), std::move(assign)};
}

// --- Persistence ------------------------------------------------------------

void save_codec(const SurrogateCodec& codec, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  const CodecSpec& s = codec.spec();
  out.write(kCodecMagic, sizeof kCodecMagic);
  put(out, kCodecVersion);
  put(out, std::uint32_t(s.family_id.size()));
  out.write(s.family_id.data(), std::streamsize(s.family_id.size()));
  for (std::int32_t v : {s.rate, s.frame, s.latent_dim, s.codebook_size, s.num_stages}) put(out, v);
  put(out, s.seed);
  auto put_rows = [&](const Eigen::MatrixXd& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) put(out, m(i, j));
  };
  put_rows(codec.analysis());
  for (const auto& cb : codec.codebooks()) put_rows(cb);
  if (!out) throw IoError("write failed for " + path.string());
}

SurrogateCodec load_codec(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kCodecMagic, sizeof magic) != 0)
    throw FormatError(path.string() + ": not a codec file");
  if (const auto version = get<std::uint32_t>(in, path); version != kCodecVersion)
    throw FormatError(path.string() + ": unsupported codec format version " + std::to_string(version));

  CodecSpec s;
  const auto name_len = get<std::uint32_t>(in, path);
  if (name_len > 4096) throw FormatError(path.string() + ": implausible family label length");
  s.family_id.resize(name_len);
  in.read(s.family_id.data(), std::streamsize(name_len));
  s.rate = get<std::int32_t>(in, path);
  s.frame = get<std::int32_t>(in, path);
  s.latent_dim = get<std::int32_t>(in, path);
  s.codebook_size = get<std::int32_t>(in, path);
  s.num_stages = get<std::int32_t>(in, path);
  s.seed = get<std::uint64_t>(in, path);
  try {
    s.validate();
  } catch (const ConfigError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }

  auto get_rows = [&](Eigen::Index rows, Eigen::Index cols) {
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = get<double>(in, path);
    return m;
  };
  Eigen::MatrixXd analysis = get_rows(s.latent_dim, s.frame);
  std::vector<Eigen::MatrixXd> codebooks;
  for (int i = 0; i < s.num_stages; ++i) codebooks.push_back(get_rows(s.codebook_size, s.latent_dim));
  if (in.peek() != std::char_traits<char>::eof())
    throw FormatError(path.string() + ": trailing bytes after codec payload");
  try {
    return SurrogateCodec(s, std::move(analysis), std::move(codebooks));
  } catch (const ConfigError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace latentmark
