#include "latentmark/embedder.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <optional>

#include "latentmark/errors.hpp"

namespace latentmark {

void EmbedConfig::validate() const {
  if (!(gamma > 0)) throw ConfigError("gamma must be positive");
  if (!(eps_min > 0) || !(eps_min <= eps_max)) throw ConfigError("need 0 < eps_min <= eps_max");
  if (n_steps < 1) throw ConfigError("n_steps must be >= 1");
  if (!(step_size > 0)) throw ConfigError("step_size must be positive");
  if (!(beta > 0)) throw ConfigError("beta must be positive");
  if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1))
    throw ConfigError("moment decays must lie in [0, 1)");
  if (work_rate <= 0) throw ConfigError("work_rate must be positive");
  if (pad_block == 0) throw ConfigError("pad_block must be >= 1");
  if (!std::isfinite(sdr_db)) throw ConfigError("sdr_db must be finite");
}

double compute_budget(const Waveform& wave, const EmbedConfig& cfg) {
  const double raw = cfg.beta * rms(wave) * std::pow(10.0, -cfg.sdr_db / 20.0);
  return std::clamp(raw, cfg.eps_min, cfg.eps_max);
}

namespace {

template <class T>
std::shared_ptr<const T> borrow(const T& ref) {
  return std::shared_ptr<const T>(std::shared_ptr<const T>(), &ref);
}

// One committee member as seen from a work-rate signal of fixed length.
struct View {
  const SurrogateCodec* codec = nullptr;
  Eigen::VectorXd axis;
  double target = 0.0;
  double denom = 1.0;
  std::optional<Resampler> resampler;  // absent when rates match
  std::size_t view_length = 0;         // samples at the codec rate fed to encode
  std::vector<double> score_grad;      // d p / d (work signal), constant
};

View make_view(const SurrogateCodec& codec, const SecretKey& key, HingeTarget target,
               int work_rate, std::size_t work_length, std::size_t signal_length) {
  View v;
  v.codec = &codec;
  v.axis = key.axis.v;
  if (v.axis.size() != codec.spec().latent_dim)
    throw ShapeError("key axis dimension does not match codec " + codec.id());
  if (target == HingeTarget::Gamma) {
    v.target = key.gamma;
    v.denom = 1.0;
  } else {
    const CalibrationStats& s = key.calibration();
    v.target = s.tau;
    v.denom = s.alpha;
  }
  const int rate = codec.spec().rate;
  if (rate != work_rate) {
    v.resampler.emplace(work_rate, rate);
    v.view_length = v.resampler->output_length(signal_length);
  } else {
    v.view_length = signal_length;
  }
  const Eigen::Index frames = codec.frames_for(v.view_length);
  if (frames == 0) throw LengthError("signal shorter than one frame of codec " + codec.id());

  // p = mean_t <z_t, v>, so the cotangent is v / L in every column.
  LatentSequence cot{v.axis.replicate(1, frames) / double(frames), rate};
  std::vector<double> g = codec.encode_vjp(cot, v.view_length).samples;
  if (v.resampler) {
    v.score_grad = v.resampler->apply_adjoint(g, work_length);
  } else {
    g.resize(work_length, 0.0);
    v.score_grad = std::move(g);
  }
  return v;
}

double view_score(const View& v, const std::vector<double>& work) {
  Waveform x;
  if (v.resampler) {
    x = Waveform(v.resampler->apply(work, v.view_length), v.codec->spec().rate);
  } else {
    x = Waveform(std::vector<double>(work.begin(), work.begin() + std::ptrdiff_t(v.view_length)),
                 v.codec->spec().rate);
  }
  return projection_score(v.codec->encode(x), v.axis);
}

struct Evaluation {
  double loss = 0.0;
  std::vector<double> scores;
};

Evaluation evaluate(const std::vector<View>& views, const std::vector<double>& work) {
  Evaluation e;
  for (const auto& v : views) {
    const double p = view_score(v, work);
    e.scores.push_back(p);
    e.loss += std::max(0.0, v.target - p) / v.denom;
  }
  e.loss /= double(views.size());
  return e;
}

void accumulate_grad(const std::vector<View>& views, const std::vector<double>& scores,
                     std::vector<double>& grad) {
  std::fill(grad.begin(), grad.end(), 0.0);
  const double inv_n = 1.0 / double(views.size());
  for (std::size_t c = 0; c < views.size(); ++c) {
    const View& v = views[c];
    if (!(v.target - scores[c] > 0.0)) continue;
    const double w = -inv_n / v.denom;
    for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += w * v.score_grad[i];
  }
}

std::vector<View> make_views(const Waveform& wave, const Committee& committee, HingeTarget target) {
  std::vector<View> views;
  for (const auto& m : committee)
    views.push_back(make_view(*m.codec, *m.key, target, wave.rate, wave.size(), wave.size()));
  return views;
}

EmbedResult run_embedding(const Waveform& wave, const Committee& committee,
                          const EmbedConfig& cfg, HingeTarget target, int work_rate) {
  validate(wave);
  cfg.validate();
  if (committee.empty()) throw ConfigError("committee must not be empty");

  EmbedTrace trace;
  trace.epsilon = compute_budget(wave, cfg);
  for (const auto& m : committee) trace.codec_ids.push_back(m.codec->id());
  const double eps = trace.epsilon;

  const Waveform work_signal = resample(wave, work_rate);
  const std::size_t signal_len = work_signal.size();
  const Waveform padded = pad_to_multiple(work_signal, cfg.pad_block);
  const std::size_t work_len = padded.size();

  std::vector<View> views;
  for (const auto& m : committee)
    views.push_back(make_view(*m.codec, *m.key, target, work_rate, work_len, signal_len));

  std::vector<double> delta(work_len, 0.0), best_delta = delta;
  std::vector<double> x = padded.samples;
  std::vector<double> grad(work_len, 0.0), m1(work_len, 0.0), m2(work_len, 0.0);

  double best_loss = 0.0;
  std::vector<double> best_scores;
  const double lr = cfg.step_size * eps;

  for (int step = 0; step <= cfg.n_steps; ++step) {
    for (std::size_t i = 0; i < work_len; ++i) x[i] = padded.samples[i] + delta[i];
    const Evaluation e = evaluate(views, x);
    if (!std::isfinite(e.loss))
      throw NumericError("non-finite loss at step " + std::to_string(step));
    double linf = 0.0;
    for (double d : delta) linf = std::max(linf, std::abs(d));
    trace.loss.push_back(e.loss);
    trace.scores.push_back(e.scores);
    trace.delta_linf.push_back(linf);
    // Ties go to the later iterate, which is where the optimizer left off.
    if (step == 0 || e.loss <= best_loss) {
      best_loss = e.loss;
      best_delta = delta;
      best_scores = e.scores;
      trace.best_step = step;
    }
    if ((step == 0 && e.loss == 0.0) || step == cfg.n_steps) break;

    accumulate_grad(views, e.scores, grad);
    const double t = step + 1;
    const double c1 = 1.0 - std::pow(cfg.beta1, t);
    const double c2 = 1.0 - std::pow(cfg.beta2, t);
    for (std::size_t i = 0; i < signal_len; ++i) {
      const double g = grad[i];
      if (!std::isfinite(g))
        throw NumericError("non-finite gradient at step " + std::to_string(step));
      m1[i] = cfg.beta1 * m1[i] + (1.0 - cfg.beta1) * g;
      m2[i] = cfg.beta2 * m2[i] + (1.0 - cfg.beta2) * g * g;
      const double update = lr * (m1[i] / c1) / (std::sqrt(m2[i] / c2) + cfg.adam_eps);
      delta[i] = std::clamp(delta[i] - update, -eps, eps);
    }
  }
  trace.final_scores = best_scores;

  EmbedResult result;
  if (trace.best_step == 0) {
    // Nothing to improve: the input is returned untouched.
    result.watermarked = wave;
    result.trace = std::move(trace);
    return result;
  }

  best_delta.resize(signal_len);
  std::vector<double> out_delta;
  if (work_rate == wave.rate) {
    out_delta = std::move(best_delta);
  } else {
    out_delta = Resampler(work_rate, wave.rate).apply(best_delta, wave.size());
    for (auto& d : out_delta) d = std::clamp(d, -eps, eps);
  }
  Waveform out = wave;
  double linf = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out.samples[i] = std::clamp(out.samples[i] + out_delta[i], -1.0, 1.0);
    linf = std::max(linf, std::abs(out_delta[i]));
  }
  trace.final_delta_linf = linf;
  result.watermarked = std::move(out);
  result.trace = std::move(trace);
  return result;
}

}  // namespace

double loss_single(const Waveform& wave, const SurrogateCodec& codec, const SecretKey& key) {
  const double p = projection_score(codec, wave, key.axis.v);
  return std::max(0.0, key.gamma - p);
}

std::vector<double> loss_single_grad(const Waveform& wave, const SurrogateCodec& codec,
                                     const SecretKey& key) {
  const Committee committee{{borrow(codec), borrow(key)}};
  const auto views = make_views(wave, committee, HingeTarget::Gamma);
  std::vector<double> grad(wave.size(), 0.0);
  accumulate_grad(views, evaluate(views, wave.samples).scores, grad);
  return grad;
}

double loss_joint(const Waveform& wave, const Committee& committee) {
  if (committee.empty()) throw ConfigError("committee must not be empty");
  double total = 0.0;
  for (const auto& m : committee) {
    const CalibrationStats& s = m.key->calibration();
    const double p = projection_score(*m.codec, wave, m.key->axis.v);
    total += std::max(0.0, s.tau - p) / s.alpha;
  }
  return total / double(committee.size());
}

std::vector<double> loss_joint_grad(const Waveform& wave, const Committee& committee) {
  if (committee.empty()) throw ConfigError("committee must not be empty");
  const auto views = make_views(wave, committee, HingeTarget::Normalized);
  std::vector<double> grad(wave.size(), 0.0);
  accumulate_grad(views, evaluate(views, wave.samples).scores, grad);
  return grad;
}

EmbedResult embed_single(const Waveform& wave, const SurrogateCodec& codec, const SecretKey& key,
                         const EmbedConfig& cfg, HingeTarget target) {
  const Committee committee{{borrow(codec), borrow(key)}};
  const int work_rate = wave.rate == codec.spec().rate ? wave.rate : cfg.work_rate;
  return run_embedding(wave, committee, cfg, target, work_rate);
}

EmbedResult embed_joint(const Waveform& wave, const Committee& committee, const EmbedConfig& cfg) {
  return run_embedding(wave, committee, cfg, HingeTarget::Normalized, cfg.work_rate);
}

void write_trace(const EmbedTrace& trace, std::ostream& out) {
  out << "step\tloss\tdelta_linf";
  for (const auto& id : trace.codec_ids) out << "\tp_" << id;
  out << '\n' << std::setprecision(12);
  for (std::size_t i = 0; i < trace.loss.size(); ++i) {
    out << i << '\t' << trace.loss[i] << '\t' << trace.delta_linf[i];
    for (double p : trace.scores[i]) out << '\t' << p;
    out << '\n';
  }
}

}  // namespace latentmark
