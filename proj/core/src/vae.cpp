#include "somreplay/vae.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "somreplay/binary_io.hpp"
#include "somreplay/error.hpp"

namespace somreplay {

namespace {

constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;

void activate(Eigen::MatrixXd& m, Activation act) {
  switch (act) {
    case Activation::elu:
      m = m.unaryExpr([](double v) { return v > 0.0 ? v : std::expm1(v); });
      break;
    case Activation::tanh:
      m = m.array().tanh().matrix();
      break;
    case Activation::identity:
      break;
  }
}

// d out / d pre, expressed through the activation output where possible.
Eigen::MatrixXd activation_grad(const Eigen::MatrixXd& pre, const Eigen::MatrixXd& out, Activation act) {
  switch (act) {
    case Activation::elu:
      return pre.binaryExpr(out, [](double p, double o) { return p > 0.0 ? 1.0 : o + 1.0; });
    case Activation::tanh:
      return (1.0 - out.array().square()).matrix();
    case Activation::identity:
      break;
  }
  return Eigen::MatrixXd::Ones(pre.rows(), pre.cols());
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

void VaeConfig::validate() const {
  if (input_shape.empty()) throw ConfigError("vae: input shape must be non-empty");
  if (latent_dim < 2) throw ConfigError("vae: latent_dim must be at least 2");
  for (std::size_t h : hidden)
    if (h == 0) throw ConfigError("vae: hidden widths must be positive");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
    throw ConfigError("vae: learning_rate must be finite and non-negative");
  if (batch_size == 0) throw ConfigError("vae: batch_size must be positive");
  if (!(kl_scale >= 0.0)) throw ConfigError("vae: kl_scale must be non-negative");
  if (!(feature_scale >= 0.0)) throw ConfigError("vae: feature_scale must be non-negative");
}

// Activations kept for the backward pass.
struct VaeModel::Tape {
  std::vector<Eigen::MatrixXd> enc_in, enc_pre, enc_out;
  Eigen::MatrixXd head_in;
  std::vector<Eigen::MatrixXd> dec_in, dec_pre, dec_out;
};

VaeModel::VaeModel(VaeConfig config) : config_(std::move(config)) {
  config_.validate();
  build_layout();
  Rng rng(config_.seed, 0x5641450000000001ULL);
  initialize(rng);
}

void VaeModel::build_layout() {
  std::size_t offset = 0;
  auto make = [&offset](std::size_t in, std::size_t out, Activation act) {
    Layer l{in, out, offset, act};
    offset += in * out + out;
    return l;
  };
  encoder_.clear();
  decoder_.clear();
  std::size_t width = config_.input_dim();
  for (std::size_t h : config_.hidden) {
    encoder_.push_back(make(width, h, config_.hidden_activation));
    width = h;
  }
  mu_head_ = make(width, config_.latent_dim, Activation::identity);
  logvar_head_ = make(width, config_.latent_dim, Activation::identity);
  width = config_.latent_dim;
  for (auto it = config_.hidden.rbegin(); it != config_.hidden.rend(); ++it) {
    decoder_.push_back(make(width, *it, config_.hidden_activation));
    width = *it;
  }
  decoder_.push_back(make(width, config_.input_dim(), config_.output_activation));
  params_.assign(offset, 0.0);
  adam_m_.assign(offset, 0.0);
  adam_v_.assign(offset, 0.0);
  step_ = 0;
}

void VaeModel::initialize(Rng& rng) {
  auto init = [&](const Layer& l, double gain) {
    const double scale = gain / std::sqrt(static_cast<double>(l.in));
    for (std::size_t k = 0; k < l.in * l.out; ++k) params_[l.offset + k] = scale * rng.normal();
  };
  for (const Layer& l : encoder_) init(l, 1.0);
  init(mu_head_, 1.0);
  // A small logvar head keeps the initial posterior close to unit variance.
  init(logvar_head_, 0.1);
  for (const Layer& l : decoder_) init(l, 1.0);
}

Eigen::Map<const Eigen::MatrixXd> VaeModel::weight(const Layer& l) const {
  return {params_.data() + l.offset, static_cast<Eigen::Index>(l.out), static_cast<Eigen::Index>(l.in)};
}

Eigen::Map<const Eigen::VectorXd> VaeModel::bias(const Layer& l) const {
  return {params_.data() + l.offset + l.in * l.out, static_cast<Eigen::Index>(l.out)};
}

void VaeModel::run_encoder(const Eigen::MatrixXd& x, Tape* tape, Eigen::MatrixXd& mu,
                           Eigen::MatrixXd& logvar) const {
  SOMREPLAY_EXPECTS(static_cast<std::size_t>(x.rows()) == config_.input_dim(),
                    "vae encode: input size does not match the configured shape");
  Eigen::MatrixXd h = x;
  for (const Layer& l : encoder_) {
    Eigen::MatrixXd pre = weight(l) * h;
    pre.colwise() += bias(l);
    Eigen::MatrixXd out = pre;
    activate(out, l.act);
    if (tape) {
      tape->enc_in.push_back(std::move(h));
      tape->enc_pre.push_back(std::move(pre));
      tape->enc_out.push_back(out);
    }
    h = std::move(out);
  }
  mu = weight(mu_head_) * h;
  mu.colwise() += bias(mu_head_);
  logvar = weight(logvar_head_) * h;
  logvar.colwise() += bias(logvar_head_);
  if (tape) tape->head_in = std::move(h);
}

Eigen::MatrixXd VaeModel::run_decoder(const Eigen::MatrixXd& z, Tape* tape) const {
  SOMREPLAY_EXPECTS(static_cast<std::size_t>(z.rows()) == config_.latent_dim,
                    "vae decode: latent size does not match the configuration");
  Eigen::MatrixXd h = z;
  for (const Layer& l : decoder_) {
    Eigen::MatrixXd pre = weight(l) * h;
    pre.colwise() += bias(l);
    Eigen::MatrixXd out = pre;
    activate(out, l.act);
    if (tape) {
      tape->dec_in.push_back(std::move(h));
      tape->dec_pre.push_back(std::move(pre));
      tape->dec_out.push_back(out);
    }
    h = std::move(out);
  }
  return h;
}

void VaeModel::encode(const Eigen::MatrixXd& x, Eigen::MatrixXd& mu, Eigen::MatrixXd& logvar) const {
  run_encoder(x, nullptr, mu, logvar);
}

Eigen::MatrixXd VaeModel::decode(const Eigen::MatrixXd& z) const { return run_decoder(z, nullptr); }

void VaeModel::encode(std::span<const double> x, Vector& mu, Vector& logvar) const {
  const Eigen::MatrixXd in = Eigen::Map<const Eigen::MatrixXd>(x.data(), static_cast<Eigen::Index>(x.size()), 1);
  Eigen::MatrixXd m, lv;
  run_encoder(in, nullptr, m, lv);
  mu = Vector(std::span<const double>(m.data(), static_cast<std::size_t>(m.size())));
  logvar = Vector(std::span<const double>(lv.data(), static_cast<std::size_t>(lv.size())));
}

Vector VaeModel::decode(std::span<const double> z) const {
  const Eigen::MatrixXd in = Eigen::Map<const Eigen::MatrixXd>(z.data(), static_cast<Eigen::Index>(z.size()), 1);
  const Eigen::MatrixXd out = run_decoder(in, nullptr);
  return Vector(std::span<const double>(out.data(), static_cast<std::size_t>(out.size())));
}

VaeOutput VaeModel::forward(std::span<const double> x, Rng& rng) const {
  VaeOutput out;
  encode(x, out.mu, out.logvar);
  out.z = reparameterize(out.mu, out.logvar, rng);
  out.reconstruction = decode(out.z);
  return out;
}

LossTerms VaeModel::loss(const Eigen::MatrixXd& x, Rng& rng) const {
  Eigen::MatrixXd noise(static_cast<Eigen::Index>(config_.latent_dim), x.cols());
  rng.fill_normal({noise.data(), static_cast<std::size_t>(noise.size())});
  return loss_with_noise(x, noise, nullptr);
}

LossTerms VaeModel::loss_with_noise(const Eigen::MatrixXd& x, const Eigen::MatrixXd& noise,
                                    ParamBuffer* grad) const {
  SOMREPLAY_EXPECTS(x.cols() > 0, "vae loss: empty batch");
  SOMREPLAY_EXPECTS(noise.rows() == static_cast<Eigen::Index>(config_.latent_dim) && noise.cols() == x.cols(),
                    "vae loss: noise shape does not match latent_dim x batch");
  const double batch = static_cast<double>(x.cols());
  const double elements = batch * static_cast<double>(x.rows());

  Tape tape;
  Tape* t = grad ? &tape : nullptr;
  Eigen::MatrixXd mu, logvar;
  run_encoder(x, t, mu, logvar);
  const Eigen::MatrixXd sigma = (0.5 * logvar.array()).exp().matrix();
  const Eigen::MatrixXd z = mu + sigma.cwiseProduct(noise);
  const Eigen::MatrixXd x_hat = run_decoder(z, t);

  LossTerms terms;
  const Eigen::MatrixXd diff = x_hat - x;
  terms.recon = diff.squaredNorm() / elements;
  terms.kl = kl_divergence(mu, logvar);
  Eigen::MatrixXd feature_grad;
  if (feature_loss_) {
    feature_grad = Eigen::MatrixXd::Zero(x_hat.rows(), x_hat.cols());
    terms.feature = feature_loss_(x, x_hat, feature_grad);
  }
  terms.total = terms.recon + config_.kl_scale * terms.kl +
                (feature_loss_ ? config_.feature_scale * terms.feature : 0.0);
  if (!grad) return terms;

  grad->assign(params_.size(), 0.0);
  auto backward = [&](const Layer& l, const Eigen::MatrixXd& in, const Eigen::MatrixXd& pre,
                      const Eigen::MatrixXd& out, const Eigen::MatrixXd& d_out) {
    const Eigen::MatrixXd d_pre = d_out.cwiseProduct(activation_grad(pre, out, l.act));
    Eigen::Map<Eigen::MatrixXd> d_w(grad->data() + l.offset, static_cast<Eigen::Index>(l.out),
                                    static_cast<Eigen::Index>(l.in));
    Eigen::Map<Eigen::VectorXd> d_b(grad->data() + l.offset + l.in * l.out, static_cast<Eigen::Index>(l.out));
    d_w.noalias() += d_pre * in.transpose();
    d_b += d_pre.rowwise().sum();
    return Eigen::MatrixXd(weight(l).transpose() * d_pre);
  };

  Eigen::MatrixXd d = (2.0 / elements) * diff;
  if (feature_loss_) d += config_.feature_scale * feature_grad;
  for (std::size_t k = decoder_.size(); k-- > 0;)
    d = backward(decoder_[k], tape.dec_in[k], tape.dec_pre[k], tape.dec_out[k], d);

  const Eigen::MatrixXd d_mu = d + (config_.kl_scale / batch) * mu;
  const Eigen::MatrixXd d_logvar =
      (0.5 * d.array() * sigma.array() * noise.array() +
       (0.5 * config_.kl_scale / batch) * (logvar.array().exp() - 1.0))
          .matrix();
  Eigen::MatrixXd d_h = backward(mu_head_, tape.head_in, mu, mu, d_mu);
  d_h += backward(logvar_head_, tape.head_in, logvar, logvar, d_logvar);
  for (std::size_t k = encoder_.size(); k-- > 0;)
    d_h = backward(encoder_[k], tape.enc_in[k], tape.enc_pre[k], tape.enc_out[k], d_h);
  return terms;
}

void VaeModel::apply_gradient(std::span<const double> grad) {
  SOMREPLAY_EXPECTS(grad.size() == params_.size(), "vae: gradient size mismatch");
  ++step_;
  const double t = static_cast<double>(step_);
  const double c1 = 1.0 - std::pow(kAdamBeta1, t);
  const double c2 = 1.0 - std::pow(kAdamBeta2, t);
  const double lr = config_.learning_rate;
  for (std::size_t k = 0; k < params_.size(); ++k) {
    const double g = grad[k];
    adam_m_[k] = kAdamBeta1 * adam_m_[k] + (1.0 - kAdamBeta1) * g;
    adam_v_[k] = kAdamBeta2 * adam_v_[k] + (1.0 - kAdamBeta2) * g * g;
    params_[k] -= lr * (adam_m_[k] / c1) / (std::sqrt(adam_v_[k] / c2) + kAdamEps);
  }
  if (!all_finite(params_)) {
    std::ostringstream os;
    os << "vae: non-finite parameters after optimizer step " << step_;
    throw TrainingError(os.str());
  }
}

void VaeModel::reset_optimizer() {
  std::fill(adam_m_.begin(), adam_m_.end(), 0.0);
  std::fill(adam_v_.begin(), adam_v_.end(), 0.0);
  step_ = 0;
}

void VaeModel::restore_state(ParamBuffer params, ParamBuffer m, ParamBuffer v,
                             std::uint64_t step) {
  if (params.size() != params_.size() || m.size() != params_.size() || v.size() != params_.size())
    throw FormatError("vae: parameter count does not match the configuration");
  params_ = std::move(params);
  adam_m_ = std::move(m);
  adam_v_ = std::move(v);
  step_ = step;
}

bool VaeModel::operator==(const VaeModel& other) const {
  return config_ == other.config_ && params_ == other.params_ && adam_m_ == other.adam_m_ &&
         adam_v_ == other.adam_v_ && step_ == other.step_;
}

Vector reparameterize(std::span<const double> mu, std::span<const double> logvar, Rng& rng) {
  SOMREPLAY_EXPECTS(mu.size() == logvar.size(), "reparameterize: mu and logvar sizes differ");
  Vector z(mu.size());
  for (std::size_t k = 0; k < mu.size(); ++k) z[k] = mu[k] + std::exp(0.5 * logvar[k]) * rng.normal();
  return z;
}

double kl_divergence(const Eigen::MatrixXd& mu, const Eigen::MatrixXd& logvar) {
  SOMREPLAY_EXPECTS(mu.rows() == logvar.rows() && mu.cols() == logvar.cols() && mu.cols() > 0,
                    "kl_divergence: shape mismatch");
  const double sum = (1.0 + logvar.array() - mu.array().square() - logvar.array().exp()).sum();
  return -0.5 * sum / static_cast<double>(mu.cols());
}

Eigen::MatrixXd to_columns(std::span<const std::span<const double>> samples) {
  SOMREPLAY_EXPECTS(!samples.empty(), "to_columns: no samples");
  const std::size_t dim = samples.front().size();
  Eigen::MatrixXd out(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(samples.size()));
  for (std::size_t c = 0; c < samples.size(); ++c) {
    SOMREPLAY_EXPECTS(samples[c].size() == dim, "to_columns: ragged samples");
    std::copy(samples[c].begin(), samples[c].end(), out.col(static_cast<Eigen::Index>(c)).data());
  }
  return out;
}

LossHistory train(VaeModel& model, const Eigen::MatrixXd& data, Rng& rng, std::size_t epochs) {
  SOMREPLAY_EXPECTS(data.cols() > 0, "vae train: empty dataset");
  const VaeConfig& cfg = model.config();
  if (epochs == 0) epochs = cfg.epochs;
  const std::size_t n = static_cast<std::size_t>(data.cols());
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  ParamBuffer grad;
  LossHistory history;
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    EpochLoss acc;
    acc.epoch = epoch + 1;
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t count = std::min(cfg.batch_size, n - start);
      Eigen::MatrixXd batch(data.rows(), static_cast<Eigen::Index>(count));
      for (std::size_t k = 0; k < count; ++k)
        batch.col(static_cast<Eigen::Index>(k)) = data.col(static_cast<Eigen::Index>(order[start + k]));
      Eigen::MatrixXd noise(static_cast<Eigen::Index>(cfg.latent_dim), static_cast<Eigen::Index>(count));
      rng.fill_normal({noise.data(), static_cast<std::size_t>(noise.size())});
      const LossTerms terms = model.loss_with_noise(batch, noise, &grad);
      if (!std::isfinite(terms.total)) {
        std::ostringstream os;
        os << "vae train: non-finite loss at step " << model.step() + 1 << " (epoch " << epoch + 1 << ")";
        throw TrainingError(os.str());
      }
      model.apply_gradient(grad);
      const double w = static_cast<double>(count) / static_cast<double>(n);
      acc.total += w * terms.total;
      acc.recon += w * terms.recon;
      acc.kl += w * terms.kl;
    }
    history.push_back(acc);
  }
  return history;
}

void write_loss_csv(const LossHistory& history, const std::filesystem::path& path) {
  std::ostringstream os;
  os.precision(17);
  os << "epoch,total,recon,kl\n";
  for (const EpochLoss& e : history) os << e.epoch << ',' << e.total << ',' << e.recon << ',' << e.kl << '\n';
  write_text_file(path, os.str());
}

GradCheckReport grad_check(const VaeModel& model, const Eigen::MatrixXd& x, Rng& rng,
                           const GradCheckOptions& options) {
  SOMREPLAY_EXPECTS(options.step > 0.0, "grad_check: step must be positive");
  Eigen::MatrixXd noise(static_cast<Eigen::Index>(model.config().latent_dim), x.cols());
  rng.fill_normal({noise.data(), static_cast<std::size_t>(noise.size())});

  ParamBuffer analytic;
  model.loss_with_noise(x, noise, &analytic);

  ParamRange range = options.range;
  if (range.size() == 0) range = {0, model.parameter_count()};
  SOMREPLAY_EXPECTS(range.begin < range.end && range.end <= model.parameter_count(),
                    "grad_check: parameter range out of bounds");
  std::vector<std::size_t> indices(range.size());
  std::iota(indices.begin(), indices.end(), range.begin);
  if (options.sample_count != 0 && options.sample_count < indices.size()) {
    rng.shuffle(std::span<std::size_t>(indices));
    indices.resize(options.sample_count);
    std::sort(indices.begin(), indices.end());
  }

  VaeModel probe = model;
  std::span<double> params = probe.parameters();
  GradCheckReport report;
  report.tolerance = options.tolerance;
  std::vector<GradCheckEntry> entries;
  entries.reserve(indices.size());
  for (std::size_t idx : indices) {
    const double saved = params[idx];
    params[idx] = saved + options.step;
    const double up = probe.loss_with_noise(x, noise).total;
    params[idx] = saved - options.step;
    const double down = probe.loss_with_noise(x, noise).total;
    params[idx] = saved;
    GradCheckEntry e;
    e.index = idx;
    e.analytic = analytic[idx];
    e.numeric = (up - down) / (2.0 * options.step);
    const double denom = std::max({std::abs(e.analytic), std::abs(e.numeric), options.floor});
    e.rel_error = std::abs(e.analytic - e.numeric) / denom;
    report.max_rel_error = std::max(report.max_rel_error, e.rel_error);
    entries.push_back(e);
  }
  report.checked = entries.size();
  std::sort(entries.begin(), entries.end(),
            [](const GradCheckEntry& a, const GradCheckEntry& b) { return a.rel_error > b.rel_error; });
  entries.resize(std::min(entries.size(), options.worst_count));
  report.worst = std::move(entries);
  report.passed = report.max_rel_error <= options.tolerance;
  return report;
}

std::vector<std::uint8_t> encode_vae(const VaeModel& model) {
  const VaeConfig& c = model.config();
  BinaryWriter w;
  w.put_magic("VAEC");
  w.put_u32(kVaeCheckpointVersion);
  w.put_u32(c.input_shape.channels);
  w.put_u32(c.input_shape.height);
  w.put_u32(c.input_shape.width);
  w.put_u64(c.latent_dim);
  w.put_u32(static_cast<std::uint32_t>(c.hidden.size()));
  for (std::size_t h : c.hidden) w.put_u64(h);
  w.put_u32(static_cast<std::uint32_t>(c.hidden_activation));
  w.put_u32(static_cast<std::uint32_t>(c.output_activation));
  w.put_f64(c.learning_rate);
  w.put_u64(c.batch_size);
  w.put_u64(c.epochs);
  w.put_f64(c.kl_scale);
  w.put_f64(c.feature_scale);
  w.put_u64(c.seed);
  w.put_u64(model.step());
  w.put_u64(model.parameter_count());
  w.put_f64s(model.parameters());
  w.put_f64s(model.adam_m());
  w.put_f64s(model.adam_v());
  seal_with_checksum(w);
  return w.take();
}

VaeModel decode_vae(std::span<const std::uint8_t> bytes) {
  const std::string ctx = "vae checkpoint";
  BinaryReader r(verify_checksum(bytes, ctx), ctx);
  r.expect_magic("VAEC");
  const std::uint32_t version = r.get_u32();
  if (version != kVaeCheckpointVersion) {
    std::ostringstream os;
    os << ctx << ": unsupported version " << version << " (expected " << kVaeCheckpointVersion << ")";
    throw FormatError(os.str());
  }
  VaeConfig c;
  c.input_shape.channels = r.get_u32();
  c.input_shape.height = r.get_u32();
  c.input_shape.width = r.get_u32();
  c.latent_dim = r.get_u64();
  const std::uint32_t depth = r.get_u32();
  if (depth > 64) throw FormatError(ctx + ": implausible layer count");
  c.hidden.resize(depth);
  for (std::size_t& h : c.hidden) h = r.get_u64();
  const std::uint32_t hidden_act = r.get_u32();
  const std::uint32_t output_act = r.get_u32();
  if (hidden_act > 2 || output_act > 2) throw FormatError(ctx + ": unknown activation");
  c.hidden_activation = static_cast<Activation>(hidden_act);
  c.output_activation = static_cast<Activation>(output_act);
  c.learning_rate = r.get_f64();
  c.batch_size = r.get_u64();
  c.epochs = r.get_u64();
  c.kl_scale = r.get_f64();
  c.feature_scale = r.get_f64();
  c.seed = r.get_u64();
  const std::uint64_t step = r.get_u64();
  const std::uint64_t n = r.get_u64();
  try {
    c.validate();
  } catch (const ConfigError& e) {
    throw FormatError(ctx + ": " + e.what());
  }
  if (n > r.remaining() / 8) throw FormatError(ctx + ": truncated parameter block");
  VaeModel model(c);
  if (n != model.parameter_count()) throw FormatError(ctx + ": parameter count does not match configuration");
  ParamBuffer params(n), m(n), v(n);
  r.get_f64s(params);
  r.get_f64s(m);
  r.get_f64s(v);
  if (r.remaining() != 0) throw FormatError(ctx + ": trailing bytes");
  model.restore_state(std::move(params), std::move(m), std::move(v), step);
  return model;
}

void save_vae(const std::filesystem::path& path, const VaeModel& model) { write_file(path, encode_vae(model)); }

VaeModel load_vae(const std::filesystem::path& path) { return decode_vae(read_file(path)); }

}  // namespace somreplay
