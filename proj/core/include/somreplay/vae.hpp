#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "somreplay/image_shape.hpp"
#include "somreplay/linalg.hpp"
#include "somreplay/rng.hpp"

namespace somreplay {

enum class Activation : std::uint32_t { elu = 0, tanh = 1, identity = 2 };

/// Parameter-sized buffer aligned for Eigen. Eigen chooses between vector and
/// scalar code paths from pointer alignment, so a fixed base alignment keeps
/// results bitwise reproducible across heap states.
using ParamBuffer = std::vector<double, Eigen::aligned_allocator<double>>;

/// Half-open range [begin, end) into the flat parameter buffer.
struct ParamRange {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const { return end - begin; }
};

/// Fully connected VAE over flattened images. The encoder maps the input
/// through `hidden` widths to a (mu, logvar) head pair; the decoder mirrors the
/// hidden widths back to the input size.
struct VaeConfig {
  ImageShape input_shape{3, 32, 32};
  std::size_t latent_dim = 128;
  std::vector<std::size_t> hidden{512};
  Activation hidden_activation = Activation::elu;
  Activation output_activation = Activation::tanh;
  double learning_rate = 1e-4;
  std::size_t batch_size = 32;
  std::size_t epochs = 10;
  double kl_scale = 1.0;
  /// Weight of the pluggable feature loss; ignored while no hook is set.
  double feature_scale = 1.0;
  std::uint64_t seed = 42;

  std::size_t input_dim() const { return input_shape.size(); }
  void validate() const;
  bool operator==(const VaeConfig&) const = default;
};

struct VaeOutput {
  Vector mu;
  Vector logvar;
  Vector z;
  Vector reconstruction;
};

struct LossTerms {
  double total = 0.0;
  double recon = 0.0;
  double kl = 0.0;
  double feature = 0.0;
};

/// Feature loss on a batch (columns are samples). Returns the scalar loss and
/// writes d loss / d x_hat into `grad` (same shape as x_hat).
using FeatureLoss =
    std::function<double(const Eigen::MatrixXd& x, const Eigen::MatrixXd& x_hat, Eigen::MatrixXd& grad)>;

/// Encoder/decoder parameters plus Adam state, all in flat buffers.
class VaeModel {
 public:
  VaeModel() = default;
  explicit VaeModel(VaeConfig config);

  const VaeConfig& config() const { return config_; }
  VaeConfig& mutable_config() { return config_; }
  std::size_t parameter_count() const { return params_.size(); }
  std::span<double> parameters() { return params_; }
  std::span<const double> parameters() const { return params_; }
  std::uint64_t step() const { return step_; }

  /// Encoder (hidden stages and both heads) and decoder blocks of parameters().
  ParamRange encoder_parameters() const { return {0, decoder_.front().offset}; }
  ParamRange decoder_parameters() const { return {decoder_.front().offset, params_.size()}; }

  /// Batched encode: inputs are columns of `x`.
  void encode(const Eigen::MatrixXd& x, Eigen::MatrixXd& mu, Eigen::MatrixXd& logvar) const;
  Eigen::MatrixXd decode(const Eigen::MatrixXd& z) const;

  void encode(std::span<const double> x, Vector& mu, Vector& logvar) const;
  Vector decode(std::span<const double> z) const;

  /// encode, reparameterize with rng, decode.
  VaeOutput forward(std::span<const double> x, Rng& rng) const;

  /// Loss on a batch with noise drawn from rng.
  LossTerms loss(const Eigen::MatrixXd& x, Rng& rng) const;

  /// Loss on a batch with explicit reparameterization noise (latent x batch).
  /// When `grad` is given it receives d total / d parameters.
  LossTerms loss_with_noise(const Eigen::MatrixXd& x, const Eigen::MatrixXd& noise,
                            ParamBuffer* grad = nullptr) const;

  /// One Adam step along `grad`. Throws TrainingError on non-finite parameters.
  void apply_gradient(std::span<const double> grad);

  void set_feature_loss(FeatureLoss hook) { feature_loss_ = std::move(hook); }
  bool has_feature_loss() const { return static_cast<bool>(feature_loss_); }

  /// Clears Adam moments and the step counter; parameters are kept.
  void reset_optimizer();

  std::span<const double> adam_m() const { return adam_m_; }
  std::span<const double> adam_v() const { return adam_v_; }
  void restore_state(ParamBuffer params, ParamBuffer m, ParamBuffer v,
                     std::uint64_t step);

  bool operator==(const VaeModel& other) const;

 private:
  struct Layer {
    std::size_t in = 0;
    std::size_t out = 0;
    std::size_t offset = 0;  // W (out x in, column-major), then b (out)
    Activation act = Activation::identity;
  };
  struct Tape;

  void build_layout();
  void initialize(Rng& rng);
  Eigen::Map<const Eigen::MatrixXd> weight(const Layer& l) const;
  Eigen::Map<const Eigen::VectorXd> bias(const Layer& l) const;
  void run_encoder(const Eigen::MatrixXd& x, Tape* tape, Eigen::MatrixXd& mu, Eigen::MatrixXd& logvar) const;
  Eigen::MatrixXd run_decoder(const Eigen::MatrixXd& z, Tape* tape) const;

  VaeConfig config_;
  std::vector<Layer> encoder_;  // hidden stages
  Layer mu_head_;
  Layer logvar_head_;
  std::vector<Layer> decoder_;  // hidden stages then output layer
  ParamBuffer params_;
  ParamBuffer adam_m_;
  ParamBuffer adam_v_;
  std::uint64_t step_ = 0;
  FeatureLoss feature_loss_;
};

/// z = mu + exp(logvar / 2) * eps with eps ~ N(0, I).
Vector reparameterize(std::span<const double> mu, std::span<const double> logvar, Rng& rng);

/// -1/2 * mean over columns of sum(1 + logvar - mu^2 - exp(logvar)).
double kl_divergence(const Eigen::MatrixXd& mu, const Eigen::MatrixXd& logvar);

struct EpochLoss {
  std::size_t epoch = 0;
  double total = 0.0;
  double recon = 0.0;
  double kl = 0.0;
};

using LossHistory = std::vector<EpochLoss>;

/// Mini-batch Adam over the columns of `data` for config().epochs epochs (or
/// `epochs` when non-zero). Batches are reshuffled every epoch from rng.
/// Throws TrainingError naming the step when the loss turns non-finite.
LossHistory train(VaeModel& model, const Eigen::MatrixXd& data, Rng& rng, std::size_t epochs = 0);

/// Columns of a matrix built from rows of samples.
Eigen::MatrixXd to_columns(std::span<const std::span<const double>> samples);

void write_loss_csv(const LossHistory& history, const std::filesystem::path& path);

struct GradCheckEntry {
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

struct GradCheckReport {
  std::size_t checked = 0;
  double max_rel_error = 0.0;
  bool passed = false;
  double tolerance = 0.0;
  /// Largest errors first.
  std::vector<GradCheckEntry> worst;
};

struct GradCheckOptions {
  double tolerance = 1e-3;
  double step = 1e-4;
  /// Parameters sampled; 0 checks all of them.
  std::size_t sample_count = 256;
  /// Relative errors use max(|analytic|, |numeric|, floor) as denominator.
  double floor = 1e-6;
  std::size_t worst_count = 5;
  /// Restricts the check to one block; empty means all parameters.
  ParamRange range;
};

/// Central finite differences on a random parameter subsample, sharing one
/// noise draw between analytic and numeric evaluations.
GradCheckReport grad_check(const VaeModel& model, const Eigen::MatrixXd& x, Rng& rng,
                           const GradCheckOptions& options = {});

inline constexpr std::uint32_t kVaeCheckpointVersion = 1;

/// "VAEC" | u32 version | config | u64 step | u64 n | params | adam m | adam v
/// | u64 FNV-1a. The feature-loss hook is not persisted.
std::vector<std::uint8_t> encode_vae(const VaeModel& model);
VaeModel decode_vae(std::span<const std::uint8_t> bytes);
void save_vae(const std::filesystem::path& path, const VaeModel& model);
VaeModel load_vae(const std::filesystem::path& path);

}  // namespace somreplay
