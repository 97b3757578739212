#include <gtest/gtest.h>

#include <cmath>
#include <fstream>

#include "fixtures.hpp"
#include "somreplay/error.hpp"
#include "somreplay/vae.hpp"

namespace somreplay {
namespace {

VaeConfig tiny_config() {
  VaeConfig c;
  c.input_shape = {3, 4, 4};
  c.latent_dim = 8;
  c.hidden = {32};
  c.learning_rate = 1e-3;
  c.batch_size = 8;
  c.seed = 11;
  return c;
}

Eigen::MatrixXd tanh_batch(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  Eigen::MatrixXd x(rows, cols);
  rng.fill_normal({x.data(), static_cast<std::size_t>(x.size())});
  return x.array().tanh().matrix();
}

TEST(VaeConfig, DefaultCompressesRgbImagesTwentyFourFold) {
  const VaeConfig c;
  EXPECT_EQ(c.input_dim(), 3072u);
  EXPECT_EQ(c.input_dim() / c.latent_dim, 24u);
  EXPECT_EQ(c.input_dim() % c.latent_dim, 0u);
}

TEST(VaeConfig, ValidationRejectsBadValues) {
  auto bad = [](auto mutate) {
    VaeConfig c = tiny_config();
    mutate(c);
    return c;
  };
  EXPECT_THROW(bad([](VaeConfig& c) { c.latent_dim = 1; }).validate(), ConfigError);
  EXPECT_THROW(bad([](VaeConfig& c) { c.hidden = {0}; }).validate(), ConfigError);
  EXPECT_THROW(bad([](VaeConfig& c) { c.batch_size = 0; }).validate(), ConfigError);
  EXPECT_THROW(bad([](VaeConfig& c) { c.learning_rate = -1.0; }).validate(), ConfigError);
  EXPECT_THROW(bad([](VaeConfig& c) { c.kl_scale = -0.5; }).validate(), ConfigError);
  EXPECT_NO_THROW(tiny_config().validate());
}

TEST(VaeModel, ParameterLayoutCoversBuffer) {
  const VaeModel m(tiny_config());
  // enc 48->32, heads 32->8 twice, dec 8->32, out 32->48.
  const std::size_t expected = (48 * 32 + 32) + 2 * (32 * 8 + 8) + (8 * 32 + 32) + (32 * 48 + 48);
  EXPECT_EQ(m.parameter_count(), expected);
  EXPECT_EQ(m.encoder_parameters().begin, 0u);
  EXPECT_EQ(m.encoder_parameters().end, m.decoder_parameters().begin);
  EXPECT_EQ(m.decoder_parameters().end, expected);
}

TEST(VaeModel, SeededInitializationIsDeterministic) {
  EXPECT_TRUE(VaeModel(tiny_config()) == VaeModel(tiny_config()));
  VaeConfig other = tiny_config();
  other.seed = 12;
  EXPECT_FALSE(VaeModel(tiny_config()) == VaeModel(other));
}

TEST(VaeModel, OutputShapesAndRange) {
  const VaeModel m(tiny_config());
  Rng rng(1, 1);
  const Eigen::MatrixXd x = tanh_batch(rng, 48, 1);
  const VaeOutput out = m.forward({x.data(), 48}, rng);
  EXPECT_EQ(out.mu.dim(), 8u);
  EXPECT_EQ(out.logvar.dim(), 8u);
  EXPECT_EQ(out.z.dim(), 8u);
  ASSERT_EQ(out.reconstruction.dim(), 48u);
  for (double v : out.reconstruction.span()) {
    EXPECT_GE(v, -1.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(VaeModel, BatchedAndSingleEncodeAgree) {
  const VaeModel m(tiny_config());
  Rng rng(2, 1);
  const Eigen::MatrixXd x = tanh_batch(rng, 48, 3);
  Eigen::MatrixXd mu, logvar;
  m.encode(x, mu, logvar);
  for (Eigen::Index c = 0; c < 3; ++c) {
    Vector m1, l1;
    m.encode({x.col(c).data(), 48}, m1, l1);
    for (std::size_t k = 0; k < 8; ++k) {
      EXPECT_NEAR(m1[k], mu(static_cast<Eigen::Index>(k), c), 1e-12);
      EXPECT_NEAR(l1[k], logvar(static_cast<Eigen::Index>(k), c), 1e-12);
    }
  }
}

TEST(VaeModel, RejectsWrongInputSize) {
  const VaeModel m(tiny_config());
  Vector mu, lv;
  const std::vector<double> x(47, 0.0);
  EXPECT_THROW(m.encode(x, mu, lv), ContractError);
  EXPECT_THROW((void)m.decode(std::vector<double>(7, 0.0)), ContractError);
}

TEST(KlDivergence, ClosedFormValues) {
  Eigen::MatrixXd mu = Eigen::MatrixXd::Zero(4, 2);
  Eigen::MatrixXd lv = Eigen::MatrixXd::Zero(4, 2);
  EXPECT_NEAR(kl_divergence(mu, lv), 0.0, 1e-15);
  mu(0, 0) = 2.0;  // contributes 2 to column 0
  lv(1, 1) = 1.0;  // contributes (e - 2) / 2 to column 1
  EXPECT_NEAR(kl_divergence(mu, lv), (2.0 + 0.5 * (std::exp(1.0) - 2.0)) / 2.0, 1e-12);
}

TEST(Reparameterize, MomentsMatch) {
  const std::vector<double> mu{0.5, -1.0};
  const std::vector<double> lv{std::log(4.0), -50.0};
  Rng rng(3, 1);
  double s0 = 0.0, q0 = 0.0, max_dev1 = 0.0;
  const int n = 40000;
  for (int k = 0; k < n; ++k) {
    const Vector z = reparameterize(mu, lv, rng);
    s0 += z[0];
    q0 += z[0] * z[0];
    max_dev1 = std::max(max_dev1, std::abs(z[1] + 1.0));
  }
  const double mean = s0 / n;
  EXPECT_NEAR(mean, 0.5, 0.05);
  EXPECT_NEAR(q0 / n - mean * mean, 4.0, 0.15);
  EXPECT_LT(max_dev1, 1e-9);
}

TEST(GradCheck, SmallModelAllParameters) {
  const VaeModel m(tiny_config());
  Rng rng(4, 1);
  const Eigen::MatrixXd x = tanh_batch(rng, 48, 4);
  GradCheckOptions o;
  o.sample_count = 0;
  const GradCheckReport r = grad_check(m, x, rng, o);
  EXPECT_EQ(r.checked, m.parameter_count());
  EXPECT_TRUE(r.passed) << "max rel error " << r.max_rel_error;
  EXPECT_LE(r.max_rel_error, 1e-3);
}

TEST(GradCheck, DeeperTanhModelWithKlScale) {
  VaeConfig c = tiny_config();
  c.hidden = {24, 16};
  c.hidden_activation = Activation::tanh;
  c.kl_scale = 0.3;
  const VaeModel m(c);
  Rng rng(5, 1);
  const Eigen::MatrixXd x = tanh_batch(rng, 48, 3);
  GradCheckOptions o;
  o.sample_count = 400;
  const GradCheckReport r = grad_check(m, x, rng, o);
  EXPECT_EQ(r.checked, 400u);
  EXPECT_TRUE(r.passed) << "max rel error " << r.max_rel_error;
}

TEST(GradCheck, FeatureLossHookIsDifferentiated) {
  VaeModel m(tiny_config());
  // Sum of cubes of the reconstruction error.
  m.set_feature_loss([](const Eigen::MatrixXd& x, const Eigen::MatrixXd& x_hat, Eigen::MatrixXd& grad) {
    const Eigen::ArrayXXd d = (x_hat - x).array();
    grad = (3.0 * d.square()).matrix() / static_cast<double>(x.cols());
    return d.cube().sum() / static_cast<double>(x.cols());
  });
  Rng rng(6, 1);
  const Eigen::MatrixXd x = tanh_batch(rng, 48, 2);
  GradCheckOptions o;
  o.range = m.decoder_parameters();
  const GradCheckReport r = grad_check(m, x, rng, o);
  EXPECT_TRUE(r.passed) << "max rel error " << r.max_rel_error;
  Eigen::MatrixXd noise = Eigen::MatrixXd::Zero(8, 2);
  EXPECT_NE(m.loss_with_noise(x, noise).feature, 0.0);
}

TEST(GradCheck, DetectsCorruptedGradient) {
  // A model whose hook reports a wrong derivative must fail the check.
  VaeModel m(tiny_config());
  m.set_feature_loss([](const Eigen::MatrixXd& x, const Eigen::MatrixXd& x_hat, Eigen::MatrixXd& grad) {
    grad = Eigen::MatrixXd::Constant(x.rows(), x.cols(), 1.0);
    return 0.0 * (x_hat - x).sum();
  });
  Rng rng(7, 1);
  const Eigen::MatrixXd x = tanh_batch(rng, 48, 2);
  GradCheckOptions o;
  o.range = m.decoder_parameters();
  EXPECT_FALSE(grad_check(m, x, rng, o).passed);
}

TEST(Train, LossDecreasesAndIsDeterministic) {
  VaeConfig c = tiny_config();
  c.kl_scale = 1.0 / 48.0;
  Rng data_rng(8, 1);
  const Eigen::MatrixXd x = tanh_batch(data_rng, 48, 64) * 0.8;
  VaeModel a(c);
  VaeModel b(c);
  Rng ra(9, 1);
  Rng rb(9, 1);
  const LossHistory ha = train(a, x, ra, 30);
  const LossHistory hb = train(b, x, rb, 30);
  ASSERT_EQ(ha.size(), 30u);
  EXPECT_LT(ha.back().recon, 0.5 * ha.front().recon);
  EXPECT_TRUE(a == b);
  EXPECT_EQ(ha.back().total, hb.back().total);
  EXPECT_EQ(a.step(), 30u * 8u);
}

TEST(Train, OverfitsSmallSet) {
  VaeConfig c = tiny_config();
  c.hidden = {64};
  c.kl_scale = 1.0 / 48.0;
  c.batch_size = 10;
  Rng data_rng(10, 1);
  const Eigen::MatrixXd x = tanh_batch(data_rng, 48, 10) * 0.8;
  VaeModel m(c);
  Rng rng(11, 1);
  (void)train(m, x, rng, 1500);
  Eigen::MatrixXd mu, lv;
  m.encode(x, mu, lv);
  const Eigen::MatrixXd r = m.decode(mu);
  EXPECT_LT((r - x).squaredNorm() / static_cast<double>(x.size()), 0.01);
}

TEST(Train, ZeroLearningRateKeepsParameters) {
  VaeConfig c = tiny_config();
  c.learning_rate = 0.0;
  VaeModel m(c);
  const std::vector<double> before(m.parameters().begin(), m.parameters().end());
  Rng rng(12, 1);
  (void)train(m, tanh_batch(rng, 48, 16), rng, 2);
  EXPECT_TRUE(std::equal(before.begin(), before.end(), m.parameters().begin()));
}

TEST(Train, NonFiniteInputRaisesTrainingError) {
  VaeModel m(tiny_config());
  Rng rng(13, 1);
  Eigen::MatrixXd x = tanh_batch(rng, 48, 8);
  x(3, 2) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW((void)train(m, x, rng, 1), TrainingError);
}

TEST(VaeOptimizer, ResetClearsMoments) {
  VaeModel m(tiny_config());
  Rng rng(14, 1);
  (void)train(m, tanh_batch(rng, 48, 8), rng, 1);
  EXPECT_GT(m.step(), 0u);
  m.reset_optimizer();
  EXPECT_EQ(m.step(), 0u);
  for (double v : m.adam_m()) EXPECT_EQ(v, 0.0);
  for (double v : m.adam_v()) EXPECT_EQ(v, 0.0);
}

TEST(VaeCheckpoint, RoundTripIsExact) {
  VaeModel m(tiny_config());
  Rng rng(15, 1);
  (void)train(m, tanh_batch(rng, 48, 16), rng, 2);
  const auto bytes = encode_vae(m);
  const VaeModel back = decode_vae(bytes);
  EXPECT_TRUE(back == m);
  EXPECT_EQ(encode_vae(back), bytes);

  const auto dir = testing::temp_dir("vae_ckpt");
  save_vae(dir / "m.vaec", m);
  EXPECT_TRUE(load_vae(dir / "m.vaec") == m);
}

TEST(VaeCheckpoint, CorruptionIsDetected) {
  const auto bytes = encode_vae(VaeModel(tiny_config()));
  auto flipped = bytes;
  flipped[flipped.size() / 2] ^= 0x10;
  EXPECT_THROW((void)decode_vae(flipped), FormatError);
  auto magic = bytes;
  magic[0] = 'X';
  EXPECT_THROW((void)decode_vae(magic), FormatError);
  const std::vector<std::uint8_t> truncated(bytes.begin(), bytes.begin() + 20);
  EXPECT_THROW((void)decode_vae(truncated), FormatError);
}

TEST(VaeCheckpoint, MissingFileIsIoError) {
  EXPECT_THROW((void)load_vae(testing::temp_dir("vae_missing") / "nope.vaec"), IoError);
}

TEST(LossCsv, WritesHeaderAndRows) {
  const LossHistory h{{1, 3.0, 2.0, 1.0}, {2, 1.5, 1.0, 0.5}};
  const auto path = testing::temp_dir("loss_csv") / "loss.csv";
  write_loss_csv(h, path);
  std::ifstream in(path);
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(in, line)) lines.push_back(line);
  ASSERT_EQ(lines.size(), 3u);
  EXPECT_EQ(lines[0].rfind("epoch", 0), 0u);
  EXPECT_EQ(lines[1].rfind("1,", 0), 0u);
}

}  // namespace
}  // namespace somreplay
