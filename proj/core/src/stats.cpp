#include "somreplay/stats.hpp"

#include <cmath>
#include <sstream>
#include <vector>

#include "somreplay/error.hpp"

namespace somreplay {

namespace {

void check_alpha(double alpha) {
  SOMREPLAY_EXPECTS(alpha > 0.0 && alpha <= 1.0, "EMA momentum must lie in (0, 1]");
}

void check_dims(std::size_t a, std::size_t b, const char* op) {
  if (a != b) {
    std::ostringstream os;
    os << op << ": dimension mismatch (" << a << " vs " << b << ")";
    throw ContractError(os.str());
  }
}

}  // namespace

void ema_update_mean_inplace(std::span<double> mu, std::span<const double> x, double alpha) {
  check_alpha(alpha);
  check_dims(mu.size(), x.size(), "ema_update_mean");
  const double keep = 1.0 - alpha;
  for (std::size_t k = 0; k < mu.size(); ++k) mu[k] = keep * mu[k] + alpha * x[k];
}

void ema_update_var_inplace(std::span<double> var, std::span<const double> mu,
                            std::span<const double> x, double alpha) {
  check_alpha(alpha);
  check_dims(var.size(), mu.size(), "ema_update_var");
  check_dims(var.size(), x.size(), "ema_update_var");
  const double keep = 1.0 - alpha;
  for (std::size_t k = 0; k < var.size(); ++k) {
    const double dev = mu[k] - x[k];
    var[k] = keep * var[k] + alpha * dev * dev;
  }
}

void ema_update_cov_inplace(SymMatrix& cov, std::span<const double> mu, std::span<const double> x,
                            double alpha) {
  check_alpha(alpha);
  const std::size_t n = cov.dim();
  check_dims(n, mu.size(), "ema_update_cov");
  check_dims(n, x.size(), "ema_update_cov");
  const double keep = 1.0 - alpha;
  std::vector<double> dev(n);
  for (std::size_t k = 0; k < n; ++k) dev[k] = x[k] - mu[k];
  std::span<double> c = cov.mutable_data();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      const double v = keep * c[i * n + j] + alpha * dev[i] * dev[j];
      c[i * n + j] = v;
      c[j * n + i] = v;
    }
  }
}

Vector ema_update_mean(const Vector& mu, std::span<const double> x, double alpha) {
  Vector out = mu;
  ema_update_mean_inplace(out.span(), x, alpha);
  return out;
}

Vector ema_update_var(const Vector& var, const Vector& mu, std::span<const double> x, double alpha) {
  Vector out = var;
  ema_update_var_inplace(out.span(), mu.span(), x, alpha);
  return out;
}

SymMatrix ema_update_cov(const SymMatrix& cov, const Vector& mu, std::span<const double> x,
                         double alpha) {
  SymMatrix out = cov;
  ema_update_cov_inplace(out, mu.span(), x, alpha);
  return out;
}

Vector sample_gaussian_diag(const Vector& mu, const Vector& var, Rng& rng) {
  check_dims(mu.dim(), var.dim(), "sample_gaussian_diag");
  Vector out(mu.dim());
  for (std::size_t k = 0; k < mu.dim(); ++k) {
    if (!(var[k] >= 0.0)) {
      std::ostringstream os;
      os << "sample_gaussian_diag: negative variance " << var[k] << " at index " << k;
      throw ContractError(os.str());
    }
    out[k] = mu[k] + std::sqrt(var[k]) * rng.normal();
  }
  return out;
}

GaussianSampler::GaussianSampler(Vector mean, const SymMatrix& cov_pd)
    : mean_(std::move(mean)), factor_(cholesky(cov_pd)) {
  check_dims(mean_.dim(), cov_pd.dim(), "GaussianSampler");
}

void GaussianSampler::sample_into(Rng& rng, std::span<double> out) const {
  const std::size_t n = mean_.dim();
  check_dims(out.size(), n, "GaussianSampler::sample_into");
  std::vector<double> eps(n);
  rng.fill_normal(eps);
  for (std::size_t i = 0; i < n; ++i) {
    double s = mean_[i];
    for (std::size_t k = 0; k <= i; ++k) s += factor_(i, k) * eps[k];
    out[i] = s;
  }
}

Vector GaussianSampler::sample(Rng& rng) const {
  Vector out(mean_.dim());
  sample_into(rng, out.span());
  return out;
}

Vector sample_gaussian_full(const Vector& mu, const SymMatrix& cov_pd, Rng& rng) {
  return GaussianSampler(mu, cov_pd).sample(rng);
}

}  // namespace somreplay
