#pragma once

#include <span>

#include "somreplay/linalg.hpp"
#include "somreplay/rng.hpp"

namespace somreplay {

// Exponential moving averages with momentum alpha in (0, 1]:
//   mean <- (1 - alpha) mean + alpha x
//   var  <- (1 - alpha) var  + alpha (mean - x)^2
//   cov  <- (1 - alpha) cov  + alpha (x - mean)(x - mean)^T
// The variance and covariance rules read `mean` as passed; the caller decides
// whether that is the value before or after the mean update.

Vector ema_update_mean(const Vector& mu, std::span<const double> x, double alpha);
Vector ema_update_var(const Vector& var, const Vector& mu, std::span<const double> x, double alpha);
SymMatrix ema_update_cov(const SymMatrix& cov, const Vector& mu, std::span<const double> x,
                         double alpha);

void ema_update_mean_inplace(std::span<double> mu, std::span<const double> x, double alpha);
void ema_update_var_inplace(std::span<double> var, std::span<const double> mu,
                            std::span<const double> x, double alpha);
void ema_update_cov_inplace(SymMatrix& cov, std::span<const double> mu, std::span<const double> x,
                            double alpha);

/// mu + sqrt(var) * N(0, I). Throws ContractError on a negative variance.
Vector sample_gaussian_diag(const Vector& mu, const Vector& var, Rng& rng);

/// mu + L * N(0, I) with L the Cholesky factor of cov_pd.
Vector sample_gaussian_full(const Vector& mu, const SymMatrix& cov_pd, Rng& rng);

/// Reusable full-covariance sampler; factorizes once.
class GaussianSampler {
 public:
  GaussianSampler(Vector mean, const SymMatrix& cov_pd);

  Vector sample(Rng& rng) const;
  void sample_into(Rng& rng, std::span<double> out) const;

  const Vector& mean() const { return mean_; }
  const Matrix& factor() const { return factor_; }

 private:
  Vector mean_;
  Matrix factor_;
};

}  // namespace somreplay
