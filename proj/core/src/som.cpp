#include "somreplay/som.hpp"

#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include "somreplay/error.hpp"
#include "somreplay/stats.hpp"

namespace somreplay {

void UnitStats::add_hit(ClassId label, std::uint64_t count) {
  hits[label] += count;
  total_hits += count;
}

void SomHyperParams::validate() const {
  if (!(learning_rate > 0.0 && learning_rate <= 1.0))
    throw ConfigError("som: learning_rate must lie in (0, 1]");
  if (!(sigma > 0.0)) throw ConfigError("som: sigma must be positive");
  if (epochs <= 0) throw ConfigError("som: epochs must be positive");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigError("som: alpha must lie in (0, 1]");
  if (!(decay.rate >= 0.0)) throw ConfigError("som: decay rate must be non-negative");
  if (!(neighborhood_cutoff >= 0.0)) throw ConfigError("som: neighborhood_cutoff must be >= 0");
}

double decay(double initial, double epoch_frac, const DecayConfig& cfg) {
  SOMREPLAY_EXPECTS(epoch_frac >= 0.0 && epoch_frac <= 1.0, "decay: epoch_frac must lie in [0, 1]");
  if (cfg.kind == DecayKind::constant) return initial;
  return initial * std::exp(-cfg.rate * epoch_frac);
}

double neighborhood(GridCoord bmu, GridCoord coord, double sigma_t) {
  const double di = coord.i - bmu.i;
  const double dj = coord.j - bmu.j;
  const double d2 = di * di + dj * dj;
  // Limit as sigma -> 0: only the BMU itself moves.
  if (d2 == 0.0) return 1.0;
  return std::exp(-d2 / (2.0 * sigma_t * sigma_t));
}

SomGrid::SomGrid(int side, std::size_t dim, bool track_cov)
    : side_(side), dim_(dim), track_cov_(track_cov) {
  SOMREPLAY_EXPECTS(side > 0, "SomGrid: side must be positive");
  SOMREPLAY_EXPECTS(dim > 0, "SomGrid: dim must be positive");
  weights_.assign(unit_count() * dim, 0.0);
  stats_.resize(unit_count());
  for (UnitStats& s : stats_) {
    s.mean = Vector(dim, 0.0);
    s.var = Vector(dim, 1.0);
    if (track_cov) s.cov = SymMatrix(dim, 0.0);
  }
}

std::vector<ClassId> SomGrid::seen_classes() const {
  std::set<ClassId> seen;
  for (const UnitStats& s : stats_)
    for (const auto& [label, count] : s.hits)
      if (count > 0) seen.insert(label);
  return {seen.begin(), seen.end()};
}

SomGrid init_from_samples(int side, std::size_t dim, std::span<const std::span<const double>> seeds,
                          bool track_cov, Rng& rng) {
  if (seeds.empty()) throw ContractError("init_from_samples: empty seed set");
  for (const auto& s : seeds)
    SOMREPLAY_EXPECTS(s.size() == dim, "init_from_samples: seed sample has wrong dimension");
  SomGrid grid(side, dim, track_cov);
  for (std::size_t u = 0; u < grid.unit_count(); ++u) {
    const auto& pick = seeds[rng.uniform_index(seeds.size())];
    std::span<double> w = grid.weight(grid.coord(u));
    std::copy(pick.begin(), pick.end(), w.begin());
  }
  return grid;
}

SomGrid init_from_samples(int side, std::size_t dim, std::span<const Vector> seeds, bool track_cov,
                          Rng& rng) {
  std::vector<std::span<const double>> views;
  views.reserve(seeds.size());
  for (const Vector& v : seeds) views.push_back(v.span());
  return init_from_samples(side, dim, views, track_cov, rng);
}

namespace {

void check_input(const SomGrid& grid, std::span<const double> x) {
  if (x.size() != grid.dim()) {
    std::ostringstream os;
    os << "som: input dimension " << x.size() << " does not match grid dimension " << grid.dim();
    throw ContractError(os.str());
  }
}

constexpr std::size_t kLanes = 8;
constexpr std::size_t kBlock = 128;

inline void accumulate_block(double* acc, const double* w, const double* x) {
  for (std::size_t k = 0; k < kBlock; k += kLanes) {
    for (std::size_t l = 0; l < kLanes; ++l) {
      const double d = w[k + l] - x[k + l];
      acc[l] += d * d;
    }
  }
}

inline double lane_sum(const double* acc) {
  return ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
}

// Squared distance with early exit once the partial sum exceeds `bound`.
// Returns a value > bound in that case; otherwise the full sum. Eight lane
// accumulators in a fixed order keep the result deterministic while letting
// the compiler vectorize.
inline double bounded_sq_distance(const double* w, const double* x, std::size_t dim, double bound) {
  double acc[kLanes] = {};
  std::size_t k = 0;
  for (; k + kBlock <= dim; k += kBlock) {
    accumulate_block(acc, w + k, x + k);
    const double partial = lane_sum(acc);
    if (partial > bound) return partial;
  }
  for (; k + kLanes <= dim; k += kLanes) {
    for (std::size_t l = 0; l < kLanes; ++l) {
      const double d = w[k + l] - x[k + l];
      acc[l] += d * d;
    }
  }
  double s = lane_sum(acc);
  for (; k < dim; ++k) {
    const double d = w[k] - x[k];
    s += d * d;
  }
  return s;
}

}  // namespace

GridCoord find_bmu(const SomGrid& grid, std::span<const double> x, double& squared_distance) {
  check_input(grid, x);
  const std::size_t dim = grid.dim();
  const double* w = grid.weights().data();
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t u = 0; u < grid.unit_count(); ++u) {
    const double d = bounded_sq_distance(w + u * dim, x.data(), dim, best_d);
    if (d < best_d) {
      best_d = d;
      best = u;
    }
  }
  squared_distance = best_d;
  return grid.coord(best);
}

GridCoord find_bmu(const SomGrid& grid, std::span<const double> x) {
  double unused = 0.0;
  return find_bmu(grid, x, unused);
}

void update_weights(SomGrid& grid, GridCoord bmu, std::span<const double> x, double eta,
                    double sigma, double cutoff) {
  check_input(grid, x);
  const std::size_t dim = grid.dim();
  for (std::size_t u = 0; u < grid.unit_count(); ++u) {
    const GridCoord c = grid.coord(u);
    const double f = eta * neighborhood(bmu, c, sigma);
    if (f == 0.0 || f < cutoff) continue;
    double* __restrict w = grid.weights().data() + u * dim;
    const double* __restrict xs = x.data();
    for (std::size_t k = 0; k < dim; ++k) w[k] += f * (xs[k] - w[k]);
  }
}

void update_unit_stats(UnitStats& stats, std::span<const double> x, double alpha, StatsOrder order) {
  if (order == StatsOrder::mean_first) {
    ema_update_mean_inplace(stats.mean.span(), x, alpha);
    ema_update_var_inplace(stats.var.span(), stats.mean.span(), x, alpha);
    if (stats.cov) ema_update_cov_inplace(*stats.cov, stats.mean.span(), x, alpha);
  } else {
    ema_update_var_inplace(stats.var.span(), stats.mean.span(), x, alpha);
    if (stats.cov) ema_update_cov_inplace(*stats.cov, stats.mean.span(), x, alpha);
    ema_update_mean_inplace(stats.mean.span(), x, alpha);
  }
}

GridCoord train_step(SomGrid& grid, std::span<const double> x, std::optional<ClassId> label,
                     const SomHyperParams& params, double epoch_frac) {
  const GridCoord bmu = find_bmu(grid, x);
  const double eta = decay(params.learning_rate, epoch_frac, params.decay);
  const double sigma = decay(params.sigma, epoch_frac, params.decay);
  update_weights(grid, bmu, x, eta, sigma, params.neighborhood_cutoff);
  UnitStats& s = grid.stats(bmu);
  update_unit_stats(s, x, params.alpha, params.stats_order);
  if (label) s.add_hit(*label);
  return bmu;
}

std::optional<ClassId> unit_label(const SomGrid& grid, GridCoord coord) {
  const UnitStats& s = grid.stats(coord);
  if (s.total_hits == 0) return std::nullopt;
  std::optional<ClassId> best;
  std::uint64_t best_count = 0;
  // std::map iterates in ascending label order, so strict > keeps the smallest id on ties.
  for (const auto& [label, count] : s.hits) {
    if (count > best_count) {
      best_count = count;
      best = label;
    }
  }
  return best;
}

std::vector<std::optional<ClassId>> unit_labels(const SomGrid& grid) {
  std::vector<std::optional<ClassId>> out(grid.unit_count());
  for (std::size_t u = 0; u < grid.unit_count(); ++u) out[u] = unit_label(grid, grid.coord(u));
  return out;
}

ClassId classify(const SomGrid& grid, std::span<const std::optional<ClassId>> labels,
                 std::span<const double> x) {
  check_input(grid, x);
  SOMREPLAY_EXPECTS(labels.size() == grid.unit_count(), "classify: label map size mismatch");
  const std::size_t dim = grid.dim();
  const double* w = grid.weights().data();
  std::optional<ClassId> best_label;
  double best_d = std::numeric_limits<double>::infinity();
  // Nearest labeled unit. When the BMU is labeled this is the BMU itself,
  // because the scan order and tie rule match find_bmu.
  for (std::size_t u = 0; u < grid.unit_count(); ++u) {
    if (!labels[u]) continue;
    const double d = bounded_sq_distance(w + u * dim, x.data(), dim, best_d);
    if (d < best_d) {
      best_d = d;
      best_label = labels[u];
    }
  }
  if (!best_label) throw InferenceError("classify: no unit carries a label");
  return *best_label;
}

ClassId classify(const SomGrid& grid, std::span<const double> x) {
  const auto labels = unit_labels(grid);
  return classify(grid, labels, x);
}

void clear_hits(SomGrid& grid) {
  for (UnitStats& s : grid.all_stats()) {
    s.hits.clear();
    s.total_hits = 0;
  }
}

std::vector<Vector> snapshot_units(const SomGrid& grid) {
  std::vector<Vector> out;
  out.reserve(grid.unit_count());
  for (std::size_t u = 0; u < grid.unit_count(); ++u) out.emplace_back(grid.weight(grid.coord(u)));
  return out;
}

}  // namespace somreplay
