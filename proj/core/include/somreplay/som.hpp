#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "somreplay/linalg.hpp"
#include "somreplay/rng.hpp"

namespace somreplay {

using ClassId = std::int32_t;

struct GridCoord {
  int i = 0;  // row
  int j = 0;  // column
  auto operator<=>(const GridCoord&) const = default;
};

/// Running statistics and label tallies of one grid unit.
struct UnitStats {
  Vector mean;
  Vector var;
  std::optional<SymMatrix> cov;
  std::map<ClassId, std::uint64_t> hits;
  std::uint64_t total_hits = 0;

  void add_hit(ClassId label, std::uint64_t count = 1);
  bool operator==(const UnitStats&) const = default;
};

enum class DecayKind { exponential, constant };

struct DecayConfig {
  DecayKind kind = DecayKind::exponential;
  double rate = 2.0;  // initial * exp(-rate * epoch_frac)
};

/// Which mean the variance/covariance rules see on each step.
enum class StatsOrder {
  mean_first,  // update the mean, then var/cov against the new mean
  mean_last,   // var/cov against the old mean, then the mean
};

struct SomHyperParams {
  double learning_rate = 0.5;
  double sigma = 0.95;
  int epochs = 10;
  double alpha = 0.1;
  DecayConfig decay;
  StatsOrder stats_order = StatsOrder::mean_first;
  /// Units whose update factor eta*h falls below this are left untouched.
  /// Zero updates the whole grid.
  double neighborhood_cutoff = 0.0;

  void validate() const;
};

/// Scheduled value at progress `epoch_frac` in [0, 1].
double decay(double initial, double epoch_frac, const DecayConfig& cfg);

/// Gaussian neighborhood over plain (non-toroidal) grid distance.
double neighborhood(GridCoord bmu, GridCoord coord, double sigma_t);

/// n x n lattice of weight vectors with per-unit statistics.
class SomGrid {
 public:
  SomGrid() = default;
  SomGrid(int side, std::size_t dim, bool track_cov);

  int side() const { return side_; }
  std::size_t dim() const { return dim_; }
  bool track_cov() const { return track_cov_; }
  std::size_t unit_count() const { return static_cast<std::size_t>(side_) * side_; }

  std::size_t index(GridCoord c) const { return static_cast<std::size_t>(c.i) * side_ + c.j; }
  GridCoord coord(std::size_t index) const {
    return {static_cast<int>(index / side_), static_cast<int>(index % side_)};
  }
  bool contains(GridCoord c) const { return c.i >= 0 && c.j >= 0 && c.i < side_ && c.j < side_; }

  std::span<const double> weight(GridCoord c) const { return {weights_.data() + index(c) * dim_, dim_}; }
  std::span<double> weight(GridCoord c) { return {weights_.data() + index(c) * dim_, dim_}; }
  std::span<const double> weights() const { return weights_; }
  std::span<double> weights() { return weights_; }

  const UnitStats& stats(GridCoord c) const { return stats_[index(c)]; }
  UnitStats& stats(GridCoord c) { return stats_[index(c)]; }
  std::span<const UnitStats> all_stats() const { return stats_; }
  std::span<UnitStats> all_stats() { return stats_; }

  /// Sorted set of labels with at least one hit anywhere on the grid.
  std::vector<ClassId> seen_classes() const;

  bool operator==(const SomGrid&) const = default;

 private:
  int side_ = 0;
  std::size_t dim_ = 0;
  bool track_cov_ = false;
  std::vector<double> weights_;
  std::vector<UnitStats> stats_;
};

/// Each weight is drawn uniformly (with replacement) from `seeds`; statistics
/// start at mean 0, variance 1, covariance 0 and no hits.
SomGrid init_from_samples(int side, std::size_t dim, std::span<const std::span<const double>> seeds,
                          bool track_cov, Rng& rng);
SomGrid init_from_samples(int side, std::size_t dim, std::span<const Vector> seeds, bool track_cov,
                          Rng& rng);

/// Unit minimizing squared Euclidean distance; ties go to the lowest
/// row-major index.
GridCoord find_bmu(const SomGrid& grid, std::span<const double> x);

/// Same as find_bmu, also reporting the squared distance.
GridCoord find_bmu(const SomGrid& grid, std::span<const double> x, double& squared_distance);

/// w <- w + eta * h(bmu, .) * (x - w) over the grid.
void update_weights(SomGrid& grid, GridCoord bmu, std::span<const double> x, double eta,
                    double sigma, double cutoff = 0.0);

/// Updates the running statistics of one unit with sample x.
void update_unit_stats(UnitStats& stats, std::span<const double> x, double alpha, StatsOrder order);

/// One online training step. Returns the BMU.
GridCoord train_step(SomGrid& grid, std::span<const double> x, std::optional<ClassId> label,
                     const SomHyperParams& params, double epoch_frac);

/// Majority label of a unit; ties go to the smallest class id.
std::optional<ClassId> unit_label(const SomGrid& grid, GridCoord coord);

/// Label of the BMU, falling back to the nearest labeled unit in weight space.
/// Throws InferenceError when no unit carries a label.
ClassId classify(const SomGrid& grid, std::span<const double> x);

/// unit_label for every unit, row-major.
std::vector<std::optional<ClassId>> unit_labels(const SomGrid& grid);

/// classify() against a precomputed label map (for bulk evaluation).
ClassId classify(const SomGrid& grid, std::span<const std::optional<ClassId>> labels,
                 std::span<const double> x);

/// Drops every unit's label tallies; weights and running statistics are kept.
void clear_hits(SomGrid& grid);

/// Copies of all weight vectors in row-major grid order.
std::vector<Vector> snapshot_units(const SomGrid& grid);

}  // namespace somreplay
