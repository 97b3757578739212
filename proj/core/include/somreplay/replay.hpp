#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "somreplay/image_shape.hpp"
#include "somreplay/rng.hpp"
#include "somreplay/som.hpp"

namespace somreplay {

enum class UnitSelection {
  hit_weighted,  // P(unit) proportional to its hit count for the class
  uniform,       // every labeled unit equally likely
};

struct ReplayPlan {
  std::vector<ClassId> classes;
  std::size_t per_class_count = 0;
  SampleSpace space = SampleSpace::pixel;
  double epsilon = 1e-5;
  UnitSelection selection = UnitSelection::hit_weighted;
  /// Pixel-space draws are clamped into [clamp_lo, clamp_hi].
  double clamp_lo = 0.0;
  double clamp_hi = 1.0;
  /// Re-check the minimum eigenvalue of every regularized covariance.
  bool verify_pd = true;

  void validate() const;
};

struct ReplaySample {
  Vector x;
  ClassId label = 0;
  GridCoord source;
};

struct ReplayBatch {
  std::vector<ReplaySample> samples;
  SampleSpace space = SampleSpace::pixel;
  /// Requested classes without any labeled unit; nothing was drawn for them.
  std::vector<ClassId> skipped_classes;
  /// Number of pixel values moved by the range clamp.
  std::size_t clamped_values = 0;
};

struct LabeledUnit {
  GridCoord coord;
  std::reference_wrapper<const UnitStats> stats;
};

/// Units whose majority label equals `label`, in row-major order.
std::vector<LabeledUnit> labeled_units(const SomGrid& grid, ClassId label);

/// x ~ N(mean, diag(var)) per drawn unit, clamped to the pixel range.
ReplayBatch generate_diag(const SomGrid& grid, const ReplayPlan& plan, Rng& rng);

/// z ~ N(mean, regularize_cov(cov, epsilon)) per drawn unit; no clamping.
ReplayBatch generate_full(const SomGrid& grid, const ReplayPlan& plan, Rng& rng);

/// Dispatches on plan.space.
ReplayBatch generate(const SomGrid& grid, const ReplayPlan& plan, Rng& rng);

/// Literal reading of the replay loop: every current-task input picks its BMU
/// and one draw is taken from that unit, labeled with the unit's majority
/// label. Draws whose unit is unlabeled or labeled outside plan.classes are
/// dropped.
ReplayBatch generate_from_winners(const SomGrid& grid, const ReplayPlan& plan,
                                  std::span<const std::span<const double>> current_inputs, Rng& rng);

}  // namespace somreplay
