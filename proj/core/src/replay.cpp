#include "somreplay/replay.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <sstream>

#include <spdlog/spdlog.h>

#include "somreplay/error.hpp"
#include "somreplay/linalg.hpp"
#include "somreplay/stats.hpp"

namespace somreplay {

void ReplayPlan::validate() const {
  if (classes.empty()) throw ContractError("replay plan: no classes");
  if (per_class_count == 0) throw ContractError("replay plan: per_class_count must be positive");
  if (!(epsilon > 0.0)) throw ContractError("replay plan: epsilon must be positive");
  if (!(clamp_lo < clamp_hi)) throw ContractError("replay plan: empty clamp range");
}

std::vector<LabeledUnit> labeled_units(const SomGrid& grid, ClassId label) {
  std::vector<LabeledUnit> out;
  for (std::size_t u = 0; u < grid.unit_count(); ++u) {
    const GridCoord c = grid.coord(u);
    if (unit_label(grid, c) == label) out.push_back({c, std::cref(grid.stats(c))});
  }
  return out;
}

namespace {

// Draws unit indices for one class according to the selection rule.
class UnitPicker {
 public:
  UnitPicker(const std::vector<LabeledUnit>& units, ClassId label, UnitSelection selection) {
    cumulative_.reserve(units.size());
    double total = 0.0;
    for (const LabeledUnit& u : units) {
      double w = 1.0;
      if (selection == UnitSelection::hit_weighted) {
        const auto& hits = u.stats.get().hits;
        const auto it = hits.find(label);
        w = it == hits.end() ? 0.0 : static_cast<double>(it->second);
      }
      total += w;
      cumulative_.push_back(total);
    }
  }

  std::size_t pick(Rng& rng) const {
    const double r = rng.uniform() * cumulative_.back();
    const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), r);
    return std::min<std::size_t>(static_cast<std::size_t>(it - cumulative_.begin()),
                                 cumulative_.size() - 1);
  }

 private:
  std::vector<double> cumulative_;
};

std::size_t clamp_into(std::span<double> x, double lo, double hi) {
  std::size_t moved = 0;
  for (double& v : x) {
    const double c = std::clamp(v, lo, hi);
    if (c != v) ++moved;
    v = c;
  }
  return moved;
}

// Per-class generator shared by both sampling modes.
template <typename DrawFn>
ReplayBatch generate_by_class(const SomGrid& grid, const ReplayPlan& plan, Rng& rng, DrawFn&& draw) {
  plan.validate();
  ReplayBatch batch;
  batch.space = plan.space;
  // One draw from the caller's stream seeds every class stream, so classes are
  // independent of each other and of generation order.
  const std::uint64_t salt = rng.next_u64();
  for (ClassId label : plan.classes) {
    const std::vector<LabeledUnit> units = labeled_units(grid, label);
    if (units.empty()) {
      spdlog::warn("replay: class {} has no labeled unit; skipped", label);
      batch.skipped_classes.push_back(label);
      continue;
    }
    Rng class_rng(salt, static_cast<std::uint64_t>(label));
    const UnitPicker picker(units, label, plan.selection);
    for (std::size_t k = 0; k < plan.per_class_count; ++k) {
      const LabeledUnit& unit = units[picker.pick(class_rng)];
      ReplaySample s;
      s.label = label;
      s.source = unit.coord;
      s.x = draw(unit, class_rng);
      if (plan.space == SampleSpace::pixel)
        batch.clamped_values += clamp_into(s.x.span(), plan.clamp_lo, plan.clamp_hi);
      batch.samples.push_back(std::move(s));
    }
  }
  return batch;
}

// Lazily regularizes and factorizes one covariance per unit.
class FullCovCache {
 public:
  FullCovCache(const SomGrid& grid, const ReplayPlan& plan) : grid_(grid), plan_(plan) {}

  const GaussianSampler& sampler(GridCoord c) {
    auto it = cache_.find(c);
    if (it != cache_.end()) return *it->second;
    const UnitStats& s = grid_.stats(c);
    try {
      SymMatrix pd = regularize_cov(*s.cov, plan_.epsilon);
      if (plan_.verify_pd) {
        const double min_eig = eigh(pd).eigenvalues[pd.dim() - 1];
        if (min_eig < plan_.epsilon * (1.0 - 1e-6)) {
          std::ostringstream os;
          os << "regularized covariance has eigenvalue " << min_eig << " below epsilon "
             << plan_.epsilon;
          throw NumericalError(os.str());
        }
      }
      auto sampler = std::make_unique<GaussianSampler>(s.mean, pd);
      return *cache_.emplace(c, std::move(sampler)).first->second;
    } catch (const NumericalError& e) {
      std::ostringstream os;
      os << "replay: unit (" << c.i << ", " << c.j << "): " << e.what();
      throw NumericalError(os.str());
    }
  }

 private:
  const SomGrid& grid_;
  const ReplayPlan& plan_;
  std::map<GridCoord, std::unique_ptr<GaussianSampler>> cache_;
};

}  // namespace

ReplayBatch generate_diag(const SomGrid& grid, const ReplayPlan& plan, Rng& rng) {
  SOMREPLAY_EXPECTS(plan.space == SampleSpace::pixel, "generate_diag: plan must target pixel space");
  return generate_by_class(grid, plan, rng, [](const LabeledUnit& unit, Rng& r) {
    return sample_gaussian_diag(unit.stats.get().mean, unit.stats.get().var, r);
  });
}

ReplayBatch generate_full(const SomGrid& grid, const ReplayPlan& plan, Rng& rng) {
  SOMREPLAY_EXPECTS(plan.space == SampleSpace::latent, "generate_full: plan must target latent space");
  SOMREPLAY_EXPECTS(grid.track_cov(), "generate_full: grid does not track covariance");
  FullCovCache cache(grid, plan);
  return generate_by_class(grid, plan, rng, [&cache](const LabeledUnit& unit, Rng& r) {
    return cache.sampler(unit.coord).sample(r);
  });
}

ReplayBatch generate(const SomGrid& grid, const ReplayPlan& plan, Rng& rng) {
  return plan.space == SampleSpace::pixel ? generate_diag(grid, plan, rng)
                                          : generate_full(grid, plan, rng);
}

ReplayBatch generate_from_winners(const SomGrid& grid, const ReplayPlan& plan,
                                  std::span<const std::span<const double>> current_inputs, Rng& rng) {
  plan.validate();
  const bool latent = plan.space == SampleSpace::latent;
  SOMREPLAY_EXPECTS(!latent || grid.track_cov(), "generate_from_winners: grid does not track covariance");
  ReplayBatch batch;
  batch.space = plan.space;
  const auto labels = unit_labels(grid);
  FullCovCache cache(grid, plan);
  for (const auto& x : current_inputs) {
    const GridCoord bmu = find_bmu(grid, x);
    const auto label = labels[grid.index(bmu)];
    if (!label || std::find(plan.classes.begin(), plan.classes.end(), *label) == plan.classes.end())
      continue;
    ReplaySample s;
    s.label = *label;
    s.source = bmu;
    if (latent) {
      s.x = cache.sampler(bmu).sample(rng);
    } else {
      s.x = sample_gaussian_diag(grid.stats(bmu).mean, grid.stats(bmu).var, rng);
      batch.clamped_values += clamp_into(s.x.span(), plan.clamp_lo, plan.clamp_hi);
    }
    batch.samples.push_back(std::move(s));
  }
  return batch;
}

}  // namespace somreplay
