#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <vector>

#include "somreplay/som.hpp"
#include "somreplay/vae.hpp"

namespace somreplay {

struct LocalVaeOptions {
  /// Template for every local model; the seed is mixed with the unit index.
  VaeConfig config;
  /// Units that received fewer images keep using the global decoder.
  std::size_t min_samples = 8;
};

enum class DecoderSource : std::uint8_t { local = 0, global = 1 };

struct LocalDecode {
  Vector x;
  DecoderSource source = DecoderSource::global;
};

/// Small VAEs keyed by grid coordinate.
class LocalVaeRegistry {
 public:
  LocalVaeRegistry() = default;
  explicit LocalVaeRegistry(LocalVaeOptions options);

  const LocalVaeOptions& options() const { return options_; }

  /// Trains the model of `coord` on the columns of `images`, continuing from
  /// its previous parameters when it already exists. With fewer than
  /// min_samples images nothing is trained, the unit is recorded as a
  /// fallback and false is returned.
  bool train_local(GridCoord coord, const Eigen::MatrixXd& images, Rng& rng);

  /// Decodes with the unit's local decoder, or with `global` when the unit has
  /// no local model.
  LocalDecode decode_local(GridCoord coord, std::span<const double> z, const VaeModel& global) const;

  /// Encodes `images` (posterior means) with the unit's local encoder and pulls
  /// the unit and its Gaussian neighbors toward each latent. Returns the number
  /// of latents applied; zero when the unit has no local model.
  std::size_t update_som_from_local(SomGrid& grid, GridCoord coord, const Eigen::MatrixXd& images,
                                    double eta, double sigma, double cutoff = 0.0) const;

  bool contains(GridCoord coord) const { return models_.contains(coord); }
  const VaeModel* find(GridCoord coord) const;
  std::size_t size() const { return models_.size(); }
  std::vector<GridCoord> coords() const;

  /// Units that were offered too few images and have no local model.
  const std::set<GridCoord>& fallbacks() const { return fallbacks_; }

  bool operator==(const LocalVaeRegistry& other) const;

 private:
  friend std::vector<std::uint8_t> encode_registry(const LocalVaeRegistry&);
  friend LocalVaeRegistry decode_registry(std::span<const std::uint8_t>);

  LocalVaeOptions options_;
  std::map<GridCoord, VaeModel> models_;
  std::set<GridCoord> fallbacks_;
};

inline constexpr std::uint32_t kRegistryVersion = 1;

/// "VAER" | u32 version | u64 min_samples | u32 n_models | per model: i32 i,
/// i32 j, u64 size, VAEC bytes | u32 n_fallbacks | (i32, i32) each | u64 FNV-1a.
/// The template config is taken from the first model when loading.
std::vector<std::uint8_t> encode_registry(const LocalVaeRegistry& registry);
LocalVaeRegistry decode_registry(std::span<const std::uint8_t> bytes);
void save_registry(const std::filesystem::path& path, const LocalVaeRegistry& registry);
LocalVaeRegistry load_registry(const std::filesystem::path& path);

}  // namespace somreplay
