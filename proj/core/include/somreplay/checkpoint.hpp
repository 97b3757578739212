#pragma once

#include <filesystem>
#include <vector>

#include "somreplay/image_shape.hpp"
#include "somreplay/som.hpp"

namespace somreplay {

/// Extra header fields stored next to a grid.
struct SomCheckpointMeta {
  SampleSpace space = SampleSpace::pixel;
  /// Shape of the images the grid describes (pixel space) or decodes to (latent).
  ImageShape image_shape;
  bool operator==(const SomCheckpointMeta&) const = default;
};

inline constexpr std::uint32_t kSomCheckpointVersion = 1;

/// Flat little-endian container:
///   "SOMR" | u32 version | u32 side | u64 dim | u32 flags | u32 c,h,w
///   | weights (side*side*dim f64)
///   | per unit: mean, var, [cov dim*dim] f64, u64 total_hits, u32 n,
///     n x (i32 class, u64 count)
///   | u64 FNV-1a of all preceding bytes
/// flags: bit0 covariance tracked, bit1 latent space.
std::vector<std::uint8_t> encode_som(const SomGrid& grid, const SomCheckpointMeta& meta);
SomGrid decode_som(std::span<const std::uint8_t> bytes, SomCheckpointMeta* meta = nullptr);

void save_som(const std::filesystem::path& path, const SomGrid& grid, const SomCheckpointMeta& meta);
SomGrid load_som(const std::filesystem::path& path, SomCheckpointMeta* meta = nullptr);

}  // namespace somreplay
