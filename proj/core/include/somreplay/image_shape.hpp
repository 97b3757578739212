#pragma once

#include <cstddef>
#include <cstdint>

namespace somreplay {

struct ImageShape {
  std::uint32_t channels = 0;
  std::uint32_t height = 0;
  std::uint32_t width = 0;

  std::size_t size() const { return static_cast<std::size_t>(channels) * height * width; }
  bool empty() const { return size() == 0; }
  bool operator==(const ImageShape&) const = default;
};

/// Which space a grid's weight vectors live in.
enum class SampleSpace : std::uint32_t { pixel = 0, latent = 1 };

}  // namespace somreplay
