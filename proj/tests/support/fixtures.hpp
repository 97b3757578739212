#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "somreplay/dataset.hpp"
#include "somreplay/linalg.hpp"
#include "somreplay/rng.hpp"

namespace somreplay::testing {

Vector random_vector(Rng& rng, std::size_t dim, double lo = 0.0, double hi = 1.0);

/// Symmetric matrix with entries uniform in [-scale, scale].
SymMatrix random_symmetric(Rng& rng, std::size_t dim, double scale = 1.0);

/// A^T A + shift * I for a random A.
SymMatrix random_spd(Rng& rng, std::size_t dim, double shift = 0.0);

/// Dense loop product Q diag(values) Q^T, independent of the library kernels.
std::vector<double> dense_reconstruct(const Matrix& q, std::span<const double> values);

/// Separable toy data: class k is a tight cluster around a distinct corner
/// pattern in [0,1]^dim.
Dataset cluster_dataset(int classes, std::size_t dim, std::size_t train_per_class, std::size_t test_per_class,
                        double noise, std::uint64_t seed);

/// Images in [-1, 1] with `shape`, class k a smooth distinct pattern.
Dataset image_dataset(int classes, ImageShape shape, std::size_t train_per_class, std::size_t test_per_class,
                      double noise, std::uint64_t seed);

/// Big-endian IDX image/label files.
std::vector<std::uint8_t> idx_images(std::uint32_t count, std::uint32_t rows, std::uint32_t cols,
                                     const std::vector<std::uint8_t>& pixels);
std::vector<std::uint8_t> idx_labels(const std::vector<std::uint8_t>& labels);

/// Fresh empty directory below the system temp dir.
std::filesystem::path temp_dir(const std::string& name);

void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);

}  // namespace somreplay::testing
