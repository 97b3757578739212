#include "fixtures.hpp"

#include <cmath>
#include <fstream>

namespace somreplay::testing {

Vector random_vector(Rng& rng, std::size_t dim, double lo, double hi) {
  Vector v(dim);
  for (double& x : v.span()) x = lo + (hi - lo) * rng.uniform();
  return v;
}

SymMatrix random_symmetric(Rng& rng, std::size_t dim, double scale) {
  SymMatrix m(dim);
  for (std::size_t i = 0; i < dim; ++i)
    for (std::size_t j = i; j < dim; ++j) m.set(i, j, scale * (2.0 * rng.uniform() - 1.0));
  return m;
}

SymMatrix random_spd(Rng& rng, std::size_t dim, double shift) {
  std::vector<double> a(dim * dim);
  for (double& x : a) x = 2.0 * rng.uniform() - 1.0;
  SymMatrix m(dim);
  for (std::size_t i = 0; i < dim; ++i) {
    for (std::size_t j = i; j < dim; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < dim; ++k) s += a[k * dim + i] * a[k * dim + j];
      m.set(i, j, s + (i == j ? shift : 0.0));
    }
  }
  return m;
}

std::vector<double> dense_reconstruct(const Matrix& q, std::span<const double> values) {
  const std::size_t n = q.rows();
  std::vector<double> out(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t k = 0; k < n; ++k) out[i * n + j] += q(i, k) * values[k] * q(j, k);
  return out;
}

namespace {

Split cluster_split(int classes, std::size_t dim, std::size_t per_class, double noise, Rng& rng,
                    const std::vector<Vector>& centers, ImageShape shape, ValueRange range) {
  Split s(dim, shape);
  // Interleave classes so class order in the split is not sorted.
  for (std::size_t n = 0; n < per_class; ++n) {
    for (int c = 0; c < classes; ++c) {
      Vector x = centers[static_cast<std::size_t>(c)];
      for (double& v : x.span()) v = std::clamp(v + noise * rng.normal(), range.lo, range.hi);
      s.push_back(x.span(), c);
    }
  }
  return s;
}

}  // namespace

Dataset cluster_dataset(int classes, std::size_t dim, std::size_t train_per_class, std::size_t test_per_class,
                        double noise, std::uint64_t seed) {
  Rng rng(seed, 7);
  std::vector<Vector> centers;
  for (int c = 0; c < classes; ++c) {
    Vector v(dim, 0.1);
    for (std::size_t k = 0; k < dim; ++k)
      if ((k * 7 + static_cast<std::size_t>(c) * 3) % static_cast<std::size_t>(classes + 1) == 0 ||
          k % static_cast<std::size_t>(classes) == static_cast<std::size_t>(c))
        v[k] = 0.9;
    centers.push_back(v);
  }
  Dataset ds;
  ds.name = "clusters";
  ds.class_count = classes;
  ds.shape = {1, 1, static_cast<std::uint32_t>(dim)};
  ds.range = kUnitRange;
  ds.train = cluster_split(classes, dim, train_per_class, noise, rng, centers, ds.shape, ds.range);
  ds.test = cluster_split(classes, dim, test_per_class, noise, rng, centers, ds.shape, ds.range);
  return ds;
}

Dataset image_dataset(int classes, ImageShape shape, std::size_t train_per_class, std::size_t test_per_class,
                      double noise, std::uint64_t seed) {
  Rng rng(seed, 11);
  const std::size_t dim = shape.size();
  std::vector<Vector> centers;
  for (int c = 0; c < classes; ++c) {
    Vector v(dim);
    for (std::size_t k = 0; k < dim; ++k) {
      const double phase = 0.7 * static_cast<double>(c + 1);
      v[k] = 0.8 * std::sin(phase * static_cast<double>(k % shape.width) + 1.3 * c) *
             std::cos(0.4 * static_cast<double>(k / shape.width) * (c + 1));
    }
    centers.push_back(v);
  }
  Dataset ds;
  ds.name = "images";
  ds.class_count = classes;
  ds.shape = shape;
  ds.range = kSymmetricRange;
  ds.train = cluster_split(classes, dim, train_per_class, noise, rng, centers, shape, ds.range);
  ds.test = cluster_split(classes, dim, test_per_class, noise, rng, centers, shape, ds.range);
  return ds;
}

namespace {

void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<std::uint8_t>(v >> s));
}

}  // namespace

std::vector<std::uint8_t> idx_images(std::uint32_t count, std::uint32_t rows, std::uint32_t cols,
                                     const std::vector<std::uint8_t>& pixels) {
  std::vector<std::uint8_t> out;
  put_be32(out, 0x00000803);
  put_be32(out, count);
  put_be32(out, rows);
  put_be32(out, cols);
  out.insert(out.end(), pixels.begin(), pixels.end());
  return out;
}

std::vector<std::uint8_t> idx_labels(const std::vector<std::uint8_t>& labels) {
  std::vector<std::uint8_t> out;
  put_be32(out, 0x00000801);
  put_be32(out, static_cast<std::uint32_t>(labels.size()));
  out.insert(out.end(), labels.begin(), labels.end());
  return out;
}

std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("somreplay_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream f(path, std::ios::binary);
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace somreplay::testing
