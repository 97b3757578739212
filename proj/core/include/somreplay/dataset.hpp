#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "somreplay/error.hpp"
#include "somreplay/image_shape.hpp"
#include "somreplay/som.hpp"

namespace somreplay {

/// Declared value range of a pipeline.
struct ValueRange {
  double lo = 0.0;
  double hi = 1.0;
  bool operator==(const ValueRange&) const = default;
};

inline constexpr ValueRange kUnitRange{0.0, 1.0};
inline constexpr ValueRange kSymmetricRange{-1.0, 1.0};

/// Labeled samples stored contiguously, one row per sample.
class Split {
 public:
  Split() = default;
  Split(std::size_t dim, ImageShape shape) : dim_(dim), shape_(shape) {}

  std::size_t size() const { return labels_.size(); }
  bool empty() const { return labels_.empty(); }
  std::size_t dim() const { return dim_; }
  const ImageShape& shape() const { return shape_; }

  std::span<const double> row(std::size_t i) const { return {features_.data() + i * dim_, dim_}; }
  std::span<double> row(std::size_t i) { return {features_.data() + i * dim_, dim_}; }
  ClassId label(std::size_t i) const { return labels_[i]; }
  std::span<const ClassId> labels() const { return labels_; }
  std::span<const double> features() const { return features_; }

  void reserve(std::size_t n);
  void push_back(std::span<const double> x, ClassId label);

  /// Views of every row (for APIs taking a list of samples).
  std::vector<std::span<const double>> rows() const;

  bool operator==(const Split&) const = default;

 private:
  std::size_t dim_ = 0;
  ImageShape shape_;
  std::vector<double> features_;
  std::vector<ClassId> labels_;
};

struct Dataset {
  std::string name;
  Split train;
  Split test;
  int class_count = 0;
  ImageShape shape;
  ValueRange range;
  bool operator==(const Dataset&) const = default;
};

/// Distinct failure kinds of the dataset readers.
class DatasetFormatError : public FormatError {
 public:
  enum class Kind { bad_magic, truncated, count_mismatch, record_size, version, checksum };
  DatasetFormatError(Kind kind, const std::string& what) : FormatError(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

/// IDX image/label pair (big-endian magics 0x803 / 0x801). Pixels are scaled
/// to [0, 1].
Split load_idx(const std::filesystem::path& images, const std::filesystem::path& labels);

enum class CifarVariant { cifar10, cifar100 };

/// CIFAR binary batches. cifar10 records are 1 label byte + 3072 planar RGB
/// bytes; cifar100 records carry a coarse and a fine label byte, the fine one
/// is used. Pixels are mapped into `range`.
Split load_cifar(std::span<const std::filesystem::path> batches, CifarVariant variant,
                 ValueRange range = kSymmetricRange);

/// Rows whose label is in `classes`, order preserved.
Split class_filter(const Split& split, std::span<const ClassId> classes);

/// First `per_class` rows of each listed class, order preserved.
Split take_per_class(const Split& split, std::span<const ClassId> classes, std::size_t per_class);

/// Throws ContractError if any feature lies outside `range`.
void assert_range(const Split& split, ValueRange range, const std::string& context);

/// Known dataset names: mnist, fashion-mnist, cifar10, cifar100.
bool is_known_dataset(const std::string& name);
bool is_rgb_dataset(const std::string& name);

/// Files a named dataset needs below `root`.
std::vector<std::filesystem::path> dataset_files(const std::string& name,
                                                 const std::filesystem::path& root);

/// Loads a named dataset. Throws IoError naming the first missing file.
Dataset load_named_dataset(const std::string& name, const std::filesystem::path& root);

}  // namespace somreplay
