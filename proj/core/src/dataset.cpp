#include "somreplay/dataset.hpp"

#include <algorithm>
#include <map>
#include <sstream>

#include "somreplay/binary_io.hpp"

namespace somreplay {

void Split::reserve(std::size_t n) {
  features_.reserve(n * dim_);
  labels_.reserve(n);
}

void Split::push_back(std::span<const double> x, ClassId label) {
  SOMREPLAY_EXPECTS(x.size() == dim_, "Split::push_back: dimension mismatch");
  features_.insert(features_.end(), x.begin(), x.end());
  labels_.push_back(label);
}

std::vector<std::span<const double>> Split::rows() const {
  std::vector<std::span<const double>> out;
  out.reserve(size());
  for (std::size_t i = 0; i < size(); ++i) out.push_back(row(i));
  return out;
}

namespace {

using Kind = DatasetFormatError::Kind;

std::uint32_t read_be32(std::span<const std::uint8_t> b, std::size_t off) {
  return (static_cast<std::uint32_t>(b[off]) << 24) | (static_cast<std::uint32_t>(b[off + 1]) << 16) |
         (static_cast<std::uint32_t>(b[off + 2]) << 8) | static_cast<std::uint32_t>(b[off + 3]);
}

void require_size(std::span<const std::uint8_t> b, std::size_t need, const std::string& what) {
  if (b.size() < need) {
    std::ostringstream os;
    os << what << ": truncated (" << b.size() << " bytes, need " << need << ")";
    throw DatasetFormatError(Kind::truncated, os.str());
  }
}

}  // namespace

Split load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path) {
  const std::vector<std::uint8_t> img = read_file(images_path);
  const std::vector<std::uint8_t> lab = read_file(labels_path);
  const std::string img_name = images_path.string();
  const std::string lab_name = labels_path.string();

  require_size(img, 16, img_name);
  if (read_be32(img, 0) != 0x00000803)
    throw DatasetFormatError(Kind::bad_magic, img_name + ": bad magic (expected 0x00000803)");
  require_size(lab, 8, lab_name);
  if (read_be32(lab, 0) != 0x00000801)
    throw DatasetFormatError(Kind::bad_magic, lab_name + ": bad magic (expected 0x00000801)");

  const std::size_t count = read_be32(img, 4);
  const std::uint32_t rows = read_be32(img, 8);
  const std::uint32_t cols = read_be32(img, 12);
  const std::size_t label_count = read_be32(lab, 4);
  const std::size_t dim = static_cast<std::size_t>(rows) * cols;
  require_size(img, 16 + count * dim, img_name);
  require_size(lab, 8 + label_count, lab_name);
  if (count != label_count) {
    std::ostringstream os;
    os << "IDX count mismatch: " << count << " images vs " << label_count << " labels";
    throw DatasetFormatError(Kind::count_mismatch, os.str());
  }

  Split split(dim, ImageShape{1, rows, cols});
  split.reserve(count);
  std::vector<double> x(dim);
  for (std::size_t n = 0; n < count; ++n) {
    const std::uint8_t* p = img.data() + 16 + n * dim;
    for (std::size_t k = 0; k < dim; ++k) x[k] = p[k] / 255.0;
    split.push_back(x, static_cast<ClassId>(lab[8 + n]));
  }
  return split;
}

Split load_cifar(std::span<const std::filesystem::path> batches, CifarVariant variant, ValueRange range) {
  constexpr std::size_t kPixels = 3 * 32 * 32;
  const std::size_t label_bytes = variant == CifarVariant::cifar10 ? 1 : 2;
  const std::size_t record = label_bytes + kPixels;
  Split split(kPixels, ImageShape{3, 32, 32});
  std::vector<double> x(kPixels);
  const double scale = (range.hi - range.lo) / 255.0;
  for (const auto& path : batches) {
    const std::vector<std::uint8_t> bytes = read_file(path);
    if (bytes.size() % record != 0) {
      std::ostringstream os;
      os << path.string() << ": length " << bytes.size() << " is not a multiple of the record size "
         << record;
      throw DatasetFormatError(Kind::record_size, os.str());
    }
    const std::size_t n = bytes.size() / record;
    split.reserve(split.size() + n);
    for (std::size_t r = 0; r < n; ++r) {
      const std::uint8_t* p = bytes.data() + r * record;
      const ClassId label = p[label_bytes - 1];
      for (std::size_t k = 0; k < kPixels; ++k) x[k] = range.lo + p[label_bytes + k] * scale;
      split.push_back(x, label);
    }
  }
  return split;
}

Split class_filter(const Split& split, std::span<const ClassId> classes) {
  Split out(split.dim(), split.shape());
  for (std::size_t i = 0; i < split.size(); ++i)
    if (std::find(classes.begin(), classes.end(), split.label(i)) != classes.end())
      out.push_back(split.row(i), split.label(i));
  return out;
}

Split take_per_class(const Split& split, std::span<const ClassId> classes, std::size_t per_class) {
  Split out(split.dim(), split.shape());
  std::map<ClassId, std::size_t> taken;
  for (std::size_t i = 0; i < split.size(); ++i) {
    const ClassId label = split.label(i);
    if (std::find(classes.begin(), classes.end(), label) == classes.end()) continue;
    if (taken[label] >= per_class) continue;
    ++taken[label];
    out.push_back(split.row(i), label);
  }
  return out;
}

void assert_range(const Split& split, ValueRange range, const std::string& context) {
  for (std::size_t i = 0; i < split.features().size(); ++i) {
    const double v = split.features()[i];
    if (!(v >= range.lo && v <= range.hi)) {
      std::ostringstream os;
      os << context << ": value " << v << " of sample " << i / split.dim() << " outside ["
         << range.lo << ", " << range.hi << "]";
      throw ContractError(os.str());
    }
  }
}

bool is_known_dataset(const std::string& name) {
  return name == "mnist" || name == "fashion-mnist" || name == "cifar10" || name == "cifar100";
}

bool is_rgb_dataset(const std::string& name) { return name == "cifar10" || name == "cifar100"; }

std::vector<std::filesystem::path> dataset_files(const std::string& name,
                                                 const std::filesystem::path& root) {
  const auto dir = root / name;
  if (name == "mnist" || name == "fashion-mnist") {
    return {dir / "train-images-idx3-ubyte", dir / "train-labels-idx1-ubyte",
            dir / "t10k-images-idx3-ubyte", dir / "t10k-labels-idx1-ubyte"};
  }
  if (name == "cifar10") {
    std::vector<std::filesystem::path> files;
    for (int b = 1; b <= 5; ++b) files.push_back(dir / ("data_batch_" + std::to_string(b) + ".bin"));
    files.push_back(dir / "test_batch.bin");
    return files;
  }
  if (name == "cifar100") return {dir / "train.bin", dir / "test.bin"};
  throw ConfigError("unknown dataset '" + name + "'");
}

Dataset load_named_dataset(const std::string& name, const std::filesystem::path& root) {
  const auto files = dataset_files(name, root);
  for (const auto& f : files)
    if (!std::filesystem::exists(f)) throw IoError("dataset file not found: " + f.string());
  Dataset ds;
  ds.name = name;
  if (name == "mnist" || name == "fashion-mnist") {
    ds.train = load_idx(files[0], files[1]);
    ds.test = load_idx(files[2], files[3]);
    ds.class_count = 10;
    ds.range = kUnitRange;
  } else {
    const auto variant = name == "cifar10" ? CifarVariant::cifar10 : CifarVariant::cifar100;
    const std::span<const std::filesystem::path> all(files);
    ds.train = load_cifar(all.first(files.size() - 1), variant, kSymmetricRange);
    ds.test = load_cifar(all.last(1), variant, kSymmetricRange);
    ds.class_count = variant == CifarVariant::cifar10 ? 10 : 100;
    ds.range = kSymmetricRange;
  }
  ds.shape = ds.train.shape();
  return ds;
}

}  // namespace somreplay
