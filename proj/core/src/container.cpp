#include "somreplay/container.hpp"

#include <sstream>

#include "somreplay/binary_io.hpp"

namespace somreplay {

namespace {

using Kind = DatasetFormatError::Kind;

void put_split(BinaryWriter& w, const Split& s) {
  w.put_u64(s.size());
  for (ClassId label : s.labels()) w.put_i32(label);
  w.put_f64s(s.features());
}

Split get_split(BinaryReader& r, std::size_t dim, ImageShape shape) {
  const std::uint64_t n = r.get_u64();
  if (dim > 0 && n > r.remaining() / (dim * 8 + 4))
    throw DatasetFormatError(Kind::truncated, "CLDS container: truncated split");
  std::vector<ClassId> labels(n);
  for (auto& l : labels) l = r.get_i32();
  Split s(dim, shape);
  s.reserve(n);
  std::vector<double> x(dim);
  for (std::uint64_t i = 0; i < n; ++i) {
    r.get_f64s(x);
    s.push_back(x, labels[i]);
  }
  return s;
}

}  // namespace

std::vector<std::uint8_t> encode_dataset(const Dataset& ds) {
  const std::size_t dim = ds.train.dim() != 0 ? ds.train.dim() : ds.test.dim();
  SOMREPLAY_EXPECTS(ds.train.empty() || ds.test.empty() || ds.train.dim() == ds.test.dim(),
                    "encode_dataset: split dimensions differ");
  BinaryWriter w;
  w.put_magic("CLDS");
  w.put_u32(kDatasetContainerVersion);
  w.put_string(ds.name);
  w.put_u32(static_cast<std::uint32_t>(ds.class_count));
  w.put_u32(ds.shape.channels);
  w.put_u32(ds.shape.height);
  w.put_u32(ds.shape.width);
  w.put_f64(ds.range.lo);
  w.put_f64(ds.range.hi);
  w.put_u64(dim);
  put_split(w, ds.train);
  put_split(w, ds.test);
  seal_with_checksum(w);
  return w.take();
}

Dataset decode_dataset(std::span<const std::uint8_t> bytes) {
  BinaryReader head(bytes, "CLDS container");
  try {
    head.expect_magic("CLDS");
  } catch (const FormatError& e) {
    throw DatasetFormatError(Kind::bad_magic, e.what());
  }
  const std::uint32_t version = head.get_u32();
  if (version != kDatasetContainerVersion) {
    std::ostringstream os;
    os << "CLDS container: version " << version << " not supported (expected "
       << kDatasetContainerVersion << ")";
    throw DatasetFormatError(Kind::version, os.str());
  }
  std::span<const std::uint8_t> body_bytes;
  try {
    body_bytes = verify_checksum(bytes, "CLDS container");
  } catch (const FormatError& e) {
    throw DatasetFormatError(Kind::checksum, e.what());
  }
  BinaryReader r(body_bytes, "CLDS container");
  r.expect_magic("CLDS");
  r.get_u32();
  Dataset ds;
  ds.name = r.get_string();
  ds.class_count = static_cast<int>(r.get_u32());
  ds.shape.channels = r.get_u32();
  ds.shape.height = r.get_u32();
  ds.shape.width = r.get_u32();
  ds.range.lo = r.get_f64();
  ds.range.hi = r.get_f64();
  const std::uint64_t dim = r.get_u64();
  ds.train = get_split(r, dim, ds.shape);
  ds.test = get_split(r, dim, ds.shape);
  if (r.remaining() != 0) throw DatasetFormatError(Kind::truncated, "CLDS container: trailing bytes");
  return ds;
}

void export_dataset(const Dataset& ds, const std::filesystem::path& path) {
  write_file(path, encode_dataset(ds));
}

Dataset import_dataset(const std::filesystem::path& path) { return decode_dataset(read_file(path)); }

Dataset batch_to_dataset(const ReplayBatch& batch, ImageShape shape, int class_count, ValueRange range) {
  Dataset ds;
  ds.name = batch.space == SampleSpace::pixel ? "replay-pixel" : "replay-latent";
  ds.class_count = class_count;
  ds.shape = shape;
  ds.range = range;
  const std::size_t dim = batch.samples.empty() ? shape.size() : batch.samples.front().x.dim();
  ds.train = Split(dim, shape);
  ds.test = Split(dim, shape);
  for (const ReplaySample& s : batch.samples) ds.train.push_back(s.x.span(), s.label);
  return ds;
}

}  // namespace somreplay
