#include "somreplay/checkpoint.hpp"

#include <sstream>

#include "somreplay/binary_io.hpp"
#include "somreplay/error.hpp"

namespace somreplay {

namespace {
constexpr std::uint32_t kFlagCov = 1u << 0;
constexpr std::uint32_t kFlagLatent = 1u << 1;
}  // namespace

std::vector<std::uint8_t> encode_som(const SomGrid& grid, const SomCheckpointMeta& meta) {
  BinaryWriter w;
  w.put_magic("SOMR");
  w.put_u32(kSomCheckpointVersion);
  w.put_u32(static_cast<std::uint32_t>(grid.side()));
  w.put_u64(grid.dim());
  std::uint32_t flags = 0;
  if (grid.track_cov()) flags |= kFlagCov;
  if (meta.space == SampleSpace::latent) flags |= kFlagLatent;
  w.put_u32(flags);
  w.put_u32(meta.image_shape.channels);
  w.put_u32(meta.image_shape.height);
  w.put_u32(meta.image_shape.width);
  w.put_f64s(grid.weights());
  for (const UnitStats& s : grid.all_stats()) {
    w.put_f64s(s.mean.span());
    w.put_f64s(s.var.span());
    if (grid.track_cov()) w.put_f64s(s.cov->data());
    w.put_u64(s.total_hits);
    w.put_u32(static_cast<std::uint32_t>(s.hits.size()));
    for (const auto& [label, count] : s.hits) {
      w.put_i32(label);
      w.put_u64(count);
    }
  }
  seal_with_checksum(w);
  return w.take();
}

SomGrid decode_som(std::span<const std::uint8_t> bytes, SomCheckpointMeta* meta) {
  BinaryReader r(bytes, "SOMR checkpoint");
  r.expect_magic("SOMR");
  const std::uint32_t version = r.get_u32();
  if (version != kSomCheckpointVersion) {
    std::ostringstream os;
    os << "SOMR checkpoint: unsupported version " << version;
    throw FormatError(os.str());
  }
  BinaryReader body(verify_checksum(bytes, "SOMR checkpoint"), "SOMR checkpoint");
  body.expect_magic("SOMR");
  body.get_u32();
  const std::uint32_t side = body.get_u32();
  const std::uint64_t dim = body.get_u64();
  const std::uint32_t flags = body.get_u32();
  if (side == 0 || dim == 0 || side > 4096 || dim > (1u << 24))
    throw FormatError("SOMR checkpoint: implausible grid header");
  SomCheckpointMeta m;
  m.space = (flags & kFlagLatent) ? SampleSpace::latent : SampleSpace::pixel;
  m.image_shape.channels = body.get_u32();
  m.image_shape.height = body.get_u32();
  m.image_shape.width = body.get_u32();

  SomGrid grid(static_cast<int>(side), dim, (flags & kFlagCov) != 0);
  body.get_f64s(grid.weights());
  for (std::size_t u = 0; u < grid.unit_count(); ++u) {
    UnitStats& s = grid.stats(grid.coord(u));
    body.get_f64s(s.mean.span());
    body.get_f64s(s.var.span());
    if (grid.track_cov()) {
      std::vector<double> dense(dim * dim);
      body.get_f64s(dense);
      s.cov = SymMatrix::from_dense(dim, dense, 0.0);
    }
    s.total_hits = body.get_u64();
    const std::uint32_t entries = body.get_u32();
    std::uint64_t sum = 0;
    for (std::uint32_t e = 0; e < entries; ++e) {
      const ClassId label = body.get_i32();
      const std::uint64_t count = body.get_u64();
      s.hits[label] = count;
      sum += count;
    }
    if (sum != s.total_hits) throw FormatError("SOMR checkpoint: hit table does not sum to total");
  }
  if (body.remaining() != 0) throw FormatError("SOMR checkpoint: trailing bytes");
  if (meta) *meta = m;
  return grid;
}

void save_som(const std::filesystem::path& path, const SomGrid& grid, const SomCheckpointMeta& meta) {
  write_file(path, encode_som(grid, meta));
}

SomGrid load_som(const std::filesystem::path& path, SomCheckpointMeta* meta) {
  return decode_som(read_file(path), meta);
}

}  // namespace somreplay
