#include "somreplay/local_vae.hpp"

#include <sstream>

#include "somreplay/binary_io.hpp"
#include "somreplay/error.hpp"

namespace somreplay {

LocalVaeRegistry::LocalVaeRegistry(LocalVaeOptions options) : options_(std::move(options)) {
  options_.config.validate();
  SOMREPLAY_EXPECTS(options_.min_samples > 0, "local vae: min_samples must be positive");
}

bool LocalVaeRegistry::train_local(GridCoord coord, const Eigen::MatrixXd& images, Rng& rng) {
  if (static_cast<std::size_t>(images.cols()) < options_.min_samples) {
    if (!models_.contains(coord)) fallbacks_.insert(coord);
    return false;
  }
  auto it = models_.find(coord);
  if (it == models_.end()) {
    VaeConfig cfg = options_.config;
    cfg.seed = mix64(cfg.seed ^ (static_cast<std::uint64_t>(coord.i) << 32 | static_cast<std::uint32_t>(coord.j)));
    it = models_.emplace(coord, VaeModel(cfg)).first;
  }
  fallbacks_.erase(coord);
  train(it->second, images, rng);
  return true;
}

LocalDecode LocalVaeRegistry::decode_local(GridCoord coord, std::span<const double> z,
                                           const VaeModel& global) const {
  const auto it = models_.find(coord);
  if (it == models_.end()) return {global.decode(z), DecoderSource::global};
  return {it->second.decode(z), DecoderSource::local};
}

std::size_t LocalVaeRegistry::update_som_from_local(SomGrid& grid, GridCoord coord, const Eigen::MatrixXd& images,
                                                    double eta, double sigma, double cutoff) const {
  const auto it = models_.find(coord);
  if (it == models_.end() || images.cols() == 0) return 0;
  SOMREPLAY_EXPECTS(grid.dim() == it->second.config().latent_dim,
                    "local vae: latent size does not match the grid dimension");
  Eigen::MatrixXd mu, logvar;
  it->second.encode(images, mu, logvar);
  for (Eigen::Index c = 0; c < mu.cols(); ++c)
    update_weights(grid, coord, {mu.col(c).data(), static_cast<std::size_t>(mu.rows())}, eta, sigma, cutoff);
  return static_cast<std::size_t>(mu.cols());
}

const VaeModel* LocalVaeRegistry::find(GridCoord coord) const {
  const auto it = models_.find(coord);
  return it == models_.end() ? nullptr : &it->second;
}

std::vector<GridCoord> LocalVaeRegistry::coords() const {
  std::vector<GridCoord> out;
  out.reserve(models_.size());
  for (const auto& [c, m] : models_) out.push_back(c);
  return out;
}

bool LocalVaeRegistry::operator==(const LocalVaeRegistry& other) const {
  return options_.min_samples == other.options_.min_samples && models_ == other.models_ &&
         fallbacks_ == other.fallbacks_;
}

std::vector<std::uint8_t> encode_registry(const LocalVaeRegistry& registry) {
  BinaryWriter w;
  w.put_magic("VAER");
  w.put_u32(kRegistryVersion);
  w.put_u64(registry.options_.min_samples);
  w.put_u32(static_cast<std::uint32_t>(registry.models_.size()));
  for (const auto& [c, model] : registry.models_) {
    w.put_i32(c.i);
    w.put_i32(c.j);
    const std::vector<std::uint8_t> blob = encode_vae(model);
    w.put_u64(blob.size());
    w.put_bytes(blob);
  }
  w.put_u32(static_cast<std::uint32_t>(registry.fallbacks_.size()));
  for (const GridCoord& c : registry.fallbacks_) {
    w.put_i32(c.i);
    w.put_i32(c.j);
  }
  seal_with_checksum(w);
  return w.take();
}

LocalVaeRegistry decode_registry(std::span<const std::uint8_t> bytes) {
  const std::string ctx = "vae registry";
  BinaryReader r(verify_checksum(bytes, ctx), ctx);
  r.expect_magic("VAER");
  const std::uint32_t version = r.get_u32();
  if (version != kRegistryVersion) {
    std::ostringstream os;
    os << ctx << ": unsupported version " << version << " (expected " << kRegistryVersion << ")";
    throw FormatError(os.str());
  }
  LocalVaeRegistry reg;
  reg.options_.min_samples = r.get_u64();
  const std::uint32_t n = r.get_u32();
  for (std::uint32_t k = 0; k < n; ++k) {
    GridCoord c;
    c.i = r.get_i32();
    c.j = r.get_i32();
    const std::uint64_t size = r.get_u64();
    if (size > r.remaining()) throw FormatError(ctx + ": truncated model entry");
    const std::vector<std::uint8_t> blob = r.get_bytes(size);
    VaeModel model = decode_vae(blob);
    if (k == 0) {
      reg.options_.config = model.config();
    }
    reg.models_.emplace(c, std::move(model));
  }
  const std::uint32_t f = r.get_u32();
  for (std::uint32_t k = 0; k < f; ++k) {
    GridCoord c;
    c.i = r.get_i32();
    c.j = r.get_i32();
    reg.fallbacks_.insert(c);
  }
  if (r.remaining() != 0) throw FormatError(ctx + ": trailing bytes");
  return reg;
}

void save_registry(const std::filesystem::path& path, const LocalVaeRegistry& registry) {
  write_file(path, encode_registry(registry));
}

LocalVaeRegistry load_registry(const std::filesystem::path& path) { return decode_registry(read_file(path)); }

}  // namespace somreplay
