#include "somreplay/image_sheet.hpp"

#include <cmath>
#include <sstream>

#include <spdlog/spdlog.h>
#include <zlib.h>

#include "somreplay/binary_io.hpp"

namespace somreplay {

ImageSheet::ImageSheet(int rows_, int cols_, ImageShape cell_, ValueRange range_)
    : rows(rows_), cols(cols_), cell(cell_), range(range_),
      cells(static_cast<std::size_t>(rows_) * cols_, std::vector<double>(cell_.size(), range_.lo)) {}

Raster rasterize(const ImageSheet& sheet, std::size_t* clamped) {
  SOMREPLAY_EXPECTS(sheet.rows > 0 && sheet.cols > 0, "image sheet: empty grid");
  SOMREPLAY_EXPECTS(sheet.cell.channels == 1 || sheet.cell.channels == 3,
                    "image sheet: cells must have 1 or 3 channels");
  SOMREPLAY_EXPECTS(sheet.cells.size() == static_cast<std::size_t>(sheet.rows) * sheet.cols,
                    "image sheet: cell count does not match rows*cols");
  const std::uint32_t ch = sheet.cell.channels;
  const std::uint32_t ch_h = sheet.cell.height;
  const std::uint32_t ch_w = sheet.cell.width;
  Raster out;
  out.width = ch_w * static_cast<std::uint32_t>(sheet.cols);
  out.height = ch_h * static_cast<std::uint32_t>(sheet.rows);
  out.channels = ch;
  out.pixels.assign(static_cast<std::size_t>(out.width) * out.height * ch, 0);
  std::size_t moved = 0;
  const double span = sheet.range.hi - sheet.range.lo;
  for (int r = 0; r < sheet.rows; ++r) {
    for (int c = 0; c < sheet.cols; ++c) {
      const std::vector<double>& img = sheet.at(r, c);
      SOMREPLAY_EXPECTS(img.size() == sheet.cell.size(), "image sheet: cell has wrong size");
      for (std::uint32_t y = 0; y < ch_h; ++y) {
        for (std::uint32_t x = 0; x < ch_w; ++x) {
          for (std::uint32_t k = 0; k < ch; ++k) {
            double v = img[(static_cast<std::size_t>(k) * ch_h + y) * ch_w + x];
            if (!(v >= sheet.range.lo && v <= sheet.range.hi)) {
              ++moved;
              v = std::isnan(v) ? sheet.range.lo : std::clamp(v, sheet.range.lo, sheet.range.hi);
            }
            const double q = std::round(255.0 * (v - sheet.range.lo) / span);
            const std::size_t px = (static_cast<std::size_t>(r) * ch_h + y) * out.width +
                                   static_cast<std::size_t>(c) * ch_w + x;
            out.pixels[px * ch + k] = static_cast<std::uint8_t>(q);
          }
        }
      }
    }
  }
  if (clamped) *clamped = moved;
  return out;
}

std::vector<std::uint8_t> encode_pnm(const Raster& raster) {
  std::ostringstream header;
  header << (raster.channels == 1 ? "P5" : "P6") << '\n'
         << raster.width << ' ' << raster.height << '\n'
         << 255 << '\n';
  const std::string h = header.str();
  std::vector<std::uint8_t> out(h.begin(), h.end());
  out.insert(out.end(), raster.pixels.begin(), raster.pixels.end());
  return out;
}

namespace {

void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int k = 3; k >= 0; --k) out.push_back(static_cast<std::uint8_t>(v >> (8 * k)));
}

void put_chunk(std::vector<std::uint8_t>& out, const char* type, std::span<const std::uint8_t> data) {
  put_be32(out, static_cast<std::uint32_t>(data.size()));
  const std::size_t start = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), data.begin(), data.end());
  const uLong crc = crc32(0L, out.data() + start, static_cast<uInt>(out.size() - start));
  put_be32(out, static_cast<std::uint32_t>(crc));
}

}  // namespace

std::vector<std::uint8_t> encode_png(const Raster& raster) {
  std::vector<std::uint8_t> out = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1A, '\n'};
  std::vector<std::uint8_t> ihdr;
  put_be32(ihdr, raster.width);
  put_be32(ihdr, raster.height);
  ihdr.push_back(8);                                    // bit depth
  ihdr.push_back(raster.channels == 1 ? 0 : 2);         // gray / truecolor
  ihdr.push_back(0);
  ihdr.push_back(0);
  ihdr.push_back(0);
  put_chunk(out, "IHDR", ihdr);

  const std::size_t stride = static_cast<std::size_t>(raster.width) * raster.channels;
  std::vector<std::uint8_t> scanlines;
  scanlines.reserve((stride + 1) * raster.height);
  for (std::uint32_t y = 0; y < raster.height; ++y) {
    scanlines.push_back(0);  // filter: none
    const auto* row = raster.pixels.data() + y * stride;
    scanlines.insert(scanlines.end(), row, row + stride);
  }
  uLongf packed_size = compressBound(static_cast<uLong>(scanlines.size()));
  std::vector<std::uint8_t> packed(packed_size);
  if (compress2(packed.data(), &packed_size, scanlines.data(), static_cast<uLong>(scanlines.size()),
                Z_BEST_COMPRESSION) != Z_OK)
    throw IoError("png: zlib compression failed");
  packed.resize(packed_size);
  put_chunk(out, "IDAT", packed);
  put_chunk(out, "IEND", {});
  return out;
}

void write_image_sheet(const ImageSheet& sheet, const std::filesystem::path& path, ImageFormat format) {
  std::size_t clamped = 0;
  const Raster raster = rasterize(sheet, &clamped);
  if (clamped > 0)
    spdlog::warn("image sheet {}: {} values outside [{}, {}] clamped", path.string(), clamped,
                 sheet.range.lo, sheet.range.hi);
  if (format == ImageFormat::pgm && raster.channels != 1)
    throw ContractError("image sheet: PGM needs single-channel cells");
  if (format == ImageFormat::ppm && raster.channels != 3)
    throw ContractError("image sheet: PPM needs three-channel cells");
  write_file(path, format == ImageFormat::png ? encode_png(raster) : encode_pnm(raster));
}

Raster decode_pnm(std::span<const std::uint8_t> bytes) {
  std::size_t pos = 0;
  auto token = [&]() {
    while (pos < bytes.size() && std::isspace(bytes[pos])) ++pos;
    std::string t;
    while (pos < bytes.size() && !std::isspace(bytes[pos])) t.push_back(static_cast<char>(bytes[pos++]));
    return t;
  };
  const std::string magic = token();
  if (magic != "P5" && magic != "P6") throw FormatError("pnm: bad magic '" + magic + "'");
  Raster r;
  r.channels = magic == "P5" ? 1 : 3;
  try {
    r.width = static_cast<std::uint32_t>(std::stoul(token()));
    r.height = static_cast<std::uint32_t>(std::stoul(token()));
    if (std::stoul(token()) != 255) throw FormatError("pnm: only maxval 255 is supported");
  } catch (const std::logic_error&) {
    throw FormatError("pnm: malformed header");
  }
  ++pos;  // single whitespace after maxval
  const std::size_t need = static_cast<std::size_t>(r.width) * r.height * r.channels;
  if (bytes.size() < pos + need) throw FormatError("pnm: truncated raster");
  r.pixels.assign(bytes.begin() + pos, bytes.begin() + pos + need);
  return r;
}

Raster read_pnm(const std::filesystem::path& path) { return decode_pnm(read_file(path)); }

ImageFormat image_format_for(const std::filesystem::path& path) {
  const std::string ext = path.extension().string();
  if (ext == ".pgm") return ImageFormat::pgm;
  if (ext == ".ppm") return ImageFormat::ppm;
  if (ext == ".png") return ImageFormat::png;
  throw ConfigError("unsupported image extension '" + ext + "' (use .pgm, .ppm or .png)");
}

}  // namespace somreplay
