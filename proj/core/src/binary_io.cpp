#include "somreplay/binary_io.hpp"

#include <bit>
#include <fstream>
#include <sstream>

#include "somreplay/error.hpp"

namespace somreplay {

void BinaryWriter::put_magic(std::string_view magic) {
  bytes_.insert(bytes_.end(), magic.begin(), magic.end());
}

void BinaryWriter::put_u32(std::uint32_t v) {
  for (int k = 0; k < 4; ++k) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * k)));
}

void BinaryWriter::put_u64(std::uint64_t v) {
  for (int k = 0; k < 8; ++k) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * k)));
}

void BinaryWriter::put_f64(double v) { put_u64(std::bit_cast<std::uint64_t>(v)); }

void BinaryWriter::put_f64s(std::span<const double> values) {
  bytes_.reserve(bytes_.size() + values.size() * 8);
  for (double v : values) put_f64(v);
}

void BinaryWriter::put_bytes(std::span<const std::uint8_t> data) {
  bytes_.insert(bytes_.end(), data.begin(), data.end());
}

void BinaryWriter::put_string(std::string_view s) {
  put_u32(static_cast<std::uint32_t>(s.size()));
  bytes_.insert(bytes_.end(), s.begin(), s.end());
}

void BinaryReader::need(std::size_t n) {
  if (data_.size() - pos_ < n) {
    std::ostringstream os;
    os << context_ << ": truncated (need " << n << " bytes at offset " << pos_ << ", have "
       << data_.size() - pos_ << ")";
    throw FormatError(os.str());
  }
}

void BinaryReader::expect_magic(std::string_view magic) {
  need(magic.size());
  for (std::size_t k = 0; k < magic.size(); ++k) {
    if (data_[pos_ + k] != static_cast<std::uint8_t>(magic[k]))
      throw FormatError(context_ + ": bad magic (expected \"" + std::string(magic) + "\")");
  }
  pos_ += magic.size();
}

std::uint8_t BinaryReader::get_u8() {
  need(1);
  return data_[pos_++];
}

std::uint32_t BinaryReader::get_u32() {
  need(4);
  std::uint32_t v = 0;
  for (int k = 0; k < 4; ++k) v |= static_cast<std::uint32_t>(data_[pos_ + k]) << (8 * k);
  pos_ += 4;
  return v;
}

std::uint64_t BinaryReader::get_u64() {
  need(8);
  std::uint64_t v = 0;
  for (int k = 0; k < 8; ++k) v |= static_cast<std::uint64_t>(data_[pos_ + k]) << (8 * k);
  pos_ += 8;
  return v;
}

double BinaryReader::get_f64() { return std::bit_cast<double>(get_u64()); }

void BinaryReader::get_f64s(std::span<double> out) {
  need(out.size() * 8);
  for (double& v : out) v = get_f64();
}

std::vector<std::uint8_t> BinaryReader::get_bytes(std::size_t n) {
  need(n);
  std::vector<std::uint8_t> out(data_.begin() + pos_, data_.begin() + pos_ + n);
  pos_ += n;
  return out;
}

std::string BinaryReader::get_string() {
  const std::uint32_t n = get_u32();
  need(n);
  std::string s(reinterpret_cast<const char*>(data_.data() + pos_), n);
  pos_ += n;
  return s;
}

std::uint64_t fnv1a64(std::span<const std::uint8_t> data) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (std::uint8_t b : data) {
    h ^= b;
    h *= 0x100000001B3ULL;
  }
  return h;
}

void seal_with_checksum(BinaryWriter& w) { w.put_u64(fnv1a64(w.bytes())); }

std::span<const std::uint8_t> verify_checksum(std::span<const std::uint8_t> data,
                                              const std::string& context) {
  if (data.size() < 8) throw FormatError(context + ": truncated (no checksum)");
  const auto body = data.first(data.size() - 8);
  BinaryReader tail(data.last(8), context);
  if (tail.get_u64() != fnv1a64(body)) throw FormatError(context + ": checksum mismatch (corrupt file)");
  return body;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  in.seekg(0, std::ios::end);
  const std::streamoff size = in.tellg();
  in.seekg(0, std::ios::beg);
  std::vector<std::uint8_t> bytes(static_cast<std::size_t>(size));
  if (size > 0 && !in.read(reinterpret_cast<char*>(bytes.data()), size))
    throw IoError("short read from " + path.string());
  return bytes;
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
  if (!out) throw IoError("short write to " + path.string());
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  write_file(path, {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

}  // namespace somreplay
