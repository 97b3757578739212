#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace somreplay {

/// Appends little-endian scalars to a byte buffer.
class BinaryWriter {
 public:
  void put_magic(std::string_view magic);
  void put_u8(std::uint8_t v) { bytes_.push_back(v); }
  void put_u32(std::uint32_t v);
  void put_i32(std::int32_t v) { put_u32(static_cast<std::uint32_t>(v)); }
  void put_u64(std::uint64_t v);
  void put_f64(double v);
  void put_f64s(std::span<const double> values);
  void put_bytes(std::span<const std::uint8_t> data);
  void put_string(std::string_view s);

  const std::vector<std::uint8_t>& bytes() const { return bytes_; }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
};

/// Reads little-endian scalars; any read past the end throws FormatError.
class BinaryReader {
 public:
  explicit BinaryReader(std::span<const std::uint8_t> data, std::string context = "file")
      : data_(data), context_(std::move(context)) {}

  /// Throws FormatError unless the next bytes equal `magic`.
  void expect_magic(std::string_view magic);
  std::uint8_t get_u8();
  std::uint32_t get_u32();
  std::int32_t get_i32() { return static_cast<std::int32_t>(get_u32()); }
  std::uint64_t get_u64();
  double get_f64();
  void get_f64s(std::span<double> out);
  std::vector<std::uint8_t> get_bytes(std::size_t n);
  std::string get_string();

  std::size_t position() const { return pos_; }
  std::size_t remaining() const { return data_.size() - pos_; }
  const std::string& context() const { return context_; }

 private:
  void need(std::size_t n);

  std::span<const std::uint8_t> data_;
  std::string context_;
  std::size_t pos_ = 0;
};

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::span<const std::uint8_t> data);

/// Appends an FNV-1a checksum of everything written so far.
void seal_with_checksum(BinaryWriter& w);

/// Verifies and strips the trailing checksum; throws FormatError on mismatch.
std::span<const std::uint8_t> verify_checksum(std::span<const std::uint8_t> data,
                                              const std::string& context);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> data);
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace somreplay
