#pragma once

#include <filesystem>
#include <vector>

#include "somreplay/dataset.hpp"
#include "somreplay/replay.hpp"

namespace somreplay {

inline constexpr std::uint32_t kDatasetContainerVersion = 1;

/// "CLDS" container:
///   "CLDS" | u32 version | name | u32 class_count | u32 c,h,w | f64 lo,hi
///   | u64 dim | 2 x (u64 n | n x i32 label | n*dim f64) | u64 FNV-1a
/// Strings are u32 length + bytes. Train split first, then test.
std::vector<std::uint8_t> encode_dataset(const Dataset& ds);
Dataset decode_dataset(std::span<const std::uint8_t> bytes);

void export_dataset(const Dataset& ds, const std::filesystem::path& path);
Dataset import_dataset(const std::filesystem::path& path);

/// Wraps a replay batch as a dataset (samples in the train split).
Dataset batch_to_dataset(const ReplayBatch& batch, ImageShape shape, int class_count, ValueRange range);

}  // namespace somreplay
