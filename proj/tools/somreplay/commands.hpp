#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "somreplay/checkpoint.hpp"
#include "somreplay/dataset.hpp"
#include "somreplay/image_sheet.hpp"
#include "somreplay/vae.hpp"

namespace somreplay::cli {

enum ExitCode : int { exit_ok = 0, exit_runtime = 1, exit_usage = 2 };

/// Parses argv and runs one subcommand. Results go to `out`; logs and the
/// one-line JSON error record go to `err`. Returns the process exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Dataset root: explicit flag, then $SOMREPLAY_DATA, then "./data".
std::filesystem::path resolve_data_root(const std::string& flag);

/// Named dataset below `root`, or a CLDS container when `source` ends in .clds.
/// Missing files raise ConfigError naming the path.
Dataset load_dataset_source(const std::string& source, const std::filesystem::path& root);

/// Pixel range a checkpoint's images live in when no dataset is at hand:
/// [-1, 1] for RGB and decoded images, [0, 1] otherwise.
ValueRange default_range(const SomCheckpointMeta& meta);

/// side x side sheet of unit weights (or running means), decoded through
/// `vae` for latent-space grids.
ImageSheet grid_sheet(const SomGrid& grid, const SomCheckpointMeta& meta, ValueRange range,
                      const VaeModel* vae, bool means = false);

}  // namespace somreplay::cli
