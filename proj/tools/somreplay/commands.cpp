#include "commands.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <map>
#include <ostream>

#include <fmt/format.h>
#include <fmt/ranges.h>
#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "json.hpp"

#include "cli_config.hpp"
#include "somreplay/binary_io.hpp"
#include "somreplay/container.hpp"
#include "somreplay/error.hpp"
#include "somreplay/harness.hpp"
#include "somreplay/local_vae.hpp"
#include "somreplay/replay.hpp"

namespace somreplay::cli {

namespace fs = std::filesystem;

std::filesystem::path resolve_data_root(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("SOMREPLAY_DATA"); env && *env) return env;
  return "data";
}

Dataset load_dataset_source(const std::string& source, const fs::path& root) {
  if (fs::path(source).extension() == ".clds") {
    if (!fs::exists(source)) throw ConfigError("dataset file not found: " + source);
    return import_dataset(source);
  }
  if (!is_known_dataset(source))
    throw ConfigError("unknown dataset '" + source + "' (expected mnist, fashion-mnist, cifar10, cifar100 or a .clds file)");
  for (const fs::path& f : dataset_files(source, root))
    if (!fs::exists(f)) throw ConfigError("dataset file not found: " + f.string());
  return load_named_dataset(source, root);
}

ValueRange default_range(const SomCheckpointMeta& meta) {
  if (meta.space == SampleSpace::latent || meta.image_shape.channels == 3) return kSymmetricRange;
  return kUnitRange;
}

ImageSheet grid_sheet(const SomGrid& grid, const SomCheckpointMeta& meta, ValueRange range, const VaeModel* vae,
                      bool means) {
  const bool latent = meta.space == SampleSpace::latent;
  if (latent && !vae) throw ConfigError("latent-space grid needs a VAE checkpoint to render images");
  ImageSheet sheet(grid.side(), grid.side(), meta.image_shape, range);
  for (int i = 0; i < grid.side(); ++i) {
    for (int j = 0; j < grid.side(); ++j) {
      const GridCoord c{i, j};
      const std::span<const double> v = means ? grid.stats(c).mean.span() : grid.weight(c);
      if (latent) {
        const Vector img = vae->decode(v);
        sheet.at(i, j).assign(img.span().begin(), img.span().end());
      } else {
        sheet.at(i, j).assign(v.begin(), v.end());
      }
    }
  }
  return sheet;
}

namespace {

// Usage-level failures detected after argument parsing.
class UsageError : public Error {
 public:
  using Error::Error;
};

void log_seed(std::uint64_t seed, bool given) {
  spdlog::info("seed {}{}", seed, given ? "" : " (default)");
}

void check_shape(const SomGrid& grid, const SomCheckpointMeta& meta, const Dataset& ds, const VaeModel* vae) {
  if (meta.image_shape != ds.shape)
    throw ConfigError(fmt::format("checkpoint images are {}x{}x{} but dataset '{}' is {}x{}x{}",
                                  meta.image_shape.channels, meta.image_shape.height, meta.image_shape.width,
                                  ds.name, ds.shape.channels, ds.shape.height, ds.shape.width));
  if (meta.space == SampleSpace::pixel && grid.dim() != ds.train.dim())
    throw ConfigError(fmt::format("checkpoint dimension {} does not match dataset dimension {}", grid.dim(),
                                  ds.train.dim()));
  if (vae) {
    if (vae->config().input_shape != ds.shape) throw ConfigError("VAE input shape does not match the dataset");
    if (vae->config().latent_dim != grid.dim())
      throw ConfigError(fmt::format("VAE latent size {} does not match grid dimension {}", vae->config().latent_dim,
                                    grid.dim()));
  }
}

// VAE beside a latent checkpoint unless given explicitly.
std::optional<VaeModel> load_vae_for(const SomCheckpointMeta& meta, const fs::path& checkpoint,
                                     const std::string& flag) {
  if (meta.space != SampleSpace::latent) return std::nullopt;
  const fs::path path = flag.empty() ? checkpoint.parent_path() / "final.vaec" : fs::path(flag);
  if (!fs::exists(path)) throw ConfigError("latent-space checkpoint needs a VAE checkpoint: " + path.string() + " not found");
  return load_vae(path);
}

SomGrid load_checkpoint(const std::string& path, SomCheckpointMeta& meta) {
  if (!fs::exists(path)) throw ConfigError("checkpoint not found: " + path);
  return load_som(path, &meta);
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  std::string config;
  std::vector<std::string> sets;
  std::string dataset;
  std::string mode;
  std::string order;
  int grid = 0;
  int epochs = 0;
  std::optional<std::uint64_t> seed;
  std::string classes;
  std::optional<std::size_t> train_per_class;
  std::optional<std::size_t> test_per_class;
  std::optional<int> repeats;
  std::optional<int> threads;
  bool force = false;
  std::string out;
  std::string data_root;
  std::string sheet_format = "png";
};

int cmd_train(const TrainArgs& a, std::ostream& out) {
  TrainSettings s;
  KeyValues kv;
  if (!a.config.empty()) kv.merge(parse_config_file(a.config));
  for (const std::string& set : a.sets) parse_assignment(set, kv);
  KeyValues flags;
  if (!a.dataset.empty()) flags.set("run.dataset", a.dataset);
  if (!a.mode.empty()) flags.set("run.mode", a.mode);
  if (!a.order.empty()) flags.set("run.order", a.order);
  if (a.grid > 0) flags.set("som.grid", std::to_string(a.grid));
  if (a.epochs > 0) flags.set("som.epochs", std::to_string(a.epochs));
  if (a.seed) flags.set("run.seed", std::to_string(*a.seed));
  if (!a.classes.empty()) flags.set("run.classes", a.classes);
  if (a.train_per_class) flags.set("run.train_per_class", std::to_string(*a.train_per_class));
  if (a.test_per_class) flags.set("run.test_per_class", std::to_string(*a.test_per_class));
  if (a.repeats) flags.set("run.repeats", std::to_string(*a.repeats));
  if (a.threads) flags.set("run.threads", std::to_string(*a.threads));
  if (a.force) flags.set("run.force", "true");
  kv.merge(flags);
  apply(kv, s);
  if (s.repeats < 1) throw ConfigError("run.repeats must be at least 1");
  if (s.threads < 1) throw ConfigError("run.threads must be at least 1");
  log_seed(s.run.seed, kv.contains("run.seed"));

  const fs::path root = resolve_data_root(a.data_root);
  const Dataset raw = load_dataset_source(s.dataset, root);
  s.run.validate(raw);
  const std::string resolved = render(s);
  spdlog::info("resolved configuration:\n{}", resolved);

  const fs::path dir = a.out;
  fs::create_directories(dir / "snapshots");
  write_text_file(dir / "resolved.cfg", resolved);
  const ImageFormat format = image_format_for("x." + a.sheet_format);

  RunHooks hooks;
  hooks.on_task_end = [&](const TaskEnd& e) {
    const SomCheckpointMeta meta{e.vae ? SampleSpace::latent : SampleSpace::pixel, raw.shape};
    ImageSheet sheet = grid_sheet(e.grid, meta, raw.range, e.vae);
    sheet.caption = fmt::format("task {}", e.task.id);
    write_image_sheet(sheet, dir / "snapshots" / fmt::format("task_{:02}.{}", e.task.id, a.sheet_format), format);
  };
  const RunResult result = run(raw, s.run, hooks);

  save_som(dir / "final.somr", result.grid, result.meta);
  if (result.vae) save_vae(dir / "final.vaec", *result.vae);
  if (result.registry) save_registry(dir / "registry.vaer", *result.registry);
  for (std::size_t t = 0; t < result.vae_history.size(); ++t)
    write_loss_csv(result.vae_history[t], dir / fmt::format("vae_loss_task_{:02}.csv", t));
  write_phase_csv(result.reports, dir / "report.csv");

  std::optional<RepeatSummary> repeats;
  if (s.repeats > 1) {
    RunConfig rest = s.run;
    rest.seed = s.run.seed + 1;
    RepeatSummary others = repeat_runs(raw, rest, s.repeats - 1, s.threads);
    std::vector<double> acc{result.final_accuracy()};
    acc.insert(acc.end(), others.accuracies.begin(), others.accuracies.end());
    repeats = summarize(acc);
    spdlog::info("{} runs: mean {:.4f}, std {:.4f}", s.repeats, repeats->mean, repeats->std_dev);
  }
  write_text_file(dir / "summary.json", summary_json(result, s.run, repeats ? &*repeats : nullptr));

  out << fmt::format("final_accuracy {}\n", result.final_accuracy());
  if (repeats) out << fmt::format("mean_accuracy {} std {}\n", repeats->mean, repeats->std_dev);
  return exit_ok;
}

// ---------------------------------------------------------------- generate

struct GenerateArgs {
  std::string checkpoint;
  std::string vae;
  std::string registry;
  int label = -1;
  int count = 10;
  std::uint64_t seed = 42;
  bool seed_given = false;
  double epsilon = 1e-5;
  std::string selection = "hit-weighted";
  std::string out;
  std::string samples_out;
};

int cmd_generate(const GenerateArgs& a, std::ostream& out) {
  if (a.count <= 0) throw ConfigError("--count must be positive");
  log_seed(a.seed, a.seed_given);
  SomCheckpointMeta meta;
  const SomGrid grid = load_checkpoint(a.checkpoint, meta);
  const std::vector<ClassId> seen = grid.seen_classes();
  if (std::find(seen.begin(), seen.end(), a.label) == seen.end())
    throw UsageError(fmt::format("class {} was never seen by this grid; seen classes: [{}]", a.label,
                                 fmt::join(seen, ",")));
  const std::optional<VaeModel> vae = load_vae_for(meta, a.checkpoint, a.vae);
  std::optional<LocalVaeRegistry> registry;
  if (!a.registry.empty()) {
    if (!vae) throw ConfigError("--registry only applies to latent-space checkpoints");
    registry = load_registry(a.registry);
  }

  ReplayPlan plan;
  plan.classes = {a.label};
  plan.per_class_count = static_cast<std::size_t>(a.count);
  plan.space = meta.space;
  plan.epsilon = a.epsilon;
  if (a.selection == "uniform")
    plan.selection = UnitSelection::uniform;
  else if (a.selection != "hit-weighted")
    throw ConfigError("--selection must be hit-weighted or uniform");
  const ValueRange range = default_range(meta);
  plan.clamp_lo = range.lo;
  plan.clamp_hi = range.hi;
  Rng rng(a.seed, 0x47454e);
  const ReplayBatch batch = generate(grid, plan, rng);

  ImageSheet sheet(1, a.count, meta.image_shape, range);
  sheet.caption = fmt::format("class {}", a.label);
  for (int k = 0; k < a.count; ++k) {
    const ReplaySample& s = batch.samples[static_cast<std::size_t>(k)];
    Vector img;
    if (registry)
      img = registry->decode_local(s.source, s.x.span(), *vae).x;
    else if (vae)
      img = vae->decode(s.x.span());
    else
      img = s.x;
    sheet.at(0, k).assign(img.span().begin(), img.span().end());
  }
  write_image_sheet(sheet, a.out, image_format_for(a.out));
  if (!a.samples_out.empty()) {
    ReplayBatch images = batch;
    images.space = SampleSpace::pixel;
    for (int k = 0; k < a.count; ++k) images.samples[static_cast<std::size_t>(k)].x = Vector(sheet.at(0, k));
    export_dataset(batch_to_dataset(images, meta.image_shape, static_cast<int>(seen.back()) + 1, range), a.samples_out);
  }
  out << fmt::format("wrote {} samples of class {} to {}\n", a.count, a.label, a.out);
  return exit_ok;
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
  std::string checkpoint;
  std::string vae;
  std::string dataset;
  std::string config;
  std::string classes;
  std::optional<std::size_t> test_per_class;
  std::string data_root;
  std::uint64_t seed = 42;
  bool seed_given = false;
};

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  log_seed(a.seed, a.seed_given);
  TrainSettings s;
  if (!a.config.empty()) apply(parse_config_file(a.config), s);
  if (!a.dataset.empty()) s.dataset = a.dataset;
  if (a.test_per_class) s.run.test_per_class = *a.test_per_class;
  if (a.config.empty() && a.dataset.empty()) throw ConfigError("eval needs --dataset or --config");

  SomCheckpointMeta meta;
  const SomGrid grid = load_checkpoint(a.checkpoint, meta);
  const std::optional<VaeModel> vae = load_vae_for(meta, a.checkpoint, a.vae);
  const Dataset raw = load_dataset_source(s.dataset, resolve_data_root(a.data_root));
  check_shape(grid, meta, raw, vae ? &*vae : nullptr);
  RunConfig selection = s.run;
  selection.train_per_class = 1;  // only the test split is used
  const Dataset ds = prepare_dataset(raw, selection);

  std::vector<ClassId> classes = a.classes.empty() ? grid.seen_classes() : parse_class_list(a.classes);
  if (classes.empty()) throw UsageError("no classes to evaluate: the grid carries no labels");
  const Split features = vae ? encode_split(*vae, ds.test) : ds.test;
  const EvalResult r = evaluate(grid, features, classes);

  out << fmt::format("accuracy {}\n", r.accuracy);
  out << "class,correct,total,accuracy\n";
  for (std::size_t k = 0; k < r.classes.size(); ++k)
    out << fmt::format("{},{},{},{}\n", r.classes[k], r.class_correct[k], r.class_total[k], r.class_accuracy(k));
  out << "confusion,true\\predicted," << fmt::format("{}", fmt::join(r.classes, ",")) << ",other\n";
  for (std::size_t k = 0; k < r.classes.size(); ++k)
    out << fmt::format("confusion,{},{},{}\n", r.classes[k], fmt::join(r.confusion[k], ","), r.other[k]);
  return exit_ok;
}

// ---------------------------------------------------------------- inspect

int cmd_inspect(const std::string& checkpoint, std::ostream& out) {
  SomCheckpointMeta meta;
  const SomGrid grid = load_checkpoint(checkpoint, meta);
  out << fmt::format("grid {}x{} dim {} space {} covariance {}\n", grid.side(), grid.side(), grid.dim(),
                     meta.space == SampleSpace::latent ? "latent" : "pixel", grid.track_cov() ? "yes" : "no");
  const auto labels = unit_labels(grid);
  std::size_t width = 1;
  for (const auto& l : labels)
    if (l) width = std::max(width, std::to_string(*l).size());
  out << "labels\n";
  for (int i = 0; i < grid.side(); ++i) {
    std::string line;
    for (int j = 0; j < grid.side(); ++j) {
      const auto& l = labels[grid.index({i, j})];
      if (j > 0) line += ' ';
      line += fmt::format("{:>{}}", l ? std::to_string(*l) : ".", width);
    }
    out << line << '\n';
  }

  std::map<ClassId, std::uint64_t> class_hits;
  std::map<ClassId, std::size_t> class_units;
  std::uint64_t total = 0;
  std::size_t unlabeled = 0;
  double var_sum = 0.0;
  double var_min = std::numeric_limits<double>::infinity();
  double var_max = 0.0;
  for (std::size_t u = 0; u < grid.unit_count(); ++u) {
    const UnitStats& st = grid.all_stats()[u];
    for (const auto& [c, n] : st.hits) class_hits[c] += n;
    total += st.total_hits;
    if (labels[u])
      ++class_units[*labels[u]];
    else
      ++unlabeled;
    for (double v : st.var.span()) {
      var_sum += v;
      var_min = std::min(var_min, v);
      var_max = std::max(var_max, v);
    }
  }
  out << "class,hits,units\n";
  for (const auto& [c, n] : class_hits) out << fmt::format("{},{},{}\n", c, n, class_units[c]);
  out << fmt::format("total_hits {}\nunlabeled_units {}\n", total, unlabeled);
  const double count = static_cast<double>(grid.unit_count() * grid.dim());
  out << fmt::format("variance mean {:.6g} min {:.6g} max {:.6g}\n", var_sum / count, var_min, var_max);
  return exit_ok;
}

// ---------------------------------------------------------------- visualize

struct VisualizeArgs {
  std::string checkpoint;
  std::string vae;
  std::string out;
  bool means = false;
};

int cmd_visualize(const VisualizeArgs& a, std::ostream& out) {
  SomCheckpointMeta meta;
  const SomGrid grid = load_checkpoint(a.checkpoint, meta);
  const std::optional<VaeModel> vae = load_vae_for(meta, a.checkpoint, a.vae);
  ImageSheet sheet = grid_sheet(grid, meta, default_range(meta), vae ? &*vae : nullptr, a.means);
  write_image_sheet(sheet, a.out, image_format_for(a.out));
  out << fmt::format("wrote {}x{} sheet to {}\n", grid.side(), grid.side(), a.out);
  return exit_ok;
}

void error_record(std::ostream& err, const std::string& kind, const std::string& message, int code) {
  nlohmann::json j;
  j["error"] = kind;
  j["message"] = message;
  j["exit_code"] = code;
  err << j.dump() << '\n';
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err);
  auto logger = std::make_shared<spdlog::logger>("somreplay", sink);
  logger->set_pattern("[%l] %v");
  auto previous = spdlog::default_logger();
  spdlog::set_default_logger(logger);
  struct Restore {
    std::shared_ptr<spdlog::logger> logger;
    ~Restore() { spdlog::set_default_logger(logger); }
  } restore{previous};

  CLI::App app{"Self-organizing map replay for class-incremental learning"};
  app.require_subcommand(1);
  std::string log_level = "info";
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error or off");

  TrainArgs ta;
  CLI::App* train = app.add_subcommand("train", "Run a class-incremental experiment");
  train->add_option("--config", ta.config, "Configuration file (section/key = value)");
  train->add_option("--set", ta.sets, "Override one key, section.key=value (repeatable)");
  train->add_option("--dataset", ta.dataset, "mnist, fashion-mnist, cifar10, cifar100 or a .clds file");
  train->add_option("--mode", ta.mode, "som, vae-som or vae-per-bmu");
  train->add_option("--order", ta.order, "one-class or split-pairs");
  train->add_option("--grid", ta.grid, "Grid side length");
  train->add_option("--epochs", ta.epochs, "SOM epochs per task");
  train->add_option("--seed", ta.seed, "Master seed (default 42)");
  train->add_option("--classes", ta.classes, "Comma-separated class order, or all");
  train->add_option("--train-per-class", ta.train_per_class, "Training samples per class (0 = all)");
  train->add_option("--test-per-class", ta.test_per_class, "Test samples per class (0 = all)");
  train->add_option("--repeats", ta.repeats, "Independent runs with seeds seed, seed+1, ...");
  train->add_option("--threads", ta.threads, "Worker threads for repeated runs");
  train->add_flag("--force", ta.force, "Allow pixel-space SOM runs on RGB data");
  train->add_option("--out", ta.out, "Output directory")->required();
  train->add_option("--data-root", ta.data_root, "Dataset directory (default $SOMREPLAY_DATA or ./data)");
  train->add_option("--sheet-format", ta.sheet_format, "Snapshot format: png, pgm or ppm")
      ->check(CLI::IsMember({"png", "pgm", "ppm"}));

  GenerateArgs ga;
  CLI::App* gen = app.add_subcommand("generate", "Sample synthetic images of one class");
  gen->add_option("--checkpoint", ga.checkpoint, "Grid checkpoint (.somr)")->required();
  gen->add_option("--vae", ga.vae, "VAE checkpoint for latent grids (default: final.vaec beside the grid)");
  gen->add_option("--registry", ga.registry, "Per-unit decoder registry (.vaer)");
  gen->add_option("--class", ga.label, "Class to sample")->required();
  gen->add_option("--count", ga.count, "Number of samples");
  auto* gen_seed = gen->add_option("--seed", ga.seed, "Sampling seed (default 42)");
  gen->add_option("--epsilon", ga.epsilon, "Covariance eigenvalue floor");
  gen->add_option("--selection", ga.selection, "hit-weighted or uniform");
  gen->add_option("--out", ga.out, "Sheet path (.png, .pgm or .ppm)")->required();
  gen->add_option("--samples-out", ga.samples_out, "Also export the samples as a .clds container");

  EvalArgs ea;
  CLI::App* eval = app.add_subcommand("eval", "Classify a test split with a trained grid");
  eval->add_option("--checkpoint", ea.checkpoint, "Grid checkpoint (.somr)")->required();
  eval->add_option("--vae", ea.vae, "VAE checkpoint for latent grids (default: final.vaec beside the grid)");
  eval->add_option("--dataset", ea.dataset, "Dataset name or .clds file");
  eval->add_option("--config", ea.config, "Resolved configuration of the training run");
  eval->add_option("--classes", ea.classes, "Classes to score (default: every class the grid has seen)");
  eval->add_option("--test-per-class", ea.test_per_class, "Test samples per class (0 = all)");
  eval->add_option("--data-root", ea.data_root, "Dataset directory (default $SOMREPLAY_DATA or ./data)");
  auto* eval_seed = eval->add_option("--seed", ea.seed, "Seed (default 42; evaluation is deterministic)");

  std::string inspect_checkpoint;
  std::uint64_t inspect_seed = 42;
  CLI::App* inspect = app.add_subcommand("inspect", "Print the label map, hit histogram and statistics");
  inspect->add_option("--checkpoint", inspect_checkpoint, "Grid checkpoint (.somr)")->required();
  inspect->add_option("--seed", inspect_seed, "Seed (unused; accepted for uniformity)");

  VisualizeArgs va;
  std::uint64_t visualize_seed = 42;
  CLI::App* vis = app.add_subcommand("visualize", "Render every unit as an image sheet");
  vis->add_option("--checkpoint", va.checkpoint, "Grid checkpoint (.somr)")->required();
  vis->add_option("--vae", va.vae, "VAE checkpoint for latent grids (default: final.vaec beside the grid)");
  vis->add_option("--out", va.out, "Sheet path (.png, .pgm or .ppm)")->required();
  vis->add_flag("--means", va.means, "Render running means instead of weights");
  vis->add_option("--seed", visualize_seed, "Seed (unused; accepted for uniformity)");

  std::vector<std::string> args;
  for (int i = argc - 1; i > 0; --i) args.emplace_back(argv[i]);
  try {
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return exit_ok;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return exit_ok;
  } catch (const CLI::ParseError& e) {
    error_record(err, "usage", e.what(), exit_usage);
    return exit_usage;
  }

  try {
    logger->set_level(spdlog::level::from_str(log_level));
    ga.seed_given = gen_seed->count() > 0;
    ea.seed_given = eval_seed->count() > 0;
    if (*train) return cmd_train(ta, out);
    if (*gen) return cmd_generate(ga, out);
    if (*eval) return cmd_eval(ea, out);
    if (*inspect) return cmd_inspect(inspect_checkpoint, out);
    if (*vis) return cmd_visualize(va, out);
  } catch (const ConfigError& e) {
    error_record(err, "config", e.what(), exit_usage);
    return exit_usage;
  } catch (const UsageError& e) {
    error_record(err, "usage", e.what(), exit_usage);
    return exit_usage;
  } catch (const Error& e) {
    error_record(err, "runtime", e.what(), exit_runtime);
    return exit_runtime;
  } catch (const std::exception& e) {
    error_record(err, "runtime", e.what(), exit_runtime);
    return exit_runtime;
  }
  return exit_usage;
}

}  // namespace somreplay::cli
