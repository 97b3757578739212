#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "somreplay/checkpoint.hpp"
#include "somreplay/dataset.hpp"
#include "somreplay/local_vae.hpp"
#include "somreplay/replay.hpp"
#include "somreplay/som.hpp"
#include "somreplay/vae.hpp"

namespace somreplay {

enum class TaskOrder { one_class, split_pairs };
enum class RunMode { som, vae_som, vae_per_bmu };
/// Lifetime of label tallies: kept across the whole run, or restarted at each
/// task so votes come from the latest (real plus replay) phase only.
enum class HitScope { run, phase };

std::string to_string(TaskOrder order);
std::string to_string(RunMode mode);
TaskOrder parse_task_order(const std::string& text);
RunMode parse_run_mode(const std::string& text);
std::string to_string(HitScope scope);
HitScope parse_hit_scope(const std::string& text);

struct Task {
  int id = 0;
  std::vector<ClassId> classes;
  bool operator==(const Task&) const = default;
};

/// Ordered, class-disjoint training phases.
class TaskStream {
 public:
  TaskStream() = default;
  TaskStream(TaskOrder order, std::vector<Task> tasks, std::uint64_t shuffle_seed);

  /// One task per class, or consecutive pairs (0-1, 2-3, ...), over `classes`
  /// in the given order. A trailing odd class forms its own task.
  static TaskStream build(TaskOrder order, std::span<const ClassId> classes, std::uint64_t shuffle_seed);

  TaskOrder order() const { return order_; }
  const std::vector<Task>& tasks() const { return tasks_; }
  std::uint64_t shuffle_seed() const { return shuffle_seed_; }
  std::size_t size() const { return tasks_.size(); }

  /// Classes of tasks 0..task_index, in stream order.
  std::vector<ClassId> seen_through(std::size_t task_index) const;
  std::vector<ClassId> all_classes() const;

 private:
  TaskOrder order_ = TaskOrder::one_class;
  std::vector<Task> tasks_;
  std::uint64_t shuffle_seed_ = 0;
};

struct ReplayConfig {
  /// Draws per previous class; 0 matches the current task's per-class size.
  std::size_t per_class_count = 0;
  UnitSelection selection = UnitSelection::hit_weighted;
  double epsilon = 1e-5;
  /// Source units from current-task BMUs instead of labeled units.
  bool from_winners = false;
};

struct RunConfig {
  RunMode mode = RunMode::som;
  TaskOrder order = TaskOrder::one_class;
  /// Classes to stream, in order; empty means every dataset class.
  std::vector<ClassId> classes;
  /// First N training / test samples of each class; 0 keeps all.
  std::size_t train_per_class = 0;
  std::size_t test_per_class = 0;
  int grid_side = 10;
  SomHyperParams som;
  ReplayConfig replay;
  VaeConfig vae;
  /// Re-initialize the VAE at every task instead of fine-tuning it.
  bool vae_from_scratch = false;
  LocalVaeOptions local;
  HitScope hit_scope = HitScope::phase;
  std::uint64_t seed = 42;
  /// Allow pixel-space SOM runs on RGB data.
  bool force = false;

  /// Checks mode/dataset consistency; throws ConfigError.
  void validate(const Dataset& dataset) const;
};

/// Where a training-mix row came from.
struct Provenance {
  enum class Kind : std::uint8_t { real, replay };
  Kind kind = Kind::real;
  /// Task that supplied a real row; -1 for replay.
  int task_id = -1;
  /// Row index in the training split (real) or source unit (replay).
  std::size_t source_index = 0;
  GridCoord source_unit;
  std::optional<DecoderSource> decoder;
};

/// Samples of one task phase, each tagged with its provenance.
struct TrainingMix {
  Split samples;
  std::vector<Provenance> provenance;
};

struct MemoryAudit {
  int task_id = 0;
  std::size_t real_rows = 0;
  std::size_t replay_rows = 0;
  /// Real rows tagged with an earlier task.
  std::size_t tag_violations = 0;
  /// Replay rows bitwise equal to a raw sample of an earlier task.
  std::size_t content_violations = 0;
  bool size_consistent = false;
  bool passed() const { return tag_violations == 0 && content_violations == 0 && size_consistent; }
};

/// Hashes of the raw rows of completed tasks, for the content scan.
class RawSampleIndex {
 public:
  void add(const Split& split, std::size_t row);
  /// Training-split row bitwise equal to x, if any.
  std::optional<std::size_t> find(const Split& split, std::span<const double> x) const;
  std::size_t size() const { return count_; }

 private:
  std::multimap<std::uint64_t, std::size_t> rows_;
  std::size_t count_ = 0;
};

/// Scans a task's mix: every real row must carry `task_id`, no replay row may
/// equal an earlier raw sample, and the mix size must equal real + replay.
MemoryAudit audit_training_mix(const TrainingMix& mix, int task_id, std::size_t expected_real,
                               std::size_t expected_replay, const Split& train, const RawSampleIndex& earlier);

struct EvalResult {
  double accuracy = 0.0;
  std::size_t correct = 0;
  std::size_t total = 0;
  std::vector<ClassId> classes;
  std::vector<std::size_t> class_correct;
  std::vector<std::size_t> class_total;
  /// confusion[t][p] over `classes`; predictions outside the set are counted
  /// in `other` for the true class.
  std::vector<std::vector<std::size_t>> confusion;
  std::vector<std::size_t> other;

  double class_accuracy(std::size_t k) const;
};

/// Classifies every row of `features` whose label is in `classes`.
EvalResult evaluate(const SomGrid& grid, const Split& features, std::span<const ClassId> classes);

struct PhaseReport {
  int task_id = 0;
  std::vector<ClassId> task_classes;
  std::vector<ClassId> seen_classes;
  double accuracy = 0.0;
  /// Aligned with seen_classes.
  std::vector<double> class_accuracy;
  std::vector<std::size_t> class_correct;
  std::vector<std::size_t> class_total;
  std::size_t real_count = 0;
  std::size_t replay_volume = 0;
  std::size_t mix_size = 0;
  std::vector<ClassId> skipped_classes;
  std::size_t local_decodes = 0;
  std::size_t global_decodes = 0;
  std::size_t clamped_values = 0;
  double wall_seconds = 0.0;
};

/// State visible to per-task observers.
struct TaskEnd {
  const Task& task;
  const PhaseReport& report;
  const SomGrid& grid;
  const VaeModel* vae = nullptr;
  const LocalVaeRegistry* registry = nullptr;
};

struct RunResult {
  RunMode mode = RunMode::som;
  SomGrid grid;
  SomCheckpointMeta meta;
  std::optional<VaeModel> vae;
  std::optional<LocalVaeRegistry> registry;
  std::vector<PhaseReport> reports;
  std::vector<MemoryAudit> audits;
  /// VAE loss history per task (VAE modes).
  std::vector<LossHistory> vae_history;
  /// The evaluation set in the classifier's feature space.
  Split eval_features;

  double final_accuracy() const { return reports.empty() ? 0.0 : reports.back().accuracy; }
};

struct RunHooks {
  std::function<void(const TaskEnd&)> on_task_end;
};

/// Applies class selection and per-class limits to a dataset.
Dataset prepare_dataset(const Dataset& dataset, const RunConfig& config);

/// Task stream for a run.
TaskStream make_stream(const Dataset& dataset, const RunConfig& config);

RunResult run_som_only(const Dataset& dataset, const TaskStream& stream, const RunConfig& config,
                       const RunHooks& hooks = {});
RunResult run_vae_som(const Dataset& dataset, const TaskStream& stream, const RunConfig& config,
                      const RunHooks& hooks = {});
RunResult run_vae_per_bmu(const Dataset& dataset, const TaskStream& stream, const RunConfig& config,
                          const RunHooks& hooks = {});

/// Prepares the dataset, builds the stream and dispatches on config.mode.
RunResult run(const Dataset& dataset, const RunConfig& config, const RunHooks& hooks = {});

/// Posterior means of every row (labels and order kept).
Split encode_split(const VaeModel& vae, const Split& split);

/// Per class: accuracy after the task that introduced it minus final accuracy.
std::map<ClassId, double> forgetting(const std::vector<PhaseReport>& reports);

struct RepeatSummary {
  std::vector<double> accuracies;
  double mean = 0.0;
  double std_dev = 0.0;
  /// False when fewer than two runs make the deviation meaningless.
  bool std_defined = false;
  std::vector<RunResult> runs;
};

/// Sample mean and standard deviation of the values.
RepeatSummary summarize(std::vector<double> values);

/// k runs with seeds seed + i, on up to `threads` worker threads.
RepeatSummary repeat_runs(const Dataset& dataset, const RunConfig& config, int k, int threads = 1,
                          bool keep_runs = false);

/// One row per task x seen class:
/// task,class,accuracy,correct,total,task_accuracy,real_count,replay_volume,mix_size
std::string phase_csv(const std::vector<PhaseReport>& reports);
void write_phase_csv(const std::vector<PhaseReport>& reports, const std::filesystem::path& path);

/// JSON summary: final accuracy, per-task accuracy, forgetting, audits and
/// (when given) the repeat statistics.
std::string summary_json(const RunResult& result, const RunConfig& config,
                         const RepeatSummary* repeats = nullptr);

}  // namespace somreplay
