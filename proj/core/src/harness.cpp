#include "somreplay/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstring>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include "json.hpp"
#include <spdlog/spdlog.h>

#include "somreplay/binary_io.hpp"
#include "somreplay/error.hpp"

namespace somreplay {

std::string to_string(TaskOrder order) { return order == TaskOrder::one_class ? "one-class" : "split-pairs"; }

std::string to_string(RunMode mode) {
  switch (mode) {
    case RunMode::som:
      return "som";
    case RunMode::vae_som:
      return "vae-som";
    case RunMode::vae_per_bmu:
      return "vae-per-bmu";
  }
  return "som";
}

TaskOrder parse_task_order(const std::string& text) {
  if (text == "one-class") return TaskOrder::one_class;
  if (text == "split-pairs") return TaskOrder::split_pairs;
  throw ConfigError("unknown task order '" + text + "' (expected one-class or split-pairs)");
}

RunMode parse_run_mode(const std::string& text) {
  if (text == "som") return RunMode::som;
  if (text == "vae-som") return RunMode::vae_som;
  if (text == "vae-per-bmu") return RunMode::vae_per_bmu;
  throw ConfigError("unknown mode '" + text + "' (expected som, vae-som or vae-per-bmu)");
}

std::string to_string(HitScope scope) { return scope == HitScope::phase ? "phase" : "run"; }

HitScope parse_hit_scope(const std::string& text) {
  if (text == "run") return HitScope::run;
  if (text == "phase") return HitScope::phase;
  throw ConfigError("unknown hit scope '" + text + "' (expected run or phase)");
}

TaskStream::TaskStream(TaskOrder order, std::vector<Task> tasks, std::uint64_t shuffle_seed)
    : order_(order), tasks_(std::move(tasks)), shuffle_seed_(shuffle_seed) {
  std::set<ClassId> seen;
  for (const Task& t : tasks_) {
    SOMREPLAY_EXPECTS(!t.classes.empty(), "task stream: empty task");
    for (ClassId c : t.classes)
      if (!seen.insert(c).second) throw ContractError("task stream: class " + std::to_string(c) + " repeats");
  }
}

TaskStream TaskStream::build(TaskOrder order, std::span<const ClassId> classes, std::uint64_t shuffle_seed) {
  SOMREPLAY_EXPECTS(!classes.empty(), "task stream: no classes");
  std::vector<Task> tasks;
  const std::size_t width = order == TaskOrder::one_class ? 1 : 2;
  for (std::size_t k = 0; k < classes.size(); k += width) {
    Task t;
    t.id = static_cast<int>(tasks.size());
    for (std::size_t m = k; m < std::min(classes.size(), k + width); ++m) t.classes.push_back(classes[m]);
    tasks.push_back(std::move(t));
  }
  return TaskStream(order, std::move(tasks), shuffle_seed);
}

std::vector<ClassId> TaskStream::seen_through(std::size_t task_index) const {
  std::vector<ClassId> out;
  for (std::size_t t = 0; t <= task_index && t < tasks_.size(); ++t)
    out.insert(out.end(), tasks_[t].classes.begin(), tasks_[t].classes.end());
  return out;
}

std::vector<ClassId> TaskStream::all_classes() const {
  return tasks_.empty() ? std::vector<ClassId>{} : seen_through(tasks_.size() - 1);
}

void RunConfig::validate(const Dataset& dataset) const {
  if (grid_side < 1) throw ConfigError("grid side must be at least 1");
  try {
    som.validate();
  } catch (const ContractError& e) {
    throw ConfigError(e.what());
  }
  if (mode == RunMode::som && dataset.shape.channels == 3 && !force)
    throw ConfigError("pixel-space SOM on RGB dataset '" + dataset.name +
                      "' is disabled; use a VAE mode or pass --force");
  std::set<ClassId> distinct;
  for (ClassId c : classes) {
    if (c < 0 || c >= dataset.class_count)
      throw ConfigError("class " + std::to_string(c) + " outside dataset range [0, " +
                        std::to_string(dataset.class_count) + ")");
    if (!distinct.insert(c).second) throw ConfigError("class " + std::to_string(c) + " listed twice");
  }
  if (replay.epsilon <= 0.0) throw ConfigError("replay epsilon must be positive");
  if (mode != RunMode::som) {
    VaeConfig v = vae;
    v.input_shape = dataset.shape;
    v.validate();
    if (mode == RunMode::vae_per_bmu) {
      VaeConfig l = local.config;
      l.input_shape = dataset.shape;
      l.latent_dim = vae.latent_dim;
      l.validate();
      if (local.min_samples == 0) throw ConfigError("local min_samples must be positive");
    }
  }
}

namespace {

std::uint64_t row_hash(std::span<const double> x) {
  return fnv1a64({reinterpret_cast<const std::uint8_t*>(x.data()), x.size() * sizeof(double)});
}

bool bitwise_equal(std::span<const double> a, std::span<const double> b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

}  // namespace

void RawSampleIndex::add(const Split& split, std::size_t row) {
  rows_.emplace(row_hash(split.row(row)), row);
  ++count_;
}

std::optional<std::size_t> RawSampleIndex::find(const Split& split, std::span<const double> x) const {
  const auto [lo, hi] = rows_.equal_range(row_hash(x));
  for (auto it = lo; it != hi; ++it)
    if (bitwise_equal(split.row(it->second), x)) return it->second;
  return std::nullopt;
}

MemoryAudit audit_training_mix(const TrainingMix& mix, int task_id, std::size_t expected_real,
                               std::size_t expected_replay, const Split& train, const RawSampleIndex& earlier) {
  MemoryAudit audit;
  audit.task_id = task_id;
  for (std::size_t k = 0; k < mix.provenance.size(); ++k) {
    const Provenance& p = mix.provenance[k];
    if (p.kind == Provenance::Kind::real) {
      ++audit.real_rows;
      if (p.task_id != task_id) ++audit.tag_violations;
    } else {
      ++audit.replay_rows;
      // Real rows of the current task may legitimately duplicate earlier images,
      // so only synthetic rows are compared against the raw history.
      if (earlier.find(train, mix.samples.row(k))) ++audit.content_violations;
    }
  }
  audit.size_consistent = mix.samples.size() == mix.provenance.size() &&
                          audit.real_rows == expected_real && audit.replay_rows == expected_replay &&
                          mix.samples.size() == expected_real + expected_replay;
  return audit;
}

double EvalResult::class_accuracy(std::size_t k) const {
  return class_total[k] == 0 ? 0.0 : static_cast<double>(class_correct[k]) / static_cast<double>(class_total[k]);
}

EvalResult evaluate(const SomGrid& grid, const Split& features, std::span<const ClassId> classes) {
  if (classes.empty()) throw ContractError("evaluate: empty class filter");
  SOMREPLAY_EXPECTS(features.dim() == grid.dim(), "evaluate: feature size does not match the grid");
  EvalResult r;
  r.classes.assign(classes.begin(), classes.end());
  const std::size_t k = r.classes.size();
  r.class_correct.assign(k, 0);
  r.class_total.assign(k, 0);
  r.confusion.assign(k, std::vector<std::size_t>(k, 0));
  r.other.assign(k, 0);
  std::map<ClassId, std::size_t> slot;
  for (std::size_t m = 0; m < k; ++m) slot[r.classes[m]] = m;
  const auto labels = unit_labels(grid);
  for (std::size_t i = 0; i < features.size(); ++i) {
    const auto truth = slot.find(features.label(i));
    if (truth == slot.end()) continue;
    const ClassId predicted = classify(grid, labels, features.row(i));
    ++r.class_total[truth->second];
    ++r.total;
    const auto p = slot.find(predicted);
    if (p == slot.end()) {
      ++r.other[truth->second];
    } else {
      ++r.confusion[truth->second][p->second];
    }
    if (predicted == truth->first) {
      ++r.class_correct[truth->second];
      ++r.correct;
    }
  }
  r.accuracy = r.total == 0 ? 0.0 : static_cast<double>(r.correct) / static_cast<double>(r.total);
  return r;
}

Dataset prepare_dataset(const Dataset& dataset, const RunConfig& config) {
  std::vector<ClassId> classes = config.classes;
  if (classes.empty()) {
    classes.resize(static_cast<std::size_t>(dataset.class_count));
    std::iota(classes.begin(), classes.end(), 0);
  }
  Dataset out = dataset;
  auto select = [&classes](const Split& s, std::size_t limit) {
    return limit == 0 ? class_filter(s, classes) : take_per_class(s, classes, limit);
  };
  out.train = select(dataset.train, config.train_per_class);
  out.test = select(dataset.test, config.test_per_class);
  assert_range(out.train, out.range, dataset.name + " train split");
  assert_range(out.test, out.range, dataset.name + " test split");
  return out;
}

TaskStream make_stream(const Dataset& dataset, const RunConfig& config) {
  std::vector<ClassId> classes = config.classes;
  if (classes.empty()) {
    classes.resize(static_cast<std::size_t>(dataset.class_count));
    std::iota(classes.begin(), classes.end(), 0);
  }
  return TaskStream::build(config.order, classes, config.seed);
}

Split encode_split(const VaeModel& vae, const Split& split) {
  const std::size_t latent = vae.config().latent_dim;
  Split out(latent, ImageShape{1, 1, static_cast<std::uint32_t>(latent)});
  out.reserve(split.size());
  constexpr std::size_t kChunk = 256;
  for (std::size_t start = 0; start < split.size(); start += kChunk) {
    const std::size_t n = std::min(kChunk, split.size() - start);
    Eigen::MatrixXd x(static_cast<Eigen::Index>(split.dim()), static_cast<Eigen::Index>(n));
    for (std::size_t k = 0; k < n; ++k) {
      const auto row = split.row(start + k);
      std::copy(row.begin(), row.end(), x.col(static_cast<Eigen::Index>(k)).data());
    }
    Eigen::MatrixXd mu, logvar;
    vae.encode(x, mu, logvar);
    for (std::size_t k = 0; k < n; ++k)
      out.push_back({mu.col(static_cast<Eigen::Index>(k)).data(), latent}, split.label(start + k));
  }
  return out;
}

namespace {

using Clock = std::chrono::steady_clock;

// Per-task random streams, all derived from the run seed.
struct TaskRngs {
  Rng init;
  Rng replay;
  Rng shuffle;
  Rng vae;
  Rng local;

  TaskRngs(const RunConfig& config, const TaskStream& stream, int task_id)
      : init(Rng(config.seed, 1).derive(static_cast<std::uint64_t>(task_id))),
        replay(Rng(config.seed, 2).derive(static_cast<std::uint64_t>(task_id))),
        shuffle(Rng(stream.shuffle_seed(), 3).derive(static_cast<std::uint64_t>(task_id))),
        vae(Rng(config.seed, 4).derive(static_cast<std::uint64_t>(task_id))),
        local(Rng(config.seed, 5).derive(static_cast<std::uint64_t>(task_id))) {}
};

// Online SOM training over `data` for params.epochs epochs, reshuffled each
// epoch. Progress runs from 0 to 1 across the whole phase.
void train_som_phase(SomGrid& grid, const Split& data, const SomHyperParams& params, Rng& rng) {
  const std::size_t n = data.size();
  if (n == 0) return;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  const double total = static_cast<double>(n) * static_cast<double>(params.epochs);
  std::size_t step = 0;
  for (int e = 0; e < params.epochs; ++e) {
    rng.shuffle(std::span<std::size_t>(order));
    for (std::size_t idx : order) {
      train_step(grid, data.row(idx), data.label(idx), params, static_cast<double>(step) / total);
      ++step;
    }
  }
}

std::size_t replay_count_for(const RunConfig& config, std::size_t real_rows, const Task& task) {
  if (config.replay.per_class_count > 0) return config.replay.per_class_count;
  return std::max<std::size_t>(1, real_rows / task.classes.size());
}

// Real rows of the current task, tagged with their origin.
TrainingMix real_rows_of(const Split& train, const Task& task) {
  TrainingMix mix;
  mix.samples = Split(train.dim(), train.shape());
  for (std::size_t i = 0; i < train.size(); ++i) {
    if (std::find(task.classes.begin(), task.classes.end(), train.label(i)) == task.classes.end()) continue;
    mix.samples.push_back(train.row(i), train.label(i));
    Provenance p;
    p.kind = Provenance::Kind::real;
    p.task_id = task.id;
    p.source_index = i;
    mix.provenance.push_back(p);
  }
  return mix;
}

ReplayPlan plan_for(const RunConfig& config, const std::vector<ClassId>& previous, std::size_t per_class,
                    SampleSpace space, ValueRange range) {
  ReplayPlan plan;
  plan.classes = previous;
  plan.per_class_count = per_class;
  plan.space = space;
  plan.epsilon = config.replay.epsilon;
  plan.selection = config.replay.selection;
  plan.clamp_lo = range.lo;
  plan.clamp_hi = range.hi;
  return plan;
}

ReplayBatch draw_replay(const SomGrid& grid, const ReplayPlan& plan, const RunConfig& config,
                        const std::vector<std::span<const double>>& current_inputs, Rng& rng) {
  if (config.replay.from_winners) return generate_from_winners(grid, plan, current_inputs, rng);
  return generate(grid, plan, rng);
}

PhaseReport make_report(const Task& task, const std::vector<ClassId>& seen, const EvalResult& eval,
                        const TrainingMix& mix, std::size_t real, std::size_t replay, const ReplayBatch* batch,
                        Clock::time_point started) {
  PhaseReport r;
  r.task_id = task.id;
  r.task_classes = task.classes;
  r.seen_classes = seen;
  r.accuracy = eval.accuracy;
  for (std::size_t k = 0; k < eval.classes.size(); ++k) {
    r.class_accuracy.push_back(eval.class_accuracy(k));
    r.class_correct.push_back(eval.class_correct[k]);
    r.class_total.push_back(eval.class_total[k]);
  }
  r.real_count = real;
  r.replay_volume = replay;
  r.mix_size = mix.samples.size();
  for (const Provenance& p : mix.provenance) {
    if (p.decoder == DecoderSource::local) ++r.local_decodes;
    if (p.decoder == DecoderSource::global) ++r.global_decodes;
  }
  if (batch) {
    r.skipped_classes = batch->skipped_classes;
    r.clamped_values = batch->clamped_values;
  }
  r.wall_seconds = std::chrono::duration<double>(Clock::now() - started).count();
  return r;
}

void require_audit(const MemoryAudit& audit) {
  if (audit.passed()) return;
  std::ostringstream os;
  os << "memory-free audit failed at task " << audit.task_id << ": " << audit.tag_violations
     << " real rows from earlier tasks, " << audit.content_violations
     << " synthetic rows equal to earlier raw samples, size consistent=" << audit.size_consistent;
  throw ContractError(os.str());
}

void log_phase(const PhaseReport& r, RunMode mode) {
  spdlog::info("[{}] task {} done: accuracy {:.4f} over {} classes (real {}, replay {}, {:.1f}s)", to_string(mode),
               r.task_id, r.accuracy, r.seen_classes.size(), r.real_count, r.replay_volume, r.wall_seconds);
}

Eigen::MatrixXd columns_of(const Split& s) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(s.dim()), static_cast<Eigen::Index>(s.size()));
  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto row = s.row(i);
    std::copy(row.begin(), row.end(), x.col(static_cast<Eigen::Index>(i)).data());
  }
  return x;
}

Split latents_of(const VaeModel& vae, const Split& images) { return encode_split(vae, images); }

}  // namespace

RunResult run_som_only(const Dataset& dataset, const TaskStream& stream, const RunConfig& config,
                       const RunHooks& hooks) {
  config.validate(dataset);
  SOMREPLAY_EXPECTS(stream.size() > 0, "run_som_only: empty task stream");
  RunResult result;
  result.mode = RunMode::som;
  result.meta = {SampleSpace::pixel, dataset.shape};
  RawSampleIndex earlier;

  for (std::size_t t = 0; t < stream.size(); ++t) {
    const auto started = Clock::now();
    const Task& task = stream.tasks()[t];
    TaskRngs rngs(config, stream, task.id);
    TrainingMix mix = real_rows_of(dataset.train, task);
    if (mix.samples.empty()) throw ContractError("task " + std::to_string(task.id) + " has no training samples");
    const std::size_t real = mix.samples.size();

    if (t == 0) {
      const auto seeds = mix.samples.rows();
      result.grid = init_from_samples(config.grid_side, dataset.train.dim(), seeds, false, rngs.init);
    }

    std::optional<ReplayBatch> batch;
    if (t > 0) {
      const std::vector<ClassId> previous = stream.seen_through(t - 1);
      const ReplayPlan plan = plan_for(config, previous, replay_count_for(config, real, task), SampleSpace::pixel,
                                       dataset.range);
      batch = draw_replay(result.grid, plan, config, mix.samples.rows(), rngs.replay);
      for (const ReplaySample& s : batch->samples) {
        mix.samples.push_back(s.x, s.label);
        Provenance p;
        p.kind = Provenance::Kind::replay;
        p.source_index = result.grid.index(s.source);
        p.source_unit = s.source;
        mix.provenance.push_back(p);
      }
    }
    const std::size_t replay = batch ? batch->samples.size() : 0;
    assert_range(mix.samples, dataset.range, "training mix of task " + std::to_string(task.id));
    const MemoryAudit audit = audit_training_mix(mix, task.id, real, replay, dataset.train, earlier);
    result.audits.push_back(audit);
    require_audit(audit);

    if (config.hit_scope == HitScope::phase) clear_hits(result.grid);
    train_som_phase(result.grid, mix.samples, config.som, rngs.shuffle);

    for (const Provenance& p : mix.provenance)
      if (p.kind == Provenance::Kind::real) earlier.add(dataset.train, p.source_index);

    const std::vector<ClassId> seen = stream.seen_through(t);
    const EvalResult eval = evaluate(result.grid, dataset.test, seen);
    result.reports.push_back(make_report(task, seen, eval, mix, real, replay, batch ? &*batch : nullptr, started));
    log_phase(result.reports.back(), result.mode);
    if (hooks.on_task_end) hooks.on_task_end({task, result.reports.back(), result.grid, nullptr, nullptr});
  }
  result.eval_features = dataset.test;
  return result;
}

namespace {

// Shared driver of the two VAE modes.
RunResult run_vae_modes(const Dataset& dataset, const TaskStream& stream, const RunConfig& config,
                        const RunHooks& hooks, bool per_bmu) {
  config.validate(dataset);
  SOMREPLAY_EXPECTS(stream.size() > 0, "vae run: empty task stream");
  RunResult result;
  result.mode = per_bmu ? RunMode::vae_per_bmu : RunMode::vae_som;
  result.meta = {SampleSpace::latent, dataset.shape};

  VaeConfig vae_cfg = config.vae;
  vae_cfg.input_shape = dataset.shape;
  result.vae.emplace(vae_cfg);
  VaeModel& vae = *result.vae;
  if (per_bmu) {
    LocalVaeOptions local = config.local;
    local.config.input_shape = dataset.shape;
    local.config.latent_dim = vae_cfg.latent_dim;
    result.registry.emplace(local);
  }
  RawSampleIndex earlier;

  for (std::size_t t = 0; t < stream.size(); ++t) {
    const auto started = Clock::now();
    const Task& task = stream.tasks()[t];
    TaskRngs rngs(config, stream, task.id);
    TrainingMix mix = real_rows_of(dataset.train, task);
    if (mix.samples.empty()) throw ContractError("task " + std::to_string(task.id) + " has no training samples");
    const std::size_t real = mix.samples.size();

    std::optional<ReplayBatch> batch;
    if (t > 0) {
      const std::vector<ClassId> previous = stream.seen_through(t - 1);
      const ReplayPlan plan = plan_for(config, previous, replay_count_for(config, real, task), SampleSpace::latent,
                                       dataset.range);
      std::vector<std::span<const double>> current_latents;
      Split encoded;
      if (config.replay.from_winners) {
        encoded = latents_of(vae, mix.samples);
        current_latents = encoded.rows();
      }
      batch = draw_replay(result.grid, plan, config, current_latents, rngs.replay);
      for (const ReplaySample& s : batch->samples) {
        Provenance p;
        p.kind = Provenance::Kind::replay;
        p.source_index = result.grid.index(s.source);
        p.source_unit = s.source;
        Vector image;
        if (per_bmu) {
          LocalDecode d = result.registry->decode_local(s.source, s.x, vae);
          image = std::move(d.x);
          p.decoder = d.source;
        } else {
          image = vae.decode(s.x);
          p.decoder = DecoderSource::global;
        }
        mix.samples.push_back(image, s.label);
        mix.provenance.push_back(p);
      }
    }
    const std::size_t replay = batch ? batch->samples.size() : 0;
    assert_range(mix.samples, dataset.range, "training mix of task " + std::to_string(task.id));
    const MemoryAudit audit = audit_training_mix(mix, task.id, real, replay, dataset.train, earlier);
    result.audits.push_back(audit);
    require_audit(audit);

    // Replayed images go through VAE training exactly like real ones.
    if (config.vae_from_scratch && t > 0) {
      VaeConfig fresh = vae_cfg;
      fresh.seed = mix64(vae_cfg.seed + static_cast<std::uint64_t>(task.id));
      vae = VaeModel(fresh);
    }
    result.vae_history.push_back(train(vae, columns_of(mix.samples), rngs.vae));

    const Split latents = latents_of(vae, mix.samples);
    if (t == 0) {
      Split first_real(latents.dim(), latents.shape());
      for (std::size_t i = 0; i < real; ++i) first_real.push_back(latents.row(i), latents.label(i));
      const auto seeds = first_real.rows();
      result.grid = init_from_samples(config.grid_side, latents.dim(), seeds, true, rngs.init);
    }
    if (config.hit_scope == HitScope::phase) clear_hits(result.grid);
    train_som_phase(result.grid, latents, config.som, rngs.shuffle);

    if (per_bmu) {
      // Group the phase's images by the BMU of their global latent.
      std::map<GridCoord, std::vector<std::size_t>> assigned;
      for (std::size_t i = 0; i < latents.size(); ++i) assigned[find_bmu(result.grid, latents.row(i))].push_back(i);
      const double eta = decay(config.som.learning_rate, 1.0, config.som.decay);
      const double sigma = decay(config.som.sigma, 1.0, config.som.decay);
      for (const auto& [coord, rows] : assigned) {
        Eigen::MatrixXd images(static_cast<Eigen::Index>(mix.samples.dim()), static_cast<Eigen::Index>(rows.size()));
        for (std::size_t k = 0; k < rows.size(); ++k) {
          const auto r = mix.samples.row(rows[k]);
          std::copy(r.begin(), r.end(), images.col(static_cast<Eigen::Index>(k)).data());
        }
        Rng unit_rng = rngs.local.derive(result.grid.index(coord));
        if (result.registry->train_local(coord, images, unit_rng))
          result.registry->update_som_from_local(result.grid, coord, images, eta, sigma,
                                                 config.som.neighborhood_cutoff);
      }
    }

    for (const Provenance& p : mix.provenance)
      if (p.kind == Provenance::Kind::real) earlier.add(dataset.train, p.source_index);

    const std::vector<ClassId> seen = stream.seen_through(t);
    result.eval_features = latents_of(vae, dataset.test);
    const EvalResult eval = evaluate(result.grid, result.eval_features, seen);
    result.reports.push_back(make_report(task, seen, eval, mix, real, replay, batch ? &*batch : nullptr, started));
    log_phase(result.reports.back(), result.mode);
    if (hooks.on_task_end)
      hooks.on_task_end({task, result.reports.back(), result.grid, &vae, per_bmu ? &*result.registry : nullptr});
  }
  return result;
}

}  // namespace

RunResult run_vae_som(const Dataset& dataset, const TaskStream& stream, const RunConfig& config,
                      const RunHooks& hooks) {
  return run_vae_modes(dataset, stream, config, hooks, false);
}

RunResult run_vae_per_bmu(const Dataset& dataset, const TaskStream& stream, const RunConfig& config,
                          const RunHooks& hooks) {
  return run_vae_modes(dataset, stream, config, hooks, true);
}

RunResult run(const Dataset& dataset, const RunConfig& config, const RunHooks& hooks) {
  config.validate(dataset);
  const Dataset prepared = prepare_dataset(dataset, config);
  const TaskStream stream = make_stream(dataset, config);
  switch (config.mode) {
    case RunMode::som:
      return run_som_only(prepared, stream, config, hooks);
    case RunMode::vae_som:
      return run_vae_som(prepared, stream, config, hooks);
    case RunMode::vae_per_bmu:
      return run_vae_per_bmu(prepared, stream, config, hooks);
  }
  throw ConfigError("unknown run mode");
}

std::map<ClassId, double> forgetting(const std::vector<PhaseReport>& reports) {
  std::map<ClassId, double> first;
  for (const PhaseReport& r : reports)
    for (std::size_t k = 0; k < r.seen_classes.size(); ++k)
      first.try_emplace(r.seen_classes[k], r.class_accuracy[k]);
  std::map<ClassId, double> out;
  if (reports.empty()) return out;
  const PhaseReport& last = reports.back();
  for (std::size_t k = 0; k < last.seen_classes.size(); ++k)
    out[last.seen_classes[k]] = first[last.seen_classes[k]] - last.class_accuracy[k];
  return out;
}

RepeatSummary summarize(std::vector<double> values) {
  RepeatSummary s;
  s.accuracies = std::move(values);
  const double n = static_cast<double>(s.accuracies.size());
  if (s.accuracies.empty()) return s;
  s.mean = std::accumulate(s.accuracies.begin(), s.accuracies.end(), 0.0) / n;
  s.std_defined = s.accuracies.size() > 1;
  if (s.std_defined) {
    double ss = 0.0;
    for (double v : s.accuracies) ss += (v - s.mean) * (v - s.mean);
    s.std_dev = std::sqrt(ss / (n - 1.0));
  }
  return s;
}

RepeatSummary repeat_runs(const Dataset& dataset, const RunConfig& config, int k, int threads, bool keep_runs) {
  SOMREPLAY_EXPECTS(k >= 1, "repeat_runs: k must be at least 1");
  SOMREPLAY_EXPECTS(threads >= 1, "repeat_runs: threads must be at least 1");
  std::vector<std::optional<RunResult>> runs(static_cast<std::size_t>(k));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(k));
  std::atomic<int> next{0};
  auto worker = [&]() {
    for (int i = next++; i < k; i = next++) {
      try {
        RunConfig c = config;
        c.seed = config.seed + static_cast<std::uint64_t>(i);
        runs[static_cast<std::size_t>(i)] = run(dataset, c);
      } catch (...) {
        errors[static_cast<std::size_t>(i)] = std::current_exception();
      }
    }
  };
  const int workers = std::min(threads, k);
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  std::vector<double> acc;
  for (const auto& r : runs) acc.push_back(r->final_accuracy());
  RepeatSummary s = summarize(std::move(acc));
  if (keep_runs)
    for (auto& r : runs) s.runs.push_back(std::move(*r));
  return s;
}

std::string phase_csv(const std::vector<PhaseReport>& reports) {
  std::ostringstream os;
  os.precision(10);
  os << "task,class,accuracy,correct,total,task_accuracy,real_count,replay_volume,mix_size\n";
  for (const PhaseReport& r : reports)
    for (std::size_t k = 0; k < r.seen_classes.size(); ++k)
      os << r.task_id << ',' << r.seen_classes[k] << ',' << r.class_accuracy[k] << ',' << r.class_correct[k] << ','
         << r.class_total[k] << ',' << r.accuracy << ',' << r.real_count << ',' << r.replay_volume << ','
         << r.mix_size << '\n';
  return os.str();
}

void write_phase_csv(const std::vector<PhaseReport>& reports, const std::filesystem::path& path) {
  write_text_file(path, phase_csv(reports));
}

std::string summary_json(const RunResult& result, const RunConfig& config, const RepeatSummary* repeats) {
  nlohmann::ordered_json j;
  j["mode"] = to_string(result.mode);
  j["order"] = to_string(config.order);
  j["seed"] = config.seed;
  j["grid"] = config.grid_side;
  j["epochs"] = config.som.epochs;
  j["final_accuracy"] = result.final_accuracy();
  nlohmann::ordered_json tasks = nlohmann::ordered_json::array();
  for (const PhaseReport& r : result.reports) {
    nlohmann::ordered_json t;
    t["task"] = r.task_id;
    t["classes"] = r.task_classes;
    t["accuracy"] = r.accuracy;
    t["real_count"] = r.real_count;
    t["replay_volume"] = r.replay_volume;
    t["mix_size"] = r.mix_size;
    if (!r.skipped_classes.empty()) t["skipped_classes"] = r.skipped_classes;
    if (result.mode == RunMode::vae_per_bmu) {
      t["local_decodes"] = r.local_decodes;
      t["global_decodes"] = r.global_decodes;
    }
    tasks.push_back(std::move(t));
  }
  j["tasks"] = std::move(tasks);
  nlohmann::ordered_json forget;
  for (const auto& [c, v] : forgetting(result.reports)) forget[std::to_string(c)] = v;
  j["forgetting"] = std::move(forget);
  bool passed = true;
  std::size_t replay_rows = 0;
  for (const MemoryAudit& a : result.audits) {
    passed = passed && a.passed();
    replay_rows += a.replay_rows;
  }
  j["memory_audit"] = {{"tasks", result.audits.size()}, {"passed", passed}, {"replay_rows", replay_rows}};
  if (result.registry) {
    j["local_vaes"] = result.registry->size();
    j["local_fallbacks"] = result.registry->fallbacks().size();
  }
  if (repeats) {
    j["repeats"] = {{"runs", repeats->accuracies.size()},
                    {"accuracies", repeats->accuracies},
                    {"mean", repeats->mean},
                    {"std", repeats->std_dev},
                    {"std_defined", repeats->std_defined}};
  }
  return j.dump(2) + "\n";
}

}  // namespace somreplay
