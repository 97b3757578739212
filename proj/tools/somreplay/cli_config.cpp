#include "cli_config.hpp"

#include <algorithm>
#include <charconv>
#include <functional>
#include <sstream>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "somreplay/binary_io.hpp"
#include "somreplay/error.hpp"

namespace somreplay::cli {

void KeyValues::set(const std::string& key, const std::string& value) { values_[key] = value; }

void KeyValues::merge(const KeyValues& other) {
  for (const auto& [k, v] : other.values_) values_[k] = v;
}

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const std::string& expected) {
  throw ConfigError("config key '" + key + "': cannot parse '" + value + "' as " + expected);
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) bad_value(key, v, "a number");
    return d;
  } catch (const std::logic_error&) {
    bad_value(key, v, "a number");
  }
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) bad_value(key, v, "a non-negative integer");
  return out;
}

int to_int(const std::string& key, const std::string& v) {
  int out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) bad_value(key, v, "an integer");
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  bad_value(key, v, "a boolean");
}

std::vector<std::size_t> to_widths(const std::string& key, const std::string& v) {
  std::vector<std::size_t> out;
  if (v.empty() || v == "none") return out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_u64(key, trim(item)));
  return out;
}

std::string widths(const std::vector<std::size_t>& w) { return w.empty() ? "none" : fmt::format("{}", fmt::join(w, ",")); }

std::string num(double v) { return fmt::format("{}", v); }

Activation to_activation(const std::string& key, const std::string& v) {
  if (v == "elu") return Activation::elu;
  if (v == "tanh") return Activation::tanh;
  if (v == "identity") return Activation::identity;
  bad_value(key, v, "elu, tanh or identity");
}

std::string activation_name(Activation a) {
  switch (a) {
    case Activation::elu:
      return "elu";
    case Activation::tanh:
      return "tanh";
    case Activation::identity:
      return "identity";
  }
  return "elu";
}

struct KeyHandler {
  std::string key;
  std::function<void(TrainSettings&, const std::string&)> set;
  std::function<std::string(const TrainSettings&)> get;
};

const std::vector<KeyHandler>& handlers() {
  static const std::vector<KeyHandler> table = [] {
    std::vector<KeyHandler> h;
    auto add = [&h](std::string key, auto set, auto get) { h.push_back({std::move(key), set, get}); };
    // [run]
    add("run.dataset", [](TrainSettings& s, const std::string& v) { s.dataset = v; },
        [](const TrainSettings& s) { return s.dataset; });
    add("run.mode", [](TrainSettings& s, const std::string& v) { s.run.mode = parse_run_mode(v); },
        [](const TrainSettings& s) { return to_string(s.run.mode); });
    add("run.order", [](TrainSettings& s, const std::string& v) { s.run.order = parse_task_order(v); },
        [](const TrainSettings& s) { return to_string(s.run.order); });
    add("run.classes", [](TrainSettings& s, const std::string& v) { s.run.classes = parse_class_list(v); },
        [](const TrainSettings& s) { return format_class_list(s.run.classes); });
    add("run.seed", [](TrainSettings& s, const std::string& v) { s.run.seed = to_u64("run.seed", v); },
        [](const TrainSettings& s) { return std::to_string(s.run.seed); });
    add("run.train_per_class",
        [](TrainSettings& s, const std::string& v) { s.run.train_per_class = to_u64("run.train_per_class", v); },
        [](const TrainSettings& s) { return std::to_string(s.run.train_per_class); });
    add("run.test_per_class",
        [](TrainSettings& s, const std::string& v) { s.run.test_per_class = to_u64("run.test_per_class", v); },
        [](const TrainSettings& s) { return std::to_string(s.run.test_per_class); });
    add("run.repeats", [](TrainSettings& s, const std::string& v) { s.repeats = to_int("run.repeats", v); },
        [](const TrainSettings& s) { return std::to_string(s.repeats); });
    add("run.threads", [](TrainSettings& s, const std::string& v) { s.threads = to_int("run.threads", v); },
        [](const TrainSettings& s) { return std::to_string(s.threads); });
    add("run.force", [](TrainSettings& s, const std::string& v) { s.run.force = to_bool("run.force", v); },
        [](const TrainSettings& s) { return std::string(s.run.force ? "true" : "false"); });
    // [som]
    add("som.grid", [](TrainSettings& s, const std::string& v) { s.run.grid_side = to_int("som.grid", v); },
        [](const TrainSettings& s) { return std::to_string(s.run.grid_side); });
    add("som.epochs", [](TrainSettings& s, const std::string& v) { s.run.som.epochs = to_int("som.epochs", v); },
        [](const TrainSettings& s) { return std::to_string(s.run.som.epochs); });
    add("som.learning_rate",
        [](TrainSettings& s, const std::string& v) { s.run.som.learning_rate = to_double("som.learning_rate", v); },
        [](const TrainSettings& s) { return num(s.run.som.learning_rate); });
    add("som.sigma", [](TrainSettings& s, const std::string& v) { s.run.som.sigma = to_double("som.sigma", v); },
        [](const TrainSettings& s) { return num(s.run.som.sigma); });
    add("som.hit_scope", [](TrainSettings& s, const std::string& v) { s.run.hit_scope = parse_hit_scope(v); },
        [](const TrainSettings& s) { return to_string(s.run.hit_scope); });
    add("som.alpha", [](TrainSettings& s, const std::string& v) { s.run.som.alpha = to_double("som.alpha", v); },
        [](const TrainSettings& s) { return num(s.run.som.alpha); });
    add("som.decay",
        [](TrainSettings& s, const std::string& v) {
          if (v == "exponential") {
            s.run.som.decay.kind = DecayKind::exponential;
          } else if (v == "constant") {
            s.run.som.decay.kind = DecayKind::constant;
          } else {
            bad_value("som.decay", v, "exponential or constant");
          }
        },
        [](const TrainSettings& s) {
          return std::string(s.run.som.decay.kind == DecayKind::exponential ? "exponential" : "constant");
        });
    add("som.decay_rate",
        [](TrainSettings& s, const std::string& v) { s.run.som.decay.rate = to_double("som.decay_rate", v); },
        [](const TrainSettings& s) { return num(s.run.som.decay.rate); });
    add("som.stats_order",
        [](TrainSettings& s, const std::string& v) {
          if (v == "mean-first") {
            s.run.som.stats_order = StatsOrder::mean_first;
          } else if (v == "mean-last") {
            s.run.som.stats_order = StatsOrder::mean_last;
          } else {
            bad_value("som.stats_order", v, "mean-first or mean-last");
          }
        },
        [](const TrainSettings& s) {
          return std::string(s.run.som.stats_order == StatsOrder::mean_first ? "mean-first" : "mean-last");
        });
    add("som.neighborhood_cutoff",
        [](TrainSettings& s, const std::string& v) {
          s.run.som.neighborhood_cutoff = to_double("som.neighborhood_cutoff", v);
        },
        [](const TrainSettings& s) { return num(s.run.som.neighborhood_cutoff); });
    // [replay]
    add("replay.per_class",
        [](TrainSettings& s, const std::string& v) { s.run.replay.per_class_count = to_u64("replay.per_class", v); },
        [](const TrainSettings& s) { return std::to_string(s.run.replay.per_class_count); });
    add("replay.selection",
        [](TrainSettings& s, const std::string& v) {
          if (v == "hit-weighted") {
            s.run.replay.selection = UnitSelection::hit_weighted;
          } else if (v == "uniform") {
            s.run.replay.selection = UnitSelection::uniform;
          } else {
            bad_value("replay.selection", v, "hit-weighted or uniform");
          }
        },
        [](const TrainSettings& s) {
          return std::string(s.run.replay.selection == UnitSelection::hit_weighted ? "hit-weighted" : "uniform");
        });
    add("replay.epsilon",
        [](TrainSettings& s, const std::string& v) { s.run.replay.epsilon = to_double("replay.epsilon", v); },
        [](const TrainSettings& s) { return num(s.run.replay.epsilon); });
    add("replay.from_winners",
        [](TrainSettings& s, const std::string& v) { s.run.replay.from_winners = to_bool("replay.from_winners", v); },
        [](const TrainSettings& s) { return std::string(s.run.replay.from_winners ? "true" : "false"); });
    // [vae] and [local] share their keys.
    auto add_vae = [&add](const std::string& section, auto config_of) {
      add(section + ".hidden",
          [=](TrainSettings& s, const std::string& v) { config_of(s).hidden = to_widths(section + ".hidden", v); },
          [=](const TrainSettings& s) { return widths(config_of(const_cast<TrainSettings&>(s)).hidden); });
      add(section + ".hidden_activation",
          [=](TrainSettings& s, const std::string& v) {
            config_of(s).hidden_activation = to_activation(section + ".hidden_activation", v);
          },
          [=](const TrainSettings& s) {
            return activation_name(config_of(const_cast<TrainSettings&>(s)).hidden_activation);
          });
      add(section + ".learning_rate",
          [=](TrainSettings& s, const std::string& v) {
            config_of(s).learning_rate = to_double(section + ".learning_rate", v);
          },
          [=](const TrainSettings& s) { return num(config_of(const_cast<TrainSettings&>(s)).learning_rate); });
      add(section + ".batch_size",
          [=](TrainSettings& s, const std::string& v) { config_of(s).batch_size = to_u64(section + ".batch_size", v); },
          [=](const TrainSettings& s) { return std::to_string(config_of(const_cast<TrainSettings&>(s)).batch_size); });
      add(section + ".epochs",
          [=](TrainSettings& s, const std::string& v) { config_of(s).epochs = to_u64(section + ".epochs", v); },
          [=](const TrainSettings& s) { return std::to_string(config_of(const_cast<TrainSettings&>(s)).epochs); });
      add(section + ".kl_scale",
          [=](TrainSettings& s, const std::string& v) { config_of(s).kl_scale = to_double(section + ".kl_scale", v); },
          [=](const TrainSettings& s) { return num(config_of(const_cast<TrainSettings&>(s)).kl_scale); });
      add(section + ".seed",
          [=](TrainSettings& s, const std::string& v) { config_of(s).seed = to_u64(section + ".seed", v); },
          [=](const TrainSettings& s) { return std::to_string(config_of(const_cast<TrainSettings&>(s)).seed); });
    };
    add("vae.latent",
        [](TrainSettings& s, const std::string& v) { s.run.vae.latent_dim = to_u64("vae.latent", v); },
        [](const TrainSettings& s) { return std::to_string(s.run.vae.latent_dim); });
    add_vae("vae", [](TrainSettings& s) -> VaeConfig& { return s.run.vae; });
    add("vae.feature_scale",
        [](TrainSettings& s, const std::string& v) { s.run.vae.feature_scale = to_double("vae.feature_scale", v); },
        [](const TrainSettings& s) { return num(s.run.vae.feature_scale); });
    add("vae.from_scratch",
        [](TrainSettings& s, const std::string& v) { s.run.vae_from_scratch = to_bool("vae.from_scratch", v); },
        [](const TrainSettings& s) { return std::string(s.run.vae_from_scratch ? "true" : "false"); });
    add_vae("local", [](TrainSettings& s) -> VaeConfig& { return s.run.local.config; });
    add("local.min_samples",
        [](TrainSettings& s, const std::string& v) { s.run.local.min_samples = to_u64("local.min_samples", v); },
        [](const TrainSettings& s) { return std::to_string(s.run.local.min_samples); });
    return h;
  }();
  return table;
}

const KeyHandler* find_handler(const std::string& key) {
  for (const KeyHandler& h : handlers())
    if (h.key == key) return &h;
  return nullptr;
}

}  // namespace

const std::vector<std::string>& known_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const KeyHandler& h : handlers()) k.push_back(h.key);
    return k;
  }();
  return keys;
}

KeyValues parse_config_text(const std::string& text, const std::string& origin) {
  KeyValues out;
  std::istringstream in(text);
  std::string line;
  std::string section;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    const std::string where = origin + ":" + std::to_string(number);
    if (t.front() == '[') {
      if (t.back() != ']') throw ConfigError(where + ": malformed section header");
      section = trim(std::string_view(t).substr(1, t.size() - 2));
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected 'key = value'");
    const std::string name = trim(std::string_view(t).substr(0, eq));
    const std::string value = trim(std::string_view(t).substr(eq + 1));
    if (section.empty()) throw ConfigError(where + ": key '" + name + "' appears before any [section]");
    const std::string key = section + "." + name;
    if (!find_handler(key)) throw ConfigError(where + ": unknown key '" + key + "'");
    out.set(key, value);
  }
  return out;
}

KeyValues parse_config_file(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("config file not found: " + path.string());
  const auto bytes = read_file(path);
  return parse_config_text(std::string(bytes.begin(), bytes.end()), path.string());
}

void parse_assignment(const std::string& text, KeyValues& into) {
  const auto eq = text.find('=');
  if (eq == std::string::npos) throw ConfigError("expected section.key=value, got '" + text + "'");
  const std::string key = trim(std::string_view(text).substr(0, eq));
  if (!find_handler(key)) throw ConfigError("unknown key '" + key + "'");
  into.set(key, trim(std::string_view(text).substr(eq + 1)));
}

void apply(const KeyValues& values, TrainSettings& settings) {
  for (const auto& [key, value] : values.values()) {
    const KeyHandler* h = find_handler(key);
    if (!h) throw ConfigError("unknown key '" + key + "'");
    h->set(settings, value);
  }
}

std::string render(const TrainSettings& settings) {
  std::string out;
  std::string section;
  for (const KeyHandler& h : handlers()) {
    const auto dot = h.key.find('.');
    const std::string s = h.key.substr(0, dot);
    if (s != section) {
      if (!section.empty()) out += '\n';
      out += "[" + s + "]\n";
      section = s;
    }
    out += h.key.substr(dot + 1) + " = " + h.get(settings) + "\n";
  }
  return out;
}

std::vector<ClassId> parse_class_list(const std::string& text) {
  std::vector<ClassId> out;
  if (text.empty() || text == "all") return out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const std::string t = trim(item);
    ClassId c = 0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), c);
    if (ec != std::errc() || ptr != t.data() + t.size() || t.empty())
      throw ConfigError("cannot parse class list '" + text + "'");
    out.push_back(c);
  }
  return out;
}

std::string format_class_list(const std::vector<ClassId>& classes) {
  return classes.empty() ? "all" : fmt::format("{}", fmt::join(classes, ","));
}

}  // namespace somreplay::cli
