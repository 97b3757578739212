#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "somreplay/harness.hpp"

namespace somreplay::cli {

/// Flat "section.key" -> value pairs, in file order of first appearance.
class KeyValues {
 public:
  void set(const std::string& key, const std::string& value);
  bool contains(const std::string& key) const { return values_.contains(key); }
  const std::string& get(const std::string& key) const { return values_.at(key); }
  const std::map<std::string, std::string>& values() const { return values_; }
  /// Copies every entry of `other`, replacing existing keys.
  void merge(const KeyValues& other);

 private:
  std::map<std::string, std::string> values_;
};

/// Parses `key = value` lines grouped under `[section]` headers. Blank lines
/// and lines starting with '#' or ';' are ignored. Throws ConfigError with the
/// line number on malformed input or unknown keys.
KeyValues parse_config_text(const std::string& text, const std::string& origin = "config");
KeyValues parse_config_file(const std::filesystem::path& path);

/// Parses "section.key=value" as given to --set.
void parse_assignment(const std::string& text, KeyValues& into);

/// Every accepted key, "section.key".
const std::vector<std::string>& known_keys();

/// Settings outside RunConfig that a train invocation needs.
struct TrainSettings {
  RunConfig run;
  std::string dataset = "mnist";
  int repeats = 1;
  int threads = 1;
};

/// Applies values over `settings`; throws ConfigError naming the key on
/// unknown keys or unparsable values.
void apply(const KeyValues& values, TrainSettings& settings);

/// Full configuration in file syntax, one key per line, sections in a fixed
/// order. Parsing it back yields the same settings.
std::string render(const TrainSettings& settings);

std::vector<ClassId> parse_class_list(const std::string& text);
std::string format_class_list(const std::vector<ClassId>& classes);

}  // namespace somreplay::cli
