#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "fsgrpo/env.hpp"
#include "fsgrpo/trainer.hpp"

namespace fsgrpo {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Plain-text key/value configuration with optional [class NAME] sections.
// Lines: `key = value`, `# comment`, `[class NAME]`. Keys that appear before
// any section are top-level settings; keys inside a class section override
// or define one task class.
struct ConfigFile {
  std::map<std::string, std::string> values;
  std::vector<std::pair<std::string, std::map<std::string, std::string>>> class_sections;

  bool has(const std::string& key) const { return values.count(key) > 0; }
};

ConfigFile parse_config(const std::string& text);       // throws ConfigError with line numbers
ConfigFile load_config_file(const std::string& path);   // throws ConfigError

// Applies the class sections of cfg on top of `classes` (matching by name;
// unknown names are appended). When the top-level key
// `include_default_classes = false` is present, the result contains only the
// classes defined in the file.
std::vector<TaskClassSpec> apply_env_config(std::vector<TaskClassSpec> classes,
                                            const ConfigFile& cfg);

// Applies top-level trainer keys: steps, batch_size, group_size,
// learning_rate, beta, clip_ratio, diversity, length_tolerance,
// format_bonus (three values), adv_epsilon, kl_mode, seed.
void apply_trainer_config(TrainerConfig& trainer, const ConfigFile& cfg);

// Value parsing helpers shared with the CLI.
double config_double(const std::string& key, const std::string& value);
int config_int(const std::string& key, const std::string& value);
bool config_bool(const std::string& key, const std::string& value);
std::vector<double> config_doubles(const std::string& key, const std::string& value);
std::vector<int> config_ints(const std::string& key, const std::string& value);

}  // namespace fsgrpo
