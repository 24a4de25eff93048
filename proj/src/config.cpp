#include "fsgrpo/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

namespace fsgrpo {

namespace {

std::string trim(std::string_view s) {
  const char* ws = " \t\r\n";
  const auto start = s.find_first_not_of(ws);
  if (start == std::string_view::npos) return {};
  const auto end = s.find_last_not_of(ws);
  return std::string(s.substr(start, end - start + 1));
}

std::vector<std::string> split_ws(const std::string& s) {
  std::vector<std::string> parts;
  std::istringstream is(s);
  std::string w;
  while (is >> w) parts.push_back(w);
  return parts;
}

}  // namespace

ConfigFile parse_config(const std::string& text) {
  ConfigFile cfg;
  std::map<std::string, std::string>* current = &cfg.values;

  std::istringstream is(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(is, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line.back() != ']') {
        throw ConfigError("line " + std::to_string(line_no) + ": unterminated section header");
      }
      std::string header = trim(line.substr(1, line.size() - 2));
      if (header.rfind("class ", 0) != 0) {
        throw ConfigError("line " + std::to_string(line_no) +
                          ": unknown section '" + header + "' (expected [class NAME])");
      }
      std::string name = trim(header.substr(6));
      if (name.empty()) {
        throw ConfigError("line " + std::to_string(line_no) + ": class section needs a name");
      }
      cfg.class_sections.emplace_back(std::move(name), std::map<std::string, std::string>{});
      current = &cfg.class_sections.back().second;
      continue;
    }

    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    }
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw ConfigError("line " + std::to_string(line_no) + ": empty key");
    }
    (*current)[key] = value;
  }
  return cfg;
}

ConfigFile load_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

double config_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': cannot parse '" + value + "' as a number");
  }
}

int config_int(const std::string& key, const std::string& value) {
  int v = 0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc{} || ptr != value.data() + value.size()) {
    throw ConfigError("key '" + key + "': cannot parse '" + value + "' as an integer");
  }
  return v;
}

bool config_bool(const std::string& key, const std::string& value) {
  std::string v = value;
  std::transform(v.begin(), v.end(), v.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (v == "1" || v == "true" || v == "on" || v == "yes") return true;
  if (v == "0" || v == "false" || v == "off" || v == "no") return false;
  throw ConfigError("key '" + key + "': cannot parse '" + value + "' as a boolean");
}

std::vector<double> config_doubles(const std::string& key, const std::string& value) {
  std::vector<double> out;
  for (const auto& part : split_ws(value)) out.push_back(config_double(key, part));
  return out;
}

std::vector<int> config_ints(const std::string& key, const std::string& value) {
  std::vector<int> out;
  for (const auto& part : split_ws(value)) out.push_back(config_int(key, part));
  return out;
}

namespace {

void apply_class_keys(TaskClassSpec& spec, const std::map<std::string, std::string>& keys) {
  for (const auto& [key, value] : keys) {
    if (key == "p_correct") {
      const auto v = config_doubles(key, value);
      if (v.size() != 3) throw ConfigError("p_correct needs exactly 3 values");
      std::copy(v.begin(), v.end(), spec.p_correct.begin());
    } else if (key == "tok_mean") {
      const auto v = config_ints(key, value);
      if (v.size() != 3) throw ConfigError("tok_mean needs exactly 3 values");
      std::copy(v.begin(), v.end(), spec.tok_mean.begin());
    } else if (key == "tok_jitter") {
      const auto v = config_ints(key, value);
      if (v.size() != 3) throw ConfigError("tok_jitter needs exactly 3 values");
      std::copy(v.begin(), v.end(), spec.tok_jitter.begin());
    } else if (key == "weight") {
      spec.mixture_weight = config_double(key, value);
    } else {
      throw ConfigError("unknown class key '" + key + "'");
    }
  }
}

}  // namespace

std::vector<TaskClassSpec> apply_env_config(std::vector<TaskClassSpec> classes,
                                            const ConfigFile& cfg) {
  if (cfg.has("include_default_classes") &&
      !config_bool("include_default_classes", cfg.values.at("include_default_classes"))) {
    classes.clear();
  }
  for (const auto& [name, keys] : cfg.class_sections) {
    auto it = std::find_if(classes.begin(), classes.end(),
                           [&](const TaskClassSpec& c) { return c.name == name; });
    if (it == classes.end()) {
      TaskClassSpec spec;
      spec.name = name;
      spec.p_correct = {0.5, 0.5, 0.5};
      spec.tok_mean = {300, 150, 10};
      spec.tok_jitter = {0, 0, 0};
      apply_class_keys(spec, keys);
      spec.validate();
      classes.push_back(std::move(spec));
    } else {
      apply_class_keys(*it, keys);
      it->validate();
    }
  }
  if (classes.empty()) throw ConfigError("environment config removed every task class");
  return classes;
}

void apply_trainer_config(TrainerConfig& trainer, const ConfigFile& cfg) {
  for (const auto& [key, value] : cfg.values) {
    if (key == "steps") {
      trainer.reward.total_steps = config_int(key, value);
    } else if (key == "batch_size") {
      trainer.batch_size = config_int(key, value);
    } else if (key == "group_size") {
      trainer.reward.group_size = config_int(key, value);
    } else if (key == "learning_rate") {
      trainer.learning_rate = config_double(key, value);
    } else if (key == "beta") {
      trainer.reward.kl_beta = config_double(key, value);
    } else if (key == "clip_ratio") {
      trainer.reward.clip_ratio = config_double(key, value);
    } else if (key == "diversity") {
      trainer.reward.diversity_enabled = config_bool(key, value);
    } else if (key == "length_tolerance") {
      trainer.reward.length_tolerance = config_int(key, value);
    } else if (key == "format_bonus") {
      const auto v = config_doubles(key, value);
      if (v.size() != 3) throw ConfigError("format_bonus needs exactly 3 values");
      std::copy(v.begin(), v.end(), trainer.reward.format_bonus.begin());
    } else if (key == "adv_epsilon") {
      trainer.reward.adv_epsilon = config_double(key, value);
    } else if (key == "kl_mode") {
      if (value == "exact") {
        trainer.kl_mode = KlMode::exact;
      } else if (value == "estimator") {
        trainer.kl_mode = KlMode::estimator;
      } else {
        throw ConfigError("kl_mode must be 'exact' or 'estimator'");
      }
    } else if (key == "seed") {
      trainer.seed = static_cast<std::uint64_t>(config_int(key, value));
    } else if (key == "include_default_classes") {
      // handled by apply_env_config
    } else {
      throw ConfigError("unknown trainer key '" + key + "'");
    }
  }
}

}  // namespace fsgrpo
