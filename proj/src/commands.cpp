#include "fsgrpo/commands.hpp"

#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <vector>

#include "json.hpp"

#include "fsgrpo/config.hpp"
#include "fsgrpo/diagnostics.hpp"
#include "fsgrpo/env.hpp"
#include "fsgrpo/format.hpp"
#include "fsgrpo/io_util.hpp"
#include "fsgrpo/policy.hpp"
#include "fsgrpo/reward.hpp"
#include "fsgrpo/rng.hpp"
#include "fsgrpo/sft.hpp"
#include "fsgrpo/trainer.hpp"

namespace fsgrpo::commands {

namespace {

using nlohmann::json;

struct CliError : std::runtime_error {
  int code;
  CliError(int c, std::string msg) : std::runtime_error(std::move(msg)), code(c) {}
};

Tokenizer tokenizer_from_spec(const std::string& spec) {
  if (spec.empty() || spec == "whitespace") return Tokenizer::whitespace();
  if (spec.rfind("chars:", 0) == 0) {
    try {
      return Tokenizer::fixed_chars(std::stoi(spec.substr(6)));
    } catch (const std::exception&) {
      throw CliError(kExitInput, "bad tokenizer spec '" + spec + "'");
    }
  }
  throw CliError(kExitInput, "unknown tokenizer '" + spec + "' (use whitespace or chars:N)");
}

std::string tokenizer_to_spec(const Tokenizer& tok) {
  if (tok.mode == Tokenizer::Mode::whitespace) return "whitespace";
  return "chars:" + std::to_string(tok.chars_per_token);
}

// One parsed JSON line plus its 1-based line number for error messages.
struct JsonLine {
  int line_no;
  json value;
};

std::vector<JsonLine> read_jsonl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CliError(kExitRuntime, "cannot open input file: " + path);
  std::vector<JsonLine> lines;
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    if (raw.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    try {
      lines.push_back({line_no, json::parse(raw)});
    } catch (const json::parse_error& e) {
      throw CliError(kExitInput, path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return lines;
}

std::string join_path(const std::string& dir, const std::string& name) {
  if (dir.empty() || dir == ".") return name;
  return dir + "/" + name;
}

json reward_to_json(const RewardConfig& cfg) {
  return json{{"format_bonus", cfg.format_bonus},
              {"length_tolerance", cfg.length_tolerance},
              {"group_size", cfg.group_size},
              {"total_steps", cfg.total_steps},
              {"kl_beta", cfg.kl_beta},
              {"clip_ratio", cfg.clip_ratio},
              {"diversity_enabled", cfg.diversity_enabled},
              {"adv_epsilon", cfg.adv_epsilon}};
}

RewardConfig reward_from_json(const json& j) {
  RewardConfig cfg;
  j.at("format_bonus").get_to(cfg.format_bonus);
  j.at("length_tolerance").get_to(cfg.length_tolerance);
  j.at("group_size").get_to(cfg.group_size);
  j.at("total_steps").get_to(cfg.total_steps);
  j.at("kl_beta").get_to(cfg.kl_beta);
  j.at("clip_ratio").get_to(cfg.clip_ratio);
  j.at("diversity_enabled").get_to(cfg.diversity_enabled);
  j.at("adv_epsilon").get_to(cfg.adv_epsilon);
  return cfg;
}

json trainer_to_json(const TrainerConfig& cfg) {
  json j = reward_to_json(cfg.reward);
  j["batch_size"] = cfg.batch_size;
  j["learning_rate"] = cfg.learning_rate;
  j["kl_mode"] = cfg.kl_mode == KlMode::exact ? "exact" : "estimator";
  j["seed"] = cfg.seed;
  return j;
}

TrainerConfig trainer_from_json(const json& j) {
  TrainerConfig cfg;
  cfg.reward = reward_from_json(j);
  j.at("batch_size").get_to(cfg.batch_size);
  j.at("learning_rate").get_to(cfg.learning_rate);
  cfg.kl_mode = j.at("kl_mode").get<std::string>() == "estimator" ? KlMode::estimator
                                                                  : KlMode::exact;
  cfg.seed = j.at("seed").get<std::uint64_t>();
  return cfg;
}

json classes_to_json(const std::vector<TaskClassSpec>& classes) {
  json arr = json::array();
  for (const auto& c : classes) {
    arr.push_back(json{{"name", c.name},
                       {"p_correct", c.p_correct},
                       {"tok_mean", c.tok_mean},
                       {"tok_jitter", c.tok_jitter},
                       {"weight", c.mixture_weight}});
  }
  return arr;
}

std::vector<TaskClassSpec> classes_from_json(const json& arr) {
  std::vector<TaskClassSpec> classes;
  for (const auto& j : arr) {
    TaskClassSpec c;
    j.at("name").get_to(c.name);
    j.at("p_correct").get_to(c.p_correct);
    j.at("tok_mean").get_to(c.tok_mean);
    j.at("tok_jitter").get_to(c.tok_jitter);
    j.at("weight").get_to(c.mixture_weight);
    classes.push_back(std::move(c));
  }
  return classes;
}

void write_manifest(const std::string& out_dir, const std::string& command,
                    std::uint64_t seed, const json& config, const json& outputs) {
  json manifest{{"command", command},
                {"version", kVersion},
                {"seed", seed},
                {"config", config},
                {"out_dir", out_dir},
                {"outputs", outputs}};
  write_file_atomic(join_path(out_dir, "manifest.json"), manifest.dump(2) + "\n");
}

std::string id_to_string(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  if (v.is_number_unsigned()) return std::to_string(v.get<unsigned long long>());
  throw CliError(kExitInput, "record id must be a string or an integer");
}

// ---------------------------------------------------------------- reward-eval

struct RewardEvalResolved {
  std::string input_path;
  int step = 0;
  Tokenizer tokenizer;
  RewardConfig reward;
};

int run_reward_eval(const RewardEvalResolved& r, const std::string& out_dir,
                    std::uint64_t seed, bool quiet) {
  r.reward.validate();
  const auto lines = read_jsonl(r.input_path);

  std::string out;
  std::size_t n_groups = 0;
  std::size_t n_rollouts = 0;
  std::size_t n_malformed = 0;
  double reward_sum = 0.0;
  std::vector<RolloutStat> stats;

  for (const auto& [line_no, group] : lines) {
    auto fail = [&, ln = line_no](const std::string& msg) -> CliError {
      return CliError(kExitInput, r.input_path + ":" + std::to_string(ln) + ": " + msg);
    };
    if (!group.is_object() || !group.contains("rollouts") || !group["rollouts"].is_array()) {
      throw fail("expected an object with a 'rollouts' array");
    }
    const auto& rollouts = group["rollouts"];
    if (rollouts.size() < 2) throw fail("a group needs at least 2 rollouts");

    const int step = group.value("step", r.step);
    std::vector<RolloutOutcome> outcomes;
    outcomes.reserve(rollouts.size());
    std::vector<json> mirrored;
    mirrored.reserve(rollouts.size());

    for (const auto& roll : rollouts) {
      if (!roll.is_object() || !roll.contains("text") || !roll["text"].is_string() ||
          !roll.contains("correct") || !roll["correct"].is_boolean()) {
        throw fail("each rollout needs a string 'text' and a boolean 'correct'");
      }
      const std::string text = roll["text"].get<std::string>();
      RolloutOutcome o;
      o.correct = roll["correct"].get<bool>();
      const auto parsed = parse_response(text, r.tokenizer);
      if (parsed.ok()) {
        o.format = parsed.response->format;
      } else {
        ++n_malformed;
        if (!quiet) {
          std::cerr << "warning: " << r.input_path << ":" << line_no
                    << ": unparseable rollout (" << parsed.error->message
                    << "), scoring with the malformed penalty\n";
        }
      }
      if (roll.contains("n_tok")) {
        if (!roll["n_tok"].is_number_integer() || roll["n_tok"].get<long long>() < 0) {
          throw fail("'n_tok' must be a nonnegative integer");
        }
        o.n_tok = roll["n_tok"].get<int>();
      } else {
        o.n_tok = count_tokens(text, r.tokenizer);
      }
      outcomes.push_back(o);
      mirrored.push_back(roll);
    }

    const auto scores = score_group(outcomes, step, r.reward);
    json out_group = group;
    out_group["step"] = step;
    json out_rollouts = json::array();
    for (std::size_t i = 0; i < scores.size(); ++i) {
      json roll = mirrored[i];
      const auto& s = scores[i];
      roll["n_tok"] = s.n_tok;
      roll["format"] = s.format ? json(format_name(*s.format)) : json(nullptr);
      roll["r_format"] = s.r_format;
      roll["r_div"] = s.r_div;
      roll["s_L"] = s.s_l;
      roll["r_total"] = s.r_total;
      roll["advantage"] = s.advantage;
      out_rollouts.push_back(std::move(roll));
      reward_sum += s.r_total;
      if (s.format) stats.push_back({*s.format, s.correct, s.n_tok});
      ++n_rollouts;
    }
    out_group["rollouts"] = std::move(out_rollouts);
    out += out_group.dump();
    out += "\n";
    ++n_groups;
  }

  write_file_atomic(join_path(out_dir, "scored.jsonl"), out);
  write_manifest(out_dir, "reward-eval", seed,
                 json{{"input", r.input_path},
                      {"step", r.step},
                      {"tokenizer", tokenizer_to_spec(r.tokenizer)},
                      {"reward", reward_to_json(r.reward)}},
                 json{{"scored", "scored.jsonl"}});

  if (!quiet) {
    const auto rep = format_report(stats);
    std::printf("groups            %zu\n", n_groups);
    std::printf("rollouts          %zu\n", n_rollouts);
    std::printf("malformed         %zu\n", n_malformed);
    std::printf("mean reward       %s\n",
                n_rollouts ? format_double(reward_sum / static_cast<double>(n_rollouts)).c_str()
                           : "n/a");
    for (int k = 1; k <= 3; ++k) {
      const auto ks = static_cast<std::size_t>(k - 1);
      std::printf("%-17s usage %.3f  acc %s\n",
                  std::string(format_name(format_from_index(k))).c_str(), rep.usage[ks],
                  rep.accuracy[ks] ? format_double(*rep.accuracy[ks]).c_str() : "-");
    }
  }
  return kExitOk;
}

// ------------------------------------------------------------------ train-sim

struct TrainSimResolved {
  TrainerConfig trainer;
  std::vector<TaskClassSpec> classes;
};

std::string history_csv(const TrainHistory& history) {
  std::string csv =
      "step,mean_reward,mean_format_reward,accuracy,mean_len,max_len,"
      "usage_full,usage_perception_only,usage_direct,surrogate,mean_kl\n";
  for (const auto& r : history.steps) {
    csv += std::to_string(r.step);
    csv += ',';
    csv += format_double(r.mean_reward);
    csv += ',';
    csv += format_double(r.mean_format_reward);
    csv += ',';
    csv += format_double(r.accuracy);
    csv += ',';
    csv += format_double(r.mean_len);
    csv += ',';
    csv += std::to_string(r.max_len);
    csv += ',';
    csv += format_double(r.format_usage[0]);
    csv += ',';
    csv += format_double(r.format_usage[1]);
    csv += ',';
    csv += format_double(r.format_usage[2]);
    csv += ',';
    csv += format_double(r.surrogate);
    csv += ',';
    csv += format_double(r.mean_kl);
    csv += '\n';
  }
  return csv;
}

int run_train_sim(const TrainSimResolved& r, const std::string& out_dir, bool quiet) {
  r.trainer.validate();
  const Environment env(r.classes);
  const TrainResult result = train(r.trainer, env);

  write_file_atomic(join_path(out_dir, "history.csv"), history_csv(result.history));

  // Per-class report: exact policy distribution, oracle comparison at the end
  // of the schedule, and a seeded evaluation pass with the trained policy.
  SplitMix64 eval_rng = SplitMix64(r.trainer.seed).split(3);
  const int eval_rollouts = 200;
  json classes_report = json::array();
  for (int c = 0; c < env.n_classes(); ++c) {
    const auto dist = policy_format_distribution(result.params, c);
    int argmax = 0;
    for (int j = 1; j < 3; ++j) {
      if (dist[static_cast<std::size_t>(j)] > dist[static_cast<std::size_t>(argmax)]) argmax = j;
    }

    json oracle;
    ResponseFormat oracle_best = ResponseFormat::full;
    double best_v = -1e300;
    // Zero-step runs still get a report; clamp the schedule so the decay
    // contract holds (at t = T the diversity term vanishes either way).
    RewardConfig oracle_cfg = r.trainer.reward;
    if (oracle_cfg.total_steps < 1) oracle_cfg.total_steps = 1;
    for (int k = 1; k <= 3; ++k) {
      const auto fmt = format_from_index(k);
      const double v = env.expected_reward_oracle(c, fmt, oracle_cfg,
                                                  oracle_cfg.total_steps, dist);
      oracle[std::string(format_name(fmt))] = v;
      if (v > best_v) {
        best_v = v;
        oracle_best = fmt;
      }
    }

    std::vector<RolloutStat> stats;
    stats.reserve(static_cast<std::size_t>(eval_rollouts));
    for (int i = 0; i < eval_rollouts; ++i) {
      const double u = eval_rng.next_double();
      int fmt_token = 2;
      double acc = 0.0;
      for (int j = 0; j < 3; ++j) {
        acc += dist[static_cast<std::size_t>(j)];
        if (u < acc) {
          fmt_token = j;
          break;
        }
      }
      const auto fmt = format_from_index(fmt_token + 1);
      const SyntheticTask task{i, c, 0};
      const int n_tok = env.sample_token_count(c, fmt, eval_rng);
      const bool correct = env.judge(task, fmt, eval_rng);
      stats.push_back({fmt, correct, n_tok});
    }
    const auto rep = format_report(stats);

    json eval{{"rollouts", eval_rollouts},
              {"usage",
               {{"full", rep.usage[0]},
                {"perception_only", rep.usage[1]},
                {"direct", rep.usage[2]}}},
              {"overall_accuracy", rep.overall_accuracy},
              {"mean_tokens", rep.mean_tokens}};

    classes_report.push_back(
        json{{"name", env.classes()[static_cast<std::size_t>(c)].name},
             {"policy_distribution",
              {{"full", dist[0]}, {"perception_only", dist[1]}, {"direct", dist[2]}}},
             {"policy_argmax", format_name(format_from_index(argmax + 1))},
             {"oracle_expected_reward", oracle},
             {"oracle_argmax", format_name(oracle_best)},
             {"eval", eval}});
  }

  const auto collapse = detect_collapse(result.history);
  json report{{"diverged", result.diverged},
              {"steps_completed", result.steps_completed},
              {"collapse", collapse ? json{{"format", format_name(collapse->format)},
                                           {"onset_step", collapse->onset_step}}
                                    : json(nullptr)},
              {"classes", classes_report}};
  write_file_atomic(join_path(out_dir, "format_report.json"), report.dump(2) + "\n");

  write_manifest(out_dir, "train-sim", r.trainer.seed,
                 json{{"trainer", trainer_to_json(r.trainer)},
                      {"classes", classes_to_json(r.classes)}},
                 json{{"history", "history.csv"}, {"report", "format_report.json"}});

  if (!quiet) {
    std::printf("steps completed   %d\n", result.steps_completed);
    if (!result.history.steps.empty()) {
      const auto& last = result.history.steps.back();
      std::printf("final mean reward %s\n", format_double(last.mean_reward).c_str());
      std::printf("final accuracy    %s\n", format_double(last.accuracy).c_str());
      std::printf("final usage       full %.3f  perception_only %.3f  direct %.3f\n",
                  last.format_usage[0], last.format_usage[1], last.format_usage[2]);
    }
    if (collapse) {
      std::printf("collapse          %s at step %d\n",
                  std::string(format_name(collapse->format)).c_str(), collapse->onset_step);
    }
  }

  if (result.diverged) {
    std::cerr << "error: objective became non-finite at step " << result.steps_completed
              << "; partial history flushed\n";
    return kExitRuntime;
  }
  return kExitOk;
}

// ------------------------------------------------------------------- diagnose

struct DiagnoseResolved {
  std::string input_path;
  bool compress = false;
  bool csv = false;
  Tokenizer tokenizer;
};

int run_diagnose(const DiagnoseResolved& r, const std::string& out_dir, std::uint64_t seed,
                 bool quiet) {
  const auto lines = read_jsonl(r.input_path);
  std::vector<OverthinkingRecord> records;
  records.reserve(lines.size());
  for (const auto& [line_no, j] : lines) {
    auto fail = [&, ln = line_no](const std::string& msg) -> CliError {
      return CliError(kExitInput, r.input_path + ":" + std::to_string(ln) + ": " + msg);
    };
    if (!j.is_object() || !j.contains("original") || !j["original"].is_string() ||
        !j.contains("correct_original") || !j["correct_original"].is_boolean()) {
      throw fail("expected an object with string 'original' and boolean 'correct_original'");
    }
    OverthinkingRecord rec;
    rec.question = j.value("question", std::string{});
    rec.original = j["original"].get<std::string>();
    rec.correct_original = j["correct_original"].get<bool>();
    if (j.contains("compressed")) {
      if (!j["compressed"].is_string()) throw fail("'compressed' must be a string");
      rec.compressed = j["compressed"].get<std::string>();
    }
    if (j.contains("correct_compressed")) {
      if (!j["correct_compressed"].is_boolean()) {
        throw fail("'correct_compressed' must be a boolean");
      }
      rec.correct_compressed = j["correct_compressed"].get<bool>();
    }
    records.push_back(std::move(rec));
  }

  TruncatingCompressor stub;
  const auto report = score_corpus(records, r.tokenizer, r.compress ? &stub : nullptr);

  json reasons = json::object();
  for (const auto& [reason, count] : report.ineligible_reasons) reasons[reason] = count;
  json j{{"eligible", report.eligible},
         {"ineligible", report.ineligible},
         {"ineligible_reasons", reasons},
         {"histogram",
          {{"below_1", {{"count", report.histogram.below}, {"fraction", report.histogram.frac_below}}},
           {"1_to_3", {{"count", report.histogram.mid}, {"fraction", report.histogram.frac_mid}}},
           {"above_3", {{"count", report.histogram.above}, {"fraction", report.histogram.frac_above}}}}},
         {"anomalies", report.anomaly_indices},
         {"scores", report.scores}};
  write_file_atomic(join_path(out_dir, "overthinking.json"), j.dump(2) + "\n");

  std::ostringstream table;
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%-12s %10s %10s\n", "bucket", "count", "fraction");
  table << buf;
  std::snprintf(buf, sizeof(buf), "%-12s %10zu %10.4f\n", "score<1", report.histogram.below,
                report.histogram.frac_below);
  table << buf;
  std::snprintf(buf, sizeof(buf), "%-12s %10zu %10.4f\n", "1<=score<=3", report.histogram.mid,
                report.histogram.frac_mid);
  table << buf;
  std::snprintf(buf, sizeof(buf), "%-12s %10zu %10.4f\n", "score>3", report.histogram.above,
                report.histogram.frac_above);
  table << buf;
  std::snprintf(buf, sizeof(buf), "eligible %zu, ineligible %zu, anomalies %zu\n",
                report.eligible, report.ineligible, report.anomaly_indices.size());
  table << buf;
  // display-only context, never a test target: bucket shares measured on a
  // stock 4B thinking model (<1 implied by the other two)
  table << "reference audit for comparison: score<1 22.8%, 1..3 41.8%, >3 35.4%\n";
  write_file_atomic(join_path(out_dir, "overthinking.txt"), table.str());

  json outputs{{"report", "overthinking.json"}, {"table", "overthinking.txt"}};
  if (r.csv) {
    std::string csv = "bucket,count,fraction\n";
    csv += "below_1," + std::to_string(report.histogram.below) + "," +
           format_double(report.histogram.frac_below) + "\n";
    csv += "1_to_3," + std::to_string(report.histogram.mid) + "," +
           format_double(report.histogram.frac_mid) + "\n";
    csv += "above_3," + std::to_string(report.histogram.above) + "," +
           format_double(report.histogram.frac_above) + "\n";
    write_file_atomic(join_path(out_dir, "buckets.csv"), csv);
    outputs["buckets"] = "buckets.csv";
  }

  write_manifest(out_dir, "diagnose", seed,
                 json{{"input", r.input_path},
                      {"compress", r.compress},
                      {"csv", r.csv},
                      {"tokenizer", tokenizer_to_spec(r.tokenizer)}},
                 outputs);

  if (!quiet) std::fputs(table.str().c_str(), stdout);
  return kExitOk;
}

// ------------------------------------------------------------------ build-sft

struct BuildSftResolved {
  std::string input_path;
  std::string out_name;
  std::string reject_name;
  int max_tokens = 2048;
  Tokenizer tokenizer;
};

// Verdicts embedded in the input records; the offline stand-in for live
// restricted-input model calls.
class JsonVerdictOracle : public VerdictOracle {
 public:
  void put(const std::string& id, OracleVerdicts v) { verdicts_[id] = v; }
  OracleVerdicts verdicts(const RawSample& sample) override {
    const auto it = verdicts_.find(sample.id);
    if (it == verdicts_.end()) throw std::runtime_error("no verdicts for sample " + sample.id);
    return it->second;
  }

 private:
  std::map<std::string, OracleVerdicts> verdicts_;
};

int run_build_sft(const BuildSftResolved& r, const std::string& out_dir, std::uint64_t seed,
                  bool quiet) {
  const auto lines = read_jsonl(r.input_path);
  std::vector<RawSample> samples;
  JsonVerdictOracle oracle;
  for (const auto& [line_no, j] : lines) {
    auto fail = [&, ln = line_no](const std::string& msg) -> CliError {
      return CliError(kExitInput, r.input_path + ":" + std::to_string(ln) + ": " + msg);
    };
    if (!j.is_object() || !j.contains("id") || !j.contains("full_response") ||
        !j["full_response"].is_string() || !j.contains("verdicts") || !j["verdicts"].is_object()) {
      throw fail("expected an object with 'id', 'full_response' and a 'verdicts' object");
    }
    RawSample s;
    s.id = id_to_string(j["id"]);
    s.question = j.value("question", std::string{});
    s.full_response = j["full_response"].get<std::string>();
    const auto& v = j["verdicts"];
    for (const char* key : {"generation_correct", "perception_only_pass", "direct_answer_pass"}) {
      if (!v.contains(key) || !v[key].is_boolean()) {
        throw fail(std::string("verdicts need boolean '") + key + "'");
      }
    }
    oracle.put(s.id, {v["generation_correct"].get<bool>(),
                      v["perception_only_pass"].get<bool>(),
                      v["direct_answer_pass"].get<bool>()});
    samples.push_back(std::move(s));
  }

  SftBuildOptions options;
  options.tokenizer = r.tokenizer;
  options.max_tokens = r.max_tokens;
  const auto result = build_records(samples, oracle, options);

  std::string records_out;
  for (const auto& rec : result.records) {
    records_out += json{{"id", rec.question_id},
                        {"format", format_name(rec.format)},
                        {"response", rec.response},
                        {"provenance", rec.provenance}}
                       .dump();
    records_out += "\n";
  }
  std::string rejects_out;
  for (const auto& rej : result.rejections) {
    rejects_out += json{{"id", rej.id}, {"reason", rej.reason}}.dump();
    rejects_out += "\n";
  }
  write_file_atomic(join_path(out_dir, r.out_name), records_out);
  write_file_atomic(join_path(out_dir, r.reject_name), rejects_out);

  write_manifest(out_dir, "build-sft", seed,
                 json{{"input", r.input_path},
                      {"out_name", r.out_name},
                      {"reject_name", r.reject_name},
                      {"max_tokens", r.max_tokens},
                      {"tokenizer", tokenizer_to_spec(r.tokenizer)}},
                 json{{"records", r.out_name}, {"rejections", r.reject_name}});

  if (!quiet) {
    std::printf("records    %zu\n", result.records.size());
    std::printf("rejections %zu\n", result.rejections.size());
  }
  return kExitOk;
}

// --------------------------------------------------------------------- report

struct ReportResolved {
  std::string input_path;
  Tokenizer tokenizer;
};

int run_report(const ReportResolved& r, const std::string& out_dir, std::uint64_t seed,
               bool quiet) {
  const auto lines = read_jsonl(r.input_path);
  std::vector<RolloutStat> stats;
  std::size_t malformed = 0;
  for (const auto& [line_no, j] : lines) {
    auto fail = [&, ln = line_no](const std::string& msg) -> CliError {
      return CliError(kExitInput, r.input_path + ":" + std::to_string(ln) + ": " + msg);
    };
    if (!j.is_object() || !j.contains("correct") || !j["correct"].is_boolean()) {
      throw fail("expected an object with a boolean 'correct'");
    }
    RolloutStat s;
    s.correct = j["correct"].get<bool>();
    if (j.contains("format")) {
      const auto fmt = format_from_name(j["format"].get<std::string>());
      if (!fmt) throw fail("unknown format name");
      s.format = *fmt;
      if (!j.contains("n_tok") || !j["n_tok"].is_number_integer()) {
        throw fail("records with an explicit format need an integer 'n_tok'");
      }
      s.n_tok = j["n_tok"].get<int>();
    } else if (j.contains("text") && j["text"].is_string()) {
      const std::string text = j["text"].get<std::string>();
      const auto parsed = parse_response(text, r.tokenizer);
      if (!parsed.ok()) {
        ++malformed;
        continue;
      }
      s.format = parsed.response->format;
      s.n_tok = j.contains("n_tok") && j["n_tok"].is_number_integer()
                    ? j["n_tok"].get<int>()
                    : parsed.response->token_count;
    } else {
      throw fail("each record needs either 'format' + 'n_tok' or 'text'");
    }
    stats.push_back(s);
  }

  const auto rep = format_report(stats);
  json usage, accuracy, correct_share;
  for (int k = 1; k <= 3; ++k) {
    const auto name = std::string(format_name(format_from_index(k)));
    const auto ks = static_cast<std::size_t>(k - 1);
    usage[name] = rep.usage[ks];
    accuracy[name] = rep.accuracy[ks] ? json(*rep.accuracy[ks]) : json(nullptr);
    correct_share[name] = rep.correct_share[ks];
  }
  json j{{"total", rep.total},
         {"malformed", malformed},
         {"usage", usage},
         {"accuracy", accuracy},
         {"correct_share", correct_share},
         {"overall_accuracy", rep.overall_accuracy},
         {"mean_tokens", rep.mean_tokens}};
  write_file_atomic(join_path(out_dir, "format_report.json"), j.dump(2) + "\n");

  std::ostringstream table;
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%-17s %8s %8s %13s\n", "format", "usage", "acc",
                "correct_share");
  table << buf;
  for (int k = 1; k <= 3; ++k) {
    const auto ks = static_cast<std::size_t>(k - 1);
    std::string acc = rep.accuracy[ks] ? format_double(*rep.accuracy[ks]) : "-";
    std::snprintf(buf, sizeof(buf), "%-17s %8.4f %8s %13.4f\n",
                  std::string(format_name(format_from_index(k))).c_str(), rep.usage[ks],
                  acc.c_str(), rep.correct_share[ks]);
    table << buf;
  }
  std::snprintf(buf, sizeof(buf), "total %zu (malformed %zu), overall acc %.4f, mean tokens %.2f\n",
                rep.total, malformed, rep.overall_accuracy, rep.mean_tokens);
  table << buf;
  write_file_atomic(join_path(out_dir, "format_report.txt"), table.str());

  write_manifest(out_dir, "report", seed,
                 json{{"input", r.input_path}, {"tokenizer", tokenizer_to_spec(r.tokenizer)}},
                 json{{"report", "format_report.json"}, {"table", "format_report.txt"}});

  if (!quiet) std::fputs(table.str().c_str(), stdout);
  return kExitOk;
}

int guard(const std::function<int()>& body) {
  try {
    return body();
  } catch (const CliError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace

int cmd_reward_eval(const RewardEvalOptions& opts) {
  return guard([&] {
    RewardEvalResolved r;
    r.input_path = opts.input_path;
    r.step = opts.step;
    r.tokenizer = tokenizer_from_spec(opts.tokenizer);
    if (!opts.config_path.empty()) {
      TrainerConfig scratch;
      apply_trainer_config(scratch, load_config_file(opts.config_path));
      r.reward = scratch.reward;
    }
    return run_reward_eval(r, opts.out_dir, opts.seed, opts.quiet);
  });
}

int cmd_train_sim(const TrainSimOptions& opts) {
  return guard([&] {
    TrainSimResolved r;
    r.classes = default_specs();
    if (!opts.config_path.empty()) {
      const auto cfg = load_config_file(opts.config_path);
      apply_trainer_config(r.trainer, cfg);
      r.classes = apply_env_config(std::move(r.classes), cfg);
    }
    if (!opts.env_config_path.empty()) {
      r.classes = apply_env_config(std::move(r.classes), load_config_file(opts.env_config_path));
    }
    if (opts.steps) r.trainer.reward.total_steps = *opts.steps;
    if (opts.seed) r.trainer.seed = *opts.seed;
    if (opts.diversity) r.trainer.reward.diversity_enabled = *opts.diversity;
    if (opts.learning_rate) r.trainer.learning_rate = *opts.learning_rate;
    if (opts.batch_size) r.trainer.batch_size = *opts.batch_size;
    if (opts.group_size) r.trainer.reward.group_size = *opts.group_size;
    if (opts.kl_mode) {
      if (*opts.kl_mode == "exact") {
        r.trainer.kl_mode = KlMode::exact;
      } else if (*opts.kl_mode == "estimator") {
        r.trainer.kl_mode = KlMode::estimator;
      } else {
        throw CliError(kExitInput, "kl mode must be 'exact' or 'estimator'");
      }
    }
    return run_train_sim(r, opts.out_dir, opts.quiet);
  });
}

int cmd_diagnose(const DiagnoseOptions& opts) {
  return guard([&] {
    DiagnoseResolved r;
    r.input_path = opts.input_path;
    r.compress = opts.compress;
    r.csv = opts.csv;
    r.tokenizer = tokenizer_from_spec(opts.tokenizer);
    return run_diagnose(r, opts.out_dir, opts.seed, opts.quiet);
  });
}

int cmd_build_sft(const BuildSftOptions& opts) {
  return guard([&] {
    BuildSftResolved r;
    r.input_path = opts.input_path;
    r.out_name = opts.out_path.empty() ? "sft_records.jsonl" : opts.out_path;
    r.reject_name = opts.reject_log_path.empty() ? "rejections.jsonl" : opts.reject_log_path;
    r.max_tokens = opts.max_tokens;
    r.tokenizer = tokenizer_from_spec(opts.tokenizer);
    return run_build_sft(r, opts.out_dir, opts.seed, opts.quiet);
  });
}

int cmd_report(const ReportOptions& opts) {
  return guard([&] {
    ReportResolved r;
    r.input_path = opts.input_path;
    r.tokenizer = tokenizer_from_spec(opts.tokenizer);
    return run_report(r, opts.out_dir, opts.seed, opts.quiet);
  });
}

int cmd_rerun(const RerunOptions& opts) {
  return guard([&] {
    json manifest;
    try {
      manifest = json::parse(read_file(opts.manifest_path));
    } catch (const json::parse_error& e) {
      throw CliError(kExitInput, opts.manifest_path + ": " + e.what());
    }
    const std::string command = manifest.at("command").get<std::string>();
    const std::uint64_t seed = manifest.at("seed").get<std::uint64_t>();
    const json& config = manifest.at("config");

    if (command == "train-sim") {
      TrainSimResolved r;
      r.trainer = trainer_from_json(config.at("trainer"));
      r.classes = classes_from_json(config.at("classes"));
      return run_train_sim(r, opts.out_dir, opts.quiet);
    }
    if (command == "reward-eval") {
      RewardEvalResolved r;
      r.input_path = config.at("input").get<std::string>();
      r.step = config.at("step").get<int>();
      r.tokenizer = tokenizer_from_spec(config.at("tokenizer").get<std::string>());
      r.reward = reward_from_json(config.at("reward"));
      return run_reward_eval(r, opts.out_dir, seed, opts.quiet);
    }
    if (command == "diagnose") {
      DiagnoseResolved r;
      r.input_path = config.at("input").get<std::string>();
      r.compress = config.at("compress").get<bool>();
      r.csv = config.at("csv").get<bool>();
      r.tokenizer = tokenizer_from_spec(config.at("tokenizer").get<std::string>());
      return run_diagnose(r, opts.out_dir, seed, opts.quiet);
    }
    if (command == "build-sft") {
      BuildSftResolved r;
      r.input_path = config.at("input").get<std::string>();
      r.out_name = config.at("out_name").get<std::string>();
      r.reject_name = config.at("reject_name").get<std::string>();
      r.max_tokens = config.at("max_tokens").get<int>();
      r.tokenizer = tokenizer_from_spec(config.at("tokenizer").get<std::string>());
      return run_build_sft(r, opts.out_dir, seed, opts.quiet);
    }
    if (command == "report") {
      ReportResolved r;
      r.input_path = config.at("input").get<std::string>();
      r.tokenizer = tokenizer_from_spec(config.at("tokenizer").get<std::string>());
      return run_report(r, opts.out_dir, seed, opts.quiet);
    }
    throw CliError(kExitInput, "manifest names an unknown command '" + command + "'");
  });
}

}  // namespace fsgrpo::commands
