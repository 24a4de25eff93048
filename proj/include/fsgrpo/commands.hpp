#pragma once

#include <cstdint>
#include <optional>
#include <string>

namespace fsgrpo::commands {

inline constexpr const char* kVersion = "0.1.0";

// Exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;  // divergence, IO failures
inline constexpr int kExitInput = 2;    // malformed input or configuration

struct RewardEvalOptions {
  std::string input_path;
  std::string config_path;
  std::string out_dir = ".";
  int step = 0;
  std::string tokenizer = "whitespace";  // "whitespace" or "chars:N"
  std::uint64_t seed = 1;
  bool quiet = false;
};

struct TrainSimOptions {
  std::string config_path;
  std::string env_config_path;
  std::string out_dir = ".";
  std::optional<int> steps;
  std::optional<std::uint64_t> seed;
  std::optional<bool> diversity;
  std::optional<double> learning_rate;
  std::optional<int> batch_size;
  std::optional<int> group_size;
  std::optional<std::string> kl_mode;
  bool quiet = false;
};

struct DiagnoseOptions {
  std::string input_path;
  std::string out_dir = ".";
  bool compress = false;  // fill missing compressed sides with the stub client
  bool csv = false;       // also emit the histogram buckets as CSV
  std::string tokenizer = "whitespace";
  std::uint64_t seed = 1;
  bool quiet = false;
};

struct BuildSftOptions {
  std::string input_path;
  std::string out_path;         // defaults to <out_dir>/sft_records.jsonl
  std::string reject_log_path;  // defaults to <out_dir>/rejections.jsonl
  std::string out_dir = ".";
  int max_tokens = 2048;
  std::string tokenizer = "whitespace";
  std::uint64_t seed = 1;
  bool quiet = false;
};

struct ReportOptions {
  std::string input_path;
  std::string out_dir = ".";
  std::string tokenizer = "whitespace";
  std::uint64_t seed = 1;
  bool quiet = false;
};

struct RerunOptions {
  std::string manifest_path;
  std::string out_dir = ".";
  bool quiet = false;
};

int cmd_reward_eval(const RewardEvalOptions& opts);
int cmd_train_sim(const TrainSimOptions& opts);
int cmd_diagnose(const DiagnoseOptions& opts);
int cmd_build_sft(const BuildSftOptions& opts);
int cmd_report(const ReportOptions& opts);
int cmd_rerun(const RerunOptions& opts);

}  // namespace fsgrpo::commands
