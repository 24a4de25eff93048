#include <cstdint>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "fsgrpo/commands.hpp"

namespace cmd = fsgrpo::commands;

int main(int argc, char** argv) {
  CLI::App app{"format-selection GRPO laboratory"};
  app.require_subcommand(1);

  // Global knobs shared by every subcommand.
  std::uint64_t seed = 1;
  std::string config_path;
  std::string out_dir = ".";
  bool quiet = false;
  app.add_option("--seed", seed, "master seed; every stream derives from it")
      ->capture_default_str();
  app.add_option("--config", config_path, "key/value configuration file");
  app.add_option("--out-dir", out_dir, "directory for artifacts and the run manifest")
      ->capture_default_str();
  app.add_flag("--quiet", quiet, "suppress the stdout summary");
  app.fallthrough();

  // reward-eval
  auto* reward_eval = app.add_subcommand("reward-eval", "score rollout groups from JSON lines");
  cmd::RewardEvalOptions re;
  reward_eval->add_option("--in", re.input_path, "input JSON-lines file")->required();
  reward_eval->add_option("--step", re.step, "training step used when a record omits one")
      ->capture_default_str();
  reward_eval->add_option("--tokenizer", re.tokenizer, "whitespace or chars:N")
      ->capture_default_str();

  // train-sim
  auto* train_sim = app.add_subcommand("train-sim", "run the seeded FS-GRPO training loop");
  cmd::TrainSimOptions ts;
  std::optional<int> ts_steps, ts_batch, ts_group;
  std::optional<double> ts_lr;
  std::optional<std::string> ts_kl;
  std::string env_config_path;
  bool no_diversity = false;
  train_sim->add_option("--steps", ts_steps, "training steps T");
  train_sim->add_option("--batch-size", ts_batch, "prompts per step");
  train_sim->add_option("--group-size", ts_group, "rollouts per prompt G");
  train_sim->add_option("--lr", ts_lr, "ascent step size");
  train_sim->add_option("--kl", ts_kl, "exact or estimator");
  train_sim->add_option("--env-config", env_config_path, "task class overrides");
  train_sim->add_flag("--no-diversity", no_diversity, "train with the ablated reward");

  // diagnose
  auto* diagnose = app.add_subcommand("diagnose", "overthinking-score report over a corpus");
  cmd::DiagnoseOptions dg;
  diagnose->add_option("--in", dg.input_path, "corpus JSON-lines file")->required();
  diagnose->add_flag("--compress", dg.compress,
                     "fill missing compressed responses with the deterministic stub");
  diagnose->add_flag("--csv", dg.csv, "also write histogram buckets as CSV");
  diagnose->add_option("--tokenizer", dg.tokenizer, "whitespace or chars:N")
      ->capture_default_str();

  // build-sft
  auto* build_sft = app.add_subcommand("build-sft", "assign formats and emit SFT records");
  cmd::BuildSftOptions bs;
  build_sft->add_option("--in", bs.input_path, "samples JSON-lines file")->required();
  build_sft->add_option("--out", bs.out_path, "records file name (default sft_records.jsonl)");
  build_sft->add_option("--reject-log", bs.reject_log_path,
                        "rejection log file name (default rejections.jsonl)");
  build_sft->add_option("--max-tokens", bs.max_tokens, "quality filter token cap")
      ->capture_default_str();
  build_sft->add_option("--tokenizer", bs.tokenizer, "whitespace or chars:N")
      ->capture_default_str();

  // report
  auto* report = app.add_subcommand("report", "format usage and accuracy report");
  cmd::ReportOptions rp;
  report->add_option("--in", rp.input_path, "rollouts JSON-lines file")->required();
  report->add_option("--tokenizer", rp.tokenizer, "whitespace or chars:N")
      ->capture_default_str();

  // rerun
  auto* rerun = app.add_subcommand("rerun", "reproduce a run from its manifest");
  cmd::RerunOptions rr;
  rerun->add_option("--manifest", rr.manifest_path, "manifest.json of a previous run")
      ->required();

  CLI11_PARSE(app, argc, argv);

  if (reward_eval->parsed()) {
    re.config_path = config_path;
    re.out_dir = out_dir;
    re.seed = seed;
    re.quiet = quiet;
    return cmd::cmd_reward_eval(re);
  }
  if (train_sim->parsed()) {
    ts.config_path = config_path;
    ts.env_config_path = env_config_path;
    ts.out_dir = out_dir;
    ts.quiet = quiet;
    ts.steps = ts_steps;
    ts.batch_size = ts_batch;
    ts.group_size = ts_group;
    ts.learning_rate = ts_lr;
    ts.kl_mode = ts_kl;
    if (app.count("--seed") > 0) ts.seed = seed;
    if (no_diversity) ts.diversity = false;
    return cmd::cmd_train_sim(ts);
  }
  if (diagnose->parsed()) {
    dg.out_dir = out_dir;
    dg.seed = seed;
    dg.quiet = quiet;
    return cmd::cmd_diagnose(dg);
  }
  if (build_sft->parsed()) {
    bs.out_dir = out_dir;
    bs.seed = seed;
    bs.quiet = quiet;
    return cmd::cmd_build_sft(bs);
  }
  if (report->parsed()) {
    rp.out_dir = out_dir;
    rp.seed = seed;
    rp.quiet = quiet;
    return cmd::cmd_report(rp);
  }
  if (rerun->parsed()) {
    rr.out_dir = out_dir;
    rr.quiet = quiet;
    return cmd::cmd_rerun(rr);
  }
  return cmd::kExitInput;
}
