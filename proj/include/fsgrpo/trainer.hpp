#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "fsgrpo/env.hpp"
#include "fsgrpo/policy.hpp"
#include "fsgrpo/reward.hpp"

namespace fsgrpo {

struct TrainerConfig {
  RewardConfig reward;       // reward.total_steps is the training horizon T
  int batch_size = 16;       // prompts per optimizer step
  double learning_rate = 6.0;
  KlMode kl_mode = KlMode::exact;
  std::uint64_t seed = 1;

  void validate() const;
};

struct TrainStepRecord {
  int step = 0;
  double mean_reward = 0.0;         // training signal, includes the diversity bonus
  double mean_format_reward = 0.0;  // s_L * r_format only, schedule-independent
  double accuracy = 0.0;
  double mean_len = 0.0;
  int max_len = 0;
  std::array<double, 3> format_usage{};  // fraction of batch rollouts per format
  double surrogate = 0.0;
  double mean_kl = 0.0;
};

struct TrainHistory {
  std::vector<TrainStepRecord> steps;
};

struct TrainResult {
  TrainHistory history;
  PolicyParams params;
  PolicyParams ref;
  bool diverged = false;
  int steps_completed = 0;
};

// FS-GRPO training loop: snapshot the policy, sample a batch of groups from
// the snapshot, score them at step t, standardize within groups, take one
// ascent step on the clipped surrogate, record a history row. Fully
// deterministic under cfg.seed. On a non-finite objective the loop stops and
// returns the partial history with diverged = true.
TrainResult train(const TrainerConfig& cfg, const Environment& env);

// Exact format distribution of the trained policy for one class.
std::array<double, 3> policy_format_distribution(const PolicyParams& params, int class_id);

}  // namespace fsgrpo
