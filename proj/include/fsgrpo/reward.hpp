#pragma once

#include <array>
#include <optional>
#include <span>
#include <vector>

#include "fsgrpo/format.hpp"

namespace fsgrpo {

// All reward hyperparameters. Defaults follow the reference configuration:
// bonuses (0, 0.3, 0.5), token tolerance 300, groups of 8, KL coefficient
// 0.02 and clip ratio 0.2.
struct RewardConfig {
  std::array<double, 3> format_bonus{0.0, 0.3, 0.5};  // f_k, indexed by k-1
  int length_tolerance = 300;                         // L
  int group_size = 8;                                 // G
  int total_steps = 200;                              // T
  double kl_beta = 0.02;
  double clip_ratio = 0.2;
  bool diversity_enabled = true;
  double adv_epsilon = 1e-8;  // zero-variance guard in the advantage denominator

  double bonus(ResponseFormat k) const { return format_bonus[format_index(k) - 1]; }

  // Enforces f3 > f2 > f1 >= 0, L >= 1, G >= 2, T >= 1, beta >= 0,
  // clip ratio in (0,1) and adv_epsilon > 0. Throws std::invalid_argument.
  void validate() const;
};

// 1 + f_k when correct, -f_k otherwise.
double format_reward(bool correct, ResponseFormat k, const RewardConfig& cfg);

// Cosine decay d(t) = (1 + cos(pi t / T)) / 2. Requires 0 <= t <= T, T >= 1.
double decay_factor(int t, int total_steps);

// d(t) * (1 - counts[k] / G); zero when diversity is disabled.
// counts holds the per-format occupancy of the group, indexed by k-1.
// Requires counts[k] >= 1 and sum(counts) <= G (unparseable rollouts occupy
// no bucket, so the sum may fall short of the group size).
double diversity_reward(ResponseFormat k, const std::array<int, 3>& counts, int t,
                        const RewardConfig& cfg);

// 1 when n_tok <= L, else L / n_tok.
double length_scale(int n_tok, int length_tolerance);

// s_L * (r_format + r_div), or s_L * r_format with diversity disabled.
double total_reward(ResponseFormat k, bool correct, int n_tok,
                    const std::array<int, 3>& counts, int t, const RewardConfig& cfg);

// Group-standardized advantages (r - mean) / (population std + adv_epsilon).
// All-equal groups yield all-zero advantages. Requires at least 2 rewards.
std::vector<double> group_advantages(std::span<const double> rewards, double adv_epsilon);

// One rollout as seen by the scorer. format == nullopt marks a response that
// failed to parse; it occupies no format bucket and is scored with the
// harshest penalty r_format = -f3 regardless of the correctness flag.
struct RolloutOutcome {
  std::optional<ResponseFormat> format;
  bool correct = false;
  int n_tok = 0;
};

struct RolloutScore {
  std::optional<ResponseFormat> format;
  bool correct = false;
  int n_tok = 0;
  double r_format = 0.0;
  double r_div = 0.0;
  double s_l = 1.0;
  double r_total = 0.0;
  double advantage = 0.0;
};

// Scores one sampled group at training step t. The frequency denominator is
// the full group size (outcomes.size()), which overrides cfg.group_size so
// externally supplied groups of any size >= 2 score consistently.
std::vector<RolloutScore> score_group(std::span<const RolloutOutcome> outcomes, int t,
                                      const RewardConfig& cfg);

}  // namespace fsgrpo
