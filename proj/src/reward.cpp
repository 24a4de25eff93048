#include "fsgrpo/reward.hpp"

#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

namespace fsgrpo {

void RewardConfig::validate() const {
  const auto& f = format_bonus;
  if (!(f[0] >= 0.0 && f[1] > f[0] && f[2] > f[1])) {
    throw std::invalid_argument("format bonuses must satisfy f3 > f2 > f1 >= 0");
  }
  if (length_tolerance < 1) throw std::invalid_argument("length_tolerance must be positive");
  if (group_size < 2) throw std::invalid_argument("group_size must be at least 2");
  if (total_steps < 1) throw std::invalid_argument("total_steps must be at least 1");
  if (kl_beta < 0.0) throw std::invalid_argument("kl_beta must be nonnegative");
  if (!(clip_ratio > 0.0 && clip_ratio < 1.0)) {
    throw std::invalid_argument("clip_ratio must lie in (0, 1)");
  }
  if (!(adv_epsilon > 0.0)) throw std::invalid_argument("adv_epsilon must be positive");
}

double format_reward(bool correct, ResponseFormat k, const RewardConfig& cfg) {
  const double f = cfg.bonus(k);
  return correct ? 1.0 + f : -f;
}

double decay_factor(int t, int total_steps) {
  if (total_steps < 1) throw std::invalid_argument("total_steps must be at least 1");
  if (t < 0 || t > total_steps) throw std::invalid_argument("step index out of [0, T]");
  const double x = std::numbers::pi * static_cast<double>(t) / static_cast<double>(total_steps);
  return 0.5 * (1.0 + std::cos(x));
}

double diversity_reward(ResponseFormat k, const std::array<int, 3>& counts, int t,
                        const RewardConfig& cfg) {
  if (!cfg.diversity_enabled) return 0.0;
  const int own = counts[format_index(k) - 1];
  if (own < 1) throw std::invalid_argument("counts[k] must include the rollout itself");
  const int sum = counts[0] + counts[1] + counts[2];
  if (sum > cfg.group_size) throw std::invalid_argument("format counts exceed the group size");
  const double freq = static_cast<double>(own) / static_cast<double>(cfg.group_size);
  return decay_factor(t, cfg.total_steps) * (1.0 - freq);
}

double length_scale(int n_tok, int length_tolerance) {
  if (length_tolerance < 1) throw std::invalid_argument("length_tolerance must be positive");
  if (n_tok < 0) throw std::invalid_argument("n_tok must be nonnegative");
  if (n_tok <= length_tolerance) return 1.0;
  return static_cast<double>(length_tolerance) / static_cast<double>(n_tok);
}

double total_reward(ResponseFormat k, bool correct, int n_tok,
                    const std::array<int, 3>& counts, int t, const RewardConfig& cfg) {
  const double r_fmt = format_reward(correct, k, cfg);
  const double r_div = diversity_reward(k, counts, t, cfg);
  return length_scale(n_tok, cfg.length_tolerance) * (r_fmt + r_div);
}

std::vector<double> group_advantages(std::span<const double> rewards, double adv_epsilon) {
  if (rewards.size() < 2) throw std::invalid_argument("a group needs at least 2 rewards");
  const double n = static_cast<double>(rewards.size());
  const double mean = std::accumulate(rewards.begin(), rewards.end(), 0.0) / n;
  double var = 0.0;
  for (double r : rewards) {
    const double d = r - mean;
    var += d * d;
  }
  var /= n;  // population variance
  const double denom = std::sqrt(var) + adv_epsilon;
  std::vector<double> out;
  out.reserve(rewards.size());
  for (double r : rewards) out.push_back((r - mean) / denom);
  return out;
}

std::vector<RolloutScore> score_group(std::span<const RolloutOutcome> outcomes, int t,
                                      const RewardConfig& cfg) {
  if (outcomes.size() < 2) throw std::invalid_argument("a group needs at least 2 rollouts");

  RewardConfig local = cfg;
  local.group_size = static_cast<int>(outcomes.size());

  std::array<int, 3> counts{0, 0, 0};
  for (const auto& o : outcomes) {
    if (o.format) counts[format_index(*o.format) - 1] += 1;
  }

  std::vector<RolloutScore> scores;
  scores.reserve(outcomes.size());
  std::vector<double> totals;
  totals.reserve(outcomes.size());
  const double harshest = -local.format_bonus[2];

  for (const auto& o : outcomes) {
    RolloutScore s;
    s.format = o.format;
    s.correct = o.correct;
    s.n_tok = o.n_tok;
    s.s_l = length_scale(o.n_tok, local.length_tolerance);
    if (o.format) {
      s.r_format = format_reward(o.correct, *o.format, local);
      s.r_div = diversity_reward(*o.format, counts, t, local);
    } else {
      s.r_format = harshest;
      s.r_div = 0.0;
    }
    s.r_total = s.s_l * (s.r_format + s.r_div);
    totals.push_back(s.r_total);
    scores.push_back(std::move(s));
  }

  const std::vector<double> adv = group_advantages(totals, local.adv_epsilon);
  for (std::size_t i = 0; i < scores.size(); ++i) scores[i].advantage = adv[i];
  return scores;
}

}  // namespace fsgrpo
