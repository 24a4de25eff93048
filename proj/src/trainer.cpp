#include "fsgrpo/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fsgrpo {

void TrainerConfig::validate() const {
  // A zero-step schedule is a legal no-op; rewards are never computed, so
  // the T >= 1 requirement only applies to runs that actually step.
  RewardConfig r = reward;
  if (r.total_steps == 0) r.total_steps = 1;
  r.validate();
  if (reward.total_steps < 0) throw std::invalid_argument("total_steps must be nonnegative");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be at least 1");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be positive");
}

std::array<double, 3> policy_format_distribution(const PolicyParams& params, int class_id) {
  if (class_id < 0 || class_id >= params.n_classes()) {
    throw std::out_of_range("class id outside the format head");
  }
  const auto& row = params.format_head[static_cast<std::size_t>(class_id)];
  const double m = std::max({row[0], row[1], row[2]});
  std::array<double, 3> out{};
  double sum = 0.0;
  for (int j = 0; j < 3; ++j) {
    out[static_cast<std::size_t>(j)] = std::exp(row[static_cast<std::size_t>(j)] - m);
    sum += out[static_cast<std::size_t>(j)];
  }
  for (auto& v : out) v /= sum;
  return out;
}

TrainResult train(const TrainerConfig& cfg, const Environment& env) {
  cfg.validate();

  TrainResult result;
  result.params = PolicyParams::zeros(env.n_classes());
  result.ref = result.params;

  SplitMix64 master(cfg.seed);
  SplitMix64 rng_tasks = master.split(1);
  SplitMix64 rng_rollouts = master.split(2);

  const int total_steps = cfg.reward.total_steps;
  const double lr = cfg.learning_rate;
  int task_counter = 0;

  for (int t = 0; t < total_steps; ++t) {
    // The behavior policy is this step's snapshot; one update per batch, so
    // ratios sit at 1 during the ascent step and the clip stays inactive.
    const PolicyParams old_params = result.params;

    std::vector<RolloutGroup> groups;
    groups.reserve(static_cast<std::size_t>(cfg.batch_size));
    for (int b = 0; b < cfg.batch_size; ++b) {
      const int class_id = env.sample_class(rng_tasks);
      const SyntheticTask task{task_counter++, class_id, rng_tasks.next_u64()};
      groups.push_back(sample_group(old_params, result.ref, task, cfg.reward.group_size,
                                    env, rng_rollouts));
    }

    TrainStepRecord rec;
    rec.step = t;
    int n_rollouts = 0;
    int n_correct = 0;
    double reward_sum = 0.0;
    double format_reward_sum = 0.0;
    double len_sum = 0.0;
    std::array<int, 3> usage_counts{0, 0, 0};

    for (auto& group : groups) {
      std::vector<RolloutOutcome> outcomes;
      outcomes.reserve(group.rollouts.size());
      for (const auto& traj : group.rollouts) {
        outcomes.push_back({traj.format, traj.correct, traj.n_tok});
      }
      const auto scores = score_group(outcomes, t, cfg.reward);
      group.rewards.clear();
      group.advantages.clear();
      for (const auto& s : scores) {
        group.rewards.push_back(s.r_total);
        group.advantages.push_back(s.advantage);
        reward_sum += s.r_total;
        format_reward_sum += s.s_l * s.r_format;
        n_correct += s.correct ? 1 : 0;
        len_sum += s.n_tok;
        rec.max_len = std::max(rec.max_len, s.n_tok);
        usage_counts[static_cast<std::size_t>(format_index(*s.format) - 1)] += 1;
        ++n_rollouts;
      }
    }

    const auto sr = fs_grpo_surrogate(result.params, result.ref, groups, cfg.reward, cfg.kl_mode);
    if (!std::isfinite(sr.objective)) {
      result.diverged = true;
      break;
    }

    for (int c = 0; c < result.params.n_classes(); ++c) {
      const auto cs = static_cast<std::size_t>(c);
      for (int j = 0; j < 3; ++j) {
        const auto js = static_cast<std::size_t>(j);
        result.params.format_head[cs][js] += lr * sr.grad.format_head[cs][js];
      }
    }
    for (int k = 0; k < 3; ++k) {
      const auto ks = static_cast<std::size_t>(k);
      for (int j = 0; j < kContentVocab; ++j) {
        const auto js = static_cast<std::size_t>(j);
        result.params.content_head[ks][js] += lr * sr.grad.content_head[ks][js];
      }
    }

    const double inv_n = 1.0 / static_cast<double>(n_rollouts);
    rec.mean_reward = reward_sum * inv_n;
    rec.mean_format_reward = format_reward_sum * inv_n;
    rec.accuracy = static_cast<double>(n_correct) * inv_n;
    rec.mean_len = len_sum * inv_n;
    for (int j = 0; j < 3; ++j) {
      rec.format_usage[static_cast<std::size_t>(j)] =
          static_cast<double>(usage_counts[static_cast<std::size_t>(j)]) * inv_n;
    }
    rec.surrogate = sr.objective;
    rec.mean_kl = sr.mean_kl;
    result.history.steps.push_back(rec);
    result.steps_completed = t + 1;
  }

  return result;
}

}  // namespace fsgrpo
