#include "fsgrpo/env.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fsgrpo {

void TaskClassSpec::validate() const {
  if (name.empty()) throw std::invalid_argument("task class needs a name");
  for (double p : p_correct) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw std::invalid_argument("p_correct entries must lie in [0, 1]");
    }
  }
  for (int m : tok_mean) {
    if (m < 1) throw std::invalid_argument("tok_mean entries must be positive");
  }
  for (int j : tok_jitter) {
    if (j < 0) throw std::invalid_argument("tok_jitter entries must be nonnegative");
  }
  if (!(tok_mean[0] >= tok_mean[1] && tok_mean[1] >= tok_mean[2])) {
    throw std::invalid_argument("tok_mean must be nonincreasing in k (full >= perception-only >= direct)");
  }
  if (!(mixture_weight >= 0.0)) throw std::invalid_argument("mixture_weight must be nonnegative");
}

std::vector<TaskClassSpec> default_specs() {
  return {
      {"perception_intensive", {0.752, 0.903, 0.862}, {500, 150, 10}, {100, 50, 3}, 1.0},
      {"reasoning_intensive", {0.437, 0.426, 0.354}, {240, 150, 10}, {60, 50, 3}, 1.0},
      {"general", {0.611, 0.592, 0.556}, {500, 150, 10}, {100, 50, 3}, 1.0},
  };
}

Environment::Environment(std::vector<TaskClassSpec> classes) : classes_(std::move(classes)) {
  if (classes_.empty()) throw std::invalid_argument("environment needs at least one class");
  for (const auto& c : classes_) {
    c.validate();
    total_weight_ += c.mixture_weight;
  }
  if (!(total_weight_ > 0.0)) throw std::invalid_argument("mixture weights sum to zero");
}

int Environment::sample_class(SplitMix64& rng) const {
  if (classes_.size() == 1) return 0;
  const double u = rng.next_double() * total_weight_;
  double acc = 0.0;
  for (std::size_t i = 0; i < classes_.size(); ++i) {
    acc += classes_[i].mixture_weight;
    if (u < acc) return static_cast<int>(i);
  }
  return static_cast<int>(classes_.size()) - 1;
}

bool Environment::judge(const SyntheticTask& task, ResponseFormat format,
                        SplitMix64& rng) const {
  const auto& spec = classes_.at(static_cast<std::size_t>(task.class_id));
  return rng.bernoulli(spec.p_correct[format_index(format) - 1]);
}

int Environment::sample_token_count(int class_id, ResponseFormat format,
                                    SplitMix64& rng) const {
  const auto& spec = classes_.at(static_cast<std::size_t>(class_id));
  const int k = format_index(format) - 1;
  const int draw = rng.uniform_int(spec.tok_mean[k] - spec.tok_jitter[k],
                                   spec.tok_mean[k] + spec.tok_jitter[k]);
  return std::max(1, draw);
}

double Environment::expected_reward_oracle(int class_id, ResponseFormat k,
                                           const RewardConfig& cfg, int t,
                                           const std::array<double, 3>& format_probs) const {
  const auto& spec = classes_.at(static_cast<std::size_t>(class_id));
  const int ki = format_index(k) - 1;
  const double p = spec.p_correct[ki];
  const double f = cfg.format_bonus[ki];

  // E[s_L] over the uniform token support, honoring the floor at 1.
  double e_sl = 0.0;
  const int lo = spec.tok_mean[ki] - spec.tok_jitter[ki];
  const int hi = spec.tok_mean[ki] + spec.tok_jitter[ki];
  for (int v = lo; v <= hi; ++v) {
    e_sl += length_scale(std::max(1, v), cfg.length_tolerance);
  }
  e_sl /= static_cast<double>(hi - lo + 1);

  const double e_format = p * (1.0 + f) - (1.0 - p) * f;

  double e_div = 0.0;
  if (cfg.diversity_enabled) {
    // counts[k] = 1 + Binomial(G-1, pi_k): this rollout plus the other G-1.
    const double d = decay_factor(t, cfg.total_steps);
    const double pi = format_probs[ki];
    const int n = cfg.group_size - 1;
    if (pi >= 1.0) {
      e_div = 0.0;  // the whole group shares this format
    } else {
      double pmf = std::pow(1.0 - pi, n);  // c = 0 term
      for (int c = 0; c <= n; ++c) {
        e_div += pmf * (1.0 - static_cast<double>(1 + c) / cfg.group_size);
        if (c < n) {
          // iterate C(n,c) pi^c (1-pi)^(n-c) -> next c
          pmf *= (static_cast<double>(n - c) / static_cast<double>(c + 1)) *
                 (pi / (1.0 - pi));
        }
      }
      e_div *= d;
    }
  }
  return e_sl * (e_format + e_div);
}

ResponseFormat Environment::oracle_argmax(int class_id, const RewardConfig& cfg, int t,
                                          const std::array<double, 3>& format_probs) const {
  ResponseFormat best = ResponseFormat::full;
  double best_value = expected_reward_oracle(class_id, ResponseFormat::full, cfg, t, format_probs);
  for (int k = 2; k <= 3; ++k) {
    const ResponseFormat fmt = format_from_index(k);
    const double v = expected_reward_oracle(class_id, fmt, cfg, t, format_probs);
    if (v > best_value) {
      best_value = v;
      best = fmt;
    }
  }
  return best;
}

}  // namespace fsgrpo
