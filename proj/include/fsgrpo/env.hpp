#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "fsgrpo/format.hpp"
#include "fsgrpo/reward.hpp"
#include "fsgrpo/rng.hpp"

namespace fsgrpo {

// A synthetic task family: per-format correctness probabilities and token
// cost distributions. The environment abstracts a VQA task down to
// (class, format -> correctness probability, format -> token cost).
struct TaskClassSpec {
  std::string name;
  std::array<double, 3> p_correct{};  // indexed by k-1
  std::array<int, 3> tok_mean{};      // mean narrative token count per format
  std::array<int, 3> tok_jitter{};    // uniform +/- range per format
  double mixture_weight = 1.0;

  void validate() const;  // throws std::invalid_argument
};

struct SyntheticTask {
  int id = 0;
  int class_id = 0;
  std::uint64_t seed = 0;  // available to callers that run tasks on their own streams
};

// Default task classes. Correctness probabilities follow the measured
// per-format accuracies of the three benchmark families (OCR-style,
// math-style, general); token costs are desk-scale calibrations chosen so
// the length penalty bites on long-format responses for the perception and
// general classes.
std::vector<TaskClassSpec> default_specs();

class Environment {
 public:
  explicit Environment(std::vector<TaskClassSpec> classes);

  const std::vector<TaskClassSpec>& classes() const { return classes_; }
  int n_classes() const { return static_cast<int>(classes_.size()); }

  // Draws a class id from the mixture weights.
  int sample_class(SplitMix64& rng) const;

  // Bernoulli verdict with probability p_correct[class][k].
  bool judge(const SyntheticTask& task, ResponseFormat format, SplitMix64& rng) const;

  // Uniform in [mean - jitter, mean + jitter], floored at 1.
  int sample_token_count(int class_id, ResponseFormat format, SplitMix64& rng) const;

  // Exact expected total reward for answering a class in format k at step t:
  // E[s_L] by enumeration over the token support, the format term in closed
  // form, and the diversity term by enumeration over the binomial group
  // composition induced by format_probs (the format distribution of the
  // other G-1 rollouts; uniform models the pre-training policy, a trained
  // policy's distribution models the post-training one).
  double expected_reward_oracle(
      int class_id, ResponseFormat k, const RewardConfig& cfg, int t,
      const std::array<double, 3>& format_probs = {1.0 / 3, 1.0 / 3, 1.0 / 3}) const;

  // Format with the highest oracle value for the class.
  ResponseFormat oracle_argmax(
      int class_id, const RewardConfig& cfg, int t,
      const std::array<double, 3>& format_probs = {1.0 / 3, 1.0 / 3, 1.0 / 3}) const;

 private:
  std::vector<TaskClassSpec> classes_;
  double total_weight_ = 0.0;
};

}  // namespace fsgrpo
