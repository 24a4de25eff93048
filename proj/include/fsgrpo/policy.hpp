#pragma once

#include <array>
#include <span>
#include <vector>

#include "fsgrpo/env.hpp"
#include "fsgrpo/format.hpp"
#include "fsgrpo/reward.hpp"
#include "fsgrpo/rng.hpp"

namespace fsgrpo {

// Content vocabulary of the toy autoregressive policy. The last id is the
// stop symbol that ends generation; content length is capped so trajectories
// stay tiny while still exercising token-level ratios, clipping and KL.
inline constexpr int kContentVocab = 8;
inline constexpr int kStopToken = kContentVocab - 1;
inline constexpr int kMaxContentTokens = 16;

// Softmax parameter tables. Row format_head[c] holds the format logits for
// task class c; row content_head[k-1] holds the content-token logits used
// after format k was chosen. The same struct doubles as the gradient
// container since gradients share the table shape.
struct PolicyParams {
  std::vector<std::array<double, 3>> format_head;
  std::array<std::array<double, kContentVocab>, 3> content_head{};

  static PolicyParams zeros(int n_classes);
  int n_classes() const { return static_cast<int>(format_head.size()); }
};

// One sampled response. token_seq[0] in {0,1,2} selects the format
// (k = token + 1); subsequent entries are content tokens. n_tok is the
// environment-assigned narrative length used by the length penalty, which is
// deliberately distinct from token_seq.size().
struct Trajectory {
  int class_id = 0;
  std::vector<int> token_seq;
  std::vector<double> logprob_theta;  // filled at sampling time (theta == old there)
  std::vector<double> logprob_old;
  std::vector<double> logprob_ref;
  ResponseFormat format = ResponseFormat::direct;
  int n_tok = 0;
  bool correct = false;
};

struct RolloutGroup {
  SyntheticTask task;
  std::vector<Trajectory> rollouts;
  std::vector<double> rewards;
  std::vector<double> advantages;
};

// Exact per-token log-probabilities of token_seq under params.
// Out-of-range class ids or token ids throw std::out_of_range.
std::vector<double> policy_logprob(const PolicyParams& params, int class_id,
                                   std::span<const int> token_seq);

// Samples a group of G trajectories from params (the behavior snapshot),
// judges each one and assigns its narrative token count. logprob_old is
// cached against params and logprob_ref against ref_params. Requires G >= 2.
RolloutGroup sample_group(const PolicyParams& params, const PolicyParams& ref_params,
                          const SyntheticTask& task, int group_size,
                          const Environment& env, SplitMix64& rng);

// A decision point of the autoregressive policy: either the format choice
// for a class or a content-token choice for a format.
struct DecisionPoint {
  enum class Kind { format, content };
  Kind kind = Kind::format;
  int class_id = 0;
  ResponseFormat format = ResponseFormat::full;

  static DecisionPoint format_point(int class_id) {
    return {Kind::format, class_id, ResponseFormat::full};
  }
  static DecisionPoint content_point(ResponseFormat f) {
    return {Kind::content, 0, f};
  }
};

// Exact categorical KL(pi_params || pi_ref) at one decision point.
double token_kl(const PolicyParams& params, const PolicyParams& ref,
                const DecisionPoint& point);

enum class KlMode {
  exact,      // closed-form categorical KL at each decision point
  estimator,  // unbiased per-token estimator r - log r - 1, r = pi_ref / pi_theta
};

struct SurrogateResult {
  double objective = 0.0;
  PolicyParams grad;   // d objective / d params, maximization convention
  double mean_kl = 0.0;
};

// Token-normalized clipped surrogate with KL penalty:
//   mean over groups of (1/sum_i |o_i|) * sum_i sum_pos
//     min(rho * A_i, clip(rho, 1-eps, 1+eps) * A_i) - beta * KL
// with rho = exp(logprob_theta - logprob_old). Advantages must already be
// stored in each group; old and ref log-probabilities come from the caches
// written by sample_group. ref_params is needed for the exact KL rows.
SurrogateResult fs_grpo_surrogate(const PolicyParams& params, const PolicyParams& ref_params,
                                  const std::vector<RolloutGroup>& groups,
                                  const RewardConfig& cfg, KlMode mode = KlMode::exact);

}  // namespace fsgrpo
