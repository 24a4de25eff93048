#include "fsgrpo/policy.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fsgrpo {

namespace {

template <std::size_t N>
std::array<double, N> log_softmax(const std::array<double, N>& logits) {
  double m = logits[0];
  for (double v : logits) m = std::max(m, v);
  double sum = 0.0;
  for (double v : logits) sum += std::exp(v - m);
  const double lse = m + std::log(sum);
  std::array<double, N> out;
  for (std::size_t i = 0; i < N; ++i) out[i] = logits[i] - lse;
  return out;
}

template <std::size_t N>
std::array<double, N> softmax(const std::array<double, N>& logits) {
  auto ls = log_softmax(logits);
  std::array<double, N> out;
  for (std::size_t i = 0; i < N; ++i) out[i] = std::exp(ls[i]);
  return out;
}

template <std::size_t N>
int sample_categorical(const std::array<double, N>& probs, SplitMix64& rng) {
  const double u = rng.next_double();
  double acc = 0.0;
  for (std::size_t i = 0; i < N; ++i) {
    acc += probs[i];
    if (u < acc) return static_cast<int>(i);
  }
  return static_cast<int>(N) - 1;
}

template <std::size_t N>
double exact_kl(const std::array<double, N>& ls_p, const std::array<double, N>& ls_q) {
  double kl = 0.0;
  for (std::size_t i = 0; i < N; ++i) kl += std::exp(ls_p[i]) * (ls_p[i] - ls_q[i]);
  return std::max(0.0, kl);
}

const std::array<double, 3>& format_row(const PolicyParams& p, int class_id) {
  if (class_id < 0 || class_id >= p.n_classes()) {
    throw std::out_of_range("class id outside the format head");
  }
  return p.format_head[static_cast<std::size_t>(class_id)];
}

}  // namespace

PolicyParams PolicyParams::zeros(int n_classes) {
  if (n_classes < 1) throw std::invalid_argument("policy needs at least one class");
  PolicyParams p;
  p.format_head.assign(static_cast<std::size_t>(n_classes), {0.0, 0.0, 0.0});
  for (auto& row : p.content_head) row.fill(0.0);
  return p;
}

std::vector<double> policy_logprob(const PolicyParams& params, int class_id,
                                   std::span<const int> token_seq) {
  if (token_seq.empty()) throw std::invalid_argument("token sequence is empty");
  const int fmt_token = token_seq[0];
  if (fmt_token < 0 || fmt_token > 2) throw std::out_of_range("format token outside {0,1,2}");

  std::vector<double> out;
  out.reserve(token_seq.size());
  out.push_back(log_softmax(format_row(params, class_id))[static_cast<std::size_t>(fmt_token)]);

  const auto ls_content = log_softmax(params.content_head[static_cast<std::size_t>(fmt_token)]);
  for (std::size_t i = 1; i < token_seq.size(); ++i) {
    const int tok = token_seq[i];
    if (tok < 0 || tok >= kContentVocab) throw std::out_of_range("content token outside the vocabulary");
    out.push_back(ls_content[static_cast<std::size_t>(tok)]);
  }
  return out;
}

RolloutGroup sample_group(const PolicyParams& params, const PolicyParams& ref_params,
                          const SyntheticTask& task, int group_size,
                          const Environment& env, SplitMix64& rng) {
  if (group_size < 2) throw std::invalid_argument("group size must be at least 2");

  const auto fmt_probs = softmax(format_row(params, task.class_id));
  std::array<std::array<double, kContentVocab>, 3> content_probs;
  for (int k = 0; k < 3; ++k) {
    content_probs[static_cast<std::size_t>(k)] =
        softmax(params.content_head[static_cast<std::size_t>(k)]);
  }

  RolloutGroup group;
  group.task = task;
  group.rollouts.reserve(static_cast<std::size_t>(group_size));
  for (int i = 0; i < group_size; ++i) {
    Trajectory traj;
    traj.class_id = task.class_id;

    const int fmt_token = sample_categorical(fmt_probs, rng);
    traj.token_seq.push_back(fmt_token);
    const auto& row = content_probs[static_cast<std::size_t>(fmt_token)];
    for (int pos = 0; pos < kMaxContentTokens; ++pos) {
      const int tok = sample_categorical(row, rng);
      traj.token_seq.push_back(tok);
      if (tok == kStopToken) break;
    }

    traj.format = format_from_index(fmt_token + 1);
    traj.logprob_old = policy_logprob(params, task.class_id, traj.token_seq);
    traj.logprob_ref = policy_logprob(ref_params, task.class_id, traj.token_seq);
    traj.logprob_theta = traj.logprob_old;
    traj.n_tok = env.sample_token_count(task.class_id, traj.format, rng);
    traj.correct = env.judge(task, traj.format, rng);
    group.rollouts.push_back(std::move(traj));
  }
  return group;
}

double token_kl(const PolicyParams& params, const PolicyParams& ref,
                const DecisionPoint& point) {
  if (point.kind == DecisionPoint::Kind::format) {
    return exact_kl(log_softmax(format_row(params, point.class_id)),
                    log_softmax(format_row(ref, point.class_id)));
  }
  const std::size_t k = static_cast<std::size_t>(format_index(point.format) - 1);
  return exact_kl(log_softmax(params.content_head[k]), log_softmax(ref.content_head[k]));
}

SurrogateResult fs_grpo_surrogate(const PolicyParams& params, const PolicyParams& ref_params,
                                  const std::vector<RolloutGroup>& groups,
                                  const RewardConfig& cfg, KlMode mode) {
  if (groups.empty()) throw std::invalid_argument("surrogate needs at least one group");

  const int n_classes = params.n_classes();
  SurrogateResult result;
  result.grad = PolicyParams::zeros(n_classes);

  // Per-row distributions under the current params, plus the exact KL value
  // and its gradient per row. These only depend on the row, not the token.
  std::vector<std::array<double, 3>> fmt_ls(static_cast<std::size_t>(n_classes));
  std::vector<std::array<double, 3>> fmt_pi(static_cast<std::size_t>(n_classes));
  std::vector<double> fmt_kl(static_cast<std::size_t>(n_classes), 0.0);
  std::vector<std::array<double, 3>> fmt_kl_grad(static_cast<std::size_t>(n_classes));
  for (int c = 0; c < n_classes; ++c) {
    const auto cs = static_cast<std::size_t>(c);
    fmt_ls[cs] = log_softmax(params.format_head[cs]);
    const auto ref_ls = log_softmax(ref_params.format_head[cs]);
    double kl = 0.0;
    for (int j = 0; j < 3; ++j) {
      const auto js = static_cast<std::size_t>(j);
      fmt_pi[cs][js] = std::exp(fmt_ls[cs][js]);
      kl += fmt_pi[cs][js] * (fmt_ls[cs][js] - ref_ls[js]);
    }
    kl = std::max(0.0, kl);
    fmt_kl[cs] = kl;
    for (int j = 0; j < 3; ++j) {
      const auto js = static_cast<std::size_t>(j);
      fmt_kl_grad[cs][js] = fmt_pi[cs][js] * ((fmt_ls[cs][js] - ref_ls[js]) - kl);
    }
  }

  std::array<std::array<double, kContentVocab>, 3> content_ls;
  std::array<std::array<double, kContentVocab>, 3> content_pi;
  std::array<double, 3> content_kl{};
  std::array<std::array<double, kContentVocab>, 3> content_kl_grad;
  for (int k = 0; k < 3; ++k) {
    const auto ks = static_cast<std::size_t>(k);
    content_ls[ks] = log_softmax(params.content_head[ks]);
    const auto ref_ls = log_softmax(ref_params.content_head[ks]);
    double kl = 0.0;
    for (int j = 0; j < kContentVocab; ++j) {
      const auto js = static_cast<std::size_t>(j);
      content_pi[ks][js] = std::exp(content_ls[ks][js]);
      kl += content_pi[ks][js] * (content_ls[ks][js] - ref_ls[js]);
    }
    kl = std::max(0.0, kl);
    content_kl[ks] = kl;
    for (int j = 0; j < kContentVocab; ++j) {
      const auto js = static_cast<std::size_t>(j);
      content_kl_grad[ks][js] = content_pi[ks][js] * ((content_ls[ks][js] - ref_ls[js]) - kl);
    }
  }

  const double group_norm = 1.0 / static_cast<double>(groups.size());
  const double lo = 1.0 - cfg.clip_ratio;
  const double hi = 1.0 + cfg.clip_ratio;
  double kl_sum = 0.0;
  std::size_t kl_count = 0;

  for (const auto& group : groups) {
    if (group.advantages.size() != group.rollouts.size()) {
      throw std::invalid_argument("group advantages missing or mismatched");
    }
    std::size_t denom_tokens = 0;
    for (const auto& traj : group.rollouts) denom_tokens += traj.token_seq.size();
    if (denom_tokens == 0) throw std::invalid_argument("group has no tokens");
    const double inv_denom = 1.0 / static_cast<double>(denom_tokens);

    double group_sum = 0.0;
    for (std::size_t i = 0; i < group.rollouts.size(); ++i) {
      const Trajectory& traj = group.rollouts[i];
      const double adv = group.advantages[i];
      const auto cs = static_cast<std::size_t>(traj.class_id);
      if (traj.class_id < 0 || traj.class_id >= n_classes) {
        throw std::out_of_range("trajectory class id outside the format head");
      }
      if (traj.logprob_old.size() != traj.token_seq.size() ||
          traj.logprob_ref.size() != traj.token_seq.size()) {
        throw std::invalid_argument("cached log-probabilities missing");
      }
      const int fmt_token = traj.token_seq[0];
      const auto fs = static_cast<std::size_t>(fmt_token);

      for (std::size_t pos = 0; pos < traj.token_seq.size(); ++pos) {
        const int tok = traj.token_seq[pos];
        const auto ts = static_cast<std::size_t>(tok);
        const bool is_format_pos = (pos == 0);
        const double lp_new = is_format_pos ? fmt_ls[cs][ts] : content_ls[fs][ts];

        const double ratio = std::exp(lp_new - traj.logprob_old[pos]);
        const double unclipped = ratio * adv;
        const double clipped = std::clamp(ratio, lo, hi) * adv;
        const bool pass_through = unclipped <= clipped;  // min picks the unclipped branch
        group_sum += std::min(unclipped, clipped);

        // d/dz of the surrogate term: A * rho * (e_tok - pi) when the min
        // tracks the unclipped branch, zero once the clip is active.
        const double surr_scale = pass_through ? group_norm * inv_denom * adv * ratio : 0.0;

        double kl_val = 0.0;
        if (mode == KlMode::exact) {
          kl_val = is_format_pos ? fmt_kl[cs] : content_kl[fs];
        } else {
          const double r = std::exp(traj.logprob_ref[pos] - lp_new);
          kl_val = r - (traj.logprob_ref[pos] - lp_new) - 1.0;
        }
        group_sum -= cfg.kl_beta * kl_val;
        kl_sum += kl_val;
        ++kl_count;

        const double kl_scale = group_norm * inv_denom * cfg.kl_beta;
        if (is_format_pos) {
          auto& grow = result.grad.format_head[cs];
          if (surr_scale != 0.0) {
            for (int j = 0; j < 3; ++j) {
              const auto js = static_cast<std::size_t>(j);
              grow[js] += surr_scale * ((j == tok ? 1.0 : 0.0) - fmt_pi[cs][js]);
            }
          }
          if (mode == KlMode::exact) {
            for (int j = 0; j < 3; ++j) {
              const auto js = static_cast<std::size_t>(j);
              grow[js] -= kl_scale * fmt_kl_grad[cs][js];
            }
          } else {
            const double r = std::exp(traj.logprob_ref[pos] - lp_new);
            const double est_scale = kl_scale * (1.0 - r);
            for (int j = 0; j < 3; ++j) {
              const auto js = static_cast<std::size_t>(j);
              grow[js] -= est_scale * ((j == tok ? 1.0 : 0.0) - fmt_pi[cs][js]);
            }
          }
        } else {
          auto& grow = result.grad.content_head[fs];
          if (surr_scale != 0.0) {
            for (int j = 0; j < kContentVocab; ++j) {
              const auto js = static_cast<std::size_t>(j);
              grow[js] += surr_scale * ((j == tok ? 1.0 : 0.0) - content_pi[fs][js]);
            }
          }
          if (mode == KlMode::exact) {
            for (int j = 0; j < kContentVocab; ++j) {
              const auto js = static_cast<std::size_t>(j);
              grow[js] -= kl_scale * content_kl_grad[fs][js];
            }
          } else {
            const double r = std::exp(traj.logprob_ref[pos] - lp_new);
            const double est_scale = kl_scale * (1.0 - r);
            for (int j = 0; j < kContentVocab; ++j) {
              const auto js = static_cast<std::size_t>(j);
              grow[js] -= est_scale * ((j == tok ? 1.0 : 0.0) - content_pi[fs][js]);
            }
          }
        }
      }
    }
    result.objective += group_norm * inv_denom * group_sum;
  }

  result.mean_kl = kl_count > 0 ? kl_sum / static_cast<double>(kl_count) : 0.0;
  return result;
}

}  // namespace fsgrpo
