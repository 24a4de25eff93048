// Acceptance suite: one line per criterion, nonzero exit if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "fsgrpo/commands.hpp"
#include "fsgrpo/diagnostics.hpp"
#include "fsgrpo/env.hpp"
#include "fsgrpo/format.hpp"
#include "fsgrpo/policy.hpp"
#include "fsgrpo/reward.hpp"
#include "fsgrpo/rng.hpp"
#include "fsgrpo/sft.hpp"
#include "fsgrpo/trainer.hpp"

using namespace fsgrpo;

namespace {

int failures = 0;

// max_seconds <= 0 means no runtime budget for the criterion.
void criterion(int number, const std::string& name, double max_seconds,
               const std::function<bool(std::string&)>& body) {
  std::string detail;
  const auto start = std::chrono::steady_clock::now();
  bool ok = false;
  try {
    ok = body(detail);
  } catch (const std::exception& e) {
    ok = false;
    detail = std::string("exception: ") + e.what();
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (ok && max_seconds > 0.0 && secs > max_seconds) {
    ok = false;
    detail = "runtime budget exceeded: " + std::to_string(secs) + "s > " +
             std::to_string(max_seconds) + "s";
  }
  std::printf("[%s] %d. %s (%.2fs)%s%s\n", ok ? "PASS" : "FAIL", number, name.c_str(), secs,
              detail.empty() ? "" : " -- ", detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

bool near(double x, double expect, double tol) { return std::abs(x - expect) <= tol; }

// ---------------------------------------------------------------- criterion 3

PolicyParams random_params(int n_classes, SplitMix64& rng, double scale) {
  PolicyParams p = PolicyParams::zeros(n_classes);
  for (auto& row : p.format_head) {
    for (auto& v : row) v = (rng.next_double() * 2.0 - 1.0) * scale;
  }
  for (auto& row : p.content_head) {
    for (auto& v : row) v = (rng.next_double() * 2.0 - 1.0) * scale;
  }
  return p;
}

struct GradScenario {
  PolicyParams params;
  PolicyParams ref_params;
  std::vector<RolloutGroup> groups;
  RewardConfig cfg;
  KlMode mode = KlMode::exact;
};

GradScenario random_scenario(std::uint64_t seed) {
  SplitMix64 rng(seed);
  GradScenario s;
  const int n_classes = rng.uniform_int(1, 3);
  std::vector<TaskClassSpec> classes;
  for (int c = 0; c < n_classes; ++c) {
    TaskClassSpec spec;
    spec.name = "c" + std::to_string(c);
    spec.p_correct = {0.4, 0.6, 0.7};
    spec.tok_mean = {60, 40, 10};
    spec.tok_jitter = {10, 5, 2};
    classes.push_back(spec);
  }
  const Environment env(classes);

  const PolicyParams old_params = random_params(n_classes, rng, 1.0);
  s.ref_params = random_params(n_classes, rng, 1.0);
  s.params = old_params;
  for (auto& row : s.params.format_head) {
    for (auto& v : row) v += (rng.next_double() * 2.0 - 1.0) * 0.4;
  }
  for (auto& row : s.params.content_head) {
    for (auto& v : row) v += (rng.next_double() * 2.0 - 1.0) * 0.4;
  }
  const int n_groups = rng.uniform_int(2, 3);
  for (int g = 0; g < n_groups; ++g) {
    const int class_id = rng.uniform_int(0, n_classes - 1);
    auto group = sample_group(old_params, s.ref_params, {g, class_id, 0},
                              rng.uniform_int(4, 6), env, rng);
    for (std::size_t i = 0; i < group.rollouts.size(); ++i) {
      group.advantages.push_back(rng.next_double() * 4.0 - 2.0);
    }
    s.groups.push_back(std::move(group));
  }
  s.cfg.kl_beta = 0.05;
  s.mode = (seed % 2 == 0) ? KlMode::exact : KlMode::estimator;
  return s;
}

double gradcheck_relative_error(const GradScenario& s, double h) {
  const auto analytic = fs_grpo_surrogate(s.params, s.ref_params, s.groups, s.cfg, s.mode);
  auto objective_at = [&](const PolicyParams& p) {
    return fs_grpo_surrogate(p, s.ref_params, s.groups, s.cfg, s.mode).objective;
  };

  double max_diff = 0.0;
  double max_grad = 1e-8;
  auto check_coord = [&](double analytic_g, auto&& bump) {
    PolicyParams plus = s.params;
    PolicyParams minus = s.params;
    bump(plus, h);
    bump(minus, -h);
    const double fd = (objective_at(plus) - objective_at(minus)) / (2.0 * h);
    max_diff = std::max(max_diff, std::abs(analytic_g - fd));
    max_grad = std::max(max_grad, std::abs(analytic_g));
  };

  for (int c = 0; c < s.params.n_classes(); ++c) {
    for (int j = 0; j < 3; ++j) {
      const auto cs = static_cast<std::size_t>(c);
      const auto js = static_cast<std::size_t>(j);
      check_coord(analytic.grad.format_head[cs][js],
                  [&](PolicyParams& p, double d) { p.format_head[cs][js] += d; });
    }
  }
  for (int k = 0; k < 3; ++k) {
    for (int j = 0; j < kContentVocab; ++j) {
      const auto ks = static_cast<std::size_t>(k);
      const auto js = static_cast<std::size_t>(j);
      check_coord(analytic.grad.content_head[ks][js],
                  [&](PolicyParams& p, double d) { p.content_head[ks][js] += d; });
    }
  }
  return max_diff / max_grad;
}

// ------------------------------------------------------- criteria 4/5 helpers

// Single-class environment for the diversity ablation. All token costs sit
// under the tolerance, so the race is purely between the format rewards:
// direct 1.02 > perception_only 0.964 > full 0.89. The gaps are small enough
// for the decaying diversity bonus to keep every format alive through the
// first half of the schedule, and large enough for the off-ablation run to
// lock onto direct answers well before step 150. The ablation runs use a
// gentler step size than the trainer default: saturation speed scales with
// the step size while the point where the diversity bonus loses to the
// format gaps does not, so this separates the two runs cleanly.
std::vector<TaskClassSpec> ablation_specs() {
  TaskClassSpec spec;
  spec.name = "ablation";
  spec.p_correct = {0.89, 0.79, 0.76};
  spec.tok_mean = {200, 100, 8};
  spec.tok_jitter = {40, 20, 2};
  return {spec};
}

TrainerConfig ablation_trainer(bool diversity) {
  TrainerConfig cfg;
  cfg.reward.total_steps = 200;
  cfg.reward.diversity_enabled = diversity;
  cfg.batch_size = 32;
  cfg.learning_rate = 3.0;
  cfg.seed = 1;
  return cfg;
}

std::string read_all(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return {};
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

int main() {
  criterion(1, "reward formula suite reproduces every tagged example", 1.0, [](std::string& detail) {
    const RewardConfig cfg100 = [] {
      RewardConfig c;
      c.total_steps = 100;
      return c;
    }();
    const RewardConfig defaults;
    const double tol = 1e-12;
    bool ok = true;

    ok &= near(format_reward(true, ResponseFormat::direct, defaults), 1.5, tol);
    ok &= near(format_reward(false, ResponseFormat::direct, defaults), -0.5, tol);
    ok &= near(format_reward(true, ResponseFormat::full, defaults), 1.0, tol);

    ok &= near(decay_factor(0, 100), 1.0, tol);
    ok &= near(decay_factor(100, 100), 0.0, tol);
    ok &= near(decay_factor(50, 100), 0.5, tol);

    ok &= near(diversity_reward(ResponseFormat::direct, {3, 3, 2}, 0, cfg100), 0.75, tol);
    ok &= near(diversity_reward(ResponseFormat::direct, {0, 0, 8}, 0, cfg100), 0.0, tol);
    ok &= near(diversity_reward(ResponseFormat::perception_only, {3, 2, 3}, 100, cfg100), 0.0, tol);

    ok &= near(length_scale(300, 300), 1.0, tol);
    ok &= near(length_scale(600, 300), 0.5, tol);
    ok &= near(length_scale(0, 300), 1.0, tol);

    ok &= near(total_reward(ResponseFormat::direct, true, 5, {3, 3, 2}, 0, cfg100), 2.25, tol);
    ok &= near(total_reward(ResponseFormat::full, true, 600, {8, 0, 0}, 100, cfg100), 0.5, tol);
    RewardConfig no_div = cfg100;
    no_div.diversity_enabled = false;
    ok &= near(total_reward(ResponseFormat::direct, false, 5, {3, 3, 2}, 0, no_div), -0.5, tol);

    if (!ok) detail = "a tagged example missed the 1e-12 tolerance";
    return ok;
  });

  criterion(2, "advantage normalization over 1000 random groups", 0.0, [](std::string& detail) {
    SplitMix64 rng(20211);
    for (int trial = 0; trial < 1000; ++trial) {
      std::vector<double> rewards;
      for (int i = 0; i < 8; ++i) rewards.push_back(rng.next_double() * 3.0 - 0.5);
      const auto adv = group_advantages(rewards, 1e-8);
      double mean = 0.0;
      for (double a : adv) mean += a;
      mean /= 8.0;
      double var = 0.0;
      for (double a : adv) var += (a - mean) * (a - mean);
      var /= 8.0;
      if (std::abs(mean) > 1e-9 || std::abs(std::sqrt(var) - 1.0) > 1e-6) {
        detail = "trial " + std::to_string(trial) + " violated the normalization bounds";
        return false;
      }
    }
    const std::vector<double> constant(8, 2.5);
    for (double a : group_advantages(constant, 1e-8)) {
      if (a != 0.0) {
        detail = "all-equal group produced a nonzero advantage";
        return false;
      }
    }
    return true;
  });

  criterion(3, "analytic gradient matches central finite differences", 10.0, [](std::string& detail) {
    for (std::uint64_t seed = 1; seed <= 24; ++seed) {
      const auto scenario = random_scenario(seed * 1000 + 7);
      const double err = gradcheck_relative_error(scenario, 1e-5);
      if (!(err < 1e-5)) {
        detail = "config " + std::to_string(seed) + " relative error " + std::to_string(err);
        return false;
      }
    }
    return true;
  });

  criterion(4, "diversity ablation: collapse without r_div, none with it", 120.0, [](std::string& detail) {
    const Environment env(ablation_specs());

    const auto off = train(ablation_trainer(false), env);
    const auto off_event = detect_collapse(off.history, 0.9, 10);
    if (!off_event) {
      detail = "no collapse detected with diversity off";
      return false;
    }
    if (off_event->onset_step >= 150) {
      detail = "collapse onset too late: step " + std::to_string(off_event->onset_step);
      return false;
    }

    const auto on = train(ablation_trainer(true), env);
    const auto on_event = detect_collapse(on.history, 0.9, 10);
    if (on_event) {
      detail = "diversity run still collapsed at step " + std::to_string(on_event->onset_step);
      return false;
    }
    const int half = 100;
    for (int t = 0; t < half; ++t) {
      const auto& usage = on.history.steps[static_cast<std::size_t>(t)].format_usage;
      for (int k = 0; k < 3; ++k) {
        if (usage[static_cast<std::size_t>(k)] < 0.05) {
          detail = "format " + std::string(format_name(format_from_index(k + 1))) +
                   " fell below 5% at step " + std::to_string(t);
          return false;
        }
      }
    }
    detail = "off-run onset step " + std::to_string(off_event->onset_step) + " (" +
             std::string(format_name(off_event->format)) + ")";
    return true;
  });

  criterion(5, "adaptive selection matches the oracle argmax per class", 120.0, [](std::string& detail) {
    const Environment env(default_specs());
    TrainerConfig cfg;
    cfg.seed = 3;
    const auto result = train(cfg, env);
    if (result.diverged) {
      detail = "training diverged";
      return false;
    }

    std::ostringstream summary;
    for (int c = 0; c < env.n_classes(); ++c) {
      const auto dist = policy_format_distribution(result.params, c);
      int argmax = 0;
      for (int j = 1; j < 3; ++j) {
        if (dist[static_cast<std::size_t>(j)] > dist[static_cast<std::size_t>(argmax)]) argmax = j;
      }
      const auto trained = format_from_index(argmax + 1);
      const auto oracle = env.oracle_argmax(c, cfg.reward, cfg.reward.total_steps, dist);
      summary << env.classes()[static_cast<std::size_t>(c)].name << "->"
              << format_name(trained) << " ";
      if (trained != oracle) {
        detail = env.classes()[static_cast<std::size_t>(c)].name + ": trained argmax " +
                 std::string(format_name(trained)) + " but oracle argmax " +
                 std::string(format_name(oracle));
        return false;
      }
    }

    const auto perception = policy_format_distribution(result.params, 0);
    const auto reasoning = policy_format_distribution(result.params, 1);
    if (reasoning[0] < 0.5) {
      detail = "reasoning class full usage " + std::to_string(reasoning[0]) + " below 0.5";
      return false;
    }
    if (perception[1] + perception[2] < 0.5) {
      detail = "perception class short-format usage below 0.5";
      return false;
    }
    detail = summary.str() + "| reasoning full " + std::to_string(reasoning[0]) +
             ", perception short " + std::to_string(perception[1] + perception[2]);
    return true;
  });

  criterion(6, "metric fidelity on the reference row", 0.0, [](std::string& detail) {
    const double td = token_delta(478.6, 72.1);
    if (!near(td, 84.9, 0.05)) {
      detail = "token_delta(478.6, 72.1) = " + std::to_string(td);
      return false;
    }
    const double ad = acc_delta(78.3, 81.4);
    if (!near(ad, 3.1, 1e-12)) {
      detail = "acc_delta(78.3, 81.4) = " + std::to_string(ad);
      return false;
    }
    return true;
  });

  criterion(7, "overthinking diagnostics on crafted fixtures", 0.0, [](std::string& detail) {
    // bucket partition and boundary rules with exact counts
    const std::vector<double> scores{0.2, 0.9, 1.0, 1.5, 3.0, 3.0001, 7.0};
    const auto h = score_histogram(scores);
    if (h.below != 2 || h.mid != 3 || h.above != 2 || h.total != 7) {
      detail = "bucket counts " + std::to_string(h.below) + "/" + std::to_string(h.mid) + "/" +
               std::to_string(h.above);
      return false;
    }

    // eligibility filtering
    bool threw = false;
    try {
      overthinking_score({"", "", true, false, 10, 5});
    } catch (const EligibilityError&) {
      threw = true;
    }
    if (!threw) {
      detail = "ineligible pair did not raise";
      return false;
    }
    std::vector<OverthinkingRecord> corpus;
    corpus.push_back({"q", "a b c d e f", std::string("a b"), true, true});
    corpus.push_back({"q", "a b", std::string("a"), false, true});
    corpus.push_back({"q", "a b", std::string("a"), true, false});
    const auto rep = score_corpus(corpus, Tokenizer::whitespace(), nullptr);
    if (rep.eligible != 1 || rep.ineligible != 2) {
      detail = "eligibility filter kept " + std::to_string(rep.eligible);
      return false;
    }

    // scale invariance under a tokenizer swap (word length 4 + separator)
    std::string original, compressed;
    for (int i = 0; i < 12; ++i) original += "abcd ";
    for (int i = 0; i < 4; ++i) compressed += "abcd ";
    const Tokenizer ws = Tokenizer::whitespace();
    const Tokenizer chars = Tokenizer::fixed_chars(1);
    const double s1 = overthinking_score(
        {original, compressed, true, true, ws.count(original), ws.count(compressed)});
    const double s2 = overthinking_score(
        {original, compressed, true, true, chars.count(original), chars.count(compressed)});
    if (!near(s1, s2, 1e-12) || !near(s1, 3.0, 1e-12)) {
      detail = "tokenizer swap changed the score: " + std::to_string(s1) + " vs " +
               std::to_string(s2);
      return false;
    }
    return true;
  });

  criterion(8, "parser survives 100k fuzz cases and all valid renders round-trip", 0.0,
            [](std::string& detail) {
    static const char* pieces[] = {
        "<perception>", "</perception>", "<reasoning>", "</reasoning>",
        "<answer>",     "</answer>",     "<answ",        "</",
        "<",            ">",             " ",            "\n",
        "x",            "why a stop",    "\xff\xfe\x01", "<answer>ok</answer>",
    };
    SplitMix64 rng(88001);
    for (int i = 0; i < 100000; ++i) {
      std::string text;
      const int n = rng.uniform_int(0, 14);
      for (int j = 0; j < n; ++j) {
        text += pieces[static_cast<std::size_t>(rng.uniform_int(0, 15))];
      }
      try {
        const auto r = parse_response(text);
        if (!r.ok() && !r.error.has_value()) {
          detail = "parser returned neither value nor error";
          return false;
        }
      } catch (const std::exception& e) {
        detail = std::string("parser threw: ") + e.what();
        return false;
      }
    }

    static const char alphabet[] = "abcdefghijklmnopqrstuvwxyz 0123456789.,";
    auto content = [&rng]() {
      std::string s;
      const int len = rng.uniform_int(1, 30);
      for (int i = 0; i < len; ++i) {
        s += alphabet[static_cast<std::size_t>(rng.uniform_int(0, sizeof(alphabet) - 2))];
      }
      return s;
    };
    for (int i = 0; i < 30000; ++i) {
      const int shape = rng.uniform_int(1, 3);
      std::optional<std::string> perception, reasoning;
      if (shape <= 2) perception = content();
      if (shape == 1) reasoning = content();
      const auto rendered = render_response(perception, reasoning, content());
      const auto parsed = parse_response(rendered);
      if (!parsed.ok() || classify_format(*parsed.response) != format_from_index(shape)) {
        detail = "round-trip failed on shape " + std::to_string(shape);
        return false;
      }
    }
    return true;
  });

  criterion(9, "train-sim reruns from one manifest byte-identically", 0.0, [](std::string& detail) {
    namespace fs = std::filesystem;
    const std::string scratch = "acceptance_scratch";
    fs::remove_all(scratch);

    commands::TrainSimOptions first;
    first.out_dir = scratch + "/a";
    first.steps = 60;
    first.batch_size = 8;
    first.seed = 2026;
    first.quiet = true;
    if (commands::cmd_train_sim(first) != 0) {
      detail = "first run failed";
      return false;
    }
    commands::RerunOptions rerun;
    rerun.manifest_path = scratch + "/a/manifest.json";
    rerun.out_dir = scratch + "/b";
    rerun.quiet = true;
    if (commands::cmd_rerun(rerun) != 0) {
      detail = "rerun failed";
      return false;
    }
    const std::string a = read_all(scratch + "/a/history.csv");
    const std::string b = read_all(scratch + "/b/history.csv");
    if (a.empty() || a != b) {
      detail = "history CSVs differ or are empty";
      return false;
    }
    return true;
  });

  if (failures > 0) {
    std::printf("%d criterion(s) failed\n", failures);
    return 1;
  }
  std::printf("all acceptance criteria passed\n");
  return 0;
}
