#include "fsgrpo/diagnostics.hpp"

#include <algorithm>
#include <map>

namespace fsgrpo {

namespace {

std::string trim(const std::string& s) {
  const char* ws = " \t\n\r\f\v";
  const auto start = s.find_first_not_of(ws);
  if (start == std::string::npos) return {};
  const auto end = s.find_last_not_of(ws);
  return s.substr(start, end - start + 1);
}

}  // namespace

double overthinking_score(const ScorePair& pair) {
  if (!pair.correct_original || !pair.correct_compressed) {
    throw EligibilityError("pair is ineligible: both sides must be judged correct");
  }
  if (pair.t_original < 1 || pair.t_compressed < 1) {
    throw std::invalid_argument("scored pairs need positive token counts");
  }
  return static_cast<double>(pair.t_original) / static_cast<double>(pair.t_compressed);
}

ScoreHistogram score_histogram(std::span<const double> scores) {
  ScoreHistogram h;
  h.total = scores.size();
  for (double s : scores) {
    if (s < 1.0) {
      ++h.below;
    } else if (s <= 3.0) {
      ++h.mid;
    } else {
      ++h.above;
    }
  }
  if (h.total > 0) {
    const double n = static_cast<double>(h.total);
    h.frac_below = static_cast<double>(h.below) / n;
    h.frac_mid = static_cast<double>(h.mid) / n;
    h.frac_above = static_cast<double>(h.above) / n;
  }
  return h;
}

double token_delta(double tok_baseline, double tok_new) {
  if (!(tok_baseline > 0.0)) throw std::invalid_argument("baseline token count must be positive");
  return (tok_baseline - tok_new) / tok_baseline * 100.0;
}

double acc_delta(double acc_baseline, double acc_new) {
  if (!(acc_baseline >= 0.0 && acc_baseline <= 100.0 && acc_new >= 0.0 && acc_new <= 100.0)) {
    throw std::invalid_argument("accuracies must lie in [0, 100]");
  }
  return acc_new - acc_baseline;
}

FormatReport format_report(std::span<const RolloutStat> rollouts) {
  FormatReport rep;
  rep.total = rollouts.size();
  if (rep.total == 0) return rep;

  std::array<std::size_t, 3> count{};
  std::array<std::size_t, 3> correct{};
  double tok_sum = 0.0;
  std::size_t correct_total = 0;
  for (const auto& r : rollouts) {
    const auto k = static_cast<std::size_t>(format_index(r.format) - 1);
    count[k] += 1;
    if (r.correct) {
      correct[k] += 1;
      ++correct_total;
    }
    tok_sum += r.n_tok;
  }
  const double n = static_cast<double>(rep.total);
  for (std::size_t k = 0; k < 3; ++k) {
    rep.usage[k] = static_cast<double>(count[k]) / n;
    rep.correct_share[k] = static_cast<double>(correct[k]) / n;
    if (count[k] > 0) {
      rep.accuracy[k] = static_cast<double>(correct[k]) / static_cast<double>(count[k]);
    }
  }
  rep.overall_accuracy = static_cast<double>(correct_total) / n;
  rep.mean_tokens = tok_sum / n;
  return rep;
}

std::optional<CollapseEvent> detect_collapse(std::span<const std::array<double, 3>> usage,
                                             double threshold, int window) {
  if (!(threshold > 0.5 && threshold <= 1.0)) {
    throw std::invalid_argument("collapse threshold must lie in (0.5, 1]");
  }
  if (window < 1) throw std::invalid_argument("collapse window must be at least 1");

  const std::size_t n = usage.size();
  const auto w = static_cast<std::size_t>(window);
  if (n < w) return std::nullopt;

  // threshold > 0.5 means at most one format can be above it per step, so a
  // run cannot switch formats midway.
  for (std::size_t start = 0; start + w <= n; ++start) {
    for (std::size_t k = 0; k < 3; ++k) {
      bool run = true;
      for (std::size_t s = start; s < start + w; ++s) {
        if (usage[s][k] < threshold) {
          run = false;
          break;
        }
      }
      if (run) {
        return CollapseEvent{format_from_index(static_cast<int>(k) + 1),
                             static_cast<int>(start)};
      }
    }
  }
  return std::nullopt;
}

std::optional<CollapseEvent> detect_collapse(const TrainHistory& history, double threshold,
                                             int window) {
  std::vector<std::array<double, 3>> usage;
  usage.reserve(history.steps.size());
  for (const auto& rec : history.steps) usage.push_back(rec.format_usage);
  return detect_collapse(usage, threshold, window);
}

std::string TruncatingCompressor::compress(const std::string& question,
                                           const std::string& response) {
  (void)question;
  const auto parsed = parse_response(response);
  if (!parsed.ok()) return response;
  return render_response(std::nullopt, std::nullopt, parsed.response->answer);
}

bool TruncatingCompressor::judge(const std::string& answer, const std::string& reference) {
  return trim(answer) == trim(reference);
}

OverthinkingReport score_corpus(std::span<const OverthinkingRecord> records,
                                const Tokenizer& tok, CompressorClient* compressor) {
  OverthinkingReport rep;
  std::map<std::string, std::size_t> reasons;

  for (const auto& rec : records) {
    if (!rec.correct_original) {
      ++rep.ineligible;
      ++reasons["original_incorrect"];
      continue;
    }
    std::string compressed;
    bool compressed_correct = false;
    if (rec.compressed) {
      compressed = *rec.compressed;
      if (!rec.correct_compressed.has_value()) {
        ++rep.ineligible;
        ++reasons["missing_compressed_verdict"];
        continue;
      }
      compressed_correct = *rec.correct_compressed;
    } else if (compressor != nullptr) {
      compressed = compressor->compress(rec.question, rec.original);
      const auto orig = parse_response(rec.original);
      const auto comp = parse_response(compressed);
      if (!orig.ok() || !comp.ok()) {
        ++rep.ineligible;
        ++reasons["unparseable_response"];
        continue;
      }
      compressed_correct = compressor->judge(comp.response->answer, orig.response->answer);
    } else {
      ++rep.ineligible;
      ++reasons["missing_compressed"];
      continue;
    }
    if (!compressed_correct) {
      ++rep.ineligible;
      ++reasons["compressed_incorrect"];
      continue;
    }
    const int t_orig = tok.count(rec.original);
    const int t_comp = tok.count(compressed);
    if (t_orig < 1 || t_comp < 1) {
      ++rep.ineligible;
      ++reasons["zero_token_count"];
      continue;
    }
    const double score = overthinking_score(
        {rec.original, compressed, true, true, t_orig, t_comp});
    if (score < 1.0) rep.anomaly_indices.push_back(rep.scores.size());
    rep.scores.push_back(score);
    ++rep.eligible;
  }

  rep.histogram = score_histogram(rep.scores);
  rep.ineligible_reasons.assign(reasons.begin(), reasons.end());
  return rep;
}

}  // namespace fsgrpo
