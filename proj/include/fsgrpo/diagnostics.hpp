#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fsgrpo/format.hpp"
#include "fsgrpo/trainer.hpp"

namespace fsgrpo {

// A (original, compressed) response pair for redundancy scoring. Pairs where
// either side is judged incorrect are ineligible and must be filtered out
// before scoring.
struct ScorePair {
  std::string original_text;
  std::string compressed_text;
  bool correct_original = false;
  bool correct_compressed = false;
  int t_original = 0;
  int t_compressed = 0;
};

class EligibilityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// T_original / T_compressed. Requires both correctness flags (throws
// EligibilityError otherwise) and positive token counts. Scores below 1 are
// legal output; callers flag them as anomalies.
double overthinking_score(const ScorePair& pair);

// Buckets (<1), [1,3], (>3); both boundaries belong to the middle bucket.
struct ScoreHistogram {
  std::size_t total = 0;
  std::size_t below = 0;  // score < 1
  std::size_t mid = 0;    // 1 <= score <= 3
  std::size_t above = 0;  // score > 3
  double frac_below = 0.0;
  double frac_mid = 0.0;
  double frac_above = 0.0;
};

ScoreHistogram score_histogram(std::span<const double> scores);

// Relative token reduction in percent; positive means fewer tokens.
double token_delta(double tok_baseline, double tok_new);

// Absolute accuracy improvement in percentage points.
double acc_delta(double acc_baseline, double acc_new);

struct RolloutStat {
  ResponseFormat format = ResponseFormat::direct;
  bool correct = false;
  int n_tok = 0;
};

// Usage ratios, per-format and overall accuracy, correct-share per format
// (the fraction of all rollouts that used format k and were correct) and
// mean token count. Empty input yields total == 0 with zeroed fields.
struct FormatReport {
  std::size_t total = 0;
  std::array<double, 3> usage{};
  std::array<std::optional<double>, 3> accuracy{};  // nullopt when a format is unused
  std::array<double, 3> correct_share{};
  double overall_accuracy = 0.0;
  double mean_tokens = 0.0;
};

FormatReport format_report(std::span<const RolloutStat> rollouts);

struct CollapseEvent {
  ResponseFormat format = ResponseFormat::direct;
  int onset_step = 0;
};

// Earliest step from which one format's usage stays at or above threshold
// for `window` consecutive steps. Requires threshold in (0.5, 1] and
// window >= 1.
std::optional<CollapseEvent> detect_collapse(std::span<const std::array<double, 3>> usage,
                                             double threshold, int window);
std::optional<CollapseEvent> detect_collapse(const TrainHistory& history,
                                             double threshold = 0.9, int window = 10);

// External compression service contract. compress() rewrites a response to
// its minimally sufficient form; judge() decides whether an answer matches
// a reference. The shipped stub is deterministic and keeps the core free of
// model or network dependencies.
class CompressorClient {
 public:
  virtual ~CompressorClient() = default;
  virtual std::string compress(const std::string& question, const std::string& response) = 0;
  virtual bool judge(const std::string& answer, const std::string& reference) = 0;
};

// Deterministic stub: compression re-renders just the answer block of a
// parseable response (unparseable text passes through unchanged); the judge
// compares whitespace-trimmed answers for equality.
class TruncatingCompressor : public CompressorClient {
 public:
  std::string compress(const std::string& question, const std::string& response) override;
  bool judge(const std::string& answer, const std::string& reference) override;
};

// One line of the redundancy corpus.
struct OverthinkingRecord {
  std::string question;
  std::string original;
  std::optional<std::string> compressed;
  bool correct_original = false;
  std::optional<bool> correct_compressed;
};

struct OverthinkingReport {
  std::size_t eligible = 0;
  std::size_t ineligible = 0;
  std::vector<std::pair<std::string, std::size_t>> ineligible_reasons;  // reason -> count
  std::vector<double> scores;               // one per eligible record, in input order
  std::vector<std::size_t> anomaly_indices; // positions in `scores` with score < 1
  ScoreHistogram histogram;
};

// Scores a corpus with the given tokenizer. When a compressor is supplied,
// records without a compressed side get one from compress() and a verdict
// from judge() against the original's answer segment; otherwise such records
// are ineligible.
OverthinkingReport score_corpus(std::span<const OverthinkingRecord> records,
                                const Tokenizer& tok,
                                CompressorClient* compressor = nullptr);

}  // namespace fsgrpo
