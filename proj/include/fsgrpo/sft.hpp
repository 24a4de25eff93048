#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fsgrpo/format.hpp"

namespace fsgrpo {

// Outcomes of the functional format tests for one sample. Format assignment
// is defined only when the generated full response matched the ground truth.
struct OracleVerdicts {
  bool generation_correct = false;
  bool perception_only_pass = false;
  bool direct_answer_pass = false;
};

// Rejected (exact-match filter) when generation_correct is false; otherwise
// the cheapest passing format: direct if the direct-answer test passed, else
// perception-only if that test passed, else full.
std::optional<ResponseFormat> assign_format(const OracleVerdicts& v);

// Projects a full response onto a shorter format by dropping segments; the
// answer is preserved verbatim. target == full is the identity. Requires a
// full-format input. token_count is recomputed over the rendered text.
ParsedResponse truncate_to_format(const ParsedResponse& full_response, ResponseFormat target,
                                  const Tokenizer& tok = {});

struct RawSample {
  std::string id;
  std::string question;
  std::string full_response;
};

struct SftRecord {
  std::string question_id;
  ResponseFormat format = ResponseFormat::full;
  std::string response;    // rendered in the assigned format
  std::string provenance;  // which verdicts determined the assignment
};

struct Rejection {
  std::string id;
  std::string reason;
};

// Verdict provider: the real thing runs restricted-input model calls; tests
// and the offline CLI use table-driven verdicts. May throw; a throwing
// sample is logged and skipped.
class VerdictOracle {
 public:
  virtual ~VerdictOracle() = default;
  virtual OracleVerdicts verdicts(const RawSample& sample) = 0;
};

struct SftBuildOptions {
  Tokenizer tokenizer{};
  int max_tokens = 2048;  // quality filter on the rendered record
};

struct SftBuildResult {
  std::vector<SftRecord> records;     // sorted by question id
  std::vector<Rejection> rejections;  // every dropped sample with its reason
};

// Three-stage pipeline: parse and require a full-format source response,
// assign the format from the oracle verdicts, project, then apply the
// mechanical quality filters (round-trip parse, nonempty answer, token cap).
SftBuildResult build_records(std::span<const RawSample> samples, VerdictOracle& oracle,
                             const SftBuildOptions& options = {});

}  // namespace fsgrpo
