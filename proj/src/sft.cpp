#include "fsgrpo/sft.hpp"

#include <algorithm>
#include <cctype>
#include <exception>
#include <stdexcept>

namespace fsgrpo {

namespace {

bool all_ws(const std::string& s) {
  return std::all_of(s.begin(), s.end(),
                     [](char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; });
}

// Numeric-aware id ordering so "9" sorts before "10"; falls back to
// lexicographic comparison for non-numeric ids.
bool id_less(const std::string& a, const std::string& b) {
  const bool a_num = !a.empty() && std::all_of(a.begin(), a.end(), [](char c) {
    return std::isdigit(static_cast<unsigned char>(c)) != 0;
  });
  const bool b_num = !b.empty() && std::all_of(b.begin(), b.end(), [](char c) {
    return std::isdigit(static_cast<unsigned char>(c)) != 0;
  });
  if (a_num && b_num) {
    if (a.size() != b.size()) return a.size() < b.size();
    return a < b;
  }
  return a < b;
}

}  // namespace

std::optional<ResponseFormat> assign_format(const OracleVerdicts& v) {
  if (!v.generation_correct) return std::nullopt;
  if (v.direct_answer_pass) return ResponseFormat::direct;
  if (v.perception_only_pass) return ResponseFormat::perception_only;
  return ResponseFormat::full;
}

ParsedResponse truncate_to_format(const ParsedResponse& full_response, ResponseFormat target,
                                  const Tokenizer& tok) {
  if (full_response.format != ResponseFormat::full) {
    throw std::invalid_argument("truncate_to_format expects a full-format response");
  }
  ParsedResponse out;
  out.answer = full_response.answer;
  switch (target) {
    case ResponseFormat::full:
      out.perception = full_response.perception;
      out.reasoning = full_response.reasoning;
      break;
    case ResponseFormat::perception_only:
      out.perception = full_response.perception;
      break;
    case ResponseFormat::direct:
      break;
  }
  out.format = target;
  out.token_count = tok.count(render_response(out));
  return out;
}

SftBuildResult build_records(std::span<const RawSample> samples, VerdictOracle& oracle,
                             const SftBuildOptions& options) {
  SftBuildResult result;

  for (const auto& sample : samples) {
    const auto parsed = parse_response(sample.full_response, options.tokenizer);
    if (!parsed.ok()) {
      result.rejections.push_back({sample.id, "unparseable_response: " + parsed.error->message});
      continue;
    }
    if (parsed.response->format != ResponseFormat::full) {
      result.rejections.push_back({sample.id, "source_response_not_full_format"});
      continue;
    }

    OracleVerdicts v;
    try {
      v = oracle.verdicts(sample);
    } catch (const std::exception& e) {
      result.rejections.push_back({sample.id, std::string("oracle_failure: ") + e.what()});
      continue;
    }

    const auto assigned = assign_format(v);
    if (!assigned) {
      result.rejections.push_back({sample.id, "generation_exact_match_failed"});
      continue;
    }

    const ParsedResponse projected =
        truncate_to_format(*parsed.response, *assigned, options.tokenizer);
    const std::string rendered = render_response(projected);

    // Mechanical quality filters.
    if (projected.answer.empty() || all_ws(projected.answer)) {
      result.rejections.push_back({sample.id, "empty_answer"});
      continue;
    }
    const auto round_trip = parse_response(rendered, options.tokenizer);
    if (!round_trip.ok() || round_trip.response->format != *assigned) {
      result.rejections.push_back({sample.id, "render_round_trip_failed"});
      continue;
    }
    if (round_trip.response->token_count > options.max_tokens) {
      result.rejections.push_back({sample.id, "over_token_limit"});
      continue;
    }

    std::string provenance;
    if (*assigned == ResponseFormat::direct) {
      provenance = "direct_answer_pass";
    } else if (*assigned == ResponseFormat::perception_only) {
      provenance = "perception_only_pass";
    } else {
      provenance = "failed_both_tests";
    }
    result.records.push_back({sample.id, *assigned, rendered, std::move(provenance)});
  }

  std::stable_sort(result.records.begin(), result.records.end(),
                   [](const SftRecord& a, const SftRecord& b) {
                     return id_less(a.question_id, b.question_id);
                   });
  return result;
}

}  // namespace fsgrpo
