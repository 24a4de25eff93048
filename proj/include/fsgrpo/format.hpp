#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace fsgrpo {

// The three response formats, ordered by expected verbosity. The integer
// value is the format index k used by the reward bonuses.
enum class ResponseFormat : int {
  full = 1,             // <perception> + <reasoning> + <answer>
  perception_only = 2,  // <perception> + <answer>
  direct = 3,           // <answer> only
};

int format_index(ResponseFormat f);
ResponseFormat format_from_index(int k);  // throws std::invalid_argument
std::string_view format_name(ResponseFormat f);
std::optional<ResponseFormat> format_from_name(std::string_view name);

// Pluggable token counting strategy. Reward math only depends on relative
// counts, so a real tokenizer is not required; whitespace splitting is the
// default and fixed_chars(c) counts ceil(bytes / c).
struct Tokenizer {
  enum class Mode { whitespace, fixed_chars };

  Mode mode = Mode::whitespace;
  int chars_per_token = 1;

  static Tokenizer whitespace() { return {}; }
  static Tokenizer fixed_chars(int c);  // throws std::invalid_argument if c < 1

  int count(std::string_view text) const;
};

int count_tokens(std::string_view text, const Tokenizer& tok);

struct ParsedResponse {
  std::optional<std::string> perception;
  std::optional<std::string> reasoning;
  std::string answer;
  ResponseFormat format = ResponseFormat::direct;
  int token_count = 0;
  // Free text found after </answer>. Tolerated by the parser and surfaced
  // as a structure warning rather than a parse error.
  std::string trailing_text;
};

enum class ParseErrorKind { missing_answer, malformed };

struct ParseError {
  ParseErrorKind kind = ParseErrorKind::malformed;
  std::string message;
};

struct ParseResult {
  std::optional<ParsedResponse> response;
  std::optional<ParseError> error;

  bool ok() const { return response.has_value(); }
};

// Parses the canonical tag grammar: at most one block per tag, in the order
// perception -> reasoning -> answer, closing tags required, only whitespace
// between blocks. Never throws on arbitrary byte input.
//
// missing_answer: no <answer> opening tag anywhere in the text.
// malformed: everything else (unclosed, duplicated or misordered tags,
// reasoning without perception, non-whitespace text before or between
// blocks, tags after the answer block).
ParseResult parse_response(std::string_view text, const Tokenizer& tok = {});

// Format is a pure function of segment presence:
// {P,R,A} -> full, {P,A} -> perception_only, {A} -> direct.
// A response with reasoning but no perception is invalid input and throws.
ResponseFormat classify_format(const ParsedResponse& parsed);

// Canonical rendering, byte-literal tag pairs with no separators.
std::string render_response(const std::optional<std::string>& perception,
                            const std::optional<std::string>& reasoning,
                            const std::string& answer);
std::string render_response(const ParsedResponse& parsed);

enum class StructureWarningKind { nested_tag, empty_segment, trailing_text };

struct StructureWarning {
  StructureWarningKind kind;
  std::string segment;  // "perception", "reasoning", "answer" or "" for trailing text
  std::string detail;
};

// Structural checks only: tag literals inside segment content, empty or
// whitespace-only segments, trailing free text. Never judges semantics.
std::vector<StructureWarning> validate_structure(const ParsedResponse& parsed);

}  // namespace fsgrpo
