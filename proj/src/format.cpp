#include "fsgrpo/format.hpp"

#include <cctype>
#include <stdexcept>

namespace fsgrpo {

namespace {

constexpr std::string_view kOpenTag[3] = {"<perception>", "<reasoning>", "<answer>"};
constexpr std::string_view kCloseTag[3] = {"</perception>", "</reasoning>", "</answer>"};
constexpr std::string_view kSegmentName[3] = {"perception", "reasoning", "answer"};

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

std::size_t skip_ws(std::string_view s, std::size_t pos) {
  while (pos < s.size() && is_space(s[pos])) ++pos;
  return pos;
}

bool all_ws(std::string_view s) {
  for (char c : s) {
    if (!is_space(c)) return false;
  }
  return true;
}

// Returns the first functional tag literal found in s, or empty view.
std::string_view find_embedded_tag(std::string_view s) {
  for (int i = 0; i < 3; ++i) {
    if (s.find(kOpenTag[i]) != std::string_view::npos) return kOpenTag[i];
    if (s.find(kCloseTag[i]) != std::string_view::npos) return kCloseTag[i];
  }
  return {};
}

}  // namespace

int format_index(ResponseFormat f) { return static_cast<int>(f); }

ResponseFormat format_from_index(int k) {
  if (k < 1 || k > 3) throw std::invalid_argument("format index must be 1, 2 or 3");
  return static_cast<ResponseFormat>(k);
}

std::string_view format_name(ResponseFormat f) {
  switch (f) {
    case ResponseFormat::full: return "full";
    case ResponseFormat::perception_only: return "perception_only";
    case ResponseFormat::direct: return "direct";
  }
  return "unknown";
}

std::optional<ResponseFormat> format_from_name(std::string_view name) {
  if (name == "full") return ResponseFormat::full;
  if (name == "perception_only") return ResponseFormat::perception_only;
  if (name == "direct") return ResponseFormat::direct;
  return std::nullopt;
}

Tokenizer Tokenizer::fixed_chars(int c) {
  if (c < 1) throw std::invalid_argument("chars_per_token must be positive");
  Tokenizer tok;
  tok.mode = Mode::fixed_chars;
  tok.chars_per_token = c;
  return tok;
}

int Tokenizer::count(std::string_view text) const {
  if (text.empty()) return 0;
  if (mode == Mode::fixed_chars) {
    const auto c = static_cast<std::size_t>(chars_per_token);
    return static_cast<int>((text.size() + c - 1) / c);
  }
  int n = 0;
  bool in_token = false;
  for (char ch : text) {
    if (is_space(ch)) {
      in_token = false;
    } else if (!in_token) {
      in_token = true;
      ++n;
    }
  }
  return n;
}

int count_tokens(std::string_view text, const Tokenizer& tok) { return tok.count(text); }

ParseResult parse_response(std::string_view text, const Tokenizer& tok) {
  auto fail = [](ParseErrorKind kind, std::string msg) {
    return ParseResult{std::nullopt, ParseError{kind, std::move(msg)}};
  };
  auto malformed = [&](std::string msg) {
    return fail(ParseErrorKind::malformed, std::move(msg));
  };

  std::optional<std::string> segment[3];
  std::size_t pos = skip_ws(text, 0);
  int next_allowed = 0;

  while (pos < text.size() && text[pos] == '<') {
    int idx = -1;
    for (int i = 0; i < 3; ++i) {
      if (text.substr(pos).starts_with(kOpenTag[i])) {
        idx = i;
        break;
      }
    }
    if (idx < 0) break;  // stray '<...' that is not a block opening
    if (segment[idx]) {
      return malformed("duplicate <" + std::string(kSegmentName[idx]) + "> block");
    }
    if (idx < next_allowed) {
      return malformed("<" + std::string(kSegmentName[idx]) + "> block out of order");
    }
    const std::size_t body = pos + kOpenTag[idx].size();
    const std::size_t close = text.find(kCloseTag[idx], body);
    if (close == std::string_view::npos) {
      return malformed("unclosed <" + std::string(kSegmentName[idx]) + "> block");
    }
    segment[idx] = std::string(text.substr(body, close - body));
    pos = skip_ws(text, close + kCloseTag[idx].size());
    next_allowed = idx + 1;
    if (idx == 2) break;  // answer is the final block
  }

  const std::string_view rest = text.substr(pos);
  if (!segment[2]) {
    if (text.find(kOpenTag[2]) != std::string_view::npos) {
      return malformed("unexpected content before or between blocks");
    }
    return fail(ParseErrorKind::missing_answer, "no <answer> block");
  }
  std::string trailing;
  if (!rest.empty()) {
    const std::string_view tag = find_embedded_tag(rest);
    if (!tag.empty()) {
      return malformed("tag " + std::string(tag) + " outside the canonical block sequence");
    }
    trailing = std::string(rest);
  }
  if (segment[1] && !segment[0]) {
    return malformed("reasoning block without perception block");
  }

  ParsedResponse out;
  out.perception = std::move(segment[0]);
  out.reasoning = std::move(segment[1]);
  out.answer = std::move(*segment[2]);
  out.format = out.reasoning ? ResponseFormat::full
               : out.perception ? ResponseFormat::perception_only
                                : ResponseFormat::direct;
  out.token_count = tok.count(text);
  out.trailing_text = std::move(trailing);
  return ParseResult{std::move(out), std::nullopt};
}

ResponseFormat classify_format(const ParsedResponse& parsed) {
  if (parsed.reasoning && !parsed.perception) {
    throw std::invalid_argument("invalid response: reasoning without perception");
  }
  if (parsed.reasoning) return ResponseFormat::full;
  if (parsed.perception) return ResponseFormat::perception_only;
  return ResponseFormat::direct;
}

std::string render_response(const std::optional<std::string>& perception,
                            const std::optional<std::string>& reasoning,
                            const std::string& answer) {
  std::string out;
  if (perception) {
    out += "<perception>";
    out += *perception;
    out += "</perception>";
  }
  if (reasoning) {
    out += "<reasoning>";
    out += *reasoning;
    out += "</reasoning>";
  }
  out += "<answer>";
  out += answer;
  out += "</answer>";
  return out;
}

std::string render_response(const ParsedResponse& parsed) {
  return render_response(parsed.perception, parsed.reasoning, parsed.answer);
}

std::vector<StructureWarning> validate_structure(const ParsedResponse& parsed) {
  std::vector<StructureWarning> warnings;
  const std::optional<std::string>* segments[3] = {&parsed.perception, &parsed.reasoning, nullptr};
  for (int i = 0; i < 3; ++i) {
    const std::string* content = nullptr;
    if (i < 2) {
      if (segments[i]->has_value()) content = &segments[i]->value();
    } else {
      content = &parsed.answer;
    }
    if (!content) continue;
    const std::string name(kSegmentName[i]);
    const std::string_view tag = find_embedded_tag(*content);
    if (!tag.empty()) {
      warnings.push_back({StructureWarningKind::nested_tag, name,
                          "segment contains tag literal " + std::string(tag)});
    }
    if (all_ws(*content)) {
      warnings.push_back({StructureWarningKind::empty_segment, name, "segment is empty"});
    }
  }
  if (!parsed.trailing_text.empty()) {
    warnings.push_back({StructureWarningKind::trailing_text, "",
                        "free text after </answer>: " + parsed.trailing_text});
  }
  return warnings;
}

}  // namespace fsgrpo
