#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <string>
#include <vector>

#include "fsgrpo/format.hpp"
#include "fsgrpo/rng.hpp"

using namespace fsgrpo;

TEST_CASE("parse: direct answer") {
  const auto r = parse_response("<answer>42</answer>");
  REQUIRE(r.ok());
  CHECK(r.response->format == ResponseFormat::direct);
  CHECK(r.response->answer == "42");
  CHECK_FALSE(r.response->perception.has_value());
  CHECK_FALSE(r.response->reasoning.has_value());
}

TEST_CASE("parse: perception only") {
  const auto r = parse_response("<perception>sign reads STOP</perception><answer>STOP</answer>");
  REQUIRE(r.ok());
  CHECK(r.response->format == ResponseFormat::perception_only);
  CHECK(r.response->perception == "sign reads STOP");
  CHECK(r.response->answer == "STOP");
}

TEST_CASE("parse: full format") {
  const auto r = parse_response(
      "<perception>a cat on a keyboard</perception>"
      "<reasoning>cats play with yarn</reasoning>"
      "<answer>yarn</answer>");
  REQUIRE(r.ok());
  CHECK(r.response->format == ResponseFormat::full);
  CHECK(r.response->reasoning == "cats play with yarn");
}

TEST_CASE("parse: reasoning without perception is malformed") {
  const auto r = parse_response("<reasoning>x</reasoning><answer>y</answer>");
  REQUIRE_FALSE(r.ok());
  CHECK(r.error->kind == ParseErrorKind::malformed);
}

TEST_CASE("parse: whitespace between blocks is fine") {
  const auto r = parse_response("  <perception>p</perception>\n\t<answer>a</answer>  ");
  REQUIRE(r.ok());
  CHECK(r.response->format == ResponseFormat::perception_only);
  CHECK(r.response->trailing_text.empty());
}

TEST_CASE("parse: error taxonomy") {
  auto kind = [](const std::string& text) { return parse_response(text).error->kind; };

  SUBCASE("missing answer") {
    CHECK(kind("") == ParseErrorKind::missing_answer);
    CHECK(kind("hello") == ParseErrorKind::missing_answer);
    CHECK(kind("<perception>p</perception>") == ParseErrorKind::missing_answer);
    CHECK(kind("</answer>") == ParseErrorKind::missing_answer);
  }
  SUBCASE("malformed") {
    CHECK(kind("<answer>x") == ParseErrorKind::malformed);                                // unclosed
    CHECK(kind("<answer>a</answer><answer>b</answer>") == ParseErrorKind::malformed);     // duplicate
    CHECK(kind("<answer>a</answer><perception>p</perception>") == ParseErrorKind::malformed);  // misordered
    CHECK(kind("<reasoning>r</reasoning><perception>p</perception><answer>a</answer>") ==
          ParseErrorKind::malformed);                                                     // misordered
    CHECK(kind("<perception>p</perception>junk<answer>a</answer>") == ParseErrorKind::malformed);
    CHECK(kind("junk <answer>a</answer>") == ParseErrorKind::malformed);
    CHECK(kind("<perception>p</perception><perception>q</perception><answer>a</answer>") ==
          ParseErrorKind::malformed);
  }
}

TEST_CASE("parse: trailing free text is tolerated and flagged") {
  const auto r = parse_response("<answer>4</answer> and then some");
  REQUIRE(r.ok());
  CHECK(r.response->trailing_text == "and then some");
  const auto warnings = validate_structure(*r.response);
  REQUIRE(warnings.size() == 1);
  CHECK(warnings[0].kind == StructureWarningKind::trailing_text);
}

TEST_CASE("parse: trailing tags are malformed, not trailing text") {
  const auto r = parse_response("<answer>4</answer><reasoning>r</reasoning>");
  REQUIRE_FALSE(r.ok());
  CHECK(r.error->kind == ParseErrorKind::malformed);
}

TEST_CASE("classify_format follows segment presence") {
  ParsedResponse p;
  p.answer = "a";
  CHECK(classify_format(p) == ResponseFormat::direct);
  p.perception = "x";
  CHECK(classify_format(p) == ResponseFormat::perception_only);
  p.reasoning = "y";
  CHECK(classify_format(p) == ResponseFormat::full);

  ParsedResponse bad;
  bad.answer = "a";
  bad.reasoning = "r";
  CHECK_THROWS_AS(classify_format(bad), std::invalid_argument);
}

TEST_CASE("count_tokens") {
  const Tokenizer ws = Tokenizer::whitespace();
  CHECK(count_tokens("", ws) == 0);
  CHECK(count_tokens("a b c", ws) == 3);
  CHECK(count_tokens("  a\t\tb \n", ws) == 2);
  CHECK(count_tokens("abcdefgh", Tokenizer::fixed_chars(4)) == 2);
  CHECK(count_tokens("abc", Tokenizer::fixed_chars(4)) == 1);
  CHECK(count_tokens("", Tokenizer::fixed_chars(4)) == 0);
  CHECK_THROWS_AS(Tokenizer::fixed_chars(0), std::invalid_argument);
}

TEST_CASE("token_count covers the full raw text") {
  const auto r = parse_response("<answer>one two</answer>");
  REQUIRE(r.ok());
  // one token for "<answer>one", one for "two</answer>"
  CHECK(r.response->token_count == 2);
}

TEST_CASE("validate_structure") {
  SUBCASE("well formed full response has no warnings") {
    const auto r = parse_response("<perception>p</perception><reasoning>q</reasoning><answer>a</answer>");
    REQUIRE(r.ok());
    CHECK(validate_structure(*r.response).empty());
  }
  SUBCASE("tag literal inside a segment") {
    const auto r = parse_response("<perception>has <answer> inside</perception><answer>a</answer>");
    REQUIRE(r.ok());
    const auto warnings = validate_structure(*r.response);
    REQUIRE(warnings.size() == 1);
    CHECK(warnings[0].kind == StructureWarningKind::nested_tag);
    CHECK(warnings[0].segment == "perception");
  }
  SUBCASE("empty perception block") {
    const auto r = parse_response("<perception></perception><answer>a</answer>");
    REQUIRE(r.ok());
    const auto warnings = validate_structure(*r.response);
    REQUIRE(warnings.size() == 1);
    CHECK(warnings[0].kind == StructureWarningKind::empty_segment);
    CHECK(warnings[0].segment == "perception");
  }
  SUBCASE("whitespace-only answer counts as empty") {
    const auto r = parse_response("<answer>  </answer>");
    REQUIRE(r.ok());
    const auto warnings = validate_structure(*r.response);
    REQUIRE(warnings.size() == 1);
    CHECK(warnings[0].kind == StructureWarningKind::empty_segment);
    CHECK(warnings[0].segment == "answer");
  }
}

namespace {

// Random segment content from a tag-free alphabet.
std::string random_content(SplitMix64& rng) {
  static const char alphabet[] = "abcdefghijklmnopqrstuvwxyz0123456789 .,:;!?";
  const int len = rng.uniform_int(1, 40);
  std::string s;
  for (int i = 0; i < len; ++i) {
    s += alphabet[static_cast<std::size_t>(rng.uniform_int(0, sizeof(alphabet) - 2))];
  }
  return s;
}

}  // namespace

TEST_CASE("round trip: classify(parse(render(p))) == p.format") {
  SplitMix64 rng(20260810);
  for (int i = 0; i < 1000; ++i) {
    const int shape = rng.uniform_int(1, 3);
    std::optional<std::string> perception, reasoning;
    if (shape <= 2) perception = random_content(rng);
    if (shape == 1) reasoning = random_content(rng);
    const std::string answer = random_content(rng);
    const auto fmt = format_from_index(shape);

    const std::string text = render_response(perception, reasoning, answer);
    const auto r = parse_response(text);
    REQUIRE(r.ok());
    CHECK(classify_format(*r.response) == fmt);
    CHECK(r.response->answer == answer);
    CHECK(r.response->perception == perception);
    CHECK(r.response->reasoning == reasoning);
  }
}

TEST_CASE("fuzz: parser never throws on tag soup") {
  static const char* pieces[] = {
      "<perception>", "</perception>", "<reasoning>", "</reasoning>",
      "<answer>",     "</answer>",     "<answ",        "</",
      "<",            ">",             " ",            "\n",
      "x",            "stop sign",     "\xff\xfe",     "<answer>ok</answer>",
  };
  SplitMix64 rng(99);
  for (int i = 0; i < 5000; ++i) {
    std::string text;
    const int n = rng.uniform_int(0, 12);
    for (int j = 0; j < n; ++j) {
      text += pieces[static_cast<std::size_t>(rng.uniform_int(0, 15))];
    }
    const auto r = parse_response(text);  // must return a value or an error
    CHECK((r.ok() || r.error.has_value()));
  }
}

TEST_CASE("format index mapping") {
  CHECK(format_index(ResponseFormat::full) == 1);
  CHECK(format_index(ResponseFormat::perception_only) == 2);
  CHECK(format_index(ResponseFormat::direct) == 3);
  CHECK(format_from_index(2) == ResponseFormat::perception_only);
  CHECK_THROWS_AS(format_from_index(0), std::invalid_argument);
  CHECK_THROWS_AS(format_from_index(4), std::invalid_argument);
  CHECK(format_from_name("direct") == ResponseFormat::direct);
  CHECK_FALSE(format_from_name("verbose").has_value());
}
