#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "msqa/backend.hpp"

// Offline stand-ins for the LLM, expert and judge endpoints. They read the
// prompts the harness composes with its default templates.
namespace msqa::mock {

// Text between `open` and the next `close` (or the end when close is empty).
std::optional<std::string> section(std::string_view prompt, std::string_view open, std::string_view close);

/// Expert: canned opinion for a known question text, else a generic hint.
MockChatTransport::Handler expert_handler(std::map<std::string, std::string> opinions);

/// LLM: builds on the expert opinion or the top chunk when present; without
/// context it answers by restating the question, or asks for clarification
/// for roughly one question in four.
MockChatTransport::Handler llm_handler();

/// Judge: rephrase returns the answer unchanged, pairwise prefers the longer
/// answer ("TIE" on equal length), no-answer checks use the pattern tier.
MockChatTransport::Handler judge_handler();

inline constexpr std::string_view kRefusal =
    "I'm sorry, but I'm not sure what you mean by the question. Could you please provide more information or "
    "clarify your question?";

}  // namespace msqa::mock
