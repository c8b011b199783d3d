#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ragprune {

/// Chat prompt with an instruction line, the documents joined by single
/// newlines as context, and the question, each section closed by "</s>".
/// Throws ConfigError on an empty question.
std::string build_prompt(std::span<const std::string> docs, std::string_view question);

/// Number of whitespace-separated tokens.
std::size_t whitespace_token_count(std::string_view text);

struct PromptBundle {
  std::string filtered_prompt;
  std::string original_prompt;
  std::string question;
  std::size_t context_token_estimate = 0;   // filtered context
  std::size_t original_token_estimate = 0;  // original context
  std::vector<std::string> warnings;
};

PromptBundle make_prompt_bundle(std::span<const std::string> filtered_docs,
                                std::span<const std::string> original_docs, std::string_view question);

}  // namespace ragprune
