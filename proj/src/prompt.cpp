#include "ragprune/prompt.hpp"

#include "ragprune/common.hpp"

#include <cctype>

namespace ragprune {

std::string build_prompt(std::span<const std::string> docs, std::string_view question) {
  if (question.empty()) throw ConfigError("build_prompt: empty question");

  std::string context;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    if (i > 0) context += '\n';
    context += docs[i];
  }

  // Line breaks and trailing spaces follow the original template literal.
  std::string prompt;
  prompt += "\n";
  prompt += "You are a friendly chatbot who responds to the user's question by \n";
  prompt += "looking into context.</s>\n";
  prompt += "Context: \n";
  prompt += context;
  prompt += "\n</s>\n";
  prompt += "Question: ";
  prompt += question;
  prompt += "</s>\n";
  return prompt;
}

std::size_t whitespace_token_count(std::string_view text) {
  std::size_t count = 0;
  bool in_token = false;
  for (const char c : text) {
    const bool space = std::isspace(static_cast<unsigned char>(c)) != 0;
    if (!space && !in_token) ++count;
    in_token = !space;
  }
  return count;
}

namespace {

std::size_t context_tokens(std::span<const std::string> docs) {
  std::size_t total = 0;
  for (const auto& doc : docs) total += whitespace_token_count(doc);
  return total;
}

}  // namespace

PromptBundle make_prompt_bundle(std::span<const std::string> filtered_docs,
                                std::span<const std::string> original_docs, std::string_view question) {
  PromptBundle bundle;
  bundle.question = std::string(question);
  bundle.filtered_prompt = build_prompt(filtered_docs, question);
  bundle.original_prompt = build_prompt(original_docs, question);
  bundle.context_token_estimate = context_tokens(filtered_docs);
  bundle.original_token_estimate = context_tokens(original_docs);
  if (filtered_docs.empty()) bundle.warnings.push_back("filtered prompt has an empty context");
  if (original_docs.empty()) bundle.warnings.push_back("original prompt has an empty context");
  return bundle;
}

}  // namespace ragprune
