#include "grouprl/vocab.hpp"

#include "grouprl/errors.hpp"

#include <unordered_map>
#include <unordered_set>

namespace grouprl {

Vocabulary::Vocabulary(std::vector<Token> tokens) : tokens_(std::move(tokens)) {
  if (tokens_.empty()) throw ContractViolation("vocabulary must not be empty");

  options_.assign(kNumOptions, -1);
  prompt_symbols_.assign(kNumPromptSymbols, -1);

  std::unordered_set<std::string> names;
  for (TokenId id = 0; id < size(); ++id) {
    const Token& t = tokens_[static_cast<size_t>(id)];
    if (t.name.empty()) throw ContractViolation("token " + std::to_string(id) + " has empty name");
    if (!names.insert(t.name).second)
      throw ContractViolation("duplicate token name '" + t.name + "'");
    switch (t.role) {
      case TokenRole::kEos:
        if (eos_ >= 0) throw ContractViolation("multiple EOS tokens");
        eos_ = id;
        break;
      case TokenRole::kThinkOpen:
        if (think_open_ >= 0) throw ContractViolation("multiple THINK_OPEN tokens");
        think_open_ = id;
        break;
      case TokenRole::kThinkClose:
        if (think_close_ >= 0) throw ContractViolation("multiple THINK_CLOSE tokens");
        think_close_ = id;
        break;
      case TokenRole::kAnsOpen:
        if (ans_open_ >= 0) throw ContractViolation("multiple ANS_OPEN tokens");
        ans_open_ = id;
        break;
      case TokenRole::kAnsClose:
        if (ans_close_ >= 0) throw ContractViolation("multiple ANS_CLOSE tokens");
        ans_close_ = id;
        break;
      case TokenRole::kOption:
        if (t.arg < 0 || t.arg >= kNumOptions)
          throw ContractViolation("option index out of range for token '" + t.name + "'");
        if (options_[static_cast<size_t>(t.arg)] >= 0)
          throw ContractViolation("duplicate option " + std::string(1, option_letter(t.arg)));
        options_[static_cast<size_t>(t.arg)] = id;
        break;
      case TokenRole::kPromptSymbol:
        if (t.arg < 0 || t.arg >= kNumPromptSymbols)
          throw ContractViolation("prompt-symbol index out of range for token '" + t.name + "'");
        if (prompt_symbols_[static_cast<size_t>(t.arg)] >= 0)
          throw ContractViolation("duplicate prompt symbol " + std::to_string(t.arg));
        prompt_symbols_[static_cast<size_t>(t.arg)] = id;
        break;
      case TokenRole::kFiller:
        break;
    }
  }

  int option_count = 0;
  for (TokenId id : options_) option_count += (id >= 0);
  int symbol_count = 0;
  for (TokenId id : prompt_symbols_) symbol_count += (id >= 0);
  full_task_shape_ = eos_ >= 0 && think_open_ >= 0 && think_close_ >= 0 && ans_open_ >= 0 &&
                     ans_close_ >= 0 && option_count == kNumOptions &&
                     symbol_count == kNumPromptSymbols;
}

Vocabulary Vocabulary::task_vocab(int filler_count) {
  std::vector<Token> tokens;
  tokens.push_back({"<eos>", TokenRole::kEos, 0});
  tokens.push_back({"<think>", TokenRole::kThinkOpen, 0});
  tokens.push_back({"</think>", TokenRole::kThinkClose, 0});
  tokens.push_back({"<answer>", TokenRole::kAnsOpen, 0});
  tokens.push_back({"</answer>", TokenRole::kAnsClose, 0});
  for (int i = 0; i < kNumOptions; ++i)
    tokens.push_back({std::string(1, option_letter(i)), TokenRole::kOption, i});
  for (int i = 0; i < kNumPromptSymbols; ++i)
    tokens.push_back({"S" + std::to_string(i), TokenRole::kPromptSymbol, i});
  for (int i = 0; i < filler_count; ++i)
    tokens.push_back({"F" + std::to_string(i), TokenRole::kFiller, i});
  return Vocabulary(std::move(tokens));
}

const Token& Vocabulary::token(TokenId id) const {
  if (id < 0 || id >= size())
    throw ContractViolation("token id " + std::to_string(id) + " out of range");
  return tokens_[static_cast<size_t>(id)];
}

TokenId Vocabulary::id_of(const std::string& name) const {
  for (TokenId id = 0; id < size(); ++id)
    if (tokens_[static_cast<size_t>(id)].name == name) return id;
  return -1;
}

TokenId Vocabulary::option(int option_index) const {
  if (option_index < 0 || option_index >= kNumOptions) return -1;
  return options_[static_cast<size_t>(option_index)];
}

TokenId Vocabulary::prompt_symbol(int symbol_index) const {
  if (symbol_index < 0 || symbol_index >= kNumPromptSymbols) return -1;
  return prompt_symbols_[static_cast<size_t>(symbol_index)];
}

}  // namespace grouprl
