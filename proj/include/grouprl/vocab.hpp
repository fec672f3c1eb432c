#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace grouprl {

// Token roles. Tags are atomic: one token per tag, never spelled out from
// characters.
enum class TokenRole : uint8_t {
  kEos,
  kThinkOpen,
  kThinkClose,
  kAnsOpen,
  kAnsClose,
  kOption,        // arg = option index 0..5 (A..F)
  kPromptSymbol,  // arg = symbol index 0..5
  kFiller,        // arg = filler index
};

constexpr int kNumOptions = 6;
constexpr int kNumPromptSymbols = 6;

inline bool is_tag_role(TokenRole r) {
  return r == TokenRole::kThinkOpen || r == TokenRole::kThinkClose ||
         r == TokenRole::kAnsOpen || r == TokenRole::kAnsClose;
}

inline char option_letter(int option_index) { return static_cast<char>('A' + option_index); }

// Returns -1 when c is not one of A..F.
inline int option_index_from_letter(char c) {
  if (c >= 'A' && c <= 'F') return c - 'A';
  return -1;
}

struct Token {
  std::string name;
  TokenRole role;
  int arg = 0;  // option/symbol/filler index, 0 for untagged roles
};

using TokenId = int32_t;

// A fixed token table with contiguous ids 0..size()-1.
//
// Construction checks id/name consistency only; task_vocab() additionally
// enforces the full task shape (exactly one of each special token and exactly
// six options). Reduced tables are legal for fixtures and tests.
class Vocabulary {
 public:
  explicit Vocabulary(std::vector<Token> tokens);

  // Standard task vocabulary: EOS, tag pair tokens, options A..F, prompt
  // symbols S0..S5, plus `filler_count` filler tokens F0..Fn.
  static Vocabulary task_vocab(int filler_count = 0);

  int size() const { return static_cast<int>(tokens_.size()); }
  const Token& token(TokenId id) const;
  const std::vector<Token>& tokens() const { return tokens_; }

  // -1 when no such token exists.
  TokenId id_of(const std::string& name) const;
  TokenId eos() const { return eos_; }
  TokenId think_open() const { return think_open_; }
  TokenId think_close() const { return think_close_; }
  TokenId ans_open() const { return ans_open_; }
  TokenId ans_close() const { return ans_close_; }
  // -1 when the vocabulary lacks that option/symbol.
  TokenId option(int option_index) const;
  TokenId prompt_symbol(int symbol_index) const;

  bool has_full_task_shape() const { return full_task_shape_; }

 private:
  std::vector<Token> tokens_;
  TokenId eos_ = -1, think_open_ = -1, think_close_ = -1, ans_open_ = -1, ans_close_ = -1;
  std::vector<TokenId> options_;
  std::vector<TokenId> prompt_symbols_;
  bool full_task_shape_ = false;
};

// A bounded token sequence. `terminated` records that generation ended with
// an EOS emitted under the hard cap rather than by hitting the cap itself.
struct TokenSeq {
  std::vector<TokenId> ids;
  bool terminated = false;

  int length() const { return static_cast<int>(ids.size()); }
  bool empty() const { return ids.empty(); }
};

inline TokenSeq make_seq(std::vector<TokenId> ids, bool terminated = false) {
  return TokenSeq{std::move(ids), terminated};
}

}  // namespace grouprl
