// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

namespace cci {

enum class TokenKind { Code, Comment };

struct TokenSeq {
  std::vector<std::string> tokens;
  TokenKind kind = TokenKind::Code;

  bool empty() const { return tokens.empty(); }
  std::size_t size() const { return tokens.size(); }
  const std::string& operator[](std::size_t i) const { return tokens[i]; }
  bool operator==(const TokenSeq& o) const { return tokens == o.tokens; }
};

// Maximal-munch lexer over Java-like source: identifiers/keywords, numeric
// and string/char literals (body kept as one token), multi-char operators,
// single punctuation. Comments and whitespace are dropped. Unterminated
// strings/comments lex to end of input and land in *warnings.
TokenSeq tokenize_code(const std::string& raw,
                       std::vector<std::string>* warnings = nullptr);

// Comment words: Javadoc furniture removed, split on whitespace, leading and
// trailing punctuation stripped per word except "@"-tags; case preserved.
TokenSeq tokenize_comment(const std::string& raw);

// camelCase / underscore / digit boundaries, lowercased.
std::vector<std::string> split_subtokens(const std::string& identifier);

std::string join_tokens(const TokenSeq& seq);

}  // namespace cci
