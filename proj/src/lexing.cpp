// SPDX-License-Identifier: Apache-2.0
#include "cci/lexing.hpp"

#include <array>
#include <cctype>
#include <sstream>

namespace cci {

namespace {

bool is_ident_start(char c) {
  return std::isalpha(static_cast<unsigned char>(c)) || c == '_' || c == '$';
}

bool is_ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '$';
}

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

// Longest-first so maximal munch falls out of the scan order.
const std::array<const char*, 25> kOperators = {
    ">>>=", "<<=", ">>=", ">>>", "==", "!=", "<=", ">=", "&&", "||", "++",
    "--",   "+=",  "-=",  "*=",  "/=", "%=", "&=", "|=", "^=", "->", "::",
    "<<",   ">>",  "..."};

// Whitespace inside string/char literals is rewritten to its Java escape so
// that a literal stays one whitespace-free token and relexes stably.
void append_literal_char(std::string& tok, char c) {
  switch (c) {
    case ' ': tok += "\\u0020"; break;
    case '\t': tok += "\\t"; break;
    case '\n': tok += "\\n"; break;
    case '\r': tok += "\\r"; break;
    default:
      if (is_space(c))
        tok += "\\u0020";
      else
        tok.push_back(c);
  }
}

}  // namespace

TokenSeq tokenize_code(const std::string& raw,
                       std::vector<std::string>* warnings) {
  TokenSeq seq;
  seq.kind = TokenKind::Code;
  const std::size_t n = raw.size();
  std::size_t i = 0;
  while (i < n) {
    const char c = raw[i];
    if (is_space(c)) {
      ++i;
      continue;
    }
    // comments inside code are dropped
    if (c == '/' && i + 1 < n && raw[i + 1] == '/') {
      while (i < n && raw[i] != '\n') ++i;
      continue;
    }
    if (c == '/' && i + 1 < n && raw[i + 1] == '*') {
      std::size_t end = raw.find("*/", i + 2);
      if (end == std::string::npos) {
        if (warnings) warnings->push_back("unterminated block comment");
        i = n;
      } else {
        i = end + 2;
      }
      continue;
    }
    if (c == '"' || c == '\'') {
      std::string tok(1, c);
      std::size_t j = i + 1;
      bool closed = false;
      while (j < n) {
        const char d = raw[j];
        if (d == '\\' && j + 1 < n) {
          tok.push_back('\\');
          append_literal_char(tok, raw[j + 1]);
          j += 2;
          continue;
        }
        if (d == c) {
          tok.push_back(d);
          ++j;
          closed = true;
          break;
        }
        append_literal_char(tok, d);
        ++j;
      }
      if (!closed && warnings)
        warnings->push_back(std::string("unterminated ") +
                            (c == '"' ? "string" : "char") + " literal");
      seq.tokens.push_back(std::move(tok));
      i = j;
      continue;
    }
    if (is_ident_start(c)) {
      std::size_t j = i + 1;
      while (j < n && is_ident_char(raw[j])) ++j;
      seq.tokens.push_back(raw.substr(i, j - i));
      i = j;
      continue;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) ||
        (c == '.' && i + 1 < n &&
         std::isdigit(static_cast<unsigned char>(raw[i + 1])))) {
      std::size_t j = i;
      if (raw[j] == '.') ++j;
      while (j < n) {
        const char d = raw[j];
        if (std::isalnum(static_cast<unsigned char>(d)) || d == '_' ||
            d == '.') {
          // exponent sign belongs to the number: 1.5e-3
          if ((d == 'e' || d == 'E') && j + 1 < n &&
              (raw[j + 1] == '+' || raw[j + 1] == '-') && j + 2 < n &&
              std::isdigit(static_cast<unsigned char>(raw[j + 2]))) {
            j += 2;
          }
          ++j;
          continue;
        }
        break;
      }
      seq.tokens.push_back(raw.substr(i, j - i));
      i = j;
      continue;
    }
    bool matched = false;
    for (const char* op : kOperators) {
      const std::size_t len = std::char_traits<char>::length(op);
      if (raw.compare(i, len, op) == 0) {
        seq.tokens.emplace_back(op);
        i += len;
        matched = true;
        break;
      }
    }
    if (matched) continue;
    seq.tokens.push_back(std::string(1, c));
    ++i;
  }
  return seq;
}

namespace {

bool is_word_punct(char c) {
  return !std::isalnum(static_cast<unsigned char>(c));
}

std::string strip_word(const std::string& word) {
  if (!word.empty() && word[0] == '@' && word.size() > 1) return word;
  std::size_t b = 0;
  std::size_t e = word.size();
  while (b < e && is_word_punct(word[b])) ++b;
  while (e > b && is_word_punct(word[e - 1])) --e;
  return word.substr(b, e - b);
}

}  // namespace

TokenSeq tokenize_comment(const std::string& raw) {
  TokenSeq seq;
  seq.kind = TokenKind::Comment;
  std::istringstream lines(raw);
  std::string line;
  while (std::getline(lines, line)) {
    // Javadoc furniture: opening/closing markers and the leading '*' rail.
    for (const char* marker : {"/**", "/*", "*/", "//"}) {
      std::size_t pos;
      while ((pos = line.find(marker)) != std::string::npos)
        line.replace(pos, std::char_traits<char>::length(marker), " ");
    }
    std::size_t b = 0;
    while (b < line.size() && is_space(line[b])) ++b;
    while (b < line.size() && line[b] == '*') ++b;

    std::istringstream words(line.substr(b));
    std::string word;
    while (words >> word) {
      std::string stripped = strip_word(word);
      if (!stripped.empty()) seq.tokens.push_back(std::move(stripped));
    }
  }
  return seq;
}

std::vector<std::string> split_subtokens(const std::string& identifier) {
  enum class Cls { Upper, Lower, Digit, Sep };
  auto classify = [](char c) {
    if (std::isupper(static_cast<unsigned char>(c))) return Cls::Upper;
    if (std::islower(static_cast<unsigned char>(c))) return Cls::Lower;
    if (std::isdigit(static_cast<unsigned char>(c))) return Cls::Digit;
    return Cls::Sep;
  };

  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) {
      for (char& ch : cur) ch = static_cast<char>(std::tolower(
          static_cast<unsigned char>(ch)));
      out.push_back(cur);
      cur.clear();
    }
  };

  const std::size_t n = identifier.size();
  for (std::size_t i = 0; i < n; ++i) {
    const char c = identifier[i];
    const Cls cls = classify(c);
    if (cls == Cls::Sep) {
      flush();
      continue;
    }
    if (!cur.empty()) {
      const Cls prev = classify(cur.back());
      const bool camel = (prev == Cls::Lower && cls == Cls::Upper);
      // HTTPServer -> HTTP | Server
      const bool acronym_end =
          (prev == Cls::Upper && cls == Cls::Upper && i + 1 < n &&
           classify(identifier[i + 1]) == Cls::Lower);
      const bool digit_edge = (prev == Cls::Digit) != (cls == Cls::Digit);
      if (camel || acronym_end || digit_edge) flush();
    }
    cur.push_back(c);
  }
  flush();
  return out;
}

std::string join_tokens(const TokenSeq& seq) {
  std::string out;
  for (std::size_t i = 0; i < seq.tokens.size(); ++i) {
    if (i) out.push_back(' ');
    out += seq.tokens[i];
  }
  return out;
}

}  // namespace cci
