#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace linefix {

inline constexpr std::string_view kStartBug = "<START_BUG>";
inline constexpr std::string_view kEndBug = "<END_BUG>";
inline constexpr std::string_view kUnkText = "<unk>";

enum class TokenKind {
  Identifier,
  Keyword,
  NumberLit,
  StringLit,
  CharLit,
  Operator,
  Separator,
  Marker,
};

struct Token {
  std::string text;
  TokenKind kind = TokenKind::Identifier;
  int line = 0;  // 1-based source line

  bool is_marker() const { return kind == TokenKind::Marker; }
  // Line numbers are positional metadata, not token identity.
  bool operator==(const Token& o) const { return text == o.text && kind == o.kind; }
};

using TokenSequence = std::vector<Token>;

// Lexes Java source into tokens. Comments are dropped, string/char literals
// keep their quotes and stay single tokens, multi-character operators are
// single tokens, numeric literals keep prefixes/suffixes (0x1F, 10e-9, 3L),
// and <START_BUG>/<END_BUG> become marker tokens. Throws std::runtime_error
// naming the line for unterminated literals or block comments.
TokenSequence tokenize(std::string_view source);

// True if `text` lexes to exactly one token with the same text.
bool is_single_token(std::string_view text);

// Rebuilds a Token from a plain lexeme string (kind via re-lexing; falls back
// to Identifier for strings that do not lex to a single token, e.g. "<unk>").
Token classify_token(std::string_view text, int line = 0);

// Joins tokens into one canonical source line. Adjacent tokens are
// concatenated directly unless that would change how the text re-lexes, in
// which case a single space is inserted; the rule is fixed and reproduces
// joins like "Foo.bar" and "bar+1" while keeping "int x" apart.
// Rejects marker tokens and "<unk>".
std::string detokenize(const TokenSequence& tokens);

// Same joining rule, but markers are allowed (used to render whole contexts).
std::string render_tokens(const TokenSequence& tokens);

std::vector<std::string> token_texts(const TokenSequence& tokens);

}  // namespace linefix
