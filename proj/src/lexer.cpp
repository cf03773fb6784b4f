#include "linefix/lexer.hpp"

#include <cctype>
#include <optional>
#include <stdexcept>
#include <unordered_set>

namespace linefix {
namespace {

const std::unordered_set<std::string_view>& keywords() {
  static const std::unordered_set<std::string_view> kw = {
      "abstract", "assert", "boolean", "break", "byte", "case", "catch", "char",
      "class", "const", "continue", "default", "do", "double", "else", "enum",
      "extends", "final", "finally", "float", "for", "goto", "if", "implements",
      "import", "instanceof", "int", "interface", "long", "native", "new",
      "package", "private", "protected", "public", "return", "short", "static",
      "strictfp", "super", "switch", "synchronized", "this", "throw", "throws",
      "transient", "try", "void", "volatile", "while", "true", "false", "null"};
  return kw;
}

// Longest first so a linear scan gives maximal munch.
constexpr std::string_view kOperators[] = {
    ">>>=", ">>>", ">>=", "<<=", "...", "->", "::", "==", "!=", "<=", ">=",
    "&&", "||", "++", "--", "+=", "-=", "*=", "/=", "&=", "|=", "^=", "%=",
    "<<", ">>", "+", "-", "*", "/", "%", "=", "<", ">", "!", "~", "&", "|",
    "^", "?", ":", ".", "(", ")", "{", "}", "[", "]", ";", ",", "@"};

bool is_separator_text(std::string_view t) {
  return t == "(" || t == ")" || t == "{" || t == "}" || t == "[" || t == "]" ||
         t == ";" || t == "," || t == "." || t == "@" || t == "..." || t == "::";
}

bool ident_start(char c) {
  return std::isalpha(static_cast<unsigned char>(c)) || c == '_' || c == '$' ||
         static_cast<unsigned char>(c) >= 0x80;  // unicode bytes pass through verbatim
}

bool ident_char(char c) {
  return ident_start(c) || std::isdigit(static_cast<unsigned char>(c));
}

bool is_digit(char c) { return c >= '0' && c <= '9'; }
bool is_hex_digit(char c) {
  return is_digit(c) || (c >= 'a' && c <= 'f') || (c >= 'A' && c <= 'F');
}

struct Scanner {
  std::string_view src;
  size_t pos = 0;
  int line = 1;
  TokenSequence out;

  char peek(size_t k = 0) const { return pos + k < src.size() ? src[pos + k] : '\0'; }
  bool eof() const { return pos >= src.size(); }
  bool starts_with(std::string_view s) const { return src.substr(pos, s.size()) == s; }

  void emit(std::string text, TokenKind kind, int at_line) {
    out.push_back(Token{std::move(text), kind, at_line});
  }

  [[noreturn]] void fail(const std::string& what, int at_line) {
    throw std::runtime_error(what + " starting at line " + std::to_string(at_line));
  }

  // A '.' can start a number only where member access is impossible.
  bool dot_may_start_number() const {
    if (out.empty()) return true;
    const Token& p = out.back();
    if (p.kind == TokenKind::Identifier || p.kind == TokenKind::NumberLit ||
        p.kind == TokenKind::StringLit || p.kind == TokenKind::CharLit)
      return false;
    if (p.text == ")" || p.text == "]" || p.text == "this" || p.text == "super")
      return false;
    return true;
  }

  void skip_line_comment() {
    while (!eof() && peek() != '\n') pos++;
  }

  void skip_block_comment() {
    int start_line = line;
    pos += 2;
    while (true) {
      if (eof()) fail("unterminated block comment", start_line);
      if (peek() == '\n') { line++; pos++; continue; }
      if (peek() == '*' && peek(1) == '/') { pos += 2; return; }
      pos++;
    }
  }

  void scan_quoted(char quote, TokenKind kind, const char* what) {
    int start_line = line;
    size_t start = pos;
    pos++;  // opening quote
    while (true) {
      if (eof() || peek() == '\n') fail(std::string("unterminated ") + what, start_line);
      if (peek() == '\\') { pos += 2; continue; }
      if (peek() == quote) { pos++; break; }
      pos++;
    }
    emit(std::string(src.substr(start, pos - start)), kind, start_line);
  }

  void scan_digits_or_underscores(bool (*pred)(char)) {
    while (pred(peek()) || (peek() == '_' && pred(peek(1)))) pos++;
  }

  void scan_number() {
    int start_line = line;
    size_t start = pos;
    if (peek() == '0' && (peek(1) == 'x' || peek(1) == 'X')) {
      pos += 2;
      scan_digits_or_underscores(is_hex_digit);
      if (peek() == '.') {
        pos++;
        scan_digits_or_underscores(is_hex_digit);
      }
      if ((peek() == 'p' || peek() == 'P') &&
          (is_digit(peek(1)) || ((peek(1) == '+' || peek(1) == '-') && is_digit(peek(2))))) {
        pos += (peek(1) == '+' || peek(1) == '-') ? 2 : 1;
        scan_digits_or_underscores(is_digit);
      }
    } else if (peek() == '0' && (peek(1) == 'b' || peek(1) == 'B')) {
      pos += 2;
      scan_digits_or_underscores(is_digit);
    } else {
      if (peek() == '.') {
        pos++;  // leading-dot literal like .5
        scan_digits_or_underscores(is_digit);
      } else {
        scan_digits_or_underscores(is_digit);
        if (peek() == '.') {
          pos++;
          scan_digits_or_underscores(is_digit);
        }
      }
      if ((peek() == 'e' || peek() == 'E') &&
          (is_digit(peek(1)) || ((peek(1) == '+' || peek(1) == '-') && is_digit(peek(2))))) {
        pos += (peek(1) == '+' || peek(1) == '-') ? 2 : 1;
        scan_digits_or_underscores(is_digit);
      }
    }
    char s = peek();
    if (s == 'l' || s == 'L' || s == 'f' || s == 'F' || s == 'd' || s == 'D') pos++;
    emit(std::string(src.substr(start, pos - start)), TokenKind::NumberLit, start_line);
  }

  void scan_identifier() {
    size_t start = pos;
    while (ident_char(peek())) pos++;
    std::string text(src.substr(start, pos - start));
    TokenKind kind = keywords().count(text) ? TokenKind::Keyword : TokenKind::Identifier;
    emit(std::move(text), kind, line);
  }

  void run() {
    while (!eof()) {
      char c = peek();
      if (c == '\n') { line++; pos++; continue; }
      if (std::isspace(static_cast<unsigned char>(c))) { pos++; continue; }
      if (c == '/' && peek(1) == '/') { skip_line_comment(); continue; }
      if (c == '/' && peek(1) == '*') { skip_block_comment(); continue; }
      if (starts_with(kStartBug)) {
        emit(std::string(kStartBug), TokenKind::Marker, line);
        pos += kStartBug.size();
        continue;
      }
      if (starts_with(kEndBug)) {
        emit(std::string(kEndBug), TokenKind::Marker, line);
        pos += kEndBug.size();
        continue;
      }
      if (c == '"') { scan_quoted('"', TokenKind::StringLit, "string literal"); continue; }
      if (c == '\'') { scan_quoted('\'', TokenKind::CharLit, "char literal"); continue; }
      if (is_digit(c) || (c == '.' && is_digit(peek(1)) && dot_may_start_number())) {
        scan_number();
        continue;
      }
      if (ident_start(c)) { scan_identifier(); continue; }
      bool matched = false;
      for (std::string_view op : kOperators) {
        if (starts_with(op)) {
          emit(std::string(op),
               is_separator_text(op) ? TokenKind::Separator : TokenKind::Operator, line);
          pos += op.size();
          matched = true;
          break;
        }
      }
      if (!matched) {
        // Unknown byte (e.g. '#'); keep it verbatim so nothing is lost.
        emit(std::string(1, c), TokenKind::Operator, line);
        pos++;
      }
    }
  }
};

std::optional<TokenSequence> try_tokenize(std::string_view text) {
  try {
    return tokenize(text);
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

bool same_texts(const TokenSequence& a, const TokenSequence& b) {
  if (a.size() != b.size()) return false;
  for (size_t i = 0; i < a.size(); i++) {
    if (a[i].text != b[i].text) return false;
  }
  return true;
}

std::string join_canonical(const TokenSequence& tokens) {
  std::string out;
  TokenSequence relexed;  // how `out` currently lexes
  bool poisoned = false;  // some emitted token does not re-lex; space everything after
  for (const Token& tok : tokens) {
    if (out.empty()) {
      out = tok.text;
    } else {
      bool joined = false;
      if (!poisoned) {
        std::string candidate = out + tok.text;
        auto lexed = try_tokenize(candidate);
        if (lexed) {
          TokenSequence expected = relexed;
          expected.push_back(tok);
          if (same_texts(*lexed, expected)) {
            out = std::move(candidate);
            relexed = std::move(*lexed);
            joined = true;
          }
        }
      }
      if (!joined) {
        out += ' ';
        out += tok.text;
      }
    }
    if (!poisoned) {
      auto lexed = try_tokenize(out);
      if (lexed) {
        relexed = std::move(*lexed);
      } else {
        poisoned = true;
      }
    }
  }
  return out;
}

}  // namespace

TokenSequence tokenize(std::string_view source) {
  Scanner s{source};
  s.run();
  return std::move(s.out);
}

bool is_single_token(std::string_view text) {
  auto lexed = try_tokenize(text);
  return lexed && lexed->size() == 1 && (*lexed)[0].text == text;
}

Token classify_token(std::string_view text, int line) {
  auto lexed = try_tokenize(text);
  if (lexed && lexed->size() == 1 && (*lexed)[0].text == text) {
    Token t = (*lexed)[0];
    t.line = line;
    return t;
  }
  return Token{std::string(text), TokenKind::Identifier, line};
}

std::string detokenize(const TokenSequence& tokens) {
  for (const Token& t : tokens) {
    if (t.is_marker() || t.text == kUnkText) {
      throw std::runtime_error("cannot format token '" + t.text + "'");
    }
  }
  return join_canonical(tokens);
}

std::string render_tokens(const TokenSequence& tokens) { return join_canonical(tokens); }

std::vector<std::string> token_texts(const TokenSequence& tokens) {
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (const Token& t : tokens) out.push_back(t.text);
  return out;
}

}  // namespace linefix
