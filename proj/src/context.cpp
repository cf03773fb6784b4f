#include "linefix/context.hpp"

#include <algorithm>
#include <stdexcept>

namespace linefix {
namespace {

bool is_type_keyword(const Token& t) {
  return t.text == "class" || t.text == "interface" || t.text == "enum" ||
         t.text == "record";
}

struct Emitter {
  TokenSequence tokens;
  std::vector<TokenOrigin> origin;

  void push(const Token& t, TokenOrigin o) {
    tokens.push_back(t);
    origin.push_back(o);
  }
  void push_range(const TokenSequence& src, size_t b, size_t e, TokenOrigin o) {
    for (size_t i = b; i < e; i++) push(src[i], o);
  }
};

// Index of the matching '}' for the '{' at `open`.
size_t match_brace(const TokenSequence& toks, size_t open) {
  int depth = 0;
  for (size_t i = open; i < toks.size(); i++) {
    if (toks[i].text == "{") depth++;
    else if (toks[i].text == "}") {
      depth--;
      if (depth == 0) return i;
    }
  }
  throw std::runtime_error("unbalanced braces starting at line " +
                           std::to_string(toks[open].line));
}

struct Builder {
  const TokenSequence& toks;
  int buggy_line;
  Emitter out;
  bool found = false;
  LineRange buggy_span;

  // Emits a member range as the buggy method: everything verbatim, markers
  // wrapped around the run of tokens on the buggy line.
  void emit_buggy_member(size_t b, size_t e) {
    size_t first_on_line = e, last_on_line = b;
    for (size_t i = b; i < e; i++) {
      if (toks[i].line == buggy_line) {
        first_on_line = std::min(first_on_line, i);
        last_on_line = std::max(last_on_line, i);
      }
    }
    if (first_on_line == e) {
      throw std::runtime_error("buggy line " + std::to_string(buggy_line) +
                               " is empty after comment stripping");
    }
    for (size_t i = b; i < e; i++) {
      if (i == first_on_line) {
        out.push(Token{std::string(kStartBug), TokenKind::Marker, buggy_line},
                 TokenOrigin::BuggyLine);
      }
      TokenOrigin o = (toks[i].line == buggy_line) ? TokenOrigin::BuggyLine
                                                   : TokenOrigin::BuggyMethod;
      out.push(toks[i], o);
      if (i == last_on_line) {
        out.push(Token{std::string(kEndBug), TokenKind::Marker, buggy_line},
                 TokenOrigin::BuggyLine);
      }
    }
    buggy_span = LineRange{toks[b].line, toks[e - 1].line};
    found = true;
  }

  bool line_in_range(size_t b, size_t e) const {
    return buggy_line >= toks[b].line && buggy_line <= toks[e - 1].line;
  }

  // Walks the members between a type body's braces (exclusive range).
  void walk_members(size_t begin, size_t end) {
    size_t k = begin;
    while (k < end) {
      size_t member_start = k;
      bool saw_eq = false;
      bool emitted = false;
      int paren_depth = 0;
      while (k < end) {
        const std::string& t = toks[k].text;
        if (t == "(" || t == "[") paren_depth++;
        else if (t == ")" || t == "]") paren_depth--;
        else if (t == "=" && paren_depth == 0) saw_eq = true;
        else if (t == ";" && paren_depth == 0 && !saw_eq) {
          // Field without initializer, or a stray semicolon: keep verbatim.
          out.push_range(toks, member_start, k + 1, TokenOrigin::BuggyClass);
          k++;
          emitted = true;
          break;
        } else if (t == ";" && paren_depth == 0 && saw_eq) {
          // Field with initializer (any braces inside were consumed below).
          out.push_range(toks, member_start, k + 1, TokenOrigin::BuggyClass);
          k++;
          emitted = true;
          break;
        } else if (t == "{" && paren_depth == 0) {
          if (saw_eq) {
            // Initializer expression (array literal, anonymous class):
            // part of the field, keep scanning to the terminating ';'.
            k = match_brace(toks, k);
          } else {
            size_t close = match_brace(toks, k);
            bool nested_type = false;
            bool init_block = true;
            for (size_t h = member_start; h < k; h++) {
              if (is_type_keyword(toks[h])) nested_type = true;
              if (toks[h].text != "static") init_block = false;
            }
            bool has_bug = line_in_range(member_start, close + 1);
            if (has_bug && nested_type) {
              out.push_range(toks, member_start, k + 1, TokenOrigin::BuggyClass);
              walk_members(k + 1, close);
              out.push(toks[close], TokenOrigin::BuggyClass);
            } else if (has_bug) {
              emit_buggy_member(member_start, close + 1);
            } else if (init_block) {
              out.push_range(toks, member_start, close + 1, TokenOrigin::BuggyClass);
            } else {
              // Method, constructor, or nested type: signature + empty body.
              out.push_range(toks, member_start, k + 1, TokenOrigin::BuggyClass);
              out.push(toks[close], TokenOrigin::BuggyClass);
            }
            k = close + 1;
            emitted = true;
            break;
          }
        }
        k++;
      }
      if (!emitted && k >= end && member_start < end) {
        // Trailing tokens without a terminator; keep them.
        out.push_range(toks, member_start, end, TokenOrigin::BuggyClass);
      }
    }
  }

  // Top level: emit headers verbatim, recurse into each type body.
  void walk_top() {
    size_t k = 0;
    size_t run_start = 0;
    bool header_has_type = false;
    while (k < toks.size()) {
      const std::string& t = toks[k].text;
      if (is_type_keyword(toks[k])) header_has_type = true;
      if (t == "{" && header_has_type) {
        size_t close = match_brace(toks, k);
        out.push_range(toks, run_start, k + 1, TokenOrigin::BuggyClass);
        walk_members(k + 1, close);
        out.push(toks[close], TokenOrigin::BuggyClass);
        k = close + 1;
        run_start = k;
        header_has_type = false;
        continue;
      }
      if (t == ";" ) {
        // package / import statements
        out.push_range(toks, run_start, k + 1, TokenOrigin::BuggyClass);
        run_start = k + 1;
        header_has_type = false;
        k++;
        continue;
      }
      k++;
    }
    if (run_start < toks.size()) {
      out.push_range(toks, run_start, toks.size(), TokenOrigin::BuggyClass);
    }
  }
};

}  // namespace

std::pair<size_t, size_t> find_markers(const TokenSequence& tokens) {
  size_t start = tokens.size(), end = tokens.size();
  for (size_t i = 0; i < tokens.size(); i++) {
    if (!tokens[i].is_marker()) continue;
    if (tokens[i].text == kStartBug && start == tokens.size()) start = i;
    if (tokens[i].text == kEndBug && end == tokens.size()) end = i;
  }
  if (start == tokens.size() || end == tokens.size() || end < start) {
    throw std::runtime_error("marker pair missing or out of order");
  }
  return {start, end};
}

TruncationPlan plan_truncation(const TokenSequence& tokens, int limit) {
  if (limit < 1) throw std::runtime_error("truncation limit must be >= 1");
  auto [start, end] = find_markers(tokens);
  TruncationPlan plan;
  if (tokens.size() <= static_cast<size_t>(limit)) {
    plan.begin = 0;
    plan.count = tokens.size();
    plan.truncated = false;
    return plan;
  }
  size_t line_len = end - start + 1;  // markers included
  if (line_len >= static_cast<size_t>(limit)) {
    plan.begin = start;
    plan.count = static_cast<size_t>(limit);
    plan.truncated = true;
    return plan;
  }
  size_t budget = static_cast<size_t>(limit) - line_len;
  size_t avail_before = start;
  size_t avail_after = tokens.size() - end - 1;
  size_t after_ideal = budget / 3;
  size_t before = std::min(avail_before, budget - after_ideal);
  size_t after = std::min(avail_after, budget - before);
  before = std::min(avail_before, budget - after);
  plan.begin = start - before;
  plan.count = before + line_len + after;
  plan.truncated = plan.count < tokens.size();
  return plan;
}

TokenSequence truncate_to_budget(const TokenSequence& tokens, int limit, bool* truncated) {
  TruncationPlan plan = plan_truncation(tokens, limit);
  if (truncated) *truncated = plan.truncated;
  return TokenSequence(tokens.begin() + static_cast<long>(plan.begin),
                       tokens.begin() + static_cast<long>(plan.begin + plan.count));
}

AbstractBuggyContext build_abstract_buggy_context(const RepairTask& task, int limit) {
  TokenSequence toks = tokenize(task.class_source);
  if (toks.empty()) throw std::runtime_error("empty class source");
  Builder b{toks, task.buggy_line_no};
  b.walk_top();
  if (!b.found) {
    throw std::runtime_error("line " + std::to_string(task.buggy_line_no) +
                             " is outside any method");
  }
  AbstractBuggyContext ctx;
  ctx.pre_truncation_tokens = b.out.tokens.size();
  ctx.method_span = b.buggy_span;
  TruncationPlan plan = plan_truncation(b.out.tokens, limit);
  ctx.truncated = plan.truncated;
  ctx.tokens.assign(b.out.tokens.begin() + static_cast<long>(plan.begin),
                    b.out.tokens.begin() + static_cast<long>(plan.begin + plan.count));
  ctx.origin.assign(b.out.origin.begin() + static_cast<long>(plan.begin),
                    b.out.origin.begin() + static_cast<long>(plan.begin + plan.count));
  return ctx;
}

std::vector<TokenOrigin> derive_origins(const TokenSequence& context) {
  std::vector<TokenOrigin> origin(context.size(), TokenOrigin::BuggyClass);
  size_t start = context.size(), end = context.size();
  for (size_t i = 0; i < context.size(); i++) {
    if (context[i].text == kStartBug && start == context.size()) start = i;
    if (context[i].text == kEndBug && end == context.size()) end = i;
  }
  if (start == context.size() || end == context.size() || end < start) {
    return origin;  // no marker pair: everything counts as class context
  }
  for (size_t i = start; i <= end; i++) origin[i] = TokenOrigin::BuggyLine;

  // Enclosing brace pairs around the marked line, outermost first.
  std::vector<size_t> stack;
  std::vector<std::pair<size_t, size_t>> enclosing;
  for (size_t i = 0; i < context.size(); i++) {
    if (context[i].text == "{") stack.push_back(i);
    else if (context[i].text == "}") {
      if (stack.empty()) continue;
      size_t open = stack.back();
      stack.pop_back();
      if (open < start && i > end) enclosing.push_back({open, i});
    }
  }
  std::sort(enclosing.begin(), enclosing.end());
  if (enclosing.empty()) {
    // Line-only or method-only context: remaining tokens belong to the method.
    for (size_t i = 0; i < context.size(); i++) {
      if (origin[i] != TokenOrigin::BuggyLine) origin[i] = TokenOrigin::BuggyMethod;
    }
    return origin;
  }
  // enclosing[0] is the class body when there are >= 2 pairs; the member body
  // is the next one in. With a single pair the context is just the method.
  auto [mopen, mclose] = enclosing.size() >= 2 ? enclosing[1] : enclosing[0];
  // Extend back over the member header (to the previous ; { or } at the same level).
  size_t header_start = mopen;
  while (header_start > 0) {
    const std::string& t = context[header_start - 1].text;
    if (t == ";" || t == "{" || t == "}") break;
    header_start--;
  }
  for (size_t i = header_start; i <= mclose && i < context.size(); i++) {
    if (origin[i] != TokenOrigin::BuggyLine) origin[i] = TokenOrigin::BuggyMethod;
  }
  return origin;
}

}  // namespace linefix
