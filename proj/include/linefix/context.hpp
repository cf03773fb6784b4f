#pragma once

#include <optional>
#include <string>
#include <vector>

#include "linefix/lexer.hpp"

namespace linefix {

struct LineRange {
  int first = 0;  // 1-based, inclusive
  int last = 0;
  bool contains(int line) const { return line >= first && line <= last; }
};

// One bug location: the buggy class source, the suspicious line, and
// (for training/evaluation) the developer's fixed line.
struct RepairTask {
  std::string task_id;
  std::string class_source;
  int buggy_line_no = 0;  // 1-based
  std::optional<LineRange> method_span;  // derived when absent
  std::optional<std::string> reference_fix;
};

enum class TokenOrigin { BuggyLine, BuggyMethod, BuggyClass };

struct AbstractBuggyContext {
  TokenSequence tokens;               // includes the marker pair
  std::vector<TokenOrigin> origin;    // parallel to tokens
  bool truncated = false;
  size_t pre_truncation_tokens = 0;
  LineRange method_span;              // derived span of the buggy method
};

// Builds the model input from a repair task: markers around the buggy line,
// the buggy method kept whole, fields and initializer blocks kept, every
// other method/constructor/nested-type body stripped to "{ }", then truncated
// to `limit` tokens. Throws when the buggy line is not inside a method (or
// method-like initializer block), when it is empty, or when lexing fails.
AbstractBuggyContext build_abstract_buggy_context(const RepairTask& task, int limit = 1000);

// Window selected by truncation, applied to tokens and origins alike.
struct TruncationPlan {
  size_t begin = 0;
  size_t count = 0;
  bool truncated = false;
};

// Budgeted window around the marked line: unchanged when under budget; the
// first `limit` tokens of the marked line when the line itself is over
// budget; otherwise a window keeping the whole line with the remaining budget
// split 2:1 before:after (after = floor(r/3)), surplus flowing to the side
// that can use it. Throws when the marker pair is missing or limit < 1.
TruncationPlan plan_truncation(const TokenSequence& tokens, int limit);
TokenSequence truncate_to_budget(const TokenSequence& tokens, int limit,
                                 bool* truncated = nullptr);

// Best-effort origin map for pre-tokenized contexts (token-pairs datasets):
// marked-line tokens between the markers, the enclosing member for the
// method, everything else class-level.
std::vector<TokenOrigin> derive_origins(const TokenSequence& context);

// Indices of the marker pair; throws if either is missing or out of order.
std::pair<size_t, size_t> find_markers(const TokenSequence& tokens);

}  // namespace linefix
