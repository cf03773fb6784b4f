#pragma once

#include <string>
#include <vector>

#include "linefix/beam.hpp"
#include "linefix/vocab.hpp"

namespace linefix {

// Ordered: each status implies the previous one.
enum class PatchStatus { Generated, Compilable, Plausible, CorrectPendingReview };
const char* patch_status_name(PatchStatus s);

struct PatchCandidate {
  int rank = 0;                // 1-based beam rank after filtering
  TokenSequence tokens;        // predicted line tokens
  std::string prepared_line;   // canonical spacing, no indent
  std::string diff;            // unified diff against the original file
  PatchStatus status = PatchStatus::Generated;
  std::string note;
  double log_prob = 0.0;
};

struct PreparedPatches {
  std::vector<PatchCandidate> candidates;
  int dropped = 0;  // hypotheses containing <unk> (or markers/specials)
};

// Drops hypotheses containing <unk> (markers and other specials are dropped
// for the same reason: they can never appear in a source line), formats the
// survivors, and splices each into the original file as a unified diff.
// Beam order is preserved; duplicate prepared lines keep their best rank
// unless dedup is disabled.
PreparedPatches prepare_patches(const std::vector<Hypothesis>& hyps, const Vocabulary& vocab,
                                const std::vector<std::string>& oov_list,
                                const std::string& original_source,
                                const std::string& file_label, int buggy_line_no,
                                bool dedup = true);

// Single-line replacement hunk with `context_lines` lines of context.
std::string make_unified_diff(const std::string& original, const std::string& file_label,
                              int line_no, const std::string& replacement_line,
                              int context_lines = 3);

// Applies a diff produced by make_unified_diff; throws when it does not apply.
std::string apply_unified_diff(const std::string& original, const std::string& diff);

// Replaces line `line_no` (1-based), keeping the original indentation.
std::string splice_line(const std::string& original, int line_no, const std::string& new_line);

struct PatchHooks {
  std::string compile_cmd;  // "{file}" is replaced by the patched file path
  std::string test_cmd;
  double timeout_sec = 60.0;
};

// Writes the patched file to a scratch path and runs the hooks: compile
// failure keeps Generated, tests failing gives Compilable, both passing gives
// Plausible. A hook timeout keeps Generated and records a note. Correctness
// stays a manual judgment recorded by the operator.
PatchStatus validate_patch(const PatchCandidate& candidate, const std::string& original_source,
                           int buggy_line_no, const PatchHooks& hooks,
                           std::string* note = nullptr);

}  // namespace linefix
