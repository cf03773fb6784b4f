#include "linefix/patch.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <csignal>
#include <filesystem>
#include <stdexcept>
#include <thread>
#include <unordered_set>

#include "linefix/util.hpp"

namespace linefix {
namespace {

bool is_droppable(const Token& t) {
  return t.is_marker() || t.text == kUnkText || t.text == "<pad>" || t.text == "<s>" ||
         t.text == "</s>";
}

std::string leading_whitespace(const std::string& line) {
  size_t i = 0;
  while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) i++;
  return line.substr(0, i);
}

// exit code, or -1 on timeout
int run_with_timeout(const std::string& cmd, double timeout_sec) {
  pid_t pid = fork();
  if (pid < 0) throw std::runtime_error("fork failed");
  if (pid == 0) {
    execl("/bin/sh", "sh", "-c", cmd.c_str(), static_cast<char*>(nullptr));
    _exit(127);
  }
  const auto deadline =
      std::chrono::steady_clock::now() + std::chrono::duration<double>(timeout_sec);
  while (true) {
    int status = 0;
    pid_t r = waitpid(pid, &status, WNOHANG);
    if (r == pid) {
      if (WIFEXITED(status)) return WEXITSTATUS(status);
      return 128;
    }
    if (r < 0 && errno != EINTR) throw std::runtime_error("waitpid failed");
    if (std::chrono::steady_clock::now() >= deadline) {
      kill(pid, SIGKILL);
      waitpid(pid, &status, 0);
      return -1;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
}

std::string substitute_file(const std::string& cmd, const std::string& file) {
  std::string out = cmd;
  const std::string key = "{file}";
  size_t pos;
  while ((pos = out.find(key)) != std::string::npos) out.replace(pos, key.size(), file);
  return out;
}

}  // namespace

const char* patch_status_name(PatchStatus s) {
  switch (s) {
    case PatchStatus::Generated: return "generated";
    case PatchStatus::Compilable: return "compilable";
    case PatchStatus::Plausible: return "plausible";
    case PatchStatus::CorrectPendingReview: return "correct-pending-review";
  }
  return "generated";
}

std::string splice_line(const std::string& original, int line_no, const std::string& new_line) {
  std::vector<std::string> lines = split_lines(original);
  if (line_no < 1 || line_no > static_cast<int>(lines.size())) {
    throw std::runtime_error("line " + std::to_string(line_no) + " outside the file");
  }
  std::string indent = leading_whitespace(lines[static_cast<size_t>(line_no - 1)]);
  lines[static_cast<size_t>(line_no - 1)] = indent + new_line;
  std::string out = join(lines, "\n");
  out += '\n';
  return out;
}

std::string make_unified_diff(const std::string& original, const std::string& file_label,
                              int line_no, const std::string& replacement_line,
                              int context_lines) {
  std::vector<std::string> lines = split_lines(original);
  if (line_no < 1 || line_no > static_cast<int>(lines.size())) {
    throw std::runtime_error("line " + std::to_string(line_no) + " outside the file");
  }
  const int n = static_cast<int>(lines.size());
  const int first = std::max(1, line_no - context_lines);
  const int last = std::min(n, line_no + context_lines);
  const int count = last - first + 1;

  std::string indent = leading_whitespace(lines[static_cast<size_t>(line_no - 1)]);
  std::string diff;
  diff += "--- a/" + file_label + "\n";
  diff += "+++ b/" + file_label + "\n";
  diff += "@@ -" + std::to_string(first) + "," + std::to_string(count) + " +" +
          std::to_string(first) + "," + std::to_string(count) + " @@\n";
  for (int i = first; i <= last; i++) {
    const std::string& line = lines[static_cast<size_t>(i - 1)];
    if (i == line_no) {
      diff += "-" + line + "\n";
      diff += "+" + indent + replacement_line + "\n";
    } else {
      diff += " " + line + "\n";
    }
  }
  return diff;
}

std::string apply_unified_diff(const std::string& original, const std::string& diff) {
  std::vector<std::string> lines = split_lines(original);
  std::vector<std::string> dlines = split_lines(diff);
  size_t d = 0;
  while (d < dlines.size() && dlines[d].rfind("@@", 0) != 0) d++;
  if (d == dlines.size()) throw std::runtime_error("diff has no hunk header");
  // "@@ -first,count +first,count @@"
  const std::string& header = dlines[d];
  size_t dash = header.find('-');
  size_t comma = header.find(',', dash);
  int first = std::stoi(header.substr(dash + 1, comma - dash - 1));
  d++;

  int cursor = first;
  std::vector<std::string> out(lines.begin(), lines.begin() + (first - 1));
  for (; d < dlines.size(); d++) {
    const std::string& dl = dlines[d];
    if (dl.empty()) continue;
    const char tag = dl[0];
    const std::string body = dl.substr(1);
    if (tag == ' ' || tag == '-') {
      if (cursor > static_cast<int>(lines.size()) ||
          lines[static_cast<size_t>(cursor - 1)] != body) {
        throw std::runtime_error("diff does not apply at line " + std::to_string(cursor));
      }
      if (tag == ' ') out.push_back(body);
      cursor++;
    } else if (tag == '+') {
      out.push_back(body);
    } else {
      throw std::runtime_error("unexpected diff line: " + dl);
    }
  }
  out.insert(out.end(), lines.begin() + (cursor - 1), lines.end());
  std::string joined = join(out, "\n");
  joined += '\n';
  return joined;
}

PreparedPatches prepare_patches(const std::vector<Hypothesis>& hyps, const Vocabulary& vocab,
                                const std::vector<std::string>& oov_list,
                                const std::string& original_source,
                                const std::string& file_label, int buggy_line_no,
                                bool dedup) {
  PreparedPatches out;
  std::unordered_set<std::string> seen;
  int rank = 0;
  for (const Hypothesis& h : hyps) {
    std::vector<int> ids = h.ids;
    if (!ids.empty() && ids.back() == Vocabulary::kEos) ids.pop_back();
    if (ids.empty()) {
      out.dropped++;
      continue;
    }
    TokenSequence tokens = decode_ids(ids, vocab, oov_list);
    if (std::any_of(tokens.begin(), tokens.end(), is_droppable)) {
      out.dropped++;
      continue;
    }
    std::string line = detokenize(tokens);
    if (dedup && !seen.insert(line).second) continue;
    PatchCandidate cand;
    cand.rank = ++rank;
    cand.tokens = std::move(tokens);
    cand.prepared_line = line;
    cand.log_prob = h.log_prob;
    cand.diff = make_unified_diff(original_source, file_label, buggy_line_no, line);
    out.candidates.push_back(std::move(cand));
  }
  return out;
}

PatchStatus validate_patch(const PatchCandidate& candidate, const std::string& original_source,
                           int buggy_line_no, const PatchHooks& hooks, std::string* note) {
  if (hooks.compile_cmd.empty()) {
    if (note) *note = "no compile hook configured";
    return PatchStatus::Generated;
  }
  std::string patched = splice_line(original_source, buggy_line_no, candidate.prepared_line);
  std::string dir = (std::filesystem::temp_directory_path() / "linefix-validate-XXXXXX").string();
  std::vector<char> tmpl(dir.begin(), dir.end());
  tmpl.push_back('\0');
  if (!mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
  std::string work(tmpl.data());
  std::string file = work + "/patched.java";
  write_file(file, patched);

  auto cleanup = [&]() { std::filesystem::remove_all(work); };
  int rc = run_with_timeout(substitute_file(hooks.compile_cmd, file), hooks.timeout_sec);
  if (rc == -1) {
    if (note) *note = "compile hook timed out";
    cleanup();
    return PatchStatus::Generated;
  }
  if (rc != 0) {
    if (note) *note = "compile hook exited " + std::to_string(rc);
    cleanup();
    return PatchStatus::Generated;
  }
  if (hooks.test_cmd.empty()) {
    if (note) *note = "no test hook configured";
    cleanup();
    return PatchStatus::Compilable;
  }
  rc = run_with_timeout(substitute_file(hooks.test_cmd, file), hooks.timeout_sec);
  cleanup();
  if (rc == -1) {
    // Timeouts never promote a patch.
    if (note) *note = "test hook timed out";
    return PatchStatus::Generated;
  }
  return rc == 0 ? PatchStatus::Plausible : PatchStatus::Compilable;
}

}  // namespace linefix
