#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "linefix/lexer.hpp"

namespace linefix {

// Learned vocabulary: ids 0..3 are <unk>/<pad>/<s>/</s>, ids 4..5 the
// force-included bug markers, the rest corpus tokens by descending frequency
// (ties broken lexicographically). Immutable once built.
struct Vocabulary {
  static constexpr int kUnk = 0;
  static constexpr int kPad = 1;
  static constexpr int kBos = 2;
  static constexpr int kEos = 3;

  std::vector<std::string> tokens;
  std::unordered_map<std::string, int> index;

  int size() const { return static_cast<int>(tokens.size()); }
  int id_or_unk(const std::string& tok) const {
    auto it = index.find(tok);
    return it == index.end() ? kUnk : it->second;
  }
  bool contains(const std::string& tok) const { return index.count(tok) != 0; }
  uint64_t hash() const;
};

// `size` counts the learned tokens (the 4 specials come on top); the markers
// are force-included and spend two slots of the budget.
Vocabulary build_vocabulary(const std::vector<TokenSequence>& corpus, int size = 1000);

// Token counts used when building, exposed for frequency sidecars and stats.
std::vector<std::pair<std::string, long long>> count_tokens(
    const std::vector<TokenSequence>& corpus);

// Per-sample encoding with the extended vocabulary for copying: every
// out-of-vocabulary source token gets a dense id >= vocab size, repeated
// strings sharing one id. Targets absent from vocabulary and source map to
// <unk>. The target, when present, is wrapped with <s>/</s>.
struct EncodedSample {
  std::vector<int> src_ids;
  std::vector<int> src_ext_ids;
  std::vector<std::string> oov_list;
  std::vector<int> tgt_ext_ids;  // [<s>, y_1..y_m, </s>]; empty when no target
};

EncodedSample encode_pair(const TokenSequence& src, const TokenSequence* tgt,
                          const Vocabulary& v);

// Inverse of encoding over vocabulary + oov_list; throws on out-of-range ids.
// The <unk> id decodes to the literal token "<unk>".
TokenSequence decode_ids(const std::vector<int>& ids, const Vocabulary& v,
                         const std::vector<std::string>& oov_list);

// Plain-text format: one token per line, line number = id. Frequencies go to
// "<path>.freq" ("count<TAB>token" rows) when provided.
void save_vocabulary(const Vocabulary& v, const std::string& path,
                     const std::vector<std::pair<std::string, long long>>* freqs = nullptr);
Vocabulary load_vocabulary(const std::string& path);

}  // namespace linefix
