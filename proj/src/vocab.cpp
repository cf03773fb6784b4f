#include "linefix/vocab.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>

#include "linefix/util.hpp"

namespace linefix {
namespace {

const char* kSpecials[] = {"<unk>", "<pad>", "<s>", "</s>"};

void append(Vocabulary& v, const std::string& tok) {
  if (v.index.count(tok)) throw std::runtime_error("duplicate vocabulary token: " + tok);
  v.index[tok] = static_cast<int>(v.tokens.size());
  v.tokens.push_back(tok);
}

}  // namespace

uint64_t Vocabulary::hash() const {
  uint64_t h = 14695981039346656037ull;
  for (const std::string& t : tokens) {
    h = fnv1a64(t, h);
    h = fnv1a64("\n", h);
  }
  return h;
}

std::vector<std::pair<std::string, long long>> count_tokens(
    const std::vector<TokenSequence>& corpus) {
  std::map<std::string, long long> counts;  // ordered: deterministic iteration
  for (const TokenSequence& seq : corpus) {
    for (const Token& t : seq) counts[t.text]++;
  }
  std::vector<std::pair<std::string, long long>> out(counts.begin(), counts.end());
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  return out;
}

Vocabulary build_vocabulary(const std::vector<TokenSequence>& corpus, int size) {
  if (corpus.empty()) throw std::runtime_error("cannot build vocabulary from empty corpus");
  if (size < 2) {
    throw std::runtime_error("vocabulary size " + std::to_string(size) +
                             " is smaller than the number of forced tokens (2)");
  }
  Vocabulary v;
  for (const char* s : kSpecials) append(v, s);
  append(v, std::string(kStartBug));
  append(v, std::string(kEndBug));
  auto ranked = count_tokens(corpus);
  int budget = size - 2;  // markers already took two slots
  for (const auto& [tok, count] : ranked) {
    if (budget == 0) break;
    if (v.index.count(tok)) continue;
    append(v, tok);
    budget--;
  }
  return v;
}

EncodedSample encode_pair(const TokenSequence& src, const TokenSequence* tgt,
                          const Vocabulary& v) {
  if (src.empty()) throw std::runtime_error("cannot encode an empty source sequence");
  EncodedSample s;
  std::unordered_map<std::string, int> oov_ids;
  s.src_ids.reserve(src.size());
  s.src_ext_ids.reserve(src.size());
  for (const Token& t : src) {
    auto it = v.index.find(t.text);
    if (it != v.index.end()) {
      s.src_ids.push_back(it->second);
      s.src_ext_ids.push_back(it->second);
    } else {
      s.src_ids.push_back(Vocabulary::kUnk);
      auto [oit, inserted] = oov_ids.try_emplace(
          t.text, v.size() + static_cast<int>(s.oov_list.size()));
      if (inserted) s.oov_list.push_back(t.text);
      s.src_ext_ids.push_back(oit->second);
    }
  }
  if (tgt) {
    s.tgt_ext_ids.push_back(Vocabulary::kBos);
    for (const Token& t : *tgt) {
      auto it = v.index.find(t.text);
      if (it != v.index.end()) {
        s.tgt_ext_ids.push_back(it->second);
      } else {
        auto oit = oov_ids.find(t.text);
        s.tgt_ext_ids.push_back(oit == oov_ids.end() ? Vocabulary::kUnk : oit->second);
      }
    }
    s.tgt_ext_ids.push_back(Vocabulary::kEos);
  }
  return s;
}

TokenSequence decode_ids(const std::vector<int>& ids, const Vocabulary& v,
                         const std::vector<std::string>& oov_list) {
  TokenSequence out;
  out.reserve(ids.size());
  for (int id : ids) {
    if (id < 0 || id >= v.size() + static_cast<int>(oov_list.size())) {
      throw std::runtime_error("id " + std::to_string(id) +
                               " outside the extended vocabulary");
    }
    const std::string& text =
        id < v.size() ? v.tokens[static_cast<size_t>(id)]
                      : oov_list[static_cast<size_t>(id - v.size())];
    out.push_back(classify_token(text));
  }
  return out;
}

void save_vocabulary(const Vocabulary& v, const std::string& path,
                     const std::vector<std::pair<std::string, long long>>* freqs) {
  std::string body;
  for (const std::string& t : v.tokens) {
    body += t;
    body += '\n';
  }
  write_file(path, body);
  if (freqs) {
    std::string side;
    for (const auto& [tok, count] : *freqs) {
      side += std::to_string(count);
      side += '\t';
      side += tok;
      side += '\n';
    }
    write_file(path + ".freq", side);
  }
}

Vocabulary load_vocabulary(const std::string& path) {
  Vocabulary v;
  for (const std::string& line : split_lines(read_file(path))) {
    append(v, line);
  }
  if (v.size() < 6) throw std::runtime_error("vocabulary file too small: " + path);
  for (int i = 0; i < 4; i++) {
    if (v.tokens[static_cast<size_t>(i)] != kSpecials[i]) {
      throw std::runtime_error("vocabulary file is missing special tokens: " + path);
    }
  }
  return v;
}

}  // namespace linefix
