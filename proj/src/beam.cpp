#include "linefix/beam.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>

namespace linefix {
namespace {

struct Candidate {
  size_t parent;   // index into the live frontier
  int token;
  double score;
};

// Lexicographic order over (parent ids ++ token).
bool lex_less(const std::vector<Hypothesis>& live, const Candidate& a, const Candidate& b) {
  const std::vector<int>& ia = live[a.parent].ids;
  const std::vector<int>& ib = live[b.parent].ids;
  const size_t na = ia.size() + 1, nb = ib.size() + 1;
  for (size_t k = 0; k < std::min(na, nb); k++) {
    const int va = k < ia.size() ? ia[k] : a.token;
    const int vb = k < ib.size() ? ib[k] : b.token;
    if (va != vb) return va < vb;
  }
  return na < nb;
}

bool hyp_less(const Hypothesis& a, const Hypothesis& b) {
  if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
  return a.ids < b.ids;
}

}  // namespace

std::vector<Hypothesis> beam_search(const ModelParams& params, const EncodedSample& src,
                                    int beam, int max_len, const StepOptions& opts) {
  if (beam < 1) throw std::runtime_error("beam size must be >= 1");
  const EncoderStates enc = encode(params, src.src_ids);
  const AttnKeys keys = make_attn_keys(params, enc);
  const int ext_vocab = params.cfg.vocab_size + static_cast<int>(src.oov_list.size());

  std::vector<Hypothesis> live;
  live.push_back(Hypothesis{{}, 0.0, init_decoder_state(params, enc), false});
  std::vector<Hypothesis> finished;

  for (int step = 0; step < max_len; step++) {
    if (live.empty() || static_cast<int>(finished.size()) >= beam) break;

    std::vector<DecoderState> next_state(live.size());
    std::vector<Candidate> candidates;
    candidates.reserve(live.size() * static_cast<size_t>(ext_vocab));
    for (size_t h = 0; h < live.size(); h++) {
      const int prev = live[h].ids.empty() ? Vocabulary::kBos : live[h].ids.back();
      DecoderStep out = decode_step(params, prev, live[h].state, enc, keys,
                                    src.src_ext_ids, ext_vocab, opts);
      next_state[h] = std::move(out.state);
      for (int k = 0; k < ext_vocab; k++) {
        const double pk = out.p_final[static_cast<size_t>(k)];
        if (pk <= 0.0) continue;  // unreachable tokens never join the beam
        candidates.push_back({h, k, live[h].log_prob + std::log(pk)});
      }
    }
    if (candidates.empty()) break;

    auto better = [&](const Candidate& a, const Candidate& b) {
      if (a.score != b.score) return a.score > b.score;
      return lex_less(live, a, b);
    };
    const size_t keep = std::min(candidates.size(), static_cast<size_t>(beam));
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<long>(keep),
                      candidates.end(), better);
    candidates.resize(keep);

    std::vector<Hypothesis> next_live;
    for (const Candidate& c : candidates) {
      Hypothesis h;
      h.ids = live[c.parent].ids;
      h.ids.push_back(c.token);
      h.log_prob = c.score;
      h.state = next_state[c.parent];
      h.finished = (c.token == Vocabulary::kEos);
      if (h.finished) {
        finished.push_back(std::move(h));
      } else {
        next_live.push_back(std::move(h));
      }
    }
    live = std::move(next_live);
  }

  std::vector<Hypothesis> out = std::move(finished);
  // Hypotheses cut off by max_len (or an exhausted frontier) pad the result
  // up to the requested beam width.
  if (static_cast<int>(out.size()) < beam) {
    std::sort(live.begin(), live.end(), hyp_less);
    for (Hypothesis& h : live) {
      if (static_cast<int>(out.size()) >= beam) break;
      out.push_back(std::move(h));
    }
  }
  std::sort(out.begin(), out.end(), hyp_less);
  return out;
}

}  // namespace linefix
