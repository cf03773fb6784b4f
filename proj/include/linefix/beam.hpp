#pragma once

#include <vector>

#include "linefix/net.hpp"

namespace linefix {

struct Hypothesis {
  std::vector<int> ids;   // generated extended ids, <s> excluded; ends with </s> when finished
  double log_prob = 0.0;  // cumulative, no length normalization
  DecoderState state;
  bool finished = false;
};

// Standard beam search over the final distribution: successors of the live
// hypotheses are ranked by cumulative log-probability, the top `beam`
// survive, finished ones are set aside, and the search stops once `beam`
// hypotheses have finished or max_len is reached. The result is sorted by
// cumulative log-probability, ties broken by lexicographic id order.
// beam == 1 is greedy decoding. Throws when beam < 1.
std::vector<Hypothesis> beam_search(const ModelParams& params, const EncodedSample& src,
                                    int beam, int max_len, const StepOptions& opts = {});

}  // namespace linefix
