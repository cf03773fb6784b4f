#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "linefix/rng.hpp"
#include "linefix/tensor.hpp"
#include "linefix/vocab.hpp"

namespace linefix {

struct NetConfig {
  int vocab_size = 1004;  // learned tokens + 4 specials
  int emb_dim = 256;
  int rnn_size = 256;     // decoder width; each encoder direction runs rnn_size/2
  int layers = 2;         // encoder and decoder depth
  bool use_bridge = true;
  bool use_copy = true;
  int max_target_len = 100;

  int enc_dir_size() const { return rnn_size / 2; }
  void validate() const;
};

struct LstmWeights {
  Mat w_ih;  // 4h x in
  Mat w_hh;  // 4h x h
  Vec b;     // 4h
  int hidden() const { return w_hh.cols; }
  int input() const { return w_ih.cols; }
};

struct TensorRef {
  std::string name;
  double* data;
  size_t size;
};

// Every learnable tensor of the pointer-generator model: shared embedding,
// bidirectional encoder, bridge, input-feeding decoder, global attention,
// generator, and the copy gate.
struct ModelParams {
  NetConfig cfg;
  Mat embedding;                    // V x emb, shared by encoder and decoder
  std::vector<LstmWeights> enc_fwd; // one per layer
  std::vector<LstmWeights> enc_bwd;
  Mat bridge_h, bridge_c;           // rnn x rnn affine maps (one for h, one for c)
  Vec bridge_h_b, bridge_c_b;
  std::vector<LstmWeights> dec;     // layer 0 input = emb + rnn (input feed)
  Mat attn_score;                   // rnn x rnn bilinear score
  Mat attn_out;                     // rnn x 2*rnn, [context; hidden] -> attentional state
  Mat gen_w;                        // V x rnn
  Vec gen_b;                        // V
  Vec copy_w;                       // rnn
  double copy_b = 0.0;

  std::vector<TensorRef> tensors();  // stable order; copy gate only when enabled
  size_t param_count() const;
  void set_zero();
};

ModelParams make_params(const NetConfig& cfg);                 // zero-valued
ModelParams init_params(uint64_t seed, const NetConfig& cfg);  // U[-0.1, 0.1], forget bias 1

struct EncoderStates {
  Mat states;               // n x rnn, top layer, forward/backward halves concatenated
  std::vector<Vec> final_h; // per layer, concat of direction finals
  std::vector<Vec> final_c;
  int length() const { return states.rows; }
};

// Deterministic evaluation-mode encoding (no dropout). Throws on empty input.
EncoderStates encode(const ModelParams& p, std::span<const int> src_ids);

// W_a h_i^e precomputed once per source sequence.
struct AttnKeys {
  Mat keys;  // n x rnn
};
AttnKeys make_attn_keys(const ModelParams& p, const EncoderStates& enc);

struct DecoderState {
  std::vector<Vec> h, c;  // per layer
  Vec input_feed;         // previous attentional state
};
DecoderState init_decoder_state(const ModelParams& p, const EncoderStates& enc);

struct StepOptions {
  std::optional<double> forced_p_gen;  // pins Eq-style generate/copy mixing in tests
};

struct DecoderStep {
  DecoderState state;
  Vec attention;   // alpha over source positions
  Vec attn_state;  // attentional state fed back as input feed
  Vec p_vocab;     // distribution over the vocabulary
  double p_gen = 1.0;
  Vec p_final;     // distribution over vocabulary + this sample's oov ids
};

// One decoder step: previous (extended) token id in, distributions out.
// ext_vocab = vocabulary size + |oov_list| of the sample being decoded.
DecoderStep decode_step(const ModelParams& p, int prev_ext_id, const DecoderState& state,
                        const EncoderStates& enc, const AttnKeys& keys,
                        std::span<const int> src_ext_ids, int ext_vocab,
                        const StepOptions& opts = {});

struct LossOptions {
  double dropout = 0.0;
  Rng* rng = nullptr;  // required when dropout > 0
  std::optional<double> forced_p_gen;
};

// Teacher-forced negative log-likelihood over the wrapped target (gold
// positions include </s>). Log-probabilities are clamped above -1e9.
double sequence_loss(const ModelParams& p, const EncodedSample& sample,
                     const LossOptions& opts = {});

struct TeacherForcedEval {
  double loss = 0.0;
  std::vector<double> log_probs;  // per gold position
  std::vector<int> argmax;        // per gold position, over the extended vocabulary
};
TeacherForcedEval teacher_forced_eval(const ModelParams& p, const EncodedSample& sample,
                                      const LossOptions& opts = {});

// Forward + exact analytic backward; gradients accumulate into `grads`
// (same shapes as the params). Returns the loss.
double sequence_loss_grad(const ModelParams& p, const EncodedSample& sample,
                          ModelParams& grads, const LossOptions& opts = {});

}  // namespace linefix
