#pragma once

#include <string>
#include <vector>

#include "linefix/net.hpp"
#include "linefix/vocab.hpp"

namespace linefix {

struct TrainConfig {
  int batch_size = 32;
  long long iterations = 10000;
  double dropout = 0.3;
  int vocab_size = 1000;   // learned tokens; specials come on top
  int truncation = 1000;
  double learning_rate = 1.0;
  double lr_decay = 0.5;   // applied when validation perplexity stalls
  double grad_clip = 5.0;
  long long eval_every = 500;
  double valid_fraction = 0.05;
  uint64_t seed = 1;

  // Architecture and inference knobs, surfaced so ablations can move them.
  int emb_dim = 256;
  int rnn_size = 256;
  int layers = 2;
  bool use_bridge = true;
  bool use_copy = true;
  int beam = 50;
  int max_target_len = 100;
  bool context_line_only = false;
  bool keep_markers = true;

  NetConfig net_config(int total_vocab) const;
  void validate() const;
};

struct MetricRow {
  long long iteration = 0;
  std::string split;
  double token_accuracy = 0.0;
  double perplexity = 0.0;
};

struct TrainResult {
  std::vector<MetricRow> log;
  std::vector<std::string> checkpoints;
  std::string best_checkpoint;
  long long best_iteration = 0;
  double best_valid_ppl = 0.0;
  ModelParams params;  // the selected (best validation perplexity) parameters
};

// Thrown when the loss goes non-finite; carries the offending iteration.
struct TrainingDiverged : std::runtime_error {
  long long iteration;
  explicit TrainingDiverged(long long it)
      : std::runtime_error("training diverged (non-finite loss) at iteration " +
                           std::to_string(it)),
        iteration(it) {}
};

// Plain SGD with gradient-norm clipping; batches group samples of similar
// source length; evaluates and checkpoints every eval_every iterations and
// selects the checkpoint with the best validation perplexity.
TrainResult train(const TrainConfig& config, const std::vector<EncodedSample>& train_set,
                  const std::vector<EncodedSample>& valid_set, const Vocabulary& vocab,
                  const std::string& out_dir);

// Corpus perplexity: exp(total NLL / total gold tokens), teacher-forced.
double perplexity(const ModelParams& params, const std::vector<EncodedSample>& dataset,
                  const LossOptions& opts = {});

// Teacher-forced argmax-vs-gold accuracy over all gold positions.
double token_accuracy(const ModelParams& params, const std::vector<EncodedSample>& dataset,
                      const LossOptions& opts = {});

void write_metrics_csv(const std::string& path, const std::vector<MetricRow>& rows);

// Deterministic 95/5-style index split; the two halves are disjoint.
std::pair<std::vector<size_t>, std::vector<size_t>> split_train_valid(
    size_t n, double valid_fraction, uint64_t seed);

}  // namespace linefix
