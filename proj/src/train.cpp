#include "linefix/train.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <stdexcept>

#include "linefix/checkpoint.hpp"
#include "linefix/rng.hpp"
#include "linefix/util.hpp"

namespace linefix {
namespace {

size_t gold_positions(const EncodedSample& s) {
  return s.tgt_ext_ids.size() >= 2 ? s.tgt_ext_ids.size() - 1 : 0;
}

double clip_gradients(ModelParams& grads, double max_norm) {
  double sq = 0.0;
  for (TensorRef& t : grads.tensors()) {
    for (size_t i = 0; i < t.size; i++) sq += t.data[i] * t.data[i];
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double scale = max_norm / norm;
    for (TensorRef& t : grads.tensors()) {
      for (size_t i = 0; i < t.size; i++) t.data[i] *= scale;
    }
  }
  return norm;
}

void sgd_step(ModelParams& params, ModelParams& grads, double lr) {
  auto pt = params.tensors();
  auto gt = grads.tensors();
  for (size_t i = 0; i < pt.size(); i++) {
    for (size_t k = 0; k < pt[i].size; k++) pt[i].data[k] -= lr * gt[i].data[k];
  }
}

}  // namespace

NetConfig TrainConfig::net_config(int total_vocab) const {
  NetConfig c;
  c.vocab_size = total_vocab;
  c.emb_dim = emb_dim;
  c.rnn_size = rnn_size;
  c.layers = layers;
  c.use_bridge = use_bridge;
  c.use_copy = use_copy;
  c.max_target_len = max_target_len;
  return c;
}

void TrainConfig::validate() const {
  if (batch_size < 1 || iterations < 1 || vocab_size < 2 || truncation < 1 ||
      eval_every < 1 || beam < 1) {
    throw std::runtime_error("train config values must be positive");
  }
  if (valid_fraction <= 0.0 || valid_fraction >= 1.0) {
    throw std::runtime_error("validation fraction must lie in (0,1)");
  }
  if (dropout < 0.0 || dropout >= 1.0) throw std::runtime_error("bad dropout rate");
}

std::pair<std::vector<size_t>, std::vector<size_t>> split_train_valid(
    size_t n, double valid_fraction, uint64_t seed) {
  std::vector<size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed ^ 0x5eed5eedull);
  rng.shuffle(idx);
  size_t n_valid = static_cast<size_t>(std::floor(static_cast<double>(n) * valid_fraction));
  if (n_valid == 0 && n > 1) n_valid = 1;
  std::vector<size_t> valid(idx.begin(), idx.begin() + static_cast<long>(n_valid));
  std::vector<size_t> train(idx.begin() + static_cast<long>(n_valid), idx.end());
  return {train, valid};
}

double perplexity(const ModelParams& params, const std::vector<EncodedSample>& dataset,
                  const LossOptions& opts) {
  if (dataset.empty()) throw std::runtime_error("perplexity over an empty dataset");
  double nll = 0.0;
  size_t tokens = 0;
  for (const EncodedSample& s : dataset) {
    nll += sequence_loss(params, s, opts);
    tokens += gold_positions(s);
  }
  if (tokens == 0) throw std::runtime_error("perplexity over targets with no tokens");
  return std::exp(nll / static_cast<double>(tokens));
}

double token_accuracy(const ModelParams& params, const std::vector<EncodedSample>& dataset,
                      const LossOptions& opts) {
  if (dataset.empty()) throw std::runtime_error("token accuracy over an empty dataset");
  size_t hits = 0, total = 0;
  for (const EncodedSample& s : dataset) {
    TeacherForcedEval ev = teacher_forced_eval(params, s, opts);
    for (size_t j = 0; j < ev.argmax.size(); j++) {
      int gold = s.tgt_ext_ids[j + 1];
      if (!params.cfg.use_copy && gold >= params.cfg.vocab_size) gold = Vocabulary::kUnk;
      if (ev.argmax[j] == gold) hits++;
      total++;
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(total);
}

void write_metrics_csv(const std::string& path, const std::vector<MetricRow>& rows) {
  std::string body = "iteration,split,token_accuracy,perplexity\n";
  for (const MetricRow& r : rows) {
    body += std::to_string(r.iteration) + "," + r.split + "," +
            std::to_string(r.token_accuracy) + "," + std::to_string(r.perplexity) + "\n";
  }
  write_file(path, body);
}

TrainResult train(const TrainConfig& config, const std::vector<EncodedSample>& train_set,
                  const std::vector<EncodedSample>& valid_set, const Vocabulary& vocab,
                  const std::string& out_dir) {
  config.validate();
  if (train_set.empty()) throw std::runtime_error("empty training set");
  std::filesystem::create_directories(out_dir);

  ModelParams params = init_params(config.seed, config.net_config(vocab.size()));
  ModelParams grads = make_params(params.cfg);
  Rng rng(config.seed * 7919 + 17);

  // Group samples of similar source length into batches; the batch order is
  // reshuffled every epoch.
  std::vector<size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return train_set[a].src_ids.size() < train_set[b].src_ids.size();
  });
  std::vector<std::vector<size_t>> batches;
  for (size_t i = 0; i < order.size(); i += static_cast<size_t>(config.batch_size)) {
    size_t e = std::min(order.size(), i + static_cast<size_t>(config.batch_size));
    batches.emplace_back(order.begin() + static_cast<long>(i), order.begin() + static_cast<long>(e));
  }

  // A fixed slice of the training data keeps per-evaluation cost bounded.
  std::vector<EncodedSample> train_eval;
  for (size_t i = 0; i < std::min<size_t>(train_set.size(), 256); i++) {
    train_eval.push_back(train_set[i]);
  }

  TrainResult result;
  result.params = params;
  result.best_valid_ppl = std::numeric_limits<double>::infinity();
  double lr = config.learning_rate;
  double last_valid_ppl = std::numeric_limits<double>::infinity();

  auto evaluate = [&](long long iter) {
    MetricRow tr{iter, "train", token_accuracy(params, train_eval),
                 perplexity(params, train_eval)};
    result.log.push_back(tr);
    double vppl = tr.perplexity;
    if (!valid_set.empty()) {
      MetricRow vr{iter, "valid", token_accuracy(params, valid_set),
                   perplexity(params, valid_set)};
      result.log.push_back(vr);
      vppl = vr.perplexity;
    }
    std::string path = out_dir + "/ckpt_" + std::to_string(iter) + ".bin";
    save_checkpoint(path, params, vocab.hash(), iter);
    result.checkpoints.push_back(path);
    if (vppl < result.best_valid_ppl) {
      result.best_valid_ppl = vppl;
      result.best_iteration = iter;
      result.best_checkpoint = path;
      result.params = params;
    }
    if (vppl >= last_valid_ppl) lr *= config.lr_decay;
    last_valid_ppl = vppl;
  };

  LossOptions loss_opts;
  loss_opts.dropout = config.dropout;
  loss_opts.rng = &rng;

  size_t batch_cursor = 0;
  std::vector<size_t> batch_order(batches.size());
  std::iota(batch_order.begin(), batch_order.end(), 0);
  rng.shuffle(batch_order);

  for (long long iter = 1; iter <= config.iterations; iter++) {
    if (batch_cursor == batch_order.size()) {
      batch_cursor = 0;
      rng.shuffle(batch_order);
    }
    const std::vector<size_t>& batch = batches[batch_order[batch_cursor++]];
    grads.set_zero();
    double batch_loss = 0.0;
    for (size_t idx : batch) {
      batch_loss += sequence_loss_grad(params, train_set[idx], grads, loss_opts);
    }
    if (!std::isfinite(batch_loss)) throw TrainingDiverged(iter);
    const double scale = 1.0 / static_cast<double>(batch.size());
    for (TensorRef& t : grads.tensors()) {
      for (size_t i = 0; i < t.size; i++) t.data[i] *= scale;
    }
    clip_gradients(grads, config.grad_clip);
    sgd_step(params, grads, lr);

    if (iter % config.eval_every == 0 || iter == config.iterations) {
      evaluate(iter);
    }
  }

  write_metrics_csv(out_dir + "/metrics.csv", result.log);
  std::string best_path = out_dir + "/best.bin";
  save_checkpoint(best_path, result.params, vocab.hash(), result.best_iteration);
  result.best_checkpoint = best_path;
  return result;
}

}  // namespace linefix
