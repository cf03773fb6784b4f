#include "linefix/net.hpp"

#include <cassert>
#include <cmath>
#include <stdexcept>

namespace linefix {
namespace {

constexpr double kLogFloor = -1e9;

LstmWeights make_lstm(int input, int hidden) {
  LstmWeights w;
  w.w_ih = Mat(4 * hidden, input);
  w.w_hh = Mat(4 * hidden, hidden);
  w.b = Vec(static_cast<size_t>(4 * hidden), 0.0);
  return w;
}

struct CellTrace {
  Vec x;
  Vec i, f, g, o;
  Vec c_prev, h_prev;
  Vec c, tanh_c, h;
};

// h, c updated in place; the gates land in the trace when requested.
void cell_forward(const LstmWeights& w, const Vec& x, Vec& h, Vec& c, CellTrace* tr) {
  const int hd = w.hidden();
  Vec z(static_cast<size_t>(4 * hd));
  matvec(w.w_ih, x.data(), z.data());
  matvec(w.w_hh, h.data(), z.data(), /*accumulate=*/true);
  for (int k = 0; k < 4 * hd; k++) z[k] += w.b[k];
  Vec gi(hd), gf(hd), gg(hd), go(hd), nc(hd), tc(hd), nh(hd);
  for (int k = 0; k < hd; k++) {
    gi[k] = sigmoid(z[k]);
    gf[k] = sigmoid(z[hd + k]);
    gg[k] = std::tanh(z[2 * hd + k]);
    go[k] = sigmoid(z[3 * hd + k]);
    nc[k] = gf[k] * c[k] + gi[k] * gg[k];
    tc[k] = std::tanh(nc[k]);
    nh[k] = go[k] * tc[k];
  }
  if (tr) {
    tr->x = x;
    tr->i = gi; tr->f = gf; tr->g = gg; tr->o = go;
    tr->c_prev = c; tr->h_prev = h;
    tr->c = nc; tr->tanh_c = tc; tr->h = nh;
  }
  h = nh;
  c = nc;
}

// dh/dc flow in; dx accumulates into dx_out; dh_prev/dc_prev replace the carries.
void cell_backward(const LstmWeights& w, LstmWeights& gw, const CellTrace& tr,
                   const Vec& dh, const Vec& dc_in, Vec& dx_out, Vec& dh_prev,
                   Vec& dc_prev) {
  const int hd = w.hidden();
  Vec dz(static_cast<size_t>(4 * hd));
  for (int k = 0; k < hd; k++) {
    const double d_o = dh[k] * tr.tanh_c[k];
    const double dc = dc_in[k] + dh[k] * tr.o[k] * (1.0 - tr.tanh_c[k] * tr.tanh_c[k]);
    const double d_i = dc * tr.g[k];
    const double d_f = dc * tr.c_prev[k];
    const double d_g = dc * tr.i[k];
    dc_prev[k] = dc * tr.f[k];
    dz[k] = d_i * tr.i[k] * (1.0 - tr.i[k]);
    dz[hd + k] = d_f * tr.f[k] * (1.0 - tr.f[k]);
    dz[2 * hd + k] = d_g * (1.0 - tr.g[k] * tr.g[k]);
    dz[3 * hd + k] = d_o * tr.o[k] * (1.0 - tr.o[k]);
  }
  add_outer(gw.w_ih, dz.data(), tr.x.data());
  add_outer(gw.w_hh, dz.data(), tr.h_prev.data());
  axpy(1.0, dz.data(), gw.b.data(), 4 * hd);
  matvec_t_acc(w.w_ih, dz.data(), dx_out.data());
  for (int k = 0; k < hd; k++) dh_prev[k] = 0.0;
  matvec_t_acc(w.w_hh, dz.data(), dh_prev.data());
}

struct EncLayerTrace {
  std::vector<CellTrace> fwd, bwd;  // in scan order
  std::vector<Vec> input;           // post-dropout layer input per position
  std::vector<Vec> mask;            // dropout mask (empty when not applied)
};

struct EncTrace {
  std::vector<EncLayerTrace> layers;
};

Vec make_dropout_mask(int n, double rate, Rng& rng) {
  Vec m(static_cast<size_t>(n));
  const double keep = 1.0 - rate;
  for (int k = 0; k < n; k++) m[k] = rng.bernoulli(rate) ? 0.0 : 1.0 / keep;
  return m;
}

void encoder_forward(const ModelParams& p, std::span<const int> src_ids,
                     double dropout, Rng* rng, EncoderStates& out, EncTrace* trace) {
  const int n = static_cast<int>(src_ids.size());
  if (n == 0) throw std::runtime_error("encoder input is empty");
  const int rnn = p.cfg.rnn_size;
  const int dir = p.cfg.enc_dir_size();

  std::vector<Vec> layer_in(static_cast<size_t>(n));
  for (int i = 0; i < n; i++) {
    const double* row = p.embedding.row(src_ids[static_cast<size_t>(i)]);
    layer_in[static_cast<size_t>(i)].assign(row, row + p.cfg.emb_dim);
  }

  out.states = Mat(n, rnn);
  out.final_h.assign(static_cast<size_t>(p.cfg.layers), Vec(static_cast<size_t>(rnn)));
  out.final_c.assign(static_cast<size_t>(p.cfg.layers), Vec(static_cast<size_t>(rnn)));
  if (trace) trace->layers.resize(static_cast<size_t>(p.cfg.layers));

  for (int layer = 0; layer < p.cfg.layers; layer++) {
    EncLayerTrace* lt = trace ? &trace->layers[static_cast<size_t>(layer)] : nullptr;
    if (layer > 0 && dropout > 0.0) {
      for (int i = 0; i < n; i++) {
        Vec m = make_dropout_mask(rnn, dropout, *rng);
        for (int k = 0; k < rnn; k++) layer_in[static_cast<size_t>(i)][k] *= m[k];
        if (lt) lt->mask.push_back(std::move(m));
      }
    }
    if (lt) {
      lt->input = layer_in;
      lt->fwd.resize(static_cast<size_t>(n));
      lt->bwd.resize(static_cast<size_t>(n));
    }
    std::vector<Vec> hf(static_cast<size_t>(n)), hb(static_cast<size_t>(n));
    Vec h(static_cast<size_t>(dir), 0.0), c(static_cast<size_t>(dir), 0.0);
    for (int i = 0; i < n; i++) {
      cell_forward(p.enc_fwd[static_cast<size_t>(layer)], layer_in[static_cast<size_t>(i)], h, c,
                   lt ? &lt->fwd[static_cast<size_t>(i)] : nullptr);
      hf[static_cast<size_t>(i)] = h;
    }
    Vec fh = h, fc = c;
    h.assign(static_cast<size_t>(dir), 0.0);
    c.assign(static_cast<size_t>(dir), 0.0);
    for (int i = n - 1; i >= 0; i--) {
      cell_forward(p.enc_bwd[static_cast<size_t>(layer)], layer_in[static_cast<size_t>(i)], h, c,
                   lt ? &lt->bwd[static_cast<size_t>(n - 1 - i)] : nullptr);
      hb[static_cast<size_t>(i)] = h;
    }
    for (int k = 0; k < dir; k++) {
      out.final_h[static_cast<size_t>(layer)][k] = fh[k];
      out.final_h[static_cast<size_t>(layer)][dir + k] = h[k];  // backward final = position 0
      out.final_c[static_cast<size_t>(layer)][k] = fc[k];
      out.final_c[static_cast<size_t>(layer)][dir + k] = c[k];
    }
    for (int i = 0; i < n; i++) {
      Vec next(static_cast<size_t>(rnn));
      for (int k = 0; k < dir; k++) {
        next[k] = hf[static_cast<size_t>(i)][k];
        next[dir + k] = hb[static_cast<size_t>(i)][k];
      }
      if (layer == p.cfg.layers - 1) {
        for (int k = 0; k < rnn; k++) out.states.at(i, k) = next[k];
      }
      layer_in[static_cast<size_t>(i)] = std::move(next);
    }
  }
}

// d_states: per-position gradient on the top layer outputs. d_final_h/c: per
// layer. Embedding rows for src_ids receive the layer-0 input gradients.
void encoder_backward(const ModelParams& p, ModelParams& grads, const EncTrace& trace,
                      std::span<const int> src_ids, const Mat& d_states,
                      std::vector<Vec>& d_final_h, std::vector<Vec>& d_final_c) {
  const int n = d_states.rows;
  const int rnn = p.cfg.rnn_size;
  const int dir = p.cfg.enc_dir_size();

  std::vector<Vec> d_out(static_cast<size_t>(n), Vec(static_cast<size_t>(rnn), 0.0));
  for (int i = 0; i < n; i++) {
    for (int k = 0; k < rnn; k++) d_out[static_cast<size_t>(i)][k] = d_states.at(i, k);
  }

  for (int layer = p.cfg.layers - 1; layer >= 0; layer--) {
    const EncLayerTrace& lt = trace.layers[static_cast<size_t>(layer)];
    const int in_dim = (layer == 0) ? p.cfg.emb_dim : rnn;
    std::vector<Vec> d_in(static_cast<size_t>(n), Vec(static_cast<size_t>(in_dim), 0.0));

    // Forward direction: scan order i = 0..n-1, backprop i = n-1..0.
    Vec dh(static_cast<size_t>(dir), 0.0), dc(static_cast<size_t>(dir), 0.0);
    for (int k = 0; k < dir; k++) {
      dh[k] += d_final_h[static_cast<size_t>(layer)][k];
      dc[k] += d_final_c[static_cast<size_t>(layer)][k];
    }
    for (int i = n - 1; i >= 0; i--) {
      Vec dh_step = dh;
      for (int k = 0; k < dir; k++) dh_step[k] += d_out[static_cast<size_t>(i)][k];
      Vec dh_prev(static_cast<size_t>(dir), 0.0), dc_prev(static_cast<size_t>(dir), 0.0);
      cell_backward(p.enc_fwd[static_cast<size_t>(layer)], grads.enc_fwd[static_cast<size_t>(layer)],
                    lt.fwd[static_cast<size_t>(i)], dh_step, dc,
                    d_in[static_cast<size_t>(i)], dh_prev, dc_prev);
      dh = std::move(dh_prev);
      dc = std::move(dc_prev);
    }

    // Backward direction: scan order t=0 is source n-1; its final state is at
    // source position 0 (scan position n-1).
    dh.assign(static_cast<size_t>(dir), 0.0);
    dc.assign(static_cast<size_t>(dir), 0.0);
    for (int k = 0; k < dir; k++) {
      dh[k] += d_final_h[static_cast<size_t>(layer)][dir + k];
      dc[k] += d_final_c[static_cast<size_t>(layer)][dir + k];
    }
    for (int t = n - 1; t >= 0; t--) {
      const int i = n - 1 - t;  // source position for scan step t
      Vec dh_step = dh;
      for (int k = 0; k < dir; k++) dh_step[k] += d_out[static_cast<size_t>(i)][dir + k];
      Vec dh_prev(static_cast<size_t>(dir), 0.0), dc_prev(static_cast<size_t>(dir), 0.0);
      cell_backward(p.enc_bwd[static_cast<size_t>(layer)], grads.enc_bwd[static_cast<size_t>(layer)],
                    lt.bwd[static_cast<size_t>(t)], dh_step, dc,
                    d_in[static_cast<size_t>(i)], dh_prev, dc_prev);
      dh = std::move(dh_prev);
      dc = std::move(dc_prev);
    }

    if (layer == 0) {
      for (int i = 0; i < n; i++) {
        double* emb_row = grads.embedding.row(src_ids[static_cast<size_t>(i)]);
        axpy(1.0, d_in[static_cast<size_t>(i)].data(), emb_row, p.cfg.emb_dim);
      }
    } else {
      if (!lt.mask.empty()) {
        for (int i = 0; i < n; i++) {
          for (int k = 0; k < rnn; k++) {
            d_in[static_cast<size_t>(i)][k] *= lt.mask[static_cast<size_t>(i)][k];
          }
        }
      }
      d_out = std::move(d_in);
    }
  }
}

struct StepTrace {
  int feed_id = 0;
  Vec x;
  std::vector<CellTrace> cells;
  std::vector<Vec> inter_mask;  // dropout between decoder layers
  Vec hd;
  Vec alpha;
  Vec ctx;
  Vec cat;
  Vec s_tilde;
  Vec s_mask;  // dropout on the attentional state (empty when not applied)
  Vec s_drop;
  Vec p_vocab;
  double p_gen = 1.0;
  bool gen_forced = false;
  Vec p_final;
  int gold = -1;
  double p_gold = 0.0;
};

int feed_token(const NetConfig& cfg, int ext_id) {
  return ext_id < cfg.vocab_size ? ext_id : Vocabulary::kUnk;
}

// One decoder step over a given state; fills outputs and the optional trace.
void step_forward(const ModelParams& p, int prev_ext_id, DecoderState& state,
                  const EncoderStates& enc, const AttnKeys& keys,
                  std::span<const int> src_ext_ids, int ext_vocab,
                  const StepOptions& opts, double dropout, Rng* rng, StepTrace* tr) {
  const NetConfig& cfg = p.cfg;
  const int rnn = cfg.rnn_size;
  const int n = enc.length();
  const int feed = feed_token(cfg, prev_ext_id);

  Vec x(static_cast<size_t>(cfg.emb_dim + rnn));
  const double* erow = p.embedding.row(feed);
  for (int k = 0; k < cfg.emb_dim; k++) x[k] = erow[k];
  for (int k = 0; k < rnn; k++) x[cfg.emb_dim + k] = state.input_feed[k];

  tr->feed_id = feed;
  tr->x = x;
  tr->cells.resize(static_cast<size_t>(cfg.layers));

  Vec layer_x = x;
  for (int layer = 0; layer < cfg.layers; layer++) {
    cell_forward(p.dec[static_cast<size_t>(layer)], layer_x,
                 state.h[static_cast<size_t>(layer)], state.c[static_cast<size_t>(layer)],
                 &tr->cells[static_cast<size_t>(layer)]);
    layer_x = state.h[static_cast<size_t>(layer)];
    if (layer + 1 < cfg.layers && dropout > 0.0) {
      Vec m = make_dropout_mask(rnn, dropout, *rng);
      for (int k = 0; k < rnn; k++) layer_x[k] *= m[k];
      if (tr) tr->inter_mask.push_back(std::move(m));
    }
  }
  const Vec hd = layer_x;

  // Global attention, bilinear score against the precomputed keys.
  Vec alpha(static_cast<size_t>(n));
  for (int i = 0; i < n; i++) alpha[static_cast<size_t>(i)] = dot(hd.data(), keys.keys.row(i), rnn);
  softmax_inplace(alpha.data(), n);
  Vec ctx(static_cast<size_t>(rnn), 0.0);
  for (int i = 0; i < n; i++) axpy(alpha[static_cast<size_t>(i)], enc.states.row(i), ctx.data(), rnn);

  Vec cat(static_cast<size_t>(2 * rnn));
  for (int k = 0; k < rnn; k++) { cat[k] = ctx[k]; cat[rnn + k] = hd[k]; }
  Vec s_tilde(static_cast<size_t>(rnn));
  matvec(p.attn_out, cat.data(), s_tilde.data());
  for (int k = 0; k < rnn; k++) s_tilde[k] = std::tanh(s_tilde[k]);

  Vec s_drop = s_tilde;
  Vec s_mask;
  if (dropout > 0.0) {
    s_mask = make_dropout_mask(rnn, dropout, *rng);
    for (int k = 0; k < rnn; k++) s_drop[k] *= s_mask[k];
  }

  Vec p_vocab(static_cast<size_t>(cfg.vocab_size));
  matvec(p.gen_w, s_drop.data(), p_vocab.data());
  for (int k = 0; k < cfg.vocab_size; k++) p_vocab[static_cast<size_t>(k)] += p.gen_b[static_cast<size_t>(k)];
  softmax_inplace(p_vocab.data(), cfg.vocab_size);

  double p_gen = 1.0;
  bool forced = false;
  if (cfg.use_copy) {
    if (opts.forced_p_gen) {
      p_gen = *opts.forced_p_gen;
      forced = true;
    } else {
      p_gen = sigmoid(dot(p.copy_w.data(), s_drop.data(), rnn) + p.copy_b);
    }
  }

  Vec p_final(static_cast<size_t>(ext_vocab), 0.0);
  for (int k = 0; k < cfg.vocab_size; k++) {
    p_final[static_cast<size_t>(k)] = p_gen * p_vocab[static_cast<size_t>(k)];
  }
  if (cfg.use_copy) {
    for (size_t i = 0; i < src_ext_ids.size(); i++) {
      p_final[static_cast<size_t>(src_ext_ids[i])] += (1.0 - p_gen) * alpha[i];
    }
  }

  state.input_feed = s_drop;
  tr->hd = hd;
  tr->alpha = std::move(alpha);
  tr->ctx = std::move(ctx);
  tr->cat = std::move(cat);
  tr->s_tilde = std::move(s_tilde);
  tr->s_mask = std::move(s_mask);
  tr->s_drop = state.input_feed;
  tr->p_vocab = std::move(p_vocab);
  tr->p_gen = p_gen;
  tr->gen_forced = forced;
  tr->p_final = std::move(p_final);
}

// dh_carry/dc_carry: recurrent gradients from step j+1. dfeed: gradient on
// this step's s_drop via the next step's input feed. Returns dfeed for j-1 in
// place and accumulates into d_enc_states.
void step_backward(const ModelParams& p, ModelParams& grads, const StepTrace& tr,
                   const EncoderStates& enc, const AttnKeys& keys,
                   std::span<const int> src_ext_ids,
                   std::vector<Vec>& dh_carry, std::vector<Vec>& dc_carry,
                   Vec& dfeed, Mat& d_enc_states) {
  const NetConfig& cfg = p.cfg;
  const int rnn = cfg.rnn_size;
  const int n = enc.length();
  const int V = cfg.vocab_size;

  Vec ds_drop = dfeed;  // input-feed path from the following step

  Vec dP_V(static_cast<size_t>(V), 0.0);
  double dp_gen = 0.0;
  Vec dalpha(static_cast<size_t>(n), 0.0);
  if (tr.gold >= 0 && tr.p_gold > 0.0) {
    const double dPf = -1.0 / tr.p_gold;
    if (tr.gold < V) {
      dP_V[static_cast<size_t>(tr.gold)] += tr.p_gen * dPf;
      dp_gen += tr.p_vocab[static_cast<size_t>(tr.gold)] * dPf;
    }
    if (cfg.use_copy) {
      double copy_mass = 0.0;
      for (size_t i = 0; i < src_ext_ids.size(); i++) {
        if (src_ext_ids[i] == tr.gold) {
          copy_mass += tr.alpha[i];
          dalpha[i] += (1.0 - tr.p_gen) * dPf;
        }
      }
      dp_gen -= copy_mass * dPf;
    }
  }

  // Generator.
  Vec dlogits(static_cast<size_t>(V));
  softmax_backward(tr.p_vocab.data(), dP_V.data(), dlogits.data(), V);
  add_outer(grads.gen_w, dlogits.data(), tr.s_drop.data());
  axpy(1.0, dlogits.data(), grads.gen_b.data(), V);
  matvec_t_acc(p.gen_w, dlogits.data(), ds_drop.data());

  // Copy gate.
  if (cfg.use_copy && !tr.gen_forced) {
    const double dz = dp_gen * tr.p_gen * (1.0 - tr.p_gen);
    axpy(dz, tr.s_drop.data(), grads.copy_w.data(), rnn);
    grads.copy_b += dz;
    axpy(dz, p.copy_w.data(), ds_drop.data(), rnn);
  }

  // Dropout and tanh on the attentional state.
  Vec ds_tilde = ds_drop;
  if (!tr.s_mask.empty()) {
    for (int k = 0; k < rnn; k++) ds_tilde[k] *= tr.s_mask[k];
  }
  Vec dpre(static_cast<size_t>(rnn));
  for (int k = 0; k < rnn; k++) {
    dpre[k] = ds_tilde[k] * (1.0 - tr.s_tilde[k] * tr.s_tilde[k]);
  }
  add_outer(grads.attn_out, dpre.data(), tr.cat.data());
  Vec dcat(static_cast<size_t>(2 * rnn), 0.0);
  matvec_t_acc(p.attn_out, dpre.data(), dcat.data());
  Vec dctx(dcat.begin(), dcat.begin() + rnn);
  Vec dhd(dcat.begin() + rnn, dcat.end());

  // Context vector: ctx = sum_i alpha_i h_i.
  for (int i = 0; i < n; i++) {
    dalpha[static_cast<size_t>(i)] += dot(enc.states.row(i), dctx.data(), rnn);
    axpy(tr.alpha[static_cast<size_t>(i)], dctx.data(), d_enc_states.row(i), rnn);
  }

  // Attention softmax and bilinear scores.
  Vec dscores(static_cast<size_t>(n));
  softmax_backward(tr.alpha.data(), dalpha.data(), dscores.data(), n);
  Vec dkey(static_cast<size_t>(rnn));
  for (int i = 0; i < n; i++) {
    const double ds = dscores[static_cast<size_t>(i)];
    if (ds == 0.0) continue;
    axpy(ds, keys.keys.row(i), dhd.data(), rnn);
    for (int k = 0; k < rnn; k++) dkey[k] = ds * tr.hd[k];
    add_outer(grads.attn_score, dkey.data(), enc.states.row(i));
    matvec_t_acc(p.attn_score, dkey.data(), d_enc_states.row(i));
  }

  // Decoder stack, top layer first.
  Vec d_layer_out = dhd;
  for (int layer = cfg.layers - 1; layer >= 0; layer--) {
    Vec dh_step = d_layer_out;
    for (int k = 0; k < rnn; k++) dh_step[k] += dh_carry[static_cast<size_t>(layer)][k];
    const int in_dim = p.dec[static_cast<size_t>(layer)].input();
    Vec dx(static_cast<size_t>(in_dim), 0.0);
    Vec dh_prev(static_cast<size_t>(rnn), 0.0), dc_prev(static_cast<size_t>(rnn), 0.0);
    cell_backward(p.dec[static_cast<size_t>(layer)], grads.dec[static_cast<size_t>(layer)],
                  tr.cells[static_cast<size_t>(layer)], dh_step,
                  dc_carry[static_cast<size_t>(layer)], dx, dh_prev, dc_prev);
    dh_carry[static_cast<size_t>(layer)] = std::move(dh_prev);
    dc_carry[static_cast<size_t>(layer)] = std::move(dc_prev);
    if (layer > 0) {
      if (!tr.inter_mask.empty()) {
        const Vec& m = tr.inter_mask[static_cast<size_t>(layer - 1)];
        for (int k = 0; k < rnn; k++) dx[k] *= m[k];
      }
      d_layer_out = std::move(dx);
    } else {
      double* emb_row = grads.embedding.row(tr.feed_id);
      axpy(1.0, dx.data(), emb_row, cfg.emb_dim);
      dfeed.assign(dx.begin() + cfg.emb_dim, dx.end());
    }
  }
}

struct ForwardRun {
  EncoderStates enc;
  AttnKeys keys;
  EncTrace enc_trace;
  std::vector<StepTrace> steps;
  double loss = 0.0;
};

int remap_gold(const NetConfig& cfg, int gold) {
  return (!cfg.use_copy && gold >= cfg.vocab_size) ? Vocabulary::kUnk : gold;
}

ForwardRun run_teacher_forced(const ModelParams& p, const EncodedSample& sample,
                              const LossOptions& opts, bool want_trace) {
  p.cfg.validate();
  if (sample.tgt_ext_ids.size() < 2) {
    throw std::runtime_error("teacher forcing requires a non-empty target");
  }
  if (opts.dropout > 0.0 && opts.rng == nullptr) {
    throw std::runtime_error("dropout requires an RNG");
  }
  ForwardRun run;
  encoder_forward(p, sample.src_ids, opts.dropout, opts.rng, run.enc,
                  want_trace ? &run.enc_trace : nullptr);
  run.keys = make_attn_keys(p, run.enc);
  DecoderState state = init_decoder_state(p, run.enc);
  const int ext_vocab = p.cfg.vocab_size + static_cast<int>(sample.oov_list.size());
  StepOptions step_opts{opts.forced_p_gen};

  const size_t m = sample.tgt_ext_ids.size() - 1;  // gold positions
  run.steps.resize(m);
  for (size_t j = 0; j < m; j++) {
    StepTrace& tr = run.steps[j];
    step_forward(p, sample.tgt_ext_ids[j], state, run.enc, run.keys,
                 sample.src_ext_ids, ext_vocab, step_opts, opts.dropout, opts.rng, &tr);
    tr.gold = remap_gold(p.cfg, sample.tgt_ext_ids[j + 1]);
    tr.p_gold = tr.p_final[static_cast<size_t>(tr.gold)];
    const double lp = tr.p_gold > 0.0 ? std::max(std::log(tr.p_gold), kLogFloor) : kLogFloor;
    run.loss -= lp;
  }
  return run;
}

}  // namespace

void NetConfig::validate() const {
  if (vocab_size < 6) throw std::runtime_error("vocab_size must cover specials and markers");
  if (emb_dim < 1 || rnn_size < 2 || layers < 1) throw std::runtime_error("bad net dimensions");
  if (rnn_size % 2 != 0) throw std::runtime_error("rnn_size must be even (bidirectional encoder)");
}

std::vector<TensorRef> ModelParams::tensors() {
  std::vector<TensorRef> out;
  auto add_mat = [&](const std::string& name, Mat& m) {
    out.push_back({name, m.a.data(), m.a.size()});
  };
  auto add_vec = [&](const std::string& name, Vec& v) {
    out.push_back({name, v.data(), v.size()});
  };
  add_mat("embedding", embedding);
  for (size_t l = 0; l < enc_fwd.size(); l++) {
    const std::string base = "enc.l" + std::to_string(l);
    add_mat(base + ".fwd.w_ih", enc_fwd[l].w_ih);
    add_mat(base + ".fwd.w_hh", enc_fwd[l].w_hh);
    add_vec(base + ".fwd.b", enc_fwd[l].b);
    add_mat(base + ".bwd.w_ih", enc_bwd[l].w_ih);
    add_mat(base + ".bwd.w_hh", enc_bwd[l].w_hh);
    add_vec(base + ".bwd.b", enc_bwd[l].b);
  }
  if (cfg.use_bridge) {
    add_mat("bridge.h.w", bridge_h);
    add_vec("bridge.h.b", bridge_h_b);
    add_mat("bridge.c.w", bridge_c);
    add_vec("bridge.c.b", bridge_c_b);
  }
  for (size_t l = 0; l < dec.size(); l++) {
    const std::string base = "dec.l" + std::to_string(l);
    add_mat(base + ".w_ih", dec[l].w_ih);
    add_mat(base + ".w_hh", dec[l].w_hh);
    add_vec(base + ".b", dec[l].b);
  }
  add_mat("attn.score", attn_score);
  add_mat("attn.out", attn_out);
  add_mat("gen.w", gen_w);
  add_vec("gen.b", gen_b);
  if (cfg.use_copy) {
    add_vec("copy.w", copy_w);
    out.push_back({"copy.b", &copy_b, 1});
  }
  return out;
}

size_t ModelParams::param_count() const {
  size_t total = 0;
  for (const TensorRef& t : const_cast<ModelParams*>(this)->tensors()) total += t.size;
  return total;
}

void ModelParams::set_zero() {
  for (TensorRef& t : tensors()) {
    for (size_t i = 0; i < t.size; i++) t.data[i] = 0.0;
  }
}

ModelParams make_params(const NetConfig& cfg) {
  cfg.validate();
  ModelParams p;
  p.cfg = cfg;
  const int rnn = cfg.rnn_size;
  const int dir = cfg.enc_dir_size();
  p.embedding = Mat(cfg.vocab_size, cfg.emb_dim);
  for (int l = 0; l < cfg.layers; l++) {
    const int in = (l == 0) ? cfg.emb_dim : rnn;
    p.enc_fwd.push_back(make_lstm(in, dir));
    p.enc_bwd.push_back(make_lstm(in, dir));
  }
  p.bridge_h = Mat(rnn, rnn);
  p.bridge_c = Mat(rnn, rnn);
  p.bridge_h_b = Vec(static_cast<size_t>(rnn), 0.0);
  p.bridge_c_b = Vec(static_cast<size_t>(rnn), 0.0);
  for (int l = 0; l < cfg.layers; l++) {
    const int in = (l == 0) ? cfg.emb_dim + rnn : rnn;
    p.dec.push_back(make_lstm(in, rnn));
  }
  p.attn_score = Mat(rnn, rnn);
  p.attn_out = Mat(rnn, 2 * rnn);
  p.gen_w = Mat(cfg.vocab_size, rnn);
  p.gen_b = Vec(static_cast<size_t>(cfg.vocab_size), 0.0);
  p.copy_w = Vec(static_cast<size_t>(rnn), 0.0);
  p.copy_b = 0.0;
  return p;
}

ModelParams init_params(uint64_t seed, const NetConfig& cfg) {
  ModelParams p = make_params(cfg);
  Rng rng(seed);
  for (TensorRef& t : p.tensors()) {
    for (size_t i = 0; i < t.size; i++) t.data[i] = rng.uniform(-0.1, 0.1);
  }
  // Forget-gate bias starts at 1 so early training does not wipe the cell state.
  auto lift_forget = [](std::vector<LstmWeights>& ws) {
    for (LstmWeights& w : ws) {
      const int hd = w.hidden();
      for (int k = 0; k < hd; k++) w.b[static_cast<size_t>(hd + k)] = 1.0;
    }
  };
  lift_forget(p.enc_fwd);
  lift_forget(p.enc_bwd);
  lift_forget(p.dec);
  return p;
}

EncoderStates encode(const ModelParams& p, std::span<const int> src_ids) {
  EncoderStates out;
  encoder_forward(p, src_ids, 0.0, nullptr, out, nullptr);
  return out;
}

AttnKeys make_attn_keys(const ModelParams& p, const EncoderStates& enc) {
  AttnKeys keys;
  keys.keys = Mat(enc.length(), p.cfg.rnn_size);
  for (int i = 0; i < enc.length(); i++) {
    matvec(p.attn_score, enc.states.row(i), keys.keys.row(i));
  }
  return keys;
}

DecoderState init_decoder_state(const ModelParams& p, const EncoderStates& enc) {
  const int rnn = p.cfg.rnn_size;
  DecoderState st;
  st.h.assign(static_cast<size_t>(p.cfg.layers), Vec(static_cast<size_t>(rnn), 0.0));
  st.c.assign(static_cast<size_t>(p.cfg.layers), Vec(static_cast<size_t>(rnn), 0.0));
  st.input_feed.assign(static_cast<size_t>(rnn), 0.0);
  for (int l = 0; l < p.cfg.layers; l++) {
    if (p.cfg.use_bridge) {
      matvec(p.bridge_h, enc.final_h[static_cast<size_t>(l)].data(), st.h[static_cast<size_t>(l)].data());
      matvec(p.bridge_c, enc.final_c[static_cast<size_t>(l)].data(), st.c[static_cast<size_t>(l)].data());
      axpy(1.0, p.bridge_h_b.data(), st.h[static_cast<size_t>(l)].data(), rnn);
      axpy(1.0, p.bridge_c_b.data(), st.c[static_cast<size_t>(l)].data(), rnn);
    } else {
      st.h[static_cast<size_t>(l)] = enc.final_h[static_cast<size_t>(l)];
      st.c[static_cast<size_t>(l)] = enc.final_c[static_cast<size_t>(l)];
    }
  }
  return st;
}

DecoderStep decode_step(const ModelParams& p, int prev_ext_id, const DecoderState& state,
                        const EncoderStates& enc, const AttnKeys& keys,
                        std::span<const int> src_ext_ids, int ext_vocab,
                        const StepOptions& opts) {
  DecoderStep out;
  out.state = state;
  StepTrace tr;
  step_forward(p, prev_ext_id, out.state, enc, keys, src_ext_ids, ext_vocab, opts,
               0.0, nullptr, &tr);
  out.attention = std::move(tr.alpha);
  out.attn_state = std::move(tr.s_drop);
  out.p_vocab = std::move(tr.p_vocab);
  out.p_gen = tr.p_gen;
  out.p_final = std::move(tr.p_final);
  return out;
}

double sequence_loss(const ModelParams& p, const EncodedSample& sample,
                     const LossOptions& opts) {
  return run_teacher_forced(p, sample, opts, /*want_trace=*/false).loss;
}

TeacherForcedEval teacher_forced_eval(const ModelParams& p, const EncodedSample& sample,
                                      const LossOptions& opts) {
  ForwardRun run = run_teacher_forced(p, sample, opts, /*want_trace=*/false);
  TeacherForcedEval ev;
  ev.loss = run.loss;
  for (const StepTrace& tr : run.steps) {
    const double lp = tr.p_gold > 0.0 ? std::max(std::log(tr.p_gold), kLogFloor) : kLogFloor;
    ev.log_probs.push_back(lp);
    int best = 0;
    for (int k = 1; k < static_cast<int>(tr.p_final.size()); k++) {
      if (tr.p_final[static_cast<size_t>(k)] > tr.p_final[static_cast<size_t>(best)]) best = k;
    }
    ev.argmax.push_back(best);
  }
  return ev;
}

double sequence_loss_grad(const ModelParams& p, const EncodedSample& sample,
                          ModelParams& grads, const LossOptions& opts) {
  ForwardRun run = run_teacher_forced(p, sample, opts, /*want_trace=*/true);
  const NetConfig& cfg = p.cfg;
  const int rnn = cfg.rnn_size;

  std::vector<Vec> dh_carry(static_cast<size_t>(cfg.layers), Vec(static_cast<size_t>(rnn), 0.0));
  std::vector<Vec> dc_carry(static_cast<size_t>(cfg.layers), Vec(static_cast<size_t>(rnn), 0.0));
  Vec dfeed(static_cast<size_t>(rnn), 0.0);
  Mat d_enc_states(run.enc.length(), rnn);

  for (size_t j = run.steps.size(); j-- > 0;) {
    step_backward(p, grads, run.steps[j], run.enc, run.keys, sample.src_ext_ids,
                  dh_carry, dc_carry, dfeed, d_enc_states);
  }
  // dfeed at j=0 lands on the zero-valued initial input feed: discarded.

  std::vector<Vec> d_final_h(static_cast<size_t>(cfg.layers), Vec(static_cast<size_t>(rnn), 0.0));
  std::vector<Vec> d_final_c(static_cast<size_t>(cfg.layers), Vec(static_cast<size_t>(rnn), 0.0));
  for (int l = 0; l < cfg.layers; l++) {
    if (cfg.use_bridge) {
      add_outer(grads.bridge_h, dh_carry[static_cast<size_t>(l)].data(),
                run.enc.final_h[static_cast<size_t>(l)].data());
      add_outer(grads.bridge_c, dc_carry[static_cast<size_t>(l)].data(),
                run.enc.final_c[static_cast<size_t>(l)].data());
      axpy(1.0, dh_carry[static_cast<size_t>(l)].data(), grads.bridge_h_b.data(), rnn);
      axpy(1.0, dc_carry[static_cast<size_t>(l)].data(), grads.bridge_c_b.data(), rnn);
      matvec_t_acc(p.bridge_h, dh_carry[static_cast<size_t>(l)].data(),
                   d_final_h[static_cast<size_t>(l)].data());
      matvec_t_acc(p.bridge_c, dc_carry[static_cast<size_t>(l)].data(),
                   d_final_c[static_cast<size_t>(l)].data());
    } else {
      d_final_h[static_cast<size_t>(l)] = dh_carry[static_cast<size_t>(l)];
      d_final_c[static_cast<size_t>(l)] = dc_carry[static_cast<size_t>(l)];
    }
  }

  encoder_backward(p, grads, run.enc_trace, sample.src_ids, d_enc_states,
                   d_final_h, d_final_c);
  return run.loss;
}

}  // namespace linefix
