#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "cmet/autodiff.hpp"
#include "cmet/config.hpp"
#include "cmet/nn.hpp"

// The cross-modal editor: maps an audio-space emotion semantic vector plus an
// input visual clip and a reference window to predicted visual-space semantic
// vectors, one per frame. Token layout along the sequence axis:
//   [T+1 reference tokens] [1 audio token] [T visual tokens]   (2T+2 total)
// Reference and visual tokens get sinusoidal positions (reference slots 0..T,
// visual slots 1..T); the audio token carries no position. Each source type
// adds its own learnable type embedding. The contrastive tokenizers are
// separate parameter stacks whose gradients come only from the contrastive
// loss.

namespace cmet {

template <class S>
struct EncoderLayer {
  ad::Var<S> ln1_g, ln1_b;
  ad::Var<S> wq, bq, wk, bk, wv, bv, wo, bo;
  ad::Var<S> ln2_g, ln2_b;
  ad::Var<S> w1, b1, w2, b2;
};

// Full (non-causal) multi-head attention over tokens x: [n x d].
template <class S>
ad::Var<S> multi_head_attention(const ad::Var<S>& x, const ad::Var<S>& wq, const ad::Var<S>& bq,
                                const ad::Var<S>& wk, const ad::Var<S>& bk, const ad::Var<S>& wv,
                                const ad::Var<S>& bv, const ad::Var<S>& wo, const ad::Var<S>& bo,
                                int heads) {
  const int d = x->val.cols();
  if (heads < 1 || d % heads != 0)
    throw config_error("attention: width " + std::to_string(d) + " not divisible by " +
                       std::to_string(heads) + " heads");
  const int dh = d / heads;
  auto q = ad::add_rowvec(ad::matmul(x, wq), bq);
  auto k = ad::add_rowvec(ad::matmul(x, wk), bk);
  auto v = ad::add_rowvec(ad::matmul(x, wv), bv);
  const S scale = S(1) / (S)std::sqrt((double)dh);
  std::vector<ad::Var<S>> head_outs;
  for (int h = 0; h < heads; ++h) {
    auto qh = ad::slice_cols(q, h * dh, (h + 1) * dh);
    auto kh = ad::slice_cols(k, h * dh, (h + 1) * dh);
    auto vh = ad::slice_cols(v, h * dh, (h + 1) * dh);
    auto scores = ad::affine(ad::matmul_nt(qh, kh), scale, S(0));
    auto attn = ad::softmax(scores, 1);
    head_outs.push_back(ad::matmul(attn, vh));
  }
  auto cat = heads == 1 ? head_outs[0] : ad::concat_cols(head_outs);
  return ad::add_rowvec(ad::matmul(cat, wo), bo);
}

template <class S>
struct CMetModel {
  ModelCfg cfg;  // d_a, d_v, T resolved; ffn resolved

  std::vector<ad::Var<S>> params;  // registration order is the init/checkpoint order

  ad::Var<S> proj_r_w, proj_r_b;  // d_v -> d
  ad::Var<S> proj_a_w, proj_a_b;  // d_a -> d
  ad::Var<S> proj_v_w, proj_v_b;  // d_v -> d
  ad::Var<S> type_r, type_a, type_v;
  Tensor<S> pos_table;            // sinusoidal, rows 0..T
  std::vector<EncoderLayer<S>> enc;
  ad::Var<S> final_ln_g, final_ln_b;  // applied after the stack in pre-norm mode
  ad::Var<S> head_w;                  // d -> d_v, bias-free

  ad::Var<S> ta_w1, ta_b1, ta_w2, ta_b2;  // audio tokenizer: d_a -> d -> d
  ad::Var<S> tv_w1, tv_b1, tv_w2, tv_b2;  // visual tokenizer convs: {3,d_v,d}, {3,d,d}

  Rng* dropout_rng = nullptr;  // set by the trainer; null disables dropout

  ad::Var<S> reg(Tensor<S> t, const std::string& name) {
    auto p = ad::make_param(std::move(t), name);
    params.push_back(p);
    return p;
  }

  ad::Var<S> maybe_dropout(const ad::Var<S>& x) {
    if (cfg.dropout > 0 && dropout_rng) return ad::dropout(x, cfg.dropout, *dropout_rng);
    return x;
  }

  ad::Var<S> encoder_layer(const ad::Var<S>& x_in, const EncoderLayer<S>& L) {
    const S eps = (S)cfg.ln_eps;
    auto ffn = [&](const ad::Var<S>& h) {
      auto a = ad::gelu(ad::add_rowvec(ad::matmul(h, L.w1), L.b1));
      return ad::add_rowvec(ad::matmul(a, L.w2), L.b2);
    };
    if (cfg.prenorm) {
      auto a = multi_head_attention(ad::layer_norm(x_in, L.ln1_g, L.ln1_b, eps), L.wq, L.bq, L.wk,
                                    L.bk, L.wv, L.bv, L.wo, L.bo, cfg.heads);
      auto x = ad::add(x_in, maybe_dropout(a));
      auto f = ffn(ad::layer_norm(x, L.ln2_g, L.ln2_b, eps));
      return ad::add(x, maybe_dropout(f));
    }
    auto a = multi_head_attention(x_in, L.wq, L.bq, L.wk, L.bk, L.wv, L.bv, L.wo, L.bo, cfg.heads);
    auto x = ad::layer_norm(ad::add(x_in, maybe_dropout(a)), L.ln1_g, L.ln1_b, eps);
    auto f = ffn(x);
    return ad::layer_norm(ad::add(x, maybe_dropout(f)), L.ln2_g, L.ln2_b, eps);
  }

  ad::Var<S> encode(const ad::Var<S>& tokens) {
    auto x = tokens;
    for (const auto& L : enc) x = encoder_layer(x, L);
    if (cfg.prenorm) x = ad::layer_norm(x, final_ln_g, final_ln_b, (S)cfg.ln_eps);
    return x;
  }

  // ref: (T+1) x d_v reference semantic vectors (slot 0 is the zero boundary
  // slot at a sequence start), asv: audio semantic vector (d_a), clip: T x d_v
  // input embeddings. Returns the 2T+2 x d token sequence.
  ad::Var<S> assemble_tokens(const Tensor<S>& ref, const Tensor<S>& asv, const Tensor<S>& clip) {
    const int T = cfg.T, dv = cfg.d_v, da = cfg.d_a, d = cfg.d;
    if (ref.rows() != T + 1 || ref.cols() != dv)
      throw usage_error("assemble_tokens: reference must be (T+1) x d_v, got " + shape_str(ref.shape));
    if ((int)asv.numel() != da)
      throw usage_error("assemble_tokens: audio semantic vector must have length d_a");
    if (clip.rows() != T || clip.cols() != dv)
      throw usage_error("assemble_tokens: input clip must be T x d_v, got " + shape_str(clip.shape));

    // positions: reference slots 0..T, visual slots 1..T
    Tensor<S> pos_r(Shape{T + 1, d});
    std::copy(pos_table.data.begin(), pos_table.data.begin() + (size_t)(T + 1) * d, pos_r.data.begin());
    Tensor<S> pos_v(Shape{T, d});
    std::copy(pos_table.data.begin() + (size_t)d, pos_table.data.begin() + (size_t)(T + 1) * d,
              pos_v.data.begin());

    auto r_tok = ad::add_rowvec(
        ad::add(ad::add_rowvec(ad::matmul(ad::make_const(ref), proj_r_w), proj_r_b),
                ad::make_const(std::move(pos_r))),
        type_r);
    Tensor<S> a_row(Shape{1, da});
    std::copy(asv.data.begin(), asv.data.end(), a_row.data.begin());
    auto a_tok = ad::add_rowvec(
        ad::add_rowvec(ad::matmul(ad::make_const(std::move(a_row)), proj_a_w), proj_a_b), type_a);
    auto v_tok = ad::add_rowvec(
        ad::add(ad::add_rowvec(ad::matmul(ad::make_const(clip), proj_v_w), proj_v_b),
                ad::make_const(std::move(pos_v))),
        type_v);
    return ad::concat_rows<S>({r_tok, a_tok, v_tok});
  }

  // Predicted visual semantic vectors: encoder output's last T tokens through
  // the bias-free output projection. Returns T x d_v.
  ad::Var<S> predict_sv(const Tensor<S>& ref, const Tensor<S>& asv, const Tensor<S>& clip) {
    auto tokens = assemble_tokens(ref, asv, clip);
    auto out = encode(tokens);
    auto last = ad::slice_rows(out, cfg.T + 2, 2 * cfg.T + 2);
    return ad::matmul(last, head_w);
  }

  // Contrastive tokenizers -----------------------------------------------

  // clip: T x d_v -> conv(k=3,pad=1) -> gelu -> conv(k=3,pad=1) -> mean pool -> d
  ad::Var<S> visual_token(const ad::Var<S>& clip) {
    if (clip->val.rows() != cfg.T || clip->val.cols() != cfg.d_v)
      throw usage_error("visual_token: clip must be T x d_v, got " + shape_str(clip->val.shape));
    auto h = ad::gelu(ad::conv1d(clip, tv_w1, tv_b1, 1, 1));
    auto y = ad::conv1d(h, tv_w2, tv_b2, 1, 1);
    return ad::mean_rows(y);
  }

  // a: 1 x d_a -> linear -> gelu -> linear -> 1 x d
  ad::Var<S> audio_token(const ad::Var<S>& a) {
    if ((int)a->val.numel() != cfg.d_a)
      throw usage_error("audio_token: embedding must have length d_a");
    auto h = ad::gelu(ad::add_rowvec(ad::matmul(a, ta_w1), ta_b1));
    return ad::add_rowvec(ad::matmul(h, ta_w2), ta_b2);
  }
};

template <class S>
CMetModel<S> build_model(const ModelCfg& cfg, uint64_t seed) {
  if (cfg.d_a < 1 || cfg.d_v < 1 || cfg.T < 1)
    throw config_error("build_model: d_a/d_v/T must be resolved before building");
  if (cfg.d % cfg.heads != 0) throw config_error("build_model: d must be divisible by heads");

  CMetModel<S> m;
  m.cfg = cfg;
  if (m.cfg.ffn == 0) m.cfg.ffn = 2 * cfg.d;
  Rng rng(substream(seed, "init"));

  const int d = cfg.d, dv = cfg.d_v, da = cfg.d_a, ffn = m.cfg.ffn;
  auto lin = [&](int fan_in, int fan_out, const std::string& name) {
    Tensor<S> t(Shape{fan_in, fan_out});
    init_uniform(t, rng, std::sqrt(1.0 / fan_in));
    return m.reg(std::move(t), name);
  };
  auto zeros = [&](const Shape& sh, const std::string& name) {
    return m.reg(Tensor<S>::zeros(sh), name);
  };
  auto ones = [&](const Shape& sh, const std::string& name) {
    return m.reg(Tensor<S>::full(sh, S(1)), name);
  };
  auto embedding = [&](const std::string& name) {
    Tensor<S> t(Shape{d});
    init_uniform(t, rng, std::sqrt(1.0 / d));
    return m.reg(std::move(t), name);
  };

  m.proj_r_w = lin(dv, d, "proj_r.w");
  m.proj_r_b = zeros(Shape{d}, "proj_r.b");
  m.proj_a_w = lin(da, d, "proj_a.w");
  m.proj_a_b = zeros(Shape{d}, "proj_a.b");
  m.proj_v_w = lin(dv, d, "proj_v.w");
  m.proj_v_b = zeros(Shape{d}, "proj_v.b");
  m.type_r = embedding("type.r");
  m.type_a = embedding("type.a");
  m.type_v = embedding("type.v");
  m.pos_table = sinusoidal_pe<S>(cfg.T + 1, d);

  for (int l = 0; l < cfg.layers; ++l) {
    const std::string p = "enc" + std::to_string(l) + ".";
    EncoderLayer<S> L;
    L.ln1_g = ones(Shape{d}, p + "ln1.g");
    L.ln1_b = zeros(Shape{d}, p + "ln1.b");
    L.wq = lin(d, d, p + "attn.wq");
    L.bq = zeros(Shape{d}, p + "attn.bq");
    L.wk = lin(d, d, p + "attn.wk");
    L.bk = zeros(Shape{d}, p + "attn.bk");
    L.wv = lin(d, d, p + "attn.wv");
    L.bv = zeros(Shape{d}, p + "attn.bv");
    L.wo = lin(d, d, p + "attn.wo");
    L.bo = zeros(Shape{d}, p + "attn.bo");
    L.ln2_g = ones(Shape{d}, p + "ln2.g");
    L.ln2_b = zeros(Shape{d}, p + "ln2.b");
    L.w1 = lin(d, ffn, p + "ffn.w1");
    L.b1 = zeros(Shape{ffn}, p + "ffn.b1");
    L.w2 = lin(ffn, d, p + "ffn.w2");
    L.b2 = zeros(Shape{d}, p + "ffn.b2");
    m.enc.push_back(std::move(L));
  }
  m.final_ln_g = ones(Shape{d}, "final_ln.g");
  m.final_ln_b = zeros(Shape{d}, "final_ln.b");
  m.head_w = lin(d, dv, "head.w");

  m.ta_w1 = lin(da, d, "tok_a.l1.w");
  m.ta_b1 = zeros(Shape{d}, "tok_a.l1.b");
  m.ta_w2 = lin(d, d, "tok_a.l2.w");
  m.ta_b2 = zeros(Shape{d}, "tok_a.l2.b");

  {
    Tensor<S> c1(Shape{3, dv, d});
    init_uniform(c1, rng, std::sqrt(1.0 / (3.0 * dv)));
    m.tv_w1 = m.reg(std::move(c1), "tok_v.c1.w");
    m.tv_b1 = zeros(Shape{d}, "tok_v.c1.b");
    Tensor<S> c2(Shape{3, d, d});
    init_uniform(c2, rng, std::sqrt(1.0 / (3.0 * d)));
    m.tv_w2 = m.reg(std::move(c2), "tok_v.c2.w");
    m.tv_b2 = zeros(Shape{d}, "tok_v.c2.b");
  }
  return m;
}

// ---- loss terms ---------------------------------------------------------

// Reconstruction over both directions. "mse" averages squared error over
// frames and components per direction; "l2_sum" sums per-frame Euclidean
// norms instead.
template <class S>
ad::Var<S> recon_loss(const ad::Var<S>& pred_fwd, const Tensor<S>& target_fwd,
                      const ad::Var<S>& pred_rev, const Tensor<S>& target_rev,
                      const std::string& recon_norm) {
  auto tf = ad::make_const(target_fwd);
  auto tr = ad::make_const(target_rev);
  if (recon_norm == "l2_sum")
    return ad::add(ad::l2_rows_sum(ad::sub(pred_fwd, tf)), ad::l2_rows_sum(ad::sub(pred_rev, tr)));
  return ad::add(ad::mse(pred_fwd, tf), ad::mse(pred_rev, tr));
}

// Mean over frames of (1 + cosine(pred_fwd_t, pred_rev_t)); zero when the two
// directions are exactly opposite.
template <class S>
ad::Var<S> dir_loss(const ad::Var<S>& pred_fwd, const ad::Var<S>& pred_rev) {
  return ad::affine(ad::mean_all(ad::cosine_rows(pred_fwd, pred_rev)), S(1), S(1));
}

// Bidirectional token contrastive loss from B paired tokens.
template <class S>
ad::Var<S> cnt_loss(const ad::Var<S>& visual_tokens, const ad::Var<S>& audio_tokens, S tau,
                    bool batch_mean) {
  if (!(tau > S(0))) throw config_error("cnt_loss: temperature must be > 0");
  return ad::info_nce(ad::cosine_matrix(visual_tokens, audio_tokens), tau, batch_mean);
}

template <class S>
ad::Var<S> total_loss(const ad::Var<S>& recon, const ad::Var<S>& cnt, const ad::Var<S>& dir,
                      double lambda_cnt, double lambda_dir) {
  if (lambda_cnt < 0 || lambda_dir < 0) throw config_error("loss weights must be >= 0");
  auto out = recon;
  if (cnt) out = ad::add(out, ad::affine(cnt, (S)lambda_cnt, S(0)));
  if (dir) out = ad::add(out, ad::affine(dir, (S)lambda_dir, S(0)));
  return out;
}

// Frame-wise edit: edited clip = input clip + predicted semantic vectors.
template <class S>
Tensor<S> apply_edit(const Tensor<S>& clip, const Tensor<S>& predicted_sv) {
  check_same_shape(clip, predicted_sv, "apply_edit");
  Tensor<S> out(clip.shape);
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] = clip.data[i] + predicted_sv.data[i];
  return out;
}

}  // namespace cmet
