#pragma once

#include <chrono>
#include <cmath>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "cmet/config.hpp"
#include "cmet/datamodel.hpp"
#include "cmet/io.hpp"
#include "cmet/model.hpp"

namespace cmet {

// One sampled training instance. The reverse direction swaps input and
// target emotion; because it is built from the same sampled embeddings its
// reference / audio semantic vector / target are exact negations of the
// forward ones, so only the forward copies are stored.
struct Instance {
  int identity = 0, emo_in = 0, emo_tgt = 0;
  bool zero_ref = false;            // sequence-start instance: all-zero reference
  std::vector<double> ref;          // (T+1) x d_v; slot 0 is always the zero boundary slot
  std::vector<double> asv;          // d_a
  std::vector<double> clip_in;      // T x d_v, input-emotion clip
  std::vector<double> clip_tgt;     // T x d_v, target-emotion clip (reverse input + token source)
  std::vector<double> target;       // T x d_v forward target semantic vectors
  std::vector<double> cnt_audio;    // d_a, target-emotion utterance embedding (token source)
};

struct MetricRow {
  long long step = 0;
  double recon = 0, cnt = 0, dir = 0, total = 0, seconds = 0;
};

// Precomputed sample indices the sampler draws from.
struct SamplerIndex {
  std::vector<int> eligible;                    // emotion indices allowed in training
  std::vector<std::vector<int>> audio_by_emotion;  // per emotion: sample indices, any identity

  static SamplerIndex build(const EmbeddingDataset& ds, const std::vector<std::string>& held_out) {
    SamplerIndex ix;
    std::set<int> held;
    for (const auto& name : held_out) held.insert(ds.emotion_index(name));
    for (int e = 0; e < (int)ds.emotions.size(); ++e)
      if (!held.count(e)) ix.eligible.push_back(e);
    ix.audio_by_emotion.resize(ds.emotions.size());
    for (size_t i = 0; i < ds.samples.size(); ++i)
      ix.audio_by_emotion[ds.samples[i].emotion].push_back((int)i);
    return ix;
  }
};

inline std::string group_label(const EmbeddingDataset& ds, int identity, int emotion) {
  return "(" + ds.identities[identity] + ", " + ds.emotions[emotion] + ")";
}

// Draws one instance: identity p, ordered emotion pair i != j from the
// eligible set; audio semantic vector k-shot-averaged across identities,
// visual ones within identity p. The reference window is either all zeros
// (sequence start) or an independently drawn semantic vector for the same
// transfer, standing in for the previous window under teacher forcing.
inline Instance sample_instance(const EmbeddingDataset& ds, const SamplerIndex& ix, Rng& rng,
                                int k, double zero_ref_prob) {
  if (ix.eligible.size() < 2) throw sampling_error("need at least 2 eligible emotions to sample a pair");
  const int T = ds.T, dv = ds.d_v;

  Instance inst;
  inst.identity = (int)rng.uniform_int((uint64_t)ds.identities.size());
  inst.emo_in = ix.eligible[rng.uniform_int((uint64_t)ix.eligible.size())];
  do {
    inst.emo_tgt = ix.eligible[rng.uniform_int((uint64_t)ix.eligible.size())];
  } while (inst.emo_tgt == inst.emo_in);

  // audio: any identity ("regardless of speaker identity")
  std::vector<EmbeddingView> a_in, a_tgt;
  for (int si : ix.audio_by_emotion[inst.emo_in]) a_in.push_back(audio_view(ds.samples[si], ds.d_a));
  for (int si : ix.audio_by_emotion[inst.emo_tgt]) a_tgt.push_back(audio_view(ds.samples[si], ds.d_a));
  std::vector<std::pair<int, int>> a_pairs;
  inst.asv = k_shot_semantic_vector(a_in, a_tgt, k, rng,
                                    "audio emotion '" + ds.emotions[inst.emo_tgt] + "'", &a_pairs)
                 .data;
  {
    const Sample& s = ds.samples[ix.audio_by_emotion[inst.emo_tgt][a_pairs[0].second]];
    inst.cnt_audio.assign(s.audio.begin(), s.audio.end());
  }

  // visual: within identity p
  const auto& g_in = ds.group(inst.identity, inst.emo_in);
  const auto& g_tgt = ds.group(inst.identity, inst.emo_tgt);
  std::vector<EmbeddingView> v_in, v_tgt;
  for (int si : g_in) v_in.push_back(clip_view(ds.samples[si], T, dv));
  for (int si : g_tgt) v_tgt.push_back(clip_view(ds.samples[si], T, dv));
  std::vector<std::pair<int, int>> v_pairs;
  inst.target = k_shot_semantic_vector(v_in, v_tgt, k, rng,
                                       group_label(ds, inst.identity, inst.emo_tgt), &v_pairs)
                    .data;
  {
    const Sample& sin = ds.samples[g_in[v_pairs[0].first]];
    const Sample& stg = ds.samples[g_tgt[v_pairs[0].second]];
    inst.clip_in.assign(sin.clip.begin(), sin.clip.end());
    inst.clip_tgt.assign(stg.clip.begin(), stg.clip.end());
  }

  inst.ref.assign((size_t)(T + 1) * dv, 0.0);
  inst.zero_ref = rng.uniform() < zero_ref_prob;
  if (!inst.zero_ref) {
    // previous-window semantic vectors (ground truth, fresh draw) in slots 1..T
    auto prev = k_shot_semantic_vector(v_in, v_tgt, k, rng,
                                       group_label(ds, inst.identity, inst.emo_tgt));
    std::copy(prev.data.begin(), prev.data.end(), inst.ref.begin() + dv);
  }
  return inst;
}

// Batch with distinct (identity, target emotion) combinations when the
// dataset offers enough of them; falls back silently otherwise.
inline std::vector<Instance> make_batch(const EmbeddingDataset& ds, const SamplerIndex& ix,
                                        Rng& rng, int batch, int k, double zero_ref_prob) {
  std::vector<Instance> out;
  std::set<std::pair<int, int>> used;
  const long long combos = (long long)ds.identities.size() * (long long)ix.eligible.size();
  for (int b = 0; b < batch; ++b) {
    Instance inst = sample_instance(ds, ix, rng, k, zero_ref_prob);
    int tries = 0;
    while ((long long)used.size() < combos && used.count({inst.identity, inst.emo_tgt}) &&
           tries++ < 64)
      inst = sample_instance(ds, ix, rng, k, zero_ref_prob);
    used.insert({inst.identity, inst.emo_tgt});
    out.push_back(std::move(inst));
  }
  return out;
}

template <class S>
Tensor<S> to_tensor(const std::vector<double>& v, const Shape& shape, double scale = 1.0) {
  Tensor<S> t(shape);
  if (t.numel() != v.size()) throw shape_error("to_tensor: size mismatch");
  for (size_t i = 0; i < v.size(); ++i) t.data[i] = (S)(v[i] * scale);
  return t;
}

template <class S>
struct BatchLoss {
  ad::Var<S> total;
  double recon = 0, cnt = 0, dir = 0;
  std::vector<ad::Var<S>> preds_fwd, preds_rev;  // per instance, T x d_v
};

// Forward pass over a batch: both transfer directions per instance, batch
// means for the reconstruction and direction terms, contrastive term summed
// over the batch (one token pair per instance, built from the target-emotion
// embeddings unless configured to use the semantic vectors themselves).
template <class S>
BatchLoss<S> batch_loss(CMetModel<S>& model, const std::vector<Instance>& batch) {
  const auto& cfg = model.cfg;
  const int T = cfg.T, dv = cfg.d_v, da = cfg.d_a;
  const int B = (int)batch.size();
  if (B < 1) throw usage_error("batch_loss: empty batch");

  BatchLoss<S> out;
  ad::Var<S> recon_sum, dir_sum;
  std::vector<ad::Var<S>> vis_toks, aud_toks;
  const bool want_cnt = cfg.lambda_cnt > 0;
  const bool want_dir = cfg.lambda_dir > 0;

  for (const auto& inst : batch) {
    auto ref_f = to_tensor<S>(inst.ref, Shape{T + 1, dv});
    auto ref_r = to_tensor<S>(inst.ref, Shape{T + 1, dv}, -1.0);
    auto asv_f = to_tensor<S>(inst.asv, Shape{da});
    auto asv_r = to_tensor<S>(inst.asv, Shape{da}, -1.0);
    auto clip_f = to_tensor<S>(inst.clip_in, Shape{T, dv});
    auto clip_r = to_tensor<S>(inst.clip_tgt, Shape{T, dv});
    auto tgt_f = to_tensor<S>(inst.target, Shape{T, dv});
    auto tgt_r = to_tensor<S>(inst.target, Shape{T, dv}, -1.0);

    auto pf = model.predict_sv(ref_f, asv_f, clip_f);
    auto pr = model.predict_sv(ref_r, asv_r, clip_r);
    out.preds_fwd.push_back(pf);
    out.preds_rev.push_back(pr);

    auto rl = recon_loss(pf, tgt_f, pr, tgt_r, cfg.recon_norm);
    recon_sum = recon_sum ? ad::add(recon_sum, rl) : rl;
    if (want_dir) {
      auto dl = dir_loss(pf, pr);
      dir_sum = dir_sum ? ad::add(dir_sum, dl) : dl;
    }
    if (want_cnt) {
      if (cfg.cnt_tokens == "semantic_vector") {
        vis_toks.push_back(model.visual_token(ad::make_const(tgt_f)));
        aud_toks.push_back(model.audio_token(ad::make_const(to_tensor<S>(inst.asv, Shape{1, da}))));
      } else {
        vis_toks.push_back(model.visual_token(ad::make_const(clip_r)));
        aud_toks.push_back(
            model.audio_token(ad::make_const(to_tensor<S>(inst.cnt_audio, Shape{1, da}))));
      }
    }
  }

  auto recon_b = ad::affine(recon_sum, S(1) / (S)B, S(0));
  ad::Var<S> dir_b, cnt_l;
  if (want_dir) dir_b = ad::affine(dir_sum, S(1) / (S)B, S(0));
  if (want_cnt) {
    // stack rank-1 visual tokens / 1 x d audio tokens into B x d matrices
    auto V = ad::concat_rows(vis_toks);
    auto A = ad::concat_rows(aud_toks);
    cnt_l = cnt_loss(V, A, (S)cfg.tau, cfg.cnt_batch_mean);
  }
  out.total = total_loss(recon_b, cnt_l, dir_b, cfg.lambda_cnt, cfg.lambda_dir);
  out.recon = (double)ad::scalar_value(recon_b);
  out.cnt = want_cnt ? (double)ad::scalar_value(cnt_l) : 0.0;
  out.dir = want_dir ? (double)ad::scalar_value(dir_b) : 0.0;
  return out;
}

// ---- checkpointing ------------------------------------------------------

template <class S>
Checkpoint make_checkpoint(const CMetModel<S>& model, const AdamW<S>& opt, long long step,
                           const std::array<uint64_t, 4>& rng_state, const nlohmann::json& config) {
  Checkpoint ck;
  ck.precision = model.cfg.precision;
  ck.step = step;
  ck.adam_step = opt.step_count;
  ck.rng_state = rng_state;
  ck.config = config;
  for (const auto& p : model.params) ck.params.push_back(ck.append_blob(p->name, p->val));
  for (size_t i = 0; i < model.params.size(); ++i) {
    ck.adam_m.push_back(ck.append_blob(model.params[i]->name, opt.m[i]));
    ck.adam_v.push_back(ck.append_blob(model.params[i]->name, opt.v[i]));
  }
  return ck;
}

template <class S>
void restore_checkpoint(const Checkpoint& ck, CMetModel<S>& model, AdamW<S>& opt) {
  const std::string want = model.cfg.precision;
  if (ck.precision != want)
    throw restore_error("checkpoint precision '" + ck.precision + "' vs model '" + want + "'");
  if (ck.params.size() != model.params.size() || ck.adam_m.size() != model.params.size() ||
      ck.adam_v.size() != model.params.size())
    throw restore_error("checkpoint has " + std::to_string(ck.params.size()) + " parameters, model has " +
                        std::to_string(model.params.size()));
  std::string mismatches;
  for (size_t i = 0; i < model.params.size(); ++i) {
    if (ck.params[i].name != model.params[i]->name || ck.params[i].shape != model.params[i]->val.shape) {
      mismatches += (mismatches.empty() ? "" : ", ") + ck.params[i].name + " vs " + model.params[i]->name;
    }
  }
  if (!mismatches.empty()) throw restore_error("parameter mismatch against configured model: " + mismatches);
  if (opt.m.size() != model.params.size()) opt.init(model.params);
  for (size_t i = 0; i < model.params.size(); ++i) {
    model.params[i]->val = ck.fetch<S>(ck.params[i]);
    opt.m[i] = ck.fetch<S>(ck.adam_m[i]);
    opt.v[i] = ck.fetch<S>(ck.adam_v[i]);
  }
  opt.step_count = ck.adam_step;
}

// ---- training loop ------------------------------------------------------

template <class S>
struct TrainResult {
  CMetModel<S> model;
  AdamW<S> opt;
  std::vector<MetricRow> metrics;
  std::map<std::pair<int, int>, long long> pair_counts;  // (input, target) emotion audit
  std::array<uint64_t, 4> rng_state{};
  long long final_step = 0;
};

// Resolves model dims against the dataset; explicit non-zero config values
// must agree with the file.
inline void resolve_dims(ModelCfg& m, const EmbeddingDataset& ds) {
  auto fit = [](int& field, int actual, const char* name) {
    if (field == 0)
      field = actual;
    else if (field != actual)
      throw config_error(std::string("model.") + name + "=" + std::to_string(field) +
                         " disagrees with dataset (" + std::to_string(actual) + ")");
  };
  fit(m.d_a, ds.d_a, "d_a");
  fit(m.d_v, ds.d_v, "d_v");
  fit(m.T, ds.T, "T");
}

template <class S>
TrainResult<S> train(const EmbeddingDataset& ds, const RunCfg& cfg, const std::string& ckpt_dir,
                     const std::string& final_ckpt, const Checkpoint* resume = nullptr) {
  ModelCfg mc = cfg.model;
  resolve_dims(mc, ds);

  TrainResult<S> res{build_model<S>(mc, cfg.seed), {}, {}, {}, {}, 0};
  res.opt.lr = cfg.train.lr;
  res.opt.weight_decay = cfg.train.weight_decay;
  res.opt.init(res.model.params);

  Rng sampler(substream(cfg.seed, "sampler"));
  res.model.dropout_rng = &sampler;  // dropout shares the sampler stream (state is checkpointed)

  long long start_step = 0;
  if (resume) {
    restore_checkpoint(*resume, res.model, res.opt);
    sampler.set_state(resume->rng_state);
    start_step = resume->step;
  }

  const SamplerIndex ix = SamplerIndex::build(ds, cfg.train.held_out);
  nlohmann::json cfg_echo = to_json(cfg);
  cfg_echo.erase("out_dir");  // environment detail; keeps checkpoints byte-equal across output dirs
  auto save = [&](long long step, const std::string& path) {
    write_checkpoint(make_checkpoint(res.model, res.opt, step, sampler.state(), cfg_echo), path);
  };

  const auto t0 = std::chrono::steady_clock::now();
  for (long long step = start_step + 1; step <= cfg.train.steps; ++step) {
    auto batch = make_batch(ds, ix, sampler, cfg.train.batch, cfg.train.k, cfg.train.zero_ref_prob);
    for (const auto& inst : batch) ++res.pair_counts[{inst.emo_in, inst.emo_tgt}];

    zero_grads(res.model.params);
    auto bl = batch_loss(res.model, batch);
    const double total = (double)ad::scalar_value(bl.total);
    if (!std::isfinite(total)) {
      const auto& inst = batch[0];
      throw training_error("non-finite loss at step " + std::to_string(step) + " (batch head: " +
                           group_label(ds, inst.identity, inst.emo_in) + " -> " +
                           ds.emotions[inst.emo_tgt] + ")");
    }
    ad::backward(bl.total);
    clip_gradients(res.model.params, cfg.train.clip_norm);
    res.opt.step(res.model.params);

    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    res.metrics.push_back({step, bl.recon, bl.cnt, bl.dir, total, secs});

    if (cfg.train.ckpt_every > 0 && step % cfg.train.ckpt_every == 0 && step < cfg.train.steps &&
        !ckpt_dir.empty())
      save(step, (std::filesystem::path(ckpt_dir) / ("ckpt_step" + std::to_string(step) + ".cmck")).string());
    res.final_step = step;
  }
  if (cfg.train.steps <= start_step) res.final_step = start_step;

  res.rng_state = sampler.state();
  res.model.dropout_rng = nullptr;
  if (!final_ckpt.empty()) save(res.final_step, final_ckpt);
  return res;
}

}  // namespace cmet
