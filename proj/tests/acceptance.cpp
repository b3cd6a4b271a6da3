// End-to-end acceptance gate. Each criterion prints exactly one
// [PASS]/[FAIL] line with its measured numbers; the exit code is the number
// of failed criteria. Progress notes go to stderr so the verdict lines stay
// machine-parsable. Expect a few minutes of wall time: criterion 3 trains
// the reference model and 4-6 train five seeds of three ablation variants.

#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "cmet/eval.hpp"
#include "cmet/gradcheck.hpp"
#include "cmet/io.hpp"
#include "cmet/report.hpp"
#include "cmet/synth.hpp"
#include "cmet/trainer.hpp"

using namespace cmet;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

std::string fmt(const char* f, ...) {
  char buf[768];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

void verdict(int n, bool pass, const std::string& text) {
  std::printf("[%s] criterion %d: %s\n", pass ? "PASS" : "FAIL", n, text.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

void note(const std::string& text) {
  std::fprintf(stderr, "  .. %s\n", text.c_str());
  std::fflush(stderr);
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

fs::path scratch() {
  auto dir = fs::temp_directory_path() / "cmet_acceptance";
  fs::create_directories(dir);
  return dir;
}

// ---- shared evaluation helpers --------------------------------------------

struct PairScores {
  double acc = 0, cos = 0;
};

// Probe accuracy and mean oracle cosine over (input emotion -> target) pairs,
// `clips` clips per (identity, target) (0 = all), k = 10.
PairScores eval_pairs(CMetModel<float>& model, const EmbeddingDataset& ds, const OracleWorld& world,
                      const std::vector<int>& inputs, const std::vector<int>& targets_for,
                      uint64_t salt, int clips, int draws = 1) {
  const auto probe = fit_probe(ds);
  long long correct = 0, total = 0, pairs = 0;
  double cos = 0;
  for (int ein : inputs) {
    std::vector<int> targets;
    if (targets_for.empty()) {
      for (int e = 0; e < (int)ds.emotions.size(); ++e)
        if (e != ein) targets.push_back(e);
    } else {
      targets = targets_for;
    }
    for (int d = 0; d < draws; ++d) {  // several k-shot draws stabilise small evals
      Rng rng(derive_seed(salt, (uint64_t)ein, (uint64_t)d, 0));
      auto o = emotion_accuracy(model, ds, probe, ein, targets, 10, rng, clips, &world);
      correct += o.correct;
      total += o.total;
      cos += o.mean_cosine * (double)o.cosine_pairs;
      pairs += o.cosine_pairs;
    }
  }
  return {(double)correct / (double)total, cos / (double)pairs};
}

// ---- reference model (criteria 3, 7, 8) -----------------------------------

struct ReferenceRun {
  RunCfg cfg;
  OracleWorld world;
  EmbeddingDataset ds;
  TrainResult<float> res;
  double train_seconds = 0;
};

ReferenceRun train_reference() {
  ReferenceRun r;
  r.cfg.seed = 1;  // default world: E=6, P=8, d_a=32, d_v=16, T=5, sigma=0.05
  r.cfg.model.d = 64;
  r.cfg.model.layers = 2;
  r.cfg.model.heads = 4;
  r.cfg.model.ffn = 128;
  r.cfg.train.steps = 3000;
  r.cfg.train.batch = 16;
  r.cfg.train.k = 10;
  r.cfg.train.lr = 1e-3;
  r.cfg.train.ckpt_every = 0;
  // Teacher-forced references always agree with the target, so a model
  // trained at the default zero-reference rate leans on the carried
  // reference and re-anchors slowly after a segment switch. Training with
  // more zero-reference instances makes the audio pathway dominant.
  r.cfg.train.zero_ref_prob = 0.75;
  finalize(r.cfg);
  r.world = gen_world(r.cfg.world, r.cfg.seed);
  r.ds = gen_dataset(r.world);
  note("training the reference model (3000 steps, d=64, 2 layers)...");
  const auto t0 = std::chrono::steady_clock::now();
  r.res = train<float>(r.ds, r.cfg, "", "");
  r.train_seconds = seconds_since(t0);
  note(fmt("reference model trained in %.0fs, final recon %.4g", r.train_seconds,
           r.res.metrics.back().recon));
  return r;
}

// ---- ablation runs (criteria 4, 5, 6) --------------------------------------

struct AblationSeed {
  OracleWorld world;
  EmbeddingDataset ds;
  TrainResult<float> full, nodir, nocnt;  // full: default lambdas; others zero one term
};

RunCfg ablation_cfg(uint64_t seed) {
  RunCfg c;
  c.seed = seed;
  c.world.identities = 4;  // smaller than default so 15 runs stay fast
  c.model.d = 32;
  c.model.layers = 1;
  c.model.heads = 2;
  c.model.ffn = 64;
  c.train.steps = 1200;
  c.train.batch = 16;
  c.train.k = 10;
  c.train.lr = 2e-3;
  c.train.ckpt_every = 0;
  c.train.held_out = {"emo3"};
  finalize(c);
  return c;
}

std::vector<AblationSeed> train_ablations() {
  std::vector<AblationSeed> out;
  for (uint64_t seed = 1; seed <= 5; ++seed) {
    note(fmt("ablation seed %llu: full / no-direction / no-contrastive...",
             (unsigned long long)seed));
    RunCfg base = ablation_cfg(seed);
    AblationSeed a;
    a.world = gen_world(base.world, seed);
    a.ds = gen_dataset(a.world);
    a.full = train<float>(a.ds, base, "", "");
    RunCfg nd = base;
    nd.model.lambda_dir = 0;
    a.nodir = train<float>(a.ds, nd, "", "");
    RunCfg nc = base;
    nc.model.lambda_cnt = 0;
    a.nocnt = train<float>(a.ds, nc, "", "");
    out.push_back(std::move(a));
  }
  return out;
}

// held-out transfer quality: every non-held input emotion toward the held
// one, all clips, three independent k-shot draws
PairScores eval_heldout(CMetModel<float>& model, const AblationSeed& a, int held) {
  std::vector<int> inputs;
  for (int e = 0; e < (int)a.ds.emotions.size(); ++e)
    if (e != held) inputs.push_back(e);
  return eval_pairs(model, a.ds, a.world, inputs, {held}, 4242, 0, 3);
}

// mean over a fixed batch (instances x frames) of cosine(forward, reverse)
double fwdrev_cosine(CMetModel<float>& model, const AblationSeed& a) {
  auto ix = SamplerIndex::build(a.ds, {"emo3"});
  Rng rng(20260814);
  auto batch = make_batch(a.ds, ix, rng, 16, 10, 0.5);
  auto bl = batch_loss(model, batch);
  const int T = model.cfg.T, dv = model.cfg.d_v;
  double acc = 0;
  long long n = 0;
  for (size_t b = 0; b < batch.size(); ++b) {
    const auto& pf = bl.preds_fwd[b]->val;
    const auto& pr = bl.preds_rev[b]->val;
    for (int t = 0; t < T; ++t) {
      double dot = 0, na = 0, nb = 0;
      for (int c = 0; c < dv; ++c) {
        const double x = pf.data[(size_t)t * dv + c], y = pr.data[(size_t)t * dv + c];
        dot += x * y;
        na += x * x;
        nb += y * y;
      }
      acc += dot / (std::sqrt(na * nb) + 1e-12);
      ++n;
    }
  }
  return acc / (double)n;
}

// positive-pair minus mean negative-pair cosine of the contrastive tokens on
// a batch never used in training
double token_separation(CMetModel<float>& model, const AblationSeed& a) {
  auto ix = SamplerIndex::build(a.ds, {"emo3"});
  Rng rng(777);
  auto batch = make_batch(a.ds, ix, rng, 16, 10, 0.5);
  const int T = model.cfg.T, dv = model.cfg.d_v, da = model.cfg.d_a;
  std::vector<std::vector<double>> V, A;
  for (const auto& inst : batch) {
    auto v = model.visual_token(ad::make_const(to_tensor<float>(inst.clip_tgt, Shape{T, dv})));
    auto u = model.audio_token(ad::make_const(to_tensor<float>(inst.cnt_audio, Shape{1, da})));
    V.emplace_back(v->val.data.begin(), v->val.data.end());
    A.emplace_back(u->val.data.begin(), u->val.data.end());
  }
  auto cosv = [](const std::vector<double>& x, const std::vector<double>& y) {
    double dot = 0, nx = 0, ny = 0;
    for (size_t i = 0; i < x.size(); ++i) {
      dot += x[i] * y[i];
      nx += x[i] * x[i];
      ny += y[i] * y[i];
    }
    return dot / (std::sqrt(nx * ny) + 1e-12);
  };
  double pos = 0, neg = 0;
  long long np = 0, nn = 0;
  for (size_t i = 0; i < V.size(); ++i)
    for (size_t j = 0; j < A.size(); ++j) {
      (i == j ? pos : neg) += cosv(V[i], A[j]);
      ++(i == j ? np : nn);
    }
  return pos / (double)np - neg / (double)nn;
}

// ---- criteria ---------------------------------------------------------------

void criterion1() {
  const auto rep = run_gradcheck(20, 1, 1e-5, 1e-4);
  const bool pass = rep.pass && rep.seconds < 60.0;
  verdict(1, pass,
          fmt("gradient fidelity: max rel err %.2e over %d seeds (tol 1e-4), %.1fs (budget 60s)",
              rep.max_rel_err, rep.seeds, rep.seconds));
}

void criterion2() {
  using T = Tensor<double>;
  bool ok = true;
  std::string why;

  T one(Shape{1, 4});
  one.data = {0.3, -0.7, 0.2, 0.9};
  const double c_b1 = ad::scalar_value(cnt_loss(ad::make_const(one), ad::make_const(one), 0.07, false));
  if (c_b1 != 0.0) ok = false, why += " cnt(B=1)!=0";

  T two(Shape{2, 3});
  two.data = {0.5, 0.5, 0.5, 0.5, 0.5, 0.5};
  const double c_b2 = ad::scalar_value(cnt_loss(ad::make_const(two), ad::make_const(two), 0.07, false));
  if (std::fabs(c_b2 - 2.0 * std::log(2.0)) > 1e-6) ok = false, why += " cnt(uniform)!=2ln2";

  T p(Shape{2, 3});
  p.data = {1, 0, 0, 0, 2, 0};
  T orth(Shape{2, 3});
  orth.data = {0, 1, 0, 0, 0, 3};
  T anti = p;
  for (auto& v : anti.data) v = -v;
  const double d_par = ad::scalar_value(dir_loss(ad::make_const(p), ad::make_const(p)));
  const double d_orth = ad::scalar_value(dir_loss(ad::make_const(p), ad::make_const(orth)));
  const double d_anti = ad::scalar_value(dir_loss(ad::make_const(p), ad::make_const(anti)));
  if (std::fabs(d_par - 2.0) > 1e-6) ok = false, why += " dir(parallel)!=2";
  if (std::fabs(d_orth - 1.0) > 1e-6) ok = false, why += " dir(orthogonal)!=1";
  if (std::fabs(d_anti) > 1e-6) ok = false, why += " dir(antiparallel)!=0";

  const double r0 =
      ad::scalar_value(recon_loss(ad::make_const(p), p, ad::make_const(anti), anti, "mse"));
  if (r0 != 0.0) ok = false, why += " recon(perfect)!=0";

  auto rvar = recon_loss(ad::make_const(p), orth, ad::make_const(anti), p, "mse");
  ad::Var<double> none;
  const double tot = ad::scalar_value(total_loss(rvar, none, none, 0.0, 0.0));
  if (tot != ad::scalar_value(rvar)) ok = false, why += " total(0,0)!=recon";

  verdict(2, ok,
          ok ? fmt("loss identities: cnt(B=1)=%.1g, cnt(uniform B=2)=%.8f=2ln2, dir={%.1e,%.6f,%.6f}, "
                   "recon(perfect)=%.1g, total at zero lambdas = recon",
                   c_b1, c_b2, d_anti, d_orth, d_par, r0)
             : "loss identities:" + why);
}

void criterion3(ReferenceRun& ref) {
  std::vector<int> all;
  for (int e = 0; e < 6; ++e) all.push_back(e);
  const auto trained = eval_pairs(ref.res.model, ref.ds, ref.world, all, {}, 99, 2);

  ModelCfg mc = ref.cfg.model;
  resolve_dims(mc, ref.ds);
  auto raw = build_model<float>(mc, 4711);
  const auto baseline = eval_pairs(raw, ref.ds, ref.world, all, {}, 99, 2);

  const bool pass = trained.cos >= 0.90 && trained.acc >= 0.90 && baseline.acc <= 0.25 &&
                    ref.train_seconds <= 300.0;
  verdict(3, pass,
          fmt("seen-pair oracle recovery: mean cosine %.3f (>=0.90), probe accuracy %.3f (>=0.90), "
              "untrained baseline %.3f (<=0.25), trained in %.0fs (<=300s)",
              trained.cos, trained.acc, baseline.acc, ref.train_seconds));
}

void criterion4(std::vector<AblationSeed>& abl) {
  const int held = 3;
  double acc = 0, cos = 0;
  for (int s = 0; s < 3; ++s) {
    const auto r = eval_heldout(abl[s].full.model, abl[s], held);
    acc += r.acc / 3.0;
    cos += r.cos / 3.0;
  }
  const bool pass = cos >= 0.70 && acc >= 2.0 / 6.0;
  verdict(4, pass,
          fmt("held-out emotion transfer: mean cosine %.3f (>=0.70), probe accuracy %.3f "
              "(>=0.333 = 2x chance), 3 seeds",
              cos, acc));
}

void criterion5(std::vector<AblationSeed>& abl) {
  std::vector<double> cos_on, cos_off, acc_on, acc_off;
  for (auto& a : abl) {
    cos_on.push_back(fwdrev_cosine(a.full.model, a));
    cos_off.push_back(fwdrev_cosine(a.nodir.model, a));
    acc_on.push_back(eval_heldout(a.full.model, a, 3).acc);
    acc_off.push_back(eval_heldout(a.nodir.model, a, 3).acc);
  }
  const double m_on = median(cos_on), m_off = median(cos_off);
  const double a_on = median(acc_on), a_off = median(acc_off);
  const bool pass = m_on < m_off && a_on >= a_off;
  verdict(5, pass,
          fmt("direction-loss ablation: fwd/rev cosine %.3f with vs %.3f without (more negative "
              "with), held-out accuracy %.3f vs %.3f (not lower), 5-seed medians",
              m_on, m_off, a_on, a_off));
}

void criterion6(std::vector<AblationSeed>& abl) {
  std::vector<double> sep_on, sep_off;
  for (auto& a : abl) {
    sep_on.push_back(token_separation(a.full.model, a));
    sep_off.push_back(token_separation(a.nocnt.model, a));
  }
  const double m_on = median(sep_on), m_off = median(sep_off);
  const bool pass = m_on > m_off;
  verdict(6, pass,
          fmt("contrastive-loss ablation: token separation %.3f with vs %.3f without "
              "(positive-pair minus mean negative-pair cosine, 5-seed medians)",
              m_on, m_off));
}

void criterion7(ReferenceRun& ref) {
  const auto probe = fit_probe(ref.ds);
  const auto rows = kshot_sweep(ref.res.model, ref.ds, probe, 0, {1, 2, 3, 4, 5}, {1, 2, 5, 10}, 5,
                                313, 2, &ref.world);
  bool mono = rows.size() == 4;
  for (size_t i = 0; mono && i + 1 < rows.size(); ++i)
    if (rows[i + 1].accuracy < rows[i].accuracy) mono = false;

  // 1/k variance scaling on pure-noise audio: offsets plus i.i.d. noise only
  WorldCfg nc;
  nc.emotions = 2;
  nc.identities = 1;
  nc.d_a = 16;
  nc.d_v = 8;
  nc.T = 2;
  nc.emotion_dim = 4;
  nc.sigma_a = 0.2;
  nc.sigma_v = 0.2;
  nc.content_identity_scale = 0;
  nc.content_utterance_scale = 0;
  nc.samples_per_pair = 60;
  auto w = gen_world(nc, 2026);
  auto d = gen_dataset(w);
  std::vector<EmbeddingView> ins, tgs;
  for (const auto& s : d.samples)
    (s.emotion == 0 ? ins : tgs).push_back(audio_view(s, d.d_a));
  std::vector<double> truth(d.d_a);
  for (int c = 0; c < d.d_a; ++c) truth[c] = w.offset(1)[c] - w.offset(0)[c];
  auto mse_of = [&](int k) {
    double s = 0;
    for (int t = 0; t < 500; ++t) {
      Rng r(derive_seed(505, (uint64_t)k, (uint64_t)t, 0));
      auto sv = k_shot_semantic_vector(ins, tgs, k, r);
      for (int c = 0; c < d.d_a; ++c) s += (sv.data[c] - truth[c]) * (sv.data[c] - truth[c]);
    }
    return s / 500.0;
  };
  const double ratio = mse_of(1) / mse_of(10);
  const bool pass = mono && ratio >= 5.0 && ratio <= 20.0;
  verdict(7, pass,
          fmt("k-shot trend: median accuracy over k={1,2,5,10} = {%.3f, %.3f, %.3f, %.3f} "
              "(non-decreasing %s), k=1/k=10 error-variance ratio %.1f (in [5,20])",
              rows.size() == 4 ? rows[0].accuracy : -1, rows.size() == 4 ? rows[1].accuracy : -1,
              rows.size() == 4 ? rows[2].accuracy : -1, rows.size() == 4 ? rows[3].accuracy : -1,
              mono ? "yes" : "NO", ratio));
}

void criterion8(ReferenceRun& ref) {
  auto& ds = ref.ds;
  const int T = ds.T;
  const auto& g = ds.group(0, 0);
  std::vector<std::vector<double>> windows;
  for (int i = 0; i < 8; ++i)
    windows.emplace_back(ds.samples[g[i]].clip.begin(), ds.samples[g[i]].clip.end());

  std::vector<std::vector<EmbeddingView>> audio(ds.emotions.size());
  for (const auto& s : ds.samples) audio[s.emotion].push_back(audio_view(s, ds.d_a));
  Rng rng(substream(8, "eval"));
  auto to1 = k_shot_semantic_vector(audio[0], audio[1], 10, rng);
  auto to2 = k_shot_semantic_vector(audio[0], audio[2], 10, rng);

  auto res = infer_sequence(ref.res.model, windows, {{to1.data, 4}, {to2.data, 4}});
  auto rerun = infer_sequence(ref.res.model, windows, {{to1.data, 4}, {to2.data, 4}});

  bool ok = res.trace[0].zero_ref && res.trace[0].ref_norm == 0.0;
  for (int w = 1; w < 8; ++w) ok = ok && !res.trace[w].zero_ref;
  ok = ok && res.preds == rerun.preds;  // bit-identical rerun

  // The sign pattern must flip at the boundary (own oracle beats the other
  // from the segment's window 1 on) and settle above 0.9 by window 2 of each
  // segment -- window 0 of a segment still carries the previous segment's
  // predictions as reference.
  double worst_own = 1.0;
  for (int w = 0; w < 8; ++w) {
    const int in_seg = w < 4 ? w : w - 4;
    const int tgt = w < 4 ? 1 : 2, other = w < 4 ? 2 : 1;
    const double own = cosine_to_oracle(res.preds[w], ref.world, 0, tgt, T);
    const double cross = cosine_to_oracle(res.preds[w], ref.world, 0, other, T);
    note(fmt("window %d (segment %d): cosine to own oracle %.3f, to other %.3f", w,
             res.trace[w].segment, own, cross));
    if (in_seg >= 1) ok = ok && own > cross;
    if (in_seg >= 2) {
      worst_own = std::min(worst_own, own);
      ok = ok && own > 0.9;
    }
  }
  verdict(8, ok,
          fmt("autoregressive contract: window 0 zero-reference, rerun bit-identical, "
              "oracle-cosine pattern flips at the boundary, settled windows track their own "
              "oracle (worst %.3f > 0.9)",
              worst_own));
}

void criterion9() {
  auto dir = scratch();
  bool ok = true;
  std::string why;

  // tiny world + run shared by the round-trip checks
  RunCfg cfg;
  cfg.seed = 3;
  cfg.world.emotions = 3;
  cfg.world.identities = 2;
  cfg.world.d_a = 8;
  cfg.world.d_v = 5;
  cfg.world.T = 3;
  cfg.world.emotion_dim = 3;
  cfg.world.samples_per_pair = 4;
  cfg.model.d = 16;
  cfg.model.layers = 1;
  cfg.model.heads = 2;
  cfg.model.ffn = 32;
  cfg.train.steps = 10;
  cfg.train.batch = 4;
  cfg.train.k = 2;
  cfg.train.lr = 1e-3;
  cfg.train.ckpt_every = 0;
  finalize(cfg);
  auto ds = gen_dataset(gen_world(cfg.world, cfg.seed));

  write_dataset(ds, (dir / "a.cmed").string());
  auto rd = read_dataset((dir / "a.cmed").string());
  write_dataset(rd, (dir / "b.cmed").string());
  if (slurp(dir / "a.cmed") != slurp(dir / "b.cmed")) ok = false, why += " .cmed-roundtrip";
  for (size_t i = 0; i < ds.samples.size(); ++i)
    if (rd.samples[i].audio != ds.samples[i].audio || rd.samples[i].clip != ds.samples[i].clip) {
      ok = false;
      why += " .cmed-payload";
      break;
    }

  auto straight = train<float>(ds, cfg, "", (dir / "straight.cmck").string());
  auto ck = read_checkpoint((dir / "straight.cmck").string());
  write_checkpoint(ck, (dir / "rewrite.cmck").string());
  if (slurp(dir / "straight.cmck") != slurp(dir / "rewrite.cmck")) ok = false, why += " .cmck-roundtrip";
  {
    ModelCfg mc = cfg.model;
    resolve_dims(mc, ds);
    auto twin = build_model<float>(mc, 77);
    AdamW<float> opt;
    restore_checkpoint(ck, twin, opt);
    for (size_t i = 0; i < twin.params.size(); ++i)
      if (twin.params[i]->val.data != straight.model.params[i]->val.data) {
        ok = false;
        why += " .cmck-restore";
        break;
      }
  }

  RunCfg half = cfg;
  half.train.steps = 5;
  train<float>(ds, half, "", (dir / "mid.cmck").string());
  auto mid = read_checkpoint((dir / "mid.cmck").string());
  train<float>(ds, cfg, "", (dir / "resumed.cmck").string(), &mid);
  if (slurp(dir / "straight.cmck") != slurp(dir / "resumed.cmck")) ok = false, why += " resume";

  std::vector<long long> conf = {5, 1, 0, 0, 6, 0, 2, 0, 4};
  std::vector<KshotRow> krows = {{1, 0.5, 0.4}, {2, 0.6, 0.5}, {5, 0.8, 0.7}, {10, 0.9, 0.8}};
  emit_report((dir / "r1").string(), straight.metrics, ds.emotions, &conf, &krows);
  emit_report((dir / "r2").string(), straight.metrics, ds.emotions, &conf, &krows);
  for (const char* f : {"metrics.csv", "metrics.svg", "confusion.csv", "confusion.svg",
                        "kshot.csv", "kshot.svg"})
    if (slurp(dir / "r1" / f) != slurp(dir / "r2" / f)) {
      ok = false;
      why += fmt(" report(%s)", f);
      break;
    }

  verdict(9, ok,
          ok ? "formats: .cmed/.cmck round trips bit-exact, restore exact, stop/resume "
               "checkpoint-identical, reports regenerate byte-identically"
             : "formats:" + why);
}

}  // namespace

int main() {
  try {
    criterion1();
    criterion2();
    auto ref = train_reference();
    criterion3(ref);
    auto abl = train_ablations();
    criterion4(abl);
    criterion5(abl);
    criterion6(abl);
    criterion7(ref);
    criterion8(ref);
    criterion9();
  } catch (const std::exception& e) {
    std::printf("[FAIL] acceptance aborted: %s\n", e.what());
    return 99;
  }
  std::printf("%d/9 criteria passed\n", 9 - g_failures);
  return g_failures;
}
