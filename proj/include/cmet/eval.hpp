#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "cmet/config.hpp"
#include "cmet/datamodel.hpp"
#include "cmet/model.hpp"
#include "cmet/synth.hpp"
#include "cmet/trainer.hpp"

namespace cmet {

// ---- emotion probe ------------------------------------------------------
//
// Read-out classifier over visual frames, fit on ground-truth clips. The
// default is nearest-centroid; a logistic head is available behind the
// config switch. Ties resolve to the lower emotion index in both the frame
// and the clip vote so results are reproducible.

struct Probe {
  std::string kind = "centroid";  // centroid | softmax
  int E = 0, d_v = 0;
  std::vector<double> centroids;  // E x d_v
  std::vector<double> w, b;       // softmax head: E x d_v, E
};

inline Probe fit_probe(const EmbeddingDataset& ds, const std::string& kind = "centroid") {
  Probe p;
  p.kind = kind;
  p.E = (int)ds.emotions.size();
  p.d_v = ds.d_v;
  p.centroids.assign((size_t)p.E * p.d_v, 0.0);
  std::vector<long long> frames(p.E, 0);
  for (const auto& s : ds.samples) {
    double* c = p.centroids.data() + (size_t)s.emotion * p.d_v;
    for (int t = 0; t < ds.T; ++t)
      for (int j = 0; j < p.d_v; ++j) c[j] += s.clip[(size_t)t * p.d_v + j];
    frames[s.emotion] += ds.T;
  }
  for (int e = 0; e < p.E; ++e) {
    if (frames[e] == 0)
      throw insufficient_data_error("probe fit: no clips for emotion '" + ds.emotions[e] + "'");
    double* c = p.centroids.data() + (size_t)e * p.d_v;
    for (int j = 0; j < p.d_v; ++j) c[j] /= (double)frames[e];
  }
  if (kind == "softmax") {
    // multinomial logistic head, full-batch gradient descent from zero init
    p.w.assign((size_t)p.E * p.d_v, 0.0);
    p.b.assign(p.E, 0.0);
    const double lr = 0.5;
    std::vector<double> logits(p.E), grad_w(p.w.size()), grad_b(p.E);
    const long long n = (long long)ds.samples.size() * ds.T;
    for (int iter = 0; iter < 200; ++iter) {
      std::fill(grad_w.begin(), grad_w.end(), 0.0);
      std::fill(grad_b.begin(), grad_b.end(), 0.0);
      for (const auto& s : ds.samples)
        for (int t = 0; t < ds.T; ++t) {
          const float* x = s.clip.data() + (size_t)t * p.d_v;
          double mx = -1e300;
          for (int e = 0; e < p.E; ++e) {
            double z = p.b[e];
            for (int j = 0; j < p.d_v; ++j) z += p.w[(size_t)e * p.d_v + j] * x[j];
            logits[e] = z;
            mx = std::max(mx, z);
          }
          double Z = 0;
          for (int e = 0; e < p.E; ++e) Z += std::exp(logits[e] - mx);
          for (int e = 0; e < p.E; ++e) {
            const double g = std::exp(logits[e] - mx) / Z - (e == s.emotion ? 1.0 : 0.0);
            grad_b[e] += g;
            for (int j = 0; j < p.d_v; ++j) grad_w[(size_t)e * p.d_v + j] += g * x[j];
          }
        }
      for (size_t i = 0; i < p.w.size(); ++i) p.w[i] -= lr * grad_w[i] / (double)n;
      for (int e = 0; e < p.E; ++e) p.b[e] -= lr * grad_b[e] / (double)n;
    }
  } else if (kind != "centroid") {
    throw config_error("unknown probe kind '" + kind + "'");
  }
  return p;
}

inline int classify_frame(const Probe& p, const double* frame) {
  int best = 0;
  if (p.kind == "softmax") {
    double best_z = -1e300;
    for (int e = 0; e < p.E; ++e) {
      double z = p.b[e];
      for (int j = 0; j < p.d_v; ++j) z += p.w[(size_t)e * p.d_v + j] * frame[j];
      if (z > best_z) {  // strict: ties keep the lower index
        best_z = z;
        best = e;
      }
    }
    return best;
  }
  double best_d = 1e300;
  for (int e = 0; e < p.E; ++e) {
    const double* c = p.centroids.data() + (size_t)e * p.d_v;
    double d = 0;
    for (int j = 0; j < p.d_v; ++j) d += (frame[j] - c[j]) * (frame[j] - c[j]);
    if (d < best_d) {
      best_d = d;
      best = e;
    }
  }
  return best;
}

// Majority vote over the clip's frames; vote ties go to the lower index.
inline int classify_clip(const Probe& p, const double* clip, int T) {
  std::vector<int> votes(p.E, 0);
  for (int t = 0; t < T; ++t) ++votes[classify_frame(p, clip + (size_t)t * p.d_v)];
  int best = 0;
  for (int e = 1; e < p.E; ++e)
    if (votes[e] > votes[best]) best = e;
  return best;
}

// ---- autoregressive inference -------------------------------------------

struct ScheduleSegment {
  std::vector<double> asv;  // d_a audio semantic vector conditioning this segment
  int windows = 1;          // number of consecutive windows it covers
};

struct InferTraceRow {
  int window = 0, segment = 0;
  bool zero_ref = false;  // window 0: all-zero reference
  double ref_norm = 0;    // L2 norm of the assembled reference block
};

struct InferResult {
  std::vector<std::vector<double>> preds;   // per window: T x d_v predicted semantic vectors
  std::vector<std::vector<double>> edited;  // per window: input frames + predictions
  std::vector<InferTraceRow> trace;
};

// Runs the model over a stream of visual windows. Window 0 uses the zero
// reference; window w > 0 carries the previous window's *predictions* in
// reference slots 1..T (slot 0 stays the zero boundary slot). The last
// schedule segment extends to cover any remaining windows.
template <class S>
InferResult infer_sequence(CMetModel<S>& model, const std::vector<std::vector<double>>& windows,
                           const std::vector<ScheduleSegment>& schedule) {
  const int T = model.cfg.T, dv = model.cfg.d_v, da = model.cfg.d_a;
  if (windows.empty()) throw usage_error("infer_sequence: empty window stream");
  if (schedule.empty()) throw usage_error("infer_sequence: empty edit schedule");
  for (const auto& seg : schedule) {
    if ((int)seg.asv.size() != da)
      throw usage_error("infer_sequence: segment conditioning has wrong width");
    if (seg.windows < 1) throw usage_error("infer_sequence: segment must cover >= 1 windows");
  }

  InferResult out;
  std::vector<double> prev;  // previous window's predictions
  int seg = 0, left = schedule[0].windows;
  for (int w = 0; w < (int)windows.size(); ++w) {
    if (left == 0 && seg + 1 < (int)schedule.size()) {
      ++seg;
      left = schedule[seg].windows;
    }
    if (left > 0) --left;  // the final segment extends indefinitely

    if (windows[w].size() != (size_t)T * dv)
      throw usage_error("infer_sequence: window " + std::to_string(w) + " has wrong size");

    Tensor<S> ref = Tensor<S>::zeros(Shape{T + 1, dv});
    double ref_norm = 0;
    const bool zero_ref = prev.empty();
    if (!zero_ref)
      for (int i = 0; i < T * dv; ++i) {
        ref.data[(size_t)dv + i] = (S)prev[i];
        ref_norm += prev[i] * prev[i];
      }
    auto asv = to_tensor<S>(schedule[seg].asv, Shape{da});
    auto clip = to_tensor<S>(windows[w], Shape{T, dv});
    auto pred = model.predict_sv(ref, asv, clip);

    std::vector<double> pv((size_t)T * dv), ev((size_t)T * dv);
    for (size_t i = 0; i < pv.size(); ++i) {
      pv[i] = (double)pred->val.data[i];
      ev[i] = windows[w][i] + pv[i];
    }
    out.trace.push_back({w, seg, zero_ref, std::sqrt(ref_norm)});
    out.preds.push_back(pv);
    out.edited.push_back(std::move(ev));
    prev = out.preds.back();
  }
  return out;
}

// ---- metrics against the generative oracle -------------------------------

// Mean over frames of cosine(predicted frame, true offset difference).
inline double cosine_to_oracle(const std::vector<double>& pred, const OracleWorld& world, int emo_in,
                               int emo_tgt, int T) {
  const auto truth = world.oracle_sv(emo_in, emo_tgt);
  const int dv = world.cfg.d_v;
  double acc = 0;
  for (int t = 0; t < T; ++t) {
    double dot = 0, na = 0, nb = 0;
    for (int j = 0; j < dv; ++j) {
      const double a = pred[(size_t)t * dv + j], b = truth[(size_t)t * dv + j];
      dot += a * b;
      na += a * a;
      nb += b * b;
    }
    acc += dot / (std::sqrt(na) * std::sqrt(nb) + ad::kCosineEps);
  }
  return acc / T;
}

struct EvalOutcome {
  long long correct = 0, total = 0;
  double accuracy = 0;
  std::vector<long long> confusion;  // E x E, row = intended target emotion, col = prediction
  double mean_cosine = 0;            // only meaningful when an oracle world was supplied
  long long cosine_pairs = 0;
};

// Emotion-transfer accuracy: for each identity, take clips of the input
// emotion, condition on a k-shot audio semantic vector toward each target
// emotion, apply the predicted edit, and classify the result with the probe.
template <class S>
EvalOutcome emotion_accuracy(CMetModel<S>& model, const EmbeddingDataset& ds, const Probe& probe,
                             int emo_in, const std::vector<int>& targets, int k, Rng& rng,
                             int clips_per_pair = 0, const OracleWorld* world = nullptr) {
  const int E = (int)ds.emotions.size(), T = ds.T;
  EvalOutcome out;
  out.confusion.assign((size_t)E * E, 0);

  std::vector<std::vector<EmbeddingView>> audio(E);
  for (size_t i = 0; i < ds.samples.size(); ++i)
    audio[ds.samples[i].emotion].push_back(audio_view(ds.samples[i], ds.d_a));

  for (int p = 0; p < (int)ds.identities.size(); ++p) {
    const auto& clips = ds.group(p, emo_in);
    if (clips.empty()) continue;
    const int n_clips =
        clips_per_pair > 0 ? std::min<int>(clips_per_pair, (int)clips.size()) : (int)clips.size();
    for (int j : targets) {
      if (j == emo_in) continue;
      auto asv = k_shot_semantic_vector(audio[emo_in], audio[j], k, rng,
                                        "audio emotion '" + ds.emotions[j] + "'");
      for (int ci = 0; ci < n_clips; ++ci) {
        const Sample& s = ds.samples[clips[ci]];
        std::vector<double> window(s.clip.begin(), s.clip.end());
        auto res = infer_sequence(model, {window}, {{asv.data, 1}});
        const int label = classify_clip(probe, res.edited[0].data(), T);
        ++out.confusion[(size_t)j * E + label];
        ++out.total;
        if (label == j) ++out.correct;
        if (world) {
          out.mean_cosine += cosine_to_oracle(res.preds[0], *world, emo_in, j, T);
          ++out.cosine_pairs;
        }
      }
    }
  }
  if (out.total > 0) out.accuracy = (double)out.correct / (double)out.total;
  if (out.cosine_pairs > 0) out.mean_cosine /= (double)out.cosine_pairs;
  return out;
}

// ---- k-shot sweep ---------------------------------------------------------

struct KshotRow {
  int k = 0;
  double accuracy = 0;     // median over evaluation seeds
  double mean_cosine = 0;  // median over evaluation seeds
};

template <class S>
std::vector<KshotRow> kshot_sweep(CMetModel<S>& model, const EmbeddingDataset& ds,
                                  const Probe& probe, int emo_in, const std::vector<int>& targets,
                                  const std::vector<int>& ks, int eval_seeds, uint64_t seed,
                                  int clips_per_pair = 0, const OracleWorld* world = nullptr) {
  auto median = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
  };
  std::vector<KshotRow> rows;
  for (int k : ks) {
    std::vector<double> accs, coss;
    for (int s = 0; s < eval_seeds; ++s) {
      Rng rng(derive_seed(seed, fnv1a("eval"), (uint64_t)k, (uint64_t)s));
      auto o = emotion_accuracy(model, ds, probe, emo_in, targets, k, rng, clips_per_pair, world);
      accs.push_back(o.accuracy);
      coss.push_back(o.mean_cosine);
    }
    rows.push_back({k, median(accs), median(coss)});
  }
  std::sort(rows.begin(), rows.end(), [](const KshotRow& a, const KshotRow& b) { return a.k < b.k; });
  return rows;
}

}  // namespace cmet
