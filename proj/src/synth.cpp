#include "cmet/synth.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

#include "cmet/errors.hpp"
#include "cmet/rng.hpp"

namespace cmet {

using nlohmann::json;

namespace {

// Modified Gram-Schmidt on the rows of a[rows x cols]; throws after the
// fact if a row degenerates (caller retries with fresh draws).
bool orthonormalize_rows(std::vector<double>& a, int rows, int cols) {
  for (int r = 0; r < rows; ++r) {
    double* vr = a.data() + (size_t)r * cols;
    for (int p = 0; p < r; ++p) {
      const double* vp = a.data() + (size_t)p * cols;
      double dot = 0;
      for (int c = 0; c < cols; ++c) dot += vr[c] * vp[c];
      for (int c = 0; c < cols; ++c) vr[c] -= dot * vp[c];
    }
    double norm = 0;
    for (int c = 0; c < cols; ++c) norm += vr[c] * vr[c];
    norm = std::sqrt(norm);
    if (norm < 1e-10) return false;
    for (int c = 0; c < cols; ++c) vr[c] /= norm;
  }
  return true;
}

double min_pairwise_dist(const std::vector<double>& pts, int count, int dim) {
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < count; ++i)
    for (int j = i + 1; j < count; ++j) {
      double d2 = 0;
      for (int c = 0; c < dim; ++c) {
        const double d = pts[(size_t)i * dim + c] - pts[(size_t)j * dim + c];
        d2 += d * d;
      }
      best = std::min(best, std::sqrt(d2));
    }
  return best;
}

}  // namespace

std::vector<double> OracleWorld::visual_offset(int e) const {
  if (e < 0 || e >= cfg.emotions) throw usage_error("unknown emotion index " + std::to_string(e));
  std::vector<double> y(cfg.d_v, 0.0);
  const double* u = offset(e);
  for (int r = 0; r < cfg.d_v; ++r) {
    double acc = 0;
    for (int c = 0; c < cfg.d_a; ++c) acc += map[(size_t)r * cfg.d_a + c] * u[c];
    y[r] = acc;
  }
  if (cfg.warp > 0) {
    std::vector<double> w(cfg.d_v, 0.0);
    for (int r = 0; r < cfg.d_v; ++r) {
      double acc = 0;
      for (int c = 0; c < cfg.d_v; ++c) acc += warp_proj[(size_t)r * cfg.d_v + c] * y[c];
      w[r] = acc;
    }
    for (int r = 0; r < cfg.d_v; ++r) y[r] += cfg.warp * std::sin(w[r]);
  }
  return y;
}

std::vector<double> OracleWorld::oracle_sv(int i, int j) const {
  if (i < 0 || i >= cfg.emotions || j < 0 || j >= cfg.emotions)
    throw usage_error("oracle_sv: unknown emotion index");
  const auto vi = visual_offset(i);
  const auto vj = visual_offset(j);
  std::vector<double> sv((size_t)cfg.T * cfg.d_v);
  for (int t = 0; t < cfg.T; ++t)
    for (int c = 0; c < cfg.d_v; ++c) sv[(size_t)t * cfg.d_v + c] = vj[c] - vi[c];
  return sv;
}

OracleWorld gen_world(const WorldCfg& cfg, uint64_t seed) {
  if (cfg.emotions < 2) throw config_error("gen_world: at least 2 emotions required");
  if (cfg.identities < 1) throw config_error("gen_world: at least 1 identity required");
  if (cfg.d_v > cfg.d_a) throw config_error("gen_world: d_v must be <= d_a");

  OracleWorld w;
  w.cfg = cfg;
  w.seed = seed;
  Rng rng(substream(seed, "world"));

  const int E = cfg.emotions, P = cfg.identities, da = cfg.d_a, dv = cfg.d_v, r = cfg.emotion_dim;

  // Emotion offsets live in an r-dimensional subspace spanned by random
  // orthonormal rows Q. Coordinates inside the subspace come from a
  // well-spread pattern (orthogonal basis vectors while they last, then
  // their negatives, then sphere points pushed apart by repulsion) so no
  // pair of emotions ends up much closer than any other; everything is then
  // scaled until the minimum pairwise distance reaches the margin.
  const int kMaxRetries = 32;
  bool ok = false;
  for (int attempt = 0; attempt < kMaxRetries && !ok; ++attempt) {
    std::vector<double> q((size_t)r * da);  // rows = subspace basis vectors
    for (auto& v : q) v = rng.normal();
    if (!orthonormalize_rows(q, r, da)) continue;

    std::vector<double> coords((size_t)E * r, 0.0);
    if (E <= 2 * r) {
      for (int e = 0; e < E; ++e) coords[(size_t)e * r + e / 2] = (e % 2 == 0) ? 1.0 : -1.0;
    } else {
      for (auto& v : coords) v = rng.normal();
      auto renorm = [&](int e) {
        double n = 0;
        for (int c = 0; c < r; ++c) n += coords[(size_t)e * r + c] * coords[(size_t)e * r + c];
        n = std::sqrt(n);
        if (n < 1e-12) return false;
        for (int c = 0; c < r; ++c) coords[(size_t)e * r + c] /= n;
        return true;
      };
      bool fine = true;
      for (int e = 0; e < E && fine; ++e) fine = renorm(e);
      for (int it = 0; it < 100 && fine; ++it) {
        std::vector<double> force((size_t)E * r, 0.0);
        for (int i = 0; i < E; ++i)
          for (int j = 0; j < E; ++j) {
            if (i == j) continue;
            double d2 = 0;
            for (int c = 0; c < r; ++c) {
              const double d = coords[(size_t)i * r + c] - coords[(size_t)j * r + c];
              d2 += d * d;
            }
            if (d2 < 1e-12) continue;
            const double inv = 1.0 / (d2 * std::sqrt(d2));
            for (int c = 0; c < r; ++c)
              force[(size_t)i * r + c] += (coords[(size_t)i * r + c] - coords[(size_t)j * r + c]) * inv;
          }
        for (size_t i = 0; i < coords.size(); ++i) coords[i] += 0.05 * force[i];
        for (int e = 0; e < E && fine; ++e) fine = renorm(e);
      }
      if (!fine) continue;
    }

    w.emotion_offsets.assign((size_t)E * da, 0.0);
    for (int e = 0; e < E; ++e)
      for (int c = 0; c < da; ++c) {
        double acc = 0;
        for (int t = 0; t < r; ++t) acc += coords[(size_t)e * r + t] * q[(size_t)t * da + c];
        w.emotion_offsets[(size_t)e * da + c] = acc;
      }

    const double mind = min_pairwise_dist(w.emotion_offsets, E, da);
    if (mind < 1e-9) continue;  // degenerate draw, retry
    if (mind < cfg.margin) {
      const double scale = cfg.margin / mind;
      for (auto& v : w.emotion_offsets) v *= scale;
    }
    w.min_offset_dist = min_pairwise_dist(w.emotion_offsets, E, da);
    ok = w.min_offset_dist + 1e-12 >= cfg.margin;
  }
  if (!ok) throw generation_error("could not satisfy emotion separation margin after retries");

  // Cross-modal map: orthonormal rows scaled by map_scale.
  for (int attempt = 0;; ++attempt) {
    if (attempt >= kMaxRetries) throw generation_error("could not draw a full-rank cross-modal map");
    w.map.assign((size_t)dv * da, 0.0);
    for (auto& v : w.map) v = rng.normal();
    if (orthonormalize_rows(w.map, dv, da)) break;
  }
  for (auto& v : w.map) v *= cfg.map_scale;

  // Fixed matrix used inside the smooth warp (drawn even when warp = 0 so
  // toggling the knob does not shift the rest of the stream).
  w.warp_proj.assign((size_t)dv * dv, 0.0);
  const double wp_scale = 1.0 / std::sqrt((double)dv);
  for (auto& v : w.warp_proj) v = rng.normal() * wp_scale;

  w.identity_bases.assign((size_t)P * dv, 0.0);
  for (auto& v : w.identity_bases) v = rng.normal() * cfg.identity_base_scale;

  w.identity_content.assign((size_t)P * da, 0.0);
  for (auto& v : w.identity_content) v = rng.normal() * cfg.content_identity_scale;

  return w;
}

EmbeddingDataset gen_dataset(const OracleWorld& world) {
  const auto& cfg = world.cfg;
  EmbeddingDataset ds;
  ds.d_a = cfg.d_a;
  ds.d_v = cfg.d_v;
  ds.T = cfg.T;
  ds.emotions = cfg.emotion_names.empty() ? default_emotion_names(cfg.emotions) : cfg.emotion_names;
  for (int p = 0; p < cfg.identities; ++p) ds.identities.push_back("p" + std::to_string(p));
  ds.provenance = json{{"world", to_json(cfg)}, {"seed", world.seed}}.dump();

  // Precompute mapped visual offsets once per emotion.
  std::vector<std::vector<double>> vis_off(cfg.emotions);
  for (int e = 0; e < cfg.emotions; ++e) vis_off[e] = world.visual_offset(e);

  const uint64_t utt_tag = fnv1a("utterance");
  const uint64_t noise_tag = fnv1a("noise");

  for (int p = 0; p < cfg.identities; ++p) {
    for (int s = 0; s < cfg.samples_per_pair; ++s) {
      // Utterance content: shared by every emotion of (identity, sample index),
      // so the same line "spoken" in two emotions differs only by the offset.
      std::vector<double> utt(cfg.d_a);
      Rng urng(derive_seed(world.seed, utt_tag, (uint64_t)p, (uint64_t)s));
      for (auto& v : utt) v = urng.normal() * cfg.content_utterance_scale;

      for (int e = 0; e < cfg.emotions; ++e) {
        // Per-sample seed: generation is order-independent.
        Rng nrng(derive_seed(world.seed, noise_tag, (uint64_t)(p * cfg.emotions + e), (uint64_t)s));
        Sample smp;
        smp.identity = p;
        smp.emotion = e;
        char buf[64];
        std::snprintf(buf, sizeof buf, "p%d_e%d_s%02d", p, e, s);
        smp.clip_id = buf;

        smp.audio.resize(cfg.d_a);
        const double* ct = world.content(p);
        const double* u = world.offset(e);
        for (int c = 0; c < cfg.d_a; ++c)
          smp.audio[c] = (float)(ct[c] + utt[c] + u[c] + nrng.normal() * cfg.sigma_a);

        smp.clip.resize((size_t)cfg.T * cfg.d_v);
        const double* b = world.base(p);
        for (int t = 0; t < cfg.T; ++t)
          for (int c = 0; c < cfg.d_v; ++c)
            smp.clip[(size_t)t * cfg.d_v + c] =
                (float)(b[c] + vis_off[e][c] + nrng.normal() * cfg.sigma_v);

        ds.samples.push_back(std::move(smp));
      }
    }
  }
  ds.build_index();
  return ds;
}

OracleWorld world_from_provenance(const std::string& provenance) {
  json j;
  try {
    j = json::parse(provenance);
  } catch (const json::exception&) {
    throw config_error("dataset provenance is not a synthetic-world record");
  }
  if (!j.is_object() || !j.contains("world") || !j.contains("seed"))
    throw config_error("dataset provenance lacks world/seed fields");
  WorldCfg cfg = world_from_json(j.at("world"));
  if (cfg.emotion_names.empty()) cfg.emotion_names = default_emotion_names(cfg.emotions);
  return gen_world(cfg, j.at("seed").get<uint64_t>());
}

}  // namespace cmet
