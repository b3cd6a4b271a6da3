#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

namespace cmet {

// Synthetic-world knobs. Emotion offsets are drawn inside an emotion_dim-
// dimensional subspace of audio space and rescaled until their minimum
// pairwise distance reaches `margin`; the cross-modal map has orthonormal
// rows times map_scale.
struct WorldCfg {
  int emotions = 6;
  int identities = 8;
  int d_a = 32;
  int d_v = 16;
  int T = 5;
  int emotion_dim = 4;
  double sigma_a = 0.05;
  double sigma_v = 0.05;
  double margin = 4.0;
  double identity_base_scale = 0.2;       // spread of per-identity visual bases
  double content_identity_scale = 0.8;    // audio content shared by an identity
  double content_utterance_scale = 0.8;   // audio content per utterance
  double map_scale = 1.0;
  int samples_per_pair = 12;              // samples per (identity, emotion)
  double warp = 0.0;                      // smooth nonlinear bend of visual offsets
  std::vector<std::string> emotion_names; // empty = auto ("neutral", "emo1", ...)
};

struct ModelCfg {
  int d = 1024;
  int layers = 4;
  int heads = 8;
  int ffn = 0;        // 0 = 2*d
  int d_a = 0;        // 0 = inherit from dataset
  int d_v = 0;
  int T = 0;
  double tau = 0.07;
  double lambda_cnt = 0.1;
  double lambda_dir = 0.05;
  double dropout = 0.0;
  bool prenorm = true;
  std::string precision = "float32";   // float32 | float64
  std::string recon_norm = "mse";      // mse | l2_sum
  bool cnt_batch_mean = false;         // divide the contrastive sum by B
  std::string cnt_tokens = "target_embedding";  // | semantic_vector
  double ln_eps = 1e-5;
};

struct TrainCfg {
  double lr = 1e-4;
  double weight_decay = 0.01;
  int batch = 16;
  long long steps = 3000;
  int k = 10;
  long long ckpt_every = 500;          // 0 = final checkpoint only
  std::vector<std::string> held_out;   // emotion names never sampled in training
  double zero_ref_prob = 0.5;          // chance an instance is a sequence start
  double clip_norm = 1.0;              // 0 = no clipping
};

struct EvalCfg {
  std::string input_emotion;           // empty = first emotion in the vocabulary
  int k = 10;
  std::vector<int> ks = {1, 2, 5, 10};
  int clips_per_pair = 0;              // 0 = every clip of the input emotion
  std::string probe = "centroid";      // centroid | softmax
  int eval_seeds = 5;
};

struct RunCfg {
  uint64_t seed = 1;
  std::string out_dir;
  WorldCfg world;
  ModelCfg model;
  TrainCfg train;
  EvalCfg eval;
};

// Strict JSON application: unknown keys or wrong types raise config errors.
void apply_json(RunCfg& cfg, const nlohmann::json& j);
RunCfg load_config(const std::string& path);
// Fills derived defaults (ffn = 2d, emotion names) and validates ranges.
void finalize(RunCfg& cfg);

nlohmann::json to_json(const WorldCfg& w);
nlohmann::json to_json(const RunCfg& cfg);
WorldCfg world_from_json(const nlohmann::json& j);
void write_resolved(const RunCfg& cfg, const std::string& dir);

std::vector<std::string> default_emotion_names(int count);

}  // namespace cmet
