#include "cmet/config.hpp"

#include <filesystem>
#include <fstream>
#include <set>

#include "cmet/errors.hpp"

namespace cmet {

using nlohmann::json;

namespace {

void check_keys(const json& obj, const std::string& section, const std::set<std::string>& allowed) {
  if (!obj.is_object()) throw config_error("config section '" + section + "' must be a JSON object");
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!allowed.count(it.key()))
      throw config_error("unknown config key '" + (section.empty() ? it.key() : section + "." + it.key()) + "'");
}

template <class T>
void get_field(const json& obj, const std::string& section, const char* key, T& out) {
  auto it = obj.find(key);
  if (it == obj.end()) return;
  try {
    it->get_to(out);
  } catch (const json::exception& e) {
    throw config_error("bad value for '" + section + "." + key + "': " + e.what());
  }
}

void apply_world(WorldCfg& w, const json& j) {
  check_keys(j, "world",
             {"emotions", "identities", "d_a", "d_v", "T", "emotion_dim", "sigma_a", "sigma_v",
              "margin", "identity_base_scale", "content_identity_scale", "content_utterance_scale",
              "map_scale", "samples_per_pair", "warp", "emotion_names"});
  get_field(j, "world", "emotions", w.emotions);
  get_field(j, "world", "identities", w.identities);
  get_field(j, "world", "d_a", w.d_a);
  get_field(j, "world", "d_v", w.d_v);
  get_field(j, "world", "T", w.T);
  get_field(j, "world", "emotion_dim", w.emotion_dim);
  get_field(j, "world", "sigma_a", w.sigma_a);
  get_field(j, "world", "sigma_v", w.sigma_v);
  get_field(j, "world", "margin", w.margin);
  get_field(j, "world", "identity_base_scale", w.identity_base_scale);
  get_field(j, "world", "content_identity_scale", w.content_identity_scale);
  get_field(j, "world", "content_utterance_scale", w.content_utterance_scale);
  get_field(j, "world", "map_scale", w.map_scale);
  get_field(j, "world", "samples_per_pair", w.samples_per_pair);
  get_field(j, "world", "warp", w.warp);
  get_field(j, "world", "emotion_names", w.emotion_names);
}

void apply_model(ModelCfg& m, const json& j) {
  check_keys(j, "model",
             {"d", "layers", "heads", "ffn", "d_a", "d_v", "T", "tau", "lambda_cnt", "lambda_dir",
              "dropout", "prenorm", "precision", "recon_norm", "cnt_batch_mean", "cnt_tokens",
              "ln_eps"});
  get_field(j, "model", "d", m.d);
  get_field(j, "model", "layers", m.layers);
  get_field(j, "model", "heads", m.heads);
  get_field(j, "model", "ffn", m.ffn);
  get_field(j, "model", "d_a", m.d_a);
  get_field(j, "model", "d_v", m.d_v);
  get_field(j, "model", "T", m.T);
  get_field(j, "model", "tau", m.tau);
  get_field(j, "model", "lambda_cnt", m.lambda_cnt);
  get_field(j, "model", "lambda_dir", m.lambda_dir);
  get_field(j, "model", "dropout", m.dropout);
  get_field(j, "model", "prenorm", m.prenorm);
  get_field(j, "model", "precision", m.precision);
  get_field(j, "model", "recon_norm", m.recon_norm);
  get_field(j, "model", "cnt_batch_mean", m.cnt_batch_mean);
  get_field(j, "model", "cnt_tokens", m.cnt_tokens);
  get_field(j, "model", "ln_eps", m.ln_eps);
}

void apply_train(TrainCfg& t, const json& j) {
  check_keys(j, "train",
             {"lr", "weight_decay", "batch", "steps", "k", "ckpt_every", "held_out",
              "zero_ref_prob", "clip_norm"});
  get_field(j, "train", "lr", t.lr);
  get_field(j, "train", "weight_decay", t.weight_decay);
  get_field(j, "train", "batch", t.batch);
  get_field(j, "train", "steps", t.steps);
  get_field(j, "train", "k", t.k);
  get_field(j, "train", "ckpt_every", t.ckpt_every);
  get_field(j, "train", "held_out", t.held_out);
  get_field(j, "train", "zero_ref_prob", t.zero_ref_prob);
  get_field(j, "train", "clip_norm", t.clip_norm);
}

void apply_eval(EvalCfg& e, const json& j) {
  check_keys(j, "eval", {"input_emotion", "k", "ks", "clips_per_pair", "probe", "eval_seeds"});
  get_field(j, "eval", "input_emotion", e.input_emotion);
  get_field(j, "eval", "k", e.k);
  get_field(j, "eval", "ks", e.ks);
  get_field(j, "eval", "clips_per_pair", e.clips_per_pair);
  get_field(j, "eval", "probe", e.probe);
  get_field(j, "eval", "eval_seeds", e.eval_seeds);
}

void require(bool ok, const std::string& msg) {
  if (!ok) throw config_error(msg);
}

}  // namespace

std::vector<std::string> default_emotion_names(int count) {
  std::vector<std::string> names;
  for (int i = 0; i < count; ++i) names.push_back(i == 0 ? "neutral" : "emo" + std::to_string(i));
  return names;
}

void apply_json(RunCfg& cfg, const json& j) {
  check_keys(j, "", {"seed", "out_dir", "world", "model", "train", "eval"});
  get_field(j, "", "seed", cfg.seed);
  get_field(j, "", "out_dir", cfg.out_dir);
  if (j.contains("world")) apply_world(cfg.world, j.at("world"));
  if (j.contains("model")) apply_model(cfg.model, j.at("model"));
  if (j.contains("train")) apply_train(cfg.train, j.at("train"));
  if (j.contains("eval")) apply_eval(cfg.eval, j.at("eval"));
}

RunCfg load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open config file '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw parse_error("config '" + path + "': " + e.what());
  }
  RunCfg cfg;
  apply_json(cfg, j);
  return cfg;
}

void finalize(RunCfg& cfg) {
  auto& w = cfg.world;
  auto& m = cfg.model;
  auto& t = cfg.train;
  auto& e = cfg.eval;

  if (m.ffn == 0) m.ffn = 2 * m.d;
  if (w.emotion_names.empty()) w.emotion_names = default_emotion_names(w.emotions);

  require(w.emotions >= 2, "world.emotions must be >= 2");
  require(w.identities >= 1, "world.identities must be >= 1");
  require(w.d_a >= 1 && w.d_v >= 1, "world dimensions must be >= 1");
  require(w.d_v <= w.d_a, "world.d_v must be <= world.d_a (cross-modal map has orthonormal rows)");
  require(w.T >= 1, "world.T must be >= 1");
  require(w.emotion_dim >= 1 && w.emotion_dim <= w.d_a, "world.emotion_dim must be in [1, d_a]");
  require(w.sigma_a >= 0 && w.sigma_v >= 0, "world noise scales must be >= 0");
  require(w.margin > 0, "world.margin must be > 0");
  require(w.samples_per_pair >= 1, "world.samples_per_pair must be >= 1");
  require((int)w.emotion_names.size() == w.emotions,
          "world.emotion_names must list exactly world.emotions names");
  for (size_t i = 0; i < w.emotion_names.size(); ++i)
    for (size_t k = i + 1; k < w.emotion_names.size(); ++k)
      require(w.emotion_names[i] != w.emotion_names[k], "duplicate emotion name '" + w.emotion_names[i] + "'");

  require(m.d >= 2 && m.d % 2 == 0, "model.d must be even and >= 2");
  require(m.layers >= 1, "model.layers must be >= 1");
  require(m.heads >= 1 && m.d % m.heads == 0, "model.d must be divisible by model.heads");
  require(m.ffn >= 1, "model.ffn must be >= 1");
  require(m.tau > 0, "model.tau must be > 0");
  require(m.lambda_cnt >= 0 && m.lambda_dir >= 0, "loss weights must be >= 0");
  require(m.dropout >= 0 && m.dropout < 1, "model.dropout must be in [0,1)");
  require(m.precision == "float32" || m.precision == "float64",
          "model.precision must be float32 or float64");
  require(m.recon_norm == "mse" || m.recon_norm == "l2_sum",
          "model.recon_norm must be mse or l2_sum");
  require(m.cnt_tokens == "target_embedding" || m.cnt_tokens == "semantic_vector",
          "model.cnt_tokens must be target_embedding or semantic_vector");
  require(m.ln_eps > 0, "model.ln_eps must be > 0");

  require(t.lr >= 0, "train.lr must be >= 0");
  require(t.weight_decay >= 0, "train.weight_decay must be >= 0");
  require(t.batch >= 1, "train.batch must be >= 1");
  require(t.steps >= 0, "train.steps must be >= 0");
  require(t.k >= 1, "train.k must be >= 1");
  require(t.ckpt_every >= 0, "train.ckpt_every must be >= 0");
  require(t.zero_ref_prob >= 0 && t.zero_ref_prob <= 1, "train.zero_ref_prob must be in [0,1]");
  require(t.clip_norm >= 0, "train.clip_norm must be >= 0");

  require(e.k >= 1, "eval.k must be >= 1");
  require(!e.ks.empty(), "eval.ks must be non-empty");
  for (int k : e.ks) require(k >= 1, "eval.ks entries must be >= 1");
  require(e.probe == "centroid" || e.probe == "softmax", "eval.probe must be centroid or softmax");
  require(e.eval_seeds >= 1, "eval.eval_seeds must be >= 1");
}

json to_json(const WorldCfg& w) {
  return json{{"emotions", w.emotions},
              {"identities", w.identities},
              {"d_a", w.d_a},
              {"d_v", w.d_v},
              {"T", w.T},
              {"emotion_dim", w.emotion_dim},
              {"sigma_a", w.sigma_a},
              {"sigma_v", w.sigma_v},
              {"margin", w.margin},
              {"identity_base_scale", w.identity_base_scale},
              {"content_identity_scale", w.content_identity_scale},
              {"content_utterance_scale", w.content_utterance_scale},
              {"map_scale", w.map_scale},
              {"samples_per_pair", w.samples_per_pair},
              {"warp", w.warp},
              {"emotion_names", w.emotion_names}};
}

WorldCfg world_from_json(const json& j) {
  WorldCfg w;
  apply_world(w, j);
  return w;
}

json to_json(const RunCfg& cfg) {
  json m{{"d", cfg.model.d},
         {"layers", cfg.model.layers},
         {"heads", cfg.model.heads},
         {"ffn", cfg.model.ffn},
         {"d_a", cfg.model.d_a},
         {"d_v", cfg.model.d_v},
         {"T", cfg.model.T},
         {"tau", cfg.model.tau},
         {"lambda_cnt", cfg.model.lambda_cnt},
         {"lambda_dir", cfg.model.lambda_dir},
         {"dropout", cfg.model.dropout},
         {"prenorm", cfg.model.prenorm},
         {"precision", cfg.model.precision},
         {"recon_norm", cfg.model.recon_norm},
         {"cnt_batch_mean", cfg.model.cnt_batch_mean},
         {"cnt_tokens", cfg.model.cnt_tokens},
         {"ln_eps", cfg.model.ln_eps}};
  json t{{"lr", cfg.train.lr},
         {"weight_decay", cfg.train.weight_decay},
         {"batch", cfg.train.batch},
         {"steps", cfg.train.steps},
         {"k", cfg.train.k},
         {"ckpt_every", cfg.train.ckpt_every},
         {"held_out", cfg.train.held_out},
         {"zero_ref_prob", cfg.train.zero_ref_prob},
         {"clip_norm", cfg.train.clip_norm}};
  json e{{"input_emotion", cfg.eval.input_emotion},
         {"k", cfg.eval.k},
         {"ks", cfg.eval.ks},
         {"clips_per_pair", cfg.eval.clips_per_pair},
         {"probe", cfg.eval.probe},
         {"eval_seeds", cfg.eval.eval_seeds}};
  return json{{"seed", cfg.seed}, {"out_dir", cfg.out_dir}, {"world", to_json(cfg.world)},
              {"model", m},       {"train", t},             {"eval", e}};
}

void write_resolved(const RunCfg& cfg, const std::string& dir) {
  std::filesystem::create_directories(dir);
  const std::string path = (std::filesystem::path(dir) / "config.resolved.json").string();
  std::ofstream out(path);
  if (!out) throw io_error("cannot write '" + path + "'");
  out << to_json(cfg).dump(2) << "\n";
}

}  // namespace cmet
