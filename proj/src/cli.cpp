#include "cmet/cli.hpp"

#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cmet/config.hpp"
#include "cmet/eval.hpp"
#include "cmet/gradcheck.hpp"
#include "cmet/io.hpp"
#include "cmet/kernels.hpp"
#include "cmet/report.hpp"
#include "cmet/synth.hpp"
#include "cmet/trainer.hpp"

namespace cmet {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

// Options shared by every subcommand. Precedence: flags > config file >
// (for infer/eval/kshot) checkpoint config echo > built-in defaults.
struct Common {
  std::string config_path, out_dir, backend = "auto";
  uint64_t seed = 0;
  int threads = 0;
  CLI::Option *seed_opt = nullptr, *out_opt = nullptr;

  void attach(CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON run config (sections: world, model, train, eval)");
    seed_opt = sub->add_option("--seed", seed, "master seed; all randomness derives from it");
    out_opt = sub->add_option("--out-dir", out_dir,
                              "output directory (default: $CMET_OUT_DIR, else current dir)");
    sub->add_option("--backend", backend, "compute backend: auto | serial | openmp")
        ->capture_default_str();
    sub->add_option("--threads", threads, "OpenMP thread count (0 = library default)")
        ->capture_default_str();
  }

  RunCfg load(const json* base = nullptr) const {
    RunCfg cfg;
    if (base) apply_json(cfg, *base);
    if (!config_path.empty()) {
      std::ifstream f(config_path);
      if (!f) throw io_error("cannot open config '" + config_path + "'");
      json j;
      try {
        j = json::parse(f);
      } catch (const json::exception& e) {
        throw parse_error("config '" + config_path + "': " + e.what());
      }
      apply_json(cfg, j);
    }
    if (seed_opt && seed_opt->count()) cfg.seed = seed;
    if (out_opt && out_opt->count()) {
      cfg.out_dir = out_dir;
    } else if (cfg.out_dir.empty()) {
      const char* env = std::getenv("CMET_OUT_DIR");
      cfg.out_dir = env && *env ? env : ".";
    }
    return cfg;
  }

  void select_backend() const {
    if (threads > 0) kernels::set_threads(threads);
    if (backend == "serial") {
      kernels::set_backend(kernels::Backend::serial);
    } else if (backend == "openmp") {
      if (!kernels::openmp_available()) throw config_error("this build has no OpenMP support");
      kernels::set_backend(kernels::Backend::openmp);
    } else if (backend == "auto") {
      kernels::set_backend(kernels::openmp_available() ? kernels::Backend::openmp
                                                       : kernels::Backend::serial);
    } else {
      throw config_error("unknown backend '" + backend + "'");
    }
  }
};

EmbeddingDataset load_dataset(const std::string& path) {
  if (path.empty()) throw usage_error("missing --data (.cmed dataset path)");
  return read_dataset(path);
}

// Rebuilds the model a checkpoint was trained with and restores parameters.
template <class S>
CMetModel<S> model_from_checkpoint(const Checkpoint& ck, const RunCfg& cfg) {
  auto model = build_model<S>(cfg.model, cfg.seed);
  AdamW<S> opt;
  opt.init(model.params);
  restore_checkpoint(ck, model, opt);
  return model;
}

int emotion_or_default(const EmbeddingDataset& ds, const std::string& name) {
  if (name.empty()) return 0;
  return ds.emotion_index(name);
}

std::vector<int> eval_targets(const EmbeddingDataset& ds, int emo_in) {
  std::vector<int> t;
  for (int e = 0; e < (int)ds.emotions.size(); ++e)
    if (e != emo_in) t.push_back(e);
  return t;
}

// ---- gen ------------------------------------------------------------------

int run_gen(const Common& common, const std::string& out_path) {
  RunCfg cfg = common.load();
  finalize(cfg);
  write_resolved(cfg, cfg.out_dir);
  const auto world = gen_world(cfg.world, cfg.seed);
  const auto ds = gen_dataset(world);
  const std::string path =
      out_path.empty() ? (fs::path(cfg.out_dir) / "data.cmed").string() : out_path;
  write_dataset(ds, path);
  std::cout << "wrote " << path << " (" << ds.samples.size() << " samples, " << ds.emotions.size()
            << " emotions, " << ds.identities.size() << " identities, d_a=" << ds.d_a
            << " d_v=" << ds.d_v << " T=" << ds.T << ")\n";
  return 0;
}

// ---- train ------------------------------------------------------------------

template <class S>
void train_with(const RunCfg& cfg, const EmbeddingDataset& ds, const std::string& ckpt_path,
                const Checkpoint* resume) {
  auto res = train<S>(ds, cfg, cfg.out_dir, ckpt_path, resume);
  write_metrics_csv((fs::path(cfg.out_dir) / "metrics.csv").string(), res.metrics);
  write_metrics_svg((fs::path(cfg.out_dir) / "metrics.svg").string(), res.metrics);
  write_sampler_audit_csv((fs::path(cfg.out_dir) / "sampler_audit.csv").string(), ds.emotions,
                          res.pair_counts);
  if (!res.metrics.empty()) {
    const auto& m = res.metrics.back();
    std::cout << "step " << m.step << ": recon=" << num(m.recon) << " cnt=" << num(m.cnt)
              << " dir=" << num(m.dir) << " total=" << num(m.total) << "\n";
  }
  std::cout << "wrote " << ckpt_path << "\n";
}

int run_train(const Common& common, const std::string& data_path, const std::string& ckpt_out,
              const std::string& resume_path, const json& overrides) {
  Checkpoint resume;
  const bool resuming = !resume_path.empty();
  if (resuming) resume = read_checkpoint(resume_path);
  RunCfg cfg = common.load(resuming ? &resume.config : nullptr);
  if (!overrides.empty()) apply_json(cfg, overrides);
  finalize(cfg);
  write_resolved(cfg, cfg.out_dir);
  const auto ds = load_dataset(data_path);
  const std::string ckpt_path =
      ckpt_out.empty() ? (fs::path(cfg.out_dir) / "model.cmck").string() : ckpt_out;
  if (cfg.model.precision == "float64")
    train_with<double>(cfg, ds, ckpt_path, resuming ? &resume : nullptr);
  else
    train_with<float>(cfg, ds, ckpt_path, resuming ? &resume : nullptr);
  return 0;
}

// ---- infer ------------------------------------------------------------------

struct ParsedSchedule {
  int identity = 0, emotion = 0, clips = 0, k = 10;
  std::vector<std::pair<std::string, int>> segments;  // (target emotion, windows)
};

ParsedSchedule parse_schedule(const std::string& path, const EmbeddingDataset& ds) {
  if (path.empty()) throw usage_error("missing --schedule (JSON edit schedule)");
  std::ifstream f(path);
  if (!f) throw io_error("cannot open schedule '" + path + "'");
  json j;
  try {
    j = json::parse(f);
  } catch (const json::exception& e) {
    throw parse_error("schedule '" + path + "': " + e.what());
  }
  ParsedSchedule s;
  try {
    const auto& in = j.at("input");
    s.identity = ds.identity_index(in.at("identity").get<std::string>());
    s.emotion = ds.emotion_index(in.at("emotion").get<std::string>());
    s.clips = in.value("clips", 0);
    s.k = j.value("k", 10);
    for (const auto& seg : j.at("segments"))
      s.segments.emplace_back(seg.at("target").get<std::string>(), seg.value("windows", 1));
  } catch (const json::exception& e) {
    throw parse_error("schedule '" + path + "': " + std::string(e.what()));
  }
  if (s.segments.empty()) throw usage_error("schedule has no segments");
  return s;
}

template <class S>
int infer_with(const RunCfg& cfg, const EmbeddingDataset& ds, const Checkpoint& ck,
               const ParsedSchedule& sched) {
  auto model = model_from_checkpoint<S>(ck, cfg);

  const auto& clip_ids = ds.group(sched.identity, sched.emotion);
  if (clip_ids.empty())
    throw usage_error("no clips for (" + ds.identities[sched.identity] + ", " +
                      ds.emotions[sched.emotion] + ")");
  const int n = sched.clips > 0 ? std::min<int>(sched.clips, (int)clip_ids.size())
                                : (int)clip_ids.size();
  std::vector<std::vector<double>> windows;
  for (int i = 0; i < n; ++i) {
    const Sample& smp = ds.samples[clip_ids[i]];
    windows.emplace_back(smp.clip.begin(), smp.clip.end());
  }

  std::vector<std::vector<EmbeddingView>> audio(ds.emotions.size());
  for (size_t i = 0; i < ds.samples.size(); ++i)
    audio[ds.samples[i].emotion].push_back(audio_view(ds.samples[i], ds.d_a));

  Rng rng(substream(cfg.seed, "eval"));
  std::vector<ScheduleSegment> segments;
  std::vector<int> seg_target;
  for (const auto& [target, wins] : sched.segments) {
    const int tgt = ds.emotion_index(target);
    auto asv = k_shot_semantic_vector(audio[sched.emotion], audio[tgt], sched.k, rng,
                                      "audio emotion '" + target + "'");
    segments.push_back({asv.data, wins});
    seg_target.push_back(tgt);
  }

  auto res = infer_sequence(model, windows, segments);

  // edited embeddings as a dataset: same audio payloads, edited clips,
  // emotion field set to each window's intended target
  EmbeddingDataset edited;
  edited.d_a = ds.d_a;
  edited.d_v = ds.d_v;
  edited.T = ds.T;
  edited.emotions = ds.emotions;
  edited.identities = ds.identities;
  edited.provenance = json{{"edited_from", ds.provenance},
                           {"schedule", {{"identity", ds.identities[sched.identity]},
                                         {"emotion", ds.emotions[sched.emotion]},
                                         {"k", sched.k}}}}
                          .dump();
  for (int w = 0; w < (int)windows.size(); ++w) {
    const Sample& src = ds.samples[clip_ids[w]];
    Sample out;
    out.identity = src.identity;
    out.emotion = seg_target[res.trace[w].segment];
    out.clip_id = src.clip_id + "_edit" + std::to_string(w);
    out.audio = src.audio;
    out.clip.assign(res.edited[w].begin(), res.edited[w].end());
    edited.samples.push_back(std::move(out));
  }
  edited.build_index();
  const std::string edited_path = (fs::path(cfg.out_dir) / "edited.cmed").string();
  write_dataset(edited, edited_path);

  {
    std::ofstream pf((fs::path(cfg.out_dir) / "predictions.csv").string(), std::ios::binary);
    if (!pf) throw io_error("cannot write predictions.csv");
    pf << "window,segment,frame";
    for (int c = 0; c < ds.d_v; ++c) pf << ",c" << c;
    pf << "\n";
    for (int w = 0; w < (int)res.preds.size(); ++w)
      for (int t = 0; t < ds.T; ++t) {
        pf << w << ',' << res.trace[w].segment << ',' << t;
        for (int c = 0; c < ds.d_v; ++c) pf << ',' << num(res.preds[w][(size_t)t * ds.d_v + c]);
        pf << "\n";
      }
  }
  {
    std::ofstream tf((fs::path(cfg.out_dir) / "trace.csv").string(), std::ios::binary);
    if (!tf) throw io_error("cannot write trace.csv");
    tf << "window,segment,zero_ref,ref_norm\n";
    for (const auto& r : res.trace)
      tf << r.window << ',' << r.segment << ',' << (r.zero_ref ? 1 : 0) << ',' << num(r.ref_norm)
         << "\n";
  }
  std::cout << "edited " << windows.size() << " windows -> " << edited_path << "\n";
  return 0;
}

int run_infer(const Common& common, const std::string& ckpt_path, const std::string& data_path,
              const std::string& schedule_path) {
  if (ckpt_path.empty()) throw usage_error("missing --ckpt (.cmck checkpoint path)");
  const Checkpoint ck = read_checkpoint(ckpt_path);
  RunCfg cfg = common.load(&ck.config);
  finalize(cfg);
  write_resolved(cfg, cfg.out_dir);
  const auto ds = load_dataset(data_path);
  resolve_dims(cfg.model, ds);
  const auto sched = parse_schedule(schedule_path, ds);
  if (cfg.model.precision == "float64") return infer_with<double>(cfg, ds, ck, sched);
  return infer_with<float>(cfg, ds, ck, sched);
}

// ---- eval ------------------------------------------------------------------

template <class S>
int eval_with(const RunCfg& cfg, const EmbeddingDataset& ds, const Checkpoint& ck) {
  auto model = model_from_checkpoint<S>(ck, cfg);
  const auto probe = fit_probe(ds, cfg.eval.probe);
  const int emo_in = emotion_or_default(ds, cfg.eval.input_emotion);
  const auto targets = eval_targets(ds, emo_in);

  OracleWorld world;
  bool have_world = true;
  try {
    world = world_from_provenance(ds.provenance);
  } catch (const Error&) {
    have_world = false;  // non-synthetic dataset: skip oracle comparisons
  }

  Rng rng(substream(cfg.seed, "eval"));
  const auto out = emotion_accuracy(model, ds, probe, emo_in, targets, cfg.eval.k, rng,
                                    cfg.eval.clips_per_pair, have_world ? &world : nullptr);

  write_confusion_csv((fs::path(cfg.out_dir) / "confusion.csv").string(), ds.emotions, out.confusion);
  write_confusion_svg((fs::path(cfg.out_dir) / "confusion.svg").string(), ds.emotions, out.confusion);

  json summary{{"accuracy", out.accuracy},
               {"correct", out.correct},
               {"total", out.total},
               {"input_emotion", ds.emotions[emo_in]},
               {"k", cfg.eval.k}};
  if (have_world) summary["mean_cosine_to_oracle"] = out.mean_cosine;
  std::ofstream jf((fs::path(cfg.out_dir) / "eval.json").string(), std::ios::binary);
  if (!jf) throw io_error("cannot write eval.json");
  jf << summary.dump(2) << "\n";

  std::cout << "accuracy " << num(out.accuracy) << " (" << out.correct << "/" << out.total << ")";
  if (have_world) std::cout << "  mean cosine to oracle " << num(out.mean_cosine);
  std::cout << "\n";
  return 0;
}

int run_eval(const Common& common, const std::string& ckpt_path, const std::string& data_path) {
  if (ckpt_path.empty()) throw usage_error("missing --ckpt (.cmck checkpoint path)");
  const Checkpoint ck = read_checkpoint(ckpt_path);
  RunCfg cfg = common.load(&ck.config);
  finalize(cfg);
  write_resolved(cfg, cfg.out_dir);
  const auto ds = load_dataset(data_path);
  resolve_dims(cfg.model, ds);
  if (cfg.model.precision == "float64") return eval_with<double>(cfg, ds, ck);
  return eval_with<float>(cfg, ds, ck);
}

// ---- kshot ------------------------------------------------------------------

template <class S>
int kshot_with(const RunCfg& cfg, const EmbeddingDataset& ds, const Checkpoint& ck) {
  auto model = model_from_checkpoint<S>(ck, cfg);
  const auto probe = fit_probe(ds, cfg.eval.probe);
  const int emo_in = emotion_or_default(ds, cfg.eval.input_emotion);
  const auto targets = eval_targets(ds, emo_in);

  OracleWorld world;
  const OracleWorld* wp = nullptr;
  try {
    world = world_from_provenance(ds.provenance);
    wp = &world;
  } catch (const Error&) {
  }

  const auto rows = kshot_sweep(model, ds, probe, emo_in, targets, cfg.eval.ks,
                                cfg.eval.eval_seeds, cfg.seed, cfg.eval.clips_per_pair, wp);
  write_kshot_csv((fs::path(cfg.out_dir) / "kshot.csv").string(), rows);
  write_kshot_svg((fs::path(cfg.out_dir) / "kshot.svg").string(), rows);
  for (const auto& r : rows)
    std::cout << "k=" << r.k << " accuracy=" << num(r.accuracy)
              << " mean_cosine=" << num(r.mean_cosine) << "\n";
  return 0;
}

int run_kshot(const Common& common, const std::string& ckpt_path, const std::string& data_path) {
  if (ckpt_path.empty()) throw usage_error("missing --ckpt (.cmck checkpoint path)");
  const Checkpoint ck = read_checkpoint(ckpt_path);
  RunCfg cfg = common.load(&ck.config);
  finalize(cfg);
  write_resolved(cfg, cfg.out_dir);
  const auto ds = load_dataset(data_path);
  resolve_dims(cfg.model, ds);
  if (cfg.model.precision == "float64") return kshot_with<double>(cfg, ds, ck);
  return kshot_with<float>(cfg, ds, ck);
}

// ---- gradcheck ---------------------------------------------------------------

int cmd_gradcheck(const Common& common, int seeds, double step, double tol) {
  RunCfg cfg = common.load();  // only the seed matters; the check pins its own tiny config
  const auto rep = run_gradcheck(seeds, cfg.seed, step, tol);
  std::printf("%-24s %s\n", "parameter group", "max rel err");
  for (const auto& g : rep.groups) std::printf("%-24s %.3e\n", g.group.c_str(), g.max_rel_err);
  std::printf("overall max %.3e over %d seeds (tolerance %.1e), %.1fs\n", rep.max_rel_err,
              rep.seeds, rep.tolerance, rep.seconds);
  std::printf("%s\n", rep.pass ? "PASS" : "FAIL");
  return rep.pass ? 0 : 1;
}

}  // namespace

int dispatch(int argc, const char* const* argv) {
  CLI::App app{"c-met: cross-modal emotion transfer on embedding streams"};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);

  std::array<Common, 6> commons;  // one per subcommand: option handles must not alias
  Common &c_gen = commons[0], &c_tr = commons[1], &c_inf = commons[2], &c_ev = commons[3],
         &c_ks = commons[4], &c_gc = commons[5];
  std::string data_path, ckpt_path, ckpt_out, resume_path, schedule_path, out_path;
  int gc_seeds = 20;
  double gc_step = 1e-5, gc_tol = 1e-4;

  auto* gen = app.add_subcommand("gen", "generate a synthetic world and write a .cmed dataset");
  c_gen.attach(gen);
  gen->add_option("--out", out_path, "output .cmed path (default: <out-dir>/data.cmed)");

  auto* tr = app.add_subcommand("train", "train a model on a .cmed dataset, write a .cmck checkpoint");
  c_tr.attach(tr);
  tr->add_option("--data", data_path, "input .cmed dataset")->required();
  tr->add_option("--ckpt-out", ckpt_out, "checkpoint path (default: <out-dir>/model.cmck)");
  tr->add_option("--resume", resume_path, "resume from an existing .cmck checkpoint");
  // frequently-swept fields get dedicated flags; everything else via --config
  auto* f_steps = tr->add_option("--steps", "training steps");
  auto* f_lr = tr->add_option("--lr", "learning rate");
  auto* f_batch = tr->add_option("--batch", "batch size");
  auto* f_k = tr->add_option("--k", "k-shot averaging factor");
  auto* f_prec = tr->add_option("--precision", "float32 | float64");

  auto* inf = app.add_subcommand("infer", "edit a clip stream along a schedule of target emotions");
  c_inf.attach(inf);
  inf->add_option("--ckpt", ckpt_path, "trained .cmck checkpoint")->required();
  inf->add_option("--data", data_path, "input .cmed dataset")->required();
  inf->add_option("--schedule", schedule_path,
                  "JSON: {\"input\":{\"identity\",\"emotion\",\"clips\"},"
                  "\"segments\":[{\"target\",\"windows\"}],\"k\"}")
      ->required();

  auto* ev = app.add_subcommand("eval", "evaluate emotion-transfer accuracy, write reports");
  c_ev.attach(ev);
  ev->add_option("--ckpt", ckpt_path, "trained .cmck checkpoint")->required();
  ev->add_option("--data", data_path, "input .cmed dataset")->required();
  auto* f_in_emo = ev->add_option("--input-emotion", "source emotion for evaluation pairs");
  auto* f_ek = ev->add_option("--k", "k-shot factor at evaluation");
  auto* f_probe = ev->add_option("--probe", "probe kind: centroid | softmax");
  auto* f_cpp = ev->add_option("--clips-per-pair", "clips evaluated per (identity, target)");

  auto* ks = app.add_subcommand("kshot", "sweep k and report accuracy per k");
  c_ks.attach(ks);
  ks->add_option("--ckpt", ckpt_path, "trained .cmck checkpoint")->required();
  ks->add_option("--data", data_path, "input .cmed dataset")->required();
  auto* f_ks = ks->add_option("--ks", "comma-separated k values (default 1,2,5,10)");
  auto* f_eseeds = ks->add_option("--eval-seeds", "evaluation seeds per k");

  auto* gc = app.add_subcommand("gradcheck", "finite-difference check of all parameter gradients");
  c_gc.attach(gc);
  gc->add_option("--seeds", gc_seeds, "number of random configurations")->capture_default_str();
  gc->add_option("--step", gc_step, "finite-difference step")->capture_default_str();
  gc->add_option("--tol", gc_tol, "max relative error tolerance")->capture_default_str();

  try {
    app.parse(argc, const_cast<char**>(argv));
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    const Common& common = gen->parsed()  ? c_gen
                           : tr->parsed() ? c_tr
                           : inf->parsed() ? c_inf
                           : ev->parsed()  ? c_ev
                           : ks->parsed()  ? c_ks
                                           : c_gc;
    common.select_backend();
    if (gen->parsed()) return run_gen(common, out_path);
    if (tr->parsed()) {
      // flag overrides folded into a JSON fragment so one code path applies them
      json overrides;
      if (f_steps->count()) overrides["train"]["steps"] = f_steps->as<long long>();
      if (f_lr->count()) overrides["train"]["lr"] = f_lr->as<double>();
      if (f_batch->count()) overrides["train"]["batch"] = f_batch->as<int>();
      if (f_k->count()) overrides["train"]["k"] = f_k->as<int>();
      if (f_prec->count()) overrides["model"]["precision"] = f_prec->as<std::string>();
      return run_train(common, data_path, ckpt_out, resume_path, overrides);
    }
    if (inf->parsed()) return run_infer(common, ckpt_path, data_path, schedule_path);
    if (ev->parsed()) {
      const Checkpoint ck = read_checkpoint(ckpt_path);
      RunCfg cfg = common.load(&ck.config);
      if (f_in_emo->count()) cfg.eval.input_emotion = f_in_emo->as<std::string>();
      if (f_ek->count()) cfg.eval.k = f_ek->as<int>();
      if (f_probe->count()) cfg.eval.probe = f_probe->as<std::string>();
      if (f_cpp->count()) cfg.eval.clips_per_pair = f_cpp->as<int>();
      finalize(cfg);
      write_resolved(cfg, cfg.out_dir);
      const auto ds = load_dataset(data_path);
      resolve_dims(cfg.model, ds);
      if (cfg.model.precision == "float64") return eval_with<double>(cfg, ds, ck);
      return eval_with<float>(cfg, ds, ck);
    }
    if (ks->parsed()) {
      const Checkpoint ck = read_checkpoint(ckpt_path);
      RunCfg cfg = common.load(&ck.config);
      if (f_ks->count()) {
        cfg.eval.ks.clear();
        for (const auto& part : CLI::detail::split(f_ks->as<std::string>(), ','))
          cfg.eval.ks.push_back(std::stoi(part));
      }
      if (f_eseeds->count()) cfg.eval.eval_seeds = f_eseeds->as<int>();
      finalize(cfg);
      write_resolved(cfg, cfg.out_dir);
      const auto ds = load_dataset(data_path);
      resolve_dims(cfg.model, ds);
      if (cfg.model.precision == "float64") return kshot_with<double>(cfg, ds, ck);
      return kshot_with<float>(cfg, ds, ck);
    }
    if (gc->parsed()) return cmd_gradcheck(common, gc_seeds, gc_step, gc_tol);
    throw usage_error("no subcommand given");
  } catch (const Error& e) {
    std::cerr << e.code() << ": " << e.what() << "\n";
    if (e.code() == "usage_error") {
      std::cerr << "run '" << argv[0] << " --help' for usage\n";
      return 2;
    }
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal_error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace cmet
