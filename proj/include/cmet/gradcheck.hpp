#pragma once

#include <chrono>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "cmet/model.hpp"
#include "cmet/synth.hpp"
#include "cmet/trainer.hpp"

namespace cmet {

// Central-difference check of the full training objective against the
// reverse-mode gradients, in double precision on a tiny world/model so the
// truncation error of the difference quotient stays far below the tolerance.

struct GradCheckGroup {
  std::string group;
  double max_rel_err = 0;
};

struct GradCheckReport {
  std::vector<GradCheckGroup> groups;  // per parameter-group maxima
  double max_rel_err = 0;
  int seeds = 0;
  double tolerance = 0;
  bool pass = false;
  double seconds = 0;
};

inline WorldCfg gradcheck_world() {
  WorldCfg w;
  w.emotions = 3;
  w.identities = 2;
  w.d_a = 6;
  w.d_v = 4;
  w.T = 2;
  w.emotion_dim = 2;
  w.margin = 2.0;
  w.samples_per_pair = 4;
  w.sigma_a = w.sigma_v = 0.1;
  return w;
}

inline ModelCfg gradcheck_model() {
  ModelCfg m;
  m.d = 8;
  m.layers = 1;
  m.heads = 2;
  m.ffn = 16;
  m.d_a = 6;
  m.d_v = 4;
  m.T = 2;
  m.precision = "float64";
  return m;
}

// Strips the trailing ".w"/".b"/... component so rows aggregate per layer
// piece (proj_a, enc0.attn, enc0.ffn, head, ...).
inline std::string param_group(const std::string& name) {
  const auto dot = name.rfind('.');
  return dot == std::string::npos ? name : name.substr(0, dot);
}

inline GradCheckReport run_gradcheck(int n_seeds = 20, uint64_t seed0 = 1, double h = 1e-5,
                                     double tolerance = 1e-4) {
  const auto t_start = std::chrono::steady_clock::now();
  GradCheckReport rep;
  rep.seeds = n_seeds;
  rep.tolerance = tolerance;
  std::map<std::string, double> worst;

  for (int s = 0; s < n_seeds; ++s) {
    const uint64_t seed = seed0 + (uint64_t)s;
    const auto ds = gen_dataset(gen_world(gradcheck_world(), seed));
    auto model = build_model<double>(gradcheck_model(), seed);
    const auto ix = SamplerIndex::build(ds, {});
    Rng sampler(substream(seed, "sampler"));
    const auto batch = make_batch(ds, ix, sampler, 2, 2, 0.5);

    auto loss_value = [&]() { return ad::scalar_value(batch_loss(model, batch).total); };

    zero_grads(model.params);
    ad::backward(batch_loss(model, batch).total);
    std::vector<std::vector<double>> analytic;
    for (const auto& p : model.params) analytic.push_back(p->grad.data);

    for (size_t pi = 0; pi < model.params.size(); ++pi) {
      auto& vals = model.params[pi]->val.data;
      const std::string group = param_group(model.params[pi]->name);
      for (size_t i = 0; i < vals.size(); ++i) {
        const double keep = vals[i];
        vals[i] = keep + h;
        const double up = loss_value();
        vals[i] = keep - h;
        const double down = loss_value();
        vals[i] = keep;
        const double fd = (up - down) / (2 * h);
        const double an = analytic[pi][i];
        // the absolute floor keeps near-zero gradients from blowing up the ratio
        const double rel = std::fabs(fd - an) / std::max({std::fabs(fd), std::fabs(an), 1e-3});
        auto& slot = worst[group];
        slot = std::max(slot, rel);
        rep.max_rel_err = std::max(rep.max_rel_err, rel);
      }
    }
  }

  for (const auto& [group, err] : worst) rep.groups.push_back({group, err});
  rep.pass = rep.max_rel_err < tolerance;
  rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return rep;
}

}  // namespace cmet
