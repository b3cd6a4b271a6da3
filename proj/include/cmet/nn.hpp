#pragma once

#include <cmath>
#include <vector>

#include "cmet/autodiff.hpp"
#include "cmet/errors.hpp"
#include "cmet/rng.hpp"
#include "cmet/tensor.hpp"

namespace cmet {

// Classic sinusoidal position table: row p, columns (2k, 2k+1) hold
// sin(p / 10000^{2k/d}) and cos(p / 10000^{2k/d}).
template <class S>
Tensor<S> sinusoidal_pe(int positions, int d) {
  if (d % 2 != 0) throw config_error("sinusoidal_pe: d must be even, got " + std::to_string(d));
  if (positions < 1) throw config_error("sinusoidal_pe: positions must be >= 1");
  Tensor<S> out(Shape{positions, d});
  for (int p = 0; p < positions; ++p)
    for (int k = 0; 2 * k < d; ++k) {
      const double ang = p / std::pow(10000.0, (2.0 * k) / d);
      out.data[(size_t)p * d + 2 * k] = (S)std::sin(ang);
      out.data[(size_t)p * d + 2 * k + 1] = (S)std::cos(ang);
    }
  return out;
}

template <class S>
void init_uniform(Tensor<S>& t, Rng& rng, double bound) {
  for (auto& v : t.data) v = (S)rng.uniform(-bound, bound);
}

// L2 norm over all parameter gradients taken together.
template <class S>
double global_grad_norm(const std::vector<ad::Var<S>>& params) {
  double acc = 0;
  for (const auto& p : params)
    for (S g : p->grad.data) acc += (double)g * (double)g;
  return std::sqrt(acc);
}

// Scales all gradients so their global norm is at most max_norm.
// Returns the scale applied (1 when no clipping happened or max_norm <= 0).
template <class S>
double clip_gradients(const std::vector<ad::Var<S>>& params, double max_norm) {
  if (max_norm <= 0) return 1.0;
  const double norm = global_grad_norm(params);
  if (norm <= max_norm) return 1.0;
  const double scale = max_norm / norm;
  for (const auto& p : params)
    for (auto& g : p->grad.data) g = (S)((double)g * scale);
  return scale;
}

// AdamW with decoupled weight decay: the decay term scales the parameter
// directly and never enters the moment estimates.
template <class S>
struct AdamW {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
  long long step_count = 0;
  std::vector<Tensor<S>> m, v;

  void init(const std::vector<ad::Var<S>>& params) {
    m.clear();
    v.clear();
    for (const auto& p : params) {
      m.push_back(Tensor<S>::zeros(p->val.shape));
      v.push_back(Tensor<S>::zeros(p->val.shape));
    }
    step_count = 0;
  }

  void step(const std::vector<ad::Var<S>>& params) {
    if (m.size() != params.size())
      throw usage_error("adamw_step: optimizer tracks " + std::to_string(m.size()) + " params, got " +
                        std::to_string(params.size()));
    ++step_count;
    const double bc1 = 1.0 - std::pow(beta1, (double)step_count);
    const double bc2 = 1.0 - std::pow(beta2, (double)step_count);
    for (size_t i = 0; i < params.size(); ++i) {
      auto& p = params[i];
      if (!p->val.same_shape(m[i]))
        throw usage_error("adamw_step: shape mismatch on '" + p->name + "'");
      for (size_t j = 0; j < p->val.data.size(); ++j) {
        const double g = (double)p->grad.data[j];
        const double mm = beta1 * (double)m[i].data[j] + (1.0 - beta1) * g;
        const double vv = beta2 * (double)v[i].data[j] + (1.0 - beta2) * g * g;
        m[i].data[j] = (S)mm;
        v[i].data[j] = (S)vv;
        const double mhat = mm / bc1;
        const double vhat = vv / bc2;
        const double upd = mhat / (std::sqrt(vhat) + eps) + weight_decay * (double)p->val.data[j];
        p->val.data[j] = (S)((double)p->val.data[j] - lr * upd);
      }
    }
  }
};

template <class S>
void zero_grads(const std::vector<ad::Var<S>>& params) {
  for (const auto& p : params) ad::zero_grad(p);
}

}  // namespace cmet
