#pragma once

// Shared helpers for the test binaries: deterministic random tensors and a
// central-difference gradient check run against the autodiff graph.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "cmet/autodiff.hpp"
#include "cmet/rng.hpp"
#include "cmet/tensor.hpp"

namespace testutil {

template <class S>
cmet::Tensor<S> rand_tensor(cmet::Shape shape, cmet::Rng& rng, double lo = -1.0, double hi = 1.0) {
  cmet::Tensor<S> t(std::move(shape));
  for (auto& v : t.data) v = (S)rng.uniform(lo, hi);
  return t;
}

// Central-difference check of d(loss)/d(param) for every scalar in `params`.
// `f` must rebuild the whole graph from the params' *current* values on each
// call and return the scalar loss node. Returns the worst relative error,
// with a floor on the denominator so near-zero gradients don't inflate the
// ratio. Double precision only -- float FD noise would drown the signal.
inline double max_rel_err_fd(const std::vector<cmet::ad::Var<double>>& params,
                             const std::function<cmet::ad::Var<double>()>& f, double h = 1e-6,
                             double floor_den = 1e-4) {
  for (const auto& p : params) cmet::ad::zero_grad(p);
  auto loss = f();
  cmet::ad::backward(loss);
  std::vector<std::vector<double>> analytic;
  for (const auto& p : params)
    analytic.emplace_back(p->grad.data.begin(), p->grad.data.end());

  double worst = 0;
  for (size_t pi = 0; pi < params.size(); ++pi) {
    auto& val = params[pi]->val.data;
    for (size_t i = 0; i < val.size(); ++i) {
      const double keep = val[i];
      val[i] = keep + h;
      const double up = cmet::ad::scalar_value(f());
      val[i] = keep - h;
      const double dn = cmet::ad::scalar_value(f());
      val[i] = keep;
      const double fd = (up - dn) / (2 * h);
      const double rel = std::fabs(fd - analytic[pi][i]) /
                         std::max({std::fabs(fd), std::fabs(analytic[pi][i]), floor_den});
      worst = std::max(worst, rel);
    }
  }
  return worst;
}

}  // namespace testutil
