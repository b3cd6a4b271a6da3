// Kernel and model-step timings, serial vs OpenMP. The two backends produce
// bitwise-identical results (tests assert that); this tool is about speed.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "cmet/kernels.hpp"
#include "cmet/model.hpp"
#include "cmet/rng.hpp"
#include "cmet/synth.hpp"
#include "cmet/trainer.hpp"

using namespace cmet;

namespace {

double time_ms(const std::function<void()>& fn, int reps) {
  fn();  // warm-up
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < reps; ++i) fn();
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count() /
         reps;
}

void row(const std::string& name, double serial_ms, double omp_ms) {
  std::printf("%-34s %10.3f %10.3f %9.2fx\n", name.c_str(), serial_ms, omp_ms,
              omp_ms > 0 ? serial_ms / omp_ms : 0.0);
}

}  // namespace

int main(int argc, char** argv) {
  const int reps = std::max(1, argc > 1 ? std::atoi(argv[1]) : 20);
  std::printf("OpenMP: %s, max threads %d, %d reps\n", kernels::openmp_available() ? "yes" : "no",
              kernels::max_threads(), reps);
  std::printf("%-34s %10s %10s %9s\n", "kernel", "serial ms", "openmp ms", "speedup");

  Rng rng(42);
  auto fill = [&](std::vector<float>& v) {
    for (auto& x : v) x = (float)rng.normal();
  };

  {
    const int m = 256, k = 256, n = 256;
    std::vector<float> a((size_t)m * k), b((size_t)k * n), c((size_t)m * n);
    fill(a);
    fill(b);
    auto run = [&] { kernels::matmul_nn(a.data(), b.data(), c.data(), m, k, n, false); };
    kernels::set_backend(kernels::Backend::serial);
    const double s = time_ms(run, reps);
    kernels::set_backend(kernels::Backend::openmp);
    const double o = time_ms(run, reps);
    row("matmul 256x256x256", s, o);
  }
  {
    const int t = 512, cin = 64, cout = 64, ksz = 3;
    std::vector<float> x((size_t)t * cin), w((size_t)ksz * cin * cout), bias(cout),
        y((size_t)t * cout);
    fill(x);
    fill(w);
    fill(bias);
    auto run = [&] {
      kernels::conv1d(x.data(), w.data(), bias.data(), y.data(), t, cin, cout, ksz, 1, 1);
    };
    kernels::set_backend(kernels::Backend::serial);
    const double s = time_ms(run, reps);
    kernels::set_backend(kernels::Backend::openmp);
    const double o = time_ms(run, reps);
    row("conv1d T=512 64->64 k=3", s, o);
  }
  {
    const int outer = 64, len = 512;
    std::vector<float> x((size_t)outer * len), y(x.size());
    fill(x);
    auto run = [&] { kernels::softmax_lines(x.data(), y.data(), outer, len, 1); };
    kernels::set_backend(kernels::Backend::serial);
    const double s = time_ms(run, reps);
    kernels::set_backend(kernels::Backend::openmp);
    const double o = time_ms(run, reps);
    row("softmax 64x512", s, o);
  }
  {
    const int rows = 512, cols = 256;
    std::vector<float> x((size_t)rows * cols), g(cols, 1.0f), b(cols, 0.0f), y(x.size()),
        mean(rows), rstd(rows);
    fill(x);
    auto run = [&] {
      kernels::layer_norm_rows(x.data(), g.data(), b.data(), 1e-5f, y.data(), mean.data(),
                               rstd.data(), rows, cols);
    };
    kernels::set_backend(kernels::Backend::serial);
    const double s = time_ms(run, reps);
    kernels::set_backend(kernels::Backend::openmp);
    const double o = time_ms(run, reps);
    row("layer_norm 512x256", s, o);
  }

  // full training step on the acceptance-scale model
  {
    WorldCfg wc;
    wc.identities = 4;
    auto ds = gen_dataset(gen_world(wc, 1));
    ModelCfg mc;
    mc.d = 64;
    mc.layers = 2;
    mc.heads = 4;
    mc.ffn = 128;
    resolve_dims(mc, ds);
    auto step_time = [&]() {
      auto model = build_model<float>(mc, 1);
      AdamW<float> opt;
      opt.init(model.params);
      Rng sampler(substream(1, "sampler"));
      const auto ix = SamplerIndex::build(ds, {});
      auto run = [&] {
        auto batch = make_batch(ds, ix, sampler, 16, 10, 0.5);
        zero_grads(model.params);
        auto bl = batch_loss(model, batch);
        ad::backward(bl.total);
        clip_gradients(model.params, 1.0);
        opt.step(model.params);
      };
      return time_ms(run, std::max(1, reps / 4));
    };
    kernels::set_backend(kernels::Backend::serial);
    const double s = step_time();
    kernels::set_backend(kernels::Backend::openmp);
    const double o = step_time();
    row("train step d=64 L2 B=16", s, o);
  }
  kernels::set_backend(kernels::Backend::serial);
  return 0;
}
