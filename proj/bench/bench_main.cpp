// Timing comparison between the serial reference kernels / forward pass and
// the OpenMP-parallel paths. Numerical agreement is asserted as part of each
// run; kernel pairs must match bitwise, the two forward implementations to
// 1e-10 relative.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "ser/linalg.hpp"
#include "ser/model.hpp"
#include "ser/reference.hpp"
#include "ser/rng.hpp"

using namespace ser;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

lin::Matrix random_matrix(int r, int c, Rng& rng) {
  lin::Matrix m(r, c);
  for (double& v : m.data) v = rng.normal();
  return m;
}

void bench_matmul(int n, int reps) {
  Rng rng(11);
  lin::Matrix a = random_matrix(n, n, rng);
  lin::Matrix b = random_matrix(n, n, rng);
  lin::Matrix out_serial(n, n), out_parallel(n, n);

  auto t0 = Clock::now();
  for (int i = 0; i < reps; ++i) lin::matmul_serial(a, b, out_serial);
  double serial_s = seconds_since(t0);

  t0 = Clock::now();
  for (int i = 0; i < reps; ++i) lin::matmul(a, b, out_parallel);
  double parallel_s = seconds_since(t0);

  bool identical = out_serial.data == out_parallel.data;
  std::printf("matmul %4dx%-4d  serial %8.3f ms/iter  parallel %8.3f ms/iter  speedup %5.2fx  %s\n",
              n, n, serial_s / reps * 1e3, parallel_s / reps * 1e3, serial_s / parallel_s,
              identical ? "bitwise-equal" : "MISMATCH");
}

void bench_forward(int observations) {
  ModelConfig cfg;
  cfg.embed_dim = 32;
  cfg.heads = 4;
  cfg.daily_layers = 2;
  cfg.mlp_layers = 2;
  cfg.max_events = 16;
  cfg.mode = PanelMode::daily;

  const int entities = 500, actions = 50, stocks = 100;
  ModelParams params = init_params(cfg, entities, actions, stocks, 5);

  Rng rng(17);
  Panel panel;
  panel.mode = PanelMode::daily;
  std::vector<int32_t> stock_indices;
  for (int i = 0; i < observations; ++i) {
    std::vector<CanonicalEvent> events;
    int count = 1 + static_cast<int>(rng.uniform_index(12));
    for (int e = 0; e < count; ++e) {
      events.push_back({static_cast<int32_t>(2 + rng.uniform_index(entities - 2)),
                        static_cast<int32_t>(2 + rng.uniform_index(actions - 2)),
                        static_cast<int32_t>(2 + rng.uniform_index(entities - 2))});
    }
    panel.observations.push_back(build_observation(
        i, Date::from_ymd(2020, 1, 1).plus_days(i / 50), events, 0.0, cfg.max_events));
    stock_indices.push_back(static_cast<int32_t>(1 + rng.uniform_index(stocks - 1)));
  }

  auto t0 = Clock::now();
  std::vector<double> reference(panel.observations.size());
  for (std::size_t i = 0; i < panel.observations.size(); ++i)
    reference[i] = ref::forward_obs(cfg, params, panel.observations[i], stock_indices[i]);
  double serial_s = seconds_since(t0);

  t0 = Clock::now();
  std::vector<double> parallel = predict_panel(cfg, params, panel, stock_indices, true);
  double parallel_s = seconds_since(t0);

  double max_rel = 0.0;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    double denom = std::max({std::fabs(reference[i]), std::fabs(parallel[i]), 1e-12});
    max_rel = std::max(max_rel, std::fabs(reference[i] - parallel[i]) / denom);
  }
  std::printf(
      "forward %5d obs    serial %8.3f ms      parallel %8.3f ms      speedup %5.2fx  max-rel %.2e %s\n",
      observations, serial_s * 1e3, parallel_s * 1e3, serial_s / parallel_s, max_rel,
      max_rel < 1e-10 ? "(ok)" : "(MISMATCH)");
}

}  // namespace

int main() {
#ifdef _OPENMP
  std::printf("openmp threads: %d\n", omp_get_max_threads());
#else
  std::printf("openmp: disabled at build time\n");
#endif
  bench_matmul(64, 200);
  bench_matmul(256, 20);
  bench_matmul(512, 5);
  bench_forward(2000);
  return 0;
}
