// Wall-time comparison of the OpenMP kernels against their serial reference
// twins. Each kernel pair computes identical results; only the schedule
// differs.

#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <vector>

#include "pcmmap/circuit.hpp"
#include "pcmmap/eval.hpp"
#include "pcmmap/mmap.hpp"
#include "pcmmap/neural.hpp"
#include "pcmmap/sampler.hpp"
#include "pcmmap/threads.hpp"

using namespace pcmmap;

namespace {

using Clock = std::chrono::steady_clock;

double time_median(const std::function<void()>& fn, int reps = 3) {
  std::vector<double> t(reps);
  for (int r = 0; r < reps; ++r) {
    const auto t0 = Clock::now();
    fn();
    t[r] = std::chrono::duration<double>(Clock::now() - t0).count();
  }
  std::sort(t.begin(), t.end());
  return t[reps / 2];
}

void row(const char* name, double serial, double parallel) {
  std::printf("%-24s %10.3fs %10.3fs %8.2fx\n", name, serial, parallel,
              serial / parallel);
}

}  // namespace

int main(int argc, char** argv) {
  int threads = default_threads();
  if (argc > 1) threads = std::max(1, std::atoi(argv[1]));
  std::printf("comparing 1 thread vs %d threads\n", threads);
  std::printf("%-24s %11s %11s %9s\n", "kernel", "serial", "parallel",
              "speedup");

  Circuit circuit = random_circuit(20, 2, 2, 7);
  VariablePartition part = VariablePartition::make(
      circuit, {0, 1, 2, 3, 4, 5, 6, 7}, {8, 9, 10, 11, 12, 13},
      {14, 15, 16, 17, 18, 19});

  {
    const int n = 200000;
    const double serial = time_median(
        [&] { generate_dataset(circuit, part, n, 1, 1); });
    const double parallel = time_median(
        [&] { generate_dataset(circuit, part, n, 1, threads); });
    row("sample 200k rows", serial, parallel);
  }

  {
    Circuit big = random_circuit(18, 2, 2, 11);
    std::vector<int> query;
    for (int v = 0; v < 16; ++v) query.push_back(v);
    MmapProblem p = make_problem(
        big, VariablePartition::make(big, {16}, query, {17}),
        [&] {
          SplitMix64 rng(3);
          Assignment full = sample_full(big, rng);
          Assignment e;
          e.set(16, *full.get(16));
          return e;
        }());
    const double serial = time_median([&] { brute_force_mmap_serial(p); });
    const double parallel = time_median([&] { brute_force_mmap(p, threads); });
    row("brute force M=16", serial, parallel);
  }

  {
    EvidenceDataset data = generate_dataset(circuit, part, 4000, 5, threads);
    TrainConfig cfg;
    cfg.hidden_dims = {64, 64};
    cfg.epochs = 1;
    cfg.batch_size = 128;
    cfg.seed = 3;
    const double serial =
        time_median([&] { train_ssmp(circuit, part, data, cfg, 1); });
    const double parallel =
        time_median([&] { train_ssmp(circuit, part, data, cfg, threads); });
    row("train epoch (4k rows)", serial, parallel);
  }

  {
    ProblemSet ps = generate_problems(circuit, 0.4, ProblemMode::MMAP, 100, 9);
    std::vector<SolverHandle> methods{
        {"max", [](const MmapProblem& p) { return max_approx(p); }},
        {"ml", [](const MmapProblem& p) { return ml_approx(p); }},
        {"seq", [](const MmapProblem& p) { return seq_approx(p); }},
    };
    const double serial = time_median([&] { compare(methods, ps, 1, 1); });
    const double parallel =
        time_median([&] { compare(methods, ps, 1, threads); });
    row("eval sweep (100x3)", serial, parallel);
  }
  return 0;
}
