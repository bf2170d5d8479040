// Acceptance suite: one pass/fail line per criterion, exit code = #failures.
// Every tolerance is pinned in code next to the check it gates.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "pcmmap/circuit.hpp"
#include "pcmmap/eval.hpp"
#include "pcmmap/mmap.hpp"
#include "pcmmap/neural.hpp"
#include "pcmmap/qpc.hpp"
#include "pcmmap/sampler.hpp"
#include "pcmmap/threads.hpp"
#include "support.hpp"

using namespace pcmmap;
using pcmmap::testing::gradient_rel_error;
using pcmmap::testing::load_fig1;
using pcmmap::testing::random_soft;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Failure {
  std::string detail;
};

void require(bool ok, const std::string& detail) {
  if (!ok) throw Failure{detail};
}

std::string fmt(double x) {
  std::ostringstream os;
  os.precision(6);
  os << x;
  return os.str();
}

// ---- shared generators -----------------------------------------------------

struct GradCase {
  Circuit circuit;
  VariablePartition partition;
  Assignment evidence;
};

// 100 random circuits with <= 300 nodes, <= 20 variables, random partitions.
std::vector<GradCase> gradient_cases() {
  std::vector<GradCase> cases;
  for (std::uint64_t i = 0; i < 100; ++i) {
    std::uint64_t seed = i;
    const int n_vars = 4 + static_cast<int>((i * 7) % 17);
    Circuit c = random_circuit(n_vars, 2, 2, seed);
    while (c.num_nodes() > 300) {
      seed += 10007;
      c = random_circuit(n_vars, 2, 2, seed);
    }
    GradCase gc{std::move(c), {}, {}};

    SplitMix64 rng = SplitMix64::substream(seed, 0xACC4);
    std::vector<int> order(n_vars);
    for (int v = 0; v < n_vars; ++v) order[v] = v;
    for (int v = n_vars - 1; v > 0; --v)
      std::swap(order[v], order[static_cast<int>(
                    rng.below(static_cast<std::uint64_t>(v) + 1))]);
    const int m =
        1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(n_vars / 2)));
    std::vector<int> query(order.begin(), order.begin() + m);
    std::vector<int> ev, hidden;
    for (std::size_t k = static_cast<std::size_t>(m); k < order.size(); ++k)
      (k % 2 ? hidden : ev).push_back(order[k]);
    gc.partition = VariablePartition::make(gc.circuit, ev, query, hidden);

    SplitMix64 srng = SplitMix64::substream(seed, 0xACC5);
    const Assignment full = sample_full(gc.circuit, srng);
    for (int v : gc.partition.evidence) gc.evidence.set(v, *full.get(v));
    cases.push_back(std::move(gc));
  }
  return cases;
}

double alpha_for(std::size_t i) {
  constexpr double kAlphas[3] = {0.0, 0.1, 1.0};
  return kAlphas[i % 3];
}

// ---- criteria --------------------------------------------------------------

std::string criterion_fig1_marginal() {
  Circuit c = load_fig1();
  Assignment q;
  q.set(2, true);
  q.set(3, false);
  const double p = marginal(c, q);
  require(std::abs(p - 0.0778) <= 1e-12,
          "marginal = " + fmt(p) + ", want 0.0778 within 1e-12");
  double best = std::numeric_limits<double>::infinity();
  for (int rep = 0; rep < 200; ++rep) {
    const auto t0 = Clock::now();
    volatile double sink = marginal(c, q);
    (void)sink;
    best = std::min(best, seconds_since(t0));
  }
  require(best < 1e-3, "single marginal took " + fmt(best * 1e3) + " ms");
  return "p = 0.0778 within 1e-12, " + fmt(best * 1e6) + " us per call";
}

std::string criterion_qpc_forward() {
  Circuit c = load_fig1();
  QpcContext ctx(c, VariablePartition::make(c, {}, {2, 3}, {0, 1}), {});
  const double v = ctx.value({0.99, 0.05});
  require(std::abs(v - 0.0832216) <= 1e-9,
          "qpc value = " + fmt(v) + ", want 0.0832216 within 1e-9");
  return "v' = " + fmt(v);
}

std::string criterion_leaf_substitution_gradients() {
  Circuit c = load_fig1();
  QpcContext ctx(c, VariablePartition::make(c, {}, {2, 3}, {0, 1}), {});
  const double d3 = ctx.grad_single({0.99, 0.05}, 0);
  const double d4 = ctx.grad_single({0.99, 0.05}, 1);
  require(std::abs(d3 - (-0.23016)) <= 1e-9,
          "dv/dX3c = " + fmt(d3) + ", want -0.23016 within 1e-9");
  require(std::abs(d4 - 0.063552) <= 1e-9,
          "dv/dX4c = " + fmt(d4) + ", want 0.063552 within 1e-9");
  return "dv/dX3c = " + fmt(d3) + ", dv/dX4c = " + fmt(d4);
}

std::string criterion_gradient_vs_finite_differences(
    const std::vector<GradCase>& cases) {
  const auto t0 = Clock::now();
  double worst = 0.0;
  for (std::size_t i = 0; i < cases.size(); ++i) {
    const GradCase& gc = cases[i];
    QpcContext ctx(gc.circuit, gc.partition, gc.evidence);
    const SoftAssignment qc = random_soft(i, gc.partition.m(), 0.05, 0.95);
    const double alpha = alpha_for(i);
    const std::vector<double> analytic = ctx.grad_loss(qc, alpha);
    std::vector<double> fd(qc.size());
    const double h = 1e-6;
    for (std::size_t j = 0; j < qc.size(); ++j) {
      SoftAssignment hi = qc, lo = qc;
      hi[j] += h;
      lo[j] -= h;
      fd[j] =
          (ctx.loss(hi, alpha).total - ctx.loss(lo, alpha).total) / (2.0 * h);
    }
    worst = std::max(worst, gradient_rel_error(analytic, fd));
  }
  const double elapsed = seconds_since(t0);
  require(worst <= 1e-5, "worst relative error " + fmt(worst));
  require(elapsed < 30.0, "suite took " + fmt(elapsed) + " s (budget 30)");
  return "100 circuits, worst rel err " + fmt(worst) + ", " + fmt(elapsed) +
         " s";
}

std::string criterion_gradient_path_equivalence(
    const std::vector<GradCase>& cases) {
  double worst = 0.0;
  for (std::size_t i = 0; i < cases.size(); ++i) {
    const GradCase& gc = cases[i];
    QpcContext ctx(gc.circuit, gc.partition, gc.evidence);
    const SoftAssignment qc = random_soft(i + 1000, gc.partition.m(), 0.02,
                                          0.98);
    const double alpha = alpha_for(i);
    const std::vector<double> fast = ctx.grad_loss(qc, alpha);
    const std::vector<double> slow = ctx.grad_loss_substitution(qc, alpha);
    worst = std::max(worst, gradient_rel_error(fast, slow));
  }
  require(worst <= 1e-10, "worst relative error " + fmt(worst));
  return "reverse mode == substitution passes, worst rel err " + fmt(worst);
}

std::string criterion_discrete_consistency() {
  int checked = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    auto gc = pcmmap::testing::make_random_problem(
        seed, 4 + static_cast<int>(seed % 12), 2, 2);
    QpcContext ctx(gc.circuit, gc.partition, gc.evidence);
    SplitMix64 rng = SplitMix64::substream(seed, 0xD15C);
    for (int rep = 0; rep < 20; ++rep) {
      SoftAssignment qc(gc.partition.m());
      Assignment q;
      for (int j = 0; j < gc.partition.m(); ++j) {
        const bool bit = rng.bernoulli(0.5);
        qc[j] = bit ? 1.0 : 0.0;
        q.set(gc.partition.query[j], bit);
      }
      const double a = ctx.value(qc);
      const double b =
          marginal(gc.circuit, Assignment::merged(gc.evidence, q));
      require(a == b, "qpc_value != marginal (exact) at seed " +
                          std::to_string(seed));
      ++checked;
    }
  }
  require(checked == 1000, "expected 1000 pairs, got " + std::to_string(checked));

  // Relaxation direction: the continuous minimum over the step-0.05 lattice
  // cannot exceed the discrete minimum. Full lattice for M <= 4; above that
  // the lattice is sampled but always includes all 2^M corners.
  for (int m = 1; m <= 8; ++m) {
    Circuit c = random_circuit(m + 2, 2, 2, 7000 + m);
    std::vector<int> query(m), rest;
    for (int v = 0; v < m; ++v) query[v] = v;
    for (int v = m; v < m + 2; ++v) rest.push_back(v);
    VariablePartition part =
        VariablePartition::make(c, {}, query, rest);
    QpcContext ctx(c, part, {});

    double discrete_min = std::numeric_limits<double>::infinity();
    for (std::uint64_t mask = 0; mask < (1ull << m); ++mask) {
      SoftAssignment qc(m);
      for (int j = 0; j < m; ++j) qc[j] = (mask >> j) & 1 ? 1.0 : 0.0;
      discrete_min = std::min(discrete_min, ctx.loss(qc, 0.0).total);
    }
    double continuous_min = discrete_min;  // corners are lattice points
    const int levels = 21;
    std::uint64_t lattice = 1;
    for (int j = 0; j < m; ++j) lattice *= levels;
    if (lattice <= 200000) {
      for (std::uint64_t x = 0; x < lattice; ++x) {
        std::uint64_t rest_x = x;
        SoftAssignment qc(m);
        for (int j = 0; j < m; ++j) {
          qc[j] = 0.05 * static_cast<double>(rest_x % levels);
          rest_x /= levels;
        }
        continuous_min = std::min(continuous_min, ctx.loss(qc, 0.0).total);
      }
    } else {
      SplitMix64 rng = SplitMix64::substream(31, static_cast<std::uint64_t>(m));
      for (int x = 0; x < 100000; ++x) {
        SoftAssignment qc(m);
        for (int j = 0; j < m; ++j)
          qc[j] = 0.05 * static_cast<double>(rng.below(levels));
        continuous_min = std::min(continuous_min, ctx.loss(qc, 0.0).total);
      }
    }
    require(continuous_min <= discrete_min + 1e-12,
            "continuous minimum above discrete at M = " + std::to_string(m));
  }
  return "1000 exact matches; lattice minima below discrete minima for M <= 8";
}

std::string criterion_oracle_dominance() {
  const auto t0 = Clock::now();
  int n_checked = 0;
  for (std::uint64_t i = 0; i < 200; ++i) {
    auto gc = pcmmap::testing::make_random_problem(
        i + 5000, 6 + static_cast<int>(i % 15), 2, 2, i % 2 == 0);
    if (gc.partition.m() > 12) continue;
    MmapProblem p = gc.problem();
    const MmapSolution best = brute_force_mmap(p, 1);

    std::vector<MmapSolution> sols{max_approx(p), ml_approx(p), seq_approx(p)};
    MlpModel model =
        init_model({std::max(1, gc.partition.n()), 8, gc.partition.m()}, i);
    if (gc.partition.n() >= 1) sols.push_back(predict_mmap(model, p));
    const std::size_t n_base = sols.size();
    for (std::size_t b = 0; b < n_base; ++b)
      sols.push_back(hill_climb(p, sols[b].q, 100, i));

    for (const MmapSolution& s : sols) {
      require(s.log_score <= best.log_score + 1e-9,
              s.method + " beat brute force on problem " + std::to_string(i));
      ++n_checked;
    }
  }
  const double elapsed = seconds_since(t0);
  require(elapsed < 60.0, "suite took " + fmt(elapsed) + " s (budget 60)");
  return std::to_string(n_checked) + " solutions dominated, " + fmt(elapsed) +
         " s";
}

std::string criterion_sampler_fidelity() {
  const auto t0 = Clock::now();
  Circuit c = load_fig1();
  const int n = 100000;
  int counts[4] = {};
  for (int i = 0; i < n; ++i) {
    SplitMix64 rng = SplitMix64::substream(7, i);
    const Assignment full = sample_full(c, rng);
    for (int v = 0; v < 4; ++v) counts[v] += *full.get(v) ? 1 : 0;
  }
  std::string freqs;
  for (int v = 0; v < 4; ++v) {
    Assignment one;
    one.set(v, true);
    const double p = marginal(c, one);
    const double emp = counts[v] / static_cast<double>(n);
    const double bound = 4.0 * std::sqrt(p * (1.0 - p) / n);
    require(std::abs(emp - p) <= bound,
            c.variables()[v] + " frequency " + fmt(emp) + " vs " + fmt(p));
    freqs += (v ? ", " : "") + c.variables()[v] + "=" + fmt(emp);
  }
  const double elapsed = seconds_since(t0);
  require(elapsed < 5.0, "sampling took " + fmt(elapsed) + " s (budget 5)");
  return freqs + ", " + fmt(elapsed) + " s";
}

std::string criterion_fig1_brute_force() {
  Circuit c = load_fig1();
  MmapProblem p =
      make_problem(c, VariablePartition::make(c, {}, {2, 3}, {0, 1}), {});
  const MmapSolution s = brute_force_mmap(p);
  require(*s.q.get(2) == false && *s.q.get(3) == true,
          "optimum is not (X3=0, X4=1)");
  require(std::abs(std::exp(s.log_score) - 0.4798) <= 1e-9,
          "optimum probability " + fmt(std::exp(s.log_score)));
  double total = 0.0;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) {
      Assignment q;
      q.set(2, a == 1);
      q.set(3, b == 1);
      total += marginal(c, q);
    }
  require(std::abs(total - 1.0) <= 1e-9, "joints sum to " + fmt(total));
  return "optimum (X3=0, X4=1) with p = 0.4798; joints sum to 1";
}

struct DeskScaleRun {
  Circuit circuit;
  ProblemSet test_problems;
  EvidenceDataset train_data;
  TrainConfig cfg;
  TrainResult at_alpha_0;

  double mean_min_soft(const MlpModel& m) const {
    double acc = 0.0;
    int count = 0;
    for (int i = 0; i < test_problems.size(); ++i) {
      std::vector<std::uint8_t> bits(test_problems.partition.n());
      for (std::size_t j = 0; j < bits.size(); ++j)
        bits[j] = *test_problems.evidences[i].get(
                      test_problems.partition.evidence[j])
                      ? 1
                      : 0;
      for (double q : forward(m, bits, RunMode::Eval)) {
        acc += std::min(q, 1.0 - q);
        ++count;
      }
    }
    return acc / count;
  }
};

DeskScaleRun make_desk_scale_run() {
  DeskScaleRun run{random_circuit(20, 1, 3, 424242), {}, {}, {}, {}};
  run.test_problems =
      generate_problems(run.circuit, 0.5, ProblemMode::MMAP, 200, 99);
  run.train_data =
      generate_dataset(run.circuit, run.test_problems.partition, 2000, 4242, 1);
  run.cfg.hidden_dims = {64, 64};
  run.cfg.alpha = 0.0;
  run.cfg.learning_rate = 1e-3;
  run.cfg.epochs = 20;
  run.cfg.batch_size = 128;
  run.cfg.seed = 11;
  run.at_alpha_0 = train_ssmp(run.circuit, run.test_problems.partition,
                              run.train_data, run.cfg, 1);
  return run;
}

std::string criterion_desk_scale_ssmp(const DeskScaleRun& run,
                                      double elapsed_train) {
  const auto t0 = Clock::now();
  const TrainHistory& h = run.at_alpha_0.history;
  require(h.size() == 20, "expected 20 epochs");
  require(h.back().mean_loss < h.front().mean_loss,
          "loss did not decrease: first " + fmt(h.front().mean_loss) +
              ", last " + fmt(h.back().mean_loss));

  const MlpModel& model = run.at_alpha_0.model;
  std::vector<SolverHandle> methods{
      {"ml", [](const MmapProblem& p) { return ml_approx(p); }},
      {"ssmp", [&](const MmapProblem& p) { return predict_mmap(model, p); }},
  };
  EvalReport report = compare(methods, run.test_problems, 1, 1);
  const double ml_mean = report.methods[0].mean_ll;
  const double ssmp_mean = report.methods[1].mean_ll;
  require(ssmp_mean >= ml_mean - 0.01,
          "ssmp mean " + fmt(ssmp_mean) + " vs ml mean " + fmt(ml_mean));
  const double elapsed = elapsed_train + seconds_since(t0);
  require(elapsed < 300.0, "run took " + fmt(elapsed) + " s (budget 300)");
  return "circuit " + std::to_string(run.circuit.num_nodes()) +
         " nodes; loss " + fmt(h.front().mean_loss) + " -> " +
         fmt(h.back().mean_loss) + "; ssmp " + fmt(ssmp_mean) + " vs ml " +
         fmt(ml_mean) + "; " + fmt(elapsed) + " s";
}

std::string criterion_entropy_penalty(const DeskScaleRun& run) {
  TrainConfig sharp = run.cfg;
  sharp.alpha = 100.0;
  const TrainResult hard = train_ssmp(
      run.circuit, run.test_problems.partition, run.train_data, sharp, 1);
  const double soft_min = run.mean_min_soft(run.at_alpha_0.model);
  const double hard_min = run.mean_min_soft(hard.model);
  require(hard_min < soft_min, "mean min(q, 1-q) did not decrease: alpha=0 " +
                                   fmt(soft_min) + ", alpha=100 " +
                                   fmt(hard_min));
  return "mean min(q,1-q): " + fmt(soft_min) + " (alpha=0) -> " +
         fmt(hard_min) + " (alpha=100)";
}

std::string criterion_hill_climb_monotone() {
  int n_problems = 0;
  for (std::uint64_t i = 0; i < 200; ++i) {
    auto gc = pcmmap::testing::make_random_problem(
        i + 5000, 6 + static_cast<int>(i % 15), 2, 2, i % 2 == 0);
    if (gc.partition.m() > 12) continue;
    MmapProblem p = gc.problem();
    Assignment init;
    SplitMix64 rng = SplitMix64::substream(i, 0xC1B0);
    for (int v : gc.partition.query) init.set(v, rng.bernoulli(0.5));
    std::vector<double> trace_a, trace_b;
    const MmapSolution a = hill_climb(p, init, 100, i, &trace_a);
    const MmapSolution b = hill_climb(p, init, 100, i, &trace_b);
    require(trace_a == trace_b, "trajectories differ for identical seeds");
    require(a.q == b.q && a.log_score == b.log_score,
            "solutions differ for identical seeds");
    for (std::size_t k = 1; k < trace_a.size(); ++k)
      require(trace_a[k] >= trace_a[k - 1],
              "best-ever score decreased at iteration " + std::to_string(k));
    ++n_problems;
  }
  return std::to_string(n_problems) + " problems, all monotone and repeatable";
}

std::string criterion_percent_diff() {
  const double d = percent_diff(-2.0, -2.5);
  require(d == 20.0, "percent_diff(-2.0, -2.5) = " + fmt(d) + ", want 20.0");
  return "percent_diff(-2.0, -2.5) == 20.0 exactly";
}

}  // namespace

int main() {
  set_default_threads(1);

  int failures = 0;
  int id = 0;
  auto run = [&](const std::string& name, std::function<std::string()> fn) {
    ++id;
    try {
      const std::string detail = fn();
      std::printf("[PASS] %2d %s: %s\n", id, name.c_str(), detail.c_str());
    } catch (const Failure& f) {
      ++failures;
      std::printf("[FAIL] %2d %s: %s\n", id, name.c_str(), f.detail.c_str());
    } catch (const std::exception& e) {
      ++failures;
      std::printf("[FAIL] %2d %s: unexpected error: %s\n", id, name.c_str(),
                  e.what());
    }
    std::fflush(stdout);
  };

  run("fig1 marginal", criterion_fig1_marginal);
  run("qpc forward value", criterion_qpc_forward);
  run("leaf-substitution gradients", criterion_leaf_substitution_gradients);

  const std::vector<GradCase> cases = gradient_cases();
  run("gradient vs finite differences",
      [&] { return criterion_gradient_vs_finite_differences(cases); });
  run("gradient path equivalence",
      [&] { return criterion_gradient_path_equivalence(cases); });
  run("discrete consistency", criterion_discrete_consistency);
  run("oracle dominance", criterion_oracle_dominance);
  run("sampler fidelity", criterion_sampler_fidelity);
  run("fig1 brute force", criterion_fig1_brute_force);

  const auto t_train = Clock::now();
  DeskScaleRun desk = make_desk_scale_run();
  const double train_elapsed = seconds_since(t_train);
  run("desk-scale ssmp",
      [&] { return criterion_desk_scale_ssmp(desk, train_elapsed); });
  run("entropy penalty", [&] { return criterion_entropy_penalty(desk); });
  run("hill-climb monotonicity", criterion_hill_climb_monotone);
  run("percent-diff formula", criterion_percent_diff);

  if (failures == 0)
    std::printf("all %d criteria passed\n", id);
  else
    std::printf("%d of %d criteria FAILED\n", failures, id);
  return failures == 0 ? 0 : 1;
}
