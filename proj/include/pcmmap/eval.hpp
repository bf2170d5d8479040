#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "pcmmap/circuit.hpp"
#include "pcmmap/mmap.hpp"
#include "pcmmap/neural.hpp"

namespace pcmmap {

enum class ProblemMode { MPE, MMAP };

// A batch of MMAP problems over one circuit and one partition, differing in
// their sampled evidence values.
struct ProblemSet {
  const Circuit* circuit = nullptr;
  VariablePartition partition;
  std::vector<Assignment> evidences;
  double qr = 0.0;
  ProblemMode mode = ProblemMode::MPE;
  std::uint64_t seed = 0;
  std::string source;

  int size() const { return static_cast<int>(evidences.size()); }
  MmapProblem problem(int i) const;
};

// Query set: round(qr * |X|) variables drawn by seed. MPE: every remaining
// variable is evidence. MMAP: half (rounded down) of the remaining variables
// are evidence, the rest hidden; an empty evidence set after rounding is a
// DegeneratePartition error. Evidence values come from top-down samples of
// the circuit projected on the evidence set.
ProblemSet generate_problems(const Circuit& c, double qr, ProblemMode mode,
                             int n, std::uint64_t seed);

struct SolverHandle {
  std::string name;
  std::function<MmapSolution(const MmapProblem&)> run;
};

struct MethodResult {
  std::string name;
  std::vector<double> scores;  // -inf on solver error
  std::vector<std::uint8_t> error_flags;
  std::vector<double> times_s;  // median over timing repetitions
  double mean_ll = 0.0;         // over finite scores
  double stddev_ll = 0.0;
  double mean_time_s = 0.0;
  int n_excluded = 0;  // -inf scores left out of the mean
};

struct EvalReport {
  std::vector<MethodResult> methods;
  std::uint64_t circuit_hash = 0;
  double qr = 0.0;
  ProblemMode mode = ProblemMode::MPE;
  std::uint64_t seed = 0;
  int n_problems = 0;
  int timing_reps = 5;
  double score_round = 1e-9;  // contingency comparisons round to this
  std::string source;
};

// Runs every method on every problem. Per-problem solver errors are recorded
// as -inf scores with an error flag and never abort the sweep. Problems fan
// out across threads; the methods for one problem run sequentially so the
// median-of-reps timings are uncontended.
EvalReport compare(std::span<const SolverHandle> methods, const ProblemSet& ps,
                   int timing_reps = 5, int threads = 0);

struct ContingencyTable {
  std::vector<std::string> methods;
  std::vector<std::vector<int>> wins;  // wins[i][j]: i beat j, strictly
  int n_datasets = 0;

  std::string to_text() const;
  std::string to_csv() const;
};

// Cell (i,j) counts reports where method i's mean log-likelihood strictly
// beats method j's after rounding both to score_round; ties count for
// neither side.
ContingencyTable contingency(std::span<const EvalReport> reports);

// (ll_a - ll_b) / |ll_b| * 100.
double percent_diff(double ll_a, double ll_b);

// Labels for supervised training: per problem, a seeded random initial
// assignment refined by hill climbing for `iters` rounds.
std::vector<LabeledExample> label_with_hill_climb(const ProblemSet& ps,
                                                  int iters,
                                                  std::uint64_t seed);

std::string report_to_json(const EvalReport& r);
EvalReport report_from_json(const std::string& text);
EvalReport load_report(const std::string& path);
std::string report_to_csv(const EvalReport& r);

}  // namespace pcmmap
