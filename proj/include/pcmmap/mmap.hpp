#pragma once

#include <chrono>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pcmmap/circuit.hpp"

namespace pcmmap {

// Disjoint evidence/query/hidden variable sets covering all circuit variables.
struct VariablePartition {
  std::vector<int> evidence;  // sorted variable indices
  std::vector<int> query;
  std::vector<int> hidden;

  int n() const { return static_cast<int>(evidence.size()); }
  int m() const { return static_cast<int>(query.size()); }
  int k() const { return static_cast<int>(hidden.size()); }

  // Validates disjointness, coverage, and m >= 1; throws InvalidPartition.
  static VariablePartition make(const Circuit& c, std::vector<int> evidence,
                                std::vector<int> query,
                                std::vector<int> hidden);
};

// Parses {"evidence": [...], "query": [...], "hidden": [...]} with variable
// names resolved against the circuit. Unlisted or unknown variables are an
// error.
VariablePartition parse_partition(const Circuit& c,
                                  const std::string& json_text);
VariablePartition load_partition(const Circuit& c, const std::string& path);
std::string partition_to_json(const Circuit& c, const VariablePartition& p);

struct MmapProblem {
  const Circuit* circuit = nullptr;
  VariablePartition partition;
  Assignment evidence;  // keys exactly the evidence set
};

MmapProblem make_problem(const Circuit& c, VariablePartition partition,
                         Assignment evidence);

struct MmapSolution {
  Assignment q;  // keys exactly the query set
  double log_score = 0.0;
  std::string method;
  std::chrono::duration<double> elapsed{0.0};
};

// ln p(e, q) in signed-log mode; -infinity when the marginal is 0.
// Throws OverlappingAssignments if e and q share a variable.
double score(const Circuit& c, const Assignment& e, const Assignment& q);

// Exhaustive optimum over all 2^M query assignments (guard M <= 20). Ties
// break to the lexicographically smallest bit string in query-variable order
// with 0 < 1.
MmapSolution brute_force_mmap(const MmapProblem& p, int threads = 0);
MmapSolution brute_force_mmap_serial(const MmapProblem& p);

// Upward pass with sum nodes replaced by max over weighted child values,
// then a root-to-leaves selection pass reading the query values off the
// chosen leaves. Argmax ties break to the lowest child index.
MmapSolution max_approx(const MmapProblem& p);

// p(V=1 | e) for each target, computed from one forward and one adjoint
// sweep. Throws ZeroEvidenceProbability when p(e) = 0.
std::vector<double> all_marginals(const Circuit& c, const Assignment& e,
                                  std::span<const int> targets);
// Same quantities by 2 evaluations per target; kept as the reference route.
std::vector<double> all_marginals_reference(const Circuit& c,
                                            const Assignment& e,
                                            std::span<const int> targets);

// Independent per-variable conditional argmax; ties at exactly 0.5 pick 0.
MmapSolution ml_approx(const MmapProblem& p);

// Greedy sequential conditioning: repeatedly fix the (variable, value) pair
// with the highest conditional probability given evidence and the assignment
// so far. Ties break to the lower variable index, then value 0.
MmapSolution seq_approx(const MmapProblem& p);

// Stochastic hill climbing: per round, take the best strictly-improving
// single-bit flip; on a plateau flip a uniformly random bit. Returns the
// best assignment ever visited. Deterministic in the seed. If best_trace is
// given it receives the best-ever score after each round (iters+1 entries
// including the initial state).
MmapSolution hill_climb(const MmapProblem& p, const Assignment& init,
                        int iters, std::uint64_t seed,
                        std::vector<double>* best_trace = nullptr);

// Problem/solution JSON round trip. The problem document references the
// circuit by path: {"circuit": "...", "partition": {...}, "evidence": {...}}.
struct LoadedProblem {
  Circuit circuit;
  VariablePartition partition;
  Assignment evidence;
};
LoadedProblem load_problem(const std::string& path);
std::string solution_to_json(const Circuit& c, const MmapSolution& s);

}  // namespace pcmmap
