#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "pcmmap/circuit.hpp"
#include "pcmmap/mmap.hpp"
#include "pcmmap/rng.hpp"
#include "pcmmap/sampler.hpp"

namespace pcmmap::testing {

inline std::string fixture(const std::string& name) {
  return std::string(PCMMAP_FIXTURES_DIR) + "/" + name;
}

inline Circuit load_fig1() { return load_circuit(fixture("fig1.json")); }

// Independent oracle: p(q) as the sum of full-joint probabilities over all
// completions of q, where each full joint is itself a circuit evaluation of a
// complete assignment. Exponential in the number of free variables.
inline double marginal_by_enumeration(const Circuit& c, const Assignment& q) {
  std::vector<int> free_vars;
  for (int v = 0; v < c.num_variables(); ++v)
    if (!q.contains(v)) free_vars.push_back(v);
  const std::uint64_t total = 1ull << free_vars.size();
  double sum = 0.0;
  for (std::uint64_t mask = 0; mask < total; ++mask) {
    Assignment full = q;
    for (std::size_t i = 0; i < free_vars.size(); ++i)
      full.set(free_vars[i], (mask >> i) & 1);
    sum += marginal(c, full);
  }
  return sum;
}

// Relative error between two gradient vectors, ||a - b|| / max(||b||, floor).
inline double gradient_rel_error(const std::vector<double>& a,
                                 const std::vector<double>& b) {
  double diff = 0.0, ref = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    ref += b[i] * b[i];
  }
  return std::sqrt(diff) / std::max(std::sqrt(ref), 1e-12);
}

// A random MMAP problem whose evidence is a projection of a circuit sample,
// so p(e) > 0 by construction.
struct RandomProblem {
  Circuit circuit;
  VariablePartition partition;
  Assignment evidence;

  MmapProblem problem() const {
    return make_problem(circuit, partition, evidence);
  }
};

inline RandomProblem make_random_problem(std::uint64_t seed, int n_vars,
                                         int depth, int fanout,
                                         bool with_hidden = true) {
  RandomProblem rp{random_circuit(n_vars, depth, fanout, seed), {}, {}};
  SplitMix64 rng = SplitMix64::substream(seed, 0x7E57);
  std::vector<int> order(n_vars);
  for (int i = 0; i < n_vars; ++i) order[i] = i;
  for (int i = n_vars - 1; i > 0; --i)
    std::swap(order[i],
              order[static_cast<int>(rng.below(static_cast<std::uint64_t>(i) + 1))]);
  const int m = 1 + static_cast<int>(rng.below(
                        static_cast<std::uint64_t>(std::max(1, n_vars / 2))));
  std::vector<int> query(order.begin(), order.begin() + m);
  std::vector<int> rest(order.begin() + m, order.end());
  std::vector<int> evidence_vars, hidden_vars;
  for (std::size_t i = 0; i < rest.size(); ++i) {
    if (with_hidden && i % 2 == 1)
      hidden_vars.push_back(rest[i]);
    else
      evidence_vars.push_back(rest[i]);
  }
  rp.partition = VariablePartition::make(rp.circuit, evidence_vars, query,
                                         hidden_vars);
  SplitMix64 sample_rng = SplitMix64::substream(seed, 0x5A3F);
  const Assignment full = sample_full(rp.circuit, sample_rng);
  for (int v : rp.partition.evidence) rp.evidence.set(v, *full.get(v));
  return rp;
}

// Random soft assignment with entries in [lo, hi].
inline std::vector<double> random_soft(std::uint64_t seed, int m, double lo,
                                       double hi) {
  SplitMix64 rng = SplitMix64::substream(seed, 0x50F7);
  std::vector<double> qc(m);
  for (double& x : qc) x = rng.uniform(lo, hi);
  return qc;
}

}  // namespace pcmmap::testing
