#pragma once

#include <cstdint>
#include <vector>

#include "pcmmap/circuit.hpp"
#include "pcmmap/mmap.hpp"

namespace pcmmap {

// Continuous query vector q^c in [0,1]^M, one entry per query variable.
using SoftAssignment = std::vector<double>;

struct LossValue {
  double total = 0.0;         // nll - alpha * entropy_term
  double nll = 0.0;           // -ln v'
  double entropy_term = 0.0;  // sum_j q ln q + (1-q) ln(1-q), <= 0
  double alpha = 0.0;
};

// The query-specific view of a circuit: the original circuit plus a
// role-aware leaf-value generator. Query leaves take q_j^c / 1-q_j^c,
// evidence leaves contradicting the evidence take 0, everything else 1.
// No second circuit is materialized. Immutable and thread-safe.
class QpcContext {
 public:
  QpcContext(const Circuit& c, const VariablePartition& partition,
             const Assignment& evidence);

  const Circuit& circuit() const { return *circuit_; }
  const VariablePartition& partition() const { return partition_; }
  const Assignment& evidence() const { return evidence_; }
  int num_query() const { return partition_.m(); }

  LeafValues leaf_values(const SoftAssignment& qc) const;

  // v'(root); equals marginal(c, e + q) bit-for-bit when qc is 0/1-valued.
  double value(const SoftAssignment& qc) const;

  // total = -ln v' - alpha * sum_j [q ln q + (1-q) ln(1-q)], entropy logs
  // eps-clamped. Throws NonpositiveCircuitValue when v' <= 0.
  LossValue loss(const SoftAssignment& qc, double alpha) const;

  // dv'/dq_j^c by the leaf-substitution pass: leaf Q_j^c -> 1, leaf
  // -Q_j^c -> -1, everything else as in leaf_values, one signed-log sweep.
  double grad_single(const SoftAssignment& qc, int j) const;

  // Gradient of loss(): entry j = -(dv'/dq_j)/v' - alpha (ln q_j - ln(1-q_j)).
  // One reverse-mode sweep over the DAG.
  std::vector<double> grad_loss(const SoftAssignment& qc, double alpha) const;

  // Same quantity assembled from M leaf-substitution passes; the slower
  // route kept for cross-checking the reverse sweep.
  std::vector<double> grad_loss_substitution(const SoftAssignment& qc,
                                             double alpha) const;

 private:
  enum class Role : std::uint8_t {
    QueryPos,
    QueryNeg,
    EvidenceConsistent,
    EvidenceInconsistent,
    Hidden,
  };

  void check_dims(const SoftAssignment& qc) const;

  const Circuit* circuit_;
  VariablePartition partition_;
  Assignment evidence_;
  std::vector<Role> role_;        // per leaf ordinal
  std::vector<int> query_slot_;   // per leaf ordinal; -1 unless a query leaf
};

// Entropy clamp for loss() and grad_loss().
inline constexpr double kEntropyEps = 1e-12;

// Rounds a soft assignment with the strict indicator [q > 0.5]; exact ties
// map to 0.
Assignment round_soft(const SoftAssignment& qc,
                      const std::vector<int>& query_vars);

}  // namespace pcmmap
