#include "pcmmap/qpc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace pcmmap {

namespace {

double clamped_entropy(double q) {
  const double qc = std::clamp(q, kEntropyEps, 1.0 - kEntropyEps);
  return qc * std::log(qc) + (1.0 - qc) * std::log(1.0 - qc);
}

double entropy_grad(double q) {
  const double qc = std::clamp(q, kEntropyEps, 1.0 - kEntropyEps);
  return std::log(qc) - std::log(1.0 - qc);
}

}  // namespace

QpcContext::QpcContext(const Circuit& c, const VariablePartition& partition,
                       const Assignment& evidence)
    : circuit_(&c), partition_(partition), evidence_(evidence) {
  if (evidence_.size() != partition_.evidence.size())
    throw InvalidPartition("evidence must assign exactly the evidence set");
  for (int v : partition_.evidence)
    if (!evidence_.contains(v))
      throw InvalidPartition("evidence missing variable index " +
                             std::to_string(v));

  role_.assign(c.num_leaves(), Role::Hidden);
  query_slot_.assign(c.num_leaves(), -1);
  for (int n : c.leaf_nodes()) {
    const LeafLabel l = c.leaf(n);
    const int o = c.leaf_ordinal(n);
    auto qit = std::lower_bound(partition_.query.begin(),
                                partition_.query.end(), l.var);
    if (qit != partition_.query.end() && *qit == l.var) {
      role_[o] = l.negated ? Role::QueryNeg : Role::QueryPos;
      query_slot_[o] = static_cast<int>(qit - partition_.query.begin());
      continue;
    }
    auto ev = evidence_.get(l.var);
    if (ev.has_value())
      role_[o] = (*ev == l.negated) ? Role::EvidenceInconsistent
                                    : Role::EvidenceConsistent;
  }
}

void QpcContext::check_dims(const SoftAssignment& qc) const {
  if (static_cast<int>(qc.size()) != num_query())
    throw DimensionMismatch("soft assignment has length " +
                            std::to_string(qc.size()) + ", expected " +
                            std::to_string(num_query()));
}

LeafValues QpcContext::leaf_values(const SoftAssignment& qc) const {
  check_dims(qc);
  LeafValues lv(role_.size(), 1.0);
  for (std::size_t o = 0; o < role_.size(); ++o) {
    switch (role_[o]) {
      case Role::QueryPos:
        lv[o] = qc[query_slot_[o]];
        break;
      case Role::QueryNeg:
        lv[o] = 1.0 - qc[query_slot_[o]];
        break;
      case Role::EvidenceInconsistent:
        lv[o] = 0.0;
        break;
      default:
        break;  // consistent evidence and hidden leaves stay 1
    }
  }
  return lv;
}

double QpcContext::value(const SoftAssignment& qc) const {
  return evaluate_linear(*circuit_, leaf_values(qc));
}

LossValue QpcContext::loss(const SoftAssignment& qc, double alpha) const {
  const SignedLog v = evaluate_signed_log(*circuit_, leaf_values(qc));
  if (v.sign <= 0)
    throw NonpositiveCircuitValue(
        "circuit value is not positive; the loss is undefined");
  LossValue out;
  out.alpha = alpha;
  out.nll = -v.log_mag;
  out.entropy_term = 0.0;
  for (double q : qc) out.entropy_term += clamped_entropy(q);
  out.total = out.nll - alpha * out.entropy_term;
  return out;
}

double QpcContext::grad_single(const SoftAssignment& qc, int j) const {
  check_dims(qc);
  if (j < 0 || j >= num_query())
    throw DimensionMismatch("query index out of range");
  LeafValues lv = leaf_values(qc);
  for (std::size_t o = 0; o < role_.size(); ++o) {
    if (query_slot_[o] != j) continue;
    lv[o] = role_[o] == Role::QueryPos ? 1.0 : -1.0;
  }
  return evaluate_signed_log(*circuit_, lv).to_real();
}

std::vector<double> QpcContext::grad_loss(const SoftAssignment& qc,
                                          double alpha) const {
  const Circuit& c = *circuit_;
  const LeafValues lv = leaf_values(qc);

  // Forward sweep in signed-log space.
  const int n_nodes = c.num_nodes();
  std::vector<SignedLog> val(n_nodes);
  for (int n = 0; n < n_nodes; ++n) {
    switch (c.kind(n)) {
      case NodeKind::Leaf:
        val[n] = SignedLog::from_real(lv[c.leaf_ordinal(n)]);
        break;
      case NodeKind::Sum: {
        auto ch = c.children(n);
        auto lw = c.log_weights(n);
        SignedLog acc = SignedLog::zero();
        for (std::size_t i = 0; i < ch.size(); ++i)
          acc = acc + scale_log(val[ch[i]], lw[i]);
        val[n] = acc;
        break;
      }
      case NodeKind::Product: {
        SignedLog acc = SignedLog::one();
        for (int m : c.children(n)) acc = acc * val[m];
        val[n] = acc;
        break;
      }
    }
  }
  const SignedLog root = val[c.root()];
  if (root.sign <= 0)
    throw NonpositiveCircuitValue(
        "circuit value is not positive; the loss is undefined");

  // Adjoint sweep: nodes are topologically ordered, so a reverse index loop
  // sees every parent before its children.
  std::vector<SignedLog> adj(n_nodes, SignedLog::zero());
  adj[c.root()] = SignedLog::one();
  for (int n = n_nodes - 1; n >= 0; --n) {
    if (adj[n].is_zero() || c.kind(n) == NodeKind::Leaf) continue;
    auto ch = c.children(n);
    if (c.kind(n) == NodeKind::Sum) {
      auto lw = c.log_weights(n);
      for (std::size_t i = 0; i < ch.size(); ++i)
        adj[ch[i]] = adj[ch[i]] + scale_log(adj[n], lw[i]);
    } else {
      int zero_count = 0;
      int zero_child = -1;
      SignedLog nonzero_prod = SignedLog::one();
      for (int m : ch) {
        if (val[m].is_zero()) {
          ++zero_count;
          zero_child = m;
        } else {
          nonzero_prod = nonzero_prod * val[m];
        }
      }
      if (zero_count == 0) {
        for (int m : ch)
          adj[m] = adj[m] + adj[n] * (nonzero_prod / val[m]);
      } else if (zero_count == 1) {
        adj[zero_child] = adj[zero_child] + adj[n] * nonzero_prod;
      }
    }
  }

  // dv'/dq_j = sum of adjoints of Q_j leaves minus those of -Q_j leaves.
  std::vector<SignedLog> dv(num_query(), SignedLog::zero());
  for (int n : c.leaf_nodes()) {
    const int o = c.leaf_ordinal(n);
    const int j = query_slot_[o];
    if (j < 0) continue;
    SignedLog a = adj[n];
    if (role_[o] == Role::QueryNeg) a.sign = -a.sign;
    dv[j] = dv[j] + a;
  }

  std::vector<double> grad(num_query());
  for (int j = 0; j < num_query(); ++j)
    grad[j] = -(dv[j] / root).to_real() - alpha * entropy_grad(qc[j]);
  return grad;
}

std::vector<double> QpcContext::grad_loss_substitution(
    const SoftAssignment& qc, double alpha) const {
  const SignedLog v = evaluate_signed_log(*circuit_, leaf_values(qc));
  if (v.sign <= 0)
    throw NonpositiveCircuitValue(
        "circuit value is not positive; the loss is undefined");
  std::vector<double> grad(num_query());
  for (int j = 0; j < num_query(); ++j) {
    LeafValues lv = leaf_values(qc);
    for (std::size_t o = 0; o < role_.size(); ++o) {
      if (query_slot_[o] != static_cast<int>(j)) continue;
      lv[o] = role_[o] == Role::QueryPos ? 1.0 : -1.0;
    }
    const SignedLog dv = evaluate_signed_log(*circuit_, lv);
    grad[j] = -(dv / v).to_real() - alpha * entropy_grad(qc[j]);
  }
  return grad;
}

Assignment round_soft(const SoftAssignment& qc,
                      const std::vector<int>& query_vars) {
  if (qc.size() != query_vars.size())
    throw DimensionMismatch("soft assignment length does not match query set");
  Assignment out;
  for (std::size_t j = 0; j < qc.size(); ++j)
    out.set(query_vars[j], qc[j] > 0.5);
  return out;
}

}  // namespace pcmmap
