#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "pcmmap/errors.hpp"
#include "pcmmap/signed_log.hpp"

namespace pcmmap {

enum class NodeKind : std::uint8_t { Sum, Product, Leaf };

struct LeafLabel {
  int var = -1;
  bool negated = false;
};

// Partial assignment of binary values to variables, keyed by variable index.
class Assignment {
 public:
  Assignment() = default;

  void set(int var, bool value);
  std::optional<bool> get(int var) const;
  bool contains(int var) const { return get(var).has_value(); }

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  // Sorted by variable index.
  const std::vector<std::pair<int, std::uint8_t>>& entries() const {
    return entries_;
  }

  // Throws OverlappingAssignments if the two share any variable.
  static Assignment merged(const Assignment& a, const Assignment& b);

  bool operator==(const Assignment&) const = default;

 private:
  std::vector<std::pair<int, std::uint8_t>> entries_;
};

// One value per leaf node, indexed by leaf ordinal (see Circuit::leaf_ordinal).
// Values may be negative during gradient passes.
using LeafValues = std::vector<double>;

// Smooth, decomposable probabilistic circuit: a rooted DAG of sum, product,
// and leaf nodes. Immutable after load; evaluation is a pure function over
// (circuit, leaf values) and safe to call from many threads.
//
// Nodes carry dense indices assigned in topological order (children before
// parents), so a forward pass is a plain loop over 0..num_nodes()-1. The ids
// from the source document are kept for error reporting only.
class Circuit {
 public:
  int num_nodes() const { return static_cast<int>(kind_.size()); }
  int num_variables() const { return static_cast<int>(variables_.size()); }
  int num_leaves() const { return static_cast<int>(leaf_nodes_.size()); }
  int root() const { return root_; }

  NodeKind kind(int n) const { return kind_[n]; }
  int count(NodeKind k) const;

  std::span<const int> children(int n) const {
    return {child_ids_.data() + child_begin_[n],
            static_cast<std::size_t>(child_begin_[n + 1] - child_begin_[n])};
  }
  // Sum-edge weights, aligned with children(n). Product entries hold 1.0.
  std::span<const double> weights(int n) const {
    return {child_weights_.data() + child_begin_[n],
            static_cast<std::size_t>(child_begin_[n + 1] - child_begin_[n])};
  }
  std::span<const double> log_weights(int n) const {
    return {child_log_weights_.data() + child_begin_[n],
            static_cast<std::size_t>(child_begin_[n + 1] - child_begin_[n])};
  }

  LeafLabel leaf(int n) const { return leaf_[n]; }
  // Dense 0..num_leaves()-1 position of a leaf node; -1 for internal nodes.
  int leaf_ordinal(int n) const { return leaf_ordinal_[n]; }
  const std::vector<int>& leaf_nodes() const { return leaf_nodes_; }

  const std::vector<std::string>& variables() const { return variables_; }
  int variable_index(std::string_view name) const;  // -1 if unknown

  std::int64_t external_id(int n) const { return external_id_[n]; }
  const std::vector<int>& topo_order() const { return topo_order_; }

  bool scope_contains(int node, int var) const {
    return (scope_[static_cast<std::size_t>(node) * scope_words_ +
                   static_cast<std::size_t>(var) / 64] >>
            (static_cast<unsigned>(var) % 64)) &
           1u;
  }

  // FNV-1a over a canonical serialization; used for dataset provenance.
  std::uint64_t content_hash() const;

 private:
  friend class CircuitBuilder;
  friend struct CircuitAssembler;

  std::vector<std::string> variables_;
  std::vector<NodeKind> kind_;
  std::vector<int> child_begin_;  // size num_nodes()+1
  std::vector<int> child_ids_;
  std::vector<double> child_weights_;
  std::vector<double> child_log_weights_;
  std::vector<LeafLabel> leaf_;
  std::vector<int> leaf_ordinal_;
  std::vector<int> leaf_nodes_;
  std::vector<std::int64_t> external_id_;
  std::vector<int> topo_order_;
  std::vector<std::uint64_t> scope_;
  int scope_words_ = 0;
  int root_ = -1;
};

// Incremental construction used by the parser, the random generator, and
// tests. Node ids handed out are also the external ids of the result.
class CircuitBuilder {
 public:
  explicit CircuitBuilder(std::vector<std::string> variables);

  int add_leaf(int var, bool negated);
  int add_leaf(std::string_view var_name, bool negated);
  int add_sum(std::vector<int> children, std::vector<double> weights);
  int add_product(std::vector<int> children);

  // Validates all structural invariants; throws ValidationError naming the
  // offending node id on failure.
  Circuit finish(int root) &&;

 private:
  friend Circuit parse_circuit(const std::string&);

  std::vector<std::string> variables_;
  std::vector<NodeKind> kind_;
  std::vector<std::vector<int>> children_;
  std::vector<std::vector<double>> weights_;
  std::vector<LeafLabel> leaf_;
  std::vector<std::int64_t> external_id_;
};

struct ValidationReport {
  struct Property {
    std::string name;
    bool pass = true;
    std::vector<std::int64_t> offending;  // external node ids
  };
  Property acyclic{"acyclic", true, {}};
  Property normalized{"normalized", true, {}};
  Property smooth{"smooth", true, {}};
  Property decomposable{"decomposable", true, {}};

  bool all_pass() const {
    return acyclic.pass && normalized.pass && smooth.pass && decomposable.pass;
  }
  std::string to_string() const;
};

enum class EvalMode { Linear, SignedLog };

// Bottom-up value recursion: leaves take the given values, sum nodes weighted
// sums, product nodes products. Linear mode throws NumericOverflow if the
// root value is non-finite. SignedLog mode tracks (sign, log-magnitude) per
// node and converts the root back to a signed real.
double evaluate(const Circuit& c, const LeafValues& lv, EvalMode mode);
double evaluate_linear(const Circuit& c, const LeafValues& lv);
SignedLog evaluate_signed_log(const Circuit& c, const LeafValues& lv);

// Leaf function for marginal queries: leaves inconsistent with the assignment
// get 0, everything else 1.
LeafValues leaf_values_for_marginal(const Circuit& c, const Assignment& q);

// Probability of a partial assignment (linear mode).
double marginal(const Circuit& c, const Assignment& q);

// ln p(q) through the signed-log engine; -infinity when p(q) = 0.
double log_marginal(const Circuit& c, const Assignment& q);

ValidationReport validate(const Circuit& c);

// Full per-property report for an unparsed document. Structural problems
// (malformed JSON, unknown kinds, missing nodes) still throw ParseError;
// property violations land in the report instead of throwing.
ValidationReport validate_text(const std::string& json_text);

Circuit parse_circuit(const std::string& json_text);
Circuit load_circuit(const std::string& path);
std::string circuit_to_json(const Circuit& c);

// Deterministic generator of valid smooth, decomposable, normalized circuits.
// depth levels of sum/product alternation, `fanout` mixture components per
// sum; below the depth budget variables factor independently.
Circuit random_circuit(int n_vars, int depth, int fanout, std::uint64_t seed);

// Parses "X3=1,X4=0" against the circuit's variable table.
Assignment parse_assignment(const Circuit& c, std::string_view text);

}  // namespace pcmmap
