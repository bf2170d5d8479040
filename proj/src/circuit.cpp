#include "pcmmap/circuit.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "pcmmap/rng.hpp"

namespace pcmmap {

// Ingestion form shared by the parser, the builder, and validate(); node
// slots are dense but in arbitrary order.
struct Raw {
  std::vector<std::string> variables;
  std::vector<NodeKind> kind;
  std::vector<std::vector<int>> children;
  std::vector<std::vector<double>> weights;
  std::vector<LeafLabel> leaf;
  std::vector<std::int64_t> ext;
  int root = -1;

  int size() const { return static_cast<int>(kind.size()); }
};

struct CircuitAssembler {
  static Circuit assemble(Raw&& raw);
};

namespace {

constexpr double kWeightSumTolerance = 1e-9;

std::string node_list(const std::vector<std::int64_t>& ids) {
  std::ostringstream os;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) os << ", ";
    os << ids[i];
  }
  return os.str();
}

struct TopoResult {
  bool acyclic = true;
  std::int64_t cycle_node = -1;
  std::vector<int> order;  // children before parents, covers every node
};

TopoResult topo_sort(const Raw& raw) {
  TopoResult out;
  std::vector<std::uint8_t> state(raw.size(), 0);  // 0 new, 1 open, 2 done
  // Iterative DFS; the frame second field is the next child position.
  std::vector<std::pair<int, std::size_t>> stack;
  for (int start = 0; start < raw.size(); ++start) {
    if (state[start] != 0) continue;
    stack.emplace_back(start, 0);
    state[start] = 1;
    while (!stack.empty()) {
      auto& [node, pos] = stack.back();
      if (pos < raw.children[node].size()) {
        int child = raw.children[node][pos++];
        if (state[child] == 1) {
          out.acyclic = false;
          out.cycle_node = raw.ext[child];
          return out;
        }
        if (state[child] == 0) {
          state[child] = 1;
          stack.emplace_back(child, 0);
        }
      } else {
        state[node] = 2;
        out.order.push_back(node);
        stack.pop_back();
      }
    }
  }
  return out;
}

std::vector<std::uint8_t> reachable_from_root(const Raw& raw) {
  std::vector<std::uint8_t> seen(raw.size(), 0);
  std::vector<int> stack{raw.root};
  seen[raw.root] = 1;
  while (!stack.empty()) {
    int n = stack.back();
    stack.pop_back();
    for (int c : raw.children[n])
      if (!seen[c]) {
        seen[c] = 1;
        stack.push_back(c);
      }
  }
  return seen;
}

// Variable-set bitmask per node, for smoothness/decomposability checks.
std::vector<std::vector<std::uint64_t>> compute_scopes(
    const Raw& raw, const std::vector<int>& topo) {
  const std::size_t words = (raw.variables.size() + 63) / 64;
  std::vector<std::vector<std::uint64_t>> scope(raw.size());
  for (int n : topo) {
    auto& s = scope[n];
    s.assign(words, 0);
    if (raw.kind[n] == NodeKind::Leaf) {
      s[static_cast<std::size_t>(raw.leaf[n].var) / 64] |=
          1ull << (static_cast<unsigned>(raw.leaf[n].var) % 64);
    } else {
      for (int c : raw.children[n])
        for (std::size_t w = 0; w < words; ++w) s[w] |= scope[c][w];
    }
  }
  return scope;
}

ValidationReport check_raw(const Raw& raw) {
  ValidationReport report;

  TopoResult topo = topo_sort(raw);
  if (!topo.acyclic) {
    report.acyclic.pass = false;
    report.acyclic.offending.push_back(topo.cycle_node);
    // Scope analysis needs an acyclic graph; these cannot be established.
    report.smooth.pass = false;
    report.smooth.offending.push_back(topo.cycle_node);
    report.decomposable.pass = false;
    report.decomposable.offending.push_back(topo.cycle_node);
  }

  for (int n = 0; n < raw.size(); ++n) {
    if (raw.kind[n] != NodeKind::Sum) continue;
    double sum = 0.0;
    bool positive = true;
    for (double w : raw.weights[n]) {
      if (!(w > 0.0)) positive = false;
      sum += w;
    }
    if (!positive || std::abs(sum - 1.0) > kWeightSumTolerance) {
      report.normalized.pass = false;
      report.normalized.offending.push_back(raw.ext[n]);
    }
  }

  if (!topo.acyclic) return report;

  auto scope = compute_scopes(raw, topo.order);
  for (int n = 0; n < raw.size(); ++n) {
    if (raw.kind[n] == NodeKind::Sum) {
      for (std::size_t i = 1; i < raw.children[n].size(); ++i) {
        if (scope[raw.children[n][i]] != scope[raw.children[n][0]]) {
          report.smooth.pass = false;
          report.smooth.offending.push_back(raw.ext[n]);
          break;
        }
      }
    } else if (raw.kind[n] == NodeKind::Product) {
      const std::size_t words = scope.empty() ? 0 : scope[n].size();
      std::vector<std::uint64_t> seen(words, 0);
      for (int c : raw.children[n]) {
        bool overlap = false;
        for (std::size_t w = 0; w < words; ++w) {
          if (seen[w] & scope[c][w]) overlap = true;
          seen[w] |= scope[c][w];
        }
        if (overlap) {
          report.decomposable.pass = false;
          report.decomposable.offending.push_back(raw.ext[n]);
          break;
        }
      }
    }
  }
  return report;
}

}  // namespace

Circuit CircuitAssembler::assemble(Raw&& raw) {
  if (raw.root < 0 || raw.root >= raw.size())
    throw ParseError("root references an unknown node");
  for (int n = 0; n < raw.size(); ++n) {
    if (raw.kind[n] != NodeKind::Leaf && raw.children[n].empty())
      throw ValidationError("node " + std::to_string(raw.ext[n]) +
                            " has no children");
  }

  TopoResult topo = topo_sort(raw);
  if (!topo.acyclic)
    throw ValidationError("cycle through node " +
                          std::to_string(topo.cycle_node));
  std::vector<std::uint8_t> reached = reachable_from_root(raw);
  for (int n = 0; n < raw.size(); ++n)
    if (!reached[n])
      throw ValidationError("node " + std::to_string(raw.ext[n]) +
                            " is not reachable from the root");

  std::vector<bool> var_used(raw.variables.size(), false);
  for (int n = 0; n < raw.size(); ++n)
    if (raw.kind[n] == NodeKind::Leaf) var_used[raw.leaf[n].var] = true;
  for (std::size_t v = 0; v < var_used.size(); ++v)
    if (!var_used[v])
      throw ValidationError("dangling variable " + raw.variables[v] +
                            ": no leaf references it");

  ValidationReport report = check_raw(raw);
  if (!report.normalized.pass)
    throw ValidationError("sum node " + node_list(report.normalized.offending) +
                          ": weights must be strictly positive and sum to 1");
  if (!report.smooth.pass)
    throw ValidationError("sum node " + node_list(report.smooth.offending) +
                          ": children have different scopes (not smooth)");
  if (!report.decomposable.pass)
    throw ValidationError("product node " +
                          node_list(report.decomposable.offending) +
                          ": children scopes overlap (not decomposable)");

  // Dense indices follow the topological order, children before parents.
  std::vector<int> new_index(raw.size(), -1);
  for (std::size_t i = 0; i < topo.order.size(); ++i)
    new_index[topo.order[i]] = static_cast<int>(i);

  Circuit c;
  const int n_nodes = raw.size();
  c.variables_ = std::move(raw.variables);
  c.kind_.resize(n_nodes);
  c.leaf_.resize(n_nodes);
  c.leaf_ordinal_.assign(n_nodes, -1);
  c.external_id_.resize(n_nodes);
  c.child_begin_.assign(n_nodes + 1, 0);
  c.root_ = new_index[raw.root];
  for (int i = 0; i < n_nodes; ++i) {
    const int old = topo.order[i];
    c.kind_[i] = raw.kind[old];
    c.leaf_[i] = raw.leaf[old];
    c.external_id_[i] = raw.ext[old];
    c.child_begin_[i + 1] =
        c.child_begin_[i] + static_cast<int>(raw.children[old].size());
  }
  c.child_ids_.resize(c.child_begin_[n_nodes]);
  c.child_weights_.assign(c.child_begin_[n_nodes], 1.0);
  c.child_log_weights_.assign(c.child_begin_[n_nodes], 0.0);
  for (int i = 0; i < n_nodes; ++i) {
    const int old = topo.order[i];
    int at = c.child_begin_[i];
    for (std::size_t k = 0; k < raw.children[old].size(); ++k, ++at) {
      c.child_ids_[at] = new_index[raw.children[old][k]];
      if (raw.kind[old] == NodeKind::Sum) {
        c.child_weights_[at] = raw.weights[old][k];
        c.child_log_weights_[at] = std::log(raw.weights[old][k]);
      }
    }
    if (c.kind_[i] == NodeKind::Leaf) {
      c.leaf_ordinal_[i] = static_cast<int>(c.leaf_nodes_.size());
      c.leaf_nodes_.push_back(i);
    }
  }
  c.topo_order_.resize(n_nodes);
  for (int i = 0; i < n_nodes; ++i) c.topo_order_[i] = i;

  c.scope_words_ = static_cast<int>((c.variables_.size() + 63) / 64);
  c.scope_.assign(static_cast<std::size_t>(n_nodes) * c.scope_words_, 0);
  for (int i = 0; i < n_nodes; ++i) {
    auto* s = c.scope_.data() + static_cast<std::size_t>(i) * c.scope_words_;
    if (c.kind_[i] == NodeKind::Leaf) {
      s[static_cast<std::size_t>(c.leaf_[i].var) / 64] |=
          1ull << (static_cast<unsigned>(c.leaf_[i].var) % 64);
    } else {
      for (int m : c.children(i)) {
        const auto* cs =
            c.scope_.data() + static_cast<std::size_t>(m) * c.scope_words_;
        for (int w = 0; w < c.scope_words_; ++w) s[w] |= cs[w];
      }
    }
  }
  return c;
}

namespace {

Raw raw_from_json(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("invalid JSON: ") + e.what());
  }
  try {
    Raw raw;
    if (!doc.is_object() || !doc.contains("variables") ||
        !doc.contains("nodes") || !doc.contains("root"))
      throw ParseError("document must have variables, nodes, and root");
    raw.variables = doc.at("variables").get<std::vector<std::string>>();
    if (raw.variables.empty()) throw ParseError("empty variable list");
    std::unordered_map<std::string, int> var_index;
    for (std::size_t i = 0; i < raw.variables.size(); ++i) {
      if (!var_index.emplace(raw.variables[i], static_cast<int>(i)).second)
        throw ParseError("duplicate variable " + raw.variables[i]);
    }

    const auto& nodes = doc.at("nodes");
    std::unordered_map<std::int64_t, int> slot_of;
    for (const auto& nd : nodes) {
      std::int64_t id = nd.at("id").get<std::int64_t>();
      if (!slot_of.emplace(id, raw.size()).second)
        throw ParseError("duplicate node id " + std::to_string(id));
      raw.ext.push_back(id);
      raw.kind.push_back(NodeKind::Leaf);  // fixed up below
      raw.children.emplace_back();
      raw.weights.emplace_back();
      raw.leaf.emplace_back();
    }
    int slot = 0;
    for (const auto& nd : nodes) {
      const std::string kind = nd.at("kind").get<std::string>();
      const std::string where = " in node " + std::to_string(raw.ext[slot]);
      if (kind == "leaf") {
        raw.kind[slot] = NodeKind::Leaf;
        const std::string var = nd.at("var").get<std::string>();
        auto it = var_index.find(var);
        if (it == var_index.end())
          throw ParseError("unknown variable " + var + where);
        raw.leaf[slot] = {it->second, nd.at("negated").get<bool>()};
      } else if (kind == "sum") {
        raw.kind[slot] = NodeKind::Sum;
        for (const auto& edge : nd.at("children")) {
          std::int64_t cid = edge.at("id").get<std::int64_t>();
          auto it = slot_of.find(cid);
          if (it == slot_of.end())
            throw ParseError("unknown child id " + std::to_string(cid) + where);
          raw.children[slot].push_back(it->second);
          raw.weights[slot].push_back(edge.at("weight").get<double>());
        }
      } else if (kind == "product") {
        raw.kind[slot] = NodeKind::Product;
        for (const auto& cid_json : nd.at("children")) {
          std::int64_t cid = cid_json.get<std::int64_t>();
          auto it = slot_of.find(cid);
          if (it == slot_of.end())
            throw ParseError("unknown child id " + std::to_string(cid) + where);
          raw.children[slot].push_back(it->second);
        }
      } else {
        throw ParseError("unknown node kind '" + kind + "'" + where);
      }
      ++slot;
    }

    std::int64_t root_id = doc.at("root").get<std::int64_t>();
    auto it = slot_of.find(root_id);
    if (it == slot_of.end())
      throw ParseError("root id " + std::to_string(root_id) + " not defined");
    raw.root = it->second;
    return raw;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed circuit document: ") + e.what());
  }
}

Raw raw_from_circuit(const Circuit& c) {
  Raw raw;
  raw.variables = c.variables();
  raw.root = c.root();
  for (int n = 0; n < c.num_nodes(); ++n) {
    raw.kind.push_back(c.kind(n));
    raw.children.emplace_back(c.children(n).begin(), c.children(n).end());
    if (c.kind(n) == NodeKind::Sum)
      raw.weights.emplace_back(c.weights(n).begin(), c.weights(n).end());
    else
      raw.weights.emplace_back();
    raw.leaf.push_back(c.leaf(n));
    raw.ext.push_back(c.external_id(n));
  }
  return raw;
}

}  // namespace

void Assignment::set(int var, bool value) {
  auto it = std::lower_bound(
      entries_.begin(), entries_.end(), var,
      [](const auto& e, int v) { return e.first < v; });
  if (it != entries_.end() && it->first == var)
    it->second = value ? 1 : 0;
  else
    entries_.insert(it, {var, value ? std::uint8_t{1} : std::uint8_t{0}});
}

std::optional<bool> Assignment::get(int var) const {
  auto it = std::lower_bound(
      entries_.begin(), entries_.end(), var,
      [](const auto& e, int v) { return e.first < v; });
  if (it != entries_.end() && it->first == var) return it->second != 0;
  return std::nullopt;
}

Assignment Assignment::merged(const Assignment& a, const Assignment& b) {
  Assignment out = a;
  for (const auto& [var, value] : b.entries_) {
    if (out.contains(var))
      throw OverlappingAssignments("variable index " + std::to_string(var) +
                                   " assigned on both sides");
    out.set(var, value != 0);
  }
  return out;
}

int Circuit::count(NodeKind k) const {
  int n = 0;
  for (NodeKind kk : kind_) n += (kk == k);
  return n;
}

int Circuit::variable_index(std::string_view name) const {
  for (std::size_t i = 0; i < variables_.size(); ++i)
    if (variables_[i] == name) return static_cast<int>(i);
  return -1;
}

std::uint64_t Circuit::content_hash() const {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](const void* data, std::size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
      h ^= p[i];
      h *= 1099511628211ull;
    }
  };
  auto mix_int = [&](std::int64_t v) { mix(&v, sizeof v); };
  mix_int(static_cast<std::int64_t>(variables_.size()));
  for (const auto& v : variables_) mix(v.data(), v.size());
  mix_int(root_);
  for (int n = 0; n < num_nodes(); ++n) {
    mix_int(static_cast<std::int64_t>(kind_[n]));
    if (kind_[n] == NodeKind::Leaf) {
      mix_int(leaf_[n].var);
      mix_int(leaf_[n].negated);
    }
    for (int c : children(n)) mix_int(c);
    if (kind_[n] == NodeKind::Sum)
      for (double w : weights(n)) mix(&w, sizeof w);
  }
  return h;
}

CircuitBuilder::CircuitBuilder(std::vector<std::string> variables)
    : variables_(std::move(variables)) {
  if (variables_.empty()) throw InvalidSpec("circuit needs at least 1 variable");
}

int CircuitBuilder::add_leaf(int var, bool negated) {
  if (var < 0 || var >= static_cast<int>(variables_.size()))
    throw InvalidSpec("leaf variable index out of range");
  kind_.push_back(NodeKind::Leaf);
  children_.emplace_back();
  weights_.emplace_back();
  leaf_.push_back({var, negated});
  external_id_.push_back(static_cast<std::int64_t>(kind_.size()) - 1);
  return static_cast<int>(kind_.size()) - 1;
}

int CircuitBuilder::add_leaf(std::string_view var_name, bool negated) {
  for (std::size_t i = 0; i < variables_.size(); ++i)
    if (variables_[i] == var_name) return add_leaf(static_cast<int>(i), negated);
  throw UnknownVariable("unknown variable " + std::string(var_name));
}

int CircuitBuilder::add_sum(std::vector<int> children,
                            std::vector<double> weights) {
  if (children.size() != weights.size())
    throw InvalidSpec("sum children/weights length mismatch");
  for (int c : children)
    if (c < 0 || c >= static_cast<int>(kind_.size()))
      throw InvalidSpec("sum child id out of range");
  kind_.push_back(NodeKind::Sum);
  children_.push_back(std::move(children));
  weights_.push_back(std::move(weights));
  leaf_.emplace_back();
  external_id_.push_back(static_cast<std::int64_t>(kind_.size()) - 1);
  return static_cast<int>(kind_.size()) - 1;
}

int CircuitBuilder::add_product(std::vector<int> children) {
  for (int c : children)
    if (c < 0 || c >= static_cast<int>(kind_.size()))
      throw InvalidSpec("product child id out of range");
  kind_.push_back(NodeKind::Product);
  children_.push_back(std::move(children));
  weights_.emplace_back();
  leaf_.emplace_back();
  external_id_.push_back(static_cast<std::int64_t>(kind_.size()) - 1);
  return static_cast<int>(kind_.size()) - 1;
}

Circuit CircuitBuilder::finish(int root) && {
  Raw raw;
  raw.variables = std::move(variables_);
  raw.kind = std::move(kind_);
  raw.children = std::move(children_);
  raw.weights = std::move(weights_);
  raw.leaf = std::move(leaf_);
  raw.ext = std::move(external_id_);
  raw.root = root;
  return CircuitAssembler::assemble(std::move(raw));
}

std::string ValidationReport::to_string() const {
  std::ostringstream os;
  for (const Property* p : {&acyclic, &normalized, &smooth, &decomposable}) {
    os << p->name << ": " << (p->pass ? "ok" : "FAIL");
    if (!p->pass && !p->offending.empty())
      os << " (node " << node_list(p->offending) << ")";
    os << '\n';
  }
  return os.str();
}

double evaluate_linear(const Circuit& c, const LeafValues& lv) {
  if (static_cast<int>(lv.size()) != c.num_leaves())
    throw DimensionMismatch("leaf value vector has wrong length");
  std::vector<double> val(c.num_nodes());
  for (int n = 0; n < c.num_nodes(); ++n) {
    switch (c.kind(n)) {
      case NodeKind::Leaf:
        val[n] = lv[c.leaf_ordinal(n)];
        break;
      case NodeKind::Sum: {
        auto ch = c.children(n);
        auto w = c.weights(n);
        double s = 0.0;
        for (std::size_t i = 0; i < ch.size(); ++i) s += w[i] * val[ch[i]];
        val[n] = s;
        break;
      }
      case NodeKind::Product: {
        double p = 1.0;
        for (int m : c.children(n)) p *= val[m];
        val[n] = p;
        break;
      }
    }
  }
  double r = val[c.root()];
  if (!std::isfinite(r))
    throw NumericOverflow("linear evaluation produced a non-finite value");
  return r;
}

SignedLog evaluate_signed_log(const Circuit& c, const LeafValues& lv) {
  if (static_cast<int>(lv.size()) != c.num_leaves())
    throw DimensionMismatch("leaf value vector has wrong length");
  std::vector<double> logm(c.num_nodes());
  std::vector<std::int8_t> sign(c.num_nodes());
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  for (int n = 0; n < c.num_nodes(); ++n) {
    switch (c.kind(n)) {
      case NodeKind::Leaf: {
        double x = lv[c.leaf_ordinal(n)];
        sign[n] = x == 0.0 ? 0 : (x > 0 ? 1 : -1);
        logm[n] = x == 0.0 ? kNegInf : std::log(std::abs(x));
        break;
      }
      case NodeKind::Sum: {
        auto ch = c.children(n);
        auto lw = c.log_weights(n);
        double max_term = kNegInf;
        for (std::size_t i = 0; i < ch.size(); ++i)
          if (sign[ch[i]] != 0)
            max_term = std::max(max_term, lw[i] + logm[ch[i]]);
        if (max_term == kNegInf) {
          sign[n] = 0;
          logm[n] = kNegInf;
          break;
        }
        double acc = 0.0;
        for (std::size_t i = 0; i < ch.size(); ++i)
          if (sign[ch[i]] != 0)
            acc += sign[ch[i]] * std::exp(lw[i] + logm[ch[i]] - max_term);
        if (acc == 0.0) {
          sign[n] = 0;
          logm[n] = kNegInf;
        } else {
          sign[n] = acc > 0 ? 1 : -1;
          logm[n] = max_term + std::log(std::abs(acc));
        }
        break;
      }
      case NodeKind::Product: {
        int s = 1;
        double lm = 0.0;
        for (int m : c.children(n)) {
          s *= sign[m];
          lm += logm[m];
        }
        sign[n] = static_cast<std::int8_t>(s);
        logm[n] = s == 0 ? kNegInf : lm;
        break;
      }
    }
  }
  return {logm[c.root()], sign[c.root()]};
}

double evaluate(const Circuit& c, const LeafValues& lv, EvalMode mode) {
  if (mode == EvalMode::Linear) return evaluate_linear(c, lv);
  return evaluate_signed_log(c, lv).to_real();
}

LeafValues leaf_values_for_marginal(const Circuit& c, const Assignment& q) {
  for (const auto& [var, value] : q.entries())
    if (var < 0 || var >= c.num_variables())
      throw UnknownVariable("variable index " + std::to_string(var) +
                            " not declared by the circuit");
  LeafValues lv(c.num_leaves(), 1.0);
  for (int n : c.leaf_nodes()) {
    const LeafLabel l = c.leaf(n);
    auto v = q.get(l.var);
    if (v.has_value() && *v == l.negated) lv[c.leaf_ordinal(n)] = 0.0;
  }
  return lv;
}

double marginal(const Circuit& c, const Assignment& q) {
  return evaluate_linear(c, leaf_values_for_marginal(c, q));
}

double log_marginal(const Circuit& c, const Assignment& q) {
  SignedLog v = evaluate_signed_log(c, leaf_values_for_marginal(c, q));
  return v.sign > 0 ? v.log_mag : -std::numeric_limits<double>::infinity();
}

ValidationReport validate(const Circuit& c) { return check_raw(raw_from_circuit(c)); }

ValidationReport validate_text(const std::string& json_text) {
  return check_raw(raw_from_json(json_text));
}

Circuit parse_circuit(const std::string& json_text) {
  return CircuitAssembler::assemble(raw_from_json(json_text));
}

Circuit load_circuit(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open circuit file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_circuit(buf.str());
}

std::string circuit_to_json(const Circuit& c) {
  nlohmann::json doc;
  doc["variables"] = c.variables();
  nlohmann::json nodes = nlohmann::json::array();
  for (int n = 0; n < c.num_nodes(); ++n) {
    nlohmann::json nd;
    nd["id"] = n;
    switch (c.kind(n)) {
      case NodeKind::Leaf:
        nd["kind"] = "leaf";
        nd["var"] = c.variables()[c.leaf(n).var];
        nd["negated"] = c.leaf(n).negated;
        break;
      case NodeKind::Sum: {
        nd["kind"] = "sum";
        nlohmann::json ch = nlohmann::json::array();
        auto ids = c.children(n);
        auto w = c.weights(n);
        for (std::size_t i = 0; i < ids.size(); ++i)
          ch.push_back({{"id", ids[i]}, {"weight", w[i]}});
        nd["children"] = std::move(ch);
        break;
      }
      case NodeKind::Product:
        nd["kind"] = "product";
        nd["children"] = std::vector<int>(c.children(n).begin(),
                                          c.children(n).end());
        break;
    }
    nodes.push_back(std::move(nd));
  }
  doc["nodes"] = std::move(nodes);
  doc["root"] = c.root();
  return doc.dump(2);
}

namespace {

// One mixture component: random normalized weights over k children.
std::vector<double> random_weights(SplitMix64& rng, std::size_t k) {
  std::vector<double> w(k);
  double total = 0.0;
  for (double& x : w) {
    x = rng.uniform(0.1, 1.0);
    total += x;
  }
  for (double& x : w) x /= total;
  return w;
}

int gen_subcircuit(CircuitBuilder& b, SplitMix64& rng, std::vector<int> vars,
                   int depth, int fanout) {
  if (vars.size() == 1) {
    int pos = b.add_leaf(vars[0], false);
    int neg = b.add_leaf(vars[0], true);
    return b.add_sum({pos, neg}, random_weights(rng, 2));
  }
  if (depth <= 0) {
    // Depth budget exhausted: factor the remaining variables independently.
    std::vector<int> parts;
    for (int v : vars) parts.push_back(gen_subcircuit(b, rng, {v}, 0, fanout));
    return b.add_product(std::move(parts));
  }
  std::vector<int> components;
  for (int f = 0; f < fanout; ++f) {
    std::vector<int> shuffled = vars;
    for (std::size_t i = shuffled.size() - 1; i > 0; --i)
      std::swap(shuffled[i], shuffled[rng.below(i + 1)]);
    const std::size_t n_parts =
        (shuffled.size() >= 3 && rng.bernoulli(0.3)) ? 3 : 2;
    // Random split points give each component its own decomposition.
    std::vector<std::size_t> cuts{0, shuffled.size()};
    while (cuts.size() < n_parts + 1) {
      std::size_t cut = 1 + rng.below(shuffled.size() - 1);
      if (std::find(cuts.begin(), cuts.end(), cut) == cuts.end())
        cuts.push_back(cut);
    }
    std::sort(cuts.begin(), cuts.end());
    std::vector<int> parts;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
      std::vector<int> sub(shuffled.begin() + cuts[i],
                           shuffled.begin() + cuts[i + 1]);
      std::sort(sub.begin(), sub.end());
      parts.push_back(gen_subcircuit(b, rng, std::move(sub), depth - 1, fanout));
    }
    components.push_back(b.add_product(std::move(parts)));
  }
  if (components.size() == 1) return components[0];
  return b.add_sum(std::move(components),
                   random_weights(rng, components.size()));
}

}  // namespace

Circuit random_circuit(int n_vars, int depth, int fanout, std::uint64_t seed) {
  if (n_vars < 1) throw InvalidSpec("random_circuit: n_vars must be >= 1");
  if (depth < 0) throw InvalidSpec("random_circuit: depth must be >= 0");
  if (fanout < 1) throw InvalidSpec("random_circuit: fanout must be >= 1");
  SplitMix64 rng = SplitMix64::substream(seed, 0xC19C);
  std::vector<std::string> names(n_vars);
  for (int i = 0; i < n_vars; ++i) names[i] = "X" + std::to_string(i + 1);
  CircuitBuilder b(std::move(names));
  std::vector<int> vars(n_vars);
  for (int i = 0; i < n_vars; ++i) vars[i] = i;
  int root = gen_subcircuit(b, rng, std::move(vars), depth, fanout);
  return std::move(b).finish(root);
}

Assignment parse_assignment(const Circuit& c, std::string_view text) {
  Assignment out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find(',', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view item = text.substr(pos, end - pos);
    std::size_t eq = item.find('=');
    if (eq == std::string_view::npos || eq == 0 || eq + 1 >= item.size())
      throw ParseError("expected NAME=0|1 in assignment, got '" +
                       std::string(item) + "'");
    std::string name(item.substr(0, eq));
    std::string_view value = item.substr(eq + 1);
    int var = c.variable_index(name);
    if (var < 0) throw UnknownVariable("unknown variable " + name);
    if (out.contains(var)) throw ParseError("duplicate variable " + name);
    if (value == "1")
      out.set(var, true);
    else if (value == "0")
      out.set(var, false);
    else
      throw ParseError("value for " + name + " must be 0 or 1");
    pos = end + 1;
  }
  return out;
}

}  // namespace pcmmap
