#include "pcmmap/mmap.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "pcmmap/rng.hpp"
#include "pcmmap/threads.hpp"

namespace pcmmap {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

using Clock = std::chrono::steady_clock;

std::vector<int> sorted_unique(std::vector<int> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

// Leaf ordinals of the positive/negated leaves per query slot, so solvers can
// flip query values without rebuilding assignments.
struct QueryLeafIndex {
  std::vector<std::vector<int>> pos;
  std::vector<std::vector<int>> neg;
};

QueryLeafIndex index_query_leaves(const Circuit& c,
                                  const std::vector<int>& query) {
  QueryLeafIndex idx;
  idx.pos.resize(query.size());
  idx.neg.resize(query.size());
  for (int n : c.leaf_nodes()) {
    const LeafLabel l = c.leaf(n);
    auto it = std::lower_bound(query.begin(), query.end(), l.var);
    if (it == query.end() || *it != l.var) continue;
    const auto slot = static_cast<std::size_t>(it - query.begin());
    (l.negated ? idx.neg : idx.pos)[slot].push_back(c.leaf_ordinal(n));
  }
  return idx;
}

void apply_query_bits(const QueryLeafIndex& idx, std::uint64_t mask, int m,
                      LeafValues& lv) {
  for (int j = 0; j < m; ++j) {
    // Bit 0 of the mask is the last query variable, so ascending masks
    // enumerate assignments in lexicographic order of the bit string.
    const bool bit = (mask >> (m - 1 - j)) & 1;
    for (int o : idx.pos[j]) lv[o] = bit ? 1.0 : 0.0;
    for (int o : idx.neg[j]) lv[o] = bit ? 0.0 : 1.0;
  }
}

double log_value(const Circuit& c, const LeafValues& lv) {
  SignedLog v = evaluate_signed_log(c, lv);
  return v.sign > 0 ? v.log_mag : kNegInf;
}

Assignment mask_to_assignment(const std::vector<int>& query,
                              std::uint64_t mask) {
  Assignment q;
  const int m = static_cast<int>(query.size());
  for (int j = 0; j < m; ++j) q.set(query[j], (mask >> (m - 1 - j)) & 1);
  return q;
}

void require_keys(const Assignment& a, const std::vector<int>& vars,
                  const char* what) {
  bool ok = a.size() == vars.size();
  if (ok) {
    std::size_t i = 0;
    for (const auto& [var, value] : a.entries()) ok = ok && vars[i++] == var;
  }
  if (!ok)
    throw InvalidPartition(std::string(what) +
                           " assignment keys do not match the partition");
}

}  // namespace

VariablePartition VariablePartition::make(const Circuit& c,
                                          std::vector<int> evidence,
                                          std::vector<int> query,
                                          std::vector<int> hidden) {
  VariablePartition p{sorted_unique(std::move(evidence)),
                      sorted_unique(std::move(query)),
                      sorted_unique(std::move(hidden))};
  if (p.m() < 1) throw InvalidPartition("query set must not be empty");
  std::vector<int> all;
  all.reserve(p.evidence.size() + p.query.size() + p.hidden.size());
  all.insert(all.end(), p.evidence.begin(), p.evidence.end());
  all.insert(all.end(), p.query.begin(), p.query.end());
  all.insert(all.end(), p.hidden.begin(), p.hidden.end());
  std::sort(all.begin(), all.end());
  for (std::size_t i = 1; i < all.size(); ++i)
    if (all[i] == all[i - 1])
      throw InvalidPartition("variable index " + std::to_string(all[i]) +
                             " appears in two sets");
  if (static_cast<int>(all.size()) != c.num_variables() ||
      (!all.empty() && (all.front() != 0 ||
                        all.back() != c.num_variables() - 1)))
    throw InvalidPartition(
        "partition must cover every circuit variable exactly once");
  return p;
}

VariablePartition parse_partition(const Circuit& c,
                                  const std::string& json_text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("invalid partition JSON: ") + e.what());
  }
  auto names_to_indices = [&](const char* key) {
    std::vector<int> out;
    if (!doc.contains(key)) return out;
    for (const auto& name : doc.at(key)) {
      int v = c.variable_index(name.get<std::string>());
      if (v < 0)
        throw UnknownVariable("unknown variable " + name.get<std::string>() +
                              " in partition");
      out.push_back(v);
    }
    return out;
  };
  return VariablePartition::make(c, names_to_indices("evidence"),
                                 names_to_indices("query"),
                                 names_to_indices("hidden"));
}

VariablePartition load_partition(const Circuit& c, const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open partition file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_partition(c, buf.str());
}

std::string partition_to_json(const Circuit& c, const VariablePartition& p) {
  nlohmann::json doc;
  auto names = [&](const std::vector<int>& vars) {
    std::vector<std::string> out;
    for (int v : vars) out.push_back(c.variables()[v]);
    return out;
  };
  doc["evidence"] = names(p.evidence);
  doc["query"] = names(p.query);
  doc["hidden"] = names(p.hidden);
  return doc.dump();
}

MmapProblem make_problem(const Circuit& c, VariablePartition partition,
                         Assignment evidence) {
  require_keys(evidence, partition.evidence, "evidence");
  return MmapProblem{&c, std::move(partition), std::move(evidence)};
}

double score(const Circuit& c, const Assignment& e, const Assignment& q) {
  return log_marginal(c, Assignment::merged(e, q));
}

namespace {

MmapSolution brute_force_impl(const MmapProblem& p, int threads) {
  const Circuit& c = *p.circuit;
  const int m = p.partition.m();
  if (m > 20)
    throw QueryTooLarge("brute force limited to 20 query variables, got " +
                        std::to_string(m));
  const auto t0 = Clock::now();
  const LeafValues base = leaf_values_for_marginal(c, p.evidence);
  const QueryLeafIndex idx = index_query_leaves(c, p.partition.query);
  const std::uint64_t total = 1ull << m;

  double best_score = kNegInf;
  std::uint64_t best_mask = 0;
  const int T = threads;
  if (T <= 1) {
    LeafValues lv = base;
    bool first = true;
    for (std::uint64_t mask = 0; mask < total; ++mask) {
      apply_query_bits(idx, mask, m, lv);
      const double s = log_value(c, lv);
      if (first || s > best_score) {
        best_score = s;
        best_mask = mask;
        first = false;
      }
    }
  } else {
    std::vector<double> t_score(T, kNegInf);
    std::vector<std::uint64_t> t_mask(T, total);
#pragma omp parallel num_threads(T)
    {
      const int t = omp_get_thread_num();
      LeafValues lv = base;
      double local_score = kNegInf;
      std::uint64_t local_mask = total;
#pragma omp for schedule(static)
      for (std::int64_t mi = 0; mi < static_cast<std::int64_t>(total); ++mi) {
        const auto mask = static_cast<std::uint64_t>(mi);
        apply_query_bits(idx, mask, m, lv);
        const double s = log_value(c, lv);
        if (local_mask == total || s > local_score) {
          local_score = s;
          local_mask = mask;
        }
      }
      t_score[t] = local_score;
      t_mask[t] = local_mask;
    }
    bool first = true;
    for (int t = 0; t < T; ++t) {
      if (t_mask[t] == total) continue;  // thread saw no iterations
      if (first || t_score[t] > best_score ||
          (t_score[t] == best_score && t_mask[t] < best_mask)) {
        best_score = t_score[t];
        best_mask = t_mask[t];
        first = false;
      }
    }
  }

  MmapSolution out;
  out.q = mask_to_assignment(p.partition.query, best_mask);
  out.log_score = best_score;
  out.method = "bruteforce";
  out.elapsed = Clock::now() - t0;
  return out;
}

}  // namespace

MmapSolution brute_force_mmap(const MmapProblem& p, int threads) {
  return brute_force_impl(p, resolve_threads(threads));
}

MmapSolution brute_force_mmap_serial(const MmapProblem& p) {
  return brute_force_impl(p, 1);
}

MmapSolution max_approx(const MmapProblem& p) {
  const Circuit& c = *p.circuit;
  const auto t0 = Clock::now();
  const LeafValues lv = leaf_values_for_marginal(c, p.evidence);

  // Upward pass in log space; sum nodes take the max weighted child.
  std::vector<double> logv(c.num_nodes());
  for (int n = 0; n < c.num_nodes(); ++n) {
    switch (c.kind(n)) {
      case NodeKind::Leaf: {
        const double x = lv[c.leaf_ordinal(n)];
        logv[n] = x > 0 ? std::log(x) : kNegInf;
        break;
      }
      case NodeKind::Sum: {
        auto ch = c.children(n);
        auto lw = c.log_weights(n);
        double best = kNegInf;
        for (std::size_t i = 0; i < ch.size(); ++i)
          best = std::max(best, lw[i] + logv[ch[i]]);
        logv[n] = best;
        break;
      }
      case NodeKind::Product: {
        double s = 0.0;
        for (int mchild : c.children(n)) s += logv[mchild];
        logv[n] = s;
        break;
      }
    }
  }

  // Downward selection: argmax child at sum nodes, all children at products.
  Assignment q;
  std::vector<int> stack{c.root()};
  while (!stack.empty()) {
    const int n = stack.back();
    stack.pop_back();
    switch (c.kind(n)) {
      case NodeKind::Leaf: {
        const LeafLabel l = c.leaf(n);
        auto it = std::lower_bound(p.partition.query.begin(),
                                   p.partition.query.end(), l.var);
        if (it != p.partition.query.end() && *it == l.var) {
          const bool value = !l.negated;
          auto prev = q.get(l.var);
          if (prev.has_value() && *prev != value)
            throw ConflictingLeafAssignment(
                "max-approx selection assigned two values to " +
                c.variables()[l.var]);
          q.set(l.var, value);
        }
        break;
      }
      case NodeKind::Sum: {
        auto ch = c.children(n);
        auto lw = c.log_weights(n);
        int best_child = ch[0];
        double best = lw[0] + logv[ch[0]];
        for (std::size_t i = 1; i < ch.size(); ++i) {
          const double term = lw[i] + logv[ch[i]];
          if (term > best || (term == best && ch[i] < best_child)) {
            best = term;
            best_child = ch[i];
          }
        }
        stack.push_back(best_child);
        break;
      }
      case NodeKind::Product:
        for (int mchild : c.children(n)) stack.push_back(mchild);
        break;
    }
  }
  for (int v : p.partition.query)
    if (!q.contains(v))
      throw ConflictingLeafAssignment(
          "max-approx selection never reached query variable " +
          c.variables()[v]);

  MmapSolution out;
  out.q = std::move(q);
  out.log_score = score(c, p.evidence, out.q);  // true score, not the max value
  out.method = "max";
  out.elapsed = Clock::now() - t0;
  return out;
}

namespace {

// Forward values and root-adjoints for the marginal leaf function of `e`.
// adj[n] = d root / d v(n); the derivative of a multilinear circuit output
// with respect to a leaf equals the sum of that leaf's adjoints, which gives
// every p(V=1, e) from a single sweep.
struct AdjointSweep {
  std::vector<double> val;
  std::vector<double> adj;
  double root_value = 0.0;
};

AdjointSweep adjoint_sweep(const Circuit& c, const LeafValues& lv) {
  AdjointSweep s;
  s.val.resize(c.num_nodes());
  for (int n = 0; n < c.num_nodes(); ++n) {
    switch (c.kind(n)) {
      case NodeKind::Leaf:
        s.val[n] = lv[c.leaf_ordinal(n)];
        break;
      case NodeKind::Sum: {
        auto ch = c.children(n);
        auto w = c.weights(n);
        double acc = 0.0;
        for (std::size_t i = 0; i < ch.size(); ++i) acc += w[i] * s.val[ch[i]];
        s.val[n] = acc;
        break;
      }
      case NodeKind::Product: {
        double acc = 1.0;
        for (int mchild : c.children(n)) acc *= s.val[mchild];
        s.val[n] = acc;
        break;
      }
    }
  }
  s.root_value = s.val[c.root()];

  s.adj.assign(c.num_nodes(), 0.0);
  s.adj[c.root()] = 1.0;
  for (int n = c.num_nodes() - 1; n >= 0; --n) {
    const double a = s.adj[n];
    if (a == 0.0 || c.kind(n) == NodeKind::Leaf) continue;
    auto ch = c.children(n);
    if (c.kind(n) == NodeKind::Sum) {
      auto w = c.weights(n);
      for (std::size_t i = 0; i < ch.size(); ++i) s.adj[ch[i]] += a * w[i];
    } else {
      // Product: contribution to child i is the product of the other
      // children; handle zero-valued children without dividing by zero.
      int zero_count = 0;
      int zero_child = -1;
      double nonzero_prod = 1.0;
      for (int mchild : ch) {
        if (s.val[mchild] == 0.0) {
          ++zero_count;
          zero_child = mchild;
        } else {
          nonzero_prod *= s.val[mchild];
        }
      }
      if (zero_count == 0) {
        for (int mchild : ch) s.adj[mchild] += a * nonzero_prod / s.val[mchild];
      } else if (zero_count == 1) {
        s.adj[zero_child] += a * nonzero_prod;
      }
    }
  }
  return s;
}

std::vector<double> conditionals_from_sweep(const Circuit& c,
                                            const AdjointSweep& sweep,
                                            std::span<const int> targets) {
  std::vector<double> joint_pos(targets.size(), 0.0);
  for (int n : c.leaf_nodes()) {
    const LeafLabel l = c.leaf(n);
    if (l.negated) continue;
    for (std::size_t t = 0; t < targets.size(); ++t)
      if (targets[t] == l.var) joint_pos[t] += sweep.adj[n];
  }
  for (double& x : joint_pos) x /= sweep.root_value;
  return joint_pos;
}

}  // namespace

std::vector<double> all_marginals(const Circuit& c, const Assignment& e,
                                  std::span<const int> targets) {
  const AdjointSweep sweep = adjoint_sweep(c, leaf_values_for_marginal(c, e));
  if (!(sweep.root_value > 0.0))
    throw ZeroEvidenceProbability("evidence has probability 0");
  return conditionals_from_sweep(c, sweep, targets);
}

std::vector<double> all_marginals_reference(const Circuit& c,
                                            const Assignment& e,
                                            std::span<const int> targets) {
  const double pe = marginal(c, e);
  if (!(pe > 0.0))
    throw ZeroEvidenceProbability("evidence has probability 0");
  std::vector<double> out;
  out.reserve(targets.size());
  for (int v : targets) {
    Assignment with_v = e;
    with_v.set(v, true);
    out.push_back(marginal(c, with_v) / pe);
  }
  return out;
}

MmapSolution ml_approx(const MmapProblem& p) {
  const Circuit& c = *p.circuit;
  const auto t0 = Clock::now();
  const std::vector<double> cond =
      all_marginals(c, p.evidence, p.partition.query);
  Assignment q;
  for (std::size_t j = 0; j < cond.size(); ++j)
    q.set(p.partition.query[j], cond[j] > 0.5);
  MmapSolution out;
  out.q = std::move(q);
  out.log_score = score(c, p.evidence, out.q);
  out.method = "ml";
  out.elapsed = Clock::now() - t0;
  return out;
}

MmapSolution seq_approx(const MmapProblem& p) {
  const Circuit& c = *p.circuit;
  const auto t0 = Clock::now();
  std::vector<int> remaining = p.partition.query;
  Assignment fixed;  // evidence plus the query values chosen so far
  fixed = p.evidence;
  Assignment q;
  while (!remaining.empty()) {
    const std::vector<double> cond = all_marginals(c, fixed, remaining);
    int best_slot = 0;
    bool best_value = false;
    double best_p = -1.0;
    for (std::size_t i = 0; i < remaining.size(); ++i) {
      const double p1 = cond[i];
      const double p0 = 1.0 - p1;
      // Value 0 wins its own tie; across variables the lower index wins.
      const bool value = p1 > p0;
      const double pv = value ? p1 : p0;
      if (pv > best_p) {
        best_p = pv;
        best_slot = static_cast<int>(i);
        best_value = value;
      }
    }
    const int var = remaining[best_slot];
    fixed.set(var, best_value);
    q.set(var, best_value);
    remaining.erase(remaining.begin() + best_slot);
  }
  MmapSolution out;
  out.q = std::move(q);
  out.log_score = score(c, p.evidence, out.q);
  out.method = "seq";
  out.elapsed = Clock::now() - t0;
  return out;
}

MmapSolution hill_climb(const MmapProblem& p, const Assignment& init,
                        int iters, std::uint64_t seed,
                        std::vector<double>* best_trace) {
  const Circuit& c = *p.circuit;
  require_keys(init, p.partition.query, "init");
  const auto t0 = Clock::now();
  const int m = p.partition.m();
  const LeafValues base = leaf_values_for_marginal(c, p.evidence);
  const QueryLeafIndex idx = index_query_leaves(c, p.partition.query);

  std::vector<std::uint8_t> cur(m);
  for (int j = 0; j < m; ++j) cur[j] = *init.get(p.partition.query[j]) ? 1 : 0;

  LeafValues lv = base;
  auto set_bit = [&](int j, bool bit) {
    for (int o : idx.pos[j]) lv[o] = bit ? 1.0 : 0.0;
    for (int o : idx.neg[j]) lv[o] = bit ? 0.0 : 1.0;
  };
  for (int j = 0; j < m; ++j) set_bit(j, cur[j]);

  double cur_score = log_value(c, lv);
  std::vector<std::uint8_t> best = cur;
  double best_score = cur_score;
  if (best_trace) {
    best_trace->clear();
    best_trace->push_back(best_score);
  }

  SplitMix64 rng = SplitMix64::substream(seed, 0x411C);
  for (int it = 0; it < iters; ++it) {
    int best_flip = -1;
    double best_flip_score = cur_score;
    for (int j = 0; j < m; ++j) {
      set_bit(j, !cur[j]);
      const double s = log_value(c, lv);
      set_bit(j, cur[j]);
      if (s > best_flip_score) {
        best_flip_score = s;
        best_flip = j;
      }
    }
    if (best_flip >= 0) {
      cur[best_flip] ^= 1;
      set_bit(best_flip, cur[best_flip]);
      cur_score = best_flip_score;
    } else {
      // Plateau or local optimum: stochastic escape.
      const int j = static_cast<int>(rng.below(static_cast<std::uint64_t>(m)));
      cur[j] ^= 1;
      set_bit(j, cur[j]);
      cur_score = log_value(c, lv);
    }
    if (cur_score > best_score) {
      best_score = cur_score;
      best = cur;
    }
    if (best_trace) best_trace->push_back(best_score);
  }

  MmapSolution out;
  for (int j = 0; j < m; ++j) out.q.set(p.partition.query[j], best[j] != 0);
  out.log_score = best_score;
  out.method = "hillclimb";
  out.elapsed = Clock::now() - t0;
  return out;
}

LoadedProblem load_problem(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open problem file " + path);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("invalid problem JSON: ") + e.what());
  }
  try {
    std::filesystem::path circuit_path = doc.at("circuit").get<std::string>();
    if (circuit_path.is_relative())
      circuit_path = std::filesystem::path(path).parent_path() / circuit_path;
    LoadedProblem out{load_circuit(circuit_path.string()), {}, {}};
    out.partition = parse_partition(out.circuit, doc.at("partition").dump());
    if (doc.contains("evidence")) {
      for (const auto& [name, value] : doc.at("evidence").items()) {
        const int var = out.circuit.variable_index(name);
        if (var < 0) throw UnknownVariable("unknown evidence variable " + name);
        const int v = value.is_boolean() ? (value.get<bool>() ? 1 : 0)
                                         : value.get<int>();
        if (v != 0 && v != 1)
          throw ParseError("evidence value for " + name + " must be 0 or 1");
        out.evidence.set(var, v == 1);
      }
    }
    require_keys(out.evidence, out.partition.evidence, "evidence");
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed problem document: ") + e.what());
  }
}

std::string solution_to_json(const Circuit& c, const MmapSolution& s) {
  nlohmann::json doc;
  doc["method"] = s.method;
  nlohmann::json q = nlohmann::json::object();
  for (const auto& [var, value] : s.q.entries())
    q[c.variables()[var]] = static_cast<int>(value);
  doc["query"] = std::move(q);
  doc["log_score"] = s.log_score;
  doc["elapsed_seconds"] = s.elapsed.count();
  return doc.dump(2);
}

}  // namespace pcmmap
