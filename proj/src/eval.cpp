#include "pcmmap/eval.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "pcmmap/rng.hpp"
#include "pcmmap/sampler.hpp"
#include "pcmmap/threads.hpp"

namespace pcmmap {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
using Clock = std::chrono::steady_clock;

double round_score(double x, double unit) {
  if (!std::isfinite(x)) return x;
  return std::round(x / unit) * unit;
}

std::string mode_name(ProblemMode m) {
  return m == ProblemMode::MPE ? "mpe" : "mmap";
}

ProblemMode mode_from_name(const std::string& s) {
  if (s == "mpe") return ProblemMode::MPE;
  if (s == "mmap") return ProblemMode::MMAP;
  throw ParseError("unknown mode '" + s + "'");
}

}  // namespace

MmapProblem ProblemSet::problem(int i) const {
  return make_problem(*circuit, partition, evidences[i]);
}

ProblemSet generate_problems(const Circuit& c, double qr, ProblemMode mode,
                             int n, std::uint64_t seed) {
  if (!(qr > 0.0 && qr < 1.0))
    throw InvalidSpec("query ratio must be strictly between 0 and 1");
  if (n < 1) throw InvalidSpec("problem count must be >= 1");

  const int n_vars = c.num_variables();
  const int m = static_cast<int>(std::lround(qr * n_vars));

  std::vector<int> order(n_vars);
  for (int i = 0; i < n_vars; ++i) order[i] = i;
  SplitMix64 rng = SplitMix64::substream(seed, 0x9A9'0001);
  for (int i = n_vars - 1; i > 0; --i)
    std::swap(order[i], order[static_cast<int>(
                  rng.below(static_cast<std::uint64_t>(i) + 1))]);

  std::vector<int> query(order.begin(), order.begin() + m);
  std::vector<int> rest(order.begin() + m, order.end());
  std::vector<int> evidence, hidden;
  if (mode == ProblemMode::MPE) {
    evidence = rest;
  } else {
    const int n_ev = static_cast<int>(rest.size()) / 2;
    if (n_ev == 0)
      throw DegeneratePartition(
          "MMAP problem generation left no evidence variables");
    evidence.assign(rest.begin(), rest.begin() + n_ev);
    hidden.assign(rest.begin() + n_ev, rest.end());
  }

  ProblemSet ps;
  ps.circuit = &c;
  ps.partition = VariablePartition::make(c, std::move(evidence),
                                         std::move(query), std::move(hidden));
  ps.qr = qr;
  ps.mode = mode;
  ps.seed = seed;

  const std::uint64_t row_seed = SplitMix64::mix(seed ^ 0xE51D'F00Dull);
  const EvidenceDataset rows =
      generate_dataset(c, ps.partition, n, row_seed, 1);
  ps.evidences.reserve(n);
  for (int i = 0; i < n; ++i) ps.evidences.push_back(rows.row_assignment(i));
  return ps;
}

EvalReport compare(std::span<const SolverHandle> methods, const ProblemSet& ps,
                   int timing_reps, int threads) {
  if (methods.empty()) throw InvalidSpec("compare needs at least one method");
  if (timing_reps < 1) timing_reps = 1;
  const int n = ps.size();
  const int n_methods = static_cast<int>(methods.size());

  EvalReport report;
  report.circuit_hash = ps.circuit->content_hash();
  report.qr = ps.qr;
  report.mode = ps.mode;
  report.seed = ps.seed;
  report.n_problems = n;
  report.timing_reps = timing_reps;
  report.source = ps.source;
  report.methods.resize(n_methods);
  for (int m = 0; m < n_methods; ++m) {
    report.methods[m].name = methods[m].name;
    report.methods[m].scores.assign(n, kNegInf);
    report.methods[m].error_flags.assign(n, 0);
    report.methods[m].times_s.assign(n, 0.0);
  }

  const int T = resolve_threads(threads);
#pragma omp parallel for schedule(dynamic) num_threads(T)
  for (int i = 0; i < n; ++i) {
    const MmapProblem problem = ps.problem(i);
    for (int m = 0; m < n_methods; ++m) {
      MethodResult& res = report.methods[m];
      try {
        std::vector<double> times(timing_reps);
        MmapSolution sol;
        for (int rep = 0; rep < timing_reps; ++rep) {
          const auto t0 = Clock::now();
          MmapSolution s = methods[m].run(problem);
          times[rep] = std::chrono::duration<double>(Clock::now() - t0).count();
          if (rep == 0) sol = std::move(s);
        }
        std::sort(times.begin(), times.end());
        res.scores[i] = sol.log_score;
        res.times_s[i] = times[timing_reps / 2];
      } catch (const Error&) {
        res.scores[i] = kNegInf;
        res.error_flags[i] = 1;
      }
    }
  }

  for (MethodResult& res : report.methods) {
    double sum = 0.0, time_sum = 0.0;
    int n_finite = 0;
    for (int i = 0; i < n; ++i) {
      if (std::isfinite(res.scores[i])) {
        sum += res.scores[i];
        ++n_finite;
      }
      time_sum += res.times_s[i];
    }
    res.n_excluded = n - n_finite;
    res.mean_ll = n_finite > 0 ? sum / n_finite : kNegInf;
    res.mean_time_s = n > 0 ? time_sum / n : 0.0;
    double ss = 0.0;
    if (n_finite > 0) {
      for (int i = 0; i < n; ++i)
        if (std::isfinite(res.scores[i])) {
          const double d = res.scores[i] - res.mean_ll;
          ss += d * d;
        }
      res.stddev_ll = std::sqrt(ss / n_finite);
    }
  }
  return report;
}

ContingencyTable contingency(std::span<const EvalReport> reports) {
  if (reports.empty()) throw InvalidSpec("contingency needs >= 1 report");
  ContingencyTable table;
  for (const MethodResult& m : reports[0].methods)
    table.methods.push_back(m.name);
  const int k = static_cast<int>(table.methods.size());
  table.wins.assign(k, std::vector<int>(k, 0));
  table.n_datasets = static_cast<int>(reports.size());

  for (const EvalReport& r : reports) {
    if (static_cast<int>(r.methods.size()) != k)
      throw MethodSetMismatch("reports cover different method sets");
    for (int i = 0; i < k; ++i)
      if (r.methods[i].name != table.methods[i])
        throw MethodSetMismatch("reports cover different method sets");
    for (int i = 0; i < k; ++i) {
      for (int j = 0; j < k; ++j) {
        if (i == j) continue;
        const double a = round_score(r.methods[i].mean_ll, r.score_round);
        const double b = round_score(r.methods[j].mean_ll, r.score_round);
        if (a > b) ++table.wins[i][j];
      }
    }
  }
  return table;
}

std::string ContingencyTable::to_text() const {
  std::size_t width = 8;
  for (const std::string& m : methods) width = std::max(width, m.size() + 2);
  std::ostringstream os;
  os << std::setw(static_cast<int>(width)) << "";
  for (const std::string& m : methods)
    os << std::setw(static_cast<int>(width)) << m;
  os << '\n';
  for (std::size_t i = 0; i < methods.size(); ++i) {
    os << std::setw(static_cast<int>(width)) << methods[i];
    for (std::size_t j = 0; j < methods.size(); ++j)
      os << std::setw(static_cast<int>(width)) << wins[i][j];
    os << '\n';
  }
  os << "datasets: " << n_datasets << '\n';
  return os.str();
}

std::string ContingencyTable::to_csv() const {
  std::ostringstream os;
  os << "method";
  for (const std::string& m : methods) os << ',' << m;
  os << '\n';
  for (std::size_t i = 0; i < methods.size(); ++i) {
    os << methods[i];
    for (std::size_t j = 0; j < methods.size(); ++j) os << ',' << wins[i][j];
    os << '\n';
  }
  return os.str();
}

double percent_diff(double ll_a, double ll_b) {
  if (ll_b == 0.0) throw DivisionByZero("reference log-likelihood is zero");
  return (ll_a - ll_b) / std::abs(ll_b) * 100.0;
}

std::vector<LabeledExample> label_with_hill_climb(const ProblemSet& ps,
                                                  int iters,
                                                  std::uint64_t seed) {
  if (iters < 0) throw InvalidSpec("iteration count must be >= 0");
  std::vector<LabeledExample> out(ps.size());
  for (int i = 0; i < ps.size(); ++i) {
    SplitMix64 rng = SplitMix64::substream(
        seed, 0x1AB'0000'0000ull + static_cast<std::uint64_t>(i));
    Assignment init;
    for (int v : ps.partition.query) init.set(v, rng.bernoulli(0.5));
    const MmapProblem problem = ps.problem(i);
    const MmapSolution sol = hill_climb(problem, init, iters, rng.next());

    LabeledExample ex;
    ex.evidence_bits.resize(ps.partition.evidence.size());
    for (std::size_t j = 0; j < ps.partition.evidence.size(); ++j)
      ex.evidence_bits[j] =
          *problem.evidence.get(ps.partition.evidence[j]) ? 1 : 0;
    ex.query_bits.resize(ps.partition.query.size());
    for (std::size_t j = 0; j < ps.partition.query.size(); ++j)
      ex.query_bits[j] = *sol.q.get(ps.partition.query[j]) ? 1 : 0;
    out[i] = std::move(ex);
  }
  return out;
}

namespace {

nlohmann::json score_to_json(double x) {
  if (std::isfinite(x)) return x;
  return x > 0 ? "inf" : "-inf";
}

double score_from_json(const nlohmann::json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "-inf") return kNegInf;
    if (s == "inf") return std::numeric_limits<double>::infinity();
  }
  if (j.is_null()) return kNegInf;
  throw ParseError("bad score value in report");
}

}  // namespace

std::string report_to_json(const EvalReport& r) {
  nlohmann::json doc;
  doc["metadata"] = {
      {"circuit_hash", r.circuit_hash}, {"qr", r.qr},
      {"mode", mode_name(r.mode)},      {"seed", r.seed},
      {"n_problems", r.n_problems},     {"timing_reps", r.timing_reps},
      {"score_round", r.score_round},   {"source", r.source},
  };
  nlohmann::json methods = nlohmann::json::array();
  for (const MethodResult& m : r.methods) {
    nlohmann::json scores = nlohmann::json::array();
    for (double s : m.scores) scores.push_back(score_to_json(s));
    methods.push_back({
        {"name", m.name},
        {"mean_ll", score_to_json(m.mean_ll)},
        {"stddev_ll", m.stddev_ll},
        {"mean_time_s", m.mean_time_s},
        {"n_excluded", m.n_excluded},
        {"scores", std::move(scores)},
        {"times_s", m.times_s},
        {"errors", m.error_flags},
    });
  }
  doc["methods"] = std::move(methods);
  return doc.dump(2);
}

EvalReport report_from_json(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("invalid report JSON: ") + e.what());
  }
  try {
    EvalReport r;
    const auto& meta = doc.at("metadata");
    r.circuit_hash = meta.at("circuit_hash").get<std::uint64_t>();
    r.qr = meta.at("qr").get<double>();
    r.mode = mode_from_name(meta.at("mode").get<std::string>());
    r.seed = meta.at("seed").get<std::uint64_t>();
    r.n_problems = meta.at("n_problems").get<int>();
    r.timing_reps = meta.at("timing_reps").get<int>();
    r.score_round = meta.at("score_round").get<double>();
    if (meta.contains("source")) r.source = meta.at("source").get<std::string>();
    for (const auto& mj : doc.at("methods")) {
      MethodResult m;
      m.name = mj.at("name").get<std::string>();
      m.mean_ll = score_from_json(mj.at("mean_ll"));
      m.stddev_ll = mj.at("stddev_ll").get<double>();
      m.mean_time_s = mj.at("mean_time_s").get<double>();
      m.n_excluded = mj.at("n_excluded").get<int>();
      for (const auto& s : mj.at("scores")) m.scores.push_back(score_from_json(s));
      m.times_s = mj.at("times_s").get<std::vector<double>>();
      m.error_flags = mj.at("errors").get<std::vector<std::uint8_t>>();
      r.methods.push_back(std::move(m));
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed report document: ") + e.what());
  }
}

EvalReport load_report(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open report file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return report_from_json(buf.str());
}

std::string report_to_csv(const EvalReport& r) {
  std::ostringstream os;
  os << "method,mean_ll,stddev_ll,mean_time_s,n_excluded\n";
  os.precision(17);
  for (const MethodResult& m : r.methods)
    os << m.name << ',' << m.mean_ll << ',' << m.stddev_ll << ','
       << m.mean_time_s << ',' << m.n_excluded << '\n';
  return os.str();
}

}  // namespace pcmmap
