#include <doctest.h>

#include <cmath>

#include "pcmmap/eval.hpp"
#include "support.hpp"

using namespace pcmmap;
using pcmmap::testing::load_fig1;

namespace {

SolverHandle brute_handle() {
  return {"bruteforce",
          [](const MmapProblem& p) { return brute_force_mmap(p, 1); }};
}

EvalReport synthetic_report(std::vector<std::pair<std::string, double>> means) {
  EvalReport r;
  r.n_problems = 1;
  for (auto& [name, mean] : means) {
    MethodResult m;
    m.name = name;
    m.mean_ll = mean;
    m.scores = {mean};
    m.error_flags = {0};
    m.times_s = {0.0};
    r.methods.push_back(std::move(m));
  }
  return r;
}

}  // namespace

TEST_CASE("problem generation splits the variables as specified") {
  Circuit c = random_circuit(10, 2, 2, 31);

  SUBCASE("MPE: all remaining variables are evidence") {
    ProblemSet ps = generate_problems(c, 0.5, ProblemMode::MPE, 4, 7);
    CHECK(ps.partition.m() == 5);
    CHECK(ps.partition.n() == 5);
    CHECK(ps.partition.k() == 0);
    CHECK(ps.size() == 4);
    for (int i = 0; i < ps.size(); ++i)
      CHECK(ps.evidences[i].size() == 5);
  }
  SUBCASE("MMAP: half of the remaining variables are evidence") {
    ProblemSet ps = generate_problems(c, 0.4, ProblemMode::MMAP, 4, 7);
    CHECK(ps.partition.m() == 4);
    CHECK(ps.partition.n() == 3);
    CHECK(ps.partition.k() == 3);
  }
  SUBCASE("deterministic in the seed") {
    ProblemSet a = generate_problems(c, 0.5, ProblemMode::MMAP, 6, 3);
    ProblemSet b = generate_problems(c, 0.5, ProblemMode::MMAP, 6, 3);
    CHECK(a.partition.query == b.partition.query);
    CHECK(a.evidences == b.evidences);
    ProblemSet other = generate_problems(c, 0.5, ProblemMode::MMAP, 6, 4);
    CHECK((a.partition.query != other.partition.query ||
           a.evidences != other.evidences));
  }
  SUBCASE("degenerate MMAP partition is an error") {
    CHECK_THROWS_AS(generate_problems(c, 0.85, ProblemMode::MMAP, 2, 5),
                    DegeneratePartition);
  }
  SUBCASE("query ratio bounds") {
    CHECK_THROWS_AS(generate_problems(c, 0.0, ProblemMode::MPE, 1, 0),
                    InvalidSpec);
    CHECK_THROWS_AS(generate_problems(c, 1.0, ProblemMode::MPE, 1, 0),
                    InvalidSpec);
  }
}

TEST_CASE("compare runs every method on every problem") {
  Circuit c = load_fig1();
  ProblemSet ps = generate_problems(c, 0.5, ProblemMode::MMAP, 5, 11);

  SUBCASE("single method, single problem equals a direct call") {
    ProblemSet one = generate_problems(c, 0.5, ProblemMode::MMAP, 1, 11);
    std::vector<SolverHandle> methods{brute_handle()};
    EvalReport r = compare(methods, one, 1, 1);
    REQUIRE(r.methods.size() == 1);
    REQUIRE(r.methods[0].scores.size() == 1);
    CHECK(r.methods[0].scores[0] == brute_force_mmap(one.problem(0)).log_score);
    CHECK(r.methods[0].n_excluded == 0);
  }
  SUBCASE("the exact method dominates every approximation") {
    std::vector<SolverHandle> methods{
        brute_handle(),
        {"max", [](const MmapProblem& p) { return max_approx(p); }},
        {"ml", [](const MmapProblem& p) { return ml_approx(p); }},
        {"seq", [](const MmapProblem& p) { return seq_approx(p); }},
    };
    EvalReport r = compare(methods, ps, 1, 1);
    for (std::size_t m = 1; m < r.methods.size(); ++m) {
      CHECK(r.methods[m].mean_ll <= r.methods[0].mean_ll + 1e-9);
      for (int i = 0; i < ps.size(); ++i)
        CHECK(r.methods[m].scores[i] <= r.methods[0].scores[i] + 1e-9);
    }
  }
  SUBCASE("a deterministic method listed twice gives identical columns") {
    std::vector<SolverHandle> methods{brute_handle(), brute_handle()};
    EvalReport r = compare(methods, ps, 1, 2);
    CHECK(r.methods[0].scores == r.methods[1].scores);
  }
  SUBCASE("solver errors are recorded, not fatal") {
    std::vector<SolverHandle> methods{
        brute_handle(),
        {"broken", [](const MmapProblem&) -> MmapSolution {
           throw QueryTooLarge("always fails");
         }},
    };
    EvalReport r = compare(methods, ps, 1, 1);
    CHECK(r.methods[1].n_excluded == ps.size());
    for (int i = 0; i < ps.size(); ++i) {
      CHECK(r.methods[1].error_flags[i] == 1);
      CHECK(std::isinf(r.methods[1].scores[i]));
    }
    CHECK(r.methods[0].n_excluded == 0);
  }
  SUBCASE("needs at least one method") {
    CHECK_THROWS_AS(compare({}, ps, 1, 1), InvalidSpec);
  }
}

TEST_CASE("contingency tables count strict wins") {
  // A beats B on 3 datasets, loses 1, ties 1.
  std::vector<EvalReport> reports{
      synthetic_report({{"A", -1.0}, {"B", -2.0}}),
      synthetic_report({{"A", -1.5}, {"B", -2.5}}),
      synthetic_report({{"A", -3.0}, {"B", -3.5}}),
      synthetic_report({{"A", -4.0}, {"B", -3.0}}),
      synthetic_report({{"A", -2.0}, {"B", -2.0}}),
  };
  ContingencyTable t = contingency(reports);
  CHECK(t.wins[0][1] == 3);
  CHECK(t.wins[1][0] == 1);
  CHECK(t.wins[0][0] == 0);
  CHECK(t.wins[0][1] + t.wins[1][0] <= t.n_datasets);

  SUBCASE("one dataset, exact tie") {
    std::vector<EvalReport> tied{synthetic_report({{"A", -2.0}, {"B", -2.0}})};
    ContingencyTable tt = contingency(tied);
    CHECK(tt.wins[0][1] == 0);
    CHECK(tt.wins[1][0] == 0);
  }
  SUBCASE("sub-rounding differences count as ties") {
    std::vector<EvalReport> close{
        synthetic_report({{"A", -2.0}, {"B", -2.0 - 1e-12}})};
    ContingencyTable tt = contingency(close);
    CHECK(tt.wins[0][1] == 0);
  }
  SUBCASE("mismatched method sets") {
    std::vector<EvalReport> bad{synthetic_report({{"A", -1.0}, {"B", -2.0}}),
                                synthetic_report({{"A", -1.0}, {"C", -2.0}})};
    CHECK_THROWS_AS(contingency(bad), MethodSetMismatch);
  }
  SUBCASE("rendering") {
    CHECK(t.to_text().find("datasets: 5") != std::string::npos);
    CHECK(t.to_csv().substr(0, 10) == "method,A,B");
  }
}

TEST_CASE("percent difference formula") {
  CHECK(percent_diff(-2.0, -2.5) == 20.0);  // exact
  CHECK(percent_diff(-3.14, -3.14) == 0.0);
  CHECK(percent_diff(-3.0, -2.0) == -50.0);
  CHECK_THROWS_AS(percent_diff(1.0, 0.0), DivisionByZero);
}

TEST_CASE("hill-climb labeling") {
  Circuit c = load_fig1();
  ProblemSet ps = generate_problems(c, 0.5, ProblemMode::MMAP, 8, 17);

  SUBCASE("long runs reach the exact optimum on a 2-variable landscape") {
    std::vector<LabeledExample> labels = label_with_hill_climb(ps, 1000, 5);
    REQUIRE(labels.size() == static_cast<std::size_t>(ps.size()));
    for (int i = 0; i < ps.size(); ++i) {
      const MmapSolution best = brute_force_mmap(ps.problem(i));
      Assignment label_q;
      for (std::size_t j = 0; j < ps.partition.query.size(); ++j)
        label_q.set(ps.partition.query[j], labels[i].query_bits[j] != 0);
      const double label_score = score(c, ps.evidences[i], label_q);
      CHECK(label_score == doctest::Approx(best.log_score).epsilon(1e-9));
    }
  }
  SUBCASE("deterministic in the seed; zero iterations keep the random init") {
    std::vector<LabeledExample> a = label_with_hill_climb(ps, 0, 5);
    std::vector<LabeledExample> b = label_with_hill_climb(ps, 0, 5);
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].query_bits == b[i].query_bits);
      CHECK(a[i].evidence_bits == b[i].evidence_bits);
    }
  }
}

TEST_CASE("report JSON and CSV round trips") {
  Circuit c = load_fig1();
  ProblemSet ps = generate_problems(c, 0.5, ProblemMode::MMAP, 3, 2);
  std::vector<SolverHandle> methods{
      brute_handle(), {"ml", [](const MmapProblem& p) { return ml_approx(p); }}};
  EvalReport r = compare(methods, ps, 2, 1);

  EvalReport back = report_from_json(report_to_json(r));
  REQUIRE(back.methods.size() == r.methods.size());
  for (std::size_t m = 0; m < r.methods.size(); ++m) {
    CHECK(back.methods[m].name == r.methods[m].name);
    CHECK(back.methods[m].mean_ll == r.methods[m].mean_ll);
    CHECK(back.methods[m].scores == r.methods[m].scores);
  }
  CHECK(back.circuit_hash == r.circuit_hash);
  CHECK(back.n_problems == 3);

  const std::string csv = report_to_csv(r);
  CHECK(csv.find("bruteforce") != std::string::npos);
  CHECK(csv.substr(0, 6) == "method");
}
