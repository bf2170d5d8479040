#include <doctest.h>

#include <cmath>

#include "pcmmap/sampler.hpp"
#include "support.hpp"

using namespace pcmmap;
using pcmmap::testing::load_fig1;

namespace {

VariablePartition all_evidence(const Circuit& c) {
  std::vector<int> e;
  for (int v = 1; v < c.num_variables(); ++v) e.push_back(v);
  return VariablePartition::make(c, e, {0}, {});
}

}  // namespace

TEST_CASE("samples are complete assignments on the circuit's support") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Circuit c = random_circuit(3 + static_cast<int>(seed), 2, 2, seed);
    SplitMix64 rng = SplitMix64::substream(seed, 1);
    for (int rep = 0; rep < 20; ++rep) {
      Assignment full = sample_full(c, rng);
      CHECK(full.size() == static_cast<std::size_t>(c.num_variables()));
      CHECK(marginal(c, full) > 0.0);
    }
  }
}

TEST_CASE("single-variable frequencies follow the weights") {
  const char* doc = R"({
    "variables": ["X"],
    "nodes": [
      {"id": 0, "kind": "sum",
       "children": [{"id": 1, "weight": 0.7}, {"id": 2, "weight": 0.3}]},
      {"id": 1, "kind": "leaf", "var": "X", "negated": true},
      {"id": 2, "kind": "leaf", "var": "X", "negated": false}
    ],
    "root": 0
  })";
  Circuit c = parse_circuit(doc);
  int zeros = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    SplitMix64 rng = SplitMix64::substream(11, i);
    zeros += *sample_full(c, rng).get(0) ? 0 : 1;
  }
  CHECK(std::abs(zeros / static_cast<double>(n) - 0.7) < 0.01);
}

TEST_CASE("fig1 univariate frequencies match the exact marginals") {
  Circuit c = load_fig1();
  const int n = 100000;
  int count_x1 = 0;
  for (int i = 0; i < n; ++i) {
    SplitMix64 rng = SplitMix64::substream(7, i);
    count_x1 += *sample_full(c, rng).get(0) ? 1 : 0;
  }
  CHECK(std::abs(count_x1 / static_cast<double>(n) - 0.3) < 0.005);
}

TEST_CASE("pairwise empirical joints are within 3 standard errors") {
  Circuit c = load_fig1();
  const int n = 100000;
  // Counts for every (variable pair, value pair).
  int counts[4][4][2][2] = {};
  for (int i = 0; i < n; ++i) {
    SplitMix64 rng = SplitMix64::substream(21, i);
    Assignment full = sample_full(c, rng);
    for (int a = 0; a < 4; ++a)
      for (int b = a + 1; b < 4; ++b)
        ++counts[a][b][*full.get(a) ? 1 : 0][*full.get(b) ? 1 : 0];
  }
  for (int a = 0; a < 4; ++a) {
    for (int b = a + 1; b < 4; ++b) {
      for (int va = 0; va < 2; ++va) {
        for (int vb = 0; vb < 2; ++vb) {
          Assignment pair;
          pair.set(a, va == 1);
          pair.set(b, vb == 1);
          const double p = marginal(c, pair);
          const double se = std::sqrt(p * (1.0 - p) / n);
          const double emp = counts[a][b][va][vb] / static_cast<double>(n);
          CHECK(std::abs(emp - p) <= 3.0 * se);
        }
      }
    }
  }
}

TEST_CASE("univariate frequencies stay within 4 standard errors across seeds") {
  Circuit c = load_fig1();
  const int n = 2000;
  int runs_ok = 0;
  const int n_runs = 100;
  for (int run = 0; run < n_runs; ++run) {
    int counts[4] = {};
    for (int i = 0; i < n; ++i) {
      SplitMix64 rng = SplitMix64::substream(1000 + run, i);
      Assignment full = sample_full(c, rng);
      for (int v = 0; v < 4; ++v) counts[v] += *full.get(v) ? 1 : 0;
    }
    bool ok = true;
    for (int v = 0; v < 4; ++v) {
      Assignment one;
      one.set(v, true);
      const double p = marginal(c, one);
      const double bound = 4.0 * std::sqrt(p * (1.0 - p) / n);
      ok = ok && std::abs(counts[v] / static_cast<double>(n) - p) <= bound;
    }
    runs_ok += ok;
  }
  CHECK(runs_ok >= 99);
}

TEST_CASE("dataset generation") {
  Circuit c = load_fig1();
  VariablePartition p = all_evidence(c);

  SUBCASE("deterministic in the seed") {
    EvidenceDataset a = generate_dataset(c, p, 50, 123);
    EvidenceDataset b = generate_dataset(c, p, 50, 123);
    CHECK(a.rows == b.rows);
    CHECK(a.circuit_hash == c.content_hash());
    EvidenceDataset other = generate_dataset(c, p, 50, 124);
    CHECK(a.rows != other.rows);
  }
  SUBCASE("row shape and projection order follow the evidence set") {
    EvidenceDataset d = generate_dataset(c, p, 10, 5);
    CHECK(d.variables == std::vector<std::string>{"X2", "X3", "X4"});
    for (const auto& row : d.rows) {
      CHECK(row.size() == 3);
      for (auto v : row) CHECK((v == 0 || v == 1));
    }
  }
  SUBCASE("n must be positive") {
    CHECK_THROWS_AS(generate_dataset(c, p, 0, 1), InvalidSpec);
  }
}

TEST_CASE("CSV round trip") {
  Circuit c = load_fig1();
  VariablePartition p = all_evidence(c);
  EvidenceDataset d = generate_dataset(c, p, 25, 77);
  const std::string csv = dataset_to_csv(d);
  CHECK(csv.substr(0, 9) == "X2,X3,X4\n");
  EvidenceDataset back = dataset_from_csv(c, p, csv);
  CHECK(back.rows == d.rows);

  CHECK_THROWS_AS(dataset_from_csv(c, p, "X4,X3,X2\n0,0,0\n"), ParseError);
  CHECK_THROWS_AS(dataset_from_csv(c, p, "X2,X3,X4\n0,0\n"), ParseError);
  CHECK_THROWS_AS(dataset_from_csv(c, p, "X2,X3,X4\n0,2,0\n"), ParseError);
}
