#include "pcmmap/sampler.hpp"

#include <omp.h>

#include <fstream>
#include <sstream>

#include "pcmmap/threads.hpp"

namespace pcmmap {

Assignment EvidenceDataset::row_assignment(int i) const {
  Assignment a;
  for (int j = 0; j < width(); ++j)
    a.set(variable_indices[j], rows[i][j] != 0);
  return a;
}

Assignment sample_full(const Circuit& c, SplitMix64& rng) {
  std::vector<std::int8_t> value(c.num_variables(), -1);
  std::vector<int> stack{c.root()};
  while (!stack.empty()) {
    const int n = stack.back();
    stack.pop_back();
    switch (c.kind(n)) {
      case NodeKind::Leaf: {
        const LeafLabel l = c.leaf(n);
        const std::int8_t v = l.negated ? 0 : 1;
        if (value[l.var] != -1 && value[l.var] != v)
          throw ConflictingLeafAssignment(
              "descent assigned two values to " + c.variables()[l.var]);
        value[l.var] = v;
        break;
      }
      case NodeKind::Sum: {
        auto ch = c.children(n);
        auto w = c.weights(n);
        const double u = rng.uniform01();
        double cum = 0.0;
        int chosen = ch[ch.size() - 1];  // catches floating residue
        for (std::size_t i = 0; i < ch.size(); ++i) {
          cum += w[i];
          if (u < cum) {
            chosen = ch[i];
            break;
          }
        }
        stack.push_back(chosen);
        break;
      }
      case NodeKind::Product:
        for (int m : c.children(n)) stack.push_back(m);
        break;
    }
  }
  Assignment out;
  for (int v = 0; v < c.num_variables(); ++v) {
    if (value[v] == -1)
      throw ConflictingLeafAssignment("descent never reached variable " +
                                      c.variables()[v]);
    out.set(v, value[v] != 0);
  }
  return out;
}

EvidenceDataset generate_dataset(const Circuit& c, const VariablePartition& p,
                                 int n, std::uint64_t seed, int threads) {
  if (n < 1) throw InvalidSpec("dataset size must be >= 1");
  EvidenceDataset d;
  d.variable_indices = p.evidence;
  for (int v : p.evidence) d.variables.push_back(c.variables()[v]);
  d.circuit_hash = c.content_hash();
  d.seed = seed;
  d.rows.resize(n);

  const int T = resolve_threads(threads);
#pragma omp parallel for schedule(static) num_threads(T)
  for (int i = 0; i < n; ++i) {
    SplitMix64 rng = SplitMix64::substream(seed, static_cast<std::uint64_t>(i));
    const Assignment full = sample_full(c, rng);
    std::vector<std::uint8_t> row(p.evidence.size());
    for (std::size_t j = 0; j < p.evidence.size(); ++j)
      row[j] = *full.get(p.evidence[j]) ? 1 : 0;
    d.rows[i] = std::move(row);
  }
  return d;
}

EvidenceDataset generate_dataset_serial(const Circuit& c,
                                        const VariablePartition& p, int n,
                                        std::uint64_t seed) {
  return generate_dataset(c, p, n, seed, 1);
}

std::string dataset_to_csv(const EvidenceDataset& d) {
  std::ostringstream os;
  for (int j = 0; j < d.width(); ++j) {
    if (j) os << ',';
    os << d.variables[j];
  }
  os << '\n';
  for (const auto& row : d.rows) {
    for (int j = 0; j < d.width(); ++j) {
      if (j) os << ',';
      os << static_cast<int>(row[j]);
    }
    os << '\n';
  }
  return os.str();
}

EvidenceDataset dataset_from_csv(const Circuit& c, const VariablePartition& p,
                                 const std::string& csv) {
  EvidenceDataset d;
  d.variable_indices = p.evidence;
  for (int v : p.evidence) d.variables.push_back(c.variables()[v]);
  d.circuit_hash = c.content_hash();

  std::istringstream in(csv);
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty dataset file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::string expected_header;
  for (int j = 0; j < d.width(); ++j) {
    if (j) expected_header += ',';
    expected_header += d.variables[j];
  }
  if (line != expected_header)
    throw ParseError("dataset columns '" + line +
                     "' do not match the evidence variables '" +
                     expected_header + "'");
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::uint8_t> row;
    std::size_t pos = 0;
    while (pos <= line.size()) {
      std::size_t end = line.find(',', pos);
      if (end == std::string::npos) end = line.size();
      const std::string cell = line.substr(pos, end - pos);
      if (cell != "0" && cell != "1")
        throw ParseError("line " + std::to_string(line_no) +
                         ": expected 0 or 1, got '" + cell + "'");
      row.push_back(cell == "1" ? 1 : 0);
      pos = end + 1;
    }
    if (static_cast<int>(row.size()) != d.width())
      throw ParseError("line " + std::to_string(line_no) + " has " +
                       std::to_string(row.size()) + " cells, expected " +
                       std::to_string(d.width()));
    d.rows.push_back(std::move(row));
  }
  return d;
}

EvidenceDataset load_dataset(const Circuit& c, const VariablePartition& p,
                             const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open dataset file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return dataset_from_csv(c, p, buf.str());
}

}  // namespace pcmmap
