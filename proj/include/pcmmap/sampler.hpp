#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pcmmap/circuit.hpp"
#include "pcmmap/mmap.hpp"
#include "pcmmap/rng.hpp"

namespace pcmmap {

// Rows of 0/1 evidence values, one column per evidence variable in partition
// order. Provenance fields identify the generating circuit and seed.
struct EvidenceDataset {
  std::vector<std::string> variables;
  std::vector<int> variable_indices;
  std::vector<std::vector<std::uint8_t>> rows;
  std::uint64_t circuit_hash = 0;
  std::uint64_t seed = 0;

  int n() const { return static_cast<int>(rows.size()); }
  int width() const { return static_cast<int>(variables.size()); }

  Assignment row_assignment(int i) const;
};

// Top-down sampling of a complete assignment: sum nodes choose one child with
// probability equal to the edge weight, product nodes descend all children,
// leaves set their variable. Linear in the circuit size.
Assignment sample_full(const Circuit& c, SplitMix64& rng);

// n independent draws projected onto the evidence variables. Row i uses
// rng substream (seed, i), so the result is identical for any thread count.
EvidenceDataset generate_dataset(const Circuit& c, const VariablePartition& p,
                                 int n, std::uint64_t seed, int threads = 0);
EvidenceDataset generate_dataset_serial(const Circuit& c,
                                        const VariablePartition& p, int n,
                                        std::uint64_t seed);

// First line: comma-separated variable names; then one 0/1 row per line.
// No quoting, LF line endings.
std::string dataset_to_csv(const EvidenceDataset& d);
EvidenceDataset dataset_from_csv(const Circuit& c, const VariablePartition& p,
                                 const std::string& csv);
EvidenceDataset load_dataset(const Circuit& c, const VariablePartition& p,
                             const std::string& path);

}  // namespace pcmmap
