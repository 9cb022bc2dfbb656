#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <vector>

#include "surrosim/isa.hpp"

namespace surrosim::isa {

struct DatasetRecord {
  BasicBlock block;
  // Flattened SimParams vector; present only in (block, params) datasets
  // used by the surrogate-optimization pattern.
  std::optional<std::vector<double>> params;
  double label = 0.0;  // cycles per block iteration, > 0

  bool operator==(const DatasetRecord&) const = default;
};

struct SchemaError : std::runtime_error {
  SchemaError(const std::string& what, std::size_t line_number)
      : std::runtime_error(what), line(line_number) {}
  std::size_t line;  // 1-based
};

struct SplitFractions {
  double train = 0.8;
  double validation = 0.1;
  double test = 0.1;
};

struct DatasetSplit {
  std::vector<DatasetRecord> train;
  std::vector<DatasetRecord> validation;
  std::vector<DatasetRecord> test;
  std::uint64_t split_seed = 0;
};

// One JSON object per line, keys {"block","params","label"}; "params" is
// omitted when absent. read_dataset(write_dataset(r)) == r.
void write_dataset(const std::vector<DatasetRecord>& records,
                   const std::filesystem::path& path);
std::vector<DatasetRecord> read_dataset(const std::filesystem::path& path);

// Deterministic shuffle by split_seed, then contiguous partition.
// Throws std::invalid_argument if any part would be empty.
DatasetSplit split_dataset(std::vector<DatasetRecord> records,
                           const SplitFractions& fractions,
                           std::uint64_t split_seed);

// ceil(fraction * N) records sampled without replacement, deterministic.
std::vector<DatasetRecord> subsample_fraction(
    const std::vector<DatasetRecord>& records, double fraction,
    std::uint64_t seed);

}  // namespace surrosim::isa
