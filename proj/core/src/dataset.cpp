#include "surrosim/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <string>

#include "nlohmann/json.hpp"

namespace surrosim::isa {

using json = nlohmann::ordered_json;

void write_dataset(const std::vector<DatasetRecord>& records,
                   const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot open for writing: " + path.string());
  }
  for (const DatasetRecord& rec : records) {
    json line;
    line["block"] = serialize_block(rec.block);
    if (rec.params) line["params"] = *rec.params;
    line["label"] = rec.label;
    out << line.dump() << '\n';
  }
  if (!out) {
    throw std::runtime_error("write failed: " + path.string());
  }
}

std::vector<DatasetRecord> read_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open for reading: " + path.string());
  }
  std::vector<DatasetRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json obj = json::parse(line, nullptr, false);
    if (obj.is_discarded() || !obj.is_object()) {
      throw SchemaError("line " + std::to_string(line_no) + ": not a JSON object",
                        line_no);
    }
    if (!obj.contains("block") || !obj["block"].is_string()) {
      throw SchemaError("line " + std::to_string(line_no) + ": missing \"block\"",
                        line_no);
    }
    if (!obj.contains("label") || !obj["label"].is_number()) {
      throw SchemaError("line " + std::to_string(line_no) + ": missing \"label\"",
                        line_no);
    }
    DatasetRecord rec;
    try {
      rec.block = parse_block(obj["block"].get<std::string>());
    } catch (const ParseError& e) {
      throw SchemaError("line " + std::to_string(line_no) + ": " + e.what(),
                        line_no);
    }
    if (obj.contains("params")) {
      if (!obj["params"].is_array()) {
        throw SchemaError(
            "line " + std::to_string(line_no) + ": \"params\" must be an array",
            line_no);
      }
      rec.params = obj["params"].get<std::vector<double>>();
    }
    rec.label = obj["label"].get<double>();
    if (!(rec.label > 0.0)) {
      throw SchemaError("line " + std::to_string(line_no) + ": label must be > 0",
                        line_no);
    }
    records.push_back(std::move(rec));
  }
  return records;
}

DatasetSplit split_dataset(std::vector<DatasetRecord> records,
                           const SplitFractions& fractions,
                           std::uint64_t split_seed) {
  const double sum = fractions.train + fractions.validation + fractions.test;
  if (fractions.train <= 0.0 || fractions.validation <= 0.0 ||
      fractions.test <= 0.0 || std::abs(sum - 1.0) > 1e-9) {
    throw std::invalid_argument("split fractions must be positive and sum to 1");
  }

  const std::size_t n = records.size();
  const auto n_train = static_cast<std::size_t>(std::llround(
      static_cast<double>(n) * fractions.train));
  const auto n_val = static_cast<std::size_t>(std::llround(
      static_cast<double>(n) * fractions.validation));
  if (n_train == 0 || n_val == 0 || n_train + n_val >= n) {
    throw std::invalid_argument("fewer records than splits");
  }

  Rng rng(split_seed);
  rng.shuffle(records);

  DatasetSplit split;
  split.split_seed = split_seed;
  split.train.assign(records.begin(), records.begin() + static_cast<long>(n_train));
  split.validation.assign(records.begin() + static_cast<long>(n_train),
                          records.begin() + static_cast<long>(n_train + n_val));
  split.test.assign(records.begin() + static_cast<long>(n_train + n_val),
                    records.end());
  return split;
}

std::vector<DatasetRecord> subsample_fraction(
    const std::vector<DatasetRecord>& records, double fraction,
    std::uint64_t seed) {
  if (!(fraction > 0.0) || fraction > 1.0) {
    throw std::invalid_argument("fraction must be in (0, 1]");
  }
  const auto k = static_cast<std::size_t>(
      std::ceil(fraction * static_cast<double>(records.size())));
  std::vector<std::size_t> idx(records.size());
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  rng.shuffle(idx);
  idx.resize(k);
  // Restore original relative order so the sample reads like the source.
  std::sort(idx.begin(), idx.end());
  std::vector<DatasetRecord> out;
  out.reserve(k);
  for (std::size_t i : idx) out.push_back(records[i]);
  return out;
}

}  // namespace surrosim::isa
