#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <string>

#include "surrosim/dataset.hpp"

namespace surrosim::harness {

struct SpeedReport {
  std::size_t blocks_evaluated = 0;  // excludes warmup
  double wall_seconds = 0.0;
  double blocks_per_second = 0.0;
  int batch_size = 1;
  std::size_t warmup_blocks = 0;
};

using Predictor = std::function<double(const isa::BasicBlock&)>;

// Evaluates `warmup_count` blocks untimed, then times one-at-a-time
// evaluation of the rest on the calling thread with a monotonic clock.
// Throws std::invalid_argument if no timed blocks remain.
SpeedReport measure_throughput(const Predictor& predictor,
                               std::span<const isa::BasicBlock> blocks,
                               std::size_t warmup_count);

struct EvalReport {
  std::size_t n = 0;
  double mean_mape = 0.0;
  // Mean error within each decile of the sorted per-item errors; zero for
  // deciles left empty by small inputs.
  std::array<double, 10> decile_mape{};
};

EvalReport evaluate_mape(const Predictor& predictor,
                         std::span<const isa::DatasetRecord> records);

// Zeroes wall-clock-derived fields ("wall_seconds", "cumulative_wall_seconds",
// "blocks_per_second", "speedup") recursively in a JSON report so
// determinism comparisons ignore timing noise.
std::string mask_timing_fields(const std::string& report_json);

using RunFn = std::function<std::string(std::uint64_t seed)>;

// Runs twice with the same seed; passes iff the masked serialized reports
// are byte-identical.
bool reproducibility_check(const RunFn& run, std::uint64_t seed);

}  // namespace surrosim::harness
