#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "surrosim/isa.hpp"

namespace surrosim::sim {

inline constexpr int kNumPorts = 3;
// 12 opcode latencies + 12x3 port-mask bits + dispatch/retire/rob globals.
inline constexpr int kFlatDim = isa::kNumOpcodes * (1 + kNumPorts) + 3;

inline constexpr int kMinLatency = 1;
inline constexpr int kMaxLatency = 32;
inline constexpr int kMinWidth = 1;
inline constexpr int kMaxWidth = 8;
inline constexpr int kMinRob = 2;
inline constexpr int kMaxRob = 64;

struct SimParams {
  std::array<int, isa::kNumOpcodes> latency{};            // 1..32 cycles
  std::array<std::uint8_t, isa::kNumOpcodes> port_mask{}; // nonempty subset of ports {0,1,2}
  int dispatch_width = 4;                                 // 1..8
  int retire_width = 4;                                   // 1..8
  int rob_size = 32;                                      // 2..64, >= dispatch_width

  bool operator==(const SimParams&) const = default;
};

void validate(const SimParams& params);

struct ParamBounds {
  std::array<double, kFlatDim> lower{};
  std::array<double, kFlatDim> upper{};
};

// Canonical bounds matching the ranges above (port bits in {0,1}).
const ParamBounds& param_bounds();

struct SimResult {
  std::int64_t total_cycles = 0;
  double cycles_per_iteration = 0.0;  // total_cycles / iterations
};

// Cycle-accurate model of the block unrolled `iterations` times.
// Per cycle, in order: retire (in program order, up to retire_width completed
// instructions from the reorder-buffer head), issue (program-order scan of
// un-issued buffered instructions; needs every source ready and a free
// allowed port, lowest free port wins, ports are fully pipelined), dispatch
// (up to dispatch_width instructions into the reorder buffer; they may issue
// no earlier than the next cycle). Registers start ready at cycle 0.
SimResult simulate(const isa::BasicBlock& block, const SimParams& params,
                   int iterations);

// The fixed expert baseline configuration (stands in for a hand-tuned
// vendor parameter set). Constant across artifact versions.
SimParams default_params();

// Hidden configuration behind the ground-truth oracle.
struct GroundTruthSpec {
  SimParams hidden_params;
  bool fusion_enabled = true;
};

const GroundTruthSpec& ground_truth_spec();

// Deterministic stand-in for measured timings: simulate under the hidden
// parameters, with each MOV that immediately precedes an arithmetic consumer
// of its destination fused into that consumer (the pair dispatches, issues,
// and retires as one instruction with the consumer's latency). Returns
// cycles per iteration at K=100.
double ground_truth(const isa::BasicBlock& block);
SimResult ground_truth_result(const isa::BasicBlock& block, int iterations);

// Canonical flattening: latency[op 0..11], then port bits opcode-major
// (op0:p0,p1,p2, op1:p0,...), then dispatch_width, retire_width, rob_size.
std::array<double, kFlatDim> flatten_params(const SimParams& params);
// Throws std::invalid_argument on wrong dimension or invariant violation.
SimParams unflatten_params(std::span<const double> flat);

// true = frozen. Defaults freeze port bits and the three globals, leaving
// the 12 latencies free.
using FrozenMask = std::array<bool, kFlatDim>;
FrozenMask default_frozen_mask();
FrozenMask frozen_mask_with_free_globals();

// Frozen coordinates come from default_params(); free coordinates round to
// nearest integer (ties to even) and clamp to bounds. Result always valid.
SimParams round_and_clamp(std::span<const double> flat, const ParamBounds& bounds,
                          const FrozenMask& frozen);

// Uniform integer draw within bounds; frozen coordinates held at defaults.
SimParams sample_params(Rng& rng, const FrozenMask& frozen);
SimParams sample_params(Rng& rng);  // every coordinate free

// Params file: '#' comment header documenting the flatten order, then
// `latency <MNEMONIC> <int>`, `ports <MNEMONIC> <p...>`, and the globals.
void write_params_file(const SimParams& params, const std::filesystem::path& path);
SimParams read_params_file(const std::filesystem::path& path);

}  // namespace surrosim::sim
