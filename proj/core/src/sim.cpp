#include "surrosim/sim.hpp"

#include <cfenv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>

namespace surrosim::sim {

void validate(const SimParams& params) {
  for (int op = 0; op < isa::kNumOpcodes; ++op) {
    const int lat = params.latency[static_cast<std::size_t>(op)];
    if (lat < kMinLatency || lat > kMaxLatency) {
      throw std::invalid_argument("latency out of range 1..32");
    }
    const std::uint8_t mask = params.port_mask[static_cast<std::size_t>(op)];
    if (mask == 0 || mask > 0b111) {
      throw std::invalid_argument("port mask must be a nonempty subset of {0,1,2}");
    }
  }
  if (params.dispatch_width < kMinWidth || params.dispatch_width > kMaxWidth ||
      params.retire_width < kMinWidth || params.retire_width > kMaxWidth) {
    throw std::invalid_argument("dispatch/retire width out of range 1..8");
  }
  if (params.rob_size < kMinRob || params.rob_size > kMaxRob) {
    throw std::invalid_argument("rob_size out of range 2..64");
  }
  if (params.rob_size < params.dispatch_width) {
    throw std::invalid_argument("rob_size must be >= dispatch_width");
  }
}

const ParamBounds& param_bounds() {
  static const ParamBounds bounds = [] {
    ParamBounds b;
    int i = 0;
    for (int op = 0; op < isa::kNumOpcodes; ++op, ++i) {
      b.lower[static_cast<std::size_t>(i)] = kMinLatency;
      b.upper[static_cast<std::size_t>(i)] = kMaxLatency;
    }
    for (int bit = 0; bit < isa::kNumOpcodes * kNumPorts; ++bit, ++i) {
      b.lower[static_cast<std::size_t>(i)] = 0;
      b.upper[static_cast<std::size_t>(i)] = 1;
    }
    b.lower[static_cast<std::size_t>(i)] = kMinWidth;      // dispatch_width
    b.upper[static_cast<std::size_t>(i)] = kMaxWidth;
    ++i;
    b.lower[static_cast<std::size_t>(i)] = kMinWidth;      // retire_width
    b.upper[static_cast<std::size_t>(i)] = kMaxWidth;
    ++i;
    b.lower[static_cast<std::size_t>(i)] = kMinRob;        // rob_size
    b.upper[static_cast<std::size_t>(i)] = kMaxRob;
    return b;
  }();
  return bounds;
}

namespace {

// Reorder-buffer slot. Instruction operands are cached at dispatch so the
// cycle loop never touches the instruction stream again.
struct RobEntry {
  std::int64_t completion = 0;
  std::int64_t dispatch_cycle = 0;
  std::int32_t latency = 0;
  std::uint8_t port_mask = 0;
  std::uint8_t n_srcs = 0;
  std::uint8_t srcs[2] = {0, 0};
  std::int8_t dest = -1;
  bool issued = false;
};

constexpr std::size_t kRobRing = 64;  // power of two >= kMaxRob

template <class InstrAt>
std::int64_t run_pipeline(std::size_t count, InstrAt&& instr_at,
                          const SimParams& p) {
  if (count == 0) return 0;

  std::array<std::int64_t, isa::kNumRegisters> reg_ready{};
  std::array<RobEntry, kRobRing> rob;
  std::size_t head = 0;
  std::size_t rob_count = 0;
  std::size_t dispatched = 0;
  std::size_t retired = 0;
  const auto rob_cap = static_cast<std::size_t>(p.rob_size);

  for (std::int64_t t = 0;; ++t) {
    // Retire: in program order from the buffer head, completed only.
    int retired_now = 0;
    while (retired_now < p.retire_width && rob_count > 0) {
      const RobEntry& e = rob[head];
      if (!e.issued || e.completion > t) break;
      head = (head + 1) & (kRobRing - 1);
      --rob_count;
      ++retired;
      ++retired_now;
    }
    if (retired == count) return t + 1;

    // Issue: program-order scan of buffered, un-issued instructions.
    bool port_used[kNumPorts] = {false, false, false};
    int free_ports = kNumPorts;
    for (std::size_t k = 0; k < rob_count && free_ports > 0; ++k) {
      RobEntry& e = rob[(head + k) & (kRobRing - 1)];
      if (e.issued || e.dispatch_cycle >= t) continue;
      bool ready = true;
      for (int s = 0; s < e.n_srcs; ++s) {
        if (reg_ready[e.srcs[s]] > t) {
          ready = false;
          break;
        }
      }
      if (!ready) continue;
      int port = -1;
      for (int j = 0; j < kNumPorts; ++j) {
        if (((e.port_mask >> j) & 1) && !port_used[j]) {
          port = j;
          break;
        }
      }
      if (port < 0) continue;
      port_used[port] = true;
      --free_ports;
      e.issued = true;
      e.completion = t + e.latency;
      if (e.dest >= 0) reg_ready[static_cast<std::size_t>(e.dest)] = e.completion;
    }

    // Dispatch: fill the reorder buffer; issue is possible from t+1 on.
    int dispatched_now = 0;
    while (dispatched_now < p.dispatch_width && rob_count < rob_cap &&
           dispatched < count) {
      const isa::Instruction& ins = instr_at(dispatched);
      RobEntry& e = rob[(head + rob_count) & (kRobRing - 1)];
      e.completion = 0;
      e.dispatch_cycle = t;
      e.latency = p.latency[static_cast<std::size_t>(ins.opcode)];
      e.port_mask = p.port_mask[static_cast<std::size_t>(ins.opcode)];
      e.n_srcs = static_cast<std::uint8_t>(ins.srcs.size());
      for (std::size_t s = 0; s < ins.srcs.size(); ++s) e.srcs[s] = ins.srcs[s];
      e.dest = ins.dest ? static_cast<std::int8_t>(*ins.dest) : -1;
      e.issued = false;
      ++rob_count;
      ++dispatched;
      ++dispatched_now;
    }
  }
}

}  // namespace

SimResult simulate(const isa::BasicBlock& block, const SimParams& params,
                   int iterations) {
  isa::validate(block);
  validate(params);
  if (iterations < 1) throw std::invalid_argument("iterations must be >= 1");

  const std::size_t n = block.instructions.size();
  const std::size_t count = n * static_cast<std::size_t>(iterations);
  const std::int64_t total = run_pipeline(
      count,
      [&](std::size_t i) -> const isa::Instruction& {
        return block.instructions[i % n];
      },
      params);
  return SimResult{total, static_cast<double>(total) / iterations};
}

SimParams default_params() {
  SimParams p;
  //                     ADD SUB MUL DIV AND OR XOR SHL MOV LOAD STORE CMP
  p.latency = {1, 1, 4, 12, 1, 1, 1, 1, 1, 4, 1, 1};
  p.port_mask = {
      0b011,  // ADD
      0b011,  // SUB
      0b001,  // MUL
      0b001,  // DIV
      0b011,  // AND
      0b011,  // OR
      0b011,  // XOR
      0b010,  // SHL
      0b111,  // MOV
      0b100,  // LOAD
      0b100,  // STORE
      0b011,  // CMP
  };
  p.dispatch_width = 4;
  p.retire_width = 4;
  p.rob_size = 32;
  return p;
}

const GroundTruthSpec& ground_truth_spec() {
  static const GroundTruthSpec spec = [] {
    GroundTruthSpec s;
    s.hidden_params = default_params();
    // The hidden configuration disagrees with the expert defaults on six
    // opcode latencies; port masks and globals coincide.
    s.hidden_params.latency[static_cast<std::size_t>(isa::Opcode::MUL)] = 3;
    s.hidden_params.latency[static_cast<std::size_t>(isa::Opcode::DIV)] = 16;
    s.hidden_params.latency[static_cast<std::size_t>(isa::Opcode::XOR)] = 2;
    s.hidden_params.latency[static_cast<std::size_t>(isa::Opcode::SHL)] = 2;
    s.hidden_params.latency[static_cast<std::size_t>(isa::Opcode::LOAD)] = 5;
    s.hidden_params.latency[static_cast<std::size_t>(isa::Opcode::STORE)] = 2;
    s.fusion_enabled = true;
    validate(s.hidden_params);
    return s;
  }();
  return spec;
}

namespace {

bool reads_register(const isa::Instruction& ins, std::uint8_t reg) {
  for (std::uint8_t s : ins.srcs) {
    if (s == reg) return true;
  }
  return false;
}

// Dynamic stream of the block unrolled K times, with each MOV immediately
// followed by an arithmetic reader of its destination folded into that
// reader (the reader's matching sources take the MOV's source). Single
// left-to-right pass, pairs do not overlap.
std::vector<isa::Instruction> fused_stream(const isa::BasicBlock& block,
                                           int iterations) {
  const auto& ins = block.instructions;
  const std::size_t n = ins.size();
  const std::size_t total = n * static_cast<std::size_t>(iterations);
  std::vector<isa::Instruction> out;
  out.reserve(total);
  std::size_t i = 0;
  while (i < total) {
    const isa::Instruction& cur = ins[i % n];
    if (cur.opcode == isa::Opcode::MOV && i + 1 < total) {
      const isa::Instruction& next = ins[(i + 1) % n];
      if (isa::is_arithmetic(next.opcode) && reads_register(next, *cur.dest)) {
        isa::Instruction fused = next;
        for (auto& s : fused.srcs) {
          if (s == *cur.dest) s = cur.srcs[0];
        }
        out.push_back(std::move(fused));
        i += 2;
        continue;
      }
    }
    out.push_back(cur);
    ++i;
  }
  return out;
}

}  // namespace

SimResult ground_truth_result(const isa::BasicBlock& block, int iterations) {
  isa::validate(block);
  if (iterations < 1) throw std::invalid_argument("iterations must be >= 1");
  const GroundTruthSpec& spec = ground_truth_spec();
  if (!spec.fusion_enabled) {
    return simulate(block, spec.hidden_params, iterations);
  }
  const std::vector<isa::Instruction> stream = fused_stream(block, iterations);
  const std::int64_t total = run_pipeline(
      stream.size(),
      [&](std::size_t i) -> const isa::Instruction& { return stream[i]; },
      spec.hidden_params);
  return SimResult{total, static_cast<double>(total) / iterations};
}

double ground_truth(const isa::BasicBlock& block) {
  return ground_truth_result(block, 100).cycles_per_iteration;
}

std::array<double, kFlatDim> flatten_params(const SimParams& params) {
  std::array<double, kFlatDim> flat{};
  int i = 0;
  for (int op = 0; op < isa::kNumOpcodes; ++op, ++i) {
    flat[static_cast<std::size_t>(i)] = params.latency[static_cast<std::size_t>(op)];
  }
  for (int op = 0; op < isa::kNumOpcodes; ++op) {
    for (int port = 0; port < kNumPorts; ++port, ++i) {
      flat[static_cast<std::size_t>(i)] =
          (params.port_mask[static_cast<std::size_t>(op)] >> port) & 1;
    }
  }
  flat[static_cast<std::size_t>(i++)] = params.dispatch_width;
  flat[static_cast<std::size_t>(i++)] = params.retire_width;
  flat[static_cast<std::size_t>(i++)] = params.rob_size;
  return flat;
}

SimParams unflatten_params(std::span<const double> flat) {
  if (flat.size() != kFlatDim) {
    throw std::invalid_argument("flattened params must have dimension " +
                                std::to_string(kFlatDim) + ", got " +
                                std::to_string(flat.size()));
  }
  SimParams p;
  int i = 0;
  for (int op = 0; op < isa::kNumOpcodes; ++op, ++i) {
    p.latency[static_cast<std::size_t>(op)] =
        static_cast<int>(std::llround(flat[static_cast<std::size_t>(i)]));
  }
  for (int op = 0; op < isa::kNumOpcodes; ++op) {
    std::uint8_t mask = 0;
    for (int port = 0; port < kNumPorts; ++port, ++i) {
      if (std::llround(flat[static_cast<std::size_t>(i)]) != 0) {
        mask |= static_cast<std::uint8_t>(1 << port);
      }
    }
    p.port_mask[static_cast<std::size_t>(op)] = mask;
  }
  p.dispatch_width = static_cast<int>(std::llround(flat[static_cast<std::size_t>(i++)]));
  p.retire_width = static_cast<int>(std::llround(flat[static_cast<std::size_t>(i++)]));
  p.rob_size = static_cast<int>(std::llround(flat[static_cast<std::size_t>(i++)]));
  validate(p);
  return p;
}

FrozenMask default_frozen_mask() {
  FrozenMask mask;
  mask.fill(true);
  for (int op = 0; op < isa::kNumOpcodes; ++op) {
    mask[static_cast<std::size_t>(op)] = false;  // latencies free
  }
  return mask;
}

FrozenMask frozen_mask_with_free_globals() {
  FrozenMask mask = default_frozen_mask();
  for (int i = kFlatDim - 3; i < kFlatDim; ++i) {
    mask[static_cast<std::size_t>(i)] = false;
  }
  return mask;
}

namespace {

// Round half to even, matching the default FP environment.
double round_ties_even(double x) { return std::nearbyint(x); }

}  // namespace

SimParams round_and_clamp(std::span<const double> flat, const ParamBounds& bounds,
                          const FrozenMask& frozen) {
  if (flat.size() != kFlatDim) {
    throw std::invalid_argument("flattened params must have dimension " +
                                std::to_string(kFlatDim));
  }
  const std::array<double, kFlatDim> defaults = flatten_params(default_params());
  std::array<double, kFlatDim> out{};
  for (int i = 0; i < kFlatDim; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    if (frozen[idx]) {
      out[idx] = defaults[idx];
    } else {
      double v = round_ties_even(flat[idx]);
      v = std::min(std::max(v, bounds.lower[idx]), bounds.upper[idx]);
      out[idx] = v;
    }
  }
  // Repair combinations rounding can produce: an empty port mask falls back
  // to the default mask, and the reorder buffer is raised to dispatch width.
  for (int op = 0; op < isa::kNumOpcodes; ++op) {
    const int base = isa::kNumOpcodes + op * kNumPorts;
    bool any = false;
    for (int port = 0; port < kNumPorts; ++port) {
      any = any || out[static_cast<std::size_t>(base + port)] != 0.0;
    }
    if (!any) {
      for (int port = 0; port < kNumPorts; ++port) {
        out[static_cast<std::size_t>(base + port)] =
            defaults[static_cast<std::size_t>(base + port)];
      }
    }
  }
  const auto dispatch_idx = static_cast<std::size_t>(kFlatDim - 3);
  const auto rob_idx = static_cast<std::size_t>(kFlatDim - 1);
  if (out[rob_idx] < out[dispatch_idx]) out[rob_idx] = out[dispatch_idx];
  return unflatten_params(out);
}

SimParams sample_params(Rng& rng, const FrozenMask& frozen) {
  const SimParams defaults = default_params();
  SimParams p = defaults;
  for (int op = 0; op < isa::kNumOpcodes; ++op) {
    if (!frozen[static_cast<std::size_t>(op)]) {
      p.latency[static_cast<std::size_t>(op)] =
          static_cast<int>(rng.next_int(kMinLatency, kMaxLatency));
    }
  }
  for (int op = 0; op < isa::kNumOpcodes; ++op) {
    // A port mask samples as a unit when all three of its bits are free.
    const int base = isa::kNumOpcodes + op * kNumPorts;
    const bool free = !frozen[static_cast<std::size_t>(base)] &&
                      !frozen[static_cast<std::size_t>(base + 1)] &&
                      !frozen[static_cast<std::size_t>(base + 2)];
    if (free) {
      p.port_mask[static_cast<std::size_t>(op)] =
          static_cast<std::uint8_t>(rng.next_int(1, 0b111));
    }
  }
  const auto dispatch_idx = static_cast<std::size_t>(kFlatDim - 3);
  const auto retire_idx = static_cast<std::size_t>(kFlatDim - 2);
  const auto rob_idx = static_cast<std::size_t>(kFlatDim - 1);
  if (!frozen[dispatch_idx]) {
    p.dispatch_width = static_cast<int>(rng.next_int(kMinWidth, kMaxWidth));
  }
  if (!frozen[retire_idx]) {
    p.retire_width = static_cast<int>(rng.next_int(kMinWidth, kMaxWidth));
  }
  if (!frozen[rob_idx]) {
    p.rob_size = static_cast<int>(
        rng.next_int(std::max(kMinRob, p.dispatch_width), kMaxRob));
  } else if (p.rob_size < p.dispatch_width) {
    p.rob_size = p.dispatch_width;
  }
  validate(p);
  return p;
}

SimParams sample_params(Rng& rng) {
  FrozenMask all_free;
  all_free.fill(false);
  return sample_params(rng, all_free);
}

void write_params_file(const SimParams& params, const std::filesystem::path& path) {
  validate(params);
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot open for writing: " + path.string());
  }
  out << "# surrosim parameter file\n";
  out << "# flatten order: latency[ADD..CMP], port bits opcode-major"
         " (ADD:p0,p1,p2 .. CMP:p0,p1,p2), dispatch_width, retire_width,"
         " rob_size\n";
  for (int op = 0; op < isa::kNumOpcodes; ++op) {
    out << "latency " << isa::opcode_info(static_cast<isa::Opcode>(op)).mnemonic
        << ' ' << params.latency[static_cast<std::size_t>(op)] << '\n';
  }
  for (int op = 0; op < isa::kNumOpcodes; ++op) {
    out << "ports " << isa::opcode_info(static_cast<isa::Opcode>(op)).mnemonic;
    for (int port = 0; port < kNumPorts; ++port) {
      if ((params.port_mask[static_cast<std::size_t>(op)] >> port) & 1) {
        out << ' ' << port;
      }
    }
    out << '\n';
  }
  out << "dispatch_width " << params.dispatch_width << '\n';
  out << "retire_width " << params.retire_width << '\n';
  out << "rob_size " << params.rob_size << '\n';
  if (!out) {
    throw std::runtime_error("write failed: " + path.string());
  }
}

SimParams read_params_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open for reading: " + path.string());
  }
  SimParams p;
  p.port_mask.fill(0);
  p.latency.fill(0);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ss(line);
    std::string key;
    if (!(ss >> key) || key[0] == '#') continue;
    auto fail = [&](const std::string& what) -> void {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                               ": " + what);
    };
    if (key == "latency") {
      std::string mnemonic;
      int value = 0;
      if (!(ss >> mnemonic >> value)) fail("expected `latency <MNEMONIC> <int>`");
      auto op = isa::opcode_from_mnemonic(mnemonic);
      if (!op) fail("unknown opcode '" + mnemonic + "'");
      p.latency[static_cast<std::size_t>(*op)] = value;
    } else if (key == "ports") {
      std::string mnemonic;
      if (!(ss >> mnemonic)) fail("expected `ports <MNEMONIC> <p...>`");
      auto op = isa::opcode_from_mnemonic(mnemonic);
      if (!op) fail("unknown opcode '" + mnemonic + "'");
      std::uint8_t mask = 0;
      int port = 0;
      while (ss >> port) {
        if (port < 0 || port >= kNumPorts) fail("port index out of range 0..2");
        mask |= static_cast<std::uint8_t>(1 << port);
      }
      p.port_mask[static_cast<std::size_t>(*op)] = mask;
    } else if (key == "dispatch_width") {
      if (!(ss >> p.dispatch_width)) fail("expected integer");
    } else if (key == "retire_width") {
      if (!(ss >> p.retire_width)) fail("expected integer");
    } else if (key == "rob_size") {
      if (!(ss >> p.rob_size)) fail("expected integer");
    } else {
      fail("unknown key '" + key + "'");
    }
  }
  validate(p);
  return p;
}

}  // namespace surrosim::sim
