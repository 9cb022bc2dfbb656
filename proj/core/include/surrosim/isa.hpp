#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "surrosim/rng.hpp"

namespace surrosim::isa {

inline constexpr int kNumOpcodes = 12;
inline constexpr int kNumRegisters = 16;
inline constexpr int kMaxBlockLen = 16;

// Branch-free toy ISA. No control flow, so any instruction sequence is a
// valid basic block.
enum class Opcode : std::uint8_t {
  ADD,
  SUB,
  MUL,
  DIV,
  AND,
  OR,
  XOR,
  SHL,
  MOV,
  LOAD,
  STORE,
  CMP,
};

struct OpcodeInfo {
  std::string_view mnemonic;
  int arity;      // number of source registers
  bool has_dest;  // false for STORE and CMP
};

const OpcodeInfo& opcode_info(Opcode op);
std::optional<Opcode> opcode_from_mnemonic(std::string_view mnemonic);

// ALU opcodes are the fusion targets in the ground-truth oracle.
bool is_arithmetic(Opcode op);

struct Instruction {
  Opcode opcode{Opcode::ADD};
  std::optional<std::uint8_t> dest;  // present iff opcode_info(opcode).has_dest
  std::vector<std::uint8_t> srcs;    // opcode_info(opcode).arity entries

  bool operator==(const Instruction&) const = default;
};

struct BasicBlock {
  std::vector<Instruction> instructions;  // 1..16 instructions

  bool operator==(const BasicBlock&) const = default;
};

// Throws std::invalid_argument on any invariant violation.
void validate(const Instruction& ins);
void validate(const BasicBlock& block);

// The block-sampling distribution the surrogates are trained on.
struct BlockGenConfig {
  int min_len = 1;
  int max_len = 8;
  std::array<double, kNumOpcodes> opcode_weights{1, 1, 1, 1, 1, 1,
                                                 1, 1, 1, 1, 1, 1};
  std::uint64_t seed = 0;
};

void validate(const BlockGenConfig& cfg);

// Length uniform in [min_len, max_len], opcodes sampled by weight, registers
// uniform in 0..15. Deterministic given the rng state.
BasicBlock random_block(Rng& rng, const BlockGenConfig& cfg);

struct ParseError : std::runtime_error {
  ParseError(const std::string& what, std::size_t byte_offset)
      : std::runtime_error(what), offset(byte_offset) {}
  std::size_t offset;
};

// Text grammar: `OPC [Rd,] Rs1 [, Rs2]`, instructions joined by `;`.
// parse_block(serialize_block(b)) == b for every valid block.
std::string serialize_block(const BasicBlock& block);
BasicBlock parse_block(std::string_view text);

}  // namespace surrosim::isa
