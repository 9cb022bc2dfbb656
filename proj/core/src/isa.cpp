#include "surrosim/isa.hpp"

#include <algorithm>
#include <cctype>
#include <numeric>

namespace surrosim::isa {

namespace {

constexpr std::array<OpcodeInfo, kNumOpcodes> kOpcodeTable = {{
    {"ADD", 2, true},
    {"SUB", 2, true},
    {"MUL", 2, true},
    {"DIV", 2, true},
    {"AND", 2, true},
    {"OR", 2, true},
    {"XOR", 2, true},
    {"SHL", 2, true},
    {"MOV", 1, true},
    {"LOAD", 1, true},
    {"STORE", 2, false},
    {"CMP", 2, false},
}};

}  // namespace

const OpcodeInfo& opcode_info(Opcode op) {
  return kOpcodeTable[static_cast<std::size_t>(op)];
}

std::optional<Opcode> opcode_from_mnemonic(std::string_view mnemonic) {
  for (int i = 0; i < kNumOpcodes; ++i) {
    if (kOpcodeTable[static_cast<std::size_t>(i)].mnemonic == mnemonic) {
      return static_cast<Opcode>(i);
    }
  }
  return std::nullopt;
}

bool is_arithmetic(Opcode op) {
  switch (op) {
    case Opcode::ADD:
    case Opcode::SUB:
    case Opcode::MUL:
    case Opcode::DIV:
    case Opcode::AND:
    case Opcode::OR:
    case Opcode::XOR:
    case Opcode::SHL:
      return true;
    default:
      return false;
  }
}

void validate(const Instruction& ins) {
  const OpcodeInfo& info = opcode_info(ins.opcode);
  if (ins.dest.has_value() != info.has_dest) {
    throw std::invalid_argument(std::string(info.mnemonic) +
                                ": dest present iff opcode writes a register");
  }
  if (static_cast<int>(ins.srcs.size()) != info.arity) {
    throw std::invalid_argument(std::string(info.mnemonic) + ": expected " +
                                std::to_string(info.arity) + " sources, got " +
                                std::to_string(ins.srcs.size()));
  }
  if (ins.dest && *ins.dest >= kNumRegisters) {
    throw std::invalid_argument("register index out of range");
  }
  for (std::uint8_t s : ins.srcs) {
    if (s >= kNumRegisters) {
      throw std::invalid_argument("register index out of range");
    }
  }
}

void validate(const BasicBlock& block) {
  if (block.instructions.empty()) {
    throw std::invalid_argument("basic block must be nonempty");
  }
  if (block.instructions.size() > kMaxBlockLen) {
    throw std::invalid_argument("basic block exceeds 16 instructions");
  }
  for (const Instruction& ins : block.instructions) validate(ins);
}

void validate(const BlockGenConfig& cfg) {
  if (cfg.min_len < 1 || cfg.min_len > cfg.max_len || cfg.max_len > kMaxBlockLen) {
    throw std::invalid_argument("block length bounds must satisfy 1 <= min <= max <= 16");
  }
  double total = 0.0;
  for (double w : cfg.opcode_weights) {
    if (w < 0.0) throw std::invalid_argument("opcode weights must be nonnegative");
    total += w;
  }
  if (total <= 0.0) throw std::invalid_argument("at least one opcode weight must be positive");
}

BasicBlock random_block(Rng& rng, const BlockGenConfig& cfg) {
  validate(cfg);
  const double total =
      std::accumulate(cfg.opcode_weights.begin(), cfg.opcode_weights.end(), 0.0);

  const int len = static_cast<int>(rng.next_int(cfg.min_len, cfg.max_len));
  BasicBlock block;
  block.instructions.reserve(static_cast<std::size_t>(len));
  for (int i = 0; i < len; ++i) {
    double pick = rng.next_double() * total;
    int op_idx = 0;
    for (; op_idx < kNumOpcodes - 1; ++op_idx) {
      pick -= cfg.opcode_weights[static_cast<std::size_t>(op_idx)];
      if (pick < 0.0) break;
    }
    // Skip zero-weight opcodes the cumulative walk may land on at boundaries.
    while (cfg.opcode_weights[static_cast<std::size_t>(op_idx)] == 0.0) {
      op_idx = (op_idx + 1) % kNumOpcodes;
    }

    Instruction ins;
    ins.opcode = static_cast<Opcode>(op_idx);
    const OpcodeInfo& info = opcode_info(ins.opcode);
    if (info.has_dest) {
      ins.dest = static_cast<std::uint8_t>(rng.next_below(kNumRegisters));
    }
    ins.srcs.resize(static_cast<std::size_t>(info.arity));
    for (auto& s : ins.srcs) {
      s = static_cast<std::uint8_t>(rng.next_below(kNumRegisters));
    }
    block.instructions.push_back(std::move(ins));
  }
  return block;
}

std::string serialize_block(const BasicBlock& block) {
  std::string out;
  for (std::size_t i = 0; i < block.instructions.size(); ++i) {
    const Instruction& ins = block.instructions[i];
    if (i > 0) out += "; ";
    out += opcode_info(ins.opcode).mnemonic;
    bool first = true;
    auto append_reg = [&](std::uint8_t r) {
      out += first ? " " : ", ";
      first = false;
      out += 'R';
      out += std::to_string(r);
    };
    if (ins.dest) append_reg(*ins.dest);
    for (std::uint8_t s : ins.srcs) append_reg(s);
  }
  return out;
}

namespace {

struct Cursor {
  std::string_view text;
  std::size_t pos = 0;

  bool done() const { return pos >= text.size(); }
  char peek() const { return text[pos]; }

  void skip_spaces() {
    while (!done() && (peek() == ' ' || peek() == '\t')) ++pos;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw ParseError(what + " at byte " + std::to_string(pos), pos);
  }
};

std::string_view take_word(Cursor& c) {
  std::size_t start = c.pos;
  while (!c.done() && (std::isalnum(static_cast<unsigned char>(c.peek())))) ++c.pos;
  return c.text.substr(start, c.pos - start);
}

std::uint8_t parse_register(Cursor& c) {
  c.skip_spaces();
  if (c.done() || c.peek() != 'R') c.fail("expected register");
  ++c.pos;
  std::size_t start = c.pos;
  while (!c.done() && std::isdigit(static_cast<unsigned char>(c.peek()))) ++c.pos;
  if (c.pos == start) c.fail("expected register number");
  int value = 0;
  for (std::size_t i = start; i < c.pos; ++i) value = value * 10 + (c.text[i] - '0');
  if (value >= kNumRegisters) {
    c.pos = start;
    c.fail("register index out of range 0..15");
  }
  return static_cast<std::uint8_t>(value);
}

Instruction parse_instruction(Cursor& c) {
  c.skip_spaces();
  std::size_t mnemonic_pos = c.pos;
  std::string_view word = take_word(c);
  if (word.empty()) c.fail("expected opcode mnemonic");
  auto op = opcode_from_mnemonic(word);
  if (!op) {
    c.pos = mnemonic_pos;
    c.fail("unknown opcode '" + std::string(word) + "'");
  }

  Instruction ins;
  ins.opcode = *op;
  const OpcodeInfo& info = opcode_info(*op);
  const int total_regs = info.arity + (info.has_dest ? 1 : 0);
  for (int i = 0; i < total_regs; ++i) {
    if (i > 0) {
      c.skip_spaces();
      if (c.done() || c.peek() != ',') c.fail("expected ','");
      ++c.pos;
    }
    std::uint8_t reg = parse_register(c);
    if (i == 0 && info.has_dest) {
      ins.dest = reg;
    } else {
      ins.srcs.push_back(reg);
    }
  }
  return ins;
}

}  // namespace

BasicBlock parse_block(std::string_view text) {
  Cursor c{text};
  BasicBlock block;
  while (true) {
    block.instructions.push_back(parse_instruction(c));
    c.skip_spaces();
    if (c.done()) break;
    if (c.peek() != ';') c.fail("expected ';' between instructions");
    ++c.pos;
  }
  validate(block);
  return block;
}

}  // namespace surrosim::isa
