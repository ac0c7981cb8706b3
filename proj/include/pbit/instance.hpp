#pragma once

// 3-regular 3-XORSAT instances: generation, validation, exact GF(2)
// satisfiability, and the line-oriented text format.

#include <algorithm>
#include <array>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "pbit/error.hpp"
#include "pbit/gf2.hpp"
#include "pbit/rng.hpp"

namespace pbit {

using Spin = std::int8_t;
using Clause = std::array<std::uint32_t, 3>;

// Clause c holds when the product of its three bipolar spins equals
// parities[c]. With m = (-1)^x this is x_i ^ x_j ^ x_k == (parity == -1).
struct XorsatInstance {
  std::uint32_t num_vars = 0;
  std::vector<Clause> clauses;
  std::vector<Spin> parities;
  std::optional<std::vector<Spin>> planted;
  std::uint64_t seed = 0;

  // Problem size on the benchmark axis: spins of the quadratized form.
  std::uint32_t problem_size() const noexcept { return 2 * num_vars; }

  friend bool operator==(const XorsatInstance&, const XorsatInstance&) = default;
};

inline bool clause_satisfied(const Clause& c, Spin parity, std::span<const Spin> spins) {
  return spins[c[0]] * spins[c[1]] * spins[c[2]] == parity;
}

inline std::size_t count_satisfied(const XorsatInstance& inst, std::span<const Spin> spins) {
  std::size_t n = 0;
  for (std::size_t c = 0; c < inst.clauses.size(); ++c)
    n += clause_satisfied(inst.clauses[c], inst.parities[c], spins) ? 1 : 0;
  return n;
}

// Throws ValidationError describing the first violated invariant.
inline void validate(const XorsatInstance& inst) {
  const auto k = inst.num_vars;
  if (k == 0) throw ValidationError("instance has no variables");
  if (inst.clauses.size() != k)
    throw ValidationError("expected " + std::to_string(k) + " clauses, found " +
                          std::to_string(inst.clauses.size()));
  if (inst.parities.size() != inst.clauses.size())
    throw ValidationError("parity count does not match clause count");
  std::vector<std::uint32_t> occurrences(k, 0);
  std::set<Clause> seen;
  for (std::size_t c = 0; c < inst.clauses.size(); ++c) {
    const auto& cl = inst.clauses[c];
    for (auto v : cl) {
      if (v >= k) throw ValidationError("clause " + std::to_string(c + 1) + " references variable out of range");
      ++occurrences[v];
    }
    if (cl[0] == cl[1] || cl[0] == cl[2] || cl[1] == cl[2])
      throw ValidationError("clause " + std::to_string(c + 1) + " repeats a variable");
    Clause key = cl;
    std::sort(key.begin(), key.end());
    if (!seen.insert(key).second)
      throw ValidationError("clause " + std::to_string(c + 1) + " duplicates an earlier clause");
    if (inst.parities[c] != 1 && inst.parities[c] != -1)
      throw ValidationError("clause " + std::to_string(c + 1) + " has parity outside {+1,-1}");
  }
  for (std::uint32_t v = 0; v < k; ++v) {
    if (occurrences[v] != 3)
      throw ValidationError("variable " + std::to_string(v + 1) + " appears in " +
                            std::to_string(occurrences[v]) + " clauses (regularity requires 3)");
  }
  if (inst.planted) {
    const auto& s = *inst.planted;
    if (s.size() != k) throw ValidationError("planted assignment has wrong length");
    for (auto x : s)
      if (x != 1 && x != -1) throw ValidationError("planted assignment has a spin outside {+1,-1}");
    if (count_satisfied(inst, s) != k) throw ValidationError("planted assignment violates a clause");
  }
}

inline constexpr int kGenerationRetries = 10000;

// Configuration-model pairing of 3k variable stubs onto k clause slots;
// whole pairings are rejected until no clause repeats a variable and no two
// clauses share a variable set.
inline XorsatInstance generate_3r3x(std::uint32_t k, std::uint64_t seed) {
  if (k < 4) throw InvalidSizeError("3R3X needs at least 4 variables, got " + std::to_string(k));
  Rng rng(derive_seed(seed, StreamTag::generation));

  std::vector<std::uint32_t> stubs(3 * static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < stubs.size(); ++i) stubs[i] = static_cast<std::uint32_t>(i / 3);

  XorsatInstance inst;
  inst.num_vars = k;
  inst.seed = seed;
  bool ok = false;
  for (int attempt = 0; attempt < kGenerationRetries && !ok; ++attempt) {
    shuffle(stubs, rng);
    inst.clauses.assign(k, Clause{});
    std::set<Clause> seen;
    ok = true;
    for (std::uint32_t c = 0; c < k && ok; ++c) {
      Clause cl{stubs[3 * c], stubs[3 * c + 1], stubs[3 * c + 2]};
      std::sort(cl.begin(), cl.end());
      ok = cl[0] != cl[1] && cl[1] != cl[2] && seen.insert(cl).second;
      inst.clauses[c] = cl;
    }
  }
  if (!ok) throw GenerationError("no simple 3-regular pairing found for seed " + std::to_string(seed));

  std::vector<Spin> planted(k);
  for (auto& s : planted) s = (rng() >> 63) ? Spin{1} : Spin{-1};
  inst.parities.resize(k);
  for (std::uint32_t c = 0; c < k; ++c) {
    const auto& cl = inst.clauses[c];
    inst.parities[c] = static_cast<Spin>(planted[cl[0]] * planted[cl[1]] * planted[cl[2]]);
  }
  inst.planted = std::move(planted);
  return inst;
}

struct Gf2Result {
  bool satisfiable = false;
  // Cubic bipolar energy of a ground state: -(number of clauses).
  std::optional<double> ground_energy;
  std::optional<std::vector<Spin>> witness;
};

// Works on any clause list (regularity is not required).
inline Gf2Result ground_energy_gf2(const XorsatInstance& inst) {
  Gf2System sys(inst.num_vars);
  for (std::size_t c = 0; c < inst.clauses.size(); ++c) {
    for (auto v : inst.clauses[c])
      if (v >= inst.num_vars) throw ValidationError("clause references variable out of range");
    sys.add_row(inst.clauses[c], inst.parities[c] == -1);
  }
  Gf2Result res;
  auto x = sys.solve();
  if (!x) return res;
  res.satisfiable = true;
  res.ground_energy = -static_cast<double>(inst.clauses.size());
  std::vector<Spin> m(inst.num_vars);
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = (*x)[i] ? Spin{-1} : Spin{1};
  res.witness = std::move(m);
  return res;
}

// ---------------------------------------------------------------------------
// Text format
//
//   p 3r3x <k> <seed>
//   c <i> <j> <l> <+1|-1>      (one per clause, 1-based variables)
//   s <+1|-1> ...              (optional planted assignment)

inline std::string format_instance(const XorsatInstance& inst) {
  std::string out = "p 3r3x " + std::to_string(inst.num_vars) + " " + std::to_string(inst.seed) + "\n";
  for (std::size_t c = 0; c < inst.clauses.size(); ++c) {
    out += "c";
    for (auto v : inst.clauses[c]) out += " " + std::to_string(v + 1);
    out += inst.parities[c] > 0 ? " +1\n" : " -1\n";
  }
  if (inst.planted) {
    out += "s";
    for (auto s : *inst.planted) out += s > 0 ? " +1" : " -1";
    out += "\n";
  }
  return out;
}

namespace detail {

struct Token {
  std::string_view text;
  std::size_t column;  // 1-based
};

inline std::vector<Token> tokenize(std::string_view line, std::size_t line_no) {
  std::vector<Token> toks;
  std::size_t i = 0;
  while (i < line.size()) {
    const char ch = line[i];
    if (ch == ' ' || ch == '\t') {
      ++i;
      continue;
    }
    if (static_cast<unsigned char>(ch) < 0x20) throw ParseError(line_no, i + 1, "unexpected control character");
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
    toks.push_back({line.substr(start, i - start), start + 1});
  }
  return toks;
}

template <class T>
T parse_unsigned(const Token& t, std::size_t line_no, const char* what) {
  T value{};
  auto [p, ec] = std::from_chars(t.text.data(), t.text.data() + t.text.size(), value);
  if (ec != std::errc{} || p != t.text.data() + t.text.size())
    throw ParseError(line_no, t.column, std::string("expected ") + what + ", got '" + std::string(t.text) + "'");
  return value;
}

inline Spin parse_sign(const Token& t, std::size_t line_no) {
  if (t.text == "+1") return 1;
  if (t.text == "-1") return -1;
  throw ParseError(line_no, t.column, "expected +1 or -1, got '" + std::string(t.text) + "'");
}

}  // namespace detail

// Parses and validates. ParseError carries line/column; ValidationError
// reports structural violations (regularity, duplicates, planted mismatch).
inline XorsatInstance parse_instance(std::string_view text) {
  using detail::Token;
  XorsatInstance inst;
  bool have_header = false;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    const auto toks = detail::tokenize(line, line_no);
    if (toks.empty()) continue;
    const Token& kind = toks[0];
    if (kind.text == "p") {
      if (have_header) throw ParseError(line_no, kind.column, "duplicate header");
      if (toks.size() != 4) throw ParseError(line_no, kind.column, "header must be 'p 3r3x <k> <seed>'");
      if (toks[1].text != "3r3x") throw ParseError(line_no, toks[1].column, "unknown problem type");
      inst.num_vars = detail::parse_unsigned<std::uint32_t>(toks[2], line_no, "variable count");
      inst.seed = detail::parse_unsigned<std::uint64_t>(toks[3], line_no, "seed");
      have_header = true;
    } else if (!have_header) {
      throw ParseError(line_no, kind.column, "missing header line");
    } else if (kind.text == "c") {
      if (toks.size() != 5) throw ParseError(line_no, kind.column, "clause must be 'c <i> <j> <k> <+1|-1>'");
      Clause cl{};
      for (int t = 0; t < 3; ++t) {
        const auto v = detail::parse_unsigned<std::uint32_t>(toks[1 + t], line_no, "variable index");
        if (v == 0 || v > inst.num_vars) throw ParseError(line_no, toks[1 + t].column, "variable index out of range");
        cl[t] = v - 1;
      }
      inst.clauses.push_back(cl);
      inst.parities.push_back(detail::parse_sign(toks[4], line_no));
    } else if (kind.text == "s") {
      if (inst.planted) throw ParseError(line_no, kind.column, "duplicate planted assignment");
      if (toks.size() != inst.num_vars + 1)
        throw ParseError(line_no, kind.column, "planted assignment must list " + std::to_string(inst.num_vars) + " spins");
      std::vector<Spin> s;
      s.reserve(inst.num_vars);
      for (std::size_t t = 1; t < toks.size(); ++t) s.push_back(detail::parse_sign(toks[t], line_no));
      inst.planted = std::move(s);
    } else {
      throw ParseError(line_no, kind.column, "unknown line type '" + std::string(kind.text) + "'");
    }
  }
  if (!have_header) throw ParseError(line_no == 0 ? 1 : line_no, 1, "missing header line");
  validate(inst);
  return inst;
}

inline XorsatInstance read_instance(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_instance(ss.str());
}

inline void write_instance(const XorsatInstance& inst, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path);
  out << format_instance(inst);
  if (!out) throw Error("write failed for " + path);
}

}  // namespace pbit
