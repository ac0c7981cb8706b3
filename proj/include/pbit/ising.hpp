#pragma once

// Ising / PUBO models up to third order in bipolar or binary convention, and
// the transforms between XORSAT, cubic, quadratic and binary forms.
//
// Energy convention (both conventions, x in {-1,+1} or {0,1}):
//   E(x) = -sum_{i<j} J2_ij x_i x_j - sum_{i<j<k} J3_ijk x_i x_j x_k
//          - sum_i h_i x_i + energy_offset

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "pbit/error.hpp"
#include "pbit/instance.hpp"

namespace pbit {

enum class Convention { bipolar, binary };

inline const char* to_string(Convention c) { return c == Convention::bipolar ? "bipolar" : "binary"; }

using PairKey = std::array<std::uint32_t, 2>;
using TripleKey = std::array<std::uint32_t, 3>;

struct IsingModel {
  int order = 2;
  Convention convention = Convention::bipolar;
  std::uint32_t num_spins = 0;
  std::vector<double> h;
  std::map<PairKey, double> j2;
  std::map<TripleKey, double> j3;
  double energy_offset = 0.0;
  std::optional<double> ground_energy;
  // Indices of auxiliary (gadget) spins in quadratized models; empty otherwise.
  std::vector<std::uint32_t> auxiliary;

  IsingModel() = default;
  IsingModel(int order_, Convention conv, std::uint32_t n)
      : order(order_), convention(conv), num_spins(n), h(n, 0.0) {}

  void add_pair(std::uint32_t i, std::uint32_t j, double w) {
    if (i == j) throw ValidationError("self interaction on spin " + std::to_string(i));
    if (i > j) std::swap(i, j);
    check_index(j);
    j2[{i, j}] += w;
  }

  void add_triple(std::uint32_t i, std::uint32_t j, std::uint32_t k, double w) {
    TripleKey key{i, j, k};
    std::sort(key.begin(), key.end());
    if (key[0] == key[1] || key[1] == key[2]) throw ValidationError("triple term repeats a spin");
    check_index(key[2]);
    j3[key] += w;
  }

  // Removes entries whose accumulated weight cancelled to zero.
  void prune_zeros() {
    std::erase_if(j2, [](const auto& kv) { return kv.second == 0.0; });
    std::erase_if(j3, [](const auto& kv) { return kv.second == 0.0; });
  }

  bool is_auxiliary(std::uint32_t i) const {
    return std::binary_search(auxiliary.begin(), auxiliary.end(), i);
  }

  template <class S>
  double energy(std::span<const S> x) const {
    if (x.size() != num_spins) throw SizeMismatchError("state length does not match model");
    double e = energy_offset;
    for (std::uint32_t i = 0; i < num_spins; ++i) e -= h[i] * x[i];
    for (const auto& [k, w] : j2) e -= w * x[k[0]] * x[k[1]];
    for (const auto& [k, w] : j3) e -= w * x[k[0]] * x[k[1]] * x[k[2]];
    return e;
  }
  double energy(const std::vector<Spin>& x) const { return energy(std::span<const Spin>(x)); }

  // Input current on spin i: I_i = -dE/dx_i (independent of x_i).
  template <class S>
  double local_field(std::span<const S> x, std::uint32_t i) const {
    double f = h[i];
    for (const auto& [k, w] : j2) {
      if (k[0] == i) f += w * x[k[1]];
      else if (k[1] == i) f += w * x[k[0]];
    }
    for (const auto& [k, w] : j3) {
      if (k[0] == i) f += w * x[k[1]] * x[k[2]];
      else if (k[1] == i) f += w * x[k[0]] * x[k[2]];
      else if (k[2] == i) f += w * x[k[0]] * x[k[1]];
    }
    return f;
  }

  void validate() const {
    if (order != 2 && order != 3) throw ValidationError("order must be 2 or 3");
    if (h.size() != num_spins) throw ValidationError("bias vector length does not match num_spins");
    if (order == 2 && !j3.empty()) throw ValidationError("order-2 model carries third-order terms");
    for (const auto& [k, w] : j2)
      if (!(k[0] < k[1]) || k[1] >= num_spins) throw ValidationError("malformed pair key");
    for (const auto& [k, w] : j3)
      if (!(k[0] < k[1] && k[1] < k[2]) || k[2] >= num_spins) throw ValidationError("malformed triple key");
  }

  friend bool operator==(const IsingModel&, const IsingModel&) = default;

 private:
  void check_index(std::uint32_t i) const {
    if (i >= num_spins) throw ValidationError("spin index " + std::to_string(i) + " out of range");
  }
};

// One cubic term per clause with weight = parity, so each satisfied clause
// contributes -1 and a satisfying assignment has energy -k.
inline IsingModel cubicize(const XorsatInstance& inst) {
  IsingModel m(3, Convention::bipolar, inst.num_vars);
  for (std::size_t c = 0; c < inst.clauses.size(); ++c) {
    const auto& cl = inst.clauses[c];
    m.add_triple(cl[0], cl[1], cl[2], inst.parities[c]);
  }
  m.ground_energy = -static_cast<double>(inst.clauses.size());
  return m;
}

// Per-clause K4 gadget on (m1, m2, m3, a) for parity P:
//   J(mi, mj) = -1, J(mi, a) = +2, h(mi) = P, h(a) = -2P.
// Minimising over a gives -P*m1*m2*m3 - 3, so each clause adds +3 to the
// offset. The sign of J(m1,a)J(m2,a)J(m3,a)h(a) is -P.
inline constexpr double kGadgetPair = -1.0;
inline constexpr double kGadgetAux = 2.0;
inline constexpr double kGadgetOffset = 3.0;

inline IsingModel quadratize(const XorsatInstance& inst) {
  const std::uint32_t k = inst.num_vars;
  const auto clauses = static_cast<std::uint32_t>(inst.clauses.size());
  IsingModel m(2, Convention::bipolar, k + clauses);
  for (std::uint32_t c = 0; c < clauses; ++c) {
    const auto& cl = inst.clauses[c];
    const double p = inst.parities[c];
    const std::uint32_t aux = k + c;
    m.add_pair(cl[0], cl[1], kGadgetPair);
    m.add_pair(cl[0], cl[2], kGadgetPair);
    m.add_pair(cl[1], cl[2], kGadgetPair);
    for (auto v : cl) {
      m.add_pair(v, aux, kGadgetAux);
      m.h[v] += p;
    }
    m.h[aux] = -2.0 * p;
    m.energy_offset += kGadgetOffset;
    m.auxiliary.push_back(aux);
  }
  m.prune_zeros();
  m.ground_energy = -static_cast<double>(clauses);
  return m;
}

// Recovers the cubic form from a quadratized model: each auxiliary spin's
// weight-bias product sign gives the clause (positive: odd number of -1
// spins in a ground state, i.e. m1*m2*m3 = -1).
inline IsingModel cubicize_from_quadratic(const IsingModel& q) {
  if (q.order != 2) throw GadgetError("expected an order-2 model");
  if (q.convention != Convention::bipolar) throw ConventionError("expected a bipolar model");
  if (q.auxiliary.empty()) throw GadgetError("model has no marked auxiliary spins");

  std::vector<std::uint32_t> new_index(q.num_spins, UINT32_MAX);
  std::uint32_t n = 0;
  for (std::uint32_t i = 0; i < q.num_spins; ++i)
    if (!q.is_auxiliary(i)) new_index[i] = n++;

  std::vector<std::vector<std::pair<std::uint32_t, double>>> incident(q.num_spins);
  for (const auto& [k, w] : q.j2) {
    if (q.is_auxiliary(k[0])) incident[k[0]].push_back({k[1], w});
    if (q.is_auxiliary(k[1])) incident[k[1]].push_back({k[0], w});
  }

  IsingModel c(3, Convention::bipolar, n);
  for (auto a : q.auxiliary) {
    const auto& edges = incident[a];
    if (edges.size() != 3) throw GadgetError("auxiliary spin " + std::to_string(a) + " has " +
                                             std::to_string(edges.size()) + " couplings, expected 3");
    double product = q.h[a];
    std::array<std::uint32_t, 3> vars{};
    for (std::size_t e = 0; e < 3; ++e) {
      if (q.is_auxiliary(edges[e].first)) throw GadgetError("auxiliary spins coupled to each other");
      product *= edges[e].second;
      vars[e] = new_index[edges[e].first];
    }
    if (product == 0.0) throw GadgetError("auxiliary spin " + std::to_string(a) + " has zero weight-bias product");
    c.add_triple(vars[0], vars[1], vars[2], product > 0 ? -1.0 : 1.0);
  }
  c.ground_energy = -static_cast<double>(q.auxiliary.size());
  return c;
}

// Substitutes x = 2s - 1. Keys are stored once, so the per-spin bias sums
// run over every term containing that spin:
//   J3' = 8 J3,  J2'_ij = 4 J2_ij - 4 sum_k J3_ijk,
//   h'_i = 2 h_i - 2 sum_j J2_ij + 2 sum_{j<k} J3_ijk
// and the offset absorbs E at s = 0 so energies agree state for state.
inline IsingModel bipolar_to_binary(const IsingModel& m) {
  if (m.convention != Convention::bipolar) throw ConventionError("model is already binary");
  IsingModel b(m.order, Convention::binary, m.num_spins);
  b.ground_energy = m.ground_energy;
  b.auxiliary = m.auxiliary;
  double offset = m.energy_offset;
  for (std::uint32_t i = 0; i < m.num_spins; ++i) {
    b.h[i] += 2.0 * m.h[i];
    offset += m.h[i];
  }
  for (const auto& [k, w] : m.j2) {
    b.j2[k] += 4.0 * w;
    b.h[k[0]] -= 2.0 * w;
    b.h[k[1]] -= 2.0 * w;
    offset -= w;
  }
  for (const auto& [k, w] : m.j3) {
    b.j3[k] += 8.0 * w;
    b.j2[{k[0], k[1]}] -= 4.0 * w;
    b.j2[{k[0], k[2]}] -= 4.0 * w;
    b.j2[{k[1], k[2]}] -= 4.0 * w;
    for (auto i : k) b.h[i] += 2.0 * w;
    offset += w;
  }
  b.energy_offset = offset;
  b.prune_zeros();
  return b;
}

// ---------------------------------------------------------------------------
// JSON model format (0-based indices):
//   {order, convention, num_spins, h, j2: [[i,j,w]...], j3: [[i,j,k,w]...],
//    energy_offset, ground_energy, auxiliary}

inline nlohmann::json to_json(const IsingModel& m) {
  nlohmann::json j;
  j["order"] = m.order;
  j["convention"] = to_string(m.convention);
  j["num_spins"] = m.num_spins;
  j["h"] = m.h;
  auto& j2 = j["j2"] = nlohmann::json::array();
  for (const auto& [k, w] : m.j2) j2.push_back({k[0], k[1], w});
  auto& j3 = j["j3"] = nlohmann::json::array();
  for (const auto& [k, w] : m.j3) j3.push_back({k[0], k[1], k[2], w});
  j["energy_offset"] = m.energy_offset;
  j["ground_energy"] = m.ground_energy ? nlohmann::json(*m.ground_energy) : nlohmann::json(nullptr);
  j["auxiliary"] = m.auxiliary;
  return j;
}

inline IsingModel model_from_json(const nlohmann::json& j) {
  try {
    const std::string conv = j.at("convention").get<std::string>();
    if (conv != "bipolar" && conv != "binary") throw ValidationError("unknown convention '" + conv + "'");
    IsingModel m(j.at("order").get<int>(), conv == "bipolar" ? Convention::bipolar : Convention::binary,
                 j.at("num_spins").get<std::uint32_t>());
    m.h = j.at("h").get<std::vector<double>>();
    if (m.h.size() != m.num_spins) throw ValidationError("bias vector length does not match num_spins");
    for (const auto& e : j.at("j2")) m.add_pair(e.at(0).get<std::uint32_t>(), e.at(1).get<std::uint32_t>(), e.at(2).get<double>());
    for (const auto& e : j.at("j3"))
      m.add_triple(e.at(0).get<std::uint32_t>(), e.at(1).get<std::uint32_t>(), e.at(2).get<std::uint32_t>(),
                   e.at(3).get<double>());
    m.energy_offset = j.value("energy_offset", 0.0);
    if (j.contains("ground_energy") && !j["ground_energy"].is_null()) m.ground_energy = j["ground_energy"].get<double>();
    if (j.contains("auxiliary")) {
      m.auxiliary = j["auxiliary"].get<std::vector<std::uint32_t>>();
      std::sort(m.auxiliary.begin(), m.auxiliary.end());
    }
    m.validate();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed model JSON: ") + e.what());
  }
}

inline void write_model(const IsingModel& m, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path);
  out << to_json(m).dump(1) << "\n";
}

inline IsingModel read_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  try {
    return model_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(std::string("malformed model JSON: ") + e.what());
  }
}

}  // namespace pbit
