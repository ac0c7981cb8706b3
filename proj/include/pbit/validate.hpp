#pragma once

// Invariant suites behind `pbitim validate`: sampling against exact Boltzmann
// laws, coloring bounds, convention conversion, and solver oracles.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "pbit/coloring.hpp"
#include "pbit/instance.hpp"
#include "pbit/ising.hpp"
#include "pbit/rng.hpp"
#include "pbit/sampler.hpp"

namespace pbit {

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

// Bit i of the index is set when spin i is up (+1 or 1).
inline std::uint64_t state_index(std::span<const Spin> s) {
  std::uint64_t idx = 0;
  for (std::size_t i = 0; i < s.size(); ++i)
    if (s[i] > 0) idx |= std::uint64_t{1} << i;
  return idx;
}

inline std::vector<Spin> state_from_index(std::uint64_t idx, std::uint32_t n, Convention c) {
  std::vector<Spin> s(n);
  const Spin down = c == Convention::bipolar ? Spin{-1} : Spin{0};
  for (std::uint32_t i = 0; i < n; ++i) s[i] = (idx >> i) & 1 ? Spin{1} : down;
  return s;
}

inline std::vector<double> boltzmann_distribution(const IsingModel& m, double beta) {
  if (m.num_spins > 24) throw InvalidSizeError("enumeration limited to 24 spins");
  const std::uint64_t N = std::uint64_t{1} << m.num_spins;
  std::vector<double> e(N), p(N);
  double emin = INFINITY;
  for (std::uint64_t s = 0; s < N; ++s) {
    e[s] = m.energy(state_from_index(s, m.num_spins, m.convention));
    emin = std::min(emin, e[s]);
  }
  double z = 0.0;
  for (std::uint64_t s = 0; s < N; ++s) z += p[s] = std::exp(-beta * (e[s] - emin));
  for (auto& x : p) x /= z;
  return p;
}

// One sample per sweep after `burn_in` sweeps.
inline std::vector<double> sampled_distribution(PbitNetwork& net, std::uint64_t samples, std::uint64_t burn_in = 1000) {
  std::vector<double> h(std::size_t{1} << net.num_spins(), 0.0);
  for (std::uint64_t s = 0; s < burn_in; ++s) net.sweep();
  for (std::uint64_t s = 0; s < samples; ++s) {
    net.sweep();
    h[state_index(net.state())] += 1.0;
  }
  for (auto& x : h) x /= static_cast<double>(samples);
  return h;
}

inline double tv_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw SizeMismatchError("distributions differ in support");
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d += std::abs(a[i] - b[i]);
  return 0.5 * d;
}

// Single parity clause on three spins.
inline IsingModel single_clause_model(double w = 1.0) {
  IsingModel m(3, Convention::bipolar, 3);
  m.add_triple(0, 1, 2, w);
  return m;
}

// Every triple of four spins carries a unit cubic term: each spin interacts
// with every other through more than one clause.
inline IsingModel complete_clause_model() {
  IsingModel m(3, Convention::bipolar, 4);
  m.add_triple(0, 1, 2, 1.0);
  m.add_triple(0, 1, 3, 1.0);
  m.add_triple(0, 2, 3, 1.0);
  m.add_triple(1, 2, 3, 1.0);
  return m;
}

// Two colors, two spins each: every clause still spans both colors.
inline ColorSchedule complete_clause_weak_schedule() { return make_schedule({0, 0, 1, 1}); }

struct BoltzmannReport {
  double tv_single_strong = 0.0;
  double tv_strong = 0.0;
  double tv_weak = 0.0;
};

inline BoltzmannReport boltzmann_check(std::uint64_t samples, std::uint64_t seed, double beta = 1.0) {
  BoltzmannReport r;
  auto run = [&](const IsingModel& m, const ColorSchedule& s, std::uint64_t tag) {
    PbitNetwork net(m, s, derive_seed(seed, tag));
    net.set_beta(beta);
    const auto emp = sampled_distribution(net, samples);
    return tv_distance(emp, boltzmann_distribution(m, beta));
  };
  const auto single = single_clause_model();
  r.tv_single_strong = run(single, color_model(single), 1);
  const auto full = complete_clause_model();
  r.tv_strong = run(full, color_model(full), 2);
  r.tv_weak = run(full, complete_clause_weak_schedule(), 3);
  return r;
}

inline std::vector<CheckResult> boltzmann_suite(std::uint64_t samples, std::uint64_t seed) {
  const auto r = boltzmann_check(samples, seed);
  const auto full = complete_clause_model();
  const auto weak = complete_clause_weak_schedule();
  return {
      {"strong_single_clause_tv", r.tv_single_strong <= 0.02, fmt::format("tv={:.5f} limit=0.02", r.tv_single_strong)},
      {"strong_complete_clause_tv", r.tv_strong <= 0.02, fmt::format("tv={:.5f} limit=0.02", r.tv_strong)},
      {"weak_is_valid_weak_coloring",
       verify_coloring(full, weak, ColoringStrength::weak) && !verify_coloring(full, weak, ColoringStrength::strong),
       "blocks {0,1},{2,3}"},
      {"weak_non_boltzmann", r.tv_weak >= 5.0 * r.tv_strong,
       fmt::format("tv_weak={:.5f} tv_strong={:.5f} ratio={:.1f}", r.tv_weak, r.tv_strong,
                   r.tv_weak / std::max(r.tv_strong, 1e-12))},
  };
}

inline std::vector<CheckResult> coloring_suite(std::uint64_t seed, std::uint32_t per_k = 100, std::uint32_t k_min = 8,
                                               std::uint32_t k_max = 56) {
  std::uint32_t worst = 0, invalid = 0, cubic_above = 0, total = 0;
  for (std::uint32_t k = k_min; k <= k_max; ++k) {
    for (std::uint32_t i = 0; i < per_k; ++i) {
      const auto inst = generate_3r3x(k, derive_seed(seed, StreamTag::generation, k, i));
      const auto q = quadratize(inst);
      const auto c = cubicize(inst);
      const auto sq = color_graph(q);
      const auto sc = color_hypergraph(c);
      worst = std::max(worst, sq.num_colors);
      if (!verify_coloring(q, sq, ColoringStrength::strong) || !verify_coloring(c, sc, ColoringStrength::strong))
        ++invalid;
      if (sc.num_colors > sq.num_colors) ++cubic_above;
      ++total;
    }
  }
  return {
      {"quadratized_max_colors", worst <= 6, fmt::format("max={} over {} instances", worst, total)},
      {"colorings_valid", invalid == 0, fmt::format("invalid={}", invalid)},
      {"cubic_not_above_quadratic", cubic_above == 0, fmt::format("violations={}", cubic_above)},
  };
}

inline IsingModel random_model(std::uint32_t n, int order, Rng& rng) {
  IsingModel m(order, Convention::bipolar, n);
  auto w = [&] { return std::round((uniform01(rng) * 4.0 - 2.0) * 8.0) / 8.0; };
  for (auto& x : m.h) x = w();
  for (std::uint32_t i = 0; i < n; ++i)
    for (std::uint32_t j = i + 1; j < n; ++j)
      if (uniform01(rng) < 0.4) m.add_pair(i, j, w());
  if (order == 3)
    for (std::uint32_t t = 0; t < n; ++t) {
      const auto a = static_cast<std::uint32_t>(uniform_below(rng, n));
      const auto b = static_cast<std::uint32_t>(uniform_below(rng, n));
      const auto c = static_cast<std::uint32_t>(uniform_below(rng, n));
      if (a != b && b != c && a != c) m.add_triple(a, b, c, w());
    }
  m.energy_offset = w();
  m.prune_zeros();
  return m;
}

// Largest |E_binary(s) - E_bipolar(2s-1)| over all states.
inline double conversion_gap(const IsingModel& bip) {
  const auto bin = bipolar_to_binary(bip);
  double worst = 0.0;
  for (std::uint64_t s = 0; s < (std::uint64_t{1} << bip.num_spins); ++s) {
    const auto xb = state_from_index(s, bip.num_spins, Convention::binary);
    const auto xm = state_from_index(s, bip.num_spins, Convention::bipolar);
    worst = std::max(worst, std::abs(bin.energy(xb) - bip.energy(xm)));
  }
  return worst;
}

inline std::vector<CheckResult> conversion_suite(std::uint64_t seed, std::uint32_t models = 100) {
  Rng rng(derive_seed(seed, StreamTag::generation));
  double worst = 0.0;
  for (std::uint32_t i = 0; i < models; ++i) {
    const auto n = static_cast<std::uint32_t>(4 + uniform_below(rng, 7));
    worst = std::max(worst, conversion_gap(random_model(n, i % 2 ? 3 : 2, rng)));
  }
  double inst_worst = 0.0;
  for (std::uint64_t s = 0; s < 4; ++s) {
    const auto inst = generate_3r3x(8, derive_seed(seed, StreamTag::generation, 8, s));
    inst_worst = std::max({inst_worst, conversion_gap(cubicize(inst)), conversion_gap(quadratize(inst))});
  }
  return {
      {"random_models_state_for_state", worst <= 1e-9, fmt::format("max_gap={:.3g} over {} models", worst, models)},
      {"instances_state_for_state", inst_worst <= 1e-9, fmt::format("max_gap={:.3g}", inst_worst)},
  };
}

// Minimum over the auxiliary spin of each gadget energy, for all 8 clause
// assignments and both parities, against the cubic clause energy.
inline double gadget_gap() {
  double worst = 0.0;
  for (Spin parity : {Spin{1}, Spin{-1}}) {
    XorsatInstance one;
    one.num_vars = 3;
    one.clauses = {{0, 1, 2}};
    one.parities = {parity};
    const auto q = quadratize(one);
    const auto c = cubicize(one);
    for (std::uint64_t s = 0; s < 8; ++s) {
      auto x = state_from_index(s, 3, Convention::bipolar);
      const double ec = c.energy(x);
      x.push_back(1);
      const double up = q.energy(x);
      x.back() = -1;
      const double down = q.energy(x);
      worst = std::max(worst, std::abs(std::min(up, down) - ec));
    }
  }
  return worst;
}

inline std::vector<CheckResult> oracle_suite(std::uint64_t seed, std::uint32_t per_k = 50) {
  std::uint32_t mismatches = 0, total = 0;
  for (std::uint32_t k : {8u, 10u, 12u, 14u}) {
    for (std::uint32_t i = 0; i < per_k; ++i) {
      const auto inst = generate_3r3x(k, derive_seed(seed, StreamTag::generation, k, i));
      const auto g = ground_energy_gf2(inst);
      const auto cub = cubicize(inst);
      double best = INFINITY;
      for (std::uint64_t s = 0; s < (std::uint64_t{1} << k); ++s)
        best = std::min(best, cub.energy(state_from_index(s, k, Convention::bipolar)));
      if (!g.satisfiable || !g.ground_energy || *g.ground_energy != best) ++mismatches;
      ++total;
    }
  }
  const double gap = gadget_gap();
  return {
      {"gf2_matches_enumeration", mismatches == 0, fmt::format("mismatches={} over {} instances", mismatches, total)},
      {"gadget_exact_16_states", gap <= 1e-12, fmt::format("max_gap={:.3g}", gap)},
  };
}

}  // namespace pbit
