#pragma once

// Colorings that define the chromatic (block-parallel) update schedule.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "pbit/error.hpp"
#include "pbit/ising.hpp"

namespace pbit {

struct ColorSchedule {
  std::uint32_t num_colors = 0;
  std::vector<std::uint32_t> color_of;
  std::vector<std::vector<std::uint32_t>> blocks;

  std::size_t num_spins() const noexcept { return color_of.size(); }

  friend bool operator==(const ColorSchedule&, const ColorSchedule&) = default;
};

// Blocks in color order, spins ascending within a block.
inline ColorSchedule make_schedule(std::vector<std::uint32_t> color_of) {
  ColorSchedule s;
  s.num_colors = color_of.empty() ? 0 : *std::max_element(color_of.begin(), color_of.end()) + 1;
  s.blocks.assign(s.num_colors, {});
  for (std::uint32_t i = 0; i < color_of.size(); ++i) s.blocks[color_of[i]].push_back(i);
  s.color_of = std::move(color_of);
  return s;
}

using AdjacencyList = std::vector<std::vector<std::uint32_t>>;

// The 2-section: an edge for every J2 term and every pair inside a J3 term.
inline AdjacencyList interaction_graph(const IsingModel& m) {
  AdjacencyList adj(m.num_spins);
  auto link = [&](std::uint32_t a, std::uint32_t b) {
    adj[a].push_back(b);
    adj[b].push_back(a);
  };
  for (const auto& [k, w] : m.j2) link(k[0], k[1]);
  for (const auto& [k, w] : m.j3) {
    link(k[0], k[1]);
    link(k[0], k[2]);
    link(k[1], k[2]);
  }
  for (auto& nb : adj) {
    std::sort(nb.begin(), nb.end());
    nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
  }
  return adj;
}

// DSATUR. Next vertex: highest saturation, then highest degree, then lowest
// index; it takes the smallest color absent from its neighbourhood.
inline ColorSchedule dsatur(const AdjacencyList& adj) {
  const auto n = static_cast<std::uint32_t>(adj.size());
  constexpr std::uint32_t kUncolored = UINT32_MAX;
  std::vector<std::uint32_t> color(n, kUncolored);
  std::vector<std::vector<bool>> seen(n);
  std::vector<std::uint32_t> saturation(n, 0);
  for (std::uint32_t step = 0; step < n; ++step) {
    std::uint32_t best = kUncolored;
    for (std::uint32_t v = 0; v < n; ++v) {
      if (color[v] != kUncolored) continue;
      if (best == kUncolored || saturation[v] > saturation[best] ||
          (saturation[v] == saturation[best] && adj[v].size() > adj[best].size()))
        best = v;
    }
    std::uint32_t c = 0;
    while (c < seen[best].size() && seen[best][c]) ++c;
    color[best] = c;
    for (auto u : adj[best]) {
      if (color[u] != kUncolored) continue;
      if (seen[u].size() <= c) seen[u].resize(c + 1, false);
      if (!seen[u][c]) {
        seen[u][c] = true;
        ++saturation[u];
      }
    }
  }
  return make_schedule(std::move(color));
}

inline ColorSchedule color_graph(const IsingModel& m) {
  if (m.order != 2 || !m.j3.empty()) throw ValidationError("color_graph expects an order-2 model");
  return dsatur(interaction_graph(m));
}

// Strong hypergraph coloring by coloring the clique graph.
inline ColorSchedule color_hypergraph(const IsingModel& m) {
  if (m.order != 3) throw ValidationError("color_hypergraph expects an order-3 model");
  return dsatur(interaction_graph(m));
}

inline ColorSchedule color_model(const IsingModel& m) {
  return m.order == 3 ? color_hypergraph(m) : color_graph(m);
}

enum class ColoringStrength { strong, weak };

// strong: every interacting pair differs. weak: every term spans >= 2 colors.
inline bool verify_coloring(const IsingModel& m, const ColorSchedule& s, ColoringStrength strength) {
  if (s.color_of.size() != m.num_spins) throw SizeMismatchError("schedule size does not match model");
  // blocks must partition the spins consistently with color_of
  std::vector<std::uint8_t> covered(m.num_spins, 0);
  for (std::uint32_t c = 0; c < s.blocks.size(); ++c) {
    for (auto i : s.blocks[c]) {
      if (i >= m.num_spins || covered[i] || s.color_of[i] != c) return false;
      covered[i] = 1;
    }
  }
  if (std::find(covered.begin(), covered.end(), 0) != covered.end()) return false;

  const auto& col = s.color_of;
  for (const auto& [k, w] : m.j2)
    if (col[k[0]] == col[k[1]]) return false;
  for (const auto& [k, w] : m.j3) {
    const bool a = col[k[0]] == col[k[1]], b = col[k[0]] == col[k[2]], c = col[k[1]] == col[k[2]];
    if (strength == ColoringStrength::strong ? (a || b || c) : (a && b)) return false;
  }
  return true;
}

inline nlohmann::json to_json(const ColorSchedule& s) {
  return {{"num_colors", s.num_colors}, {"color_of", s.color_of}};
}

inline ColorSchedule schedule_from_json(const nlohmann::json& j) {
  auto s = make_schedule(j.at("color_of").get<std::vector<std::uint32_t>>());
  if (s.num_colors != j.at("num_colors").get<std::uint32_t>()) throw ValidationError("num_colors disagrees with color_of");
  return s;
}

inline void write_schedule(const ColorSchedule& s, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path);
  out << to_json(s).dump() << "\n";
}

}  // namespace pbit
