#pragma once

// p-bit Gibbs sampling core.
//
// A Topology holds p-bit-major synapse tables for one or more instances:
// the row for p-bit p under instance s is p * num_instances + s, so a
// standalone network is the single-instance case and a master graph
// multiplexes many sparse instances behind an instance selector. Sweeps
// update color blocks synchronously: every p-bit in a block reads the
// pre-block state, draws exactly one variate from its own stream, and the
// block is committed at once.

#include <array>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "pbit/coloring.hpp"
#include "pbit/error.hpp"
#include "pbit/fixed_point.hpp"
#include "pbit/ising.hpp"
#include "pbit/parallel.hpp"
#include "pbit/rng.hpp"

namespace pbit {

enum class SamplerMode { float_exact, hardware };

inline const char* to_string(SamplerMode m) { return m == SamplerMode::hardware ? "hardware" : "float"; }

template <class W>
struct PairTerm {
  std::uint32_t nbr;
  W w;
};

template <class W>
struct TripleTerm {
  std::uint32_t a;
  std::uint32_t b;
  W w;
};

// CSR tables: row r owns pairs[pair_begin[r], pair_begin[r+1]) etc.
template <class W>
struct SynapseRows {
  std::vector<std::uint32_t> pair_begin{0};
  std::vector<PairTerm<W>> pairs;
  std::vector<std::uint32_t> triple_begin{0};
  std::vector<TripleTerm<W>> triples;
  std::vector<W> bias;

  std::size_t rows() const noexcept { return bias.size(); }
  std::span<const PairTerm<W>> pairs_of(std::size_t r) const {
    return {pairs.data() + pair_begin[r], pair_begin[r + 1] - pair_begin[r]};
  }
  std::span<const TripleTerm<W>> triples_of(std::size_t r) const {
    return {triples.data() + triple_begin[r], triple_begin[r + 1] - triple_begin[r]};
  }
  std::size_t fan_in(std::size_t r) const {
    return (pair_begin[r + 1] - pair_begin[r]) + (triple_begin[r + 1] - triple_begin[r]);
  }
};

namespace detail {

struct ModelRows {
  std::vector<std::vector<PairTerm<double>>> pairs;
  std::vector<std::vector<TripleTerm<double>>> triples;
};

inline ModelRows model_rows(const IsingModel& m) {
  ModelRows r;
  r.pairs.resize(m.num_spins);
  r.triples.resize(m.num_spins);
  for (const auto& [k, w] : m.j2) {
    r.pairs[k[0]].push_back({k[1], w});
    r.pairs[k[1]].push_back({k[0], w});
  }
  for (const auto& [k, w] : m.j3) {
    r.triples[k[0]].push_back({k[1], k[2], w});
    r.triples[k[1]].push_back({k[0], k[2], w});
    r.triples[k[2]].push_back({k[0], k[1], w});
  }
  return r;
}

}  // namespace detail

class Topology {
 public:
  std::uint32_t num_spins() const noexcept { return num_spins_; }
  std::uint32_t num_instances() const noexcept { return num_instances_; }
  Convention convention() const noexcept { return convention_; }
  std::uint32_t max_colors() const noexcept { return max_colors_; }

  std::size_t row(std::uint32_t p, std::uint32_t instance) const noexcept {
    return static_cast<std::size_t>(p) * num_instances_ + instance;
  }
  const SynapseRows<double>& rows() const noexcept { return rows_; }

  std::uint32_t color(std::uint32_t p, std::uint32_t instance) const { return color_of_[row(p, instance)]; }
  const std::vector<std::vector<std::uint32_t>>& blocks(std::uint32_t instance) const { return blocks_[instance]; }
  double energy_offset(std::uint32_t instance) const { return offsets_[instance]; }
  std::optional<double> ground_energy(std::uint32_t instance) const { return ground_[instance]; }

  // Fan-in of p-bit p: the widest neighbour list it multiplexes.
  std::size_t fan_in(std::uint32_t p) const {
    std::size_t f = 0;
    for (std::uint32_t s = 0; s < num_instances_; ++s) f = std::max(f, rows_.fan_in(row(p, s)));
    return f;
  }

  // Standalone network: tables built straight from one model.
  static std::shared_ptr<const Topology> standalone(const IsingModel& m, const ColorSchedule& sched) {
    if (sched.color_of.size() != m.num_spins) throw SizeMismatchError("schedule size does not match model");
    auto t = std::shared_ptr<Topology>(new Topology());
    t->num_spins_ = m.num_spins;
    t->num_instances_ = 1;
    t->convention_ = m.convention;
    t->max_colors_ = sched.num_colors;
    const auto mr = detail::model_rows(m);
    for (std::uint32_t p = 0; p < m.num_spins; ++p) {
      t->rows_.pairs.insert(t->rows_.pairs.end(), mr.pairs[p].begin(), mr.pairs[p].end());
      t->rows_.pair_begin.push_back(static_cast<std::uint32_t>(t->rows_.pairs.size()));
      t->rows_.triples.insert(t->rows_.triples.end(), mr.triples[p].begin(), mr.triples[p].end());
      t->rows_.triple_begin.push_back(static_cast<std::uint32_t>(t->rows_.triples.size()));
      t->rows_.bias.push_back(m.h[p]);
    }
    t->color_of_ = sched.color_of;
    t->blocks_ = {sched.blocks};
    t->offsets_ = {m.energy_offset};
    t->ground_ = {m.ground_energy};
    return t;
  }

  // Master graph: every p-bit's neighbour and color tables for all
  // instances, interleaved p-bit-major. Smaller instances are padded with
  // isolated spins.
  static std::shared_ptr<const Topology> multiplexed(std::span<const IsingModel> models,
                                                     std::span<const ColorSchedule> schedules) {
    if (models.empty()) throw SizeMismatchError("master graph needs at least one instance");
    if (models.size() != schedules.size()) throw SizeMismatchError("one schedule per instance required");
    auto t = std::shared_ptr<Topology>(new Topology());
    t->num_instances_ = static_cast<std::uint32_t>(models.size());
    t->convention_ = models[0].convention;
    std::uint32_t n = 0;
    for (std::size_t s = 0; s < models.size(); ++s) {
      if (models[s].convention != t->convention_) throw SizeMismatchError("instances mix spin conventions");
      if (schedules[s].color_of.size() != models[s].num_spins)
        throw SizeMismatchError("schedule " + std::to_string(s) + " does not match its instance");
      n = std::max(n, models[s].num_spins);
    }
    t->num_spins_ = n;
    std::vector<detail::ModelRows> per;
    per.reserve(models.size());
    for (const auto& m : models) per.push_back(detail::model_rows(m));

    t->color_of_.resize(static_cast<std::size_t>(n) * t->num_instances_, 0);
    for (std::uint32_t p = 0; p < n; ++p) {
      for (std::uint32_t s = 0; s < t->num_instances_; ++s) {
        const bool real = p < models[s].num_spins;
        if (real) {
          const auto& pr = per[s].pairs[p];
          const auto& tr = per[s].triples[p];
          t->rows_.pairs.insert(t->rows_.pairs.end(), pr.begin(), pr.end());
          t->rows_.triples.insert(t->rows_.triples.end(), tr.begin(), tr.end());
        }
        t->rows_.pair_begin.push_back(static_cast<std::uint32_t>(t->rows_.pairs.size()));
        t->rows_.triple_begin.push_back(static_cast<std::uint32_t>(t->rows_.triples.size()));
        t->rows_.bias.push_back(real ? models[s].h[p] : 0.0);
        t->color_of_[t->row(p, s)] = real ? schedules[s].color_of[p] : 0;
      }
    }
    for (std::uint32_t s = 0; s < t->num_instances_; ++s) {
      std::uint32_t colors = std::max<std::uint32_t>(1, schedules[s].num_colors);
      std::vector<std::vector<std::uint32_t>> blocks(colors);
      for (std::uint32_t p = 0; p < n; ++p) blocks[t->color(p, s)].push_back(p);
      t->blocks_.push_back(std::move(blocks));
      t->max_colors_ = std::max(t->max_colors_, colors);
      t->offsets_.push_back(models[s].energy_offset);
      t->ground_.push_back(models[s].ground_energy);
    }
    return t;
  }

 private:
  Topology() = default;

  std::uint32_t num_spins_ = 0;
  std::uint32_t num_instances_ = 1;
  Convention convention_ = Convention::bipolar;
  std::uint32_t max_colors_ = 0;
  SynapseRows<double> rows_;
  std::vector<std::uint32_t> color_of_;
  std::vector<std::vector<std::vector<std::uint32_t>>> blocks_;
  std::vector<double> offsets_;
  std::vector<std::optional<double>> ground_;
};

// β-scaled s{6}{6} copy of a topology's tables (all instances).
struct QuantizedRows {
  SynapseRows<std::int32_t> rows;
  double beta = 0.0;
  std::uint64_t saturations = 0;
};

inline std::shared_ptr<const QuantizedRows> quantize_rows(const Topology& topo, double beta) {
  auto q = std::make_shared<QuantizedRows>();
  q->beta = beta;
  const auto& src = topo.rows();
  auto quant = [&](double w) {
    bool sat = false;
    auto fp = FixedPointWeight::quantize(beta * w, &sat);
    q->saturations += sat ? 1 : 0;
    return fp.raw;
  };
  q->rows.pair_begin = src.pair_begin;
  q->rows.triple_begin = src.triple_begin;
  q->rows.pairs.reserve(src.pairs.size());
  for (const auto& t : src.pairs) q->rows.pairs.push_back({t.nbr, quant(t.w)});
  q->rows.triples.reserve(src.triples.size());
  for (const auto& t : src.triples) q->rows.triples.push_back({t.a, t.b, quant(t.w)});
  q->rows.bias.reserve(src.bias.size());
  for (double b : src.bias) q->rows.bias.push_back(quant(b));
  return q;
}

// Logistic activation tabulated on the s{6}{6} input grid over [-32, 32):
// entry i holds round(sigma((i - 2048) / 64) * 2^32). A p-bit fires when its
// 32-bit uniform is below the entry; inputs outside the table clamp.
class SigmoidTable {
 public:
  static constexpr std::int32_t kHalfRange = 2048;
  static constexpr std::size_t kEntries = 2 * kHalfRange;

  static const SigmoidTable& instance() {
    static const SigmoidTable table;
    return table;
  }

  std::uint64_t threshold(std::int32_t raw_input) const noexcept {
    const std::int32_t idx = std::clamp(raw_input, -kHalfRange, kHalfRange - 1) + kHalfRange;
    return table_[static_cast<std::size_t>(idx)];
  }

  // Probability of firing encoded by the table for a given raw input.
  double probability(std::int32_t raw_input) const noexcept {
    return static_cast<double>(threshold(raw_input)) * 0x1.0p-32;
  }

 private:
  SigmoidTable() {
    for (std::size_t i = 0; i < kEntries; ++i) {
      const double x = (static_cast<double>(i) - kHalfRange) / FixedPointWeight::kScale;
      const double p = 1.0 / (1.0 + std::exp(-x));
      table_[i] = static_cast<std::uint64_t>(std::llround(p * 0x1.0p32));
    }
  }
  std::array<std::uint64_t, kEntries> table_{};
};

inline double logistic(double x) noexcept { return 0.5 * (1.0 + std::tanh(0.5 * x)); }

class PbitNetwork {
 public:
  PbitNetwork(const IsingModel& model, const ColorSchedule& schedule, std::uint64_t seed)
      : PbitNetwork(Topology::standalone(model, schedule), 0, seed) {}

  PbitNetwork(std::shared_ptr<const Topology> topo, std::uint32_t instance, std::uint64_t seed)
      : topo_(std::move(topo)),
        selected_(instance),
        state_(topo_->num_spins(), 0),
        scratch_(topo_->num_spins(), 0),
        streams_(make_streams(seed, topo_->num_spins())) {
    if (instance >= topo_->num_instances()) throw std::out_of_range("instance index out of range");
    Rng init(derive_seed(seed, StreamTag::init_state));
    randomize(init);
  }

  const Topology& topology() const noexcept { return *topo_; }
  std::shared_ptr<const Topology> topology_ptr() const noexcept { return topo_; }
  std::uint32_t num_spins() const noexcept { return topo_->num_spins(); }
  Convention convention() const noexcept { return topo_->convention(); }
  std::uint32_t selected() const noexcept { return selected_; }
  SamplerMode mode() const noexcept { return mode_; }
  double beta() const noexcept { return beta_; }
  std::uint64_t saturation_count() const noexcept { return quant_ ? quant_->saturations : 0; }
  const QuantizedRows* quantized() const noexcept { return quant_.get(); }

  // Switches the neighbour and color multiplexers; spins and streams persist.
  void select(std::uint32_t instance) {
    if (instance >= topo_->num_instances()) throw std::out_of_range("instance index out of range");
    selected_ = instance;
  }

  void set_beta(double beta) {
    beta_ = beta;
    if (mode_ == SamplerMode::hardware && (!quant_ || quant_->beta != beta)) quant_ = quantize_rows(*topo_, beta_);
  }

  // Stores round-to-nearest s{6}{6} copies of beta * (weights, biases).
  void quantize_hardware() {
    if (topo_->convention() != Convention::binary)
      throw ConventionError("hardware mode runs on binary-convention models");
    mode_ = SamplerMode::hardware;
    quant_ = quantize_rows(*topo_, beta_);
  }

  // Shares precomputed tables (must match the current beta).
  void use_quantized(std::shared_ptr<const QuantizedRows> q) {
    if (topo_->convention() != Convention::binary)
      throw ConventionError("hardware mode runs on binary-convention models");
    if (q->rows.rows() != topo_->rows().rows()) throw SizeMismatchError("quantized tables do not match topology");
    mode_ = SamplerMode::hardware;
    beta_ = q->beta;
    quant_ = std::move(q);
  }

  std::span<const Spin> state() const noexcept { return state_; }
  std::vector<Spin>& mutable_state() noexcept { return state_; }
  void set_state(std::span<const Spin> s) {
    if (s.size() != state_.size()) throw SizeMismatchError("state length does not match network");
    state_.assign(s.begin(), s.end());
  }
  void randomize(Rng& rng) {
    const bool bin = topo_->convention() == Convention::binary;
    for (auto& x : state_) {
      const bool up = rng() >> 63;
      x = up ? Spin{1} : (bin ? Spin{0} : Spin{-1});
    }
  }

  std::vector<Rng>& streams() noexcept { return streams_; }

  // Input current of p-bit i. Float mode: I_i in model units. Hardware mode:
  // the accumulated beta*I'_i on the fixed-point grid.
  double synapse(std::uint32_t i) const {
    check_index(i);
    if (mode_ == SamplerMode::hardware) return static_cast<double>(raw_input(i)) / FixedPointWeight::kScale;
    return input(i, state_);
  }

  // One Gibbs update of p-bit i in place (one stream draw).
  Spin update(std::uint32_t i) {
    check_index(i);
    state_[i] = next_spin(i, state_);
    return state_[i];
  }

  void sweep() { sweep_impl(nullptr, 0); }

  // Updates inside each block are split across `pool`; results are identical
  // to the serial sweep.
  void sweep(WorkerPool& pool, std::size_t min_parallel_block = 256) { sweep_impl(&pool, min_parallel_block); }

  // Full Hamiltonian of the selected instance including its offset.
  double energy() const {
    const auto& rows = topo_->rows();
    double e = topo_->energy_offset(selected_);
    for (std::uint32_t p = 0; p < num_spins(); ++p) {
      const double xp = state_[p];
      if (xp == 0.0) continue;
      const std::size_t r = topo_->row(p, selected_);
      double f = rows.bias[r];
      for (const auto& t : rows.pairs_of(r))
        if (p < t.nbr) f += t.w * state_[t.nbr];
      for (const auto& t : rows.triples_of(r))
        if (p < t.a && p < t.b) f += t.w * state_[t.a] * state_[t.b];
      e -= xp * f;
    }
    return e;
  }

 private:
  void check_index(std::uint32_t i) const {
    if (i >= num_spins()) throw std::out_of_range("p-bit index out of range");
  }

  double input(std::uint32_t i, const std::vector<Spin>& x) const {
    const auto& rows = topo_->rows();
    const std::size_t r = topo_->row(i, selected_);
    double f = rows.bias[r];
    if (topo_->convention() == Convention::bipolar) {
      for (const auto& t : rows.pairs_of(r)) f += t.w * x[t.nbr];
      for (const auto& t : rows.triples_of(r)) f += t.w * (x[t.a] * x[t.b]);
    } else {
      for (const auto& t : rows.pairs_of(r))
        if (x[t.nbr]) f += t.w;
      for (const auto& t : rows.triples_of(r))
        if (x[t.a] & x[t.b]) f += t.w;
    }
    return f;
  }

  // Binary spins gate the weights into the accumulator; no multiplies.
  std::int32_t raw_input(std::uint32_t i) const {
    const auto& rows = quant_->rows;
    const std::size_t r = topo_->row(i, selected_);
    std::int32_t acc = rows.bias[r];
    for (const auto& t : rows.pairs_of(r))
      if (state_[t.nbr]) acc += t.w;
    for (const auto& t : rows.triples_of(r))
      if (state_[t.a] & state_[t.b]) acc += t.w;
    return acc;
  }

  Spin next_spin(std::uint32_t i, const std::vector<Spin>& x) {
    Rng& rng = streams_[i];
    if (mode_ == SamplerMode::hardware) {
      const std::uint64_t u = uniform_u32(rng);
      return u < SigmoidTable::instance().threshold(raw_input(i)) ? Spin{1} : Spin{0};
    }
    const double f = input(i, x);
    if (topo_->convention() == Convention::bipolar) {
      const double u = 2.0 * uniform01(rng) - 1.0;
      return std::tanh(beta_ * f) > u ? Spin{1} : Spin{-1};
    }
    const double u = uniform01(rng);
    return logistic(beta_ * f) > u ? Spin{1} : Spin{0};
  }

  void sweep_impl(WorkerPool* pool, std::size_t min_parallel_block) {
    for (const auto& block : topo_->blocks(selected_)) {
      const std::size_t nb = block.size();
      if (pool && pool->size() > 1 && nb >= min_parallel_block) {
        const std::size_t chunks = std::min(nb, pool->size() * 4);
        pool->parallel_for(chunks, [&](std::size_t c) {
          for (std::size_t j = c * nb / chunks; j < (c + 1) * nb / chunks; ++j)
            scratch_[block[j]] = next_spin(block[j], state_);
        });
      } else {
        for (auto p : block) scratch_[p] = next_spin(p, state_);
      }
      for (auto p : block) state_[p] = scratch_[p];
    }
  }

  std::shared_ptr<const Topology> topo_;
  std::uint32_t selected_ = 0;
  double beta_ = 1.0;
  SamplerMode mode_ = SamplerMode::float_exact;
  std::shared_ptr<const QuantizedRows> quant_;
  std::vector<Spin> state_;
  std::vector<Spin> scratch_;
  std::vector<Rng> streams_;
};

// Many sparse instances sharing one set of p-bits.
class MasterGraph {
 public:
  MasterGraph(std::shared_ptr<const Topology> topo) : topo_(std::move(topo)) {}

  std::uint32_t num_instances() const noexcept { return topo_->num_instances(); }
  std::uint32_t num_spins() const noexcept { return topo_->num_spins(); }
  // Phase-shifted clocks needed: the most colors any single instance uses.
  std::uint32_t num_color_blocks() const noexcept { return topo_->max_colors(); }
  std::size_t fan_in(std::uint32_t p) const { return topo_->fan_in(p); }
  std::uint32_t color(std::uint32_t p, std::uint32_t instance) const { return topo_->color(p, instance); }
  std::uint32_t selected() const noexcept { return selected_; }
  const std::shared_ptr<const Topology>& topology() const noexcept { return topo_; }

  void select(std::uint32_t idx) {
    if (idx >= num_instances()) throw std::out_of_range("instance index out of range");
    selected_ = idx;
  }

 private:
  std::shared_ptr<const Topology> topo_;
  std::uint32_t selected_ = 0;
};

inline MasterGraph build_master_graph(std::span<const IsingModel> instances,
                                      std::span<const ColorSchedule> schedules) {
  return MasterGraph(Topology::multiplexed(instances, schedules));
}

// A network view of the master graph with instance `idx` selected.
inline PbitNetwork select_instance(MasterGraph& mg, std::uint32_t idx, std::uint64_t seed) {
  mg.select(idx);
  return PbitNetwork(mg.topology(), idx, seed);
}

// Replay frames: little-endian uint64 sweep index, then ceil(n/8) bytes of
// spin bits (bit set = +1 / 1), LSB first.
inline void write_frame(std::ostream& out, std::uint64_t sweep, std::span<const Spin> spins) {
  char head[8];
  for (int b = 0; b < 8; ++b) head[b] = static_cast<char>((sweep >> (8 * b)) & 0xff);
  out.write(head, 8);
  std::vector<char> bits((spins.size() + 7) / 8, 0);
  for (std::size_t i = 0; i < spins.size(); ++i)
    if (spins[i] > 0) bits[i / 8] = static_cast<char>(bits[i / 8] | (1 << (i % 8)));
  out.write(bits.data(), static_cast<std::streamsize>(bits.size()));
}

}  // namespace pbit
