#pragma once

// Adaptive parallel tempering: variance-driven inverse-temperature ladder
// construction and the replica-exchange solve loop.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "pbit/error.hpp"
#include "pbit/parallel.hpp"
#include "pbit/rng.hpp"
#include "pbit/sampler.hpp"

namespace pbit {

enum class SpreadStatistic { std_dev, variance };

struct AptParams {
  double alpha = 1.0;
  double beta0 = 1.0;
  double sigma_min = 0.5;
  std::uint32_t n_chains = 100;
  std::uint32_t sweeps_per_chain = 2000;
  std::uint32_t sweeps_per_swap = 100;
  std::uint32_t max_swap_attempts = 3000;
  std::uint32_t max_rungs = 200;
  SpreadStatistic spread = SpreadStatistic::std_dev;

  void validate() const {
    if (!(alpha > 0) || !(beta0 > 0) || !(sigma_min > 0))
      throw ValidationError("alpha, beta0 and sigma_min must be positive");
    if (n_chains == 0 || sweeps_per_chain < 2 || sweeps_per_swap == 0 || max_swap_attempts == 0 || max_rungs == 0)
      throw ValidationError("chain, sweep and attempt counts must be positive");
  }
};

inline nlohmann::json to_json(const AptParams& p) {
  return {{"alpha", p.alpha},
          {"beta0", p.beta0},
          {"sigma_min", p.sigma_min},
          {"n_chains", p.n_chains},
          {"sweeps_per_chain", p.sweeps_per_chain},
          {"sweeps_per_swap", p.sweeps_per_swap},
          {"max_swap_attempts", p.max_swap_attempts},
          {"max_rungs", p.max_rungs},
          {"spread", p.spread == SpreadStatistic::std_dev ? "std" : "variance"}};
}

// Missing keys keep their defaults.
inline AptParams params_from_json(const nlohmann::json& j) {
  AptParams p;
  p.alpha = j.value("alpha", p.alpha);
  p.beta0 = j.value("beta0", p.beta0);
  p.sigma_min = j.value("sigma_min", p.sigma_min);
  p.n_chains = j.value("n_chains", p.n_chains);
  p.sweeps_per_chain = j.value("sweeps_per_chain", p.sweeps_per_chain);
  p.sweeps_per_swap = j.value("sweeps_per_swap", p.sweeps_per_swap);
  p.max_swap_attempts = j.value("max_swap_attempts", p.max_swap_attempts);
  p.max_rungs = j.value("max_rungs", p.max_rungs);
  const std::string spread = j.value("spread", std::string("std"));
  if (spread != "std" && spread != "variance") throw ValidationError("spread must be 'std' or 'variance'");
  p.spread = spread == "std" ? SpreadStatistic::std_dev : SpreadStatistic::variance;
  p.validate();
  return p;
}

struct AptSchedule {
  std::vector<double> betas;

  std::size_t num_replicas() const noexcept { return betas.size(); }

  void validate() const {
    if (betas.empty()) throw ValidationError("schedule has no rungs");
    for (std::size_t i = 1; i < betas.size(); ++i)
      if (!(betas[i] > betas[i - 1])) throw ValidationError("schedule is not strictly increasing");
  }

  friend bool operator==(const AptSchedule&, const AptSchedule&) = default;
};

inline nlohmann::json to_json(const AptSchedule& s) { return {{"betas", s.betas}}; }

inline AptSchedule apt_schedule_from_json(const nlohmann::json& j) {
  AptSchedule s{j.at("betas").get<std::vector<double>>()};
  s.validate();
  return s;
}

inline AptSchedule read_apt_schedule(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  try {
    return apt_schedule_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed schedule JSON: ") + e.what());
  }
}

inline void write_apt_schedule(const AptSchedule& s, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path);
  out << to_json(s).dump() << "\n";
}

// Sampler configuration shared by preprocessing and solving.
struct SamplerSetup {
  std::shared_ptr<const Topology> topology;
  std::uint32_t instance = 0;
  SamplerMode mode = SamplerMode::float_exact;
};

namespace detail {

inline PbitNetwork make_network(const SamplerSetup& setup, double beta, std::uint64_t seed,
                                const std::shared_ptr<const QuantizedRows>& quant = nullptr) {
  PbitNetwork net(setup.topology, setup.instance, seed);
  net.set_beta(beta);
  if (setup.mode == SamplerMode::hardware) {
    if (quant) net.use_quantized(quant);
    else net.quantize_hardware();
  }
  return net;
}

}  // namespace detail

struct PreprocessTrace {
  std::vector<double> spreads;  // measured sigma_E at each rung
};

// Builds the ladder: at each beta_t every chain runs L sweeps continuing from
// its previous state; sigma_E is the mean over chains of the per-chain energy
// spread; beta_{t+1} = beta_t + alpha / sigma_E until sigma_E <= sigma_min.
inline AptSchedule preprocess_schedule(const SamplerSetup& setup, const AptParams& params, std::uint64_t seed,
                                       WorkerPool* pool = nullptr, PreprocessTrace* trace = nullptr) {
  params.validate();
  std::vector<PbitNetwork> chains;
  chains.reserve(params.n_chains);
  for (std::uint32_t c = 0; c < params.n_chains; ++c)
    chains.push_back(detail::make_network(setup, params.beta0, derive_seed(seed, StreamTag::schedule, c)));

  AptSchedule sched;
  double beta = params.beta0;
  std::vector<double> spread(params.n_chains);
  for (;;) {
    if (sched.betas.size() >= params.max_rungs)
      throw ScheduleOverflowError("ladder exceeded " + std::to_string(params.max_rungs) + " rungs");
    sched.betas.push_back(beta);
    auto run_chain = [&](std::size_t c) {
      PbitNetwork& net = chains[c];
      net.set_beta(beta);
      // Welford accumulation over the sweep trace
      double mean = 0.0, m2 = 0.0;
      for (std::uint32_t s = 1; s <= params.sweeps_per_chain; ++s) {
        net.sweep();
        const double e = net.energy();
        const double d = e - mean;
        mean += d / s;
        m2 += d * (e - mean);
      }
      const double var = m2 / params.sweeps_per_chain;
      spread[c] = params.spread == SpreadStatistic::std_dev ? std::sqrt(var) : var;
    };
    if (pool) pool->parallel_for(chains.size(), run_chain);
    else
      for (std::size_t c = 0; c < chains.size(); ++c) run_chain(c);

    double sigma = 0.0;
    for (double s : spread) sigma += s;
    sigma /= static_cast<double>(spread.size());
    if (trace) trace->spreads.push_back(sigma);
    if (sigma <= params.sigma_min) break;
    beta += params.alpha / sigma;
  }
  return sched;
}

inline AptSchedule preprocess_schedule(const IsingModel& model, const AptParams& params, std::uint64_t seed,
                                       WorkerPool* pool = nullptr) {
  return preprocess_schedule(SamplerSetup{Topology::standalone(model, color_model(model)), 0}, params, seed, pool);
}

// min(1, exp(dE * dbeta)) with dE = E_{i+1} - E_i, dbeta = beta_{i+1} - beta_i.
inline double metropolis_swap_probability(double e_i, double e_ip1, double beta_i, double beta_ip1) {
  const double x = (e_ip1 - e_i) * (beta_ip1 - beta_i);
  if (!(x < 0.0)) return 1.0;
  return std::exp(x);
}

// One proposal: exactly one uniform draw from the swap stream.
inline bool propose_swap(double e_i, double e_ip1, double beta_i, double beta_ip1, Rng& swap_rng) {
  return uniform01(swap_rng) < metropolis_swap_probability(e_i, e_ip1, beta_i, beta_ip1);
}

struct SwapTally {
  std::uint64_t proposed = 0;
  std::uint64_t accepted = 0;
  double rate() const noexcept { return proposed ? static_cast<double>(accepted) / static_cast<double>(proposed) : 0.0; }
};

struct SolveOutcome {
  bool success = false;
  std::uint32_t swap_attempts_used = 0;
  std::uint64_t sweeps_used = 0;
  double best_energy = 0.0;
  std::vector<Spin> best_state;
  std::vector<std::vector<double>> energy_trace;  // [check point][replica], when recorded
  std::vector<SwapTally> pair_tallies;            // adjacent pairs (r, r+1)
};

struct SolveOptions {
  bool record_trace = false;
  // Per-rung quantized tables shared across runs (hardware mode only).
  const std::vector<std::shared_ptr<const QuantizedRows>>* quantized = nullptr;
  WorkerPool* pool = nullptr;
  double tolerance = 1e-9;
};

// Replica exchange. Check point t = 0 is the random initial state; each
// later check point follows sweeps_per_swap sweeps of every replica. Success
// is tested at every check point before swaps are proposed. Swap attempts
// are numbered from 0: even attempts pair (0,1),(2,3),..., odd attempts pair
// (1,2),(3,4),.... Accepted swaps exchange replica states.
inline SolveOutcome solve(const SamplerSetup& setup, const AptSchedule& schedule, const AptParams& params,
                          std::uint64_t seed, const SolveOptions& opt = {}) {
  schedule.validate();
  const auto ground = setup.topology->ground_energy(setup.instance);
  if (!ground) throw ValidationError("solve needs a known ground energy");
  const std::size_t R = schedule.num_replicas();

  std::vector<PbitNetwork> replicas;
  replicas.reserve(R);
  for (std::size_t r = 0; r < R; ++r) {
    std::shared_ptr<const QuantizedRows> q;
    if (opt.quantized) q = (*opt.quantized)[r];
    replicas.push_back(detail::make_network(setup, schedule.betas[r], derive_seed(seed, StreamTag::replicas, r), q));
  }
  Rng swap_rng(derive_seed(seed, StreamTag::swaps));

  SolveOutcome out;
  out.pair_tallies.assign(R > 0 ? R - 1 : 0, {});
  out.best_energy = std::numeric_limits<double>::infinity();
  std::vector<double> energies(R);
  // Replica states move between rungs on swaps; the per-rung networks keep
  // their streams and beta.
  auto measure = [&]() -> bool {
    bool hit = false;
    for (std::size_t r = 0; r < R; ++r) {
      energies[r] = replicas[r].energy();
      if (energies[r] < out.best_energy) {
        out.best_energy = energies[r];
        out.best_state.assign(replicas[r].state().begin(), replicas[r].state().end());
      }
      if (energies[r] <= *ground + opt.tolerance) hit = true;
    }
    if (opt.record_trace) out.energy_trace.push_back(energies);
    return hit;
  };

  if (measure()) {
    out.success = true;
    return out;
  }
  for (std::uint32_t t = 1; t <= params.max_swap_attempts; ++t) {
    auto advance = [&](std::size_t r) {
      for (std::uint32_t s = 0; s < params.sweeps_per_swap; ++s) replicas[r].sweep();
    };
    if (opt.pool) opt.pool->parallel_for(R, advance);
    else
      for (std::size_t r = 0; r < R; ++r) advance(r);
    out.sweeps_used += params.sweeps_per_swap;
    out.swap_attempts_used = t;
    if (measure()) {
      out.success = true;
      return out;
    }
    for (std::size_t r = (t - 1) % 2; r + 1 < R; r += 2) {
      ++out.pair_tallies[r].proposed;
      if (propose_swap(energies[r], energies[r + 1], schedule.betas[r], schedule.betas[r + 1], swap_rng)) {
        ++out.pair_tallies[r].accepted;
        std::swap(replicas[r].mutable_state(), replicas[r + 1].mutable_state());
        std::swap(energies[r], energies[r + 1]);
      }
    }
  }
  return out;
}

inline SolveOutcome solve(const IsingModel& model, const AptSchedule& schedule, const AptParams& params,
                          std::uint64_t seed, const SolveOptions& opt = {}) {
  return solve(SamplerSetup{Topology::standalone(model, color_model(model)), 0}, schedule, params, seed, opt);
}

// ---------------------------------------------------------------------------
// Campaigns

enum class Backend { standalone, mastergraph };

inline const char* to_string(Backend b) { return b == Backend::mastergraph ? "mastergraph" : "standalone"; }

struct RunRecord {
  std::uint32_t instance = 0;
  std::uint32_t run = 0;
  bool success = false;
  std::uint32_t swap_attempts_used = 0;
  std::uint64_t sweeps_used = 0;
};

struct SuccessCurve {
  std::uint32_t instance = 0;
  // p[t] = fraction of runs that succeeded within t swap attempts,
  // t = 0..max_swap_attempts.
  std::vector<double> p;
};

struct CampaignResult {
  std::vector<RunRecord> runs;  // instance-major, run-minor
  std::vector<SuccessCurve> curves;
  double seconds = 0.0;
  std::uint64_t swap_attempts = 0;  // summed over runs

  double seconds_per_attempt() const {
    return swap_attempts ? seconds / static_cast<double>(swap_attempts) : 0.0;
  }
};

inline std::vector<double> success_curve(std::span<const RunRecord> runs, std::uint32_t horizon) {
  std::vector<double> p(horizon + 1, 0.0);
  if (runs.empty()) return p;
  std::vector<std::uint32_t> hist(horizon + 1, 0);
  for (const auto& r : runs)
    if (r.success) ++hist[r.swap_attempts_used];
  double acc = 0.0;
  for (std::uint32_t t = 0; t <= horizon; ++t) {
    acc += hist[t];
    p[t] = acc / static_cast<double>(runs.size());
  }
  return p;
}

struct CampaignConfig {
  Backend backend = Backend::standalone;
  SamplerMode mode = SamplerMode::float_exact;
  std::uint32_t runs = 1000;
};

// Every (instance, run) is seeded from (seed, instance, run) alone, so the
// result is independent of the worker count and of the backend.
inline CampaignResult run_campaign(std::span<const IsingModel> instances, const AptSchedule& schedule,
                                   const AptParams& params, const CampaignConfig& cfg, std::uint64_t seed,
                                   WorkerPool* pool = nullptr) {
  if (instances.empty()) throw ValidationError("campaign has no instances");
  const auto n = instances[0].num_spins;
  for (const auto& m : instances) {
    if (m.num_spins != n) throw SizeMismatchError("campaign instances must share a size");
    if (!m.ground_energy) throw ValidationError("campaign instance lacks a ground energy");
  }
  std::vector<ColorSchedule> colorings;
  colorings.reserve(instances.size());
  for (const auto& m : instances) colorings.push_back(color_model(m));

  std::vector<std::shared_ptr<const Topology>> topologies;
  if (cfg.backend == Backend::mastergraph) {
    topologies.push_back(Topology::multiplexed(instances, colorings));
  } else {
    for (std::size_t i = 0; i < instances.size(); ++i)
      topologies.push_back(Topology::standalone(instances[i], colorings[i]));
  }
  std::vector<std::vector<std::shared_ptr<const QuantizedRows>>> quant(topologies.size());
  if (cfg.mode == SamplerMode::hardware) {
    for (std::size_t t = 0; t < topologies.size(); ++t)
      for (double b : schedule.betas) quant[t].push_back(quantize_rows(*topologies[t], b));
  }

  CampaignResult res;
  const std::size_t total = instances.size() * cfg.runs;
  res.runs.resize(total);
  const auto start = std::chrono::steady_clock::now();
  auto job = [&](std::size_t idx) {
    const auto inst = static_cast<std::uint32_t>(idx / cfg.runs);
    const auto run = static_cast<std::uint32_t>(idx % cfg.runs);
    const std::size_t tidx = cfg.backend == Backend::mastergraph ? 0 : inst;
    SamplerSetup setup{topologies[tidx], cfg.backend == Backend::mastergraph ? inst : 0, cfg.mode};
    SolveOptions opt;
    if (cfg.mode == SamplerMode::hardware) opt.quantized = &quant[tidx];
    const auto out = solve(setup, schedule, params, derive_seed(seed, StreamTag::campaign, inst, run), opt);
    res.runs[idx] = RunRecord{inst, run, out.success, out.swap_attempts_used, out.sweeps_used};
  };
  if (pool) pool->parallel_for(total, job);
  else
    for (std::size_t i = 0; i < total; ++i) job(i);
  res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  for (std::uint32_t i = 0; i < instances.size(); ++i) {
    std::span<const RunRecord> slice(res.runs.data() + static_cast<std::size_t>(i) * cfg.runs, cfg.runs);
    res.curves.push_back({i, success_curve(slice, params.max_swap_attempts)});
    for (const auto& r : slice) res.swap_attempts += r.swap_attempts_used;
  }
  return res;
}

}  // namespace pbit
