// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
//   acceptance [--tier smoke|full] [--seed N]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <sys/wait.h>
#include <unistd.h>

#include <fmt/core.h>

#include "oracles.hpp"
#include "pbit/pbit.hpp"

namespace fs = std::filesystem;
using namespace pbit;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail += (detail.empty() ? "" : "; ") + std::string("failed: ") + what;
    }
  }
  void note(const std::string& s) { detail += (detail.empty() ? "" : "; ") + s; }
};

fs::path g_root;

int run_cli(const std::string& args) {
  const std::string cmd = std::string(PBITIM_EXE) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::map<std::string, std::string>> read_csv(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::vector<std::string> header;
  std::vector<std::map<std::string, std::string>> rows;
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    return out;
  };
  if (std::getline(in, line)) header = split(line);
  while (std::getline(in, line)) {
    const auto cells = split(line);
    std::map<std::string, std::string> row;
    for (std::size_t i = 0; i < header.size() && i < cells.size(); ++i) row[header[i]] = cells[i];
    rows.push_back(std::move(row));
  }
  return rows;
}

// Files other than manifest.json that differ between two output directories.
std::vector<std::string> differing_outputs(const fs::path& a, const fs::path& b) {
  std::vector<std::string> bad;
  for (const auto& e : fs::directory_iterator(a)) {
    const auto name = e.path().filename().string();
    if (name == "manifest.json") continue;
    if (!fs::exists(b / name) || slurp(e.path()) != slurp(b / name)) bad.push_back(name);
  }
  for (const auto& e : fs::directory_iterator(b))
    if (!fs::exists(a / e.path().filename())) bad.push_back(e.path().filename().string());
  return bad;
}

// 1 --------------------------------------------------------------------------

Outcome boltzmann(std::uint64_t seed) {
  Outcome o;
  for (const auto& c : boltzmann_suite(100000, seed)) {
    o.require(c.pass, c.name);
    o.note(c.name + " " + c.detail);
  }
  return o;
}

// 2 --------------------------------------------------------------------------

Outcome oracles(std::uint64_t seed) {
  Outcome o;
  std::uint32_t checked = 0, mismatched = 0;
  for (std::uint32_t k : {8u, 10u, 12u, 14u}) {
    for (std::uint32_t i = 0; i < 50; ++i) {
      const auto inst = generate_3r3x(k, derive_seed(seed, StreamTag::generation, k, i));
      const auto sol = ground_energy_gf2(inst);
      const auto cubic = cubicize(inst);
      const auto sat = oracle::max_satisfied(inst);
      // ground = -(satisfied) + (violated) in the cubic form
      const double brute = -static_cast<double>(sat) + static_cast<double>(k - sat);
      double lowest = INFINITY;
      for (std::uint64_t x = 0; x < (1ull << k); ++x)
        lowest = std::min(lowest, oracle::energy(cubic, x));
      ++checked;
      if (!sol.ground_energy || *sol.ground_energy != brute || lowest != brute || *cubic.ground_energy != brute)
        ++mismatched;
    }
  }
  o.require(mismatched == 0, fmt::format("{} GF(2) ground energies differ from enumeration", mismatched));
  o.note(fmt::format("{} instances matched enumeration", checked - mismatched));
  const double gap = gadget_gap();
  o.require(gap == 0.0, "gadget 16-state table");
  o.note(fmt::format("gadget max deviation {}", gap));
  Rng rng(derive_seed(seed, StreamTag::generation, 99));
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) worst = std::max(worst, conversion_gap(random_model(10, i % 2 ? 3 : 2, rng)));
  for (std::uint32_t k : {8u, 10u}) {
    worst = std::max(worst, conversion_gap(quadratize(generate_3r3x(k, seed))));
    worst = std::max(worst, conversion_gap(cubicize(generate_3r3x(k, seed))));
  }
  o.require(worst <= 1e-9, "binary conversion state-for-state");
  o.note(fmt::format("conversion max deviation {:.3g}", worst));
  return o;
}

// 3 --------------------------------------------------------------------------

Outcome master_graph(std::uint64_t seed) {
  Outcome o;
  const std::uint32_t k = 16, count = 20, runs = 200;
  std::vector<IsingModel> models;
  std::vector<ColorSchedule> colorings;
  for (std::uint32_t i = 0; i < count; ++i) {
    models.push_back(quadratize(generate_3r3x(k, derive_seed(seed, StreamTag::generation, k, i))));
    colorings.push_back(color_model(models.back()));
  }
  const auto sched = preprocess_schedule(models[0], AptParams{}, derive_seed(seed, StreamTag::schedule, 2, 2 * k));
  AptParams params;

  // shared seeds: identical trajectories
  const auto master = Topology::multiplexed(models, colorings);
  std::uint32_t identical = 0;
  SolveOptions opt;
  opt.record_trace = true;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint64_t s = derive_seed(seed, StreamTag::campaign, i, 0);
    const auto a = solve(SamplerSetup{Topology::standalone(models[i], colorings[i]), 0}, sched, params, s, opt);
    const auto b = solve(SamplerSetup{master, i}, sched, params, s, opt);
    identical += a.energy_trace == b.energy_trace && a.best_state == b.best_state &&
                 a.swap_attempts_used == b.swap_attempts_used;
  }
  o.require(identical == count, "shared-seed trajectories");
  o.note(fmt::format("{}/{} trajectories bit-identical", identical, count));

  // independent seeds: paired bootstrap over instances of the mean success probability
  WorkerPool pool(std::max(1u, std::thread::hardware_concurrency()));
  CampaignConfig cfg;
  cfg.runs = runs;
  const auto a = run_campaign(models, sched, params, cfg, derive_seed(seed, StreamTag::campaign, 1), &pool);
  cfg.backend = Backend::mastergraph;
  const auto b = run_campaign(models, sched, params, cfg, derive_seed(seed, StreamTag::campaign, 2), &pool);
  const std::uint32_t t_f = 1;
  std::vector<double> diff(count);
  double pa = 0, pb = 0;
  for (std::uint32_t i = 0; i < count; ++i) {
    diff[i] = a.curves[i].p[t_f] - b.curves[i].p[t_f];
    pa += a.curves[i].p[t_f] / count;
    pb += b.curves[i].p[t_f] / count;
  }
  Rng rng(derive_seed(seed, StreamTag::bootstrap, 3));
  std::vector<double> means(1000);
  for (auto& m : means) {
    double acc = 0;
    for (std::uint32_t j = 0; j < count; ++j) acc += diff[uniform_below(rng, count)];
    m = acc / count;
  }
  std::sort(means.begin(), means.end());
  const double lo = sorted_quantile(means, 0.025), hi = sorted_quantile(means, 0.975);
  o.require(lo <= 0.0 && 0.0 <= hi, "independent-seed success probabilities");
  o.note(fmt::format("t_f={} p_standalone={:.4f} p_mastergraph={:.4f} diff 95% CI [{:.4f}, {:.4f}]", t_f, pa, pb, lo,
                     hi));
  return o;
}

// 4 --------------------------------------------------------------------------

Outcome swap_fidelity(std::uint64_t seed) {
  Outcome o;
  struct Case {
    double de, db;
  };
  Rng rng(derive_seed(seed, StreamTag::swaps, 1));
  const int N = 10000;
  double worst = 0;
  for (const auto c : {Case{10, -0.1}, Case{2, -0.5}, Case{0.5, -1}, Case{1, -0.05}, Case{-3, -0.5}, Case{3, 0.5},
                       Case{0, -1}, Case{4, 0}}) {
    const double expected = std::min(1.0, std::exp(c.de * c.db));
    int acc = 0;
    for (int i = 0; i < N; ++i) acc += propose_swap(0.0, c.de, 1.0, 1.0 + c.db, rng);
    const double rate = acc / double(N);
    if (c.de * c.db >= 0) {
      o.require(acc == N, fmt::format("always-accept at dE={} dbeta={}", c.de, c.db));
    } else {
      const double sigma = std::sqrt(expected * (1 - expected) / N);
      const double z = std::abs(rate - expected) / sigma;
      worst = std::max(worst, z);
      o.require(z <= 3.0, fmt::format("dE={} dbeta={} rate={} expected={}", c.de, c.db, rate, expected));
    }
  }
  o.note(fmt::format("8 cases x {} proposals, worst |z|={:.2f}", N, worst));
  return o;
}

// 5 --------------------------------------------------------------------------

Outcome apt_defaults(std::uint64_t seed) {
  Outcome o;
  const AptParams params;
  WorkerPool pool(std::max(1u, std::thread::hardware_concurrency()));
  struct Probe {
    int order;
    std::uint32_t k;
    int reference;
  };
  std::string counts;
  for (const auto& p : {Probe{2, 16, 0}, Probe{2, 32, 0}, Probe{2, 104, 11}, Probe{3, 16, 0}, Probe{3, 32, 0},
                        Probe{3, 64, 5}}) {
    const auto inst = generate_3r3x(p.k, derive_seed(seed, StreamTag::generation, p.k, 0));
    const auto m = p.order == 3 ? cubicize(inst) : quadratize(inst);
    try {
      const auto s = preprocess_schedule(SamplerSetup{Topology::standalone(m, color_model(m))}, params,
                                         derive_seed(seed, StreamTag::schedule, p.order, 2 * p.k), &pool);
      bool increasing = s.betas.front() == params.beta0;
      for (std::size_t i = 1; i < s.betas.size(); ++i) increasing &= s.betas[i] > s.betas[i - 1];
      o.require(increasing, fmt::format("order {} n={} ladder not strictly increasing", p.order, 2 * p.k));
      counts += fmt::format("{}o{}n={}:{}", counts.empty() ? "" : " ", p.order, 2 * p.k, s.num_replicas());
      if (p.reference) {
        const int diff = static_cast<int>(s.num_replicas()) - p.reference;
        counts += fmt::format("(ref {}, soft {})", p.reference, std::abs(diff) <= 3 ? "within 3" : "outside 3");
      }
    } catch (const ScheduleOverflowError& e) {
      o.require(false, fmt::format("order {} n={} did not terminate: {}", p.order, 2 * p.k, e.what()));
    }
  }
  o.note("replicas " + counts);
  return o;
}

// 6 and 7 share the campaign ------------------------------------------------

struct Campaign {
  fs::path dir;
  bool ok = false;
  double seconds = 0;
};

Campaign scaling_campaign(const std::string& tier, std::uint64_t seed) {
  Campaign c;
  const bool full = tier == "full";
  const std::vector<std::uint32_t> ks = full ? std::vector<std::uint32_t>{8, 12, 16, 20, 24}
                                             : std::vector<std::uint32_t>{8, 12, 16};
  const std::uint32_t count = full ? 50 : 20, runs = full ? 500 : 200;
  const auto in = g_root / "scaling_in";
  fs::create_directories(in);
  const auto start = std::chrono::steady_clock::now();
  for (auto k : ks) {
    const auto tmp = g_root / fmt::format("gen{}", k);
    if (run_cli(fmt::format("generate --vars {} --count {} --seed {} --out {}", k, count, seed, tmp.string())) != 0)
      return c;
    for (const auto& e : fs::directory_iterator(tmp))
      if (e.path().filename() != "manifest.json") fs::copy_file(e.path(), in / e.path().filename());
  }
  c.dir = g_root / "scaling_out";
  c.ok = run_cli(fmt::format("benchmark --in {} --order 2,3 --runs {} --time-model sweeps --seed {} --workers max "
                             "--out {}",
                             in.string(), runs, seed, c.dir.string())) == 0;
  c.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return c;
}

Outcome scaling(const Campaign& c, const std::string& tier) {
  Outcome o;
  if (!c.ok) {
    o.require(false, "benchmark command");
    return o;
  }
  std::map<int, ScalingFit> fits;
  for (const auto& r : read_csv(c.dir / "fit.csv")) {
    if (std::stod(r.at("q")) != 0.5) continue;
    ScalingFit f;
    f.gamma = std::stod(r.at("gamma"));
    f.gamma_se = std::stod(r.at("gamma_se"));
    f.eta = std::stod(r.at("eta"));
    f.r_squared = std::stod(r.at("r_squared"));
    fits[std::stoi(r.at("order"))] = f;
  }
  std::map<std::pair<int, int>, double> median;
  for (const auto& r : read_csv(c.dir / "tts.csv"))
    if (std::stod(r.at("q")) == 0.5) median[{std::stoi(r.at("order")), std::stoi(r.at("n"))}] = std::stod(r.at("tts_seconds"));
  o.require(fits.count(2) && fits.count(3), "median fits for both orders");
  if (!o.pass) return o;
  for (int order : {2, 3}) {
    const auto& f = fits[order];
    // the fit-quality bound applies to the full campaign; the smoke tier only reports it
    if (tier == "full")
      o.require(f.gamma > 0 && f.r_squared >= 0.9, fmt::format("order {} exponential fit R^2={:.3f}", order, f.r_squared));
    o.note(fmt::format("order {} gamma={:.4f}({:.4f}) eta={:.3f} R^2={:.3f}", order, f.gamma, f.gamma_se, f.eta,
                       f.r_squared));
  }
  const bool agree = gammas_agree(fits[2], fits[3]);
  if (tier == "full") o.require(agree, "second- and third-order gamma within joint 95% CI");
  o.note(fmt::format("gamma agreement {}", agree ? "yes" : "no"));
  std::string sts;
  for (const auto& [key, v] : median) {
    if (key.first != 2) continue;
    const auto it = median.find({3, key.second});
    if (it == median.end()) continue;
    o.require(it->second <= v, fmt::format("third-order median STS above second order at n={}", key.second));
    sts += fmt::format("{}n={}:{:.0f}/{:.0f}", sts.empty() ? "" : " ", key.second, v, it->second);
  }
  o.note("median STS o2/o3 " + sts);
  o.note(fmt::format("tier {} took {:.0f}s", tier, c.seconds));
  if (tier == "smoke") o.require(c.seconds <= 900, "smoke tier within 15 minutes");
  return o;
}

Outcome tts_pipeline(const Campaign& c) {
  Outcome o;
  for (const auto& tm : {TimeModel::fpga(), TimeModel::sweeps(), TimeModel::wallclock(1e-3)}) {
    for (std::uint32_t t_f : {1u, 7u, 3000u}) {
      const auto v = tts_point(t_f, 0.99, tm, 100);
      o.require(v && *v == tm.wall_time(t_f, 100), "tts_point(p=0.99) equals wall time");
    }
  }
  double worst = 0;
  for (const auto& [g, e] : {std::pair{0.0206, -3.76}, std::pair{0.0201, -4.30}, std::pair{0.05, 1.5}}) {
    std::vector<SizePoint> pts;
    for (double n = 16; n <= 256; n += 16) pts.push_back({n, std::pow(10.0, g * n + e)});
    const auto f = fit_scaling(pts, 0.5);
    worst = std::max({worst, std::abs(f.gamma - g) / g, std::abs(f.eta - e) / std::abs(e)});
  }
  o.require(worst <= 1e-12, "fit recovery");
  o.note(fmt::format("synthetic fit max relative error {:.2e}", worst));
  if (!c.ok) {
    o.require(false, "campaign outputs unavailable");
    return o;
  }
  std::map<std::pair<int, int>, std::map<double, double>> q;
  for (const auto& r : read_csv(c.dir / "tts.csv"))
    q[{std::stoi(r.at("order")), std::stoi(r.at("n"))}][std::stod(r.at("q"))] = std::stod(r.at("tts_seconds"));
  std::size_t sizes = 0;
  for (const auto& [key, m] : q) {
    ++sizes;
    double prev = 0;
    for (const auto& [qq, v] : m) {
      o.require(v >= prev, fmt::format("quartile order at order {} n={}", key.first, key.second));
      prev = v;
    }
  }
  o.require(sizes > 0, "campaign quartiles present");
  o.note(fmt::format("quartiles ordered for {} (order, n) groups", sizes));
  return o;
}

// 8 --------------------------------------------------------------------------

Outcome determinism(std::uint64_t seed) {
  Outcome o;
  const auto base = g_root / "det";
  const auto in = base / "in";
  fs::create_directories(base);
  o.require(run_cli(fmt::format("generate --vars 10 --count 4 --seed {} --out {}", seed, in.string())) == 0,
            "generate");
  const std::string apt = "--n-chains 10 --sweeps-per-chain 200 --max-swaps 200";
  const std::vector<std::pair<std::string, std::string>> stages{
      {"generate", fmt::format("generate --vars 12 --count 3 --seed {}", seed)},
      {"preprocess", fmt::format("preprocess --in {} --order 2,3 {} --seed {}", in.string(), apt, seed)},
      {"solve", fmt::format("solve --in {} --order 2,3 --runs 30 {} --seed {}", in.string(), apt, seed)},
      {"solve_mg", fmt::format("solve --in {} --backend mastergraph --runs 30 {} --seed {}", in.string(), apt, seed)},
      {"benchmark", fmt::format("benchmark --in {} --order 2,3 --runs 30 --bootstrap 200 {} --seed {}", in.string(),
                                apt, seed)},
      {"validate", fmt::format("validate --suite conversion,oracle --seed {}", seed)},
  };
  std::size_t compared = 0;
  for (const auto& [name, args] : stages) {
    const auto ref = base / (name + "_w1");
    if (run_cli(args + " --workers 1 --out " + ref.string()) != 0) {
      o.require(false, name + " run");
      continue;
    }
    for (const std::string w : {"4", "max"}) {
      const auto other = base / (name + "_w" + w);
      const auto replay = base / (name + "_replay_w" + w);
      o.require(run_cli(args + " --workers " + w + " --out " + other.string()) == 0, name + " workers " + w);
      o.require(run_cli(fmt::format("replay --manifest {} --workers {} --out {}", (ref / "manifest.json").string(), w,
                                    replay.string())) == 0,
                name + " replay");
      for (const auto& d : {other, replay}) {
        const auto bad = differing_outputs(ref, d);
        ++compared;
        for (const auto& b : bad) o.require(false, fmt::format("{} differs in {}", b, d.filename().string()));
      }
    }
  }
  o.note(fmt::format("{} stages, {} directory comparisons against workers=1", stages.size(), compared));
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  std::string tier = "smoke";
  std::uint64_t seed = 2024;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--tier" && i + 1 < argc) tier = argv[++i];
    else if (a == "--seed" && i + 1 < argc) seed = std::stoull(argv[++i]);
    else {
      fmt::print(stderr, "usage: acceptance [--tier smoke|full] [--seed N]\n");
      return 2;
    }
  }
  if (tier != "smoke" && tier != "full") {
    fmt::print(stderr, "tier must be smoke or full\n");
    return 2;
  }
  g_root = fs::temp_directory_path() / fmt::format("pbit_acceptance_{}", ::getpid());
  fs::remove_all(g_root);
  fs::create_directories(g_root);

  bool all = true;
  auto report = [&](int id, const std::string& name, const std::function<Outcome()>& fn) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o.require(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    all &= o.pass;
    fmt::print("{} criterion {} {} ({:.1f}s): {}\n", o.pass ? "PASS" : "FAIL", id, name, secs, o.detail);
    std::fflush(stdout);
  };

  report(1, "boltzmann", [&] { return boltzmann(seed); });
  report(2, "oracle-equivalence", [&] { return oracles(seed); });
  report(3, "master-graph", [&] { return master_graph(seed); });
  report(4, "swap-fidelity", [&] { return swap_fidelity(seed); });
  report(5, "apt-schedule", [&] { return apt_defaults(seed); });
  Campaign campaign;
  report(6, "scaling-" + tier, [&] {
    campaign = scaling_campaign(tier, seed);
    return scaling(campaign, tier);
  });
  report(7, "tts-pipeline", [&] { return tts_pipeline(campaign); });
  report(8, "determinism", [&] { return determinism(seed); });

  fs::remove_all(g_root);
  return all ? 0 : 1;
}
