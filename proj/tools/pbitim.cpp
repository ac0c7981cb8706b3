// pbitim: generate 3R3X instances, build APT ladders, run solve campaigns,
// emit time-to-solution reports and run the validation suites.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "pbit/pbit.hpp"

extern char** environ;

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";
constexpr const char* kEnvPrefix = "PBITIM_";

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string fnv1a_hex(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw pbit::Error("cannot read " + p.string());
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 14];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
  }
  return fmt::format("{:016x}", h);
}

std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::map<std::string, std::string> pbitim_env() {
  std::map<std::string, std::string> env;
  for (char** e = environ; e && *e; ++e) {
    std::string kv = *e;
    if (kv.rfind(kEnvPrefix, 0) != 0) continue;
    const auto eq = kv.find('=');
    if (eq != std::string::npos) env[kv.substr(0, eq)] = kv.substr(eq + 1);
  }
  return env;
}

std::size_t resolve_workers(const std::string& w) {
  if (w == "max" || w == "0") return pbit::WorkerPool::hardware_workers();
  try {
    std::size_t pos = 0;
    const long v = std::stol(w, &pos);
    if (pos != w.size() || v < 0) throw std::invalid_argument(w);
    return v == 0 ? pbit::WorkerPool::hardware_workers() : static_cast<std::size_t>(v);
  } catch (const std::exception&) {
    throw UsageError("--workers expects a positive integer or 'max', got '" + w + "'");
  }
}

// Output directories hold exactly one run: a non-empty directory is refused
// unless --force, which clears it.
void prepare_out(const fs::path& dir, bool force) {
  if (fs::exists(dir)) {
    if (!fs::is_directory(dir)) throw UsageError(dir.string() + " exists and is not a directory");
    if (!fs::is_empty(dir)) {
      if (!force) throw UsageError(dir.string() + " is not empty (use --force to overwrite)");
      for (const auto& e : fs::directory_iterator(dir)) fs::remove_all(e.path());
    }
  }
  fs::create_directories(dir);
}

struct Context {
  std::vector<std::string> argv;
  std::string started;
};

class Manifest {
 public:
  Manifest(const Context& ctx, std::string command) {
    j_["tool"] = "pbitim";
    j_["version"] = kVersion;
    j_["command"] = std::move(command);
    j_["argv"] = ctx.argv;
    j_["cwd"] = fs::current_path().string();
    j_["env"] = pbitim_env();
    j_["started"] = ctx.started;
    j_["inputs"] = json::array();
  }

  json& operator[](const char* key) { return j_[key]; }

  void add_input(const fs::path& p) { j_["inputs"].push_back({{"path", p.string()}, {"fnv1a64", fnv1a_hex(p)}}); }

  void write(const fs::path& dir) {
    j_["finished"] = utc_now();
    json outs = json::array();
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir))
      if (e.is_regular_file() && e.path().filename() != "manifest.json") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) outs.push_back({{"path", f.filename().string()}, {"fnv1a64", fnv1a_hex(f)}});
    j_["outputs"] = outs;
    std::ofstream out(dir / "manifest.json", std::ios::binary | std::ios::trunc);
    out << j_.dump(2) << "\n";
  }

 private:
  json j_;
};

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw pbit::Error("cannot write " + p.string());
  out << text;
}

// ---------------------------------------------------------------------------
// Instance sets

struct LoadedInstance {
  fs::path path;
  pbit::XorsatInstance inst;
};

// Regular files in `dir` other than manifest.json, by file name, grouped by k.
std::map<std::uint32_t, std::vector<LoadedInstance>> load_instances(const fs::path& dir, Manifest* manifest) {
  if (!fs::is_directory(dir)) throw UsageError("--in " + dir.string() + " is not a directory");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().filename() != "manifest.json") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::map<std::uint32_t, std::vector<LoadedInstance>> groups;
  for (const auto& f : files) {
    auto inst = pbit::read_instance(f.string());
    if (manifest) manifest->add_input(f);
    groups[inst.num_vars].push_back({f, std::move(inst)});
  }
  if (groups.empty()) throw pbit::NoDataError("no instance files in " + dir.string());
  return groups;
}

pbit::IsingModel to_model(const pbit::XorsatInstance& inst, int order, pbit::SamplerMode mode) {
  auto m = order == 3 ? pbit::cubicize(inst) : pbit::quadratize(inst);
  if (mode == pbit::SamplerMode::hardware) m = pbit::bipolar_to_binary(m);
  return m;
}

std::string schedule_name(int order, std::uint32_t n) { return fmt::format("schedule_o{}_n{}.json", order, n); }

// ---------------------------------------------------------------------------
// Options

struct AptOverrides {
  std::string params_file;
  std::optional<double> alpha, beta0, sigma_min;
  std::optional<std::uint32_t> n_chains, sweeps_per_chain, sweeps_per_swap, max_swaps;
  std::string spread;

  void add(CLI::App* cmd) {
    cmd->add_option("--params", params_file, "APT parameter JSON")->check(CLI::ExistingFile);
    cmd->add_option("--alpha", alpha, "ladder step rate");
    cmd->add_option("--beta0", beta0, "initial inverse temperature");
    cmd->add_option("--sigma-min", sigma_min, "energy spread tolerance");
    cmd->add_option("--n-chains", n_chains, "preprocessing chains");
    cmd->add_option("--sweeps-per-chain", sweeps_per_chain, "preprocessing sweeps per rung");
    cmd->add_option("--sweeps-per-swap", sweeps_per_swap, "sweeps between swap attempts (default 100)");
    cmd->add_option("--max-swaps", max_swaps, "swap-attempt horizon (default 3000)");
    cmd->add_option("--spread", spread, "ladder spread statistic")->check(CLI::IsMember({"std", "variance"}));
  }

  pbit::AptParams resolve() const {
    pbit::AptParams p;
    if (!params_file.empty()) {
      std::ifstream in(params_file);
      try {
        p = pbit::params_from_json(json::parse(in));
      } catch (const json::exception& e) {
        throw UsageError(std::string("malformed --params file: ") + e.what());
      }
    }
    if (alpha) p.alpha = *alpha;
    if (beta0) p.beta0 = *beta0;
    if (sigma_min) p.sigma_min = *sigma_min;
    if (n_chains) p.n_chains = *n_chains;
    if (sweeps_per_chain) p.sweeps_per_chain = *sweeps_per_chain;
    if (sweeps_per_swap) p.sweeps_per_swap = *sweeps_per_swap;
    if (max_swaps) p.max_swap_attempts = *max_swaps;
    if (!spread.empty()) p.spread = spread == "std" ? pbit::SpreadStatistic::std_dev : pbit::SpreadStatistic::variance;
    try {
      p.validate();
    } catch (const pbit::ValidationError& e) {
      throw UsageError(e.what());
    }
    return p;
  }
};

struct Common {
  std::uint64_t seed = 1;
  std::string workers = "1";
  bool force = false;

  void add(CLI::App* cmd) {
    cmd->add_option("--seed", seed, "master seed")->envname("PBITIM_SEED");
    cmd->add_option("--workers", workers, "worker threads (integer or 'max')")->envname("PBITIM_WORKERS");
    cmd->add_flag("--force", force, "overwrite a non-empty output directory");
  }
};

std::vector<int> parse_orders(const std::vector<int>& orders) {
  std::vector<int> out = orders;
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  for (int o : out)
    if (o != 2 && o != 3) throw UsageError("--order must be 2 or 3");
  return out;
}

pbit::SamplerMode parse_mode(const std::string& m) {
  return m == "hardware" ? pbit::SamplerMode::hardware : pbit::SamplerMode::float_exact;
}

// ---------------------------------------------------------------------------
// generate

struct GenerateCmd {
  Common common;
  std::uint32_t vars = 0;
  std::uint32_t count = 1;
  std::string out;

  void add(CLI::App& app) {
    auto* cmd = app.add_subcommand("generate", "write planted 3R3X instances");
    common.add(cmd);
    cmd->add_option("--vars", vars, "variables per instance (k >= 4)")->required();
    cmd->add_option("--count", count, "number of instances")->check(CLI::PositiveNumber);
    cmd->add_option("--out", out, "output directory")->required();
  }

  int run(const Context& ctx) {
    if (vars < 4) throw UsageError("--vars must be at least 4");
    prepare_out(out, common.force);
    Manifest man(ctx, "generate");
    for (std::uint32_t i = 0; i < count; ++i) {
      const auto inst = pbit::generate_3r3x(vars, pbit::derive_seed(common.seed, pbit::StreamTag::generation, vars, i));
      pbit::write_instance(inst, (fs::path(out) / fmt::format("3r3x_k{}_{:04}.txt", vars, i)).string());
    }
    man["params"] = {{"vars", vars}, {"count", count}, {"n", 2 * vars}};
    man["seeds"] = {{"seed", common.seed}};
    man.write(out);
    fmt::print("wrote {} instances (k={}, n={}) to {}\n", count, vars, 2 * vars, out);
    return 0;
  }
};

// ---------------------------------------------------------------------------
// Per-size ladder construction shared by preprocess, solve and benchmark.

struct LadderInfo {
  pbit::AptSchedule schedule;
  std::uint32_t source = 0;  // index of the instance used to build it
};

LadderInfo build_ladder(const std::vector<LoadedInstance>& group, int order, pbit::SamplerMode mode,
                        const pbit::AptParams& params, std::uint64_t seed, pbit::WorkerPool& pool) {
  const std::uint32_t n = 2 * group.front().inst.num_vars;
  pbit::Rng pick(pbit::derive_seed(seed, pbit::StreamTag::selection, order, n));
  const auto idx = static_cast<std::uint32_t>(pbit::uniform_below(pick, group.size()));
  const auto model = to_model(group[idx].inst, order, mode);
  pbit::SamplerSetup setup{pbit::Topology::standalone(model, pbit::color_model(model)), 0, mode};
  auto sched = pbit::preprocess_schedule(setup, params, pbit::derive_seed(seed, pbit::StreamTag::schedule, order, n),
                                         &pool);
  return {std::move(sched), idx};
}

struct PreprocessCmd {
  Common common;
  AptOverrides apt;
  std::string in, out, mode = "float";
  std::vector<int> orders{2};

  void add(CLI::App& app) {
    auto* cmd = app.add_subcommand("preprocess", "build APT ladders, one per size and order");
    common.add(cmd);
    apt.add(cmd);
    cmd->add_option("--in", in, "instance directory")->required();
    cmd->add_option("--order", orders, "2 (quadratized) and/or 3 (cubic)")->delimiter(',');
    cmd->add_option("--mode", mode, "sampler arithmetic")->check(CLI::IsMember({"float", "hardware"}));
    cmd->add_option("--out", out, "output directory")->required();
  }

  int run(const Context& ctx) {
    const auto ords = parse_orders(orders);
    const auto params = apt.resolve();
    Manifest man(ctx, "preprocess");
    const auto groups = load_instances(in, &man);
    prepare_out(out, common.force);
    pbit::WorkerPool pool(resolve_workers(common.workers));
    json ladders = json::array();
    for (int order : ords) {
      for (const auto& [k, group] : groups) {
        const auto info = build_ladder(group, order, parse_mode(mode), params, common.seed, pool);
        pbit::write_apt_schedule(info.schedule, (fs::path(out) / schedule_name(order, 2 * k)).string());
        ladders.push_back({{"order", order},
                           {"n", 2 * k},
                           {"replicas", info.schedule.num_replicas()},
                           {"source", group[info.source].path.filename().string()}});
        fmt::print("order={} n={} replicas={} source={}\n", order, 2 * k, info.schedule.num_replicas(),
                   group[info.source].path.filename().string());
      }
    }
    man["params"] = {{"apt", pbit::to_json(params)}, {"orders", ords}, {"mode", mode}};
    man["seeds"] = {{"seed", common.seed}};
    man["ladders"] = ladders;
    man["workers"] = pool.size();
    man.write(out);
    return 0;
  }
};

// ---------------------------------------------------------------------------
// solve / benchmark

struct CampaignCmd {
  bool report = false;
  Common common;
  AptOverrides apt;
  std::string in, out, schedule_dir, backend = "standalone", mode = "float", time_model = "fpga";
  std::vector<int> orders{2};
  std::uint32_t runs = 1000;
  std::uint32_t bootstrap = 1000;
  bool sweep_times = false;

  explicit CampaignCmd(bool with_report) : report(with_report) {}

  void add(CLI::App& app) {
    auto* cmd = report ? app.add_subcommand("benchmark", "campaign plus TTS report")
                       : app.add_subcommand("solve", "run an APT solve campaign");
    common.add(cmd);
    apt.add(cmd);
    cmd->add_option("--in", in, "instance directory")->required();
    cmd->add_option("--order", orders, "2 (quadratized) and/or 3 (cubic)")->delimiter(',');
    cmd->add_option("--backend", backend, "network layout")->check(CLI::IsMember({"standalone", "mastergraph"}));
    cmd->add_option("--mode", mode, "sampler arithmetic")->check(CLI::IsMember({"float", "hardware"}));
    cmd->add_option("--runs", runs, "independent runs per instance")->check(CLI::PositiveNumber);
    cmd->add_option("--schedule-dir", schedule_dir, "reuse ladders written by preprocess");
    cmd->add_option("--time-model", time_model, "TTS time accounting")
        ->check(CLI::IsMember({"wallclock", "fpga", "sweeps"}));
    cmd->add_option("--out", out, "output directory")->required();
    if (report) {
      cmd->add_option("--bootstrap", bootstrap, "bootstrap resamples")->check(CLI::PositiveNumber);
      cmd->add_flag("--sweep-times", sweep_times, "also measure wall-clock seconds per sweep");
    }
  }

  int run(const Context& ctx) {
    const auto ords = parse_orders(orders);
    const auto params = apt.resolve();
    const auto smode = parse_mode(mode);
    Manifest man(ctx, report ? "benchmark" : "solve");
    const auto groups = load_instances(in, &man);
    prepare_out(out, common.force);
    pbit::WorkerPool pool(resolve_workers(common.workers));
    const fs::path dir(out);

    pbit::CampaignConfig cfg;
    cfg.backend = backend == "mastergraph" ? pbit::Backend::mastergraph : pbit::Backend::standalone;
    cfg.mode = smode;
    cfg.runs = runs;

    std::string outcomes = "order,n,instance_id,run,swap_attempts_used,success,sweeps_used\n";
    std::string index = "n,instance_id,file\n";
    pbit::ReportData data;
    data.time_unit = time_model == "sweeps" ? "sweeps" : "seconds";
    json sizes = json::array();
    for (const auto& [k, group] : groups)
      for (std::uint32_t i = 0; i < group.size(); ++i)
        index += fmt::format("{},{},{}\n", 2 * k, i, group[i].path.filename().string());

    for (int order : ords) {
      for (const auto& [k, group] : groups) {
        const std::uint32_t n = 2 * k;
        std::vector<pbit::IsingModel> models;
        for (const auto& li : group) models.push_back(to_model(li.inst, order, smode));

        pbit::AptSchedule sched;
        json ladder_src;
        if (!schedule_dir.empty()) {
          const auto p = fs::path(schedule_dir) / schedule_name(order, n);
          sched = pbit::read_apt_schedule(p.string());
          man.add_input(p);
          ladder_src = p.string();
        } else {
          auto info = build_ladder(group, order, smode, params, common.seed, pool);
          sched = std::move(info.schedule);
          ladder_src = group[info.source].path.filename().string();
        }
        pbit::write_apt_schedule(sched, (dir / schedule_name(order, n)).string());

        const auto res = pbit::run_campaign(models, sched, params, cfg,
                                            pbit::derive_seed(common.seed, pbit::StreamTag::campaign, order, n), &pool);
        for (const auto& r : res.runs)
          outcomes += fmt::format("{},{},{},{},{},{},{}\n", order, n, r.instance, r.run, r.swap_attempts_used,
                                  r.success ? 1 : 0, r.sweeps_used);

        std::uint64_t solved = 0;
        for (const auto& r : res.runs) solved += r.success;
        const std::uint32_t spins = models.front().num_spins;
        sizes.push_back({{"order", order},
                         {"n", n},
                         {"instances", group.size()},
                         {"replicas", sched.num_replicas()},
                         {"pbits_per_replica", spins},
                         {"pbits_total", static_cast<std::uint64_t>(spins) * sched.num_replicas()},
                         {"ladder_source", ladder_src},
                         {"solved_fraction", static_cast<double>(solved) / res.runs.size()}});

        pbit::SizeReport sr;
        sr.order = order;
        sr.n = n;
        sr.curves = res.curves;
        if (report) {
          pbit::TimeModel tm = time_model == "wallclock" ? pbit::TimeModel::wallclock(res.seconds_per_attempt())
                               : time_model == "sweeps"  ? pbit::TimeModel::sweeps()
                                                         : pbit::TimeModel::fpga();
          sr.quartiles = quartiles(res.curves, tm, params.sweeps_per_swap, order, n, pool);
          for (const auto& q : sr.quartiles)
            if (q.q == 0.5)
              fmt::print("order={} n={} replicas={} median_tts={:.6g} {} t_f={} solved={:.3f}\n", order, n,
                         sched.num_replicas(), q.tts, data.time_unit, q.t_f_opt,
                         static_cast<double>(solved) / res.runs.size());
        } else {
          fmt::print("order={} n={} replicas={} solved={:.3f}\n", order, n, sched.num_replicas(),
                     static_cast<double>(solved) / res.runs.size());
        }
        data.sizes.push_back(std::move(sr));
      }
    }

    write_file(dir / "outcomes.csv", outcomes);
    write_file(dir / "instances.csv", index);
    if (report) {
      add_fits(data, ords);
      pbit::emit_report(data, dir);
      if (sweep_times) {
        std::string st = "order,n,seconds_per_sweep,fpga_seconds_per_sweep\n";
        for (int order : ords) {
          std::vector<std::uint32_t> ns;
          for (const auto& [k, g] : groups) ns.push_back(2 * k);
          for (const auto& row : pbit::sweep_time_report(ns, order, smode, 10000, common.seed))
            st += fmt::format("{},{},{},{}\n", order, row.n, row.seconds_per_sweep, row.fpga_seconds_per_sweep);
        }
        write_file(dir / "sweep_time.csv", st);
      }
    } else {
      pbit::ReportData pc = data;
      for (auto& s : pc.sizes) s.quartiles.clear();
      write_file(dir / "pcurves.csv", pbit::detail::pcurves_csv(pc));
    }

    json p = {{"apt", pbit::to_json(params)}, {"orders", ords},         {"backend", backend},
              {"mode", mode},                 {"runs", runs},           {"time_model", time_model},
              {"schedule_dir", schedule_dir}};
    if (report) p["bootstrap"] = bootstrap;
    man["params"] = p;
    man["seeds"] = {{"seed", common.seed}};
    man["sizes"] = sizes;
    man["workers"] = pool.size();
    man.write(dir);
    return 0;
  }

  std::vector<pbit::QuartileTts> quartiles(const std::vector<pbit::SuccessCurve>& curves, const pbit::TimeModel& tm,
                                           std::uint32_t sps, int order, std::uint32_t n, pbit::WorkerPool& pool) {
    std::vector<std::vector<double>> p;
    for (const auto& c : curves) p.push_back(c.p);
    pbit::BootstrapConfig boot;
    boot.resamples = bootstrap;
    boot.seed = pbit::derive_seed(common.seed, pbit::StreamTag::bootstrap, order, n);
    const double qs[] = {0.25, 0.5, 0.75};
    try {
      return pbit::optimal_quartile_tts(p, qs, tm, sps, boot, &pool);
    } catch (const pbit::NoDataError&) {
      std::vector<pbit::QuartileTts> out;
      for (double q : qs) {
        try {
          out.push_back(pbit::optimal_quartile_tts(p, q, tm, sps, boot, &pool));
        } catch (const pbit::NoDataError& e) {
          fmt::print(stderr, "warning: order={} n={} q={}: {}\n", order, n, q, e.what());
        }
      }
      return out;
    }
  }

  static void add_fits(pbit::ReportData& data, const std::vector<int>& ords) {
    for (int order : ords) {
      for (double q : {0.25, 0.5, 0.75}) {
        std::vector<pbit::SizePoint> pts;
        for (const auto& s : data.sizes) {
          if (s.order != order) continue;
          for (const auto& qt : s.quartiles)
            if (qt.q == q) pts.push_back({static_cast<double>(s.n), qt.tts});
        }
        if (pts.size() < 3) continue;
        data.fits.push_back({order, pbit::fit_scaling(pts, q)});
      }
    }
  }
};

// ---------------------------------------------------------------------------
// validate

struct ValidateCmd {
  std::vector<std::string> suites{"all"};
  std::uint64_t seed = 1;
  std::uint64_t samples = 100000;
  std::string out, workers = "1";
  bool force = false;

  void add(CLI::App& app) {
    auto* cmd = app.add_subcommand("validate", "run invariant suites");
    cmd->add_option("--suite", suites, "boltzmann, coloring, conversion, oracle or all")
        ->delimiter(',')
        ->check(CLI::IsMember({"boltzmann", "coloring", "conversion", "oracle", "all"}));
    cmd->add_option("--seed", seed, "master seed")->envname("PBITIM_SEED");
    cmd->add_option("--samples", samples, "Boltzmann samples per sampler")->check(CLI::PositiveNumber);
    cmd->add_option("--workers", workers, "worker threads (integer or 'max')")->envname("PBITIM_WORKERS");
    cmd->add_option("--out", out, "optional directory for summary.json and a manifest");
    cmd->add_flag("--force", force, "overwrite a non-empty output directory");
  }

  int run(const Context& ctx) {
    auto want = [&](const char* s) {
      return std::find(suites.begin(), suites.end(), s) != suites.end() ||
             std::find(suites.begin(), suites.end(), "all") != suites.end();
    };
    if (!out.empty()) prepare_out(out, force);
    json summary = json::array();
    bool ok = true;
    auto record = [&](const char* suite, const std::vector<pbit::CheckResult>& checks) {
      for (const auto& c : checks) {
        json line = {{"suite", suite}, {"check", c.name}, {"pass", c.pass}, {"detail", c.detail}};
        std::cout << line.dump() << "\n";
        summary.push_back(line);
        ok = ok && c.pass;
      }
    };
    // suites are independent: run them concurrently, report in a fixed order
    std::vector<std::pair<const char*, std::function<std::vector<pbit::CheckResult>()>>> jobs;
    if (want("boltzmann")) jobs.push_back({"boltzmann", [&] { return pbit::boltzmann_suite(samples, seed); }});
    if (want("coloring")) jobs.push_back({"coloring", [&] { return pbit::coloring_suite(seed); }});
    if (want("conversion")) jobs.push_back({"conversion", [&] { return pbit::conversion_suite(seed); }});
    if (want("oracle")) jobs.push_back({"oracle", [&] { return pbit::oracle_suite(seed); }});
    std::vector<std::vector<pbit::CheckResult>> results(jobs.size());
    pbit::WorkerPool pool(resolve_workers(workers));
    pool.parallel_for(jobs.size(), [&](std::size_t i) { results[i] = jobs[i].second(); });
    for (std::size_t i = 0; i < jobs.size(); ++i) record(jobs[i].first, results[i]);
    std::cout << json{{"result", ok ? "pass" : "fail"}}.dump() << "\n";
    if (!out.empty()) {
      Manifest man(ctx, "validate");
      write_file(fs::path(out) / "summary.json", summary.dump(2) + "\n");
      man["params"] = {{"suites", suites}, {"samples", samples}};
      man["workers"] = pool.size();
      man["seeds"] = {{"seed", seed}};
      man.write(out);
    }
    return ok ? 0 : 1;
  }
};

int dispatch(std::vector<std::string> args);

// ---------------------------------------------------------------------------
// replay: re-executes the command line stored in a manifest into a new
// output directory, optionally with a different worker count.

struct ReplayCmd {
  std::string manifest, out, workers;

  void add(CLI::App& app) {
    auto* cmd = app.add_subcommand("replay", "re-run the command recorded in a manifest");
    cmd->add_option("--manifest", manifest, "manifest.json to replay")->required()->check(CLI::ExistingFile);
    cmd->add_option("--out", out, "new output directory")->required();
    cmd->add_option("--workers", workers, "override the worker count");
  }

  int run(const Context&) {
    std::ifstream in(manifest);
    const json m = json::parse(in);
    auto argv = m.at("argv").get<std::vector<std::string>>();
    const std::string target = fs::absolute(out).string();
    std::vector<std::string> next;
    bool has_out = false;
    for (std::size_t i = 0; i < argv.size(); ++i) {
      const std::string& a = argv[i];
      if (a == "--out" && i + 1 < argv.size()) {
        next.push_back("--out");
        next.push_back(target);
        has_out = true;
        ++i;
      } else if (a.rfind("--out=", 0) == 0) {
        next.push_back("--out=" + target);
        has_out = true;
      } else if (a == "--workers" && i + 1 < argv.size() && !workers.empty()) {
        ++i;
      } else if (a.rfind("--workers=", 0) == 0 && !workers.empty()) {
      } else if (a == "--force") {
      } else {
        next.push_back(a);
      }
    }
    if (!has_out) throw UsageError("manifest command has no --out to redirect");
    if (!workers.empty()) {
      next.push_back("--workers");
      next.push_back(workers);
    }
    next.push_back("--force");

    for (const auto& [k, v] : pbitim_env()) unsetenv(k.c_str());
    for (const auto& [k, v] : m.value("env", json::object()).items()) setenv(k.c_str(), v.get<std::string>().c_str(), 1);
    const fs::path cwd = m.value("cwd", std::string());
    if (!cwd.empty()) fs::current_path(cwd);
    return dispatch(std::move(next));
  }
};

int dispatch(std::vector<std::string> args) {
  CLI::App app{"p-bit Ising machine emulator for 3-regular 3-XORSAT"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  GenerateCmd gen;
  PreprocessCmd pre;
  CampaignCmd solve(false), bench(true);
  ValidateCmd val;
  ReplayCmd rep;
  gen.add(app);
  pre.add(app);
  solve.add(app);
  bench.add(app);
  val.add(app);
  rep.add(app);

  Context ctx{args, utc_now()};
  std::vector<std::string> rev(args.rbegin(), args.rend() - 1);
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  const std::string name = app.get_subcommands().front()->get_name();
  if (name == "generate") return gen.run(ctx);
  if (name == "preprocess") return pre.run(ctx);
  if (name == "solve") return solve.run(ctx);
  if (name == "benchmark") return bench.run(ctx);
  if (name == "validate") return val.run(ctx);
  return rep.run(ctx);
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return dispatch(std::vector<std::string>(argv, argv + argc));
  } catch (const UsageError& e) {
    fmt::print(stderr, "usage error: {}\n", e.what());
    return 2;
  } catch (const pbit::InvalidSizeError& e) {
    fmt::print(stderr, "usage error: {}\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 1;
  }
}
