#pragma once

// Time-to-solution post-processing: per-instance success curves -> TTS
// curves -> bootstrapped quartiles -> optimum over run length -> scaling fit.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "pbit/apt.hpp"
#include "pbit/error.hpp"
#include "pbit/instance.hpp"
#include "pbit/ising.hpp"
#include "pbit/parallel.hpp"
#include "pbit/rng.hpp"
#include "pbit/sampler.hpp"

namespace pbit {

inline constexpr double kFpgaSweepSeconds = 66.67e-9;
inline constexpr double kTargetProbability = 0.99;

struct TimeModel {
  enum class Kind { wallclock, fpga_model };

  Kind kind = Kind::fpga_model;
  double sweep_time = kFpgaSweepSeconds;
  double swap_overhead_sweeps = 2.0;
  double f_p = 1.0;
  double seconds_per_attempt = 0.0;  // wallclock only

  static TimeModel fpga() { return {}; }

  // fpga accounting in units of sweeps (sweeps-to-solution).
  static TimeModel sweeps() {
    TimeModel t;
    t.sweep_time = 1.0;
    return t;
  }

  static TimeModel wallclock(double seconds_per_attempt) {
    TimeModel t;
    t.kind = Kind::wallclock;
    t.seconds_per_attempt = seconds_per_attempt;
    return t;
  }

  double wall_time(double t_f, std::uint32_t sweeps_per_swap) const {
    if (kind == Kind::wallclock) return t_f * seconds_per_attempt;
    return t_f * (sweeps_per_swap + swap_overhead_sweeps) * sweep_time;
  }
};

// t_f attempts at success probability p, repeated until 99% confidence:
// wall(t_f) * ln(0.01) / ln(1 - p) / f_p. The repetition factor is floored at
// one run, so p >= 0.99 (including p = 1) costs exactly wall(t_f).
// nullopt when p <= 0 (undefined).
inline std::optional<double> tts_point(double t_f, double p, const TimeModel& tm, std::uint32_t sweeps_per_swap) {
  if (!(p > 0.0)) return std::nullopt;
  double ratio = 1.0;
  if (p < 1.0) ratio = std::max(1.0, std::log(1.0 - kTargetProbability) / std::log1p(-p));
  return tm.wall_time(t_f, sweeps_per_swap) * ratio / tm.f_p;
}

// Linear-interpolation quantile of sorted data (type 7). +inf propagates.
inline double sorted_quantile(std::span<const double> sorted, double q) {
  if (sorted.empty()) return std::numeric_limits<double>::quiet_NaN();
  const double h = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = h - static_cast<double>(lo);
  if (frac == 0.0 || lo == hi) return sorted[lo];
  if (std::isinf(sorted[hi])) return std::numeric_limits<double>::infinity();
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

struct QuartileTts {
  double q = 0.5;
  double tts = 0.0;      // bootstrap mean at the optimal t_f
  double ci_lo = 0.0;    // 2.5% bootstrap percentile
  double ci_hi = 0.0;    // 97.5% bootstrap percentile
  double plug_in = 0.0;  // sample quantile at the optimal t_f
  std::uint32_t t_f_opt = 0;
};

struct BootstrapConfig {
  std::uint32_t resamples = 1000;
  std::uint64_t seed = 0;
  double ci_level = 0.95;
};

// Optimal quartile TTS for several quantiles from one set of curves. Every t_f
// in [1, horizon] is evaluated; instances with p_i(t_f) = 0 enter as +inf.
// The same instance resamples are used for every t_f and every q.
inline std::vector<QuartileTts> optimal_quartile_tts(std::span<const std::vector<double>> curves,
                                                     std::span<const double> qs, const TimeModel& tm,
                                                     std::uint32_t sweeps_per_swap, const BootstrapConfig& boot = {},
                                                     WorkerPool* pool = nullptr) {
  const std::size_t N = curves.size();
  if (N < 2) throw NoDataError("need at least two instances");
  const std::size_t horizon = curves[0].size() - 1;
  for (const auto& c : curves)
    if (c.size() != horizon + 1) throw SizeMismatchError("success curves have different horizons");
  const std::size_t B = boot.resamples;
  if (B == 0) throw ValidationError("bootstrap needs at least one resample");

  Rng rng(derive_seed(boot.seed, StreamTag::bootstrap));
  std::vector<std::uint32_t> picks(B * N);
  for (auto& x : picks) x = static_cast<std::uint32_t>(uniform_below(rng, N));

  const std::size_t Q = qs.size();
  // [t_f][q] bootstrap mean
  std::vector<double> means((horizon + 1) * Q, std::numeric_limits<double>::infinity());
  auto eval = [&](std::size_t t_f, std::vector<double>* keep) {
    std::vector<double> tts(N), sample(N);
    for (std::size_t i = 0; i < N; ++i) {
      auto v = tts_point(static_cast<double>(t_f), curves[i][t_f], tm, sweeps_per_swap);
      tts[i] = v ? *v : std::numeric_limits<double>::infinity();
    }
    std::vector<double> sum(Q, 0.0);
    for (std::size_t b = 0; b < B; ++b) {
      for (std::size_t i = 0; i < N; ++i) sample[i] = tts[picks[b * N + i]];
      std::sort(sample.begin(), sample.end());
      for (std::size_t k = 0; k < Q; ++k) {
        const double v = sorted_quantile(sample, qs[k]);
        sum[k] += v;
        if (keep) keep[k].push_back(v);
      }
    }
    for (std::size_t k = 0; k < Q; ++k) means[t_f * Q + k] = sum[k] / static_cast<double>(B);
  };
  auto job = [&](std::size_t j) { eval(j + 1, nullptr); };
  if (pool) pool->parallel_for(horizon, job);
  else
    for (std::size_t j = 0; j < horizon; ++j) job(j);

  std::vector<QuartileTts> out;
  for (std::size_t k = 0; k < Q; ++k) {
    std::size_t best = 0;
    for (std::size_t t_f = 1; t_f <= horizon; ++t_f) {
      const double v = means[t_f * Q + k];
      if (std::isfinite(v) && (best == 0 || v < means[best * Q + k])) best = t_f;
    }
    if (best == 0) throw NoDataError(fmt::format("no finite TTS at quantile {}", qs[k]));
    std::vector<std::vector<double>> keep(Q);
    eval(best, keep.data());
    auto& dist = keep[k];
    std::sort(dist.begin(), dist.end());
    std::vector<double> plug(N);
    for (std::size_t i = 0; i < N; ++i) {
      auto v = tts_point(static_cast<double>(best), curves[i][best], tm, sweeps_per_swap);
      plug[i] = v ? *v : std::numeric_limits<double>::infinity();
    }
    std::sort(plug.begin(), plug.end());
    const double tail = (1.0 - boot.ci_level) / 2.0;
    out.push_back(QuartileTts{qs[k], means[best * Q + k], sorted_quantile(dist, tail),
                              sorted_quantile(dist, 1.0 - tail), sorted_quantile(plug, qs[k]),
                              static_cast<std::uint32_t>(best)});
  }
  return out;
}

inline QuartileTts optimal_quartile_tts(std::span<const std::vector<double>> curves, double q, const TimeModel& tm,
                                        std::uint32_t sweeps_per_swap, const BootstrapConfig& boot = {},
                                        WorkerPool* pool = nullptr) {
  const double qs[] = {q};
  return optimal_quartile_tts(curves, qs, tm, sweeps_per_swap, boot, pool).front();
}

// ---------------------------------------------------------------------------
// Scaling fit: log10 TTS = gamma * n + eta by ordinary least squares.

struct ScalingFit {
  double gamma = 0.0;
  double eta = 0.0;
  double gamma_se = 0.0;
  double eta_se = 0.0;
  double covariance = 0.0;  // cov(gamma, eta)
  double r_squared = 0.0;
  double q = 0.5;
  std::size_t points = 0;
};

struct SizePoint {
  double n;
  double tts;
};

inline ScalingFit fit_scaling(std::span<const SizePoint> points, double q = 0.5) {
  const std::size_t m = points.size();
  if (m < 3) throw DegenerateFitError("scaling fit needs at least three sizes");
  double sx = 0, sy = 0;
  for (const auto& p : points) {
    if (!(p.tts > 0) || !std::isfinite(p.tts)) throw DegenerateFitError("TTS values must be positive and finite");
    sx += p.n;
    sy += std::log10(p.tts);
  }
  const double xbar = sx / m, ybar = sy / m;
  double sxx = 0, sxy = 0, syy = 0;
  for (const auto& p : points) {
    const double dx = p.n - xbar, dy = std::log10(p.tts) - ybar;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (sxx == 0.0) throw DegenerateFitError("all sizes are equal");
  ScalingFit f;
  f.q = q;
  f.points = m;
  f.gamma = sxy / sxx;
  f.eta = ybar - f.gamma * xbar;
  double ssr = 0;
  for (const auto& p : points) {
    const double r = std::log10(p.tts) - (f.gamma * p.n + f.eta);
    ssr += r * r;
  }
  const double s2 = m > 2 ? ssr / static_cast<double>(m - 2) : 0.0;
  f.gamma_se = std::sqrt(s2 / sxx);
  f.eta_se = std::sqrt(s2 * (1.0 / m + xbar * xbar / sxx));
  f.covariance = -xbar * s2 / sxx;
  f.r_squared = syy > 0 ? 1.0 - ssr / syy : 1.0;
  return f;
}

// Value with its uncertainty in the last printed digit, e.g. 0.0206(2).
// A zero uncertainty prints `exact_digits` decimals and "(0)".
inline std::string format_with_error(double value, double se, int exact_digits = 2) {
  int digits = exact_digits;
  long err = 0;
  if (se > 0 && std::isfinite(se)) {
    digits = std::max(0, -static_cast<int>(std::floor(std::log10(se))));
    err = std::lround(se * std::pow(10.0, digits));
    if (err >= 10) {  // rounding carried into the next digit
      digits = std::max(0, digits - 1);
      err = std::lround(se * std::pow(10.0, digits));
    }
  }
  return fmt::format("{:.{}f}({})", value, digits, err);
}

// Two fits agree when their slope difference lies within the joint 95% band.
inline bool gammas_agree(const ScalingFit& a, const ScalingFit& b, double z = 1.959963984540054) {
  return std::abs(a.gamma - b.gamma) <= z * std::hypot(a.gamma_se, b.gamma_se);
}

// ---------------------------------------------------------------------------
// Sweep timing

struct SweepTimeRow {
  std::uint32_t n = 0;
  double seconds_per_sweep = 0.0;
  double fpga_seconds_per_sweep = kFpgaSweepSeconds;
};

// Wall-clock mean over `sweeps` sweeps of one generated instance per size
// (n on the quadratized axis; order 3 uses n/2 spins).
inline std::vector<SweepTimeRow> sweep_time_report(std::span<const std::uint32_t> sizes, int order,
                                                   SamplerMode mode = SamplerMode::float_exact,
                                                   std::uint32_t sweeps = 10000, std::uint64_t seed = 1) {
  std::vector<SweepTimeRow> rows;
  for (auto n : sizes) {
    const auto inst = generate_3r3x(n / 2, seed);
    IsingModel m = order == 3 ? cubicize(inst) : quadratize(inst);
    if (mode == SamplerMode::hardware) m = bipolar_to_binary(m);
    PbitNetwork net(m, color_model(m), seed);
    net.set_beta(1.0);
    if (mode == SamplerMode::hardware) net.quantize_hardware();
    for (int i = 0; i < 100; ++i) net.sweep();
    const auto t0 = std::chrono::steady_clock::now();
    for (std::uint32_t i = 0; i < sweeps; ++i) net.sweep();
    const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    rows.push_back({n, dt / sweeps, kFpgaSweepSeconds});
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Reports

struct SizeReport {
  int order = 2;
  std::uint32_t n = 0;
  std::vector<SuccessCurve> curves;
  std::vector<QuartileTts> quartiles;
};

struct FitRow {
  int order = 2;
  ScalingFit fit;
};

struct ReportData {
  std::vector<SizeReport> sizes;
  std::vector<FitRow> fits;
  std::string time_unit = "seconds";
};

// Reference slopes/intercepts for p-bit FPGA solvers at q = 0.5 (seconds).
struct ReferenceLine {
  int order;
  double gamma;
  double eta;
};
inline constexpr ReferenceLine kReferenceLines[] = {{2, 0.0206, -3.76}, {3, 0.0201, -4.30}};

namespace detail {

// Step-function encoding: a row wherever p changes, plus the horizon.
inline std::string pcurves_csv(const ReportData& d) {
  std::string s = "order,n,instance_id,t_f,p\n";
  for (const auto& sz : d.sizes) {
    for (const auto& c : sz.curves) {
      double prev = -1.0;
      for (std::size_t t = 0; t < c.p.size(); ++t) {
        if (c.p[t] != prev || t + 1 == c.p.size()) {
          s += fmt::format("{},{},{},{},{}\n", sz.order, sz.n, c.instance, t, c.p[t]);
          prev = c.p[t];
        }
      }
    }
  }
  return s;
}

inline std::string tts_csv(const ReportData& d) {
  std::string s = "order,n,q,tts_seconds,ci_lo,ci_hi,t_f_opt\n";
  for (const auto& sz : d.sizes)
    for (const auto& q : sz.quartiles)
      s += fmt::format("{},{},{},{},{},{},{}\n", sz.order, sz.n, q.q, q.tts, q.ci_lo, q.ci_hi, q.t_f_opt);
  return s;
}

inline std::string fit_csv(const ReportData& d) {
  std::string s = "order,q,gamma,gamma_se,eta,eta_se,r_squared,gamma_fmt,eta_fmt\n";
  for (const auto& f : d.fits)
    s += fmt::format("{},{},{},{},{},{},{},{},{}\n", f.order, f.fit.q, f.fit.gamma, f.fit.gamma_se, f.fit.eta,
                     f.fit.eta_se, f.fit.r_squared, format_with_error(f.fit.gamma, f.fit.gamma_se),
                     format_with_error(f.fit.eta, f.fit.eta_se));
  return s;
}

inline std::string chart_svg(const ReportData& d) {
  constexpr double W = 800, H = 600, L = 80, R = 180, T = 40, Bm = 60;
  struct Pt {
    int order;
    double n, y;
  };
  std::vector<Pt> pts;
  for (const auto& sz : d.sizes)
    for (const auto& q : sz.quartiles)
      if (q.q == 0.5 && q.tts > 0 && std::isfinite(q.tts)) pts.push_back({sz.order, double(sz.n), std::log10(q.tts)});
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (const auto& p : pts) {
    xmin = std::min(xmin, p.n);
    xmax = std::max(xmax, p.n);
    ymin = std::min(ymin, p.y);
    ymax = std::max(ymax, p.y);
  }
  if (pts.empty()) xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  if (xmax == xmin) xmin -= 1, xmax += 1;
  const bool seconds = d.time_unit == "seconds";
  if (seconds) {
    for (const auto& ref : kReferenceLines) {
      ymin = std::min({ymin, ref.gamma * xmin + ref.eta, ref.gamma * xmax + ref.eta});
      ymax = std::max({ymax, ref.gamma * xmin + ref.eta, ref.gamma * xmax + ref.eta});
    }
  }
  ymin = std::floor(ymin - 0.25);
  ymax = std::ceil(ymax + 0.25);
  auto X = [&](double n) { return L + (n - xmin) / (xmax - xmin) * (W - L - R); };
  auto Y = [&](double y) { return H - Bm - (y - ymin) / (ymax - ymin) * (H - T - Bm); };
  auto color = [](int order) { return order == 3 ? "#1f77b4" : "#d62728"; };

  std::string s = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {} {}\" width=\"{}\" height=\"{}\">\n", W, H, W, H);
  s += "<rect x=\"0\" y=\"0\" width=\"800\" height=\"600\" fill=\"white\"/>\n";
  s += fmt::format("<line x1=\"{:.2f}\" y1=\"{:.2f}\" x2=\"{:.2f}\" y2=\"{:.2f}\" stroke=\"black\"/>\n", L, H - Bm,
                   W - R, H - Bm);
  s += fmt::format("<line x1=\"{:.2f}\" y1=\"{:.2f}\" x2=\"{:.2f}\" y2=\"{:.2f}\" stroke=\"black\"/>\n", L, T, L,
                   H - Bm);
  for (double y = ymin; y <= ymax + 1e-9; y += 1.0)
    s += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" font-size=\"12\" text-anchor=\"end\">{:.0f}</text>\n", L - 6,
                     Y(y) + 4, y);
  for (const auto& p : pts) {
    bool seen = false;
    for (const auto& q : pts)
      if (&q < &p && q.n == p.n) seen = true;
    if (!seen)
      s += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" font-size=\"12\" text-anchor=\"middle\">{:.0f}</text>\n",
                       X(p.n), H - Bm + 18, p.n);
  }
  s += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" font-size=\"14\" text-anchor=\"middle\">problem size n</text>\n",
                   (L + W - R) / 2, H - 15);
  s += fmt::format(
      "<text x=\"20\" y=\"{:.2f}\" font-size=\"14\" text-anchor=\"middle\" transform=\"rotate(-90 20 {:.2f})\">"
      "log10 median TTS ({})</text>\n",
      H / 2, H / 2, d.time_unit);

  double legend_y = T + 10;
  auto legend = [&](const std::string& label, const char* stroke, const char* dash) {
    s += fmt::format(
        "<line x1=\"{:.2f}\" y1=\"{:.2f}\" x2=\"{:.2f}\" y2=\"{:.2f}\" stroke=\"{}\" stroke-dasharray=\"{}\"/>\n",
        W - R + 10, legend_y, W - R + 35, legend_y, stroke, dash);
    s += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" font-size=\"12\">{}</text>\n", W - R + 40, legend_y + 4, label);
    legend_y += 20;
  };
  for (const auto& p : pts)
    s += fmt::format("<circle cx=\"{:.2f}\" cy=\"{:.2f}\" r=\"4\" fill=\"{}\"/>\n", X(p.n), Y(p.y), color(p.order));
  for (const auto& f : d.fits) {
    if (f.fit.q != 0.5) continue;
    s += fmt::format("<line x1=\"{:.2f}\" y1=\"{:.2f}\" x2=\"{:.2f}\" y2=\"{:.2f}\" stroke=\"{}\"/>\n", X(xmin),
                     Y(f.fit.gamma * xmin + f.fit.eta), X(xmax), Y(f.fit.gamma * xmax + f.fit.eta), color(f.order));
    legend(fmt::format("order {} fit", f.order), color(f.order), "none");
  }
  if (seconds) {
    for (const auto& ref : kReferenceLines) {
      s += fmt::format(
          "<line x1=\"{:.2f}\" y1=\"{:.2f}\" x2=\"{:.2f}\" y2=\"{:.2f}\" stroke=\"{}\" stroke-dasharray=\"6 4\"/>\n",
          X(xmin), Y(ref.gamma * xmin + ref.eta), X(xmax), Y(ref.gamma * xmax + ref.eta), color(ref.order));
      legend(fmt::format("order {} FPGA ref", ref.order), color(ref.order), "6 4");
    }
  }
  s += "</svg>\n";
  return s;
}

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + p.string());
  out << text;
  if (!out) throw Error("write failed for " + p.string());
}

}  // namespace detail

// Writes pcurves.csv, tts.csv, fit.csv and chart.svg into `dir`. Output is
// byte-deterministic for fixed input; an empty campaign writes nothing.
inline void emit_report(const ReportData& data, const std::filesystem::path& dir) {
  if (data.sizes.empty()) throw NoDataError("empty campaign: nothing to report");
  const std::string pc = detail::pcurves_csv(data), tt = detail::tts_csv(data), ft = detail::fit_csv(data),
                    svg = detail::chart_svg(data);
  std::filesystem::create_directories(dir);
  detail::write_text(dir / "pcurves.csv", pc);
  detail::write_text(dir / "tts.csv", tt);
  detail::write_text(dir / "fit.csv", ft);
  detail::write_text(dir / "chart.svg", svg);
}

}  // namespace pbit
