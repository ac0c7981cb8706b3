#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include "pbit/bench.hpp"

using namespace pbit;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Synthetic success curves: instance i succeeds per attempt with rate r_i.
std::vector<std::vector<double>> synthetic_curves(std::size_t instances, std::size_t horizon, Rng& rng) {
  std::vector<std::vector<double>> curves;
  for (std::size_t i = 0; i < instances; ++i) {
    const double rate = 0.01 + 0.3 * uniform01(rng);
    std::vector<double> p(horizon + 1, 0.0);
    for (std::size_t t = 1; t <= horizon; ++t) p[t] = std::round(1000 * (1 - std::pow(1 - rate, t))) / 1000;
    curves.push_back(p);
  }
  return curves;
}

}  // namespace

TEST(Tts, UnitRatioAtTargetProbability) {
  const auto tm = TimeModel::fpga();
  EXPECT_EQ(*tts_point(37, 0.99, tm, 100), tm.wall_time(37, 100));
  EXPECT_EQ(*tts_point(37, 1.0, tm, 100), tm.wall_time(37, 100));
  EXPECT_EQ(*tts_point(37, 0.999, tm, 100), tm.wall_time(37, 100));
  EXPECT_FALSE(tts_point(37, 0.0, tm, 100));
}

TEST(Tts, HalfProbabilityExample) {
  const double expect = 100 * 102 * 66.67e-9 * std::log(0.01) / std::log(0.5);
  EXPECT_NEAR(expect, 4.518e-3, 1e-6);
  EXPECT_NEAR(*tts_point(100, 0.5, TimeModel::fpga(), 100), expect, 1e-15);
}

TEST(Tts, MonotoneInProbability) {
  const auto tm = TimeModel::sweeps();
  double prev = INFINITY;
  for (double p = 0.001; p <= 1.0; p += 0.001) {
    const double t = *tts_point(10, p, tm, 100);
    EXPECT_LE(t, prev);
    prev = t;
  }
}

TEST(Tts, TimeModels) {
  EXPECT_DOUBLE_EQ(TimeModel::sweeps().wall_time(3, 100), 306.0);
  EXPECT_DOUBLE_EQ(TimeModel::wallclock(0.5).wall_time(4, 100), 2.0);
  auto tm = TimeModel::fpga();
  tm.f_p = 4;
  EXPECT_DOUBLE_EQ(*tts_point(1, 0.99, tm, 100), TimeModel::fpga().wall_time(1, 100) / 4);
}

TEST(Quantile, LinearInterpolation) {
  const std::vector<double> v{1, 2, 3, 4, 10};
  EXPECT_DOUBLE_EQ(sorted_quantile(v, 0.5), 3);
  EXPECT_DOUBLE_EQ(sorted_quantile(v, 0.25), 2);
  EXPECT_DOUBLE_EQ(sorted_quantile(v, 0.9), 7.6);
  const std::vector<double> w{1, 2, INFINITY};
  EXPECT_DOUBLE_EQ(sorted_quantile(w, 0.5), 2);
  EXPECT_TRUE(std::isinf(sorted_quantile(w, 0.75)));
}

TEST(OptimalTts, PicksCertainAttempt) {
  // every instance certain at t_f = 5, weak elsewhere
  std::vector<std::vector<double>> curves(10, std::vector<double>(21, 0.05));
  for (auto& c : curves) c[5] = 0.99;
  const auto tm = TimeModel::fpga();
  const auto r = optimal_quartile_tts(curves, 0.5, tm, 100);
  EXPECT_EQ(r.t_f_opt, 5u);
  EXPECT_NEAR(r.tts, tm.wall_time(5, 100), 1e-15);
  EXPECT_DOUBLE_EQ(r.ci_lo, r.ci_hi);
}

TEST(OptimalTts, QuartileOrdering) {
  Rng rng(3);
  for (int rep = 0; rep < 10; ++rep) {
    const auto curves = synthetic_curves(20, 60, rng);
    const double qs[] = {0.25, 0.5, 0.75};
    BootstrapConfig boot;
    boot.resamples = 300;
    boot.seed = rep;
    const auto r = optimal_quartile_tts(curves, qs, TimeModel::sweeps(), 100, boot);
    EXPECT_LE(r[0].tts, r[1].tts);
    EXPECT_LE(r[1].tts, r[2].tts);
    for (const auto& q : r) {
      EXPECT_LE(q.ci_lo, q.tts);
      EXPECT_GE(q.ci_hi, q.tts);
    }
  }
}

TEST(OptimalTts, UnsolvedInstancesCountAsInfinite) {
  Rng rng(4);
  auto curves = synthetic_curves(20, 30, rng);
  for (int i = 0; i < 2; ++i) std::fill(curves[i].begin(), curves[i].end(), 0.0);
  BootstrapConfig boot;
  boot.resamples = 200;
  EXPECT_NO_THROW(optimal_quartile_tts(curves, 0.25, TimeModel::sweeps(), 100, boot));
  // two of twenty never solve: low quartiles stay finite, q = 1 sees +inf
  EXPECT_THROW(optimal_quartile_tts(curves, 1.0, TimeModel::sweeps(), 100, boot), NoDataError);
  std::vector<std::vector<double>> none(5, std::vector<double>(10, 0.0));
  EXPECT_THROW(optimal_quartile_tts(none, 0.5, TimeModel::sweeps(), 100, boot), NoDataError);
}

TEST(OptimalTts, WorkerInvariant) {
  Rng rng(5);
  const auto curves = synthetic_curves(15, 40, rng);
  BootstrapConfig boot;
  boot.resamples = 200;
  WorkerPool pool(4);
  const auto a = optimal_quartile_tts(curves, 0.5, TimeModel::sweeps(), 100, boot);
  const auto b = optimal_quartile_tts(curves, 0.5, TimeModel::sweeps(), 100, boot, &pool);
  EXPECT_EQ(a.tts, b.tts);
  EXPECT_EQ(a.ci_lo, b.ci_lo);
  EXPECT_EQ(a.t_f_opt, b.t_f_opt);
}

TEST(OptimalTts, CiCoversPlugInQuantile) {
  Rng rng(6);
  int covered = 0;
  const int reps = 100;
  for (int rep = 0; rep < reps; ++rep) {
    const auto curves = synthetic_curves(25, 30, rng);
    BootstrapConfig boot;
    boot.resamples = 400;
    boot.seed = 1000 + rep;
    const auto r = optimal_quartile_tts(curves, 0.5, TimeModel::sweeps(), 100, boot);
    covered += r.ci_lo <= r.plug_in && r.plug_in <= r.ci_hi;
  }
  EXPECT_GE(covered, 95);
}

TEST(Fit, RecoversNoiselessData) {
  std::vector<SizePoint> pts;
  for (double n : {16.0, 24.0, 32.0, 40.0, 48.0}) pts.push_back({n, std::pow(10.0, 0.02 * n - 3)});
  const auto f = fit_scaling(pts);
  EXPECT_NEAR(f.gamma, 0.02, 1e-14);
  EXPECT_NEAR(f.eta, -3.0, 1e-12);
  EXPECT_NEAR(f.r_squared, 1.0, 1e-12);
  EXPECT_NEAR(f.gamma_se, 0.0, 1e-12);
}

TEST(Fit, KnownStandardErrors) {
  // log10 values 1, 3, 2 at n = 0, 1, 2: slope 0.5, intercept 1.5,
  // residuals -0.5, 1, -0.5 -> s^2 = 1.5, Sxx = 2
  const std::vector<SizePoint> pts{{0, 10}, {1, 1000}, {2, 100}};
  const auto f = fit_scaling(pts);
  EXPECT_NEAR(f.gamma, 0.5, 1e-12);
  EXPECT_NEAR(f.eta, 1.5, 1e-12);
  EXPECT_NEAR(f.gamma_se, std::sqrt(1.5 / 2), 1e-12);
  EXPECT_NEAR(f.eta_se, std::sqrt(1.5 * (1.0 / 3 + 1.0 / 2)), 1e-12);
  EXPECT_NEAR(f.r_squared, 0.25, 1e-12);
}

TEST(Fit, TimeRescalingShiftsIntercept) {
  std::vector<SizePoint> a, b;
  for (double n : {16.0, 24.0, 32.0, 40.0}) {
    const double t = std::pow(10.0, 0.03 * n - 2) * (1 + 0.1 * std::sin(n));
    a.push_back({n, t});
    b.push_back({n, 66.67e-9 * t});
  }
  const auto fa = fit_scaling(a), fb = fit_scaling(b);
  EXPECT_NEAR(fa.gamma, fb.gamma, 1e-12);
  EXPECT_NEAR(fb.eta - fa.eta, std::log10(66.67e-9), 1e-12);
}

TEST(Fit, Degenerate) {
  const std::vector<SizePoint> two{{16, 1}, {24, 2}};
  EXPECT_THROW(fit_scaling(two), DegenerateFitError);
  const std::vector<SizePoint> same{{16, 1}, {16, 2}, {16, 3}};
  EXPECT_THROW(fit_scaling(same), DegenerateFitError);
}

TEST(Fit, ParentheticalFormat) {
  EXPECT_EQ(format_with_error(0.0206, 0.0002), "0.0206(2)");
  EXPECT_EQ(format_with_error(-3.76, 0.06), "-3.76(6)");
  EXPECT_EQ(format_with_error(-4.30, 0.0), "-4.30(0)");
  EXPECT_EQ(format_with_error(0.02012, 0.00019), "0.0201(2)");
}

TEST(Fit, GammaAgreement) {
  ScalingFit a, b;
  a.gamma = 0.0206;
  a.gamma_se = 0.0002;
  b.gamma = 0.0198;
  b.gamma_se = 0.0002;
  EXPECT_FALSE(gammas_agree(a, b));
  b.gamma = 0.0203;
  EXPECT_TRUE(gammas_agree(a, b));
}

TEST(SweepTime, SoftwareGrowsWithSize) {
  const std::uint32_t sizes[] = {16, 112};
  const auto rows = sweep_time_report(sizes, 2, SamplerMode::float_exact, 10000);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_GT(rows[1].seconds_per_sweep, rows[0].seconds_per_sweep);
  for (const auto& r : rows) EXPECT_DOUBLE_EQ(r.fpga_seconds_per_sweep, 66.67e-9);
}

class ReportTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("pbit_report_" + std::to_string(::getpid()));
    fs::remove_all(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  static ReportData sample() {
    ReportData d;
    Rng rng(7);
    for (int order : {2, 3}) {
      std::vector<SizePoint> pts;
      for (std::uint32_t n : {16u, 24u, 32u}) {
        SizeReport s;
        s.order = order;
        s.n = n;
        const auto curves = synthetic_curves(8, 20, rng);
        for (std::uint32_t i = 0; i < curves.size(); ++i) s.curves.push_back({i, curves[i]});
        BootstrapConfig boot;
        boot.resamples = 100;
        const double qs[] = {0.25, 0.5, 0.75};
        s.quartiles = optimal_quartile_tts(curves, qs, TimeModel::fpga(), 100, boot);
        pts.push_back({double(n), s.quartiles[1].tts * (n / 16.0)});
        d.sizes.push_back(s);
      }
      d.fits.push_back({order, fit_scaling(pts)});
    }
    return d;
  }

  fs::path dir_;
};

TEST_F(ReportTest, WritesDeterministicFiles) {
  const auto d = sample();
  emit_report(d, dir_ / "a");
  emit_report(d, dir_ / "b");
  for (const char* f : {"pcurves.csv", "tts.csv", "fit.csv", "chart.svg"}) {
    ASSERT_TRUE(fs::exists(dir_ / "a" / f)) << f;
    EXPECT_EQ(slurp(dir_ / "a" / f), slurp(dir_ / "b" / f)) << f;
  }
  const auto svg = slurp(dir_ / "a" / "chart.svg");
  EXPECT_NE(svg.find("viewBox=\"0 0 800 600\""), std::string::npos);
  EXPECT_NE(svg.find("order 2 fit"), std::string::npos);
  EXPECT_NE(svg.find("order 3 fit"), std::string::npos);
  EXPECT_NE(svg.find("FPGA ref"), std::string::npos);
  const auto tts = slurp(dir_ / "a" / "tts.csv");
  EXPECT_EQ(tts.substr(0, tts.find('\n')), "order,n,q,tts_seconds,ci_lo,ci_hi,t_f_opt");
}

TEST_F(ReportTest, PcurvesEncodeChangePoints) {
  ReportData d;
  SizeReport s;
  s.n = 16;
  s.curves.push_back({0, {0.0, 0.0, 0.5, 0.5, 1.0, 1.0}});
  d.sizes.push_back(s);
  emit_report(d, dir_);
  EXPECT_EQ(slurp(dir_ / "pcurves.csv"), "order,n,instance_id,t_f,p\n2,16,0,0,0\n2,16,0,2,0.5\n2,16,0,4,1\n2,16,0,5,1\n");
}

TEST_F(ReportTest, EmptyCampaignWritesNothing) {
  EXPECT_THROW(emit_report(ReportData{}, dir_), NoDataError);
  EXPECT_FALSE(fs::exists(dir_));
}
