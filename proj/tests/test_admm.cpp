#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "oracles.hpp"

using namespace shapecomp;
using oracle::TwoShape;

namespace {

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST(Prox, Branches) {
  const std::vector<double> a{1, 0};
  EXPECT_EQ(prox_max_affine(a, 0.0, 1.0, std::vector<double>{2, 0}), (std::vector<double>{1, 0}));
  EXPECT_EQ(prox_max_affine(a, 0.0, 1.0, std::vector<double>{-1, 3}), (std::vector<double>{-1, 3}));
  EXPECT_EQ(prox_max_affine(a, 0.0, 1.0, std::vector<double>{0.5, 2}), (std::vector<double>{0, 2}));
  EXPECT_EQ(prox_max_affine(std::vector<double>{0, 0}, -1.0, 1.0, std::vector<double>{4, 5}),
            (std::vector<double>{4, 5}));
  for (auto want : {std::vector<double>{1, 0}, std::vector<double>{0, 2}}) {
    const auto rho = want == std::vector<double>{1, 0} ? std::vector<double>{2, 0} : std::vector<double>{0.5, 2};
    EXPECT_LE(max_abs_diff(oracle::numeric_prox(a, 0.0, 1.0, rho), want), 1e-6);  // oracle precision
  }
}

TEST(Prox, MatchesNumericMinimizer) {
  std::mt19937_64 rng(61);
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> u(0.05, 3.0);
  for (int t = 0; t < 300; ++t) {
    const int n = 1 + static_cast<int>(rng() % 5);
    std::vector<double> a(n), rho(n);
    for (auto& x : a) x = nd(rng);
    for (auto& x : rho) x = 2 * nd(rng);
    const double b = nd(rng), xi = u(rng);
    EXPECT_LE(max_abs_diff(prox_max_affine(a, b, xi, rho), oracle::numeric_prox(a, b, xi, rho)), 1e-6);
  }
}

TEST(Prox, BranchBoundariesAgree) {
  // At a^T rho = b and a^T rho = b + xi |a|^2 neighbouring branches give the same point.
  const std::vector<double> a{2, -1};
  const double xi = 0.5, aa = 5.0, b = 0.3;
  for (double level : {b, b + xi * aa}) {
    const std::vector<double> rho{level / 2.0, 0.0};  // a^T rho = level
    const auto p = prox_max_affine(a, b, xi, rho);
    const double theta_mid = (level - b) / aa, theta_edge = level == b ? 0.0 : xi;
    EXPECT_EQ(theta_mid, theta_edge);
    EXPECT_EQ(p[0], rho[0] - theta_edge * a[0]);
    EXPECT_EQ(p[1], rho[1] - theta_edge * a[1]);
  }
}

TEST(ProjectL1, Examples) {
  EXPECT_EQ(project_l1_ball(std::vector<double>{0.3, -0.2}, 1.0), (std::vector<double>{0.3, -0.2}));
  EXPECT_EQ(project_l1_ball(std::vector<double>{3, 0}, 1.0), (std::vector<double>{1, 0}));
  EXPECT_EQ(project_l1_ball(std::vector<double>{2, 1}, 1.0), (std::vector<double>{1, 0}));
  EXPECT_EQ(project_l1_ball(std::vector<double>{2, -1}, 0.0), (std::vector<double>{0, 0}));
  const auto g = oracle::grid_project_l1({2, 1}, 1.0);
  EXPECT_LE(max_abs_diff(g, {1, 0}), 2e-3);
}

TEST(ProjectL1, FeasibleIdempotentAndNearGridOracle) {
  std::mt19937_64 rng(62);
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> u(0.1, 3.0);
  for (int t = 0; t < 60; ++t) {
    const int n = 2 + static_cast<int>(rng() % 2);
    std::vector<double> v(n);
    for (auto& x : v) x = 2 * nd(rng);
    const double tau = u(rng);
    const auto p = project_l1_ball(v, tau);
    double l1 = 0.0;
    for (double x : p) l1 += std::abs(x);
    EXPECT_LE(l1, tau + 1e-9);
    EXPECT_LE(max_abs_diff(project_l1_ball(p, tau), p), 1e-15);
    EXPECT_LE(max_abs_diff(p, oracle::grid_project_l1(v, tau)), 2e-3);
  }
}

TEST(SoftThreshold, Examples) {
  EXPECT_EQ(soft_threshold(std::vector<double>{2, -0.1}, 0.5), (std::vector<double>{1.5, 0}));
  EXPECT_EQ(soft_threshold(std::vector<double>{2, -0.1}, 0.0), (std::vector<double>{2, -0.1}));
  EXPECT_EQ(soft_threshold(std::vector<double>{0.2, -0.3}, 0.3), (std::vector<double>{0, 0}));
}

TEST(Admm, TwoShapeReachesLpOptimum) {
  TwoShape a;
  const auto r = solve_admm(assemble(a.delta, a.dict, Budget::tau(2)));
  EXPECT_NEAR(r.gtilde, -1.0, 1e-3);
}

TEST(Admm, ZeroDataStaysZero) {
  TwoShape a;
  AdmmOptions o;
  o.max_iters = 3;
  const auto r = solve_admm(assemble(DeltaField(a.grid, {0, 0, 0, 0}), a.dict, Budget::tau(2)), o);
  EXPECT_EQ(r.alpha.alpha, (std::vector<double>{0, 0}));
  EXPECT_TRUE(r.converged);
}

TEST(Admm, HugeLambdaGivesZero) {
  std::mt19937_64 rng(63);
  const auto in = oracle::random_disks(rng, 10, 10, 5);
  auto pd = assemble(in.delta, in.dict, Budget::tau(1));
  double lam = 0.0;
  for (double v : pd.A.val) lam += std::abs(v);
  pd.budget = Budget::lambda(lam);
  const auto r = solve_admm(pd);
  for (double a : r.alpha.alpha) EXPECT_EQ(a, 0.0);
}

TEST(Admm, AggregatedMatchesNaiveIterates) {
  std::mt19937_64 rng(64);
  for (int t = 0; t < 10; ++t) {
    const int ns = 2 + static_cast<int>(rng() % 5);
    auto in = oracle::random_disks(rng, 6, 7, ns);
    for (std::size_t k = 0; k < in.delta.size(); k += 4) in.delta.delta[k] = 0.0;
    const Budget b = t % 2 ? Budget::tau(1.5) : Budget::lambda(0.7);
    const auto pd = assemble(in.delta, in.dict, b);
    for (long iters : {1L, 7L, 60L}) {
      AdmmOptions o;
      o.max_iters = iters;
      o.tol_primal = o.tol_dual = 0.0;
      const auto agg = solve_admm(pd, o);
      const auto naive = oracle::naive_admm(pd, o.xi, iters);
      ASSERT_EQ(agg.iterations, naive.iterations);
      double scale = 1.0;
      for (double x : naive.rho) scale = std::max(scale, std::abs(x));
      EXPECT_LE(max_abs_diff(agg.alpha.alpha, naive.rho), 1e-12 * scale);
      for (long k = 0; k < iters; ++k) {
        EXPECT_NEAR(agg.trace[k].primal_res, naive.primal[k], 1e-12 * (1 + naive.primal[k]));
        EXPECT_NEAR(agg.trace[k].dual_res, naive.dual[k], 1e-12 * (1 + naive.dual[k]));
      }
    }
  }
}

TEST(Admm, ResultIndependentOfWorkerCount) {
  std::mt19937_64 rng(65);
  const auto in = oracle::random_disks(rng, 90, 90, 30);
  const auto pd = assemble(in.delta, in.dict, Budget::tau(2));
  AdmmOptions o;
  o.max_iters = 200;
  set_worker_count(1);
  const auto a = solve_admm(pd, o);
  set_worker_count(4);
  const auto b = solve_admm(pd, o);
  set_worker_count(1);
  EXPECT_EQ(a.alpha.alpha, b.alpha.alpha);
  ASSERT_EQ(a.trace.size(), b.trace.size());
  for (std::size_t k = 0; k < a.trace.size(); ++k) EXPECT_EQ(a.trace[k].objective, b.trace[k].objective);
}

TEST(Admm, AgreesWithLpOnSmallInstances) {
  std::mt19937_64 rng(66);
  for (int t = 0; t < 8; ++t) {
    const auto in = oracle::random_disks(rng, 12, 12, 8);
    const auto pd = assemble(in.delta, in.dict, Budget::tau(2));
    const auto lp = solve_csc_lp(pd);
    const auto ad = solve_admm(pd);
    EXPECT_LE(std::abs(ad.gtilde - lp.gtilde) / (1 + std::abs(lp.gtilde)), 1e-3);
    // residual trace eventually below tolerance
    if (ad.converged) {
      EXPECT_LE(ad.trace.back().primal_res, 1e-8 * std::sqrt(8.0));
    }
  }
}

TEST(Admm, TraceCsv) {
  TwoShape a;
  AdmmOptions o;
  o.max_iters = 3;
  const auto r = solve_admm(assemble(a.delta, a.dict, Budget::tau(2)), o);
  std::ostringstream os;
  write_trace_csv(os, r.trace);
  const std::string s = os.str();
  EXPECT_EQ(s.substr(0, s.find('\n')), "iter,primal_res,dual_res,objective");
  EXPECT_EQ(std::count(s.begin(), s.end(), '\n'), 4);
}
