#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <random>
#include <sstream>

#include "oracles.hpp"

using namespace shapecomp;
using oracle::TwoShape;

namespace {

StandardLP dense_lp(const std::vector<std::vector<double>>& A, std::vector<double> b, std::vector<double> c) {
  StandardLP lp;
  SparseBuilder sb(static_cast<int>(c.size()));
  for (const auto& row : A) {
    for (std::size_t j = 0; j < row.size(); ++j) sb.add(static_cast<int>(j), row[j]);
    sb.end_row();
  }
  lp.A_ub = std::move(sb).finish();
  lp.b_ub = std::move(b);
  lp.nonneg.assign(c.size(), true);
  lp.c_obj = std::move(c);
  return lp;
}

// Minimum of c^T x over {Ax <= b, x >= 0} by enumerating every vertex
// (n active constraints out of rows + nonnegativity); assumes boundedness.
double vertex_enumeration(const std::vector<std::vector<double>>& A, const std::vector<double>& b,
                          const std::vector<double>& c) {
  const int n = static_cast<int>(c.size()), m = static_cast<int>(A.size());
  std::vector<std::vector<double>> G = A;
  std::vector<double> h = b;
  for (int j = 0; j < n; ++j) {
    std::vector<double> r(n, 0.0);
    r[j] = -1.0;
    G.push_back(r);
    h.push_back(0.0);
  }
  const int total = m + n;
  double best = std::numeric_limits<double>::infinity();
  std::vector<int> pick(n);
  std::function<void(int, int)> rec = [&](int start, int depth) {
    if (depth == n) {
      Eigen::MatrixXd M(n, n);
      Eigen::VectorXd r(n);
      for (int a = 0; a < n; ++a) {
        for (int j = 0; j < n; ++j) M(a, j) = G[pick[a]][j];
        r(a) = h[pick[a]];
      }
      Eigen::FullPivLU<Eigen::MatrixXd> lu(M);
      if (!lu.isInvertible()) return;
      const Eigen::VectorXd x = lu.solve(r);
      for (int i = 0; i < total; ++i) {
        double s = 0.0;
        for (int j = 0; j < n; ++j) s += G[i][j] * x(j);
        if (s > h[i] + 1e-9) return;
      }
      double v = 0.0;
      for (int j = 0; j < n; ++j) v += c[j] * x(j);
      best = std::min(best, v);
      return;
    }
    for (int i = start; i < total; ++i) {
      pick[depth] = i;
      rec(i + 1, depth + 1);
    }
  };
  rec(0, 0);
  return best;
}

std::vector<double> primal_alpha(const ProblemData& pd, const std::vector<double>& x) {
  const int N = pd.n_cells(), n = pd.n_shapes();
  std::vector<double> a(n);
  for (int j = 0; j < n; ++j) a[j] = x[N + j] - x[N + n + j];
  return a;
}

void expect_same_lp(const StandardLP& a, const StandardLP& b) {
  EXPECT_EQ(a.c_obj, b.c_obj);
  EXPECT_EQ(a.b_ub, b.b_ub);
  EXPECT_EQ(a.A_ub.rows, b.A_ub.rows);
  EXPECT_EQ(a.A_ub.cols, b.A_ub.cols);
  EXPECT_EQ(a.A_ub.row_ptr, b.A_ub.row_ptr);
  EXPECT_EQ(a.A_ub.col, b.A_ub.col);
  EXPECT_EQ(a.A_ub.val, b.A_ub.val);
  for (int i = 0; i < a.n_rows(); ++i) EXPECT_EQ(a.kind(i), b.kind(i));
  EXPECT_EQ(a.nonneg, b.nonneg);
  for (int j = 0; j < a.n_vars(); ++j) EXPECT_EQ(a.upper_bound(j), b.upper_bound(j));
}

}  // namespace

TEST(Simplex, OneVariable) {
  const auto s = solve(dense_lp({{1.0}}, {1.0}, {-1.0}));
  ASSERT_EQ(s.status, LpStatus::optimal);
  EXPECT_NEAR(s.x[0], 1.0, 1e-12);
  EXPECT_NEAR(s.objective, -1.0, 1e-12);
}

TEST(Simplex, InfeasibleRow) {
  EXPECT_EQ(solve(dense_lp({{0.0}}, {-1.0}, {1.0})).status, LpStatus::infeasible);
}

TEST(Simplex, Unbounded) {
  EXPECT_EQ(solve(dense_lp({{-1.0}}, {1.0}, {-1.0})).status, LpStatus::unbounded);
}

TEST(Simplex, MatchesVertexEnumeration) {
  std::mt19937_64 rng(51);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int t = 0; t < 200; ++t) {
    const int n = 2 + static_cast<int>(rng() % 2), m = 2 + static_cast<int>(rng() % 4);
    std::vector<std::vector<double>> A(m, std::vector<double>(n));
    std::vector<double> b(m), c(n);
    for (auto& r : A)
      for (auto& x : r) x = std::round(4 * u(rng)) / 2;
    for (auto& x : b) x = 1.0 + std::abs(u(rng));
    for (auto& x : c) x = u(rng);
    for (int j = 0; j < n; ++j) {  // box keeps it bounded
      std::vector<double> r(n, 0.0);
      r[j] = 1.0;
      A.push_back(r);
      b.push_back(3.0);
    }
    const auto lp = dense_lp(A, b, c);
    const auto s = solve(lp);
    ASSERT_EQ(s.status, LpStatus::optimal);
    EXPECT_NEAR(s.objective, vertex_enumeration(A, b, c), 1e-9);
    EXPECT_LE(primal_residual(lp, s.x), 1e-8);
  }
}

TEST(CscLp, PrimalBuildShape) {
  TwoShape a;
  const auto lp = build_primal(assemble(a.delta, a.dict, Budget::tau(2)));
  EXPECT_EQ(lp.n_vars(), 8);
  EXPECT_EQ(lp.n_rows(), 5);
}

TEST(CscLp, TwoShapePrimal) {
  TwoShape a;
  const auto pd = assemble(a.delta, a.dict, Budget::tau(2));
  const auto lp = build_primal(pd);
  const auto s = solve(lp);
  ASSERT_EQ(s.status, LpStatus::optimal);
  EXPECT_NEAR(s.objective, 0.0, 1e-12);
  const auto alpha = primal_alpha(pd, s.x);
  EXPECT_NEAR(alpha[0], 1.0, 1e-9);
  EXPECT_NEAR(alpha[1], -1.0, 1e-9);
  const auto r = solve_csc_lp(pd);
  EXPECT_NEAR(r.gtilde, -1.0, 1e-12);
  EXPECT_NEAR(r.alpha.alpha[0], 1.0, 1e-9);
  EXPECT_NEAR(r.alpha.alpha[1], -1.0, 1e-9);
}

TEST(CscLp, TwoShapeDualStrongDuality) {
  TwoShape a;
  const auto pd = assemble(a.delta, a.dict, Budget::tau(2));
  const auto d = build_dual(pd);
  EXPECT_EQ(d.n_vars(), 5);
  const auto s = solve(d);
  ASSERT_EQ(s.status, LpStatus::optimal);
  EXPECT_NEAR(s.objective, 0.0, 1e-8);
  CscLpOptions o;
  o.method = LpMethod::dual;
  const auto r = solve_csc_lp(pd, o);
  EXPECT_NEAR(r.alpha.alpha[0], 1.0, 1e-9);
  EXPECT_NEAR(r.alpha.alpha[1], -1.0, 1e-9);
}

TEST(CscLp, ZeroBudget) {
  TwoShape a;
  const auto pd = assemble(a.delta, a.dict, Budget::tau(0));
  for (auto m : {LpMethod::primal, LpMethod::dual}) {
    CscLpOptions o;
    o.method = m;
    const auto r = solve_csc_lp(pd, o);
    EXPECT_EQ(r.alpha.l1(), 0.0);
    EXPECT_EQ(r.gtilde, 0.0);
  }
  // primal optimum at alpha = 0 is -sum(b) = 1, the dual is its negation
  EXPECT_NEAR(solve(build_dual(pd)).objective, -1.0, 1e-12);
}

TEST(CscLp, SingleCellShape) {
  const Grid g = Grid::make_2d(1, 3);
  Dictionary d(g);
  d.add(ShapeMask(g, {1}), {"s", {}});
  const auto r = solve_csc_lp(assemble(DeltaField(g, {1, -1, 1}), d, Budget::tau(1)));
  EXPECT_NEAR(r.alpha.alpha[0], 1.0, 1e-12);
}

TEST(CscLp, PrimalDualAgreeAndInvariantsOnRandomInstances) {
  std::mt19937_64 rng(52);
  for (int t = 0; t < 40; ++t) {
    const int ns = 2 + static_cast<int>(rng() % 7);
    const auto in = oracle::random_disks(rng, 5 + static_cast<int>(rng() % 3), 7, ns);
    const double tau = 0.5 + static_cast<double>(rng() % 6) / 2.0;
    const auto pd = assemble(in.delta, in.dict, Budget::tau(tau));
    double sum_b = 0.0;
    for (double x : pd.b) sum_b += x;
    const auto plp = build_primal(pd);
    const auto ps = solve(plp);
    const auto ds = solve(build_dual(pd));
    ASSERT_EQ(ps.status, LpStatus::optimal);
    ASSERT_EQ(ds.status, LpStatus::optimal);
    EXPECT_NEAR(ps.objective, -ds.objective, 1e-7);

    const auto alpha = primal_alpha(pd, ps.x);
    double l1 = 0.0;
    for (double x : alpha) l1 += std::abs(x);
    EXPECT_LE(l1, tau + 1e-8);
    EXPECT_NEAR(ps.objective + sum_b, objective_value(pd, alpha), 1e-8);
    for (int i = 0; i < pd.n_cells(); ++i) {
      const double z = ps.x[i], ax = pd.A.row_dot(i, alpha);
      EXPECT_GE(z, -1e-9);
      EXPECT_GE(z + pd.b[i], ax - 1e-8);
      EXPECT_LE(std::min(z, z + pd.b[i] - ax), 1e-8);
    }
    CscLpOptions o;
    o.method = LpMethod::dual;
    const auto r = solve_csc_lp(pd, o);
    EXPECT_NEAR(r.gtilde, ps.objective + sum_b, 1e-7);
  }
}

TEST(CscLp, RegularizedHugeLambdaGivesZero) {
  std::mt19937_64 rng(53);
  const auto in = oracle::random_disks(rng, 10, 10, 5);
  auto pd = assemble(in.delta, in.dict, Budget::tau(1));
  double lam = 0.0;
  for (double v : pd.A.val) lam += std::abs(v);
  pd.budget = Budget::lambda(lam);
  const auto r = solve_csc_lp(pd);
  ASSERT_EQ(r.status, LpStatus::optimal);
  for (double a : r.alpha.alpha) EXPECT_NEAR(a, 0.0, 1e-12);
}

TEST(CscLp, WorkingSetMatchesFullSolve) {
  std::mt19937_64 rng(54);
  for (int t = 0; t < 5; ++t) {
    const auto in = oracle::random_disks(rng, 14, 14, 90);
    const auto pd = assemble(in.delta, in.dict, Budget::tau(3));
    CscLpOptions full;
    full.working_set = false;
    const auto a = solve_csc_lp(pd, full), b = solve_csc_lp(pd);
    ASSERT_EQ(b.status, LpStatus::optimal);
    EXPECT_NEAR(a.gtilde, b.gtilde, 1e-7);
    EXPECT_GT(b.rounds, 0);
  }
}

TEST(CompactRows, PreservesObjective) {
  std::mt19937_64 rng(55);
  std::normal_distribution<double> nd;
  for (int t = 0; t < 20; ++t) {
    auto in = oracle::random_disks(rng, 9, 9, 5);
    for (std::size_t k = 0; k < in.delta.size(); ++k)
      in.delta.delta[k] = k % 3 ? (nd(rng) > 0 ? 1.0 : -2.0) : 0.0;
    const auto pd = assemble(in.delta, in.dict, Budget::tau(1));
    const auto cp = compact_rows(pd);
    EXPECT_LE(cp.pd.n_cells(), pd.n_cells());
    std::vector<double> a(5);
    for (auto& x : a) x = nd(rng);
    EXPECT_NEAR(objective_value(cp.pd, a) + cp.dropped_constant, objective_value(pd, a), 1e-12);
  }
}

TEST(Mps, OneVariableSections) {
  auto lp = dense_lp({{1.0}}, {1.0}, {-1.0});
  std::ostringstream os;
  write_mps(os, lp, "ONE");
  const std::string s = os.str();
  for (const char* sec : {"NAME", "ROWS", "COLUMNS", "RHS", "BOUNDS", "ENDATA"}) EXPECT_NE(s.find(sec), std::string::npos);
}

TEST(Mps, TwoShapeStructure) {
  TwoShape a;
  std::ostringstream os;
  write_mps(os, build_primal(assemble(a.delta, a.dict, Budget::tau(2))));
  std::istringstream is(os.str());
  const auto back = read_mps(is);
  EXPECT_EQ(back.n_vars(), 8);
  EXPECT_EQ(back.n_rows(), 5);
}

TEST(Mps, RoundTripRandomLps) {
  std::mt19937_64 rng(56);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int t = 0; t < 20; ++t) {
    const int n = 1 + static_cast<int>(rng() % 8), m = 1 + static_cast<int>(rng() % 8);
    StandardLP lp;
    SparseBuilder sb(n);
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < n; ++j)
        if (rng() % 2) sb.add(j, u(rng) * std::pow(10.0, static_cast<int>(rng() % 9) - 4));
      sb.end_row();
      lp.b_ub.push_back(u(rng) * 1e3);
      lp.row_kind.push_back(rng() % 3 ? RowKind::le : RowKind::eq);
    }
    lp.A_ub = std::move(sb).finish();
    for (int j = 0; j < n; ++j) {
      lp.c_obj.push_back(rng() % 4 ? u(rng) / 3.0 : 0.0);
      lp.nonneg.push_back(rng() % 3 != 0);
      lp.upper.push_back(rng() % 2 ? std::numeric_limits<double>::infinity() : 1.0 + std::abs(u(rng)));
    }
    std::stringstream ss;
    write_mps(ss, lp);
    const auto back = read_mps(ss);
    expect_same_lp(lp, back);
    std::stringstream again;
    write_mps(again, back);
    EXPECT_EQ(ss.str(), again.str());
  }
}

TEST(Mps, ParseErrors) {
  std::istringstream bad("NAME X\nROWS\n N COST\n L r1\nCOLUMNS\n    x1 r1 abc\nENDATA\n");
  try {
    read_mps(bad);
    FAIL();
  } catch (const error& e) {
    EXPECT_EQ(e.kind(), error_kind::parse);
  }
}
