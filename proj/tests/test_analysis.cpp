#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"

using namespace shapecomp;
using oracle::TwoShape;

namespace {

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// 1 x 6 strip: S1 = c0..c3, S2 = c2..c5, target S1 \ S2 = {c0, c1}.
struct Strip {
  Grid grid = Grid::make_2d(1, 6);
  Dictionary dict{grid};
  DeltaField delta{grid, {-1, -1, 1, 1, 1, 1}};
  Strip() {
    dict.add(ShapeMask(grid, {0, 1, 2, 3}), {"s", {}});
    dict.add(ShapeMask(grid, {2, 3, 4, 5}), {"s", {}});
  }
};

// e_j by pixel integration: over S_j, Delta+ where L > 1 minus (-Delta)+ where L < 0.
std::vector<double> pixel_e(const Dictionary& d, const DeltaField& df, const std::vector<double>& alpha) {
  std::vector<double> e(d.size(), 0.0);
  for (std::int64_t k = 0; k < d.grid.size(); ++k) {
    double L = 0.0;
    for (std::size_t j = 0; j < d.size(); ++j)
      if (d.shapes[j].contains(static_cast<cell_index>(k))) L += alpha[j];
    const double D = df.delta[k];
    double v = 0.0;
    if (L > 1.0 + 1e-9) v = std::max(D, 0.0);
    if (L < -1e-9) v = -std::max(-D, 0.0);
    for (std::size_t j = 0; j < d.size(); ++j)
      if (d.shapes[j].contains(static_cast<cell_index>(k))) e[j] += v * d.grid.cell_volume();
  }
  return e;
}

}  // namespace

TEST(Linkage, TwoShape) {
  TwoShape a;
  const auto lr = linkage(a.dict, Composition({0}, {1}));
  EXPECT_EQ(lr.alpha_r, (std::vector<double>{1, -1}));
  EXPECT_EQ(lr.gamma1, (std::vector<int>{0}));  // shapelet {c1}
  EXPECT_EQ(lr.gamma0, (std::vector<int>{1}));  // shapelet {c2, c3}
  EXPECT_TRUE(lr.basic);
}

TEST(Linkage, PlusOnlyIsAllOnes) {
  std::mt19937_64 rng(41);
  const auto in = oracle::random_disks(rng, 20, 20, 3);
  const Composition c({0, 2}, {});
  if (!is_non_redundant(in.dict, c)) GTEST_SKIP();
  const auto lr = linkage(in.dict, c, false);
  EXPECT_EQ(lr.alpha_r, (std::vector<double>{1, 1}));
}

TEST(Linkage, NestedDisks) {
  const Grid g = Grid::make_2d(21, 21);
  Dictionary d(g);
  for (double r : {9.0, 6.0, 3.0}) {
    const double c[2] = {10.5, 10.5}, ax[2] = {r, r};
    d.add(rasterize_ellipsoid(g, c, ax), {"disk", {r}});
  }
  const auto lr = linkage(d, Composition({0}, {1}));
  EXPECT_EQ(lr.alpha_r, (std::vector<double>{1, -1}));
  EXPECT_TRUE(lr.basic);
  // hole structure: the middle disk (with the inner one inside it) sits at level 0
  const auto L = level_function(d, lr.full_alpha(3));
  for (cell_index k = 0; k < g.size(); ++k) {
    const double want = d.shapes[0].contains(k) && !d.shapes[1].contains(k) ? 1.0 : 0.0;
    EXPECT_EQ(L[k], want);
  }
  // outer minus inner: the middle ring is inside R, so the annulus is the target
  EXPECT_EQ(linkage(d, Composition({0}, {2})).alpha_r, (std::vector<double>{1, -1}));
}

TEST(Linkage, SingleSubtrahendMatchesClosedForm) {
  // With one subtracted shape the linkage LP has the closed form
  // alpha_- = -max over its cells of the number of covering plus shapes.
  std::mt19937_64 rng(42);
  int checked = 0;
  for (int t = 0; t < 300 && checked < 40; ++t) {
    const auto in = oracle::random_disks(rng, 16, 16, 4);
    const Composition c({0, 1, 2}, {3});
    if (!is_non_redundant(in.dict, c)) continue;
    LinkageResult lr;
    try {
      lr = linkage(in.dict, c, false);
    } catch (const error&) {
      continue;
    }
    int worst = 0;
    for (auto k : in.dict.shapes[3].cells()) {
      int cover = 0;
      for (int j = 0; j < 3; ++j) cover += in.dict.shapes[j].contains(k);
      worst = std::max(worst, cover);
    }
    EXPECT_EQ(lr.alpha_r[3], -static_cast<double>(worst));
    ++checked;
  }
  EXPECT_GE(checked, 20);
}

TEST(Linkage, RedundantAndNonBasic) {
  TwoShape a;
  Dictionary d = a.dict;
  d.add(ShapeMask(a.grid, {0}), {"s", {}});
  try {
    linkage(d, Composition({0, 2}, {}));  // S3 inside S1
    FAIL();
  } catch (const error& e) {
    EXPECT_EQ(e.kind(), error_kind::redundant_composition);
  }
  // I+ = {S1, S2}: one unit shapelet per plus shape, the overlap sits at level 2
  const auto lr = linkage(a.dict, Composition({0, 1}, {}), false);
  EXPECT_EQ(lr.gamma1.size(), 2u);
  EXPECT_TRUE(lr.basic);
}

TEST(Linkage, SignsRoundTrip) {
  std::mt19937_64 rng(43);
  for (int t = 0; t < 30; ++t) {
    const auto s = oracle::loc_scene(rng, 0);
    LinkageResult lr;
    try {
      lr = linkage(s.dict, s.target);
    } catch (const error&) {
      continue;
    }
    const AlphaVector a{lr.full_alpha(s.dict.size())};
    EXPECT_EQ(Composition::from_alpha(a), s.target);
  }
}

TEST(BearingConstants, TwoShape) {
  TwoShape a;
  const Composition c({0}, {1});
  const auto lr = linkage(a.dict, c);
  EXPECT_EQ(bearing_constants(lr, decompose_composition(a.dict, c)), (std::vector<double>{-1, 2}));
}

TEST(BearingConstants, PlusOnlyIsOnes) {
  const Grid g = Grid::make_2d(1, 5);
  Dictionary d(g);
  d.add(ShapeMask(g, {0, 1, 2}), {"s", {}});
  d.add(ShapeMask(g, {2, 3, 4}), {"s", {}});
  const Composition c({0, 1}, {});
  const auto w = bearing_constants(linkage(d, c), decompose_composition(d, c));
  EXPECT_EQ(w, (std::vector<double>{1, 1}));
}

TEST(BearingConstants, BoundsAndRoundTripOnRandomScenes) {
  std::mt19937_64 rng(44);
  int checked = 0;
  for (int t = 0; t < 200; ++t) {
    const auto s = oracle::loc_scene(rng, 0);
    if (s.target.cardinality() > 5) continue;
    LinkageResult lr;
    try {
      lr = linkage(s.dict, s.target);
    } catch (const error&) {
      continue;
    }
    const auto dR = decompose_composition(s.dict, s.target);
    const auto w = bearing_constants(lr, dR);  // throws if the bounds fail
    std::vector<int> rows = lr.gamma0;
    rows.insert(rows.end(), lr.gamma1.begin(), lr.gamma1.end());
    for (std::size_t k = 0; k < lr.shapes.size(); ++k) {
      double s_k = 0.0;
      for (std::size_t r = 0; r < rows.size(); ++r) s_k += dR.bit(rows[r], static_cast<int>(k)) ? w[r] : 0.0;
      EXPECT_NEAR(s_k, k < lr.n_plus ? 1.0 : -1.0, 1e-12);
    }
    for (std::size_t r = 0; r < lr.gamma0.size(); ++r) {
      EXPECT_GE(w[r], -1.0);
      EXPECT_LT(w[r], 0.0);
    }
    for (std::size_t r = lr.gamma0.size(); r < w.size(); ++r) {
      EXPECT_GE(w[r], 1.0);
      EXPECT_LE(w[r], 1.0 + static_cast<double>(lr.n_minus));
    }
    ++checked;
  }
  EXPECT_GE(checked, 50);
}

TEST(Coherence, DisjointDuplicateAndHalf) {
  Strip s;
  Dictionary d = s.dict;
  d.add(ShapeMask(s.grid, {5}), {"far", {}});        // disjoint from R's shapelets
  d.add(ShapeMask(s.grid, {0, 1, 2, 3}), {"dup", {}});  // copy of S1
  d.add(ShapeMask(s.grid, {0}), {"half", {}});        // half of the unit shapelet
  const Composition c({0}, {1});
  const DeltaField df(s.grid, {-1, -1, 1, 1, 1, 1});
  const auto lr = linkage(d, c);
  const auto w = bearing_constants(lr, decompose_composition(d, c));
  ASSERT_EQ(w, (std::vector<double>{-1, 2}));
  const auto coh = coherence(d, c, w, decompose(d.shapes, &df));
  EXPECT_TRUE(std::isnan(coh[0]) && std::isnan(coh[1]));
  EXPECT_EQ(coh[2], 0.0);
  EXPECT_EQ(coh[3], 1.0);              // |w_G1 + w_G0| = |2 - 1|
  EXPECT_EQ(coh[4], std::abs(0.5 * 2.0));
}

TEST(LocViolation, ExactLocHasZeroViolation) {
  TwoShape a;
  const Composition c({0}, {1});
  const auto lr = linkage(a.dict, c);
  const auto w = bearing_constants(lr, decompose_composition(a.dict, c));
  const auto cells = decompose(a.dict.shapes, &a.delta);
  const auto lv = loc_violation(a.dict, c, cells, lr, w);
  EXPECT_EQ(lv.e, (std::vector<double>{0, 0}));
  EXPECT_EQ(lv.eps_lv, (std::vector<double>{0, 0}));
  // eps_i = -q |J| / |w| on null shapelets, -p |J| / |w| on unit shapelets
  ASSERT_EQ(lv.eps_i.size(), 2u);
  EXPECT_EQ(lv.eps_i[0], -cells.q[lv.cell_index[0]] * 1.0 / 1.0);
  EXPECT_EQ(lv.eps_i[1], -cells.p[lv.cell_index[1]] * 1.0 / 2.0);
}

TEST(LocViolation, MatchesPixelIntegrationUnderFlips) {
  std::mt19937_64 rng(45);
  int checked = 0;
  for (int t = 0; t < 200 && checked < 40; ++t) {
    const auto s = oracle::loc_scene(rng, 1 + static_cast<int>(rng() % 8));
    LinkageResult lr;
    std::vector<double> w;
    try {
      lr = linkage(s.dict, s.target);
      w = bearing_constants(lr, decompose_composition(s.dict, s.target));
    } catch (const error&) {
      continue;
    }
    const auto alpha = lr.full_alpha(s.dict.size());
    const auto lv = loc_violation(s.dict, s.target, decompose(s.dict.shapes, &s.delta), lr, w);
    EXPECT_LE(max_abs_diff(lv.e, pixel_e(s.dict, s.delta, alpha)), 1e-12);
    // eps_lv solves the transposed bearing system with right-hand side e_R
    const auto dR = decompose_composition(s.dict, s.target);
    std::vector<int> rows = lr.gamma0;
    rows.insert(rows.end(), lr.gamma1.begin(), lr.gamma1.end());
    for (std::size_t k = 0; k < lr.shapes.size(); ++k) {
      double v = 0.0;
      for (std::size_t r = 0; r < rows.size(); ++r) v += dR.bit(rows[r], static_cast<int>(k)) ? lv.eps_lv[r] : 0.0;
      EXPECT_NEAR(v, lv.e[lr.shapes[k]], 1e-9);
    }
    ++checked;
  }
  EXPECT_GE(checked, 20);
}

TEST(Certificate, TwoShapeHandDerivation) {
  TwoShape a;
  const auto cells = decompose(a.dict.shapes, &a.delta);
  const auto c = check_unique_optimality(cells, {1, -1}, 2);
  EXPECT_TRUE(c.feasible);
  EXPECT_TRUE(c.rank_ok);
  EXPECT_EQ(c.l, (std::vector<double>{-2, 0}));
  EXPECT_EQ(c.u, (std::vector<double>{0, 1}));
  EXPECT_GT(c.eta_c, 0.0);
  EXPECT_LT(c.eta_c, 0.5);
  EXPECT_NEAR(c.eta[0], -c.eta_c, 1e-12);
  EXPECT_NEAR(c.eta[1], 2 * c.eta_c, 1e-12);
  EXPECT_GT(c.margin, 0.0);
  // the margin-maximizing point of eta = (-h, 2h), h in (0, 0.5) is h = 1/3
  EXPECT_NEAR(c.margin, 1.0 / 3.0, 1e-9);
  const auto gm = oracle::grid_min_2(a.dict, a.delta, 2.0, 0.05);
  EXPECT_EQ(gm.ties, 1);
  EXPECT_NEAR(gm.argmin[0], 1.0, 1e-12);
  EXPECT_NEAR(gm.argmin[1], -1.0, 1e-12);
}

TEST(Certificate, ZeroBudgetDegenerate) {
  TwoShape a;
  const auto c = check_unique_optimality(decompose(a.dict.shapes, &a.delta), {0, 0}, 0.0);
  EXPECT_TRUE(c.rank_ok);
  EXPECT_TRUE(c.gamma1.empty());
}

TEST(Certificate, HypothesisViolations) {
  TwoShape a;
  const auto cells = decompose(a.dict.shapes, &a.delta);
  for (auto bad : {std::pair<std::vector<double>, double>{{0.5, 0.0}, 0.5}, {{1.0, -1.0}, 3.0}}) {
    try {
      check_unique_optimality(cells, bad.first, bad.second);
      FAIL();
    } catch (const error& e) {
      EXPECT_EQ(e.kind(), error_kind::hypothesis_violated);
    }
  }
}

TEST(Certificate, SoundOnRandomLocInstances) {
  std::mt19937_64 rng(46);
  int certified = 0, wrong = 0;
  for (int t = 0; t < 1500 && certified < 50; ++t) {
    const auto s = oracle::loc_scene(rng, static_cast<int>(rng() % 4));
    LinkageResult lr;
    try {
      lr = linkage(s.dict, s.target);
    } catch (const error&) {
      continue;
    }
    const auto alpha = lr.full_alpha(s.dict.size());
    double tau = 0.0;
    for (double x : alpha) tau += std::abs(x);
    Certificate c;
    try {
      c = check_unique_optimality(decompose(s.dict.shapes, &s.delta), alpha, tau);
    } catch (const error&) {
      continue;
    }
    if (!c.feasible) continue;
    ++certified;
    const auto r = solve_csc_lp(assemble(s.delta, s.dict, Budget::tau(tau)));
    if (max_abs_diff(r.alpha.alpha, alpha) > 1e-6) ++wrong;
  }
  EXPECT_GE(certified, 50);
  EXPECT_EQ(wrong, 0);
}

TEST(Recovery, DisjointExteriorsAndStrongMasses) {
  Strip s;
  Dictionary d = s.dict;
  d.add(ShapeMask(s.grid, {5}), {"far", {}});
  const Composition c({0}, {1});
  const auto eta = choose_eta_c(d, s.delta, c);
  ASSERT_TRUE(eta.has_value());
  const auto rep = check_recovery(d, s.delta, c, *eta);
  EXPECT_TRUE(rep.conditions_met);
  for (auto m : {LpMethod::primal, LpMethod::dual}) {
    CscLpOptions o;
    o.method = m;
    const auto r = solve_csc_lp(assemble(s.delta, d, Budget::tau(2)), o);
    EXPECT_LE(max_abs_diff(r.alpha.alpha, rep.linkage.full_alpha(d.size())), 1e-6);
  }
}

TEST(Recovery, DuplicateExteriorFailsCoherence) {
  Strip s;
  Dictionary d = s.dict;
  d.add(ShapeMask(s.grid, {0, 1, 2, 3}), {"dup", {}});
  const Composition c({0}, {1});
  const auto rep = check_recovery(d, s.delta, c, 0.25);
  EXPECT_FALSE(rep.coherence_conditions);
  EXPECT_FALSE(rep.conditions_met);
  EXPECT_FALSE(choose_eta_c(d, s.delta, c).has_value());
  EXPECT_TRUE(eta_c_interval(d, s.delta, c).coherence_blocked);
}

TEST(Recovery, TwoShapeWithoutExteriors) {
  TwoShape a;
  const auto rep = check_recovery(a.dict, a.delta, Composition({0}, {1}), 0.25);
  EXPECT_TRUE(rep.cell_conditions);
  EXPECT_TRUE(rep.coh_margin[0] != rep.coh_margin[0]);  // members carry NaN
  for (double m : rep.cell_margin) EXPECT_GT(m, 0.0);
  EXPECT_TRUE(rep.conditions_met);
}

TEST(Recovery, EtaOutsideIntervalFails) {
  TwoShape a;
  const Composition c({0}, {1});
  const auto iv = eta_c_interval(a.dict, a.delta, c);
  EXPECT_FALSE(check_recovery(a.dict, a.delta, c, iv.hi + 1.0).conditions_met);
  EXPECT_FALSE(check_recovery(a.dict, a.delta, c, 0.0).conditions_met);
}

TEST(Epsilon, TwoShapeValues) {
  TwoShape a;
  auto d = epsilon_diagnostics(a.dict, a.delta, std::vector<double>{1, -1});
  EXPECT_EQ(d.eps_1plus, 0.0);
  EXPECT_EQ(d.eps_0minus, 0.0);
  EXPECT_EQ(d.g, d.e_region);
  d = epsilon_diagnostics(a.dict, a.delta, std::vector<double>{2, 0});
  EXPECT_EQ(d.eps_1plus, 2.0);
  EXPECT_NEAR(d.residual, 0.0, 1e-12);
}

TEST(Epsilon, IdentityWhenBetaAvoidsOpenUnitInterval) {
  std::mt19937_64 rng(47);
  for (int t = 0; t < 100; ++t) {
    const int ns = 2 + static_cast<int>(rng() % 5);
    const auto in = oracle::random_disks(rng, 12, 12, ns);
    std::vector<double> a(ns);
    for (auto& x : a) x = static_cast<double>(static_cast<int>(rng() % 5) - 2);
    const auto d = epsilon_diagnostics(in.dict, in.delta, a);
    ASSERT_TRUE(d.beta_outside_01);
    EXPECT_NEAR(d.residual, 0.0, 1e-10);
    EXPECT_GE(d.eps_1plus, 0.0);
    EXPECT_GE(d.eps_0minus, 0.0);
    // G here is the same as G~ computed from the assembled problem
    EXPECT_NEAR(d.g, objective_value(assemble(in.delta, in.dict, Budget::tau(1)), a), 1e-10);
  }
}
