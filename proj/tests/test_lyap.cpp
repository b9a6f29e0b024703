#include <gtest/gtest.h>

#include <random>

#include "reckit/lyap.hpp"

namespace reckit {
namespace {

Relation random_relation(std::mt19937& rng, int n, double density) {
  Relation r(n);
  std::bernoulli_distribution coin(density);
  for (int u = 0; u < n; ++u)
    for (int v = 0; v < n; ++v)
      if (coin(rng)) r.add(u, v);
  return r;
}

Relation chain3() {
  Relation f(3);
  f.add(0, 1), f.add(1, 2);
  return orbit_relation(f);
}

TEST(IsLyapunov, ConstantAndHeightFunctions) {
  Relation edge(2);
  edge.add(0, 1);
  LyapunovFn constant{{Rat(1, 3), Rat(1, 3)}};
  EXPECT_TRUE(is_lyapunov(constant, edge));
  LyapunovFn up{{Rat(0), Rat(1)}};
  EXPECT_TRUE(is_lyapunov(up, edge));
  LyapunovFn down{{Rat(1), Rat(0)}};
  EXPECT_FALSE(is_lyapunov(down, edge));
  LyapunovFn outside{{Rat(2), Rat(0)}};
  EXPECT_THROW(is_lyapunov(outside, edge), std::invalid_argument);
}

TEST(IsLyapunov, SmallerRelationKeepsEveryFunction) {
  std::mt19937 rng(71);
  for (int trial = 0; trial < 30; ++trial) {
    Relation f2 = random_relation(rng, 8, 0.25);
    Relation f1 = f2;
    for (auto& [u, v] : f2.pairs())
      if (rng() % 2) f1.remove(u, v);
    LyapunovFn L = complete_lyapunov(orbit_relation(f2));
    EXPECT_TRUE(is_lyapunov(L, f2));
    EXPECT_TRUE(is_lyapunov(L, f1));
  }
}

TEST(Separate, EndpointValuesAndInteriorLevel) {
  Relation F = chain3();
  LyapunovFn L = separate(F, make_set(3, {2}), make_set(3, {0}));
  EXPECT_EQ(L.values[0], Rat(0));
  EXPECT_EQ(L.values[1], Rat(1, 2));
  EXPECT_EQ(L.values[2], Rat(1));
  EXPECT_TRUE(is_lyapunov(L, F));

  LyapunovFn all = separate(F, PointSet::all(3), PointSet(3));
  for (const Rat& v : all.values) EXPECT_EQ(v, Rat(1));
}

TEST(Separate, RejectsBadSides) {
  Relation F = chain3();
  // {0} is not forward invariant, {2} is not backward invariant.
  EXPECT_THROW(separate(F, make_set(3, {0}), PointSet(3)), std::invalid_argument);
  EXPECT_THROW(separate(F, PointSet(3), make_set(3, {2})), std::invalid_argument);
  EXPECT_THROW(separate(F, PointSet::all(3), PointSet::all(3)), std::invalid_argument);
}

TEST(Separate, RandomInvariantSidesStayMonotone) {
  std::mt19937 rng(73);
  for (int trial = 0; trial < 40; ++trial) {
    Relation f = random_relation(rng, 9, 0.15);
    Relation g = orbit_relation(f);
    std::uniform_int_distribution<int> pick(0, 8);
    int a = pick(rng), b = pick(rng);
    PointSet A = make_set(9, {a}) | g.image(a);
    PointSet down = make_set(9, {b}) | g.preimage(make_set(9, {b}));
    if (A.intersects(down)) continue;
    LyapunovFn L = separate(g, A, down);
    EXPECT_TRUE(is_lyapunov(L, f));
    EXPECT_TRUE(is_lyapunov(L, g));
    for (PointId p : A.members()) EXPECT_EQ(L.values[p], Rat(1));
    for (PointId p : down.members()) EXPECT_EQ(L.values[p], Rat(0));
  }
}

TEST(SeparatePoints, ChainAndIsolatedPair) {
  Relation iso(2);
  LyapunovFn L = separate_points(iso, 0, 1);
  EXPECT_EQ(L.values[0], Rat(1));
  EXPECT_EQ(L.values[1], Rat(0));

  Relation F = chain3();
  LyapunovFn M = separate_points(F, 2, 0);
  EXPECT_EQ(M.values[2], Rat(1));
  EXPECT_EQ(M.values[0], Rat(0));
  EXPECT_THROW(separate_points(F, 0, 2), std::invalid_argument);
  EXPECT_THROW(separate_points(F, 1, 1), std::invalid_argument);
}

TEST(SufficientSet, CutEqualsReflexiveOrbitClosure) {
  std::mt19937 rng(79);
  for (int trial = 0; trial < 40; ++trial) {
    int n = 4 + trial % 9;
    Relation f = random_relation(rng, n, 0.12 + 0.02 * (trial % 5));
    SufficientSet ss = sufficient_set(f);
    Relation cut = leq_intersection(ss, n);
    EXPECT_EQ(cut, Relation::identity(n) | g_relation(f));
    for (const LyapunovFn& L : ss.fns) {
      EXPECT_TRUE(is_lyapunov(L, f));
      EXPECT_TRUE(is_lyapunov(L, g_relation(f)));
    }
  }
}

TEST(SufficientSet, FullRecurrenceNeedsNoFunctions) {
  Relation cyc(3);
  cyc.add(0, 1), cyc.add(1, 2), cyc.add(2, 0);
  EXPECT_TRUE(sufficient_set(cyc).fns.empty());
}

TEST(SufficientSet, TwoRaysGetSeparatedBothWays) {
  // Two disjoint forward chains; every cross pair must break in both orders.
  Relation f(8);
  for (int i = 0; i + 1 < 4; ++i) f.add(i, i + 1), f.add(4 + i, 5 + i);
  SufficientSet ss = sufficient_set(f);
  Relation cut = leq_intersection(ss, 8);
  for (int i = 0; i < 4; ++i)
    for (int j = 4; j < 8; ++j) {
      EXPECT_FALSE(cut.has(i, j));
      EXPECT_FALSE(cut.has(j, i));
    }
}

TEST(Splitting, StrictGapAndDegenerateSides) {
  Relation f(3);
  f.add(0, 1), f.add(1, 2);
  SplittingResult s = splitting_function(f, 1);
  EXPECT_EQ(s.u, make_set(3, {1}));
  EXPECT_EQ(s.fn.values[2], Rat(1));
  EXPECT_EQ(s.fn.values[0], Rat(0));

  Relation iso(2);
  SplittingResult t = splitting_function(iso, 0);
  for (const Rat& v : t.fn.values) EXPECT_EQ(v, Rat(0));

  Relation cyc(2);
  cyc.add(0, 1), cyc.add(1, 0);
  EXPECT_THROW(splitting_function(cyc, 0), std::invalid_argument);
}

TEST(Splitting, SupBelowInfOnRandomNonCyclicPoints) {
  std::mt19937 rng(83);
  for (int trial = 0; trial < 40; ++trial) {
    Relation f = random_relation(rng, 9, 0.15);
    Relation g = g_relation(f);
    for (int x = 0; x < 9; ++x) {
      if (g.has(x, x)) continue;
      SplittingResult s = splitting_function(f, x);
      Rat sup_back(0), inf_fwd(1);
      for (PointId p : g.preimage(make_set(9, {x})).members())
        sup_back = std::max(sup_back, s.fn.values[p]);
      for (PointId p : g.image(x).members()) inf_fwd = std::min(inf_fwd, s.fn.values[p]);
      EXPECT_LT(sup_back, inf_fwd);
      EXPECT_TRUE(is_lyapunov(s.fn, f));
    }
  }
}

TEST(CompleteLyapunov, ChainGetsQuartersAndCycleIsConstant) {
  LyapunovFn L = complete_lyapunov(chain3());
  EXPECT_EQ(L.values[0], Rat(1, 4));
  EXPECT_EQ(L.values[1], Rat(2, 4));
  EXPECT_EQ(L.values[2], Rat(3, 4));

  Relation cyc(3);
  cyc.add(0, 1), cyc.add(1, 2), cyc.add(2, 0);
  LyapunovFn C = complete_lyapunov(orbit_relation(cyc));
  EXPECT_EQ(C.values[0], C.values[1]);
  EXPECT_EQ(C.values[1], C.values[2]);
}

TEST(CompleteLyapunov, ClassConstantAndStrictAcrossClasses) {
  std::mt19937 rng(89);
  for (int trial = 0; trial < 40; ++trial) {
    Relation F = orbit_relation(random_relation(rng, 10, 0.15));
    LyapunovFn L = complete_lyapunov(F);
    EXPECT_TRUE(is_lyapunov(L, F));
    Condensation cond = condense(F);
    for (auto& [x, y] : F.pairs()) {
      if (cond.comp[x] == cond.comp[y])
        EXPECT_EQ(L.values[x], L.values[y]);
      else
        EXPECT_LT(L.values[x], L.values[y]);
    }
    for (const Rat& v : L.values) EXPECT_LE(v.denominator(), cond.ncomp + 1);
  }
}

TEST(CompactSupport, WholeSpaceAndEscapeError) {
  Relation F = chain3();
  LyapunovFn L = compact_support_lyapunov(F, PointSet::all(3), PointSet::all(3));
  for (const Rat& v : L.values) EXPECT_EQ(v, Rat(1));

  // Forward set of {0} is the whole chain, which leaves U = {0,1}.
  EXPECT_THROW(compact_support_lyapunov(F, make_set(3, {0}), make_set(3, {0, 1})),
               std::invalid_argument);
  EXPECT_THROW(compact_support_lyapunov(F, make_set(3, {2}), make_set(3, {0, 1})),
               std::invalid_argument);
}

TEST(CompactSupport, SinkInsideWindowVanishesOutside) {
  // Contraction toward point 3: everything maps one step toward the sink.
  Relation f(7);
  for (int i = 0; i < 6; ++i) f.add(i, i < 3 ? i + 1 : i);
  f.add(3, 3), f.add(4, 3), f.add(5, 4), f.add(6, 5);
  Relation F = orbit_relation(f);
  PointSet A = make_set(7, {3});
  PointSet U = make_set(7, {2, 3, 4});
  LyapunovFn L = compact_support_lyapunov(F, A, U);
  EXPECT_TRUE(is_lyapunov(L, F));
  EXPECT_EQ(L.values[3], Rat(1));
  for (PointId p : U.complement().members()) EXPECT_EQ(L.values[p], Rat(0));
}

TEST(HullViaLyapunov, MatchesInvariantHullOracle) {
  Relation F = chain3();
  EXPECT_EQ(hull_via_lyapunov(F, PointSet::all(3), sufficient_set(F)), PointSet::all(3));
  EXPECT_EQ(hull_via_lyapunov(F, make_set(3, {1}), sufficient_set(F)), make_set(3, {1, 2}));

  std::mt19937 rng(97);
  for (int trial = 0; trial < 30; ++trial) {
    Relation f = random_relation(rng, 9, 0.15);
    SufficientSet ss = sufficient_set(f);
    PointSet a(9);
    std::uniform_int_distribution<int> pick(0, 8);
    a.add(pick(rng));
    if (rng() % 2) a.add(pick(rng));
    EXPECT_EQ(hull_via_lyapunov(f, a, ss), invariant_hull(g_relation(f), a));
  }
}

TEST(Serialize, CsvAndJsonShapes) {
  FiniteSpace space(2);
  space.set_label(0, "cell (0,1)");
  space.set_label(1, "plain");
  LyapunovFn L{{Rat(1, 2), Rat(1)}};
  EXPECT_EQ(to_csv_text(L, space), "point,label,num,den\n0,\"cell (0,1)\",1,2\n1,plain,1,1\n");

  nlohmann::json j = to_json(SufficientSet{{L}});
  ASSERT_EQ(j.size(), 1u);
  EXPECT_EQ(j[0]["values"][0]["num"], 1);
  EXPECT_EQ(j[0]["values"][0]["den"], 2);
}

}  // namespace
}  // namespace reckit
