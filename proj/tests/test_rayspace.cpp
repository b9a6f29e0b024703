#include "reckit/rayspace.hpp"

#include <fstream>
#include <random>

#include <gtest/gtest.h>

#include "reckit/relcore.hpp"

namespace reckit {
namespace {

RaySystem load_golden(const std::string& name) {
  std::ifstream in(std::string(RECKIT_SOURCE_DIR) + "/goldens/" + name);
  if (!in) throw std::runtime_error("missing golden " + name);
  return ray_system_from_json(nlohmann::json::parse(in));
}

using Pair = std::pair<std::string, std::string>;

std::vector<Pair> sorted_pairs(std::vector<Pair> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

// Random nondecreasing system: shifts in {0,1}, no limit points.
RaySystem random_ascending(std::mt19937& rng) {
  RaySystem r;
  int k = 2 + static_cast<int>(rng() % 4);
  for (int i = 0; i < k; ++i) r.rays.push_back("r" + std::to_string(i));
  int m = 2 * k;
  for (int i = 0; i < m; ++i)
    r.rules.push_back({r.rays[rng() % k], r.rays[rng() % k],
                       static_cast<int>(rng() % 2), static_cast<int>(rng() % 4)});
  return r;
}

// Random system with limit points, for closure property tests.
RaySystem random_limited(std::mt19937& rng) {
  RaySystem r = random_ascending(rng);
  for (const std::string& ray : r.rays)
    if (rng() % 2) r.limit_class[ray] = "c" + std::to_string(rng() % 2);
  std::vector<std::string> classes = detail::limit_classes_of(r);
  for (const std::string& g : classes)
    for (const std::string& h : classes)
      if (rng() % 4 == 0) r.limit_pairs.emplace_back(g, h);
  return r;
}

TEST(Closure, ThreeStrandClosureDerivesTheTwoPointGlue) {
  RaySystem raw = load_golden("three_strand.json");
  EXPECT_FALSE(is_closed(raw));
  ClosureResult c = closure(raw);
  EXPECT_TRUE(c.notes.empty());
  std::vector<Pair> want = {{"z_0", "z_pm"}, {"z_pm", "z_0"}, {"z_pm", "z_pm"}};
  EXPECT_EQ(c.sys.limit_pairs, want);
  EXPECT_TRUE(is_closed(c.sys));
  EXPECT_EQ(closure(c.sys).sys.limit_pairs, c.sys.limit_pairs);
}

TEST(Closure, StrippedSystemHasNoObligations) {
  RaySystem bare = strip_limits(load_golden("three_strand.json"));
  ClosureResult c = closure(bare);
  EXPECT_TRUE(c.sys.limit_pairs.empty());
  EXPECT_TRUE(c.notes.empty());
  EXPECT_TRUE(is_closed(bare));
}

TEST(Closure, SixCycleIsClosedWithNotesForTheUnlimitedRay) {
  RaySystem g = load_golden("six_cycle.json");
  ClosureResult c = closure(g);
  EXPECT_TRUE(is_closed(g));
  // The middle ray has no limit point, so the two rules touching it shed
  // their tail pairs outside the space.
  EXPECT_EQ(c.notes.size(), 2u);
}

TEST(Closure, IdempotentAndMonotoneOnRandomSystems) {
  std::mt19937 rng(173);
  for (int trial = 0; trial < 40; ++trial) {
    RaySystem r = random_limited(rng);
    ClosureResult once = closure(r);
    ClosureResult twice = closure(once.sys);
    EXPECT_EQ(twice.sys.limit_pairs, once.sys.limit_pairs);
    EXPECT_TRUE(twice.notes == once.notes);

    RaySystem wider = r;
    wider.rules.push_back({r.rays[rng() % r.rays.size()], r.rays[rng() % r.rays.size()],
                           static_cast<int>(rng() % 2), 0});
    std::vector<Pair> before = sorted_pairs(closure(r).sys.limit_pairs);
    std::vector<Pair> after = sorted_pairs(closure(wider).sys.limit_pairs);
    EXPECT_TRUE(std::includes(after.begin(), after.end(), before.begin(), before.end()));
  }
}

TEST(Powers, SquareOfTheSixCycleNeedsANewLimitPair) {
  RaySystem g = load_golden("six_cycle.json");
  RaySystem g2 = power(g, 2);
  std::vector<Pair> want_lp = {{"minus_inf", "minus_inf"}, {"plus_inf", "plus_inf"}};
  EXPECT_EQ(g2.limit_pairs, want_lp);
  EXPECT_FALSE(is_closed(g2));
  // The square maps the minus ray onto the plus ray, so its closure must
  // contain the pair of their limit points, which the square itself lacks.
  std::vector<Pair> added;
  std::vector<Pair> closed = closure(g2).sys.limit_pairs;
  std::set_difference(closed.begin(), closed.end(), g2.limit_pairs.begin(),
                      g2.limit_pairs.end(), std::back_inserter(added));
  std::vector<Pair> witness = {{"minus_inf", "plus_inf"}};
  EXPECT_EQ(added, witness);
}

TEST(Powers, SixCyclePowersCloseWithPeriodSix) {
  RaySystem g = load_golden("six_cycle.json");
  for (int n = 1; n <= 12; ++n) {
    bool want = (n % 6 == 0) || (n % 6 == 1) || (n % 6 == 5);
    EXPECT_EQ(is_closed(power(g, n)), want) << "power " << n;
  }
}

TEST(Powers, SixthPowerIsTheIdentityPattern) {
  RaySystem g6 = power(load_golden("six_cycle.json"), 6);
  ASSERT_EQ(g6.rules.size(), 3u);
  for (const RayRule& rule : g6.rules) {
    EXPECT_EQ(rule.from, rule.to);
    EXPECT_EQ(rule.shift, 0);
    EXPECT_EQ(rule.threshold, 0);
  }
  std::vector<Pair> want_lp = {{"minus_inf", "minus_inf"}, {"plus_inf", "plus_inf"}};
  EXPECT_EQ(g6.limit_pairs, want_lp);
}

TEST(Powers, CompositeShiftAndThresholdArithmetic) {
  RaySystem f = load_golden("three_strand.json");
  RaySystem f2 = power(f, 2);
  auto find_rule = [&](const std::string& from, const std::string& to) {
    for (const RayRule& rule : f2.rules)
      if (rule.from == from && rule.to == to) return rule;
    throw std::runtime_error("rule not found");
  };
  EXPECT_EQ(find_rule("m1", "p1").shift, 0);
  EXPECT_EQ(find_rule("r0", "p1").shift, 1);
  EXPECT_EQ(find_rule("p1", "p1").shift, 2);

  RaySystem t = load_golden("two_sided_translation.json");
  RaySystem t2 = power(t, 2);
  for (const RayRule& rule : t2.rules)
    if (rule.from == "lp" && rule.to == "lp") {
      EXPECT_EQ(rule.shift, -2);
      EXPECT_EQ(rule.threshold, 2);  // needs two descents, so starts one higher
    }
}

TEST(Powers, TranslationSquareCarriesTheCrossingPairs) {
  RaySystem t2 = power(load_golden("two_sided_translation.json"), 2);
  // Each fiber crossing at the origin shows up twice in the square: entered
  // one step early or left one step late.
  ASSERT_EQ(t2.exceptional_pairs.size(), 4u);
  auto has = [&](const RayEndpoint& u, const RayEndpoint& v) {
    return std::find(t2.exceptional_pairs.begin(), t2.exceptional_pairs.end(),
                     std::make_pair(u, v)) != t2.exceptional_pairs.end();
  };
  EXPECT_TRUE(has(RayEndpoint::cell("lp", 1), RayEndpoint::cell("rp", 0)));
  EXPECT_TRUE(has(RayEndpoint::cell("lp", 0), RayEndpoint::cell("rp", 1)));
  EXPECT_TRUE(has(RayEndpoint::cell("lq", 1), RayEndpoint::cell("rq", 0)));
  EXPECT_TRUE(has(RayEndpoint::cell("lq", 0), RayEndpoint::cell("rq", 1)));
}

TEST(Symbolic, ThreeStrandOrbitConstraints) {
  SymbolicOrbit o = transitive_closure(load_golden("three_strand.json"));
  ASSERT_EQ(o.constraints.size(), 4u);
  RayConstraint c = o.constraints.at({"m1", "r0"});
  EXPECT_EQ(c.form, RayConstraint::Form::kEq);
  EXPECT_EQ(c.offset, 0);
  c = o.constraints.at({"m1", "p1"});
  EXPECT_EQ(c.form, RayConstraint::Form::kGe);
  EXPECT_EQ(c.offset, 0);
  c = o.constraints.at({"r0", "p1"});
  EXPECT_EQ(c.form, RayConstraint::Form::kGe);
  EXPECT_EQ(c.offset, 0);
  c = o.constraints.at({"p1", "p1"});
  EXPECT_EQ(c.form, RayConstraint::Form::kGe);
  EXPECT_EQ(c.offset, 1);
}

TEST(Symbolic, SixCycleOrbitIsAllEqualColumns) {
  SymbolicOrbit o = transitive_closure(load_golden("six_cycle.json"));
  EXPECT_EQ(o.constraints.size(), 9u);
  for (auto& [pair, c] : o.constraints) {
    EXPECT_EQ(c.form, RayConstraint::Form::kEq);
    EXPECT_EQ(c.offset, 0);
    EXPECT_EQ(c.threshold, 0);
  }
  std::vector<Pair> want_lp = {{"minus_inf", "minus_inf"},
                               {"minus_inf", "plus_inf"},
                               {"plus_inf", "minus_inf"},
                               {"plus_inf", "plus_inf"}};
  EXPECT_EQ(o.limit_pairs, want_lp);
}

TEST(Symbolic, IdentityRulesGiveIdentityConstraints) {
  RaySystem r;
  r.rays = {"a", "b"};
  r.rules = {{"a", "a", 0, 0}, {"b", "b", 0, 0}};
  SymbolicOrbit o = transitive_closure(r);
  ASSERT_EQ(o.constraints.size(), 2u);
  for (const std::string& ray : r.rays) {
    RayConstraint c = o.constraints.at({ray, ray});
    EXPECT_EQ(c.form, RayConstraint::Form::kEq);
    EXPECT_EQ(c.offset, 0);
  }
}

TEST(Symbolic, ExceptionalPairsAreOutsideTheSymbolicEngine) {
  EXPECT_THROW(transitive_closure(load_golden("two_sided_translation.json")),
               std::invalid_argument);
}

TEST(Symbolic, BareStrandOrbitIsClosedButTheLimitedOneIsNot) {
  RaySystem full = load_golden("three_strand.json");
  // Without limit points there is nothing for orbit tails to converge to,
  // so the orbit is closed as it stands.
  EXPECT_TRUE(is_closed(transitive_closure(strip_limits(full))));
  // With limit points declared but no limit pairs, every tail is missing
  // its accumulation pair.
  EXPECT_FALSE(is_closed(transitive_closure(full)));
  // The glued system carries all required pairs.
  EXPECT_TRUE(is_closed(transitive_closure(closure(full).sys)));
}

TEST(Symbolic, LimitPartClosesTransitively) {
  SymbolicOrbit o = transitive_closure(closure(load_golden("three_strand.json")).sys);
  std::vector<Pair> want = {{"z_0", "z_0"}, {"z_0", "z_pm"}, {"z_pm", "z_0"},
                            {"z_pm", "z_pm"}};
  EXPECT_EQ(o.limit_pairs, want);
}

TEST(Symbolic, NoSelfConstraintAdmitsRecurrence) {
  // The cyclic set of the untruncated strand system is empty: the only
  // self-constraint forces a strict index increase.
  SymbolicOrbit o = transitive_closure(strip_limits(load_golden("three_strand.json")));
  for (auto& [pair, c] : o.constraints) {
    if (pair.first != pair.second) continue;
    bool admits_diagonal = c.form == RayConstraint::Form::kEq ? c.offset == 0
                                                              : c.offset <= 0;
    EXPECT_FALSE(admits_diagonal) << pair.first;
  }
}

TEST(Consistency, TruncationsAgreeWithTheSymbolicOrbit) {
  for (const char* name : {"three_strand.json", "six_cycle.json"}) {
    RaySystem bare = strip_limits(load_golden(name));
    SymbolicOrbit o = transitive_closure(bare);
    for (int N : {10, 30, 50}) {
      CompactifiedSystem c = materialize(bare, N);
      RayLayout lay = make_layout(bare, N);
      EXPECT_EQ(orbit_relation(c.f), to_relation(o, lay)) << name << " N=" << N;
    }
  }
}

TEST(Consistency, InfinityBlockMatchesTheSymbolicLimitPairs) {
  for (const char* name : {"three_strand.json", "six_cycle.json"}) {
    RaySystem sys = closure(load_golden(name)).sys;
    SymbolicOrbit o = transitive_closure(sys);
    for (int N : {10, 30, 50}) {
      CompactifiedSystem c = materialize(sys, N);
      RayLayout lay = make_layout(sys, N);
      Relation orbit = orbit_relation(c.fhat);
      std::vector<std::string> classes = detail::limit_classes_of(sys);
      for (const std::string& g : classes)
        for (const std::string& h : classes) {
          bool want = std::find(o.limit_pairs.begin(), o.limit_pairs.end(),
                                Pair{g, h}) != o.limit_pairs.end();
          EXPECT_EQ(orbit.has(lay.limit_point(g), lay.limit_point(h)), want)
              << name << " " << g << "->" << h;
        }
    }
  }
}

TEST(Consistency, RandomAscendingSystemsStayInsideTheSymbolicBound) {
  std::mt19937 rng(211);
  for (int trial = 0; trial < 25; ++trial) {
    RaySystem r = random_ascending(rng);
    SymbolicOrbit o = transitive_closure(r);
    CompactifiedSystem c = materialize(r, 12);
    EXPECT_TRUE(orbit_relation(c.f).subset_of(to_relation(o, make_layout(r, 12))))
        << "trial " << trial;
  }
}

TEST(Materialize, TwoPointStrandModelIsDynamicWithOneClassAtInfinity) {
  RaySystem sys = closure(load_golden("three_strand.json")).sys;
  CompactifiedSystem c = materialize(sys, 10);
  ASSERT_EQ(c.ambient.size(), 35);
  RayLayout lay = make_layout(sys, 10);
  EXPECT_EQ(c.ambient.label(lay.cell("m1", 0)), "m1(0)");
  EXPECT_EQ(c.ambient.label(lay.limit_point("z_pm")), "z_pm");
  EXPECT_EQ(c.boundary_marks.members(), std::vector<PointId>{lay.cell("p1", 10)});

  EXPECT_TRUE(is_dynamic(c));
  std::vector<ClassifiedClass> cls = classify_classes(c);
  ASSERT_EQ(cls.size(), 1u);
  EXPECT_EQ(cls[0].kind, ClassCase::kI);
  std::vector<PointId> want = {lay.limit_point("z_pm"), lay.limit_point("z_0")};
  std::sort(want.begin(), want.end());
  EXPECT_EQ(cls[0].members.members(), want);
  // The strands themselves never recur.
  EXPECT_TRUE(cyclic_set(g_relation(c.f)).empty());
}

TEST(Materialize, KeepingTheDoubledLimitInsideGivesTheAnomalousClass) {
  RaySystem sys = closure(load_golden("three_strand.json")).sys;
  CompactifiedSystem c = materialize(sys, 10, {"z_pm"});
  RayLayout lay = make_layout(sys, 10, {"z_pm"});
  EXPECT_TRUE(c.interior_mask.contains(lay.limit_point("z_pm")));
  EXPECT_FALSE(c.interior_mask.contains(lay.limit_point("z_0")));

  EXPECT_TRUE(is_dynamic(c));
  EXPECT_FALSE(plus_proper_check(c));  // the kept fixed point still feeds z_0
  std::vector<ClassifiedClass> cls = classify_classes(c);
  ASSERT_EQ(cls.size(), 1u);
  EXPECT_EQ(cls[0].kind, ClassCase::kIV);
}

TEST(Materialize, KeepingTheMiddleLimitInsideBreaksTheAudits) {
  RaySystem sys = closure(load_golden("three_strand.json")).sys;
  CompactifiedSystem c = materialize(sys, 10, {"z_0"});
  RayLayout lay = make_layout(sys, 10, {"z_0"});
  // Upstairs every strand cell reaches z_0 through the points at infinity,
  // but inside the space nothing ever maps to z_0, so even the almost
  // dynamic audit fails: (x, z_0) lies over the space without being an
  // orbit pair or a diagonal pair downstairs.
  Relation ghat = g_relation(c.fhat);
  EXPECT_TRUE(ghat.has(lay.cell("m1", 0), lay.limit_point("z_0")));
  EXPECT_TRUE(c.f.inverse().image(lay.limit_point("z_0")).empty());
  EXPECT_FALSE(is_dynamic(c));
  EXPECT_FALSE(is_almost_dynamic(c));
  EXPECT_THROW(classify_classes(c), std::invalid_argument);
}

TEST(Materialize, ModelsOverTheSameSystemShareTheirEdgeCount) {
  RaySystem sys = closure(load_golden("three_strand.json")).sys;
  long long base = materialize(sys, 10).fhat.pair_count();
  EXPECT_EQ(materialize(sys, 10, {"z_pm"}).fhat.pair_count(), base);
  EXPECT_EQ(materialize(sys, 10, {"z_0"}).fhat.pair_count(), base);
}

TEST(Materialize, TranslationModelHasTwoFixedEnds) {
  RaySystem sys = closure(load_golden("two_sided_translation.json")).sys;
  CompactifiedSystem c = materialize(sys, 10);
  RayLayout lay = make_layout(sys, 10);
  int minus = lay.limit_point("minus_inf"), plus = lay.limit_point("plus_inf");
  EXPECT_TRUE(c.fhat.has(minus, minus));
  EXPECT_TRUE(c.fhat.has(plus, plus));
  EXPECT_FALSE(c.fhat.has(minus, plus));
  EXPECT_FALSE(c.fhat.has(plus, minus));
  std::vector<PointId> want_marks = {lay.cell("rp", 10), lay.cell("rq", 10)};
  std::sort(want_marks.begin(), want_marks.end());
  EXPECT_EQ(c.boundary_marks.members(), want_marks);

  EXPECT_TRUE(is_dynamic(c));
  std::vector<ClassifiedClass> cls = classify_classes(c);
  ASSERT_EQ(cls.size(), 2u);
  EXPECT_EQ(cls[0].kind, ClassCase::kI);
  EXPECT_EQ(cls[1].kind, ClassCase::kI);
}

TEST(Materialize, SymmetrizedTranslationGluesTheFibersUpstairs) {
  RaySystem sys = closure(load_golden("two_sided_translation.json")).sys;
  CompactifiedSystem c = materialize(sys, 10);
  RayLayout lay = make_layout(sys, 10);
  // Inverting the materialized relation turns the escape edge at the top of
  // each ascending ray into an entry edge from the shared end, which is how
  // the inverse map comes back into the window from beyond it.
  CompactifiedSystem sym{c.ambient, c.interior_mask, c.fhat | c.fhat.inverse(),
                         c.f | c.f.inverse(), c.boundary_marks};
  int plus = lay.limit_point("plus_inf");
  EXPECT_TRUE(sym.fhat.has(plus, lay.cell("rp", 10)));

  // Both fibers now reach the shared end and come back down the other one,
  // so orbit pairs upstairs mix the fibers while the window relation keeps
  // them apart: not a dynamic model of the symmetrized map.
  Relation ghat = g_relation(sym.fhat);
  EXPECT_TRUE(ghat.has(lay.cell("rp", 3), lay.cell("rq", 5)));
  EXPECT_FALSE(g_relation(sym.f).has(lay.cell("rp", 3), lay.cell("rq", 5)));
  EXPECT_FALSE(is_dynamic(sym));

  // With a single fiber the return leads back into the same chain, which the
  // window relation already connects.
  RaySystem one;
  one.rays = {"lp", "rp"};
  one.limit_class = {{"lp", "minus_inf"}, {"rp", "plus_inf"}};
  one.rules = {{"lp", "lp", -1, 1}, {"rp", "rp", 1, 0}};
  one.exceptional_pairs = {{RayEndpoint::cell("lp", 0), RayEndpoint::cell("rp", 0)}};
  CompactifiedSystem c1 = materialize(closure(one).sys, 10);
  CompactifiedSystem sym1{c1.ambient, c1.interior_mask, c1.fhat | c1.fhat.inverse(),
                          c1.f | c1.f.inverse(), c1.boundary_marks};
  EXPECT_TRUE(is_dynamic(sym1));
}

TEST(Materialize, BeyondWindowImagesWithoutALimitAreDroppedAndMarked) {
  RaySystem bare = strip_limits(load_golden("three_strand.json"));
  CompactifiedSystem c = materialize(bare, 5);
  RayLayout lay = make_layout(bare, 5);
  EXPECT_EQ(c.ambient.size(), lay.interior_count());
  EXPECT_TRUE(c.fhat.image(lay.cell("p1", 5)).empty());
  EXPECT_EQ(c.boundary_marks.members(), std::vector<PointId>{lay.cell("p1", 5)});
}

TEST(Materialize, SymbolicPowersSeeOverTheWindowEdge) {
  RaySystem r;
  r.rays = {"a", "b"};
  r.rules = {{"a", "b", 1, 0}, {"b", "a", -1, 1}};
  const int N = 6;
  CompactifiedSystem c2 = materialize(power(r, 2), N);
  RayLayout lay = make_layout(r, N);
  // The round trip through the other ray passes one cell beyond the window,
  // so squaring the truncated relation loses the top cell's return while the
  // squared system keeps it.
  EXPECT_TRUE(c2.fhat.has(lay.cell("a", N), lay.cell("a", N)));
  CompactifiedSystem c1 = materialize(r, N);
  EXPECT_FALSE(compose(c1.f, c1.f).has(lay.cell("a", N), lay.cell("a", N)));
}

TEST(Materialize, EmptySystemGivesAnEmptyModel) {
  CompactifiedSystem c = materialize(RaySystem{}, 5);
  EXPECT_EQ(c.ambient.size(), 0);
  EXPECT_TRUE(c.fhat.empty());
}

TEST(Materialize, LayoutLookupsRejectUnknownNames) {
  RaySystem sys = load_golden("three_strand.json");
  RayLayout lay = make_layout(sys, 4);
  EXPECT_THROW(lay.cell("m1", 5), std::out_of_range);
  EXPECT_THROW(lay.cell("nope", 0), std::out_of_range);
  EXPECT_THROW(lay.limit_point("nope"), std::out_of_range);
  EXPECT_THROW(make_layout(sys, 0), std::invalid_argument);
  EXPECT_THROW(make_layout(sys, 4, {"nope"}), std::invalid_argument);
}

TEST(Serialize, GoldenFilesRoundTrip) {
  for (const char* name :
       {"three_strand.json", "six_cycle.json", "two_sided_translation.json"}) {
    std::ifstream in(std::string(RECKIT_SOURCE_DIR) + "/goldens/" + name);
    nlohmann::json j = nlohmann::json::parse(in);
    RaySystem sys = ray_system_from_json(j);
    EXPECT_EQ(to_json(sys), j) << name;
    EXPECT_EQ(to_json(ray_system_from_json(to_json(sys))), to_json(sys)) << name;
  }
}

TEST(Serialize, ValidationRejectsMalformedSystems) {
  RaySystem r;
  r.rays = {"a", "a"};
  EXPECT_THROW(validate_ray_system(r), std::invalid_argument);
  r.rays = {"a"};
  r.rules = {{"a", "zzz", 0, 0}};
  EXPECT_THROW(validate_ray_system(r), std::invalid_argument);
  r.rules = {{"a", "a", 2, 0}};
  EXPECT_THROW(validate_ray_system(r), std::invalid_argument);
  r.rules = {{"a", "a", 1, -1}};
  EXPECT_THROW(validate_ray_system(r), std::invalid_argument);
  r.rules.clear();
  r.limit_pairs = {{"g", "g"}};
  EXPECT_THROW(validate_ray_system(r), std::invalid_argument);
  r.limit_pairs.clear();
  r.exceptional_pairs = {{RayEndpoint::cell("a", -1), RayEndpoint::cell("a", 0)}};
  EXPECT_THROW(validate_ray_system(r), std::invalid_argument);
}

}  // namespace
}  // namespace reckit
