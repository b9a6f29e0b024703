#include <gtest/gtest.h>

#include <map>
#include <random>

#include "reckit/relcore.hpp"
#include "reckit/serialize.hpp"

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

// Triple-loop composition oracle.
Relation compose_oracle(const Relation& g, const Relation& f) {
  Relation r(f.size());
  for (int x = 0; x < f.size(); ++x)
    for (int y = 0; y < f.size(); ++y)
      if (f.has(x, y))
        for (int z = 0; z < f.size(); ++z)
          if (g.has(y, z)) r.add(x, z);
  return r;
}

// Union of iterates to fixpoint, without the condensation shortcut.
Relation orbit_oracle(const Relation& f) {
  Relation acc = f, power = f;
  while (true) {
    power = compose_oracle(power, f);
    Relation next = acc | power;
    if (next == acc) return acc;
    acc = next;
  }
}

// Pairs occurring in infinitely many powers: detect the cycle of the
// eventually periodic power sequence and union the powers inside it.
Relation omega_oracle(const Relation& f) {
  std::map<std::string, int> seen;
  std::vector<Relation> powers;
  Relation p = f;
  while (true) {
    std::string key = to_edge_text(p);
    auto it = seen.find(key);
    if (it != seen.end()) {
      Relation acc(f.size());
      for (size_t i = it->second; i < powers.size(); ++i) acc = acc | powers[i];
      return acc;
    }
    seen.emplace(key, static_cast<int>(powers.size()));
    powers.push_back(p);
    p = compose_oracle(p, f);
  }
}

TEST(Compose, IdentityIsNeutral) {
  std::mt19937 rng(7);
  Relation f = random_relation(rng, 9, 0.25);
  Relation id = Relation::identity(9);
  EXPECT_EQ(compose(id, f), f);
  EXPECT_EQ(compose(f, id), f);
}

TEST(Compose, MatchesBruteForceAndIsAssociative) {
  std::mt19937 rng(11);
  for (int trial = 0; trial < 40; ++trial) {
    Relation f = random_relation(rng, 8, 0.3);
    Relation g = random_relation(rng, 8, 0.3);
    Relation h = random_relation(rng, 8, 0.3);
    EXPECT_EQ(compose(g, f), compose_oracle(g, f));
    EXPECT_EQ(compose(h, compose(g, f)), compose(compose(h, g), f));
    EXPECT_EQ(compose(g, f).inverse(), compose(f.inverse(), g.inverse()));
  }
}

TEST(Inverse, MirrorsPairsAndInvolutes) {
  std::mt19937 rng(13);
  Relation f = random_relation(rng, 10, 0.2);
  Relation inv = f.inverse();
  for (auto& [u, v] : f.pairs()) EXPECT_TRUE(inv.has(v, u));
  EXPECT_EQ(static_cast<long long>(f.pairs().size()), inv.pair_count());
  EXPECT_EQ(inv.inverse(), f);
  EXPECT_EQ(Relation::identity(10).inverse(), Relation::identity(10));
}

TEST(OrbitRelation, CycleSaturatesAndChainFillsIn) {
  Relation cyc(3);
  cyc.add(0, 1), cyc.add(1, 2), cyc.add(2, 0);
  EXPECT_EQ(orbit_relation(cyc), Relation::full(3));

  Relation chain(3);
  chain.add(0, 1), chain.add(1, 2);
  Relation expect(3);
  expect.add(0, 1), expect.add(1, 2), expect.add(0, 2);
  EXPECT_EQ(orbit_relation(chain), expect);
}

TEST(OrbitRelation, MatchesIterationOracle) {
  std::mt19937 rng(17);
  for (int trial = 0; trial < 60; ++trial) {
    Relation f = random_relation(rng, 10, trial % 3 == 0 ? 0.08 : 0.2);
    Relation o = orbit_relation(f);
    EXPECT_EQ(o, orbit_oracle(f));
    EXPECT_TRUE(f.subset_of(o));
    EXPECT_TRUE(compose(o, o).subset_of(o));
  }
}

TEST(OrbitRelation, MinimalityOnSmallInstances) {
  std::mt19937 rng(19);
  for (int trial = 0; trial < 10; ++trial) {
    Relation f = random_relation(rng, 6, 0.2);
    Relation o = orbit_relation(f);
    for (auto& [u, v] : o.pairs()) {
      Relation cut = o;
      cut.remove(u, v);
      bool contains_f = f.subset_of(cut);
      bool transitive = compose(cut, cut).subset_of(cut);
      EXPECT_FALSE(contains_f && transitive)
          << "pair (" << u << "," << v << ") is removable";
    }
  }
}

TEST(GRelation, EqualsOrbitOnPlainSpaces) {
  std::mt19937 rng(23);
  for (int trial = 0; trial < 50; ++trial) {
    Relation f = random_relation(rng, 9, 0.2);
    EXPECT_EQ(g_relation(f), orbit_relation(f));
  }
  EXPECT_EQ(g_relation(Relation::identity(5)), Relation::identity(5));
}

TEST(CyclicSet, FixedPointsAndPeriodicPoints) {
  EXPECT_EQ(cyclic_set(Relation::identity(4)), PointSet::all(4));
  Relation cyc(3);
  cyc.add(0, 1), cyc.add(1, 2), cyc.add(2, 0);
  EXPECT_TRUE(cyclic_set(cyc).empty());
  EXPECT_EQ(cyclic_set(orbit_relation(cyc)), PointSet::all(3));
  // The cyclic set of f n f^-1 equals the cyclic set of f.
  std::mt19937 rng(29);
  for (int trial = 0; trial < 20; ++trial) {
    Relation f = random_relation(rng, 8, 0.25);
    EXPECT_EQ(cyclic_set(f), cyclic_set(f & f.inverse()));
  }
}

TEST(Restriction, FullSetIsIdentityAndFilterMatches) {
  std::mt19937 rng(31);
  Relation f = random_relation(rng, 9, 0.3);
  EXPECT_EQ(restriction(f, PointSet::all(9)), f);

  PointSet d = make_set(9, {1, 3, 4, 8});
  Relation r = restriction(f, d);
  std::vector<PointId> mem = d.members();
  for (size_t i = 0; i < mem.size(); ++i)
    for (size_t j = 0; j < mem.size(); ++j)
      EXPECT_EQ(r.has(static_cast<int>(i), static_cast<int>(j)), f.has(mem[i], mem[j]));
}

TEST(Unrevisited, HullIsIdempotentAndCharacterizesMembership) {
  Relation chain(3);
  chain.add(0, 1), chain.add(1, 2);
  Relation f = Relation::identity(3) | orbit_relation(chain);
  PointSet a = make_set(3, {0, 2});
  PointSet hull = unrevisited_hull(f, a);
  EXPECT_EQ(hull, PointSet::all(3));  // the middle point joins the hull

  EXPECT_EQ(unrevisited_hull(Relation::identity(4), make_set(4, {1, 2})), make_set(4, {1, 2}));

  std::mt19937 rng(37);
  for (int trial = 0; trial < 30; ++trial) {
    Relation g = Relation::identity(7) | orbit_relation(random_relation(rng, 7, 0.15));
    PointSet seed(7);
    std::uniform_int_distribution<int> pick(0, 6);
    seed.add(pick(rng)), seed.add(pick(rng));
    PointSet h = unrevisited_hull(g, seed);
    EXPECT_TRUE(seed.subset_of(h));
    EXPECT_EQ(unrevisited_hull(g, h), h);
    EXPECT_TRUE(is_unrevisited(g, h));
    EXPECT_EQ(is_unrevisited(g, seed), h == seed);
  }
}

TEST(Unrevisited, HullRejectsNonReflexiveOrNonTransitive) {
  Relation f(3);
  f.add(0, 1);
  EXPECT_THROW(unrevisited_hull(f, make_set(3, {0})), std::invalid_argument);
  Relation g = Relation::identity(3);
  g.add(0, 1), g.add(1, 2);  // not transitive: (0,2) missing
  EXPECT_THROW(unrevisited_hull(g, make_set(3, {0})), std::invalid_argument);
}

TEST(InvariantHull, LeastFixpointAgainstWorklistOracle) {
  EXPECT_EQ(invariant_hull(Relation::identity(5), make_set(5, {2})), make_set(5, {2}));

  std::mt19937 rng(41);
  for (int trial = 0; trial < 40; ++trial) {
    Relation f = random_relation(rng, 10, 0.15);
    PointSet a(10);
    std::uniform_int_distribution<int> pick(0, 9);
    a.add(pick(rng));
    PointSet h = invariant_hull(f, a);
    // Worklist saturation oracle.
    std::vector<bool> in(10, false);
    std::vector<int> work;
    for (PointId p : a.members()) in[p] = true, work.push_back(p);
    while (!work.empty()) {
      int x = work.back();
      work.pop_back();
      for (int y = 0; y < 10; ++y)
        if (f.has(x, y) && !in[y]) in[y] = true, work.push_back(y);
    }
    for (int p = 0; p < 10; ++p) EXPECT_EQ(h.contains(p), in[p]);
    // Hull decomposition: [[A]] = A u [[f(A)]].
    EXPECT_EQ(h, a | invariant_hull(f, f.image(a)));
  }
}

TEST(OmegaLimit, SinkAbsorbsAndMatchesRelationRows) {
  Relation f(2);
  f.add(0, 0), f.add(1, 0);  // b -> a -> a
  EXPECT_EQ(omega_limit(f, 1), make_set(2, {0}));

  std::mt19937 rng(43);
  for (int trial = 0; trial < 30; ++trial) {
    Relation g = random_relation(rng, 8, 0.2);
    Relation om = omega_relation(g);
    for (int x = 0; x < 8; ++x) EXPECT_EQ(omega_limit(g, x), om.image(x));
  }
}

TEST(OmegaRelation, CycleIsFullAndOracleAgrees) {
  Relation cyc(3);
  cyc.add(0, 1), cyc.add(1, 2), cyc.add(2, 0);
  EXPECT_EQ(omega_relation(cyc), Relation::full(3));

  std::mt19937 rng(47);
  for (int trial = 0; trial < 50; ++trial) {
    Relation f = random_relation(rng, 7, 0.2);
    EXPECT_EQ(omega_relation(f), omega_oracle(f));
    // The orbit relation absorbs its own limsup.
    EXPECT_EQ(orbit_relation(f), orbit_relation(f) | omega_relation(f));
  }
}

TEST(OmegaG, ChainShrinksToEmptyAndIdentityIsFixed) {
  Relation chain(3);
  chain.add(0, 1), chain.add(1, 2);
  EXPECT_TRUE(omega_g(chain).empty());
  EXPECT_EQ(omega_g(Relation::identity(4)), Relation::identity(4));
}

// Core identities, exact on every random instance.
TEST(Identities, GRecursionOmegaAndInverse) {
  std::mt19937 rng(53);
  for (int trial = 0; trial < 200; ++trial) {
    int n = 3 + trial % 13;
    Relation f = random_relation(rng, n, 0.08 + 0.02 * (trial % 9));
    Relation g = g_relation(f);

    EXPECT_EQ(g, f | compose(g, f));                    // Gf = f u Gf o f
    EXPECT_EQ(g_relation(f.inverse()), g.inverse());    // G(f^-1) = (Gf)^-1
    EXPECT_EQ(g, orbit_relation(f) | omega_relation(g));  // Gf = Of u (Omega o Gf)
    EXPECT_EQ(cyclic_set(g), cyclic_set(omega_relation(g)));

    // G(Omega f) = Omega(G f) = intersection of the powers of Gf.
    Relation lhs = g_relation(omega_relation(f));
    Relation mid = omega_relation(g);
    EXPECT_EQ(lhs, mid);
    EXPECT_EQ(mid, omega_g(f));
  }
}

TEST(Identities, RecurrenceClassesPartitionTheCyclicSet) {
  std::mt19937 rng(59);
  for (int trial = 0; trial < 30; ++trial) {
    Relation f = random_relation(rng, 9, 0.18);
    Relation g = g_relation(f);
    Relation eq = Relation::identity(9) | (g & g.inverse());
    EXPECT_TRUE(compose(eq, eq).subset_of(eq));
    EXPECT_EQ(eq, eq.inverse());
    // Classes of the cyclic set: mutual either way, never half related.
    PointSet cyc = cyclic_set(g);
    for (PointId x : cyc.members())
      for (PointId y : cyc.members())
        EXPECT_EQ(eq.has(x, y), eq.has(y, x));
  }
}

TEST(Serialize, EdgeTextAndJsonRoundTripBitExact) {
  std::mt19937 rng(61);
  for (int trial = 0; trial < 20; ++trial) {
    Relation f = random_relation(rng, 11, 0.2);
    EXPECT_EQ(from_edge_text(11, to_edge_text(f)), f);
    std::string j = to_json_text(f);
    EXPECT_EQ(from_json_text(j), f);
    EXPECT_EQ(to_json_text(from_json_text(j)), j);
  }
  EXPECT_EQ(to_json_text(Relation(2)), "{\"n\":2,\"pairs\":[]}");
}

TEST(Errors, SpaceMismatchAndRangeChecks) {
  Relation a(3), b(4);
  EXPECT_THROW(compose(a, b), std::invalid_argument);
  EXPECT_THROW(a.add(0, 3), std::out_of_range);
  EXPECT_THROW(a.image(make_set(4, {0})), std::invalid_argument);
}

}  // namespace
}  // namespace reckit
