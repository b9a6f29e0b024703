#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "reckit/relcore.hpp"
#include "reckit/scc.hpp"
#include "reckit/space.hpp"

namespace reckit {

struct Metric {
  enum class Norm { kEuclidean, kMax };
  std::vector<std::vector<double>> coords;
  Norm norm = Norm::kEuclidean;
  std::vector<double> eps;  // strictly decreasing, positive

  double distance(PointId a, PointId b) const {
    const auto& pa = coords.at(a);
    const auto& pb = coords.at(b);
    if (pa.size() != pb.size()) throw std::invalid_argument("Metric: dimension mismatch");
    double acc = 0.0;
    for (size_t i = 0; i < pa.size(); ++i) {
      double d = std::abs(pa[i] - pb[i]);
      acc = norm == Norm::kMax ? std::max(acc, d) : acc + d * d;
    }
    return norm == Norm::kMax ? acc : std::sqrt(acc);
  }
};

// Nested list of reflexive symmetric relations, largest first.
struct EntourageFamily {
  int n = 0;
  std::vector<Relation> entourages;
  std::optional<Metric> source;

  const Relation& smallest() const { return entourages.back(); }
};

inline EntourageFamily make_family(std::vector<Relation> vs) {
  if (vs.empty()) throw std::invalid_argument("make_family: empty family");
  for (size_t i = 0; i < vs.size(); ++i) {
    if (vs[i].size() != vs[0].size()) throw std::invalid_argument("make_family: size mismatch");
    if (!Relation::identity(vs[i].size()).subset_of(vs[i]))
      throw std::invalid_argument("make_family: entourage not reflexive");
    if (vs[i] != vs[i].inverse())
      throw std::invalid_argument("make_family: entourage not symmetric");
    if (i > 0 && !vs[i].subset_of(vs[i - 1]))
      throw std::invalid_argument("make_family: entourages not nested");
  }
  EntourageFamily fam;
  fam.n = vs[0].size();
  fam.entourages = std::move(vs);
  return fam;
}

inline EntourageFamily entourages_from_metric(const Metric& m) {
  if (m.eps.empty()) throw std::invalid_argument("entourages_from_metric: empty eps list");
  for (size_t i = 0; i + 1 < m.eps.size(); ++i)
    if (m.eps[i + 1] >= m.eps[i])
      throw std::invalid_argument("entourages_from_metric: eps not strictly decreasing");
  if (m.eps.back() <= 0.0) throw std::invalid_argument("entourages_from_metric: eps not positive");
  const int n = static_cast<int>(m.coords.size());
  std::vector<Relation> vs;
  for (double e : m.eps) {
    Relation v(n);
    for (int a = 0; a < n; ++a) {
      v.add(a, a);
      for (int b = a + 1; b < n; ++b)
        if (m.distance(a, b) <= e) v.add(a, b), v.add(b, a);
    }
    vs.push_back(std::move(v));
  }
  EntourageFamily fam = make_family(std::move(vs));
  fam.source = m;
  return fam;
}

// Intersection over the family of the orbit relations of V o f.  Transitive,
// contains the orbit relation, and shrinks as the family refines.
inline Relation chain_relation(const Relation& f, const EntourageFamily& fam) {
  if (f.size() != fam.n) throw std::invalid_argument("chain_relation: space mismatch");
  Relation acc = Relation::full(f.size());
  for (const Relation& v : fam.entourages) acc = acc & orbit_relation(compose(v, f));
  return acc;
}

inline std::vector<PointSet> chain_components(const Relation& f, const EntourageFamily& fam) {
  Relation c = chain_relation(f, fam);
  PointSet cyc = cyclic_set(c);
  std::vector<PointSet> classes;
  PointSet seen(f.size());
  for (PointId p : cyc.members()) {
    if (seen.contains(p)) continue;
    PointSet cls(f.size());
    for (PointId q : cyc.members())
      if (c.has(p, q) && c.has(q, p)) cls.add(q), seen.add(q);
    classes.push_back(cls);
  }
  return classes;
}

inline bool is_chain_transitive(const Relation& f, const EntourageFamily& fam) {
  return chain_relation(f, fam) == Relation::full(f.size());
}

// Real-valued candidate for the two-valued edge condition below; produced by
// establish_inclusion, whose endpoint values 0 and 1 are exact.
struct LyapunovCandidate {
  std::vector<double> values;

  int size() const { return static_cast<int>(values.size()); }
};

// Every edge must exit at 0 or land at 1.
inline bool elementary_lyapunov_check(const LyapunovCandidate& L, const Relation& f) {
  if (L.size() != f.size())
    throw std::invalid_argument("elementary_lyapunov_check: size mismatch");
  for (double v : L.values)
    if (!(v >= 0.0 && v <= 1.0))
      throw std::invalid_argument("elementary_lyapunov_check: value outside [0,1]");
  for (auto& [x, y] : f.pairs())
    if (L.values[x] != 0.0 && L.values[y] != 1.0) return false;
  return true;
}

// L(x) = d(x, outside B) / (d(x,A) + d(x, outside B)), with distance to the
// empty set infinite.  Requires the smallest entourage ball around A to stay
// inside B.
inline LyapunovCandidate establish_inclusion(const PointSet& A, const PointSet& B,
                                             const Metric& m) {
  EntourageFamily fam = entourages_from_metric(m);
  const int n = fam.n;
  if (A.universe_size() != n || B.universe_size() != n)
    throw std::invalid_argument("establish_inclusion: size mismatch");
  PointSet ball = fam.smallest().image(A);
  if (!ball.subset_of(B)) {
    PointSet out = ball - B;
    throw std::invalid_argument("establish_inclusion: A not uniformly inside B, point " +
                                std::to_string(out.members().front()) + " escapes");
  }

  const double inf = std::numeric_limits<double>::infinity();
  auto dist_to = [&](PointId x, const PointSet& S) {
    double best = inf;
    for (PointId s : S.members()) best = std::min(best, m.distance(x, s));
    return best;
  };
  PointSet outside = B.complement();
  LyapunovCandidate L;
  L.values.resize(n);
  for (int x = 0; x < n; ++x) {
    double d_out = dist_to(x, outside);
    double d_a = dist_to(x, A);
    if (d_out == inf)
      L.values[x] = 1.0;
    else if (d_a == inf)
      L.values[x] = 0.0;
    else
      L.values[x] = d_out / (d_a + d_out);
  }
  return L;
}

struct InwardHull {
  PointSet u;
  bool certified = false;  // f(U) inside the V-interior of U
};

// U = A together with everything reachable through V o f o V; certified when
// every image point still has its whole V-ball inside U.
inline InwardHull inward_hull(const Relation& f, const PointSet& A, const Relation& v) {
  Relation blurred = compose(v, compose(f, v));
  InwardHull out{A | orbit_relation(blurred).image(A), false};
  PointSet img = f.image(out.u);
  out.certified = true;
  for (PointId p : img.members())
    if (!v.image(p).subset_of(out.u)) {
      out.certified = false;
      break;
    }
  return out;
}

// Decreasing intersection of the forward images of an inward set.
inline PointSet attractor(const Relation& f, const PointSet& U, const EntourageFamily& fam) {
  if (!fam.smallest().image(f.image(U)).subset_of(U))
    throw std::invalid_argument("attractor: U is not inward under the smallest entourage");
  PointSet cur = U;
  for (long long iter = 0;; ++iter) {
    detail::cap_check(iter, f.size(), "attractor");
    PointSet next = f.image(cur);
    if (next == cur) return cur;
    cur = next;
  }
}

// One indicator per chain class whose forward set misses part of the space,
// plus one three-valued function per non-chain-recurrent point.  Their common
// nondecreasing-pair set is exactly 1 u Cf, and the points where every member
// is two-valued are exactly the chain recurrent ones.
inline std::vector<LyapunovCandidate> elementary_sufficient_set(const Relation& f,
                                                                const EntourageFamily& fam) {
  const int n = f.size();
  Relation c = chain_relation(f, fam);
  PointSet cyc = cyclic_set(c);

  std::vector<LyapunovCandidate> out;
  for (const PointSet& cls : chain_components(f, fam)) {
    PointSet up = cls | c.image(cls);
    if (up == PointSet::all(n)) continue;
    LyapunovCandidate L;
    L.values.assign(n, 0.0);
    for (PointId p : up.members()) L.values[p] = 1.0;
    out.push_back(std::move(L));
  }
  for (int x = 0; x < n; ++x) {
    if (cyc.contains(x)) continue;
    LyapunovCandidate L;
    L.values.assign(n, 0.0);
    L.values[x] = 0.5;
    for (PointId p : c.image(x).members()) L.values[p] = 1.0;
    out.push_back(std::move(L));
  }
  return out;
}

inline Relation leq_relation(const LyapunovCandidate& L) {
  Relation r(L.size());
  for (int x = 0; x < L.size(); ++x)
    for (int y = 0; y < L.size(); ++y)
      if (L.values[x] <= L.values[y]) r.add(x, y);
  return r;
}

inline Relation leq_intersection(const std::vector<LyapunovCandidate>& fns, int n) {
  Relation acc = Relation::full(n);
  for (const LyapunovCandidate& L : fns) acc = acc & leq_relation(L);
  return acc;
}

inline nlohmann::json to_json(const EntourageFamily& fam) {
  if (fam.source) {
    const Metric& m = *fam.source;
    return {{"metric",
             {{"coords", m.coords},
              {"eps", m.eps},
              {"norm", m.norm == Metric::Norm::kMax ? "max" : "euclidean"}}}};
  }
  nlohmann::json arr = nlohmann::json::array();
  for (const Relation& v : fam.entourages) {
    nlohmann::json edges = nlohmann::json::array();
    for (auto& [u, w] : v.pairs()) edges.push_back({u, w});
    arr.push_back(edges);
  }
  return {{"entourages", arr}};
}

}  // namespace reckit
