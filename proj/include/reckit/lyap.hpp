#pragma once

#include <boost/rational.hpp>
#include <algorithm>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "reckit/relcore.hpp"
#include "reckit/scc.hpp"
#include "reckit/space.hpp"

namespace reckit {

using Rat = boost::rational<long long>;

// Rational-valued function on a finite space, nondecreasing along some
// subject relation.  Values stay in [0,1]; no floats anywhere in this module.
struct LyapunovFn {
  std::vector<Rat> values;

  int size() const { return static_cast<int>(values.size()); }
  const Rat& operator()(PointId p) const { return values.at(p); }
};

struct SufficientSet {
  std::vector<LyapunovFn> fns;
};

struct SplittingResult {
  PointSet u;
  LyapunovFn fn;
};

inline bool is_lyapunov(const LyapunovFn& L, const Relation& f) {
  if (L.size() != f.size()) throw std::invalid_argument("is_lyapunov: size mismatch");
  for (const Rat& v : L.values)
    if (v < Rat(0) || v > Rat(1))
      throw std::invalid_argument("is_lyapunov: value outside [0,1]");
  for (int x = 0; x < f.size(); ++x)
    for (PointId y : f.image(x).members())
      if (L.values[x] > L.values[y]) return false;
  return true;
}

// Pairs (x,y) with L(x) <= L(y).  Reflexive and transitive by construction.
inline Relation leq_relation(const LyapunovFn& L) {
  Relation r(L.size());
  for (int x = 0; x < L.size(); ++x)
    for (int y = 0; y < L.size(); ++y)
      if (L.values[x] <= L.values[y]) r.add(x, y);
  return r;
}

inline Relation leq_intersection(const SufficientSet& ss, int n) {
  Relation acc = Relation::full(n);
  for (const LyapunovFn& L : ss.fns) {
    if (L.size() != n) throw std::invalid_argument("leq_intersection: size mismatch");
    acc = acc & leq_relation(L);
  }
  return acc;
}

// L = 1 on A, 0 on B, nondecreasing along F.  Needs F(A) <= A, F^-1(B) <= B,
// A and B disjoint.  Components of 1 u F between the two sides are leveled by
// longest-distance-from-the-zero-side rank, normalized to k/(m+1).
inline LyapunovFn separate(const Relation& F, const PointSet& A, const PointSet& B) {
  const int n = F.size();
  if (A.universe_size() != n || B.universe_size() != n)
    throw std::invalid_argument("separate: size mismatch");
  for (PointId x : A.members())
    for (PointId y : F.image(x).members())
      if (!A.contains(y))
        throw std::invalid_argument("separate: A not forward invariant, edge (" +
                                    std::to_string(x) + "," + std::to_string(y) + ")");
  for (PointId y : B.members())
    for (PointId x : F.preimage(make_set(n, {y})).members())
      if (!B.contains(x))
        throw std::invalid_argument("separate: B not backward invariant, edge (" +
                                    std::to_string(x) + "," + std::to_string(y) + ")");
  if (A.intersects(B)) {
    PointSet both = A & B;
    throw std::invalid_argument("separate: A meets B at point " +
                                std::to_string(both.members().front()));
  }

  Condensation cond = condense(Relation::identity(n) | F);
  enum Side { kInterior, kZero, kOne };
  std::vector<Side> side(cond.ncomp, kInterior);

  std::vector<std::vector<int>> pred(cond.ncomp);
  for (int c = 0; c < cond.ncomp; ++c)
    for (int s : cond.succ[c]) pred[s].push_back(c);

  std::vector<int> work;
  for (PointId p : A.members())
    if (side[cond.comp[p]] != kOne) side[cond.comp[p]] = kOne, work.push_back(cond.comp[p]);
  while (!work.empty()) {
    int c = work.back();
    work.pop_back();
    for (int s : cond.succ[c])
      if (side[s] != kOne) side[s] = kOne, work.push_back(s);
  }
  for (PointId p : B.members())
    if (side[cond.comp[p]] != kZero) {
      if (side[cond.comp[p]] == kOne) throw std::logic_error("separate: sides overlap");
      side[cond.comp[p]] = kZero, work.push_back(cond.comp[p]);
    }
  while (!work.empty()) {
    int c = work.back();
    work.pop_back();
    for (int q : pred[c]) {
      if (side[q] == kOne) throw std::logic_error("separate: sides overlap");
      if (side[q] != kZero) side[q] = kZero, work.push_back(q);
    }
  }

  // Longest-path rank from the zero side; predecessors on the one side
  // cannot occur (such a component would itself sit on the one side).
  std::vector<int> rank(cond.ncomp, 0);
  std::vector<int> distinct;
  for (int c : cond.topo_order()) {
    if (side[c] != kInterior) continue;
    int r = 1;
    for (int q : pred[c])
      if (side[q] == kInterior) r = std::max(r, rank[q] + 1);
    rank[c] = r;
    distinct.push_back(r);
  }
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  const long long m = static_cast<long long>(distinct.size());

  LyapunovFn L;
  L.values.assign(n, Rat(0));
  for (int p = 0; p < n; ++p) {
    int c = cond.comp[p];
    if (side[c] == kOne) {
      L.values[p] = Rat(1);
    } else if (side[c] == kInterior) {
      long long k = 1 + (std::lower_bound(distinct.begin(), distinct.end(), rank[c]) -
                         distinct.begin());
      L.values[p] = Rat(k, m + 1);
    }
  }
  return L;
}

inline LyapunovFn separate_points(const Relation& F, PointId x, PointId y) {
  if (x == y || F.has(x, y))
    throw std::invalid_argument("separate_points: y already follows x");
  PointSet A = make_set(F.size(), {x}) | F.image(x);
  PointSet B = make_set(F.size(), {y}) | F.preimage(make_set(F.size(), {y}));
  return separate(F, A, B);
}

// One indicator-style separator per ordered pair of recurrence classes with
// no orbit path between them.  The common nondecreasing-pair set of the
// result is exactly 1 u Gf, which the constructor re-checks.
inline SufficientSet sufficient_set(const Relation& f) {
  const int n = f.size();
  Relation g = g_relation(f);
  Condensation cond = condense(g);

  SufficientSet ss;
  for (int c = 0; c < cond.ncomp; ++c) {
    for (int d = 0; d < cond.ncomp; ++d) {
      if (c == d) continue;
      PointId pc = cond.members[c].front();
      PointId pd = cond.members[d].front();
      if (g.has(pc, pd)) continue;
      PointSet up(n), down(n);
      for (PointId p : cond.members[c]) up.add(p);
      up = up | g.image(up);
      for (PointId p : cond.members[d]) down.add(p);
      down = down | g.preimage(down);
      ss.fns.push_back(separate(g, up, down));
    }
  }

  if (leq_intersection(ss, n) != (Relation::identity(n) | g))
    throw std::logic_error("sufficient_set: cut does not match 1 u Gf");
  return ss;
}

// For a non-cyclic point x, a function with value 1 on everything after x
// and 0 on everything before it, so the backward sup sits strictly under the
// forward inf.  Empty sides use sup = 0 and inf = 1.
inline SplittingResult splitting_function(const Relation& f, PointId x) {
  Relation g = g_relation(f);
  if (g.has(x, x)) throw std::invalid_argument("splitting_function: point is cyclic");
  PointSet fwd = g.image(x);
  PointSet bwd = g.preimage(make_set(f.size(), {x}));
  SplittingResult out{make_set(f.size(), {x}), LyapunovFn{}};
  if (fwd.empty()) {
    out.fn.values.assign(f.size(), Rat(0));
  } else {
    out.fn = separate(g, fwd, bwd);
  }
  return out;
}

// Distinct class values in topological order, so related distinct classes
// compare strictly.
inline LyapunovFn complete_lyapunov(const Relation& F) {
  Condensation cond = condense(F);
  const long long m = cond.ncomp;
  LyapunovFn L;
  L.values.assign(F.size(), Rat(0));
  long long k = 0;
  for (int c : cond.topo_order()) {
    ++k;
    for (PointId p : cond.members[c]) L.values[p] = Rat(k, m + 1);
  }
  return L;
}

// L = 1 on A, 0 outside U.  The forward set of A must stay inside U; the
// zero side is everything leaving U in one step or already outside.
inline LyapunovFn compact_support_lyapunov(const Relation& F, const PointSet& A,
                                           const PointSet& U) {
  if (!A.subset_of(U)) throw std::invalid_argument("compact_support_lyapunov: A not inside U");
  PointSet fwd = A | F.image(A);
  if (!fwd.subset_of(U)) {
    PointSet escaped = fwd - U;
    throw std::invalid_argument("compact_support_lyapunov: forward set escapes U at point " +
                                std::to_string(escaped.members().front()));
  }
  PointSet outside = U.complement();
  PointSet B = outside | F.preimage(outside);
  return separate(F, fwd, B);
}

// Points kept at or above the infimum of every function in the set, after
// adding one separator that walls off the forward set of A.  Equals the
// invariant hull of A under the orbit relation.
inline PointSet hull_via_lyapunov(const Relation& f, const PointSet& A,
                                  const SufficientSet& LS) {
  const int n = f.size();
  Relation g = g_relation(f);
  PointSet hull = A | g.image(A);
  std::vector<LyapunovFn> fns = LS.fns;
  fns.push_back(separate(g, hull, hull.complement()));

  PointSet out = PointSet::all(n);
  for (const LyapunovFn& L : fns) {
    Rat inf_a(1);
    for (PointId a : A.members()) inf_a = std::min(inf_a, L.values[a]);
    for (int p = 0; p < n; ++p)
      if (L.values[p] < inf_a) out.remove(p);
  }
  return out;
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline std::string to_csv_text(const LyapunovFn& L, const FiniteSpace& space) {
  std::ostringstream os;
  os << "point,label,num,den\n";
  for (int p = 0; p < L.size(); ++p)
    os << p << ',' << csv_field(space.label(p)) << ',' << L.values[p].numerator() << ','
       << L.values[p].denominator() << '\n';
  return os.str();
}

inline nlohmann::json to_json(const LyapunovFn& L) {
  nlohmann::json vals = nlohmann::json::array();
  for (const Rat& v : L.values)
    vals.push_back({{"num", v.numerator()}, {"den", v.denominator()}});
  return {{"values", vals}};
}

inline nlohmann::json to_json(const SufficientSet& ss) {
  nlohmann::json arr = nlohmann::json::array();
  for (const LyapunovFn& L : ss.fns) arr.push_back(to_json(L));
  return arr;
}

}  // namespace reckit
