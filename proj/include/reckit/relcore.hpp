#pragma once

#include <stdexcept>
#include <string>

#include "reckit/relation.hpp"
#include "reckit/scc.hpp"

namespace reckit {

namespace detail {
// Iterations are capped at n^2; every limit computed here stabilizes well
// before that, so hitting the cap means a bug, not a big input.
inline void cap_check(long long iter, int n, const char* what) {
  long long cap = 1 + static_cast<long long>(n) * n;
  if (iter > cap) throw std::logic_error(std::string("iteration cap hit in ") + what);
}
}  // namespace detail

// Union of all positive iterates: the transitive closure of f, and the
// smallest transitive relation containing f.
inline Relation orbit_relation(const Relation& f) { return transitive_closure(f); }

// Smallest closed transitive relation containing f. A finite discrete space
// makes topological closure the identity, so this coincides with the orbit
// relation; it stays a distinct entry point because compactified and ray
// models supply their own closure semantics.
inline Relation g_relation(const Relation& f) { return orbit_relation(f); }

// Points x with (x,x) in f.
inline PointSet cyclic_set(const Relation& f) {
  PointSet s(f.size());
  for (int i = 0; i < f.size(); ++i)
    if (f.has(i, i)) s.add(i);
  return s;
}

// A set C is unrevisited when no orbit leaves it and later returns:
// OF(C) n OF^-1(C) subset of C.
inline bool is_unrevisited(const Relation& f, const PointSet& c) {
  Relation o = orbit_relation(f);
  return (o.image(c) & o.inverse().image(c)).subset_of(c);
}

// Smallest unrevisited superset of A for a reflexive transitive F:
// F(A) n F^-1(A).
inline PointSet unrevisited_hull(const Relation& f, const PointSet& a) {
  if (!Relation::identity(f.size()).subset_of(f))
    throw std::invalid_argument("unrevisited_hull requires a reflexive relation");
  if (!compose(f, f).subset_of(f))
    throw std::invalid_argument("unrevisited_hull requires a transitive relation");
  return f.image(a) & f.inverse().image(a);
}

// Smallest +invariant set containing A: least fixpoint of S -> A u f(S).
inline PointSet invariant_hull(const Relation& f, const PointSet& a) {
  if (f.size() != a.universe_size()) throw std::invalid_argument("set over a different space");
  PointSet s = a;
  long long iter = 0;
  while (true) {
    detail::cap_check(++iter, f.size(), "invariant_hull");
    PointSet next = s | f.image(s);
    if (next == s) return s;
    s = next;
  }
}

// limsup of the point orbit: the set of points hit by arbitrarily late
// iterates. Tail sets T_k = union over i >= k of f^i(x) are nonincreasing and
// satisfy T_{k+1} = f(T_k), so iterate image until the tail stabilizes.
inline PointSet omega_limit(const Relation& f, PointId x) {
  PointSet start(f.size());
  start.add(x);
  PointSet tail = orbit_relation(f).image(start);
  long long iter = 0;
  while (true) {
    detail::cap_check(++iter, f.size(), "omega_limit");
    PointSet next = f.image(tail);
    if (next == tail) return tail;
    tail = next;
  }
}

// limsup of the iterates as a relation: intersection of the nonincreasing
// tails T_k = union over i >= k of f^i, with T_{k+1} = T_k o f.
inline Relation omega_relation(const Relation& f) {
  Relation tail = orbit_relation(f);
  long long iter = 0;
  while (true) {
    detail::cap_check(++iter, f.size(), "omega_relation");
    Relation next = compose(tail, f);
    if (next == tail) return tail;
    tail = next;
  }
}

// Intersection of the powers of Gf. Transitivity makes the powers
// nonincreasing, so the limit is the first repeated power.
inline Relation omega_g(const Relation& f) {
  Relation g = g_relation(f);
  Relation p = g;
  long long iter = 0;
  while (true) {
    detail::cap_check(++iter, f.size(), "omega_g");
    Relation next = compose(p, g);
    if (next == p) return p;
    p = next;
  }
}

}  // namespace reckit
