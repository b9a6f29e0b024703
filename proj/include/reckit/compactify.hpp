#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "reckit/lyap.hpp"
#include "reckit/relcore.hpp"
#include "reckit/uniform.hpp"

namespace reckit {

// Windowed view of a system on an unbounded space: the relation restricted to
// the window plus declared escape data.  What truly happens outside cannot be
// recovered from the window, so it is supplied, never inferred.
struct WindowModel {
  FiniteSpace interior;
  Relation f;
  PointSet escape_out;  // cells whose true image leaves the window
  PointSet escape_in;   // cells receivable from outside the window
  bool proper_flag = false;
};

inline void validate_window(const WindowModel& w) {
  const int n = w.interior.size();
  if (w.f.size() != n || w.escape_out.universe_size() != n ||
      w.escape_in.universe_size() != n)
    throw std::invalid_argument("WindowModel: size mismatch");
  if (w.proper_flag && !w.escape_in.empty())
    throw std::invalid_argument("WindowModel: proper flag with nonempty escape_in");
}

// A way of leaving the window: interior cells listed in approach order, the
// last being the closest to the boundary.  Directions sharing a name are
// expected to reach the same infinity point.
struct EscapeDirection {
  std::string name;
  std::vector<PointId> tail;
};

struct CompactifiedSystem {
  FiniteSpace ambient;
  PointSet interior_mask;
  Relation fhat;
  Relation f;  // fhat cut down to the interior, kept for the audits
  PointSet boundary_marks;  // escape cells and direction tail ends
};

namespace detail {

inline Relation interior_cut(const Relation& fhat, const PointSet& mask) {
  return restriction(fhat, mask);
}

inline CompactifiedSystem assemble(FiniteSpace ambient, PointSet mask, Relation fhat,
                                   const Relation& window_f, PointSet marks) {
  CompactifiedSystem c{std::move(ambient), std::move(mask), std::move(fhat), Relation(0),
                       std::move(marks)};
  c.f = interior_cut(c.fhat, c.interior_mask);
  if (c.f != window_f)
    throw std::logic_error("compactify: interior cut of fhat disagrees with window relation");
  return c;
}

}  // namespace detail

inline CompactifiedSystem one_point_compactify(const WindowModel& w) {
  validate_window(w);
  const int n = w.interior.size();
  FiniteSpace ambient(n + 1);
  for (int p = 0; p < n; ++p) ambient.set_label(p, w.interior.label(p));
  ambient.set_label(n, "infinity");

  Relation fhat(n + 1);
  for (auto& [u, v] : w.f.pairs()) fhat.add(u, v);
  for (PointId c : w.escape_out.members()) fhat.add(c, n);
  for (PointId c : w.escape_in.members()) fhat.add(n, c);
  fhat.add(n, n);

  PointSet mask(n + 1);
  for (int p = 0; p < n; ++p) mask.add(p);
  PointSet marks(n + 1);
  for (PointId c : (w.escape_out | w.escape_in).members()) marks.add(c);
  return detail::assemble(std::move(ambient), std::move(mask), std::move(fhat), w.f,
                          std::move(marks));
}

namespace detail {

// Shared pipeline for both value types.  Directions are grouped by the
// stabilized tail-end value of every function; each group becomes one
// infinity point.  Sufficiency of the function list is required for every
// pair except those the truncation cannot decide: pairs inside a single
// group's tails (the modeled functions converge to equality there) and pairs
// with an endpoint among the last two cells of some tail, where a function
// breaking the pair may have been cut off mid-dip.
template <typename Value, typename Equal>
CompactifiedSystem lyapunov_build(const WindowModel& w,
                                  const std::vector<std::vector<Value>>& fns,
                                  std::vector<EscapeDirection> dirs, Equal equal) {
  validate_window(w);
  const int n = w.interior.size();
  for (const auto& vals : fns) {
    if (static_cast<int>(vals.size()) != n)
      throw std::invalid_argument("lyapunov_compactify: function size mismatch");
    for (auto& [u, v] : w.f.pairs())
      if (!equal(vals[u], vals[v]) && vals[v] < vals[u])
        throw std::invalid_argument(
            "lyapunov_compactify: functions not sufficient, value decreases along edge (" +
            std::to_string(u) + "," + std::to_string(v) + ")");
  }

  if (dirs.empty())
    for (PointId c : (w.escape_out | w.escape_in).members())
      dirs.push_back({w.interior.label(c), {c}});
  for (const EscapeDirection& d : dirs) {
    if (d.tail.empty()) throw std::invalid_argument("lyapunov_compactify: empty tail");
    for (PointId p : d.tail)
      if (p < 0 || p >= n) throw std::invalid_argument("lyapunov_compactify: tail out of range");
    for (const auto& vals : fns)
      if (d.tail.size() >= 2 &&
          !equal(vals[d.tail.back()], vals[d.tail[d.tail.size() - 2]]))
        throw std::invalid_argument("lyapunov_compactify: values not stabilized on tail of " +
                                    d.name);
  }

  // Group directions by tail-end value vector.
  std::vector<int> group_of(dirs.size(), -1);
  std::vector<std::vector<size_t>> groups;
  for (size_t i = 0; i < dirs.size(); ++i) {
    for (size_t g = 0; g < groups.size(); ++g) {
      PointId a = dirs[i].tail.back();
      PointId b = dirs[groups[g].front()].tail.back();
      bool same = true;
      for (const auto& vals : fns)
        if (!equal(vals[a], vals[b])) {
          same = false;
          break;
        }
      if (same) {
        group_of[i] = static_cast<int>(g);
        groups[g].push_back(i);
        break;
      }
    }
    if (group_of[i] < 0) {
      group_of[i] = static_cast<int>(groups.size());
      groups.push_back({i});
    }
  }
  for (size_t i = 0; i < dirs.size(); ++i)
    for (size_t j = i + 1; j < dirs.size(); ++j)
      if (dirs[i].name == dirs[j].name && group_of[i] != group_of[j])
        throw std::invalid_argument("lyapunov_compactify: directions named " + dirs[i].name +
                                    " land in different groups");

  std::vector<PointSet> group_tail(groups.size(), PointSet(n));
  std::vector<std::string> group_name(groups.size());
  for (size_t g = 0; g < groups.size(); ++g) {
    std::set<std::string> names;
    for (size_t i : groups[g]) {
      names.insert(dirs[i].name);
      for (PointId p : dirs[i].tail) group_tail[g].add(p);
    }
    std::string joined;
    for (const std::string& s : names) joined += (joined.empty() ? "" : "+") + s;
    group_name[g] = joined;
  }

  // Sufficiency modulo pairs the truncation cannot decide.
  PointSet frontier(n);
  for (const EscapeDirection& d : dirs) {
    frontier.add(d.tail.back());
    if (d.tail.size() >= 2) frontier.add(d.tail[d.tail.size() - 2]);
  }
  Relation g_of_f = g_relation(w.f);
  for (int u = 0; u < n; ++u)
    for (int v = 0; v < n; ++v) {
      if (u == v || g_of_f.has(u, v)) continue;
      if (frontier.contains(u) || frontier.contains(v)) continue;
      bool exempt = false;
      for (size_t g = 0; g < groups.size() && !exempt; ++g)
        exempt = group_tail[g].contains(u) && group_tail[g].contains(v);
      if (exempt) continue;
      bool broken = false;
      for (const auto& vals : fns)
        if (!equal(vals[u], vals[v]) && vals[v] < vals[u]) {
          broken = true;
          break;
        }
      if (!broken)
        throw std::invalid_argument("lyapunov_compactify: functions not sufficient, pair (" +
                                    std::to_string(u) + "," + std::to_string(v) +
                                    ") unbroken");
    }

  const int n_inf = static_cast<int>(groups.size());
  FiniteSpace ambient(n + n_inf);
  for (int p = 0; p < n; ++p) ambient.set_label(p, w.interior.label(p));
  for (int g = 0; g < n_inf; ++g) ambient.set_label(n + g, group_name[g]);

  Relation fhat(n + n_inf);
  for (auto& [u, v] : w.f.pairs()) fhat.add(u, v);
  for (PointId c : w.escape_out.members()) {
    bool routed = false;
    for (size_t g = 0; g < groups.size(); ++g)
      if (group_tail[g].contains(c)) fhat.add(c, n + static_cast<int>(g)), routed = true;
    if (!routed)
      throw std::invalid_argument("lyapunov_compactify: escaping cell " +
                                  w.interior.label(c) + " lies on no direction");
  }
  for (PointId c : w.escape_in.members()) {
    bool routed = false;
    for (size_t g = 0; g < groups.size(); ++g)
      if (group_tail[g].contains(c)) fhat.add(n + static_cast<int>(g), c), routed = true;
    if (!routed)
      throw std::invalid_argument("lyapunov_compactify: entering cell " +
                                  w.interior.label(c) + " lies on no direction");
  }
  // Cofinal routing between infinity points: an edge from near the end of
  // one tail into another tail carries over to the limits.
  for (size_t g = 0; g < groups.size(); ++g)
    for (size_t i : groups[g]) {
      const auto& tail = dirs[i].tail;
      size_t from = tail.size() >= 2 ? tail.size() - 2 : 0;
      for (size_t k = from; k < tail.size(); ++k)
        for (PointId v : w.f.image(tail[k]).members())
          for (size_t h = 0; h < groups.size(); ++h)
            if (group_tail[h].contains(v))
              fhat.add(n + static_cast<int>(g), n + static_cast<int>(h));
    }
  // A fully escaping tail keeps moving at its own limit.
  for (size_t g = 0; g < groups.size(); ++g)
    for (size_t i : groups[g])
      if (w.escape_out.contains(dirs[i].tail.back()))
        fhat.add(n + static_cast<int>(g), n + static_cast<int>(g));

  PointSet mask(n + n_inf);
  for (int p = 0; p < n; ++p) mask.add(p);
  PointSet marks(n + n_inf);
  for (PointId c : (w.escape_out | w.escape_in).members()) marks.add(c);
  for (const EscapeDirection& d : dirs) marks.add(d.tail.back());
  return assemble(std::move(ambient), std::move(mask), std::move(fhat), w.f,
                  std::move(marks));
}

}  // namespace detail

inline CompactifiedSystem lyapunov_compactify(const WindowModel& w, const SufficientSet& LS,
                                              std::vector<EscapeDirection> dirs = {}) {
  std::vector<std::vector<Rat>> fns;
  for (const LyapunovFn& L : LS.fns) fns.push_back(L.values);
  return detail::lyapunov_build(w, fns, std::move(dirs),
                                [](const Rat& a, const Rat& b) { return a == b; });
}

inline CompactifiedSystem lyapunov_compactify(const WindowModel& w,
                                              const std::vector<LyapunovCandidate>& LS,
                                              std::vector<EscapeDirection> dirs = {}) {
  std::vector<std::vector<double>> fns;
  for (const LyapunovCandidate& L : LS) fns.push_back(L.values);
  return detail::lyapunov_build(w, fns, std::move(dirs),
                                [](double a, double b) { return std::abs(a - b) <= 1e-9; });
}

inline bool is_dynamic(const CompactifiedSystem& c) {
  return detail::interior_cut(g_relation(c.fhat), c.interior_mask) == g_relation(c.f);
}

inline bool is_almost_dynamic(const CompactifiedSystem& c) {
  const int k = c.interior_mask.count();
  Relation lhs = detail::interior_cut(Relation::identity(c.ambient.size()) | g_relation(c.fhat),
                                      c.interior_mask);
  return lhs == (Relation::identity(k) | g_relation(c.f));
}

inline bool plus_proper_check(const CompactifiedSystem& c) {
  return c.fhat.image(c.interior_mask).subset_of(c.interior_mask);
}

enum class ClassCase { kI, kII, kIII, kIV };

inline std::string to_string(ClassCase k) {
  switch (k) {
    case ClassCase::kI: return "i";
    case ClassCase::kII: return "ii";
    case ClassCase::kIII: return "iii";
    default: return "iv";
  }
}

struct ClassifiedClass {
  PointSet members;  // over the ambient space
  ClassCase kind;
};

// Sorts every recurrence class of the compactified system into: all at
// infinity (i), part inside and part at infinity with the inside part a full
// interior class touching the boundary (ii), all inside (iii), or the
// remaining anomaly (iv), which cannot occur when the interior is forward
// invariant.
inline std::vector<ClassifiedClass> classify_classes(const CompactifiedSystem& c) {
  if (!is_almost_dynamic(c))
    throw std::invalid_argument("classify_classes: system is not almost dynamic");
  const int nhat = c.ambient.size();
  Relation ghat = g_relation(c.fhat);
  PointSet cyc = cyclic_set(ghat);

  // Interior recurrence classes, on window indexing.
  Relation g = g_relation(c.f);
  std::vector<PointId> mask_members = c.interior_mask.members();
  std::vector<int> window_index(nhat, -1);
  for (size_t i = 0; i < mask_members.size(); ++i)
    window_index[mask_members[i]] = static_cast<int>(i);

  bool proper = plus_proper_check(c);
  std::vector<ClassifiedClass> out;
  PointSet seen(nhat);
  for (PointId p : cyc.members()) {
    if (seen.contains(p)) continue;
    PointSet cls(nhat);
    for (PointId q : cyc.members())
      if (ghat.has(p, q) && ghat.has(q, p)) cls.add(q), seen.add(q);

    PointSet inside = cls & c.interior_mask;
    PointSet at_infinity = cls - c.interior_mask;
    ClassCase kind;
    if (inside.empty()) {
      kind = ClassCase::kI;
    } else if (at_infinity.empty()) {
      kind = ClassCase::kIII;
    } else {
      // Full interior class, cyclic, and touching the escape boundary.
      bool full_class = true;
      PointId rep = window_index[inside.members().front()];
      if (!g.has(rep, rep)) {
        full_class = false;
      } else {
        PointSet f_class(static_cast<int>(mask_members.size()));
        for (int q = 0; q < static_cast<int>(mask_members.size()); ++q)
          if (g.has(rep, q) && g.has(q, rep)) f_class.add(q);
        PointSet inside_w(static_cast<int>(mask_members.size()));
        for (PointId q : inside.members()) inside_w.add(window_index[q]);
        full_class = f_class == inside_w;
      }
      bool touches = inside.intersects(c.boundary_marks);
      kind = full_class && touches ? ClassCase::kII : ClassCase::kIV;
    }
    if (kind == ClassCase::kIV && proper)
      throw std::logic_error("classify_classes: anomalous class in a forward-invariant interior");
    out.push_back({cls, kind});
  }
  return out;
}

// Least set containing the window and closed under taking preimages; the
// points whose whole forward future eventually enters the window.
inline PointSet tilde_x(const CompactifiedSystem& c) {
  const int n = c.ambient.size();
  for (int p = 0; p < n; ++p)
    if (c.fhat.image(p).count() != 1)
      throw std::invalid_argument("tilde_x: relation is not a function");
  PointSet s = c.interior_mask;
  for (long long iter = 0;; ++iter) {
    detail::cap_check(iter, n, "tilde_x");
    PointSet next = c.interior_mask | c.fhat.preimage(s);
    if (next == s) return s;
    s = next;
  }
}

// Chains downstairs agree with chains upstairs cut to the window, provided
// the window family is at least as fine as the ambient one on the window.
inline bool chain_dynamic_check(const CompactifiedSystem& c, const EntourageFamily& fam_x,
                                const EntourageFamily& fam_hat) {
  if (fam_x.n != c.interior_mask.count() || fam_hat.n != c.ambient.size())
    throw std::invalid_argument("chain_dynamic_check: family size mismatch");
  Relation hat_cut = restriction(fam_hat.smallest(), c.interior_mask);
  if (!fam_x.smallest().subset_of(hat_cut))
    throw std::invalid_argument(
        "chain_dynamic_check: window family is coarser than the ambient one");
  Relation upstairs = detail::interior_cut(chain_relation(c.fhat, fam_hat), c.interior_mask);
  return upstairs == chain_relation(c.f, fam_x);
}

// For an orbit pair visible in the window but absent downstairs, some point
// at infinity mediates it.
inline std::optional<PointId> lemma_1_4_witness(const CompactifiedSystem& c, PointId x,
                                                PointId y) {
  Relation ghat = g_relation(c.fhat);
  if (!c.interior_mask.contains(x) || !c.interior_mask.contains(y) || !ghat.has(x, y))
    throw std::invalid_argument("lemma_1_4_witness: pair not an interior orbit pair upstairs");
  std::vector<PointId> mask_members = c.interior_mask.members();
  std::vector<int> window_index(c.ambient.size(), -1);
  for (size_t i = 0; i < mask_members.size(); ++i)
    window_index[mask_members[i]] = static_cast<int>(i);
  if (g_relation(c.f).has(window_index[x], window_index[y])) return std::nullopt;
  for (PointId z : c.interior_mask.complement().members())
    if (ghat.has(x, z) && ghat.has(z, y)) return z;
  throw std::logic_error("lemma_1_4_witness: no mediator found");
}

inline nlohmann::json to_json(const CompactifiedSystem& c) {
  nlohmann::json labels = nlohmann::json::array();
  for (int p = 0; p < c.ambient.size(); ++p) labels.push_back(c.ambient.label(p));
  nlohmann::json fhat = nlohmann::json::array();
  for (auto& [u, v] : c.fhat.pairs()) fhat.push_back({u, v});
  return {{"ambient", labels},
          {"interior", c.interior_mask.members()},
          {"fhat", fhat}};
}

inline nlohmann::json classification_json(const CompactifiedSystem& c,
                                          const std::vector<ClassifiedClass>& classes) {
  nlohmann::json arr = nlohmann::json::array();
  for (const ClassifiedClass& cc : classes) {
    nlohmann::json members = nlohmann::json::array();
    for (PointId p : cc.members.members()) members.push_back(c.ambient.label(p));
    arr.push_back({{"case", to_string(cc.kind)}, {"members", members}});
  }
  return arr;
}

inline std::string dot_quote(const std::string& s) {
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"' || ch == '\\') out += '\\';
    out += ch;
  }
  return out + "\"";
}

inline std::string to_dot(const CompactifiedSystem& c) {
  std::ostringstream os;
  os << "digraph compactified {\n  rankdir=LR;\n";
  for (int p = 0; p < c.ambient.size(); ++p)
    os << "  " << dot_quote(c.ambient.label(p)) << " [shape="
       << (c.interior_mask.contains(p) ? "circle" : "doublecircle") << "];\n";
  for (auto& [u, v] : c.fhat.pairs())
    os << "  " << dot_quote(c.ambient.label(u)) << " -> " << dot_quote(c.ambient.label(v))
       << ";\n";
  os << "}\n";
  return os.str();
}

}  // namespace reckit
