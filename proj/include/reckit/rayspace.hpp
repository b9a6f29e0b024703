#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "reckit/compactify.hpp"
#include "reckit/relation.hpp"

namespace reckit {

// Symbolic systems on finitely many discrete rays. A ray is a copy of the
// naturals; a rule moves every cell of one ray to a cell of another with a
// fixed index shift, from some threshold on. Rays may carry a limit point,
// and rays sharing a limit class name converge to the same point. Everything
// a finite truncation cannot represent exactly lives here instead.
struct RayRule {
  std::string from;
  std::string to;
  int shift = 0;      // image index is n + shift
  int threshold = 0;  // rule applies for n >= threshold
};

struct RayEndpoint {
  enum class Kind { kBase, kCell };
  Kind kind = Kind::kBase;
  std::string name;  // base-point name, or ray name for cells
  int index = 0;     // cell index when kind == kCell

  static RayEndpoint base(std::string b) { return {Kind::kBase, std::move(b), 0}; }
  static RayEndpoint cell(std::string ray, int n) { return {Kind::kCell, std::move(ray), n}; }

  friend bool operator==(const RayEndpoint& a, const RayEndpoint& b) {
    return a.kind == b.kind && a.name == b.name && (a.kind == Kind::kBase || a.index == b.index);
  }
  friend bool operator<(const RayEndpoint& a, const RayEndpoint& b) {
    return std::tie(a.kind, a.name, a.index) < std::tie(b.kind, b.name, b.index);
  }
};

struct RaySystem {
  std::vector<std::string> rays;
  std::vector<std::string> base_points;
  std::map<std::string, std::string> limit_class;  // ray -> limit class; absent = no limit point
  std::vector<RayRule> rules;
  std::vector<std::pair<RayEndpoint, RayEndpoint>> exceptional_pairs;
  std::vector<std::pair<std::string, std::string>> limit_pairs;  // between limit classes
};

namespace detail {

inline bool contains_name(const std::vector<std::string>& v, const std::string& s) {
  return std::find(v.begin(), v.end(), s) != v.end();
}

// Limit classes in order of first appearance along the ray list.
inline std::vector<std::string> limit_classes_of(const RaySystem& r) {
  std::vector<std::string> out;
  for (const std::string& ray : r.rays) {
    auto it = r.limit_class.find(ray);
    if (it != r.limit_class.end() && !contains_name(out, it->second)) out.push_back(it->second);
  }
  return out;
}

inline void sort_unique_pairs(std::vector<std::pair<std::string, std::string>>& v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
}

}  // namespace detail

inline void validate_ray_system(const RaySystem& r) {
  std::set<std::string> ray_set(r.rays.begin(), r.rays.end());
  if (ray_set.size() != r.rays.size())
    throw std::invalid_argument("RaySystem: duplicate ray names");
  std::set<std::string> base_set(r.base_points.begin(), r.base_points.end());
  if (base_set.size() != r.base_points.size())
    throw std::invalid_argument("RaySystem: duplicate base point names");
  for (auto& [ray, cls] : r.limit_class)
    if (!ray_set.count(ray))
      throw std::invalid_argument("RaySystem: limit declared for unknown ray " + ray);
  std::vector<std::string> classes = detail::limit_classes_of(r);
  for (const RayRule& rule : r.rules) {
    if (!ray_set.count(rule.from) || !ray_set.count(rule.to))
      throw std::invalid_argument("RaySystem: rule references unknown ray");
    if (rule.shift < -1 || rule.shift > 1)
      throw std::invalid_argument("RaySystem: rule shift outside {-1,0,1}");
    if (rule.threshold < 0) throw std::invalid_argument("RaySystem: negative threshold");
  }
  auto check_endpoint = [&](const RayEndpoint& e) {
    if (e.kind == RayEndpoint::Kind::kBase) {
      if (!base_set.count(e.name))
        throw std::invalid_argument("RaySystem: unknown base point " + e.name);
    } else {
      if (!ray_set.count(e.name))
        throw std::invalid_argument("RaySystem: unknown ray " + e.name);
      if (e.index < 0) throw std::invalid_argument("RaySystem: negative cell index");
    }
  };
  for (auto& [a, b] : r.exceptional_pairs) check_endpoint(a), check_endpoint(b);
  for (auto& [g, h] : r.limit_pairs)
    if (!detail::contains_name(classes, g) || !detail::contains_name(classes, h))
      throw std::invalid_argument("RaySystem: limit pair over undeclared class");
}

inline RaySystem strip_limits(RaySystem r) {
  r.limit_class.clear();
  r.limit_pairs.clear();
  return r;
}

// Topological closure: a rule whose source and target rays both have limit
// points forces the corresponding pair of limits into the relation. Rules
// with a limit on only one side generate no pair inside the space; they are
// reported, since their tail pairs leave every compact part of the system.
struct ClosureResult {
  RaySystem sys;
  std::vector<std::string> notes;
};

inline ClosureResult closure(const RaySystem& r) {
  ClosureResult out{r, {}};
  std::set<std::string> noted;
  for (const RayRule& rule : r.rules) {
    auto fi = r.limit_class.find(rule.from);
    auto ti = r.limit_class.find(rule.to);
    const bool from_lim = fi != r.limit_class.end();
    const bool to_lim = ti != r.limit_class.end();
    if (from_lim && to_lim) {
      out.sys.limit_pairs.emplace_back(fi->second, ti->second);
    } else if (from_lim != to_lim) {
      std::string note = "rule " + rule.from + "->" + rule.to + ": ray " +
                         (from_lim ? rule.to : rule.from) +
                         " has no limit point; its tail pairs leave the space";
      if (noted.insert(note).second) out.notes.push_back(note);
    }
  }
  detail::sort_unique_pairs(out.sys.limit_pairs);
  return out;
}

inline bool is_closed(const RaySystem& r) {
  std::vector<std::pair<std::string, std::string>> have = r.limit_pairs;
  detail::sort_unique_pairs(have);
  return closure(r).sys.limit_pairs == have;
}

// Relational composition r1 after r2 over a shared universe. Composite rules
// add shifts; the result may leave the unit-shift range of hand-written
// systems, which is expected for powers.
inline RaySystem compose(const RaySystem& r1, const RaySystem& r2) {
  if (r1.rays != r2.rays || r1.base_points != r2.base_points ||
      r1.limit_class != r2.limit_class)
    throw std::invalid_argument("compose: ray universes differ");
  RaySystem out{r1.rays, r1.base_points, r1.limit_class, {}, {}, {}};

  std::set<std::tuple<std::string, std::string, int, int>> rule_set;
  for (const RayRule& a : r2.rules)
    for (const RayRule& b : r1.rules) {
      if (a.to != b.from) continue;
      int threshold = std::max({a.threshold, b.threshold - a.shift, 0});
      rule_set.insert({a.from, b.to, a.shift + b.shift, threshold});
    }
  for (auto& [from, to, shift, threshold] : rule_set)
    out.rules.push_back({from, to, shift, threshold});

  std::set<std::pair<RayEndpoint, RayEndpoint>> exc;
  auto rule_image = [](const RayRule& rule, const RayEndpoint& e) -> std::optional<RayEndpoint> {
    if (e.kind != RayEndpoint::Kind::kCell || e.name != rule.from || e.index < rule.threshold)
      return std::nullopt;
    return RayEndpoint::cell(rule.to, e.index + rule.shift);
  };
  auto rule_source = [](const RayRule& rule, const RayEndpoint& e) -> std::optional<RayEndpoint> {
    if (e.kind != RayEndpoint::Kind::kCell || e.name != rule.to) return std::nullopt;
    int n = e.index - rule.shift;
    if (n < rule.threshold || n < 0) return std::nullopt;
    return RayEndpoint::cell(rule.from, n);
  };
  for (auto& [u, mid] : r2.exceptional_pairs) {
    for (const RayRule& b : r1.rules)
      if (auto v = rule_image(b, mid)) exc.insert({u, *v});
    for (auto& [m2, v] : r1.exceptional_pairs)
      if (mid == m2) exc.insert({u, v});
  }
  for (auto& [mid, v] : r1.exceptional_pairs)
    for (const RayRule& a : r2.rules)
      if (auto u = rule_source(a, mid)) exc.insert({*u, v});
  out.exceptional_pairs.assign(exc.begin(), exc.end());

  for (auto& [g, h] : r2.limit_pairs)
    for (auto& [h2, k] : r1.limit_pairs)
      if (h == h2) out.limit_pairs.emplace_back(g, k);
  detail::sort_unique_pairs(out.limit_pairs);
  return out;
}

inline RaySystem power(const RaySystem& r, int k) {
  if (k < 1) throw std::invalid_argument("power: exponent must be positive");
  RaySystem acc = r;
  for (int i = 1; i < k; ++i) acc = compose(r, acc);
  return acc;
}

inline RaySystem inverse(const RaySystem& r) {
  RaySystem out{r.rays, r.base_points, r.limit_class, {}, {}, {}};
  for (const RayRule& rule : r.rules)
    out.rules.push_back({rule.to, rule.from, -rule.shift,
                         std::max(0, rule.threshold + rule.shift)});
  for (auto& [u, v] : r.exceptional_pairs) out.exceptional_pairs.emplace_back(v, u);
  for (auto& [g, h] : r.limit_pairs) out.limit_pairs.emplace_back(h, g);
  detail::sort_unique_pairs(out.limit_pairs);
  return out;
}

// Union of two systems over the same universe.
inline RaySystem merge(const RaySystem& r1, const RaySystem& r2) {
  if (r1.rays != r2.rays || r1.base_points != r2.base_points ||
      r1.limit_class != r2.limit_class)
    throw std::invalid_argument("merge: ray universes differ");
  RaySystem out = r1;
  std::set<std::tuple<std::string, std::string, int, int>> rule_set;
  for (const RayRule& rule : out.rules)
    rule_set.insert({rule.from, rule.to, rule.shift, rule.threshold});
  for (const RayRule& rule : r2.rules)
    if (rule_set.insert({rule.from, rule.to, rule.shift, rule.threshold}).second)
      out.rules.push_back(rule);
  for (auto& p : r2.exceptional_pairs)
    if (std::find(out.exceptional_pairs.begin(), out.exceptional_pairs.end(), p) ==
        out.exceptional_pairs.end())
      out.exceptional_pairs.push_back(p);
  for (auto& p : r2.limit_pairs) out.limit_pairs.push_back(p);
  detail::sort_unique_pairs(out.limit_pairs);
  return out;
}

// One index relation between two rays: nothing, exactly n+offset, or at
// least n+offset, in each case for source index n >= threshold. These are
// the least upper bounds available for orbit sets; unions of unequal exact
// offsets widen to an at-least form.
struct RayConstraint {
  enum class Form { kAbsent, kEq, kGe };
  Form form = Form::kAbsent;
  long long offset = 0;
  long long threshold = 0;

  friend bool operator==(const RayConstraint& a, const RayConstraint& b) {
    if (a.form != b.form) return false;
    if (a.form == Form::kAbsent) return true;
    return a.offset == b.offset && a.threshold == b.threshold;
  }
};

struct SymbolicOrbit {
  std::vector<std::string> rays;
  std::map<std::string, std::string> limit_class;
  std::map<std::pair<std::string, std::string>, RayConstraint> constraints;
  std::vector<std::pair<std::string, std::string>> limit_pairs;
};

namespace detail {

inline RayConstraint saturate(RayConstraint c, long long cap) {
  if (c.form == RayConstraint::Form::kAbsent) return c;
  if (c.offset > cap) c = {RayConstraint::Form::kGe, cap, c.threshold};
  if (c.offset < -cap) c = {RayConstraint::Form::kGe, -cap, c.threshold};
  if (c.threshold < 0) c.threshold = 0;
  return c;
}

inline RayConstraint constraint_join(const RayConstraint& a, const RayConstraint& b,
                                     long long cap) {
  using Form = RayConstraint::Form;
  if (a.form == Form::kAbsent) return saturate(b, cap);
  if (b.form == Form::kAbsent) return saturate(a, cap);
  if (a.form == Form::kEq && b.form == Form::kEq && a.offset == b.offset)
    return saturate({Form::kEq, a.offset, std::min(a.threshold, b.threshold)}, cap);
  return saturate({Form::kGe, std::min(a.offset, b.offset),
                   std::min(a.threshold, b.threshold)},
                  cap);
}

// a relates ray r to s, b relates s to t; the result bounds the composite.
inline RayConstraint constraint_compose(const RayConstraint& a, const RayConstraint& b,
                                        long long cap) {
  using Form = RayConstraint::Form;
  if (a.form == Form::kAbsent || b.form == Form::kAbsent) return {};
  RayConstraint c;
  c.form = (a.form == Form::kEq && b.form == Form::kEq) ? Form::kEq : Form::kGe;
  c.offset = a.offset + b.offset;
  c.threshold = a.form == Form::kEq ? std::max(a.threshold, b.threshold - a.offset)
                                    : a.threshold;
  return saturate(c, cap);
}

}  // namespace detail

// Orbit of the rule part as per-ray-pair constraints, plus the transitive
// closure of the limit part. Exact whenever unequal parallel offsets are
// absorbed by a unit-shift cycle further along, which holds for the shipped
// golden systems. For nondecreasing systems the constraints bound the orbit
// from above; descending cycles saturate at the offset cap and lose pairs
// below it, so they are outside the symbolic engine's supported range.
inline SymbolicOrbit transitive_closure(const RaySystem& r) {
  validate_ray_system(r);
  if (!r.exceptional_pairs.empty())
    throw std::invalid_argument(
        "transitive_closure: exceptional pairs are outside the constraint algebra; "
        "materialize and use the finite engine");
  const long long cap = 2 * std::max<long long>(1, static_cast<long long>(r.rays.size()));
  SymbolicOrbit out{r.rays, r.limit_class, {}, {}};
  for (const RayRule& rule : r.rules) {
    RayConstraint c{RayConstraint::Form::kEq, rule.shift, rule.threshold};
    auto key = std::make_pair(rule.from, rule.to);
    out.constraints[key] = detail::constraint_join(out.constraints[key], c, cap);
  }
  for (long long guard = 0;; ++guard) {
    if (guard > 16 * cap * cap * static_cast<long long>(r.rays.size() + 1))
      throw std::logic_error("transitive_closure: fixpoint failed to stabilize");
    bool changed = false;
    auto snapshot = out.constraints;
    for (auto& [ab, cab] : snapshot)
      for (auto& [bc, cbc] : snapshot) {
        if (ab.second != bc.first) continue;
        auto key = std::make_pair(ab.first, bc.second);
        RayConstraint comp = detail::constraint_compose(cab, cbc, cap);
        RayConstraint joined = detail::constraint_join(out.constraints[key], comp, cap);
        if (!(joined == out.constraints[key])) {
          out.constraints[key] = joined;
          changed = true;
        }
      }
    if (!changed) break;
  }
  for (auto it = out.constraints.begin(); it != out.constraints.end();)
    it = it->second.form == RayConstraint::Form::kAbsent ? out.constraints.erase(it)
                                                         : std::next(it);

  out.limit_pairs = r.limit_pairs;
  detail::sort_unique_pairs(out.limit_pairs);
  for (bool changed = true; changed;) {
    changed = false;
    auto snapshot = out.limit_pairs;
    for (auto& [g, h] : snapshot)
      for (auto& [h2, k] : snapshot) {
        if (h != h2) continue;
        std::pair<std::string, std::string> p{g, k};
        if (!std::binary_search(out.limit_pairs.begin(), out.limit_pairs.end(), p)) {
          out.limit_pairs.push_back(p);
          std::sort(out.limit_pairs.begin(), out.limit_pairs.end());
          changed = true;
        }
      }
  }
  return out;
}

inline SymbolicOrbit closure(const SymbolicOrbit& o) {
  SymbolicOrbit out = o;
  for (auto& [pair, c] : o.constraints) {
    if (c.form == RayConstraint::Form::kAbsent) continue;
    auto fi = o.limit_class.find(pair.first);
    auto ti = o.limit_class.find(pair.second);
    if (fi != o.limit_class.end() && ti != o.limit_class.end())
      out.limit_pairs.emplace_back(fi->second, ti->second);
  }
  detail::sort_unique_pairs(out.limit_pairs);
  return out;
}

inline bool is_closed(const SymbolicOrbit& o) {
  std::vector<std::pair<std::string, std::string>> have = o.limit_pairs;
  detail::sort_unique_pairs(have);
  return closure(o).limit_pairs == have;
}

// Index layout shared by materialize and the consistency tests: ray cells
// first, then base points, then limit classes modeled as interior points,
// then the remaining limit classes as points at infinity.
struct RayLayout {
  int N = 0;
  std::vector<std::string> rays;
  std::vector<std::string> base_points;
  std::vector<std::string> interior_classes;
  std::vector<std::string> infinity_classes;

  int cell(const std::string& ray, int n) const {
    auto it = std::find(rays.begin(), rays.end(), ray);
    if (it == rays.end() || n < 0 || n > N)
      throw std::out_of_range("RayLayout: no such cell");
    return static_cast<int>(it - rays.begin()) * (N + 1) + n;
  }
  int base(const std::string& name) const {
    auto it = std::find(base_points.begin(), base_points.end(), name);
    if (it == base_points.end()) throw std::out_of_range("RayLayout: no such base point");
    return static_cast<int>(rays.size()) * (N + 1) +
           static_cast<int>(it - base_points.begin());
  }
  int limit_point(const std::string& cls) const {
    int off = static_cast<int>(rays.size()) * (N + 1) + static_cast<int>(base_points.size());
    auto it = std::find(interior_classes.begin(), interior_classes.end(), cls);
    if (it != interior_classes.end())
      return off + static_cast<int>(it - interior_classes.begin());
    auto jt = std::find(infinity_classes.begin(), infinity_classes.end(), cls);
    if (jt == infinity_classes.end()) throw std::out_of_range("RayLayout: no such limit class");
    return off + static_cast<int>(interior_classes.size()) +
           static_cast<int>(jt - infinity_classes.begin());
  }
  int interior_count() const {
    return static_cast<int>(rays.size()) * (N + 1) + static_cast<int>(base_points.size()) +
           static_cast<int>(interior_classes.size());
  }
  int ambient_count() const {
    return interior_count() + static_cast<int>(infinity_classes.size());
  }
};

inline RayLayout make_layout(const RaySystem& r, int N,
                             const std::vector<std::string>& interior_limits = {}) {
  if (N < 1) throw std::invalid_argument("make_layout: truncation depth must be >= 1");
  RayLayout lay{N, r.rays, r.base_points, {}, {}};
  std::vector<std::string> classes = detail::limit_classes_of(r);
  for (const std::string& want : interior_limits)
    if (!detail::contains_name(classes, want))
      throw std::invalid_argument("make_layout: unknown limit class " + want);
  for (const std::string& cls : classes) {
    if (detail::contains_name(interior_limits, cls))
      lay.interior_classes.push_back(cls);
    else
      lay.infinity_classes.push_back(cls);
  }
  return lay;
}

// Finite model at truncation depth N. Rule images that land beyond the
// window go to the target ray's limit point when it exists and are dropped
// otherwise; either way the source cell is marked as boundary. Limit classes
// listed in interior_limits are counted as part of the space being
// compactified rather than as points at infinity.
inline CompactifiedSystem materialize(const RaySystem& r, int N,
                                      const std::vector<std::string>& interior_limits = {}) {
  validate_ray_system(r);
  RayLayout lay = make_layout(r, N, interior_limits);
  const int n_amb = lay.ambient_count();

  FiniteSpace ambient(n_amb);
  for (size_t i = 0; i < lay.rays.size(); ++i)
    for (int n = 0; n <= N; ++n)
      ambient.set_label(lay.cell(lay.rays[i], n), lay.rays[i] + "(" + std::to_string(n) + ")");
  for (const std::string& b : lay.base_points) ambient.set_label(lay.base(b), b);
  for (const std::string& cls : lay.interior_classes)
    ambient.set_label(lay.limit_point(cls), cls);
  for (const std::string& cls : lay.infinity_classes)
    ambient.set_label(lay.limit_point(cls), cls);

  Relation fhat(n_amb);
  PointSet marks(n_amb);
  for (const RayRule& rule : r.rules)
    for (int n = rule.threshold; n <= N; ++n) {
      int tgt = n + rule.shift;
      if (tgt >= 0 && tgt <= N) {
        fhat.add(lay.cell(rule.from, n), lay.cell(rule.to, tgt));
        continue;
      }
      marks.add(lay.cell(rule.from, n));
      auto ti = r.limit_class.find(rule.to);
      if (tgt > N && ti != r.limit_class.end())
        fhat.add(lay.cell(rule.from, n), lay.limit_point(ti->second));
    }
  auto endpoint_id = [&](const RayEndpoint& e) -> std::optional<int> {
    if (e.kind == RayEndpoint::Kind::kBase) return lay.base(e.name);
    if (e.index > N) return std::nullopt;
    return lay.cell(e.name, e.index);
  };
  for (auto& [u, v] : r.exceptional_pairs) {
    auto ui = endpoint_id(u), vi = endpoint_id(v);
    if (!ui) continue;
    if (!vi) {
      marks.add(*ui);
      continue;
    }
    fhat.add(*ui, *vi);
  }
  for (auto& [g, h] : r.limit_pairs) fhat.add(lay.limit_point(g), lay.limit_point(h));

  PointSet mask(n_amb);
  for (int p = 0; p < lay.interior_count(); ++p) mask.add(p);
  Relation window_f = restriction(fhat, mask);
  return detail::assemble(std::move(ambient), std::move(mask), std::move(fhat),
                          window_f, std::move(marks));
}

// Concrete pairs of a symbolic orbit inside a layout's window, for checking
// the symbolic and truncated engines against each other.
inline Relation to_relation(const SymbolicOrbit& o, const RayLayout& lay) {
  Relation out(lay.ambient_count());
  for (auto& [pair, c] : o.constraints) {
    if (c.form == RayConstraint::Form::kAbsent) continue;
    for (int n = static_cast<int>(std::max<long long>(0, c.threshold)); n <= lay.N; ++n) {
      if (c.form == RayConstraint::Form::kEq) {
        long long m = n + c.offset;
        if (m >= 0 && m <= lay.N)
          out.add(lay.cell(pair.first, n), lay.cell(pair.second, static_cast<int>(m)));
      } else {
        for (long long m = std::max<long long>(0, n + c.offset); m <= lay.N; ++m)
          out.add(lay.cell(pair.first, n), lay.cell(pair.second, static_cast<int>(m)));
      }
    }
  }
  for (auto& [g, h] : o.limit_pairs) out.add(lay.limit_point(g), lay.limit_point(h));
  return out;
}

inline nlohmann::json to_json(const RayEndpoint& e) {
  if (e.kind == RayEndpoint::Kind::kBase) return {{"base", e.name}};
  return {{"ray", e.name}, {"n", e.index}};
}

inline nlohmann::json to_json(const RaySystem& r) {
  nlohmann::json limits = nlohmann::json::object();
  for (auto& [ray, cls] : r.limit_class) limits[ray] = cls;
  nlohmann::json rules = nlohmann::json::array();
  for (const RayRule& rule : r.rules)
    rules.push_back({{"from", rule.from},
                     {"to", rule.to},
                     {"shift", rule.shift},
                     {"threshold", rule.threshold}});
  nlohmann::json exc = nlohmann::json::array();
  for (auto& [u, v] : r.exceptional_pairs)
    exc.push_back({{"from", to_json(u)}, {"to", to_json(v)}});
  nlohmann::json lp = nlohmann::json::array();
  for (auto& [g, h] : r.limit_pairs) lp.push_back({g, h});
  return {{"rays", r.rays},         {"base_points", r.base_points},
          {"limits", limits},       {"rules", rules},
          {"exceptional_pairs", exc}, {"limit_pairs", lp}};
}

inline RayEndpoint ray_endpoint_from_json(const nlohmann::json& j) {
  if (j.contains("base")) return RayEndpoint::base(j.at("base").get<std::string>());
  return RayEndpoint::cell(j.at("ray").get<std::string>(), j.at("n").get<int>());
}

inline RaySystem ray_system_from_json(const nlohmann::json& j) {
  RaySystem r;
  r.rays = j.at("rays").get<std::vector<std::string>>();
  r.base_points = j.value("base_points", std::vector<std::string>{});
  if (j.contains("limits"))
    for (auto& [ray, cls] : j.at("limits").items())
      r.limit_class[ray] = cls.get<std::string>();
  if (j.contains("rules"))
    for (const auto& rule : j.at("rules"))
      r.rules.push_back({rule.at("from").get<std::string>(), rule.at("to").get<std::string>(),
                         rule.value("shift", 0), rule.value("threshold", 0)});
  if (j.contains("exceptional_pairs"))
    for (const auto& p : j.at("exceptional_pairs"))
      r.exceptional_pairs.emplace_back(ray_endpoint_from_json(p.at("from")),
                                       ray_endpoint_from_json(p.at("to")));
  if (j.contains("limit_pairs"))
    for (const auto& p : j.at("limit_pairs"))
      r.limit_pairs.emplace_back(p.at(0).get<std::string>(), p.at(1).get<std::string>());
  validate_ray_system(r);
  return r;
}

}  // namespace reckit
