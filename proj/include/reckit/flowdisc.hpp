#pragma once

// Discretization of semiflows into cell relations, and the flow-level
// recurrence structure built on top of them.  A flow is sampled over the unit
// time interval and over its shift [1,2]; those two relations plus the
// time-one relation support generalized recurrence, limit and chain
// relations, agreement checks against the time-one map, suspension of
// cascades, wandering sets, and parallelizability verdicts with section
// extraction from a Lyapunov function.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "reckit/relation.hpp"
#include "reckit/relcore.hpp"
#include "reckit/uniform.hpp"

namespace reckit {

// ---------------------------------------------------------------------------
// Grid

struct GridAxis {
  double lo = 0.0;
  double hi = 1.0;
  int cells = 1;
};

// Axis-aligned box split into equal cells, row-major ids with the last axis
// fastest.  Masked cells are cut out of the space: nothing is sampled there
// and entering one counts as leaving the window.
class Grid {
 public:
  Grid() : mask_(0) {}
  explicit Grid(std::vector<GridAxis> axes) : axes_(std::move(axes)), mask_(0) {
    long long n = axes_.empty() ? 0 : 1;
    for (const GridAxis& a : axes_) {
      if (a.cells < 1 || !(a.lo < a.hi)) throw std::invalid_argument("Grid: bad axis");
      n *= a.cells;
      if (n > (1 << 22)) throw std::invalid_argument("Grid: too many cells");
    }
    mask_ = PointSet(static_cast<int>(n));
  }

  int dim() const { return static_cast<int>(axes_.size()); }
  int cell_count() const { return mask_.universe_size(); }
  const std::vector<GridAxis>& axes() const { return axes_; }

  double width(int axis) const {
    const GridAxis& a = axes_.at(axis);
    return (a.hi - a.lo) / a.cells;
  }
  double min_width() const {
    double w = std::numeric_limits<double>::infinity();
    for (int i = 0; i < dim(); ++i) w = std::min(w, width(i));
    return w;
  }

  const PointSet& mask() const { return mask_; }
  void set_mask(PointSet m) {
    if (m.universe_size() != cell_count()) throw std::invalid_argument("Grid: mask size mismatch");
    mask_ = std::move(m);
  }
  bool masked(PointId c) const { return mask_.contains(c); }
  PointSet interior() const { return mask_.complement(); }

  std::vector<int> coords(PointId c) const {
    if (c < 0 || c >= cell_count()) throw std::out_of_range("Grid: cell id out of range");
    std::vector<int> ix(dim());
    for (int a = dim() - 1; a >= 0; --a) {
      ix[a] = c % axes_[a].cells;
      c /= axes_[a].cells;
    }
    return ix;
  }

  PointId id(const std::vector<int>& ix) const {
    if (static_cast<int>(ix.size()) != dim()) throw std::invalid_argument("Grid: coord arity");
    long long c = 0;
    for (int a = 0; a < dim(); ++a) {
      if (ix[a] < 0 || ix[a] >= axes_[a].cells) throw std::out_of_range("Grid: coord out of range");
      c = c * axes_[a].cells + ix[a];
    }
    return static_cast<PointId>(c);
  }

  // Window membership test; points on the upper face belong to the last cell.
  std::optional<PointId> locate(const std::vector<double>& x) const {
    if (static_cast<int>(x.size()) != dim() || dim() == 0) return std::nullopt;
    long long c = 0;
    for (int a = 0; a < dim(); ++a) {
      const GridAxis& ax = axes_[a];
      if (std::isnan(x[a]) || x[a] < ax.lo || x[a] > ax.hi) return std::nullopt;
      int i = static_cast<int>((x[a] - ax.lo) / width(a));
      i = std::clamp(i, 0, ax.cells - 1);
      c = c * ax.cells + i;
    }
    return static_cast<PointId>(c);
  }

  std::vector<double> center(PointId c) const {
    std::vector<int> ix = coords(c);
    std::vector<double> p(dim());
    for (int a = 0; a < dim(); ++a) p[a] = axes_[a].lo + (ix[a] + 0.5) * width(a);
    return p;
  }

  // The 2^d corners pulled slightly inside, plus the center.  The inward pull
  // keeps boundary samples out of the neighbouring cell; the one-cell
  // fattening applied by the samplers covers the skipped sliver.
  std::vector<std::vector<double>> sample_points(PointId c) const {
    std::vector<int> ix = coords(c);
    std::vector<std::vector<double>> out;
    const int d = dim();
    for (int m = 0; m < (1 << d); ++m) {
      std::vector<double> p(d);
      for (int a = 0; a < d; ++a) {
        double w = width(a), eps = w * 1e-9;
        double lo = axes_[a].lo + ix[a] * w;
        p[a] = (m >> a) & 1 ? lo + w - eps : lo + eps;
      }
      out.push_back(std::move(p));
    }
    out.push_back(center(c));
    return out;
  }

 private:
  std::vector<GridAxis> axes_;
  PointSet mask_;
};

// Chebyshev ball of radius r around a cell, clipped to the window, masked
// cells excluded.  The cell itself is included when unmasked.
inline PointSet grid_ball(const Grid& g, PointId c, int r) {
  PointSet out(g.cell_count());
  std::vector<int> ix = g.coords(c);
  const int d = g.dim();
  std::vector<int> off(d, -r);
  while (true) {
    std::vector<int> jx(d);
    bool ok = true;
    for (int a = 0; a < d && ok; ++a) {
      jx[a] = ix[a] + off[a];
      ok = jx[a] >= 0 && jx[a] < g.axes()[a].cells;
    }
    if (ok) {
      PointId q = g.id(jx);
      if (!g.masked(q)) out.add(q);
    }
    int a = 0;
    while (a < d && off[a] == r) off[a++] = -r;
    if (a == d) break;
    ++off[a];
  }
  return out;
}

inline PointSet dilate_set(const Grid& g, const PointSet& s, int r) {
  PointSet out(g.cell_count());
  for (PointId c : s.members()) out = out | grid_ball(g, c, r);
  return out;
}

inline Relation dilate_targets(const Grid& g, const Relation& rel, int r) {
  Relation out(rel.size());
  Relation inv = rel.inverse();
  for (int v = 0; v < rel.size(); ++v) {
    PointSet srcs = inv.image(v);
    if (srcs.empty()) continue;
    PointSet ball = grid_ball(g, v, r);
    for (PointId u : srcs.members())
      for (PointId w : ball.members()) out.add(u, w);
  }
  return out;
}

// Symmetric Chebyshev Hausdorff distance in cell units; 0 for two empty sets,
// INT_MAX when exactly one side is empty.
inline int hausdorff_cells(const Grid& g, const PointSet& a, const PointSet& b) {
  if (a.empty() && b.empty()) return 0;
  if (a.empty() || b.empty()) return std::numeric_limits<int>::max();
  auto one_way = [&](const PointSet& from, const PointSet& to) {
    int worst = 0;
    for (PointId p : from.members()) {
      std::vector<int> pi = g.coords(p);
      int best = std::numeric_limits<int>::max();
      for (PointId q : to.members()) {
        std::vector<int> qi = g.coords(q);
        int d = 0;
        for (int x = 0; x < g.dim(); ++x) d = std::max(d, std::abs(pi[x] - qi[x]));
        best = std::min(best, d);
      }
      worst = std::max(worst, best);
    }
    return worst;
  };
  return std::max(one_way(a, b), one_way(b, a));
}

// Entourage family from the grid geometry: cells within k widths of each
// other, one relation per radius, given largest first.
inline EntourageFamily grid_entourages(const Grid& g, std::vector<int> radii = {4, 2, 1}) {
  if (radii.empty()) throw std::invalid_argument("grid_entourages: empty radius list");
  std::vector<Relation> vs;
  for (size_t i = 0; i < radii.size(); ++i) {
    if (radii[i] < 1 || (i > 0 && radii[i] >= radii[i - 1]))
      throw std::invalid_argument("grid_entourages: radii must be positive and strictly decreasing");
    Relation v(g.cell_count());
    for (int c = 0; c < g.cell_count(); ++c) {
      v.add(c, c);
      if (g.masked(c)) continue;
      for (PointId q : grid_ball(g, c, radii[i]).members()) v.add(c, q), v.add(q, c);
    }
    vs.push_back(std::move(v));
  }
  return make_family(std::move(vs));
}

// ---------------------------------------------------------------------------
// Flow models

enum class FlowKind { kClosedForm, kOde, kCombinatorial };

using FlowMap = std::function<std::vector<double>(double, const std::vector<double>&)>;
using VectorField = std::function<std::vector<double>(const std::vector<double>&)>;
using PointRemap = std::function<std::vector<double>(const std::vector<double>&)>;

struct FlowModel {
  FlowKind kind = FlowKind::kOde;
  Grid grid;
  FlowMap phi;        // closed form, forward time
  FlowMap phi_back;   // closed form, reverse time; needed to reverse the model
  VectorField field;  // right-hand side for integrated models
  PointRemap wrap;    // applied after every step; encodes gluing identifications
  double step = 0.0;  // overrides the sampling net spacing when positive
  bool reversible = false;
  Relation base = Relation(0);  // combinatorial: cascade on the base space
  int slices = 0;               // combinatorial: quanta per unit time
};

inline FlowModel closed_form_flow(Grid g, FlowMap phi, bool reversible, FlowMap phi_back = {}) {
  FlowModel f;
  f.kind = FlowKind::kClosedForm;
  f.grid = std::move(g);
  f.phi = std::move(phi);
  f.phi_back = std::move(phi_back);
  f.reversible = reversible;
  return f;
}

inline FlowModel ode_flow(Grid g, VectorField field, bool reversible, PointRemap wrap = {},
                          double step = 0.0) {
  FlowModel f;
  f.kind = FlowKind::kOde;
  f.grid = std::move(g);
  f.field = std::move(field);
  f.wrap = std::move(wrap);
  f.step = step;
  f.reversible = reversible;
  return f;
}

namespace detail {

inline int row_count(const Relation& r, int u) {
  int c = 0;
  for (int w = 0; w < r.words_per_row(); ++w) c += __builtin_popcountll(r.row(u)[w]);
  return c;
}

inline bool is_permutation(const Relation& r) {
  Relation inv = r.inverse();
  for (int u = 0; u < r.size(); ++u)
    if (row_count(r, u) != 1 || row_count(inv, u) != 1) return false;
  return true;
}

}  // namespace detail

// Suspension of a cascade: m copies of the base space indexed (x, k) -> x*m+k,
// the quantum advances the slice and applies the cascade once per revolution.
// Rows of the cascade hold at most one point; a missing image ends the
// trajectory at the window edge.
inline FlowModel suspend(const Relation& cascade, int m) {
  if (m < 1) throw std::invalid_argument("suspend: need at least one slice");
  for (int x = 0; x < cascade.size(); ++x)
    if (detail::row_count(cascade, x) > 1)
      throw std::invalid_argument("suspend: cascade is not a function");
  FlowModel f;
  f.kind = FlowKind::kCombinatorial;
  f.base = cascade;
  f.slices = m;
  f.reversible = detail::is_permutation(cascade);
  return f;
}

inline Relation suspension_quantum(const FlowModel& flow) {
  if (flow.kind != FlowKind::kCombinatorial)
    throw std::invalid_argument("suspension_quantum: not a combinatorial model");
  const int nb = flow.base.size(), m = flow.slices;
  Relation q(nb * m);
  for (int x = 0; x < nb; ++x) {
    for (int k = 0; k + 1 < m; ++k) q.add(x * m + k, x * m + k + 1);
    for (PointId y : flow.base.image(x).members()) q.add(x * m + m - 1, y * m);
  }
  return q;
}

inline Relation relation_power(const Relation& r, int k) {
  if (k < 0) throw std::invalid_argument("relation_power: negative power");
  Relation acc = Relation::identity(r.size());
  for (int i = 0; i < k; ++i) acc = compose(r, acc);
  return acc;
}

inline FlowModel reversed(const FlowModel& flow) {
  if (!flow.reversible) throw std::invalid_argument("reversed: flow is not reversible");
  FlowModel back = flow;
  switch (flow.kind) {
    case FlowKind::kOde: {
      VectorField f = flow.field;
      back.field = [f](const std::vector<double>& x) {
        std::vector<double> v = f(x);
        for (double& c : v) c = -c;
        return v;
      };
      return back;
    }
    case FlowKind::kClosedForm:
      if (!flow.phi_back) throw std::invalid_argument("reversed: closed form model lacks a reverse map");
      back.phi = flow.phi_back;
      back.phi_back = flow.phi;
      return back;
    case FlowKind::kCombinatorial:
      throw std::invalid_argument("reversed: combinatorial models reverse through their base map");
  }
  throw std::logic_error("reversed: unknown flow kind");
}

// ---------------------------------------------------------------------------
// Trajectory sampling

namespace detail {

inline std::vector<double> rk4_step(const VectorField& f, const std::vector<double>& x, double dt) {
  const size_t d = x.size();
  std::vector<double> k1 = f(x), p(d);
  for (size_t i = 0; i < d; ++i) p[i] = x[i] + 0.5 * dt * k1[i];
  std::vector<double> k2 = f(p);
  for (size_t i = 0; i < d; ++i) p[i] = x[i] + 0.5 * dt * k2[i];
  std::vector<double> k3 = f(p);
  for (size_t i = 0; i < d; ++i) p[i] = x[i] + dt * k3[i];
  std::vector<double> k4 = f(p);
  std::vector<double> y(d);
  for (size_t i = 0; i < d; ++i)
    y[i] = x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  return y;
}

inline std::vector<double> advance(const FlowModel& flow, const std::vector<double>& x, double dt) {
  std::vector<double> y;
  if (flow.kind == FlowKind::kClosedForm)
    y = flow.phi(dt, x);
  else if (flow.kind == FlowKind::kOde)
    y = rk4_step(flow.field, x, dt);
  else
    throw std::invalid_argument("advance: combinatorial models do not integrate");
  if (flow.wrap) y = flow.wrap(y);
  return y;
}

// Largest per-axis speed over the unmasked sample points, used to pick a net
// spacing that moves at most half a cell per step.
inline double speed_bound(const FlowModel& flow) {
  const Grid& g = flow.grid;
  double bound = 0.0;
  for (PointId c = 0; c < g.cell_count(); ++c) {
    if (g.masked(c)) continue;
    for (const auto& p : g.sample_points(c)) {
      std::vector<double> v;
      if (flow.kind == FlowKind::kOde) {
        v = flow.field(p);
      } else {
        const double tau = 0.01;
        std::vector<double> q = flow.phi(tau, p);
        v.resize(p.size());
        for (size_t i = 0; i < p.size(); ++i) v[i] = (q[i] - p[i]) / tau;
      }
      for (double a : v)
        if (std::isfinite(a)) bound = std::max(bound, std::abs(a));
    }
  }
  return bound;
}

inline double net_spacing(const FlowModel& flow) {
  if (flow.step > 0.0) return flow.step;
  double b = speed_bound(flow);
  if (b < 1e-9) return 0.25;
  return std::min(0.25, flow.grid.min_width() / (2.0 * b));
}

// Event-time walk of one trajectory: visit(t, cell) at t = 0, at every
// absolute multiple of dt up to t_end, and at the extra times.  Consecutive
// events are at most dt apart, so each advance stays inside one step of the
// sampling net.  Returns the escape time when the point leaves the window or
// enters a masked cell, nullopt otherwise.
inline std::optional<double> trace(const FlowModel& flow, std::vector<double> x, double t_end,
                                   double dt, std::vector<double> extra,
                                   const std::function<void(double, PointId)>& visit) {
  std::vector<double> events;
  for (double t = dt; t < t_end; t += dt) events.push_back(t);
  for (double t : extra)
    if (t > 0.0 && t <= t_end) events.push_back(t);
  events.push_back(t_end);
  std::sort(events.begin(), events.end());
  events.erase(std::unique(events.begin(), events.end(),
                           [](double a, double b) { return std::abs(a - b) < 1e-12; }),
               events.end());

  auto cell = flow.grid.locate(x);
  if (!cell || flow.grid.masked(*cell)) return 0.0;
  visit(0.0, *cell);
  double t = 0.0;
  for (double u : events) {
    x = advance(flow, x, u - t);
    t = u;
    cell = flow.grid.locate(x);
    if (!cell || flow.grid.masked(*cell)) return t;
    visit(t, *cell);
  }
  return std::nullopt;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Relations from flows

// Outer approximation of the union of the time-t images over t in [k_lo,
// k_hi]: every sample point of every cell is walked along the flow, the cells
// met inside the interval are collected and fattened by one cell.  Monotone
// in the interval: the recording times are absolute net multiples plus the
// endpoints, and the fattening covers the at-most-half-cell slack between a
// subinterval endpoint and its nearest net time.
inline Relation flow_relation(const FlowModel& flow, double k_lo, double k_hi,
                              PointSet* escape_out = nullptr) {
  if (!(k_lo >= 0.0) || !(k_hi >= k_lo)) throw std::invalid_argument("flow_relation: bad interval");
  if (flow.kind == FlowKind::kCombinatorial) {
    Relation q = suspension_quantum(flow);
    const int m = flow.slices;
    int q_lo = static_cast<int>(std::ceil(k_lo * m - 1e-9));
    int q_hi = static_cast<int>(std::floor(k_hi * m + 1e-9));
    Relation out(q.size());
    Relation pw = relation_power(q, std::max(0, q_lo));
    for (int k = std::max(0, q_lo); k <= q_hi; ++k) {
      out = out | pw;
      pw = compose(q, pw);
    }
    if (escape_out && q_hi >= 1) {
      Relation last = relation_power(q, q_hi);
      for (int c = 0; c < q.size(); ++c)
        if (last.image(c).empty()) escape_out->add(c);
    }
    return out;
  }

  const Grid& g = flow.grid;
  const int n = g.cell_count();
  Relation out(n);
  const double dt = detail::net_spacing(flow);
  for (PointId c = 0; c < n; ++c) {
    if (g.masked(c)) continue;
    PointSet raw(n);
    bool escaped = false;
    for (const auto& p : g.sample_points(c)) {
      auto esc = detail::trace(flow, p, k_hi, dt, {k_lo, k_hi}, [&](double t, PointId cell) {
        if (t >= k_lo - 1e-12) raw.add(cell);
      });
      if (esc) escaped = true;
    }
    for (PointId v : raw.members())
      for (PointId w : grid_ball(g, v, 1).members()) out.add(c, w);
    if (escaped && escape_out) escape_out->add(c);
  }
  return out;
}

struct FlowRelations {
  Grid grid;  // zero axes for combinatorial models
  int n = 0;
  bool reversible = false;
  bool combinatorial = false;
  Relation phi_i{0};  // times [0,1]
  Relation phi_j{0};  // times [1,2], built from its own samples
  Relation f1{0};     // time one
  int fatten = 0;
  PointSet masked{0};
  PointSet escape_out{0};
  PointSet escape_in{0};
};

inline FlowRelations build_flow_relations(const FlowModel& flow) {
  FlowRelations fr;
  fr.reversible = flow.reversible;

  if (flow.kind == FlowKind::kCombinatorial) {
    Relation q = suspension_quantum(flow);
    const int m = flow.slices, n = q.size();
    fr.combinatorial = true;
    fr.n = n;
    fr.masked = PointSet(n);
    fr.escape_out = PointSet(n);
    fr.escape_in = PointSet(n);
    fr.phi_i = flow_relation(flow, 0.0, 1.0);
    fr.phi_j = flow_relation(flow, 1.0, 2.0);
    fr.f1 = relation_power(q, m);
    Relation deep = relation_power(q, 2 * m);
    Relation deep_inv = deep.inverse();
    for (int c = 0; c < n; ++c) {
      if (deep.image(c).empty()) fr.escape_out.add(c);
      if (deep_inv.image(c).empty()) fr.escape_in.add(c);
    }
    return fr;
  }

  const Grid& g = flow.grid;
  const int n = g.cell_count();
  fr.grid = g;
  fr.n = n;
  fr.fatten = 1;
  fr.masked = g.mask();
  fr.phi_i = Relation(n);
  fr.phi_j = Relation(n);
  fr.f1 = Relation(n);
  fr.escape_out = PointSet(n);
  fr.escape_in = PointSet(n);

  const double dt = detail::net_spacing(flow);
  for (PointId c = 0; c < n; ++c) {
    if (g.masked(c)) continue;
    PointSet raw_i(n), raw_j(n), raw_f(n);
    bool escaped = false;
    for (const auto& p : g.sample_points(c)) {
      auto esc = detail::trace(flow, p, 2.0, dt, {1.0, 2.0}, [&](double t, PointId cell) {
        if (t <= 1.0 + 1e-9) raw_i.add(cell);
        if (t >= 1.0 - 1e-9) raw_j.add(cell);
        if (std::abs(t - 1.0) <= 1e-9) raw_f.add(cell);
      });
      if (esc) escaped = true;
    }
    auto fatten_into = [&](Relation& rel, const PointSet& raw) {
      for (PointId v : raw.members())
        for (PointId w : grid_ball(g, v, 1).members()) rel.add(c, w);
    };
    fatten_into(fr.phi_i, raw_i);
    fatten_into(fr.phi_j, raw_j);
    fatten_into(fr.f1, raw_f);
    if (escaped) fr.escape_out.add(c);
  }

  const bool can_reverse =
      flow.reversible && (flow.kind == FlowKind::kOde ||
                          (flow.kind == FlowKind::kClosedForm && flow.phi_back));
  if (can_reverse) {
    FlowModel back = reversed(flow);
    const double bdt = detail::net_spacing(back);
    for (PointId c = 0; c < n; ++c) {
      if (g.masked(c)) continue;
      bool escaped = false;
      for (const auto& p : g.sample_points(c)) {
        auto esc = detail::trace(back, p, 2.0, bdt, {}, [](double, PointId) {});
        if (esc) escaped = true;
      }
      if (escaped) fr.escape_in.add(c);
    }
  }
  return fr;
}

// Functional cell map of the time-one flow, sampled at cell centers.  Sources
// whose center escapes before time one get an empty row and a mark.
inline Relation time_one_cellmap(const FlowModel& flow, PointSet* escape = nullptr) {
  if (flow.kind == FlowKind::kCombinatorial)
    return relation_power(suspension_quantum(flow), flow.slices);
  const Grid& g = flow.grid;
  Relation out(g.cell_count());
  const double dt = detail::net_spacing(flow);
  for (PointId c = 0; c < g.cell_count(); ++c) {
    if (g.masked(c)) continue;
    std::optional<PointId> at_one;
    auto esc = detail::trace(flow, g.center(c), 1.0, dt, {1.0}, [&](double t, PointId cell) {
      if (std::abs(t - 1.0) <= 1e-9) at_one = cell;
    });
    if (esc || !at_one) {
      if (escape) escape->add(c);
      continue;
    }
    out.add(c, *at_one);
  }
  return out;
}

// Time-one relation of the flow restricted to an invariant set given by
// sample points: the pair (cell of z, cell of the time-one image of z) for
// every sample z.  No fattening; exactness on genuinely invariant samples is
// the point.
inline Relation restricted_time_one(const FlowModel& flow,
                                    const std::vector<std::vector<double>>& samples,
                                    PointSet* domain = nullptr) {
  if (flow.kind == FlowKind::kCombinatorial)
    throw std::invalid_argument("restricted_time_one: needs a sampled model");
  const Grid& g = flow.grid;
  Relation out(g.cell_count());
  const double dt = detail::net_spacing(flow);
  for (const auto& z : samples) {
    auto src = g.locate(z);
    if (!src || g.masked(*src)) continue;
    std::optional<PointId> at_one;
    auto esc = detail::trace(flow, z, 1.0, dt, {1.0}, [&](double t, PointId cell) {
      if (std::abs(t - 1.0) <= 1e-9) at_one = cell;
    });
    if (esc || !at_one) continue;
    out.add(*src, *at_one);
    if (domain) domain->add(*src);
  }
  return out;
}

// Exact one-dimensional cell relation of a monotone map: each cell's image
// interval is covered by precisely the cells it meets.  Cells whose image
// sticks out of the window are flagged; the inside part keeps its edges.
inline Relation monotone_map_relation(const Grid& g, const std::function<double(double)>& f,
                                      PointSet* escape_out = nullptr) {
  if (g.dim() != 1) throw std::invalid_argument("monotone_map_relation: needs a one-axis grid");
  const GridAxis& ax = g.axes()[0];
  const double w = g.width(0), eps = w * 1e-9;
  Relation out(g.cell_count());
  for (PointId c = 0; c < g.cell_count(); ++c) {
    if (g.masked(c)) continue;
    double a = ax.lo + c * w + eps, b = ax.lo + (c + 1) * w - eps;
    double ya = f(a), yb = f(b);
    double lo = std::min(ya, yb), hi = std::max(ya, yb);
    if (lo < ax.lo || hi > ax.hi) {
      if (escape_out) escape_out->add(c);
    }
    double clo = std::max(lo, ax.lo), chi = std::min(hi, ax.hi);
    if (clo > chi) continue;
    auto ilo = g.locate({clo}), ihi = g.locate({chi});
    for (PointId q = *ilo; q <= *ihi; ++q)
      if (!g.masked(q)) out.add(c, q);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Recurrence operators

inline int symdiff_count(const Relation& a, const Relation& b) {
  return ((a - b) | (b - a)).pair_count();
}

// Orbit closure of the flow: the unit band joined with the orbit closure of
// the shifted band.
inline Relation g_phi(const FlowRelations& fr) { return fr.phi_i | g_relation(fr.phi_j); }

// Distance between the two routes to the flow orbit closure; zero on
// combinatorial models, reported rather than asserted on sampled ones.
inline int g_phi_mismatch(const FlowRelations& fr) {
  return symdiff_count(g_phi(fr), g_relation(fr.phi_i));
}

inline PointSet generalized_recurrent(const FlowRelations& fr) {
  return cyclic_set(g_relation(fr.phi_j));
}

// Second route to the recurrent set: x is recurrent when its time-one image
// can be led back to x through the flow orbit closure.
inline PointSet recurrent_via_timeone(const FlowRelations& fr) {
  Relation g = g_phi(fr);
  PointSet out(fr.n);
  for (int x = 0; x < fr.n; ++x)
    for (PointId y : fr.f1.image(x).members())
      if (g.has(y, x)) {
        out.add(x);
        break;
      }
  return out;
}

struct TimeOneAgreement {
  PointSet flow_side{0};  // recurrent cells of the shifted band
  PointSet map_side{0};   // recurrent cells of the time-one relation
  bool exact = false;
  int hausdorff = 0;       // cells; INT_MAX when exactly one side is empty
  int class_mismatch = 0;  // summed difference of the sampled two-sided classes
};

// Compares the recurrent set of the shifted band with that of the time-one
// relation, and samples the class identity: the two-sided class through the
// flow equals the unit-band spread of the two-sided time-one class.
inline TimeOneAgreement time_one_agreement(const FlowRelations& fr) {
  if (!fr.reversible) throw std::invalid_argument("time_one_agreement: flow is not reversible");
  Relation gj = g_relation(fr.phi_j);
  Relation gf = g_relation(fr.f1);
  TimeOneAgreement r;
  r.flow_side = cyclic_set(gj);
  r.map_side = cyclic_set(gf);
  r.exact = r.flow_side == r.map_side;
  if (r.exact)
    r.hausdorff = 0;
  else if (fr.grid.dim() > 0)
    r.hausdorff = hausdorff_cells(fr.grid, r.flow_side, r.map_side);
  else
    r.hausdorff = std::numeric_limits<int>::max();

  Relation gj_inv = gj.inverse();
  Relation gf_inv = gf.inverse();
  std::vector<PointId> mem = r.flow_side.members();
  const int stride = std::max<int>(1, static_cast<int>(mem.size()) / 24);
  for (size_t i = 0; i < mem.size(); i += stride) {
    PointId x = mem[i];
    PointSet lhs = gj.image(x) & gj_inv.image(x);
    PointSet cls = gf.image(x) & gf_inv.image(x);
    PointSet rhs = fr.phi_i.image(cls);
    r.class_mismatch += ((lhs - rhs) | (rhs - lhs)).count();
  }
  return r;
}

// limsup of the sampled flow at late times: the time-one tail spread by the
// unit band.
inline Relation omega_phi(const FlowRelations& fr) {
  return compose(fr.phi_i, omega_relation(fr.f1));
}

struct ChainFlowReport {
  Relation c_tilde{0};     // unit band joined with the chain relation of the shifted band
  Relation tail_left{0};   // limsup of that chain relation
  Relation tail_right{0};  // stabilized intersection of the power chain relations
  int tail_mismatch = 0;
};

// Chain analogue of the flow orbit closure, with the tail identity computed
// by two independent routes: the limsup of the chain relation against the
// intersection of the chain relations of the powers.
inline ChainFlowReport chain_flow(const FlowRelations& fr, const EntourageFamily& fam) {
  Relation cj = chain_relation(fr.phi_j, fam);
  ChainFlowReport r;
  r.c_tilde = fr.phi_i | cj;
  r.tail_left = omega_relation(cj);
  Relation acc = cj;
  Relation pw = fr.phi_j;
  for (int k = 2; k <= 64; ++k) {
    pw = compose(pw, fr.phi_j);
    Relation next = acc & chain_relation(pw, fam);
    if (next == acc) break;
    acc = next;
  }
  r.tail_right = acc;
  r.tail_mismatch = symdiff_count(r.tail_left, r.tail_right);
  return r;
}

// ---------------------------------------------------------------------------
// Raw bands: fatten-free traces with a stay set

namespace detail {

struct RawBands {
  Relation phi_i{0};
  Relation phi_j{0};
  Relation f1{0};
};

inline Relation filter_edges(const Relation& r, const PointSet& keep) {
  Relation out(r.size());
  for (auto& [u, v] : r.pairs())
    if (keep.contains(u) && keep.contains(v)) out.add(u, v);
  return out;
}

// Fatten-free rebuild of the three bands with trajectories truncated on
// leaving `stay`.  This is the discrete restriction of the flow to the cells
// of `stay`: a single sampled edge can pass through many cells, so filtering
// edges after the fact would miss the passage.
inline RawBands trace_bands(const FlowModel& flow, const PointSet& stay) {
  if (flow.kind == FlowKind::kCombinatorial) {
    Relation q = filter_edges(suspension_quantum(flow), stay);
    const int m = flow.slices;
    RawBands rb{Relation(q.size()), Relation(q.size()), Relation(q.size())};
    Relation pw = Relation::identity(q.size());
    for (int k = 0; k <= 2 * m; ++k) {
      if (k <= m) rb.phi_i = rb.phi_i | pw;
      if (k >= m) rb.phi_j = rb.phi_j | pw;
      if (k == m) rb.f1 = pw;
      pw = compose(q, pw);
    }
    return rb;
  }
  const Grid& g = flow.grid;
  const int n = g.cell_count();
  RawBands rb{Relation(n), Relation(n), Relation(n)};
  const double dt = net_spacing(flow);
  for (PointId c = 0; c < n; ++c) {
    if (g.masked(c) || !stay.contains(c)) continue;
    for (const auto& p : g.sample_points(c)) {
      bool alive = true;
      trace(flow, p, 2.0, dt, {1.0, 2.0}, [&](double t, PointId cell) {
        if (!alive) return;
        if (!stay.contains(cell)) {
          alive = false;
          return;
        }
        if (t <= 1.0 + 1e-9) rb.phi_i.add(c, cell);
        if (t >= 1.0 - 1e-9) rb.phi_j.add(c, cell);
        if (std::abs(t - 1.0) <= 1e-9) rb.f1.add(c, cell);
      });
    }
  }
  return rb;
}

}  // namespace detail

// Cells that never return: the diagonal of the late-time relation is the
// nonwandering set, so a cell wanders when the unit-interval spread of its
// time-one tail misses it.  Built from fatten-free traces and fattened once
// at the end: orbit-based proxies fail here because every trajectory passes
// through its own neighbourhood on the way out, and per-step fattening
// compounds through closures into sideways drift no trajectory has.
inline PointSet wandering_points(const FlowModel& flow, const FlowRelations& fr) {
  detail::RawBands rb = detail::trace_bands(flow, fr.masked.complement());
  Relation late = compose(rb.phi_i, omega_relation(rb.f1));
  if (!fr.combinatorial) late = dilate_targets(fr.grid, late, 1);
  PointSet nonwandering(fr.n);
  for (int x = 0; x < fr.n; ++x)
    if (late.has(x, x)) nonwandering.add(x);
  return fr.masked.complement() - nonwandering;
}

// The same-slice cut of the suspension orbit closure equals the base orbit
// closure with the diagonal, copied into every slice; both sides computed
// independently.
inline bool suspension_slice_identity(const FlowModel& flow) {
  if (flow.kind != FlowKind::kCombinatorial)
    throw std::invalid_argument("suspension_slice_identity: needs a combinatorial model");
  FlowRelations fr = build_flow_relations(flow);
  Relation g = g_relation(fr.phi_i);
  Relation gb = g_relation(flow.base);
  const int nb = flow.base.size(), m = flow.slices;
  for (int x = 0; x < nb; ++x)
    for (int y = 0; y < nb; ++y)
      for (int k = 0; k < m; ++k) {
        bool lhs = g.has(x * m + k, y * m + k);
        bool rhs = x == y || gb.has(x, y);
        if (lhs != rhs) return false;
      }
  return true;
}

// ---------------------------------------------------------------------------
// Parallelizability

enum class ParallelVerdict { kConsistent, kNonemptyLimit, kOrbitNotClosed };

inline std::string to_string(ParallelVerdict v) {
  switch (v) {
    case ParallelVerdict::kConsistent: return "parallelizable-consistent";
    case ParallelVerdict::kNonemptyLimit: return "obstruction: nonempty omega";
    case ParallelVerdict::kOrbitNotClosed: return "obstruction: orbit-not-closed-at-window";
  }
  return "?";
}

struct ParallelReport {
  ParallelVerdict verdict = ParallelVerdict::kConsistent;
  PointSet ring{0};       // escape cells plus the collar around cut-out cells
  PointSet witnesses{0};  // recurrent cells, or endpoints of pairs needing the ring
};

// Two-stage verdict.  First: no recurrence among the core cells, away from
// escapes and a two-cell collar around the cut-out set, using a fatten-free
// restriction of the shifted band.  The collar width matches the tolerance
// band of the pipeline: cells bordering a cut-out region hold points whose
// residence time blows up, and their self-records are window artifacts, not
// recurrence.  Second: with the core clean, any nonwandering cell got its
// returning evidence through the ring, which is the window shadow of an
// orbit-closure failure.
inline ParallelReport parallelizable_check(const FlowModel& flow, const FlowRelations& fr) {
  if (!fr.reversible) throw std::invalid_argument("parallelizable_check: flow is not reversible");
  ParallelReport rep;
  PointSet interior = fr.masked.complement();
  rep.ring = fr.escape_out | fr.escape_in | fr.masked;
  if (!fr.combinatorial) rep.ring = rep.ring | dilate_set(fr.grid, fr.masked, 2);
  PointSet core = interior - rep.ring;

  detail::RawBands core_bands = detail::trace_bands(flow, core);
  PointSet rec = cyclic_set(orbit_relation(core_bands.phi_j));
  if (!rec.empty()) {
    rep.verdict = ParallelVerdict::kNonemptyLimit;
    rep.witnesses = rec;
    return rep;
  }

  PointSet nonwandering = interior - wandering_points(flow, fr);
  if (!nonwandering.empty()) {
    rep.verdict = ParallelVerdict::kOrbitNotClosed;
    rep.witnesses = nonwandering;
    return rep;
  }
  rep.witnesses = PointSet(fr.n);
  return rep;
}

struct SectionReport {
  PointSet section{0};    // cells holding a zero crossing of the averaged level
  PointSet covered{0};    // cells whose trajectory meets the section exactly once
  PointSet uncovered{0};  // non-escaping cells that never meet it inside the window
  PointSet multi{0};      // trajectories meeting it at two separated parameters
  bool clean() const { return uncovered.empty() && multi.empty(); }
};

namespace detail {

// Unit-interval average of the level along the trajectory from x; nullopt
// when the trajectory leaves the window before the average is complete.
inline std::optional<double> level_average(const FlowModel& flow, const std::vector<double>& x,
                                           const std::vector<double>& level, double dt) {
  double acc = 0.0, prev_t = 0.0;
  double prev_v = 0.0;
  bool first = true;
  bool bad = false;
  auto esc = trace(flow, x, 1.0, dt, {1.0}, [&](double t, PointId cell) {
    double v = level[cell];
    if (first) {
      prev_v = v;
      first = false;
      return;
    }
    acc += (t - prev_t) * 0.5 * (prev_v + v);
    prev_t = t;
    prev_v = v;
  });
  if (esc || first || bad) return std::nullopt;
  return acc;
}

}  // namespace detail

// Extracts a section from per-cell Lyapunov values: the averaged level along
// the unit interval is strictly increasing along trajectories once the
// time-one increment of the raw level is positive, so each trajectory meets
// its zero set at one parameter.  The section is the set of cells holding
// those crossings; coverage tracks which cells' trajectories reach it.
inline SectionReport build_section(const FlowModel& flow, const std::vector<double>& level) {
  if (flow.kind == FlowKind::kCombinatorial)
    throw std::invalid_argument("build_section: needs a sampled model");
  const Grid& g = flow.grid;
  const int n = g.cell_count();
  if (static_cast<int>(level.size()) != n)
    throw std::invalid_argument("build_section: one level value per cell");

  PointSet escape_fwd(n);
  Relation center_map = time_one_cellmap(flow, &escape_fwd);
  for (PointId c = 0; c < n; ++c) {
    if (g.masked(c) || escape_fwd.contains(c)) continue;
    for (PointId d : center_map.image(c).members())
      if (!(level[d] - level[c] > 0.0))
        throw std::invalid_argument("build_section: level not increasing at cell " +
                                    std::to_string(c));
  }

  FlowModel back = reversed(flow);
  const double dt = detail::net_spacing(flow);
  double horizon = 0.0;
  for (int a = 0; a < g.dim(); ++a) horizon += g.axes()[a].hi - g.axes()[a].lo;
  double vmax = std::max(detail::speed_bound(flow), 1e-9);
  horizon = std::min(256.0, 4.0 + 2.0 * horizon / vmax);

  SectionReport rep{PointSet(n), PointSet(n), PointSet(n), PointSet(n)};
  const double ds = std::max(dt, 0.125 * g.min_width() / vmax);

  for (PointId c = 0; c < n; ++c) {
    if (g.masked(c)) continue;
    std::vector<double> z = g.center(c);
    auto k0 = detail::level_average(flow, z, level, dt);
    if (!k0) {
      if (!escape_fwd.contains(c)) rep.uncovered.add(c);
      continue;
    }
    const FlowModel& dir = *k0 > 0.0 ? back : flow;
    double sign0 = *k0;
    if (sign0 == 0.0) {
      rep.section.add(c);
      rep.covered.add(c);
      continue;
    }
    std::vector<double> x = z;
    double s = 0.0;
    bool found = false;
    int crossings = 0;
    std::vector<double> bracket_at = x;
    while (s < horizon) {
      std::vector<double> nx = detail::advance(dir, x, ds);
      auto cell = g.locate(nx);
      if (!cell || g.masked(*cell)) break;
      auto k = detail::level_average(flow, nx, level, dt);
      if (!k) break;
      if ((sign0 > 0.0 && *k <= 0.0) || (sign0 < 0.0 && *k >= 0.0)) {
        ++crossings;
        if (!found) {
          bracket_at = x;
          found = true;
        }
        sign0 = -sign0;
      }
      x = nx;
      s += ds;
    }
    if (!found) {
      if (!escape_fwd.contains(c)) rep.uncovered.add(c);
      continue;
    }
    if (crossings > 1) rep.multi.add(c);
    // bisect the bracketing step down to a fraction of a cell transit
    std::vector<double> lo_pt = bracket_at;
    double span = ds;
    for (int it = 0; it < 30 && span * vmax > 0.05 * g.min_width(); ++it) {
      std::vector<double> mid = detail::advance(dir, lo_pt, span * 0.5);
      auto k = detail::level_average(flow, mid, level, dt);
      if (!k) break;
      bool before = (*k0 > 0.0) ? *k > 0.0 : *k < 0.0;
      if (before) lo_pt = mid;
      span *= 0.5;
    }
    auto cell = g.locate(lo_pt);
    if (cell && !g.masked(*cell)) {
      rep.section.add(*cell);
      rep.covered.add(c);
    } else if (!escape_fwd.contains(c)) {
      rep.uncovered.add(c);
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Reporting

inline nlohmann::json to_json(const Grid& g) {
  nlohmann::json axes = nlohmann::json::array();
  for (const GridAxis& a : g.axes())
    axes.push_back({{"lo", a.lo}, {"hi", a.hi}, {"cells", a.cells}});
  return {{"axes", axes}, {"masked", g.mask().count()}};
}

inline nlohmann::json flow_provenance(const FlowRelations& fr) {
  return {{"grid", to_json(fr.grid)},
          {"cells", fr.n},
          {"combinatorial", fr.combinatorial},
          {"reversible", fr.reversible},
          {"fatten", fr.fatten},
          {"unit_band_pairs", fr.phi_i.pair_count()},
          {"shift_band_pairs", fr.phi_j.pair_count()},
          {"time_one_pairs", fr.f1.pair_count()},
          {"escape_out", fr.escape_out.count()},
          {"escape_in", fr.escape_in.count()}};
}

}  // namespace reckit
