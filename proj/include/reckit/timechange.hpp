#pragma once

// Time changes of sampled flows.  A nonnegative speed multiplier V rescales a
// flow through the solver tbar (tau equals the integral of 1/V along the
// orbit up to tbar); the reparametrized flow psi follows the same curves at a
// different pace and freezes exactly where V vanishes.  The module provides
// the first-contact distance between cell sets, construction of banded
// multipliers that vanish on a prescribed set and optionally grow toward the
// window boundary, the solver with its cocycle identity, and a window
// compactification in which the slowed flow leaves the added point fixed.

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "reckit/compactify.hpp"
#include "reckit/flowdisc.hpp"

namespace reckit {

using PointFn = std::function<double(const std::vector<double>&)>;
using PointPred = std::function<bool(const std::vector<double>&)>;

// Nonnegative speed multiplier with an explicit zero-set membership test.
// The zero set is where the reparametrized flow freezes; membership must be
// decidable exactly, so it travels as a predicate next to the values.
struct RegularFn {
  PointFn value;
  PointPred in_zero;
  bool proper = false;        // grows toward the window boundary
  double boundary_min = 0.0;  // value promised on the outermost cell ring
  std::string provenance = "user";
  std::vector<double> epsilons;  // band radii recorded by build_regular_v
};

inline RegularFn make_regular(PointFn v, PointPred zero = {}) {
  RegularFn fn;
  fn.value = std::move(v);
  if (zero) {
    fn.in_zero = std::move(zero);
  } else {
    PointFn vv = fn.value;
    fn.in_zero = [vv](const std::vector<double>& p) { return !(vv(p) > 0.0); };
  }
  return fn;
}

struct TimeChange {
  FlowModel flow;
  RegularFn v;
  double quad_rel = 1e-8;   // per-segment relative error of the quadrature
  double root_tol = 1e-9;   // bisection width in t
  double horizon = 1e4;     // give up past this much flow time
  double quad_step = 0.0;   // segment length; 0 picks the sampling net spacing
};

namespace detail {

inline void require_point_model(const FlowModel& flow, const char* who) {
  if (flow.kind == FlowKind::kCombinatorial)
    throw std::invalid_argument(std::string(who) + ": combinatorial models have no point orbits");
}

// phi(t, x) for point arguments; negative times run the reversed model.
inline std::vector<double> flow_point(const FlowModel& flow, std::vector<double> x, double t) {
  require_point_model(flow, "flow_point");
  if (t == 0.0) return x;
  if (t < 0.0) return flow_point(reversed(flow), std::move(x), -t);
  if (flow.kind == FlowKind::kClosedForm) return advance(flow, x, t);
  const double cap = net_spacing(flow);
  const int steps = std::max(1, static_cast<int>(std::ceil(t / cap)));
  const double dt = t / steps;
  for (int i = 0; i < steps; ++i) x = advance(flow, x, dt);
  return x;
}

// Reciprocal integrand with a ceiling: an exact zero of V reads as an
// immediately divergent contribution instead of a NaN.
constexpr double kDivergenceCeiling = 1e18;

inline double inv_v(const RegularFn& v, const std::vector<double>& p) {
  const double val = v.value(p);
  if (!(val > 0.0)) return kDivergenceCeiling;
  return std::min(1.0 / val, kDivergenceCeiling);
}

struct Segment {
  double integral = 0.0;
  std::vector<double> endpoint;
};

// Integral of 1/V over [0, h] along the orbit of p, by trapezoid refinement:
// the node count doubles until two estimates agree relatively or the substep
// reaches the floor.
inline Segment inv_v_segment(const FlowModel& flow, const RegularFn& v,
                             const std::vector<double>& p, double h, double rel,
                             double floor_step) {
  Segment out{0.0, p};
  if (h <= 0.0) return out;
  double prev = 0.0;
  for (int level = 0;; ++level) {
    const int n = 1 << level;
    const double sub = h / n;
    std::vector<double> q = p;
    double acc = 0.5 * inv_v(v, q);
    for (int i = 0; i + 1 < n; ++i) {
      q = advance(flow, q, sub);
      acc += inv_v(v, q);
    }
    q = advance(flow, q, sub);
    acc += 0.5 * inv_v(v, q);
    out.integral = acc * sub;
    out.endpoint = std::move(q);
    if (level > 0 && std::abs(out.integral - prev) <= rel * std::max(std::abs(out.integral), 1e-12))
      break;
    if (sub <= floor_step || level >= 22) break;
    prev = out.integral;
  }
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// First-contact distance

// Largest sweep length s in [0,1] such that neither set's forward sweep
// phi([0,s], .) touches the other, found on a coarse net and sharpened by
// bisection.  The cap 1.0 is part of the definition; a motionless flow
// returns it exactly.
inline double phi_distance(const PointSet& a, const PointSet& b, const FlowModel& flow,
                           double tol = 1e-6) {
  detail::require_point_model(flow, "phi_distance");
  const Grid& g = flow.grid;
  if (a.universe_size() != g.cell_count() || b.universe_size() != g.cell_count())
    throw std::invalid_argument("phi_distance: set size mismatch");
  if (a.empty() || b.empty()) throw std::invalid_argument("phi_distance: empty set");
  if (dilate_set(g, a, 1).intersects(b))
    throw std::invalid_argument("phi_distance: closures intersect");

  auto gather = [&](const PointSet& s) {
    std::vector<std::vector<double>> pts;
    for (PointId c : s.members())
      for (auto& p : g.sample_points(c)) pts.push_back(p);
    return pts;
  };
  const std::vector<std::vector<double>> pa = gather(a), pb = gather(b);
  const double step = detail::net_spacing(flow);

  auto contact = [&](double s) {
    auto sweep_hits = [&](const std::vector<std::vector<double>>& pts, const PointSet& other) {
      const int steps = std::max(1, static_cast<int>(std::ceil(s / step)));
      const double dt = s / steps;
      for (const auto& p0 : pts) {
        std::vector<double> q = p0;
        for (int i = 0; i < steps; ++i) {
          q = detail::advance(flow, q, dt);
          if (auto c = g.locate(q); c && other.contains(*c)) return true;
        }
      }
      return false;
    };
    return sweep_hits(pa, b) || sweep_hits(pb, a);
  };

  const int net = 16;
  int first = -1;
  for (int k = 1; k <= net; ++k)
    if (contact(static_cast<double>(k) / net)) {
      first = k;
      break;
    }
  if (first < 0) return 1.0;
  double lo = static_cast<double>(first - 1) / net, hi = static_cast<double>(first) / net;
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    (contact(mid) ? hi : lo) = mid;
  }
  return 0.5 * (lo + hi);
}

// ---------------------------------------------------------------------------
// Zero hitting time and the divergence probe

// First time V vanishes along the forward orbit of x, zero exactly on the
// zero set, or nullopt when V stays positive up to the horizon.  The sign is
// sampled at the net spacing and the crossing sharpened by bisection.
inline std::optional<double> t_star(const FlowModel& flow, const RegularFn& v,
                                    const std::vector<double>& x, double horizon = 100.0,
                                    double tol = 1e-12) {
  detail::require_point_model(flow, "t_star");
  if (v.in_zero(x) || !(v.value(x) > 0.0)) return 0.0;
  auto positive = [&](const std::vector<double>& p) { return !v.in_zero(p) && v.value(p) > 0.0; };
  const double step = detail::net_spacing(flow);
  double s = 0.0;
  std::vector<double> p = x;
  while (s < horizon) {
    const double h = std::min(step, horizon - s);
    std::vector<double> q = detail::advance(flow, p, h);
    if (!positive(q)) {
      double lo = 0.0, hi = h;
      while (hi - lo > tol) {
        const double mid = 0.5 * (lo + hi);
        (positive(detail::advance(flow, p, mid)) ? lo : hi) = mid;
      }
      return s + 0.5 * (lo + hi);
    }
    p = std::move(q);
    s += h;
  }
  return std::nullopt;
}

struct ProbeResult {
  bool passed = false;
  double partial = 0.0;      // accumulated integral at stop time
  double tail_growth = 0.0;  // growth over the last tenth of the sweep
  std::string label() const { return passed ? "regular (proxy)" : "not-regular (proxy)"; }
};

// Divergence proxy for the reciprocal-speed integral along the orbit of x:
// accumulate toward the first zero of V, or toward the horizon when there is
// none, and pass once the total exceeds M.  From a zero-set point the
// integral runs over (0, eps] instead, built dyadically from the singular
// end.  True divergence is not numerically decidable, hence the proxy label.
inline ProbeResult regularity_probe(const FlowModel& flow, const RegularFn& v,
                                    const std::vector<double>& x, double M, double eps = 1.0,
                                    double horizon = 25000.0) {
  detail::require_point_model(flow, "regularity_probe");
  if (!(M > 0.0)) throw std::invalid_argument("regularity_probe: M must be positive");
  ProbeResult out;
  const double h0 = detail::net_spacing(flow);

  if (v.in_zero(x) || !(v.value(x) > 0.0)) {
    double upper = eps;
    for (int k = 0; k < 60 && !out.passed; ++k) {
      const double lower = 0.5 * upper;
      const int nodes = 8;
      const double sub = (upper - lower) / nodes;
      double acc = 0.0;
      for (int i = 0; i <= nodes; ++i) {
        const double w = (i == 0 || i == nodes) ? 0.5 : 1.0;
        acc += w * detail::inv_v(v, detail::flow_point(flow, x, lower + i * sub));
      }
      out.partial += acc * sub;
      if (out.partial > M) out.passed = true;
      upper = lower;
      if (upper < h0 * 1e-6) break;
    }
    out.tail_growth = out.partial;
    return out;
  }

  const std::optional<double> ts = t_star(flow, v, x, horizon);
  double mark90 = 0.0;
  std::vector<double> p = x;
  if (ts) {
    // dyadic approach to the zero from the left keeps the singular tail honest
    const double t_end = *ts;
    double s = 0.0;
    for (int k = 1; k <= 60 && !out.passed; ++k) {
      const double target = t_end * (1.0 - std::pow(0.5, k));
      const double width = target - s;
      if (width <= t_end * 1e-15) break;
      auto seg = detail::inv_v_segment(flow, v, p, width, 1e-6, h0 / 100.0);
      out.partial += seg.integral;
      if (s < 0.9 * t_end && target >= 0.9 * t_end) mark90 = out.partial;
      p = seg.endpoint;
      s = target;
      if (out.partial > M) out.passed = true;
    }
  } else {
    double s = 0.0, width = h0;
    while (s < horizon && !out.passed) {
      width = std::min(width, horizon - s);
      auto seg = detail::inv_v_segment(flow, v, p, width, 1e-6, h0 / 100.0);
      out.partial += seg.integral;
      p = seg.endpoint;
      s += width;
      if (mark90 == 0.0 && s >= 0.9 * horizon) mark90 = out.partial;
      if (out.partial > M) out.passed = true;
      width = std::min(width * 1.05, 100.0 * h0);
    }
  }
  out.tail_growth = out.partial - mark90;
  return out;
}

// ---------------------------------------------------------------------------
// The time-change solver and the reparametrized flow

// Unique t with integral of 1/V over [0, t] along the orbit equal to tau;
// zero on the zero set.  Strictly increasing in tau off the zero set and
// always below the zero hitting time, since the integral diverges there.
inline double tbar(const TimeChange& tc, double tau, const std::vector<double>& x) {
  detail::require_point_model(tc.flow, "tbar");
  if (tau < 0.0) throw std::invalid_argument("tbar: negative tau");
  if (tc.v.in_zero(x) || !(tc.v.value(x) > 0.0)) return 0.0;
  if (tau == 0.0) return 0.0;
  const double h = tc.quad_step > 0.0 ? tc.quad_step : detail::net_spacing(tc.flow);
  double s = 0.0, acc = 0.0;
  std::vector<double> p = x;
  while (true) {
    if (s > tc.horizon)
      throw std::runtime_error(
          "tbar: quadrature horizon exceeded before reaching tau; V stays too large along the "
          "orbit or the horizon is too small");
    auto seg = detail::inv_v_segment(tc.flow, tc.v, p, h, tc.quad_rel, h / 100.0);
    if (acc + seg.integral >= tau) {
      double lo = 0.0, hi = h;
      while (hi - lo > tc.root_tol) {
        const double mid = 0.5 * (lo + hi);
        const double part = detail::inv_v_segment(tc.flow, tc.v, p, mid, tc.quad_rel, h / 100.0).integral;
        (acc + part < tau ? lo : hi) = mid;
      }
      return s + 0.5 * (lo + hi);
    }
    acc += seg.integral;
    p = seg.endpoint;
    s += h;
  }
}

// The reparametrized point: the original flow run for the changed time.
// Exactly fixed on the zero set and on fixed points of the flow.
inline std::vector<double> psi(const TimeChange& tc, double tau, const std::vector<double>& x) {
  if (tc.v.in_zero(x) || !(tc.v.value(x) > 0.0)) return x;
  return detail::flow_point(tc.flow, x, tbar(tc, tau, x));
}

// Defect of the additivity law: running tau1 then tau2 from the moved point
// must spend the same flow time as running tau1 + tau2 outright.
inline double cocycle_residual(const TimeChange& tc, double tau1, double tau2,
                               const std::vector<double>& x) {
  const double t1 = tbar(tc, tau1, x);
  const std::vector<double> y = detail::flow_point(tc.flow, x, t1);
  return std::abs(tbar(tc, tau2, y) + t1 - tbar(tc, tau1 + tau2, x));
}

// ---------------------------------------------------------------------------
// Construction of banded multipliers

// Banded speed multiplier vanishing exactly on the given cells.  The bands
// walk the nested chain toward the zero set with values eps_n squared, where
// each eps shrinks by at least half and by the first-contact distance
// between a band and the complement of the next, halved once more as a
// safety margin; crossing a band then contributes at least 1/eps_n to the
// reciprocal integral, which makes the probe pass.  With compact_x0 the
// window-boundary rings get reciprocal-distance growth spliced over the flat
// outermost band, making the function proper; the growth is sized from the
// flow's speed so that the slowed flow moves boundary cells well under the
// tolerance band.
inline RegularFn build_regular_v(const FlowModel& flow, const PointSet& x0,
                                 const std::vector<PointSet>& bands, bool compact_x0) {
  detail::require_point_model(flow, "build_regular_v");
  const Grid& g = flow.grid;
  const int n = g.cell_count();
  if (x0.universe_size() != n) throw std::invalid_argument("build_regular_v: zero set size mismatch");
  if (bands.empty()) throw std::invalid_argument("build_regular_v: need at least one band");
  const PointSet want = g.interior() - x0;
  for (size_t k = 0; k < bands.size(); ++k) {
    if (bands[k].universe_size() != n || !bands[k].subset_of(want))
      throw std::invalid_argument("build_regular_v: nesting violated");
    if (k + 1 < bands.size() && !dilate_set(g, bands[k], 1).subset_of(bands[k + 1]))
      throw std::invalid_argument("build_regular_v: nesting violated");
  }
  if (!(want - bands.back()).empty())
    throw std::invalid_argument("build_regular_v: nesting violated");

  std::vector<double> eps{1.0};
  const PointSet all = PointSet(n).complement();
  for (size_t k = 0; k + 1 < bands.size(); ++k) {
    const double d = phi_distance(bands[k], all - bands[k + 1], flow, 1e-4);
    eps.push_back(0.5 * std::min(0.5 * eps.back(), d));
  }

  std::vector<double> cell_value(n, -1.0);
  for (PointId c : x0.members()) cell_value[c] = 0.0;
  for (size_t k = 0; k < bands.size(); ++k) {
    const double val = eps[k] * eps[k];
    for (PointId c : bands[k].members())
      if (cell_value[c] < 0.0) cell_value[c] = val;
  }
  for (double& v : cell_value)
    if (v < 0.0) v = 1.0;

  double bmin = 1.0;
  if (compact_x0) {
    std::vector<int> depth(n, 0);
    int maxdepth = 0;
    for (PointId c = 0; c < n; ++c) {
      auto ix = g.coords(c);
      int d = std::numeric_limits<int>::max();
      for (int a = 0; a < g.dim(); ++a)
        d = std::min({d, ix[a], g.axes()[a].cells - 1 - ix[a]});
      depth[c] = d;
      maxdepth = std::max(maxdepth, d);
    }
    const int flat = std::max(1, maxdepth / 2);
    const double grow = 20.0 * detail::speed_bound(flow) / g.min_width();
    for (PointId c = 0; c < n; ++c) {
      if (depth[c] >= flat) continue;
      if (cell_value[c] != 1.0)
        throw std::invalid_argument(
            "build_regular_v: zero set or deep bands reach the boundary rings");
      cell_value[c] = 1.0 + grow / (depth[c] + 1.0) - grow / (flat + 1.0);
    }
    bmin = 1.0 + grow - grow / (flat + 1.0);
  }

  RegularFn fn;
  PointSet zero = x0;
  Grid grid = g;
  std::vector<double> values = cell_value;
  const bool proper = compact_x0;
  const double outside = proper ? bmin : 1.0;
  fn.value = [grid, values, outside](const std::vector<double>& p) {
    auto c = grid.locate(p);
    return c ? values[*c] : outside;
  };
  fn.in_zero = [grid, zero](const std::vector<double>& p) {
    auto c = grid.locate(p);
    return c && zero.contains(*c);
  };
  fn.proper = proper;
  fn.boundary_min = proper ? bmin : 0.0;
  fn.provenance = "constructed";
  fn.epsilons = std::move(eps);
  return fn;
}

// ---------------------------------------------------------------------------
// The reparametrized flow as a model, and stopping at the window boundary

namespace detail {

inline VectorField model_field(const FlowModel& flow) {
  if (flow.kind == FlowKind::kOde) return flow.field;
  if (flow.kind == FlowKind::kClosedForm) {
    FlowMap phi_map = flow.phi;
    return [phi_map](const std::vector<double>& p) {
      const double d = 1e-6;
      std::vector<double> q = phi_map(d, p), v(p.size());
      for (size_t i = 0; i < p.size(); ++i) v[i] = (q[i] - p[i]) / d;
      return v;
    };
  }
  throw std::invalid_argument("model_field: combinatorial model");
}

}  // namespace detail

// The time change by V turns the field f into V*f: the reparametrized flow
// is again a model over the same grid and gluing.
inline FlowModel psi_flow(const FlowModel& flow, const RegularFn& v) {
  detail::require_point_model(flow, "psi_flow");
  VectorField base = detail::model_field(flow);
  PointFn vv = v.value;
  return ode_flow(
      flow.grid,
      [base, vv](const std::vector<double>& p) {
        std::vector<double> f = base(p);
        const double s = vv(p);
        for (double& c : f) c *= s;
        return f;
      },
      flow.reversible, flow.wrap, flow.step);
}

struct StopReport {
  CompactifiedSystem system;
  FlowModel flow_psi;
  RegularFn slow;             // reciprocal multiplier actually applied
  double ring_move_t1 = 0.0;  // axis cells moved by boundary-ring samples
  double ring_move_t5 = 0.0;
  bool infinity_fixed = false;
};

// Builds a proper multiplier over the window, slows the flow by its
// reciprocal (positive, nowhere zero, so vacuously regular), extracts the
// slowed time-one cascade, and one-point compactifies it.  Near the boundary
// the reciprocal is tiny, so boundary-ring cells barely move and nothing
// escapes: the added point keeps only its self-edge.
inline StopReport stop_at_infinity(const FlowModel& flow) {
  if (!flow.reversible) throw std::invalid_argument("stop_at_infinity: flow is not reversible");
  detail::require_point_model(flow, "stop_at_infinity");
  const Grid& g = flow.grid;
  const PointSet none(g.cell_count());
  const RegularFn vp = build_regular_v(flow, none, {g.interior()}, true);
  RegularFn slow;
  PointFn vv = vp.value;
  slow.value = [vv](const std::vector<double>& p) { return 1.0 / vv(p); };
  slow.in_zero = [](const std::vector<double>&) { return false; };
  slow.provenance = "reciprocal";
  FlowModel psi_m = psi_flow(flow, slow);

  PointSet esc_out(g.cell_count());
  Relation f1 = time_one_cellmap(psi_m, &esc_out);
  PointSet esc_in(g.cell_count());
  time_one_cellmap(reversed(psi_m), &esc_in);
  WindowModel wm;
  wm.interior = FiniteSpace(g.cell_count());
  wm.f = f1;
  wm.escape_out = esc_out;
  wm.escape_in = esc_in;
  wm.proper_flag = esc_in.empty();

  StopReport rep{one_point_compactify(wm), std::move(psi_m), std::move(slow)};
  auto ring_move = [&](double horizon) {
    double worst = 0.0;
    for (PointId c = 0; c < g.cell_count(); ++c) {
      if (g.masked(c)) continue;
      auto ix = g.coords(c);
      bool edge = false;
      for (int a = 0; a < g.dim(); ++a)
        edge = edge || ix[a] == 0 || ix[a] == g.axes()[a].cells - 1;
      if (!edge) continue;
      for (auto& p : g.sample_points(c)) {
        const std::vector<double> q = detail::flow_point(rep.flow_psi, p, horizon);
        for (int a = 0; a < g.dim(); ++a)
          worst = std::max(worst, std::abs(q[a] - p[a]) / g.width(a));
      }
    }
    return worst;
  };
  rep.ring_move_t1 = ring_move(1.0);
  rep.ring_move_t5 = ring_move(5.0);
  const PointId inf_id = g.cell_count();
  const PointSet inf_row = rep.system.fhat.image(inf_id);
  rep.infinity_fixed = inf_row.count() == 1 && inf_row.contains(inf_id);
  return rep;
}

}  // namespace reckit
