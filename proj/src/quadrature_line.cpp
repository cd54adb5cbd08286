#include <algorithm>
#include <cmath>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "quadrature_internal.hpp"

namespace fraclap::detail {

namespace {

using GK = boost::math::quadrature::gauss_kronrod<double, 15>;

Point along(const Point& x, const Point& w, double r) { return {x[0] + r * w[0], x[1] + r * w[1], x[2] + r * w[2]}; }

// Allowed r-range [lo, hi] keeping x + r w inside yhalf; empty when lo >= hi.
std::pair<double, double> allowed_range(double x1, double w1, Half yhalf) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  if (yhalf == Half::All) return {0.0, inf};
  const double sgn = yhalf == Half::Plus ? 1.0 : -1.0;
  const double a = sgn * x1;  // signed distance into the half
  const double b = sgn * w1;
  if (a > 0.0) return b >= 0.0 ? std::pair{0.0, inf} : std::pair{0.0, a / -b};
  if (a == 0.0) return b > 0.0 ? std::pair{0.0, inf} : std::pair{0.0, 0.0};
  return b > 0.0 ? std::pair{-a / b, inf} : std::pair{0.0, 0.0};
}

// r-interval where the segment meets a ball; empty when first >= second.
std::pair<double, double> ball_range(const Point& x, const Point& w, const Support& s) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  if (!s.bounded) return {0.0, inf};
  const Point d{x[0] - s.center[0], x[1] - s.center[1], x[2] - s.center[2]};
  const double b = dot(d, w);
  const double c = dot(d, d) - s.radius * s.radius;
  const double disc = b * b - c;
  if (disc <= 0.0) return {0.0, 0.0};
  const double q = std::sqrt(disc);
  return {std::max(0.0, -b - q), std::max(0.0, -b + q)};
}

// A piece whose size is below cfg.abs_tol needs only one rough rule; otherwise
// the relative tolerance is relaxed so that tol * |piece| stays above abs_tol.
struct Rough {
  bool done = false;
  LineResult result;
  double tol = 0.0;
};
Rough rough_pass(const std::function<double(double)>& g, double a, double b, const LineConfig& cfg) {
  Rough out{false, {}, cfg.tol};
  if (!(cfg.abs_tol > 0.0)) return out;
  double err = 0.0, l1 = 0.0;
  const double v = GK::integrate(g, a, b, 0, 0.0, &err, &l1);
  if (!std::isfinite(l1)) return out;
  if (l1 <= cfg.abs_tol) return {true, {v, err}, cfg.tol};
  out.tol = std::clamp(cfg.abs_tol / l1, cfg.tol, 0.5);
  return out;
}

// int_a^b g(r) dr, in log r when the piece spans scales.
LineResult integrate_piece(const std::function<double(double)>& g, double a, double b, const LineConfig& cfg,
                           bool allow_log = true) {
  LineResult out;
  if (!(b > a)) return out;
  double err = 0.0, l1 = 0.0;
  const bool logmap = allow_log && a > 0.0 && (std::isinf(b) || b > 4.0 * a);
  if (logmap) {
    std::function<double(double)> h = [&](double v) {
      const double r = std::exp(v);
      if (std::isinf(r)) return 0.0;
      const double gv = g(r);
      return gv == 0.0 ? 0.0 : gv * r;
    };
    const double va = std::log(a);
    const double vb = std::isinf(b) ? std::numeric_limits<double>::infinity() : std::log(b);
    const Rough pre = rough_pass(h, va, vb, cfg);
    if (pre.done) return pre.result;
    out.value = GK::integrate(h, va, vb, cfg.max_depth, pre.tol, &err, &l1);
  } else {
    const Rough pre = rough_pass(g, a, b, cfg);
    if (pre.done) return pre.result;
    out.value = GK::integrate(g, a, b, cfg.max_depth, pre.tol, &err, &l1);
  }
  out.error = err;
  return out;
}

// Endpoint-singular pieces: F only Holder-continuous at the hyperplane crossing.
LineResult integrate_endpoint(const std::function<double(double)>& g, double a, double b, const LineConfig& cfg) {
  thread_local boost::math::quadrature::tanh_sinh<double> ts(12, 1e-15);
  LineResult out;
  if (!(b > a)) return out;
  double err = 0.0, l1 = 0.0;
  std::size_t levels = 0;
  const Rough pre = rough_pass(g, a, b, cfg);
  if (pre.done) return pre.result;
  out.value = ts.integrate(g, a, b, pre.tol, &err, &l1, &levels);
  out.error = err;
  return out;
}

}  // namespace

Support BilinearForm::remainder_support() const {
  const Support a = u_.support();
  const Support b = v_.support();
  if (!a.bounded || !b.bounded) return Support{};
  if (a.radius == 0.0) return b;
  if (b.radius == 0.0) return a;
  const Point d{b.center[0] - a.center[0], b.center[1] - a.center[1], b.center[2] - a.center[2]};
  return Support{true, a.center, std::max(a.radius, norm(d) + b.radius)};
}

namespace {

// A breakpoint on the line: r = v, or r = r* + v when rel (offset from the
// foot of the perpendicular through the hint centre). Far anchors keep the
// profile resolved only in the offset frame.
struct Cut {
  double v = 0.0;
  bool rel = false;
};

}  // namespace

LineResult line_integral(const PairForm& f, const Anchor& A, const Point& w, Half yhalf, const LineConfig& cfg,
                         std::uint64_t& evals) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  LineResult out;
  const auto [lo, hi] = allowed_range(A.x[0], w[0], yhalf);
  if (!(hi > lo)) return out;

  const Support supp = f.remainder_support();
  const Hint hint = f.hint();
  const double L = hint.scale;
  if (cfg.floor_ref > 0.0) {
    LineConfig local = cfg;
    const double dc = std::hypot(A.x[0] - hint.center[0], A.x[1] - hint.center[1], A.x[2] - hint.center[2]);
    local.abs_tol = cfg.tol * cfg.floor_ref * std::pow(L / (L + dc), cfg.floor_power);
    local.floor_ref = 0.0;
    return line_integral(f, A, w, yhalf, local, evals);
  }
  const double s = cfg.s;
  const double two_s = 2.0 * s;

  const Point q{A.x[0] - hint.center[0], A.x[1] - hint.center[1], A.x[2] - hint.center[2]};
  const double rstar = -dot(q, w);
  const Point P0{hint.center[0] + q[0] + rstar * w[0], hint.center[1] + q[1] + rstar * w[1],
                 hint.center[2] + q[2] + rstar * w[2]};
  // offset frame only pays off once ulp(r*) approaches the profile scale
  const bool use_rel = rstar > 1e6 * L;
  auto in_zone = [&](double r) { return use_rel && std::abs(r - rstar) <= 0.5 * rstar; };
  auto value = [&](const Cut& c) { return c.rel ? rstar + c.v : c.v; };

  std::vector<Cut> cuts;
  auto add_abs = [&](double r) {
    if (!(r > lo && r < hi)) return;
    if (in_zone(r)) cuts.push_back({r - rstar, true});
    else cuts.push_back({r, false});
  };
  auto add_rel = [&](double t) {
    const double r = rstar + t;
    if (!use_rel || !in_zone(r)) {
      add_abs(r);
      return;
    }
    cuts.push_back({t, true});
  };

  // Crossing of the hyperplane and ball entry/exit, in whichever frame is precise.
  const bool cross = w[0] != 0.0;
  double cross_abs = cross ? -A.x[0] / w[0] : inf;
  const double cross_rel = cross ? -P0[0] / w[0] : inf;
  const bool cross_in_zone = cross && in_zone(cross_abs);
  auto add_cross = [&] {
    if (!cross) return;
    if (cross_in_zone) cuts.push_back({cross_rel, true});
    else add_abs(cross_abs);
  };
  // lo and hi are 0, inf or the crossing
  auto bound = [&](double r) -> Cut {
    if (cross && r == cross_abs && cross_in_zone) return {cross_rel, true};
    if (in_zone(r)) return {r - rstar, true};
    return {r, false};
  };
  const Cut lo_cut = bound(lo), hi_cut = bound(hi);
  cuts.push_back(lo_cut);
  cuts.push_back(hi_cut);
  add_abs(cfg.delta);
  add_cross();

  double t0 = 0.0, t1 = 0.0;  // ball range, absolute
  double u0 = 0.0, u1 = 0.0;  // and as offsets
  bool ball = false;
  if (supp.bounded) {
    if (use_rel) {
      const Point e{P0[0] - supp.center[0], P0[1] - supp.center[1], P0[2] - supp.center[2]};
      const double b = dot(e, w);
      const double disc = b * b - (dot(e, e) - supp.radius * supp.radius);
      if (disc > 0.0) {
        const double qd = std::sqrt(disc);
        add_rel(-b - qd);
        add_rel(-b + qd);
        u0 = -b - qd;
        u1 = -b + qd;
        t0 = std::max(0.0, rstar + u0);
        t1 = std::max(0.0, rstar + u1);
        ball = t1 > t0;
      }
    } else {
      std::tie(t0, t1) = ball_range(A.x, w, supp);
      ball = t1 > t0;
      if (ball) {
        add_abs(t0);
        add_abs(t1);
      }
    }
  }
  for (double k : {-3.0, 0.0, 3.0}) add_rel(k * L);
  // decades around r*: far anchors see the profile's algebraic shoulders compressed in log r
  for (double d = 30.0 * L; d < std::abs(rstar); d *= 10.0) {
    add_rel(-d);
    add_rel(d);
  }

  // order: absolute cuts below the zone, relative cuts, absolute cuts above
  auto key = [&](const Cut& c) {
    if (c.rel) return std::pair{1, c.v};
    return std::pair{c.v < rstar ? 0 : 2, c.v};
  };
  std::sort(cuts.begin(), cuts.end(), [&](const Cut& a, const Cut& b) { return key(a) < key(b); });
  cuts.erase(std::unique(cuts.begin(), cuts.end(), [](const Cut& a, const Cut& b) { return a.rel == b.rel && a.v == b.v; }),
             cuts.end());
  std::erase_if(cuts, [&](const Cut& c) { return key(c) < key(lo_cut) || key(c) > key(hi_cut); });

  const HyperplaneFeature feature = f.feature();
  auto F = [&](double r) {
    ++evals;
    return f.full(A, along(A.x, w, r));
  };
  auto kernel_f = [&](double r) { return F(r) * std::pow(r, -1.0 - two_s); };
  auto accumulate = [&](const LineResult& piece) {
    out.value += piece.value;
    out.error += piece.error;
  };

  double taylor = std::numeric_limits<double>::quiet_NaN();
  const double rsw = cfg.r_switch;

  const bool rough = feature >= HyperplaneFeature::Holder;
  auto is_cross = [&](const Cut& c) {
    if (!cross) return false;
    return cross_in_zone ? (c.rel && c.v == cross_rel) : (!c.rel && c.v == cross_abs);
  };

  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const bool endpoint_singular = rough && (is_cross(cuts[i]) || is_cross(cuts[i + 1]));
    if (cuts[i].rel && cuts[i + 1].rel) {
      // offset frame: y = P0 + t w, r = r* + t
      const double ta = cuts[i].v, tb = cuts[i + 1].v;
      if (!(tb > ta)) continue;
      const bool far_split = supp.bounded;
      auto g = [&](double t) {
        ++evals;
        const Point y{P0[0] + t * w[0], P0[1] + t * w[1], P0[2] + t * w[2]};
        const double val = far_split ? f.remainder(A, y) : f.full(A, y);
        return val * std::pow(rstar + t, -1.0 - two_s);
      };
      if (far_split) {
        const double loc = f.local(A);
        if (loc != 0.0) out.value += loc * power_window_width(rstar + ta, tb - ta, two_s);
        const double ra = std::max(ta, u0);
        const double rb = ball ? std::min(tb, u1) : ta;
        if (rb > ra) accumulate(integrate_piece(g, ra, rb, cfg, false));
      } else if (endpoint_singular) {
        accumulate(integrate_endpoint(g, ta, tb, cfg));
      } else {
        accumulate(integrate_piece(g, ta, tb, cfg, false));
      }
      continue;
    }
    const double a = value(cuts[i]);
    const double b = value(cuts[i + 1]);
    if (!(b > a)) continue;
    if (b <= cfg.delta) {
      // near field: F sampled directly, modelled below r_switch
      if (a == 0.0) {
        if (std::isnan(taylor)) taylor = f.taylor(A, w);
        // a rough descriptor curves on the scale of the distance to the hyperplane
        const double rho = rough && A.x[0] != 0.0 ? std::min({b, rsw, 1e-3 * std::abs(A.x[0])}) : std::min(b, rsw);
        out.value += taylor * rising_window(0.0, rho, 2.0 - two_s);
        if (b > rho) accumulate(endpoint_singular ? integrate_endpoint(kernel_f, rho, b, cfg)
                                                  : integrate_piece(kernel_f, rho, b, cfg));
      } else if (endpoint_singular) {
        accumulate(integrate_endpoint(kernel_f, a, b, cfg));
      } else if (a < rsw && feature <= HyperplaneFeature::Kink) {
        // just past a crossing: F ~ (slope r)^2 to leading order
        const double rho = std::min(b, rsw);
        const double Fr = F(rho);
        out.value += Fr / (rho * rho) * rising_window(a, rho, 2.0 - two_s);
        if (b > rho) accumulate(integrate_piece(kernel_f, rho, b, cfg));
      } else {
        accumulate(integrate_piece(kernel_f, a, b, cfg));
      }
    } else if (!supp.bounded) {
      // no compact support: the split would leave cancellation residue on every line
      accumulate(endpoint_singular ? integrate_endpoint(kernel_f, a, b, cfg) : integrate_piece(kernel_f, a, b, cfg));
    } else {
      // far field: local(x) against the kernel in closed form, remainder numerically
      const double loc = f.local(A);
      if (loc != 0.0) out.value += loc * power_window(a, b, two_s);
      const double ra = std::max(a, t0);
      const double rb = std::min(b, t1);
      if (ball && rb > ra) {
        auto rem = [&](double r) {
          ++evals;
          return f.remainder(A, along(A.x, w, r)) * std::pow(r, -1.0 - two_s);
        };
        accumulate(integrate_piece(rem, ra, rb, cfg));
      }
    }
  }
  return out;
}

}  // namespace fraclap::detail
