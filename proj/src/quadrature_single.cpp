#include <algorithm>
#include <cmath>
#include <numbers>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/ooura_fourier_integrals.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "quadrature_internal.hpp"

namespace fraclap {
namespace detail {
EnergyEstimate rqmc(int n, int extra_dims, const std::vector<Half>& halves, const Hint& hint,
                    const QuadratureSpec& spec,
                    const std::function<double(std::size_t, const Point&, const double*, std::uint64_t&)>& h);
double tensor_rule(int n, int m, Half xhalf, const Hint& hint,
                   const std::function<double(const Point&, std::uint64_t&)>& h, std::uint64_t& evals);
int tensor_nodes(std::uint64_t budget, int dims);
}  // namespace detail

namespace quadrature {

namespace {

using GK15 = boost::math::quadrature::gauss_kronrod<double, 15>;

std::vector<Half> split_half(Half h) {
  if (h == Half::All) return {Half::Plus, Half::Minus};
  return {h};
}

bool finish(EnergyEstimate& e, const QuadratureSpec& spec) {
  e.spec = spec;
  e.converged = e.err_est <= spec.target_rel_tol * std::abs(e.value) || e.err_est == 0.0;
  return e.converged;
}

// int over |x| of a radial integrand: |S^{n-1}| (or half of it) * int_0^inf f(r) r^{n-1} dr.
EnergyEstimate radial_integral(const std::function<double(double)>& f, Half half, int n, const Hint& hint,
                               const QuadratureSpec& spec) {
  std::uint64_t evals = 0;
  auto g = [&](double r) {
    ++evals;
    return f(r) * std::pow(r, n - 1);
  };
  const auto res = detail::integrate_half_line(g, 0.0, hint.scale, std::min(1e-8, spec.target_rel_tol * 1e-2));
  const double factor = detail::sphere_area(n) * (half == Half::All ? 1.0 : 0.5);
  EnergyEstimate e;
  e.value = factor * res.value;
  e.err_est = factor * res.error;
  e.nodes = evals;
  finish(e, spec);
  return e;
}

}  // namespace

EnergyEstimate integrate(const std::function<double(const Point&)>& f, Half half, int n, const Hint& hint,
                         const QuadratureSpec& spec) {
  spec.validate();
  if (n < 1 || n > 3) throw PreconditionError("single integrals are implemented for n in {1,2,3}");
  EnergyEstimate e;
  if (n == 1) {
    // always the deterministic rule: cheap and exact to the tolerance
    std::uint64_t evals = 0;
    for (Half h : split_half(half)) {
      const double sgn = h == Half::Plus ? 1.0 : -1.0;
      auto g = [&](double t) {
        ++evals;
        return f({sgn * t, 0.0, 0.0});
      };
      const auto r = detail::integrate_half_line(g, sgn * hint.center[0], hint.scale,
                                                 std::min(1e-8, spec.target_rel_tol * 1e-2));
      e.value += r.value;
      e.err_est += r.error;
    }
    e.nodes = evals;
    finish(e, spec);
    return e;
  }
  const auto halves = split_half(half);
  if (spec.method == Method::ImportanceMC) {
    e = detail::rqmc(n, 0, halves, hint, spec,
                     [&](std::size_t, const Point& x, const double*, std::uint64_t& evals) {
                       ++evals;
                       return f(x);
                     });
  } else {
    if (spec.method == Method::TensorGauss) {
      throw PreconditionError("TensorGauss is the deterministic n = 1 rule; use AdaptivePolar or ImportanceMC");
    }
    const int m = detail::tensor_nodes(spec.budget, n);
    const int m2 = std::max(6, (3 * m) / 4);
    std::uint64_t evals = 0;
    double lv[2] = {0.0, 0.0};
    int li = 0;
    for (int mm : {m, m2}) {
      for (Half h : halves) {
        lv[li] += detail::tensor_rule(
            n, mm, h, hint,
            [&](const Point& x, std::uint64_t& ev) {
              ++ev;
              return f(x);
            },
            evals);
      }
      ++li;
    }
    e.value = lv[0];
    e.err_est = std::abs(lv[0] - lv[1]);
    e.nodes = evals;
  }
  finish(e, spec);
  return e;
}

EnergyEstimate lp_integral(const TrialFunction& u, double p, Half half, const Weight& w, int n,
                           const QuadratureSpec& spec) {
  if (!(p >= 1.0)) throw PreconditionError("lp_norm requires p >= 1");
  const Hint hint = u.hint();
  if (w.kind == Weight::Kind::PowerX1 && w.exponent <= -1.0) {
    // |x1|^a with a <= -1 is not integrable across x1 = 0 unless u vanishes there
    const Point probe{0.0, hint.center[1], hint.center[2]};
    for (double eps : {1e-8, -1e-8}) {
      const Point q{eps, probe[1], probe[2]};
      if (in_half(q, half) && std::abs(u.value(q)) > 1e-12) {
        throw PreconditionError("weight |x1|^" + std::to_string(w.exponent) +
                                " diverges at x1 = 0 against a non-vanishing u");
      }
    }
  }
  if (w.kind == Weight::Kind::PowerAbsX && w.exponent <= -n && std::abs(u.value({1e-8, 0.0, 0.0})) > 1e-12) {
    throw PreconditionError("weight |x|^" + std::to_string(w.exponent) + " diverges at the origin");
  }
  auto integrand = [&](const Point& x) {
    const double v = std::abs(u.value(x));
    if (v == 0.0) return 0.0;
    return w(x) * std::pow(v, p);
  };
  const bool radial_weight = w.kind != Weight::Kind::PowerX1;
  if (n >= 2 && u.radial_about_origin() && radial_weight) {
    return radial_integral([&](double r) { return integrand({r, 0.0, 0.0}); }, half, n, hint, spec);
  }
  return integrate(integrand, half, n, hint, spec);
}

EnergyEstimate lp_norm(const TrialFunction& u, double p, Half half, const Weight& w, int n,
                       const QuadratureSpec& spec) {
  EnergyEstimate e = lp_integral(u, p, half, w, n, spec);
  const double I = e.value;
  e.value = I > 0.0 ? std::pow(I, 1.0 / p) : 0.0;
  e.err_est = I > 0.0 ? e.value * e.err_est / (p * I) : 0.0;
  return e;
}

EnergyEstimate dirichlet_energy(const TrialFunction& u, Half half, int n, const QuadratureSpec& spec) {
  if (half == Half::All && u.feature() != HyperplaneFeature::Smooth) {
    throw PreconditionError("dirichlet_energy: u has a kink or jump on x1 = 0 inside the region");
  }
  auto integrand = [&](const Point& x) {
    const Point g = u.gradient(x);
    return dot(g, g);
  };
  if (n >= 2 && u.radial_about_origin()) {
    return radial_integral([&](double r) { return integrand({r, 0.0, 0.0}); }, half, n, u.hint(), spec);
  }
  return integrate(integrand, half, n, u.hint(), spec);
}

EnergyEstimate cosine_transform_energy(const TrialFunction& u, const FracParams& params,
                                       const QuadratureSpec& spec) {
  using std::numbers::pi;
  if (params.n != 1) throw PreconditionError("cosine_transform_energy is the n = 1 route");
  params.validate();
  thread_local boost::math::quadrature::ooura_fourier_cos<double> oc(1e-10);
  thread_local boost::math::quadrature::ooura_fourier_sin<double> os(1e-10);
  const double L = u.hint().scale;
  const double c = std::max(0.0, u.hint().center[0]);
  std::uint64_t evals = 0;
  auto f = [&](double x) {
    ++evals;
    return u.value({x, 0.0, 0.0});
  };
  // a tail that has died out by x = A is dropped; only slowly decaying u need Ooura
  const double A = c + 8.0 * L;
  const double peak = std::max({std::abs(f(c)), std::abs(f(0.0)), std::abs(f(c + L))});
  const bool has_tail = std::max({std::abs(f(A)), std::abs(f(2.0 * A)), std::abs(f(8.0 * A))}) > 1e-16 * peak;
  auto tail = [&](double t) { return f(A + t); };
  // F_c u(xi) = sqrt(2/pi) int_0^inf u(x) cos(xi x) dx by Ooura; at low frequency Gauss-Kronrod
  // on [0, A] and Ooura beyond, where u may decay too slowly for any non-oscillatory rule
  auto Fc = [&](double xi) {
    if (xi * A >= 2.0) return std::sqrt(2.0 / pi) * oc.integrate(f, xi).first;
    double err = 0.0;
    const double head =
        GK15::integrate([&](double x) { return f(x) * std::cos(xi * x); }, 0.0, A, 15, 1e-12, &err);
    if (!has_tail) return std::sqrt(2.0 / pi) * head;
    const double tc = oc.integrate(tail, xi).first;
    const double ts = os.integrate(tail, xi).first;
    return std::sqrt(2.0 / pi) * (head + std::cos(xi * A) * tc - std::sin(xi * A) * ts);
  };
  auto h = [&](double xi) {
    const double F = Fc(xi);
    return std::pow(xi, 2.0 * params.s) * F * F;
  };
  double err1 = 0.0, err2 = 0.0;
  const double k = 1.0 / L;
  // |F_c u|^2 may blow up like an integrable power at xi = 0
  boost::math::quadrature::tanh_sinh<double> near_zero;
  const double a = near_zero.integrate(h, 0.0, k, 1e-9, &err1);
  const double b = GK15::integrate(h, k, std::numeric_limits<double>::infinity(), 12, 1e-9, &err2);
  EnergyEstimate e;
  e.value = a + b;
  e.err_est = err1 + err2 + 1e-9 * std::abs(e.value);
  e.nodes = evals;
  finish(e, spec);
  return e;
}

double regional_frac_laplacian_at(const TrialFunction& u, const Point& x, Half half, const FracParams& params,
                                  const QuadratureSpec& spec) {
  params.validate();
  spec.validate();
  const int n = params.n;
  const double s = params.s;
  const double C = specfun::c_frac(params).value;
  if (half != Half::All && x[0] == 0.0) {
    throw PreconditionError("regional_frac_laplacian_at: x lies on the boundary hyperplane");
  }
  const bool inside = in_half(x, half);
  const double dist = half == Half::All ? std::numeric_limits<double>::infinity() : std::abs(x[0]);
  const double rho0 = inside ? std::min(spec.split_radius, dist) : 0.0;
  const auto dirs = detail::sphere_rule(n, 32);
  const double ux = u.value(x);
  const double tol = std::max(spec.target_rel_tol, 1e-10);
  auto at = [&](const Point& w, double r) { return u.value({x[0] + r * w[0], x[1] + r * w[1], x[2] + r * w[2]}); };

  // near field: symmetric pairs on shells [rho0 2^{-k-1}, rho0 2^{-k}]
  double near = 0.0;
  if (rho0 > 0.0) {
    auto shell = [&](double a, double b) {
      double acc = 0.0;
      for (const auto& d : dirs) {
        auto g = [&](double r) {
          return (2.0 * ux - at(d.w, r) - at(d.w, -r)) * std::pow(r, -1.0 - 2.0 * s);
        };
        acc += 0.5 * d.weight * GK15::integrate(g, a, b, 3, 1e-12);
      }
      return acc;
    };
    const double scale = std::abs(ux) * std::pow(rho0, -2.0 * s) + 1e-300;
    double sum = 0.0;
    double prev_c = 0.0;
    std::vector<double> corrected;
    bool settled = false;
    for (int k = 0; k < 400; ++k) {
      const double b = rho0 * std::ldexp(1.0, -k);
      const double c = shell(0.5 * b, b);
      sum += c;
      double tail = 0.0;
      if (k > 0 && prev_c != 0.0) {
        const double q = c / prev_c;
        if (q > 0.0 && q < 1.0) tail = c * q / (1.0 - q);
      }
      prev_c = c;
      corrected.push_back(sum + tail);
      const std::size_t m = corrected.size();
      if (m >= 3) {
        const double t0 = corrected[m - 1], t1 = corrected[m - 2], t2 = corrected[m - 3];
        const double bound = tol * std::abs(t0) + 1e-13 * scale;
        if (std::abs(t0 - t1) <= bound && std::abs(t1 - t2) <= bound) {
          near = t0;
          settled = true;
          break;
        }
      }
    }
    if (!settled) throw NumericalError("regional_frac_laplacian_at: principal value did not settle");
  }

  // far field: every direction over the allowed part of [rho0, inf)
  double far = 0.0;
  const Support supp = u.support();
  for (const auto& d : dirs) {
    double lo = rho0, hi = std::numeric_limits<double>::infinity();
    if (half != Half::All) {
      const double sgn = half == Half::Plus ? 1.0 : -1.0;
      const double a = sgn * x[0], b = sgn * d.w[0];
      if (a > 0.0) {
        if (b < 0.0) hi = a / -b;
      } else {
        if (b <= 0.0) continue;
        lo = std::max(lo, -a / b);
      }
    }
    if (!(hi > lo)) continue;
    double piece = 0.0;
    if (lo > 0.0) {
      piece += ux * detail::power_window(lo, hi, 2.0 * s);
    } else {
      throw PreconditionError("regional_frac_laplacian_at: x must be interior to the region");
    }
    // - int u(y) r^{-1-2s}, split at delta and the support ball
    std::vector<double> cuts{lo, hi};
    auto add = [&](double r) {
      if (r > lo && r < hi) cuts.push_back(r);
    };
    add(spec.split_radius);
    const Point dc{u.hint().center[0] - x[0], u.hint().center[1] - x[1], u.hint().center[2] - x[2]};
    const double rstar = dot(dc, d.w);
    for (double k : {-3.0, 0.0, 3.0}) add(rstar + k * u.hint().scale);
    if (supp.bounded) {
      const Point e{x[0] - supp.center[0], x[1] - supp.center[1], x[2] - supp.center[2]};
      const double bb = dot(e, d.w), cc = dot(e, e) - supp.radius * supp.radius;
      const double disc = bb * bb - cc;
      if (disc <= 0.0) {
        far += d.weight * piece;
        continue;
      }
      add(-bb - std::sqrt(disc));
      add(-bb + std::sqrt(disc));
    }
    if (d.w[0] != 0.0) add(-x[0] / d.w[0]);  // descriptors may be rough across the hyperplane
    std::sort(cuts.begin(), cuts.end());
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
      const double a = cuts[i], b = cuts[i + 1];
      auto g = [&](double v) {
        const double r = std::exp(v);
        if (std::isinf(r)) return 0.0;
        const double uy = at(d.w, r);
        return uy == 0.0 ? 0.0 : uy * std::pow(r, -2.0 * s);
      };
      double err = 0.0;
      const double vb = std::isinf(b) ? std::numeric_limits<double>::infinity() : std::log(b);
      piece -= GK15::integrate(g, std::log(a), vb, 12, 1e-11, &err);
    }
    far += d.weight * piece;
  }
  return C * (near + far);
}

TraceEstimate neumann_trace(const TrialFunction& u, const Point& xprime, const FracParams& params,
                            const QuadratureSpec& spec) {
  const double s = params.s;
  if (!(s > 0.5 && s < 1.0)) throw PreconditionError("neumann_trace requires s in (1/2, 1)");
  const double u0 = u.value({0.0, xprime[1], xprime[2]});
  const double h0 = 1e-2 * std::min(1.0, u.hint().scale);
  double f[4];
  for (int k = 0; k < 4; ++k) {
    const double h = h0 * std::ldexp(1.0, -k);
    f[k] = -(2.0 * s - 1.0) * std::pow(h, 1.0 - 2.0 * s) * (u.value({h, xprime[1], xprime[2]}) - u0);
  }
  const double scale = std::max({std::abs(f[0]), std::abs(f[3]), std::abs(u0), 1e-300});
  // extrapolant from three consecutive values with the estimated power
  auto extrapolate = [&](double a, double b, double c) {
    const double d1 = a - b, d2 = b - c;
    if (std::abs(d1) <= 1e-13 * scale && std::abs(d2) <= 1e-13 * scale) return c;
    if (d2 == 0.0) return c;
    const double q = d1 / d2;
    if (!(q > 1.0) || !std::isfinite(q)) return std::numeric_limits<double>::quiet_NaN();
    return c - d2 / (q - 1.0);
  };
  const double e1 = extrapolate(f[0], f[1], f[2]);
  const double e2 = extrapolate(f[1], f[2], f[3]);
  TraceEstimate t;
  t.value = e2;
  t.spread = std::abs(e2 - e1);
  const double tol = std::max(spec.target_rel_tol, 1e-3) * std::abs(e2) + 1e-6 * std::max(1.0, std::abs(u0));
  t.converged = std::isfinite(e1) && std::isfinite(e2) && t.spread <= tol;
  if (!std::isfinite(e2)) t.value = f[3];
  return t;
}

}  // namespace quadrature
}  // namespace fraclap
