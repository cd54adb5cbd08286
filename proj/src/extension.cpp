#include "fraclap/extension.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <mutex>
#include <numbers>
#include <unordered_map>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

namespace fraclap {

namespace {

using TS = boost::math::quadrature::tanh_sinh<double>;
using ES = boost::math::quadrature::exp_sinh<double>;
using GK = boost::math::quadrature::gauss_kronrod<double, 15>;
using Fn = std::function<double(double)>;

struct Acc {
  double value = 0.0;
  double error = 0.0;
  void operator+=(const Acc& o) {
    value += o.value;
    error += o.error;
  }
};

// One rule per nesting level: the integrands of the outer levels call the inner ones.
TS& tanh_sinh_at(int level) {
  thread_local std::array<TS, 3> rules;
  return rules[level];
}
ES& exp_sinh_at(int level) {
  thread_local std::array<ES, 3> rules;
  return rules[level];
}

double finite_or_zero(double v) { return std::isfinite(v) ? v : 0.0; }

std::vector<double> tidy(std::vector<double> cuts, double lo) {
  std::erase_if(cuts, [&](double c) { return !(c >= lo) || !std::isfinite(c); });
  cuts.push_back(lo);
  std::sort(cuts.begin(), cuts.end());
  // merge breakpoints that differ only by rounding: a sliver piece stalls tanh-sinh
  cuts.erase(std::unique(cuts.begin(), cuts.end(),
                         [](double a, double b) { return b - a <= 1e-12 * std::max(std::abs(a), std::abs(b)); }),
             cuts.end());
  return cuts;
}

// int_0^inf f over the given breakpoints: tanh-sinh between them, exp-sinh beyond.
Acc half_line(const Fn& f, const std::vector<double>& raw_cuts, double tol, int level) {
  const auto cuts = tidy(raw_cuts, 0.0);
  Acc out;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    double err = 0.0, l1 = 0.0;
    std::size_t lv = 0;
    out += {tanh_sinh_at(level).integrate(f, cuts[i], cuts[i + 1], tol, &err, &l1, &lv), err};
  }
  // exp-sinh resolves t ~ 1; rescale so the tail's own length scale sits there
  const double a = cuts.back();
  const double w = a > 0.0 ? a : 1.0;
  double err = 0.0, l1 = 0.0;
  std::size_t lv = 0;
  const double tail =
      exp_sinh_at(level).integrate([&](double t) { return finite_or_zero(f(a + w * t)); }, tol, &err, &l1, &lv);
  out += {w * tail, w * err};
  return out;
}

// int_R f, breakpoints sorted internally.
Acc full_line(const Fn& f, std::vector<double> cuts, double tol, int level) {
  std::erase_if(cuts, [](double c) { return !std::isfinite(c); });
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  const double lo = cuts.front();
  std::vector<double> right;
  for (double c : cuts) right.push_back(c - lo);
  Acc out = half_line([&](double t) { return f(lo + t); }, right, tol, level);
  const double w = right.back() > 0.0 ? right.back() : 1.0;
  double err = 0.0, l1 = 0.0;
  std::size_t lv = 0;
  const double tail =
      exp_sinh_at(level).integrate([&](double t) { return finite_or_zero(f(lo - w * t)); }, tol, &err, &l1, &lv);
  out += {w * tail, w * err};
  return out;
}

// Geometric breakpoints o + scale*step^k strictly between o and o + reach, so a long stretch
// between two features is split geometrically.
void add_decades(std::vector<double>& cuts, double o, double scale, double reach, bool both_sides = false) {
  if (!(scale > 0.0) || !std::isfinite(reach) || reach <= 10.0 * scale) return;
  // at most ~16 cuts: a factor 1e4 per piece is still easy for tanh-sinh
  const double step = std::max(10.0, std::pow(reach / scale, 1.0 / 16.0));
  for (double w = step * scale; w < reach; w *= step) {
    cuts.push_back(o + w);
    if (both_sides) cuts.push_back(o - w);
  }
}

// h(y, unit) is the integrand with lengths measured in `unit`; the true integrand is
// h(y, unit) (unit/base)^{-power}. Far slices use their own distance as the unit, so the
// kernel there stays O(1) instead of sinking into denormals.
using Kernel = std::function<double(const Point&, double)>;

// int_{R^n_+} h(y) dy for an integrand peaked near the mirror image of x (x_1 < 0)
// and near the hint.
Acc half_space_integral(const Kernel& h, double power, double base, int n, const Point& x, const Hint& hint,
                        double tol) {
  const double d0 = std::abs(x[0]);
  const double L = hint.scale;
  const double c1 = hint.center[0];
  std::vector<double> y1_cuts{d0, 4.0 * d0, c1 - 3.0 * L, c1, c1 + 3.0 * L};
  add_decades(y1_cuts, std::max(c1, 0.0), L, 4.0 * d0);
  add_decades(y1_cuts, 0.0, d0, std::abs(c1) + 3.0 * L);
  if (n == 1) return half_line([&](double y1) { return h({y1, 0.0, 0.0}, base); }, y1_cuts, tol, 0);

  const double inner_tol = 0.1 * tol;
  auto unit_of = [&](double d) { return std::max(base, d); };
  if (n == 2) {
    auto slice = [&](double y1) {
      const double d = y1 - x[0];
      std::vector<double> cuts{x[1], x[1] - d, x[1] + d, hint.center[1] - 3.0 * L, hint.center[1],
                               hint.center[1] + 3.0 * L};
      add_decades(cuts, x[1], d, std::abs(hint.center[1] - x[1]) + 3.0 * L, true);
      add_decades(cuts, hint.center[1], L, d, true);
      const double unit = unit_of(d);
      return std::pow(unit / base, -power) *
             full_line([&](double y2) { return h({y1, y2, 0.0}, unit); }, cuts, inner_tol, 1).value;
    };
    return half_line(slice, y1_cuts, tol, 0);
  }
  // n = 3: polar coordinates in y' around x'
  const double cx = hint.center[1] - x[1], cy = hint.center[2] - x[2];
  const double off = std::hypot(cx, cy);
  const double phi0 = off > 0.0 ? std::atan2(cy, cx) : 0.0;
  auto slice = [&](double y1) {
    const double d = y1 - x[0];
    const double unit = unit_of(d);
    auto ring = [&](double rho) {
      if (rho == 0.0) return 0.0;
      auto around = [&](double phi) {
        return h({y1, x[1] + rho * std::cos(phi), x[2] + rho * std::sin(phi)}, unit);
      };
      double err = 0.0;
      const double pi = std::numbers::pi;
      return rho * (GK::integrate(around, phi0 - pi, phi0, 8, inner_tol, &err) +
                    GK::integrate(around, phi0, phi0 + pi, 8, inner_tol, &err));
    };
    std::vector<double> cuts{d, 4.0 * d, off - 3.0 * L, off, off + 3.0 * L};
    add_decades(cuts, std::max(off - 3.0 * L, 0.0), L, 4.0 * d);
    add_decades(cuts, 0.0, d, off + 3.0 * L);
    return std::pow(unit / base, -power) * half_line(ring, cuts, inner_tol, 1).value;
  };
  return half_line(slice, y1_cuts, tol, 0);
}

// well below the energy engine's line tolerance
double apply_tol(const QuadratureSpec& spec) { return std::clamp(spec.target_rel_tol * 1e-3, 1e-11, 1e-6); }

void require_minus(const Point& x, const char* who) {
  if (!(x[0] < 0.0)) {
    throw PreconditionError(std::string(who) + ": x must lie in R^n_- (x1 < 0), got x1=" + std::to_string(x[0]));
  }
}

void require_embedded(const Point& x, int n, const char* who) {
  for (int i = n; i < 3; ++i) {
    if (x[i] != 0.0) throw PreconditionError(std::string(who) + ": coordinates beyond n must be zero");
  }
}

// P_s needs no critical exponent, so n > 2s is not required here.
void require_s(const FracParams& params, const char* who) {
  if (!(params.s > 0.0 && params.s < 1.0)) throw PreconditionError(std::string(who) + ": requires s in (0,1)");
  if (params.n < 1 || params.n > 3) throw PreconditionError(std::string(who) + ": requires n in {1,2,3}");
}

double kernel_ratio(const FracParams& params) {
  return specfun::c_frac(params).value / specfun::gamma_half(params.s).value;
}

// |a-b|^2 / unit^2, scaled componentwise so neither overflows nor underflows
double dist2(const Point& a, const Point& b, double unit = 1.0) {
  const double d0 = (a[0] - b[0]) / unit, d1 = (a[1] - b[1]) / unit, d2 = (a[2] - b[2]) / unit;
  return d0 * d0 + d1 * d1 + d2 * d2;
}

// Decay exponent of |u| along e_1 from the hint centre, from two far samples.
double decay_exponent(const TrialFunction& u) {
  const Hint h = u.hint();
  const Point p1{h.center[0] + 1e3 * h.scale, h.center[1], h.center[2]};
  const Point p2{h.center[0] + 1e4 * h.scale, h.center[1], h.center[2]};
  const double a = std::abs(u.value(p1)), b = std::abs(u.value(p2));
  if (a == 0.0 || b == 0.0) return std::numeric_limits<double>::infinity();
  return std::log(a / b) / std::log((p2[0] - h.center[0]) / (p1[0] - h.center[0]));
}

struct PointHash {
  std::size_t operator()(const Point& p) const {
    std::uint64_t h = 1469598103934665603ull;
    for (double v : p) {
      std::uint64_t bits;
      std::memcpy(&bits, &v, sizeof bits);
      h = (h ^ bits) * 1099511628211ull;
    }
    return static_cast<std::size_t>(h);
  }
};

// Bounded memo of P_s u at visited points; entries are deterministic, so a
// concurrent overwrite stores the same value.
template <class V>
class PointCache {
 public:
  std::optional<V> find(const Point& x) const {
    std::lock_guard lock(mutex_);
    auto it = map_.find(x);
    if (it == map_.end()) return std::nullopt;
    return it->second;
  }
  void put(const Point& x, const V& v) {
    std::lock_guard lock(mutex_);
    if (map_.size() >= kCapacity) map_.clear();
    map_[x] = v;
  }

 private:
  static constexpr std::size_t kCapacity = 1u << 18;
  mutable std::mutex mutex_;
  std::unordered_map<Point, V, PointHash> map_;
};

class ExtensionField final : public ExternalField {
 public:
  ExtensionField(TrialFunction u, FracParams params, QuadratureSpec spec)
      : u_(std::move(u)), params_(params), spec_(spec) {}

  double value(const Point& x) const override {
    if (x[0] >= 0.0) return u_.value(x);
    if (auto hit = values_.find(x)) return *hit;
    const double v = extension::apply_Ps(u_, x, params_, spec_);
    values_.put(x, v);
    return v;
  }
  Point gradient(const Point& x) const override {
    if (x[0] > 0.0) return u_.gradient(x);
    if (x[0] == 0.0) throw NonSmoothPoint("gradient of P_s u requested on the hyperplane x1=0");
    if (auto hit = gradients_.find(x)) return *hit;
    const Point g = extension::apply_Ps_gradient(u_, x, params_, spec_);
    gradients_.put(x, g);
    return g;
  }
  HyperplaneFeature feature() const override { return HyperplaneFeature::Holder; }
  Support support() const override {
    const Support s = u_.support();
    if (s.bounded && s.radius == 0.0) return s;
    return Support{};
  }
  Hint hint() const override { return u_.hint(); }
  nlohmann::json to_json() const override {
    nlohmann::json j{{"kind", "extension"},
                     {"source", u_.to_json()},
                     {"n", params_.n},
                     {"s", params_.s},
                     {"spec", spec_.to_json()}};
    if (params_.sigma) j["sigma"] = *params_.sigma;
    return j;
  }

 private:
  TrialFunction u_;
  FracParams params_;
  QuadratureSpec spec_;
  mutable PointCache<double> values_;
  mutable PointCache<Point> gradients_;
};

TrialFunction extension_from_json(const nlohmann::json& j) {
  FracParams p{j.at("n").get<int>(), j.at("s").get<double>(), std::nullopt};
  if (j.contains("sigma")) p.sigma = j.at("sigma").get<double>();
  const QuadratureSpec fallback = QuadratureSpec::defaults_for(p.n);
  const QuadratureSpec spec = j.contains("spec") ? QuadratureSpec::from_json(j.at("spec"), fallback) : fallback;
  return extension::extend(TrialFunction::from_json(j.at("source")), p, spec).extended;
}

}  // namespace

namespace extension {

PsValue apply_Ps_checked(const TrialFunction& u, const Point& x, const FracParams& params,
                         const QuadratureSpec& spec) {
  require_minus(x, "apply_Ps");
  require_s(params, "apply_Ps");
  require_embedded(x, params.n, "apply_Ps");
  const int n = params.n;
  const double e = -(n + 2.0 * params.s) / 2.0;
  // distances in units of |x_1| keep the kernel O(1) however far x is
  const double ax = std::abs(x[0]);
  auto h = [&](const Point& y, double unit) {
    const double uy = u.value(y);
    return uy == 0.0 ? 0.0 : uy * std::pow(dist2(x, y, unit), e);
  };
  const Acc a = half_space_integral(h, -2.0 * e, ax, n, x, u.hint(), apply_tol(spec));
  const double pre = kernel_ratio(params) * std::pow(ax, -static_cast<double>(n));
  PsValue out;
  out.value = pre * a.value;
  out.error = pre * a.error;
  out.slow_tail = decay_exponent(u) < n;
  return out;
}

double apply_Ps(const TrialFunction& u, const Point& x, const FracParams& params, const QuadratureSpec& spec) {
  return apply_Ps_checked(u, x, params, spec).value;
}

Point apply_Ps_gradient(const TrialFunction& u, const Point& x, const FracParams& params,
                        const QuadratureSpec& spec) {
  require_minus(x, "apply_Ps_gradient");
  require_s(params, "apply_Ps_gradient");
  require_embedded(x, params.n, "apply_Ps_gradient");
  const int n = params.n;
  const double s = params.s;
  const double tol = apply_tol(spec);
  const double e = -(n + 2.0 * s) / 2.0;
  const Hint hint = u.hint();
  // as in apply_Ps_checked, lengths are measured in units of |x_1|
  const double ax = std::abs(x[0]);
  const double I0 = half_space_integral(
      [&](const Point& y, double unit) {
        const double uy = u.value(y);
        return uy == 0.0 ? 0.0 : uy * std::pow(dist2(x, y, unit), e);
      },
      -2.0 * e, ax, n, x, hint, tol).value;
  const double ratio = kernel_ratio(params);
  const double scale = ratio * std::pow(ax, -static_cast<double>(n) - 1.0);
  Point g{0.0, 0.0, 0.0};
  for (int i = 0; i < n; ++i) {
    // d/dx_i |x-y|^{-n-2s} = -(n+2s) |x-y|^{-n-2s-2} (x_i - y_i)
    const double J = half_space_integral(
        [&](const Point& y, double unit) {
          const double uy = u.value(y);
          return uy == 0.0 ? 0.0 : uy * std::pow(dist2(x, y, unit), e - 1.0) * (x[i] - y[i]) / unit;
        },
        1.0 - 2.0 * e, ax, n, x, hint, tol).value;
    g[i] = scale * (-(n + 2.0 * s)) * J;
  }
  // d/dx_1 |x_1|^{2s} = -2s |x_1|^{2s-1} on x_1 < 0
  g[0] += scale * (-2.0 * s) * I0;
  return g;
}

ExtensionResult extend(const TrialFunction& u, const FracParams& params, const QuadratureSpec& spec) {
  require_s(params, "extend");
  spec.validate();
  register_descriptor();
  ExtensionResult r;
  r.extended = trial::from_external(std::make_shared<ExtensionField>(u, params, spec));
  if (params.n > 2.0 * params.s) {
    r.source_norm = quadrature::lp_norm(u, params.critical_exponent(), Half::Plus, Weight::none(), params.n, spec);
  }
  return r;
}

ExtensionResult extend(const TrialFunction& u, const FracParams& params) {
  return extend(u, params, QuadratureSpec::defaults_for(params.n));
}

KernelIdentity kernel_beta_identity(const Point& x, double beta, const FracParams& params,
                                    const QuadratureSpec& spec) {
  require_minus(x, "kernel_beta_identity");
  require_s(params, "kernel_beta_identity");
  require_embedded(x, params.n, "kernel_beta_identity");
  const double s = params.s;
  if (!(beta > -2.0 * s && beta < 1.0)) {
    throw PreconditionError("kernel_beta_identity: beta must lie in (-2s, 1), got beta=" + std::to_string(beta));
  }
  KernelIdentity out;
  out.near_divergence = std::min(beta + 2.0 * s, 1.0 - beta) < 0.05;
  const int n = params.n;
  const double e = -(n + 2.0 * s) / 2.0;
  auto h = [&](const Point& y, double unit) { return std::pow(y[0], -beta) * std::pow(dist2(x, y, unit), e); };
  const Hint hint{{0.0, x[1], x[2]}, std::abs(x[0])};
  const Acc a = half_space_integral(h, -2.0 * e, 1.0, n, x, hint, apply_tol(spec));
  out.lhs = std::pow(std::abs(x[0]), 2.0 * s + beta) * a.value;
  out.rhs = specfun::b_beta(s, beta).value / kernel_ratio(params);
  return out;
}

MappingBound mapping_bound_check(const TrialFunction& u, double p, double t, double alpha, const FracParams& params,
                                 const QuadratureSpec& spec) {
  require_s(params, "mapping_bound_check");
  const double s = params.s;
  const int n = params.n;
  auto fail = [](const std::string& what) { throw PreconditionError("mapping_bound_check: " + what); };
  if (!(p > 1.0)) fail("p must exceed 1");
  const double inv_pprime = 1.0 - 1.0 / p;
  if (!(t > -inv_pprime && t < 2.0 * s + 1.0 / p)) {
    fail("t must lie in (-1/p', 2s + 1/p) = (" + std::to_string(-inv_pprime) + ", " +
         std::to_string(2.0 * s + 1.0 / p) + "), got " + std::to_string(t));
  }
  const double a1 = alpha / (p - 1.0);
  if (!(a1 > -2.0 * s && a1 < 1.0)) fail("alpha/(p-1) must lie in (-2s, 1), got " + std::to_string(a1));
  const double a2 = alpha + t * p;
  if (!(a2 > 0.0 && a2 < 1.0 + 2.0 * s)) fail("alpha + t p must lie in (0, 1 + 2s), got " + std::to_string(a2));
  const double d = decay_exponent(u);
  if (p * d + t * p <= n) {
    fail("u is not in the weighted L^p space: |u| decays like |x|^-" + std::to_string(d) + " and p(decay + t) = " +
         std::to_string(p * (d + t)) + " <= n");
  }

  MappingBound out;
  const double coef = std::pow(specfun::b_beta(s, a1).value, p - 1.0) * specfun::b_beta(s, a2 - 2.0 * s).value;
  out.rhs = coef * quadrature::lp_integral(u, p, Half::Plus, Weight::power_x1(-t * p), n, spec).value;
  if (out.rhs == 0.0 && u.support().bounded && u.support().radius == 0.0) return out;

  auto f = [&](const Point& x) {
    const double v = std::abs(apply_Ps(u, x, params, spec));
    return v == 0.0 ? 0.0 : std::pow(std::abs(x[0]), -t * p) * std::pow(v, p);
  };
  if (n == 1) {
    const Hint h = u.hint();
    std::vector<double> cuts{h.scale, 4.0 * h.scale, std::abs(h.center[0]) + 3.0 * h.scale};
    out.lhs = half_line([&](double r) { return f({-r, 0.0, 0.0}); }, cuts, std::clamp(spec.target_rel_tol, 1e-10, 1e-4),
                        1).value;
  } else {
    out.lhs = quadrature::integrate(f, Half::Minus, n, u.hint(), spec).value;
  }
  return out;
}

std::vector<TailSample> tail_decay_probe(const TrialFunction& indicator, const std::vector<Point>& points,
                                         const FracParams& params, const QuadratureSpec& spec) {
  require_s(params, "tail_decay_probe");
  const Support supp = indicator.support();
  if (!supp.bounded) throw PreconditionError("tail_decay_probe: the indicator must have bounded support");
  if (supp.center[0] - supp.radius < 0.0) {
    throw PreconditionError("tail_decay_probe: the indicator's support must lie in R^n_+");
  }
  const int n = params.n;
  const double s = params.s;
  const double R = norm(supp.center) + supp.radius;
  const double mass = quadrature::lp_integral(indicator, 1.0, Half::Plus, Weight::none(), n, spec).value;
  const double cE = kernel_ratio(params) * mass;
  std::vector<TailSample> out;
  for (const Point& x : points) {
    require_minus(x, "tail_decay_probe");
    TailSample t;
    t.x = x;
    t.value = apply_Ps(indicator, x, params, spec);
    t.lower_bound = cE * std::pow(std::abs(x[0]), 2.0 * s) * std::pow(R + norm(x), -(n + 2.0 * s));
    t.holds = t.value >= t.lower_bound;
    out.push_back(t);
  }
  return out;
}

void register_descriptor() {
  static std::once_flag once;
  std::call_once(once, [] { TrialFunction::register_kind("extension", &extension_from_json); });
}

}  // namespace extension
}  // namespace fraclap
