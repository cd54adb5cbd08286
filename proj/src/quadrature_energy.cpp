#include <cmath>
#include <numbers>
#include <random>

#include <boost/random/sobol.hpp>

#include "quadrature_internal.hpp"

namespace fraclap {
namespace detail {
EnergyMemo* installed_memo();
}

namespace {

using detail::Anchor;
using detail::LineConfig;
using detail::PairForm;

constexpr int kReplicates = 16;
constexpr std::size_t kChunk = 1024;

struct Term {
  Half x;
  Half y;
};

std::vector<Term> terms_for(Region z) {
  switch (z) {
    case Region::FullSpace: return {{Half::Plus, Half::All}, {Half::Minus, Half::All}};
    case Region::PlusPlus: return {{Half::Plus, Half::Plus}};
    case Region::PlusMinus: return {{Half::Plus, Half::Minus}};
    case Region::MinusMinus: return {{Half::Minus, Half::Minus}};
    case Region::SemiRestricted: return {{Half::Plus, Half::All}, {Half::Minus, Half::Plus}};
  }
  return {};
}

struct Partial {
  double value = 0.0;
  double error = 0.0;
  std::uint64_t evals = 0;
};

LineConfig line_config(const PairForm& form, const FracParams& params, const QuadratureSpec& spec) {
  LineConfig cfg;
  cfg.s = params.s;
  cfg.delta = spec.split_radius;
  cfg.r_switch = 1e-4 * std::min(1.0, form.hint().scale);
  cfg.tol = std::clamp(spec.target_rel_tol * 1e-2, 1e-11, 1e-4);
  cfg.max_depth = spec.target_rel_tol < 1e-4 ? 12 : 6;
  // reference magnitude: the lines through the hint centre along +-e_1
  // (moved off the hyperplane, where kinked forms have no anchor)
  const Hint h = form.hint();
  Point c = h.center;
  if (std::abs(c[0]) < 0.25 * h.scale) c[0] = 0.5 * h.scale;
  double ref = 0.0;
  try {
    std::uint64_t ev = 0;
    const Anchor A = form.anchor(c);
    ref = std::abs(detail::line_integral(form, A, {1.0, 0.0, 0.0}, Half::All, cfg, ev).value) +
          std::abs(detail::line_integral(form, A, {-1.0, 0.0, 0.0}, Half::All, cfg, ev).value);
  } catch (const NonSmoothPoint&) {
    ref = 0.0;
  }
  if (std::isfinite(ref) && ref > 0.0) {
    cfg.floor_ref = ref;
    cfg.floor_power = params.n + 2.0 * params.s;
  }
  return cfg;
}

double sum_lines(const PairForm& form, const Anchor& A, const std::vector<detail::Direction>& dirs, Half y,
                 const LineConfig& cfg, std::uint64_t& evals) {
  double acc = 0.0;
  for (const auto& d : dirs) acc += d.weight * detail::line_integral(form, A, d.w, y, cfg, evals).value;
  return acc;
}

// n = 1, nested adaptive rules.
Partial energy_tensor_1d(const PairForm& form, Region z, const LineConfig& cfg, const QuadratureSpec& spec) {
  const auto terms = terms_for(z);
  const auto dirs = detail::sphere_rule(1, 0);
  const Hint hint = form.hint();
  std::vector<Partial> parts(terms.size());
  detail::parallel_for(terms.size(), [&](std::size_t i) {
    const Term t = terms[i];
    const double sgn = t.x == Half::Plus ? 1.0 : -1.0;
    std::uint64_t evals = 0;
    auto g = [&](double r) {
      const Anchor A = form.anchor({sgn * r, 0.0, 0.0});
      return sum_lines(form, A, dirs, t.y, cfg, evals);
    };
    const auto res = detail::integrate_half_line(g, sgn * hint.center[0], hint.scale, spec.target_rel_tol * 0.1);
    parts[i] = {res.value, res.error + cfg.tol * std::abs(res.value), evals};
  });
  Partial out;
  for (const auto& p : parts) {
    out.value += p.value;
    out.error += p.error;
    out.evals += p.evals;
  }
  return out;
}

// Multivariate Cauchy proposal centred at c with scale L (radial inverse CDF),
// reflected into the half when xhalf != All.
struct Proposal {
  int n;
  Point c;
  double L;
  Half xhalf;

  double density(const Point& x) const {
    using std::numbers::pi;
    auto p = [&](const Point& y) {
      const Point d{y[0] - c[0], y[1] - c[1], y[2] - c[2]};
      const double t2 = dot(d, d) / (L * L);
      switch (n) {
        case 1: return 1.0 / (pi * L * (1.0 + t2));
        case 2: return 1.0 / (2.0 * pi * L * L * std::pow(1.0 + t2, 1.5));
        default: return 1.0 / (pi * pi * L * L * L * (1.0 + t2) * (1.0 + t2));
      }
    };
    if (xhalf == Half::All) return p(x);
    return p(x) + p({-x[0], x[1], x[2]});
  }

  static double cauchy3_radius(double u) {
    // (2/pi)(atan t - t/(1+t^2)) = u
    using std::numbers::pi;
    double lo = 0.0, hi = 1.0;
    auto F = [](double t) { return (2.0 / pi) * (std::atan(t) - t / (1.0 + t * t)); };
    while (F(hi) < u) hi *= 2.0;
    double t = 0.5 * (lo + hi);
    for (int it = 0; it < 200; ++it) {
      const double f = F(t) - u;
      if (f > 0.0) hi = t; else lo = t;
      const double df = (4.0 / pi) * t * t / ((1.0 + t * t) * (1.0 + t * t));
      double nt = df > 0.0 ? t - f / df : 0.5 * (lo + hi);
      if (!(nt > lo && nt < hi)) nt = 0.5 * (lo + hi);
      if (std::abs(nt - t) <= 1e-15 * t) return nt;
      t = nt;
    }
    return t;
  }

  Point sample(const double* v) const {
    using std::numbers::pi;
    Point x{};
    if (n == 1) {
      x[0] = c[0] + L * std::tan(pi * (v[0] - 0.5));
    } else if (n == 2) {
      const double t = std::sqrt(1.0 / ((1.0 - v[0]) * (1.0 - v[0])) - 1.0);
      const double th = 2.0 * pi * v[1];
      x = {c[0] + L * t * std::cos(th), c[1] + L * t * std::sin(th), 0.0};
    } else {
      const double t = cauchy3_radius(v[0]);
      const double zc = 2.0 * v[1] - 1.0;
      const double rho = std::sqrt(std::max(0.0, 1.0 - zc * zc));
      const double ph = 2.0 * pi * v[2];
      x = {c[0] + L * t * zc, c[1] + L * t * rho * std::cos(ph), c[2] + L * t * rho * std::sin(ph)};
    }
    if (xhalf == Half::Plus) x[0] = std::abs(x[0]);
    if (xhalf == Half::Minus) x[0] = -std::abs(x[0]);
    return x;
  }
};

Point sample_direction(int n, const double* v) {
  using std::numbers::pi;
  if (n == 2) {
    const double th = 2.0 * pi * v[0];
    return {std::cos(th), std::sin(th), 0.0};
  }
  const double z = 2.0 * v[0] - 1.0;
  const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
  const double ph = 2.0 * pi * v[1];
  return {z, rho * std::cos(ph), rho * std::sin(ph)};
}

}  // namespace

namespace detail {

/// Sobol base points (M x d, row-major) for randomly shifted replicates.
std::vector<double> sobol_points(std::size_t m, int d) {
  boost::random::sobol gen(d);
  gen.discard(static_cast<std::uintmax_t>(d));  // skip the origin
  std::vector<double> pts(m * d);
  const double scale = 1.0 / (static_cast<double>(gen.max() - gen.min()) + 1.0);
  for (auto& p : pts) p = static_cast<double>(gen() - gen.min()) * scale;
  return pts;
}

/// Cranley-Patterson shifts, one d-vector per replicate, reproducible from the seed.
std::vector<double> replicate_shifts(std::uint64_t seed, int replicates, int d) {
  std::mt19937_64 rng(seed);
  std::vector<double> shifts(static_cast<std::size_t>(replicates) * d);
  for (auto& s : shifts) s = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return shifts;
}

/// Randomised QMC estimate of sum over (x-half) of E_q[h(x, v) / q(x)], where
/// h receives the sampled point and the remaining coordinates.
EnergyEstimate rqmc(int n, int extra_dims, const std::vector<Half>& halves, const Hint& hint,
                    const QuadratureSpec& spec,
                    const std::function<double(std::size_t term, const Point& x, const double* extra,
                                               std::uint64_t& evals)>& h) {
  const int d = n + extra_dims;
  const std::size_t m = std::max<std::size_t>(1, spec.budget / kReplicates);
  const auto base = sobol_points(m, d);
  const auto shifts = replicate_shifts(spec.seed, kReplicates, d);
  const std::size_t chunks = (m + kChunk - 1) / kChunk;
  const std::size_t tasks = halves.size() * kReplicates * chunks;
  std::vector<double> sums(tasks, 0.0);
  std::vector<std::uint64_t> counts(tasks, 0);
  parallel_for(tasks, [&](std::size_t task) {
    const std::size_t term = task / (kReplicates * chunks);
    const std::size_t rem = task % (kReplicates * chunks);
    const std::size_t r = rem / chunks;
    const std::size_t chunk = rem % chunks;
    const Proposal prop{n, hint.center, hint.scale, halves[term]};
    std::vector<double> v(d);
    double acc = 0.0;
    std::uint64_t evals = 0;
    const std::size_t end = std::min(m, (chunk + 1) * kChunk);
    for (std::size_t i = chunk * kChunk; i < end; ++i) {
      for (int k = 0; k < d; ++k) {
        double t = base[i * d + k] + shifts[r * d + k];
        t -= std::floor(t);
        v[k] = std::clamp(t, 1e-16, 1.0 - 1e-16);
      }
      const Point x = prop.sample(v.data());
      const double q = prop.density(x);
      if (!(q > 0.0) || !std::isfinite(q)) continue;
      const double val = h(term, x, v.data() + n, evals) / q;
      if (std::isfinite(val)) acc += val;
    }
    sums[task] = acc;
    counts[task] = evals;
  });
  std::vector<double> per_rep(kReplicates, 0.0);
  std::uint64_t evals = 0;
  for (std::size_t task = 0; task < tasks; ++task) {
    const std::size_t r = (task % (kReplicates * chunks)) / chunks;
    per_rep[r] += sums[task];
    evals += counts[task];
  }
  double mean = 0.0;
  for (auto& x : per_rep) {
    x /= static_cast<double>(m);
    mean += x;
  }
  mean /= kReplicates;
  double var = 0.0;
  for (double x : per_rep) var += (x - mean) * (x - mean);
  var /= (kReplicates - 1);
  EnergyEstimate e;
  e.value = mean;
  e.err_est = std::sqrt(var / kReplicates);
  e.nodes = evals;
  e.spec = spec;
  return e;
}

/// Tensor Gauss-Legendre over the mapped half (x_1 = +-L tan(pi t / 2), others
/// c + L tan(pi (t - 1/2))) at m nodes per axis.
double tensor_rule(int n, int m, Half xhalf, const Hint& hint,
                   const std::function<double(const Point& x, std::uint64_t& evals)>& h, std::uint64_t& evals) {
  using std::numbers::pi;
  std::vector<double> gx, gw;
  gauss_legendre(m, gx, gw);
  std::vector<double> t(m), wt(m);
  for (int i = 0; i < m; ++i) {
    t[i] = 0.5 * (gx[i] + 1.0);
    wt[i] = 0.5 * gw[i];
  }
  const double L = hint.scale;
  auto half_map = [&](double u, double& jac) {
    const double c = std::cos(pi * u / 2.0);
    jac = L * (pi / 2.0) / (c * c);
    return L * std::tan(pi * u / 2.0);
  };
  auto full_map = [&](double u, double centre, double& jac) {
    const double c = std::cos(pi * (u - 0.5));
    jac = L * pi / (c * c);
    return centre + L * std::tan(pi * (u - 0.5));
  };
  const std::size_t tasks = m;
  std::vector<double> sums(tasks, 0.0);
  std::vector<std::uint64_t> counts(tasks, 0);
  parallel_for(tasks, [&](std::size_t i) {
    double acc = 0.0;
    std::uint64_t ev = 0;
    double j1 = 0.0;
    double x1;
    if (xhalf == Half::All) {
      x1 = full_map(t[i], hint.center[0], j1);
    } else {
      x1 = half_map(t[i], j1);
      if (xhalf == Half::Minus) x1 = -x1;
    }
    const double w1 = wt[i] * j1;
    if (n == 1) {
      acc = w1 * h({x1, 0.0, 0.0}, ev);
    } else {
      for (int j = 0; j < m; ++j) {
        double j2 = 0.0;
        const double x2 = full_map(t[j], hint.center[1], j2);
        if (n == 2) {
          acc += w1 * wt[j] * j2 * h({x1, x2, 0.0}, ev);
        } else {
          for (int k = 0; k < m; ++k) {
            double j3 = 0.0;
            const double x3 = full_map(t[k], hint.center[2], j3);
            acc += w1 * wt[j] * j2 * wt[k] * j3 * h({x1, x2, x3}, ev);
          }
        }
      }
    }
    sums[i] = acc;
    counts[i] = ev;
  });
  double total = 0.0;
  for (std::size_t i = 0; i < tasks; ++i) {
    total += sums[i];
    evals += counts[i];
  }
  return total;
}

int tensor_nodes(std::uint64_t budget, int dims) {
  return std::max(8, static_cast<int>(std::floor(std::pow(static_cast<double>(budget), 1.0 / dims))));
}

EnergyEstimate pair_energy(const PairForm& form, Region z, const FracParams& params, const QuadratureSpec& spec,
                           const std::string& memo_key) {
  spec.validate();
  // the energy itself needs no critical exponent, so n > 2s is not required (s -> 1 at n = 1)
  if (params.n < 1 || params.n > 3) throw PreconditionError("energies are implemented for n in {1,2,3}");
  if (!(params.s > 0.0 && params.s < 1.0)) {
    throw PreconditionError("energies require s in (0,1); use dirichlet_energy at s = 1");
  }
  if (spec.method == Method::TensorGauss && params.n != 1) {
    throw PreconditionError("TensorGauss is the deterministic n = 1 rule; use AdaptivePolar or ImportanceMC for n=" +
                            std::to_string(params.n));
  }
  EnergyMemo* memo = installed_memo();
  if (memo && !memo_key.empty()) {
    if (auto hit = memo->lookup(memo_key)) return *hit;
  }

  const double C = specfun::c_frac(params).value;
  const LineConfig cfg = line_config(form, params, spec);
  const int n = params.n;
  const auto terms = terms_for(z);
  EnergyEstimate e;
  e.spec = spec;

  if (spec.method == Method::TensorGauss) {
    const Partial p = energy_tensor_1d(form, z, cfg, spec);
    e.value = p.value;
    e.err_est = p.error;
    e.nodes = p.evals;
  } else if (spec.method == Method::ImportanceMC) {
    std::vector<Half> halves;
    for (const auto& t : terms) halves.push_back(t.x);
    const double area = detail::sphere_area(n);
    const auto dirs1 = detail::sphere_rule(1, 0);
    Hint hint = form.hint();
    e = rqmc(n, n - 1, halves, hint, spec,
             [&](std::size_t term, const Point& x, const double* extra, std::uint64_t& evals) {
               const Anchor A = form.anchor(x);
               const Half y = terms[term].y;
               if (n == 1) return sum_lines(form, A, dirs1, y, cfg, evals);
               const Point w = sample_direction(n, extra);
               const Point mw{-w[0], -w[1], -w[2]};
               return 0.5 * area *
                      (detail::line_integral(form, A, w, y, cfg, evals).value +
                       detail::line_integral(form, A, mw, y, cfg, evals).value);
             });
  } else {
    // two-level tensor rule; the difference is the error estimate
    const int m = tensor_nodes(spec.budget, 2 * n - 1);
    const int m2 = std::max(6, (3 * m) / 4);
    std::uint64_t evals = 0;
    double levels[2] = {0.0, 0.0};
    const Hint hint = form.hint();
    int li = 0;
    for (int mm : {m, m2}) {
      const auto dirs = detail::sphere_rule(n, n == 1 ? 0 : mm);
      for (const auto& t : terms) {
        levels[li] += tensor_rule(
            n, mm, t.x, hint,
            [&](const Point& x, std::uint64_t& ev) {
              // far anchors see the profile under a small angle: cluster the directions there
              const Point d{hint.center[0] - x[0], hint.center[1] - x[1], hint.center[2] - x[2]};
              const double dist = norm(d);
              if (n == 1 || dist < 4.0 * hint.scale) return sum_lines(form, form.anchor(x), dirs, t.y, cfg, ev);
              const Point v{d[0] / dist, d[1] / dist, d[2] / dist};
              const auto near = detail::sphere_rule(n, mm, &v, std::atan(hint.scale / dist));
              return sum_lines(form, form.anchor(x), near, t.y, cfg, ev);
            },
            evals);
      }
      ++li;
    }
    e.value = levels[0];
    e.err_est = std::abs(levels[0] - levels[1]) + cfg.tol * std::abs(levels[0]);
    e.nodes = evals;
  }
  e.value *= 0.5 * C;
  e.err_est *= 0.5 * C;
  e.spec = spec;
  e.converged = e.err_est <= spec.target_rel_tol * std::abs(e.value) || (e.value == 0.0 && e.err_est == 0.0);
  if (memo && !memo_key.empty()) memo->store(memo_key, e);
  return e;
}

}  // namespace detail

namespace quadrature {

namespace {
std::string key(const char* op, const nlohmann::json& operands, Region z, const FracParams& p,
                const QuadratureSpec& spec) {
  nlohmann::json j{{"op", op},
                   {"operands", operands},
                   {"region", std::string(to_string(z))},
                   {"params", detail::params_json(p)},
                   {"spec", spec.to_json()}};
  return j.dump();
}
}  // namespace

EnergyEstimate energy(const TrialFunction& u, Region z, const FracParams& params, const QuadratureSpec& spec) {
  const detail::EnergyForm form(u);
  return detail::pair_energy(form, z, params, spec, key("energy", {u.to_json()}, z, params, spec));
}

EnergyEstimate bilinear_energy(const TrialFunction& u, const TrialFunction& v, Region z, const FracParams& params,
                               const QuadratureSpec& spec) {
  // canonical operand order: the estimate is exactly symmetric in (u, v)
  auto ju = u.to_json(), jv = v.to_json();
  const bool swap = ju.dump() > jv.dump();
  const detail::BilinearForm form(swap ? v : u, swap ? u : v);
  if (swap) std::swap(ju, jv);
  return detail::pair_energy(form, z, params, spec, key("bilinear", {ju, jv}, z, params, spec));
}

EnergyEstimate commutator_energy(const TrialFunction& u, const TrialFunction& phi, Region z, const FracParams& params,
                                 const QuadratureSpec& spec) {
  const detail::CommutatorForm form(u, phi);
  return detail::pair_energy(form, z, params, spec,
                             key("commutator", {u.to_json(), phi.to_json()}, z, params, spec));
}

EnergyEstimate spectral_energy(const TrialFunction& u, const FracParams& params, const QuadratureSpec& spec) {
  EnergyEstimate e = energy(trial::even_extend(u), Region::FullSpace, params, spec);
  e.value *= 0.5;
  e.err_est *= 0.5;
  return e;
}

}  // namespace quadrature
}  // namespace fraclap
