#include "fraclap/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <random>

namespace fraclap {

std::string_view to_string(Operator op) {
  switch (op) {
    case Operator::Dirichlet: return "Dirichlet";
    case Operator::Restricted: return "Restricted";
    case Operator::Spectral: return "Spectral";
    case Operator::Semirestricted: return "Semirestricted";
  }
  return "Dirichlet";
}

Operator operator_from_string(std::string_view name) {
  for (Operator op : {Operator::Dirichlet, Operator::Restricted, Operator::Spectral, Operator::Semirestricted}) {
    if (to_string(op) == name) return op;
  }
  throw PreconditionError("unknown operator '" + std::string(name) + "'");
}

std::string_view to_string(Strictness s) {
  switch (s) {
    case Strictness::Resolved: return "resolved";
    case Strictness::Unresolved: return "unresolved";
    case Strictness::Violated: return "violated";
  }
  return "unresolved";
}

Strictness adjudicate(double gap, double combined_err) {
  if (gap > 3.0 * combined_err) return Strictness::Resolved;
  if (gap < -3.0 * combined_err) return Strictness::Violated;
  return Strictness::Unresolved;
}

namespace {

nlohmann::json estimate_json(const EnergyEstimate& e) {
  return {{"value", e.value}, {"errEst", e.err_est}, {"nodes", e.nodes}, {"converged", e.converged}};
}

}  // namespace

double QuotientReport::err_est() const {
  return std::abs(quotient) * (numerator.rel_err() + 2.0 * denominator.rel_err());
}

nlohmann::json QuotientReport::to_json() const {
  nlohmann::json j{{"operator", std::string(to_string(op.op))},
                   {"numerator", estimate_json(numerator)},
                   {"denominator", estimate_json(denominator)},
                   {"quotient", quotient},
                   {"errEst", err_est()},
                   {"trial", trial},
                   {"tolerances", tolerances}};
  if (op.weight_sigma) j["weightSigma"] = *op.weight_sigma;
  return j;
}

void OptimizerConfig::validate() const {
  if (restarts < 1) throw PreconditionError("optimizer restarts must be >= 1");
  if (max_iters < 1) throw PreconditionError("optimizer maxIters must be >= 1");
  if (!(simplex_tol > 0.0)) throw PreconditionError("optimizer simplexTol must be positive");
  if (family == Family::BubblePlusCorrection && (atoms < 1 || atoms > 3)) {
    throw PreconditionError("BubblePlusCorrection takes 1 to 3 correction atoms");
  }
}

nlohmann::json OptimizerConfig::to_json() const {
  return {{"family", family == Family::ShiftScaleBubble ? "ShiftScaleBubble" : "BubblePlusCorrection"},
          {"atoms", atoms},
          {"restarts", restarts},
          {"maxIters", max_iters},
          {"simplexTol", simplex_tol},
          {"seed", seed}};
}

OptimizerConfig OptimizerConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw PreconditionError("optimizer config must be a JSON object");
  OptimizerConfig c;
  if (j.contains("family")) {
    const auto f = j.at("family").get<std::string>();
    if (f == "ShiftScaleBubble") {
      c.family = Family::ShiftScaleBubble;
    } else if (f == "BubblePlusCorrection") {
      c.family = Family::BubblePlusCorrection;
      c.atoms = 1;
    } else {
      throw PreconditionError("unknown optimizer family '" + f + "'");
    }
  }
  if (j.contains("atoms")) c.atoms = j.at("atoms").get<int>();
  if (j.contains("restarts")) c.restarts = j.at("restarts").get<int>();
  if (j.contains("maxIters")) c.max_iters = j.at("maxIters").get<int>();
  if (j.contains("simplexTol")) c.simplex_tol = j.at("simplexTol").get<double>();
  if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
  c.validate();
  return c;
}

nlohmann::json MinimizeReport::to_json() const {
  return {{"best", best.to_json()},
          {"bestParams", best_params},
          {"restartValues", restart_values},
          {"historyMin", history_min},
          {"evaluations", evaluations},
          {"converged", converged}};
}

nlohmann::json CheckRecord::to_json() const {
  return {{"name", name}, {"lhs", lhs},         {"rhs", rhs},      {"tol", tol},
          {"pass", pass}, {"skipped", skipped}, {"detail", detail}};
}

nlohmann::json GapReport::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : sr_to_dirichlet) {
    rows.push_back({{"s", r.s}, {"semirestricted", r.semirestricted}, {"halfDirichlet", r.half_dirichlet}});
  }
  nlohmann::json checks_j = nlohmann::json::array();
  for (const auto& c : checks) checks_j.push_back(c.to_json());
  return {{"checks", checks_j}, {"srToDirichlet", rows}, {"threshold", threshold}};
}

nlohmann::json LimitRow::to_json() const {
  return {{"s", s},
          {"regime", regime},
          {"full", full},
          {"fullTarget", full_target},
          {"plusPlus", plus_plus},
          {"plusPlusTarget", plus_plus_target},
          {"semirestricted", semirestricted},
          {"semirestrictedTarget", semirestricted_target},
          {"projected", projected},
          {"projectedTarget", projected_target}};
}

nlohmann::json HardyReport::to_json() const {
  nlohmann::json checks_j = nlohmann::json::array(), q = nlohmann::json::array();
  for (const auto& c : checks) checks_j.push_back(c.to_json());
  for (const auto& r : quotients) q.push_back(r.to_json());
  return {{"checks", checks_j}, {"quotients", q}};
}

namespace analysis {

namespace {

// Energy of the operator's quadratic form; s = 1 is the classical Dirichlet integral, over R^n_+
// for the three half-space operators.
EnergyEstimate numerator_of(const TrialFunction& u, Operator op, const FracParams& params,
                            const QuadratureSpec& spec) {
  const int n = params.n;
  if (!params.fractional()) {
    return quadrature::dirichlet_energy(u, op == Operator::Dirichlet ? Half::All : Half::Plus, n, spec);
  }
  switch (op) {
    case Operator::Dirichlet: return quadrature::energy(u, Region::FullSpace, params, spec);
    case Operator::Restricted: return quadrature::energy(u, Region::PlusPlus, params, spec);
    case Operator::Spectral: return quadrature::spectral_energy(u, params, spec);
    case Operator::Semirestricted: return quadrature::energy(u, Region::SemiRestricted, params, spec);
  }
  return {};
}

TrialFunction family_trial(const std::vector<double>& x, const FracParams& params, const OptimizerConfig& cfg) {
  const double tau = std::abs(x[0]);
  const double lambda = std::exp(std::clamp(x[1], -20.0, 20.0));
  const TrialFunction bubble =
      params.fractional() ? trial::make_bubble(params, tau, lambda)
                          : trial::make_power_bubble(params.n, (2.0 - params.n) / 2.0, tau, lambda);
  if (cfg.family == OptimizerConfig::Family::ShiftScaleBubble) return bubble;
  std::vector<std::pair<double, TrialFunction>> terms{{1.0, bubble}};
  for (int k = 0; k < cfg.atoms; ++k) {
    terms.emplace_back(x[2 + k], trial::make_gaussian({tau, 0.0, 0.0}, lambda * std::pow(2.0, k)));
  }
  return trial::combine(std::move(terms));
}

struct Simplex {
  std::vector<std::vector<double>> pts;
  std::vector<double> vals;
};

// Nelder-Mead with the standard coefficients; f may return +inf for rejected points.
struct NelderMead {
  std::function<double(const std::vector<double>&)> f;
  double tol;
  int max_iters;

  bool run(Simplex& s) const {
    const std::size_t d = s.pts.size() - 1;
    for (int it = 0; it < max_iters; ++it) {
      std::vector<std::size_t> idx(s.pts.size());
      std::iota(idx.begin(), idx.end(), 0);
      std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return s.vals[a] < s.vals[b]; });
      Simplex t;
      for (auto i : idx) {
        t.pts.push_back(s.pts[i]);
        t.vals.push_back(s.vals[i]);
      }
      s = std::move(t);
      const double best = s.vals.front(), worst = s.vals.back();
      if (std::isfinite(worst) && worst - best <= tol * std::abs(best)) return true;
      std::vector<double> c(d, 0.0);
      for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t k = 0; k < d; ++k) c[k] += s.pts[i][k] / static_cast<double>(d);
      }
      auto along = [&](double t) {
        std::vector<double> p(d);
        for (std::size_t k = 0; k < d; ++k) p[k] = c[k] + t * (s.pts[d][k] - c[k]);
        return p;
      };
      const auto xr = along(-1.0);
      const double fr = f(xr);
      if (fr < s.vals[0]) {
        const auto xe = along(-2.0);
        const double fe = f(xe);
        if (fe < fr) {
          s.pts[d] = xe, s.vals[d] = fe;
        } else {
          s.pts[d] = xr, s.vals[d] = fr;
        }
        continue;
      }
      if (fr < s.vals[d - 1]) {
        s.pts[d] = xr, s.vals[d] = fr;
        continue;
      }
      const bool outside = fr < s.vals[d];
      const auto xc = along(outside ? -0.5 : 0.5);
      const double fc = f(xc);
      if (fc < (outside ? fr : s.vals[d])) {
        s.pts[d] = xc, s.vals[d] = fc;
        continue;
      }
      // shrink towards the best vertex
      for (std::size_t i = 1; i <= d; ++i) {
        for (std::size_t k = 0; k < d; ++k) s.pts[i][k] = s.pts[0][k] + 0.5 * (s.pts[i][k] - s.pts[0][k]);
        s.vals[i] = f(s.pts[i]);
      }
    }
    return false;
  }
};

}  // namespace

QuotientReport rayleigh(const TrialFunction& u, const OperatorKind& op, const FracParams& params,
                        const QuadratureSpec& spec) {
  params.validate();
  const double s = params.s;
  double p = params.critical_exponent();
  Weight w = Weight::none();
  if (op.weight_sigma) {
    const double sigma = *op.weight_sigma;
    if (!(sigma > 0.0 && sigma < s)) throw PreconditionError("rayleigh: weightSigma must lie in (0, s)");
    p = 2.0 * params.n / (params.n - 2.0 * sigma);
    w = Weight::power_abs_x((sigma - s) * p);
  }
  QuotientReport r;
  r.op = op;
  r.trial = u.to_json();
  r.tolerances = spec.to_json();
  const Half den_half = op.op == Operator::Dirichlet ? Half::All : Half::Plus;
  r.denominator = quadrature::lp_norm(u, p, den_half, w, params.n, spec);
  if (!(r.denominator.value > 0.0)) {
    throw PreconditionError("rayleigh: u vanishes on " + std::string(to_string(den_half)));
  }
  r.numerator = numerator_of(u, op.op, params, spec);
  r.quotient = r.numerator.value / (r.denominator.value * r.denominator.value);
  return r;
}

MinimizeReport minimize_quotient(const OperatorKind& op, const FracParams& params, const OptimizerConfig& cfg,
                                 const QuadratureSpec& spec) {
  params.validate();
  cfg.validate();
  const std::size_t dim = 2 + (cfg.family == OptimizerConfig::Family::BubblePlusCorrection ? cfg.atoms : 0);
  MinimizeReport out;
  out.history_min = std::numeric_limits<double>::infinity();
  std::optional<QuotientReport> best;
  std::vector<double> best_x;
  auto objective = [&](const std::vector<double>& x) {
    ++out.evaluations;
    try {
      TrialFunction u = family_trial(x, params, cfg);
      // the semirestricted infimum may be taken over P_s-extensions
      if (op.op == Operator::Semirestricted) u = extension::extend(u, params, spec).extended;
      const QuotientReport r = rayleigh(u, op, params, spec);
      if (!std::isfinite(r.quotient)) return std::numeric_limits<double>::infinity();
      if (r.quotient < out.history_min) {
        out.history_min = r.quotient;
        best = r;
        best_x = x;
      }
      return r.quotient;
    } catch (const PreconditionError&) {
      return std::numeric_limits<double>::infinity();
    } catch (const NumericalError&) {
      return std::numeric_limits<double>::infinity();
    }
  };
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const NelderMead nm{objective, cfg.simplex_tol, cfg.max_iters};
  for (int r = 0; r < cfg.restarts; ++r) {
    std::vector<double> x0(dim, 0.0);
    if (r > 0) {
      x0[0] = 2.0 * uni(rng);
      x0[1] = -1.0 + 2.0 * uni(rng);
      for (std::size_t k = 2; k < dim; ++k) x0[k] = -0.2 + 0.4 * uni(rng);
    }
    Simplex sx;
    sx.pts.push_back(x0);
    for (std::size_t k = 0; k < dim; ++k) {
      auto p = x0;
      p[k] += k < 2 ? 0.5 : 0.1;
      sx.pts.push_back(p);
    }
    for (const auto& p : sx.pts) sx.vals.push_back(objective(p));
    const bool ok = nm.run(sx);
    out.converged = out.converged && ok;
    out.restart_values.push_back(*std::min_element(sx.vals.begin(), sx.vals.end()));
  }
  if (!best) throw NumericalError("minimize_quotient: no admissible trial in the family");
  out.best = *best;
  out.best_params = best_x;
  out.best_params[0] = std::abs(out.best_params[0]);
  return out;
}

namespace {

// Relative to the larger side, or to `terms`, the size of the quantities that cancel in a difference.
CheckRecord equality(std::string name, double lhs, double rhs, double err, double tol, double terms = 0.0) {
  CheckRecord c;
  c.name = std::move(name);
  c.lhs = lhs;
  c.rhs = rhs;
  c.tol = tol;
  const double scale = std::max({std::abs(lhs), std::abs(rhs), terms});
  // an error bar wider than the tolerance makes the comparison inconclusive, not a pass
  c.pass = err <= tol * scale && std::abs(lhs - rhs) <= tol * scale + 3.0 * err;
  if (err > tol * scale) c.detail = "inconclusive: error estimate exceeds the tolerance";
  return c;
}

// lhs <= rhs, up to 3x the combined error.
CheckRecord inequality(std::string name, double lhs, double rhs, double err, double tol) {
  CheckRecord c;
  c.name = std::move(name);
  c.lhs = lhs;
  c.rhs = rhs;
  c.tol = tol;
  c.pass = err <= tol * std::max(std::abs(lhs), std::abs(rhs)) && lhs <= rhs + 3.0 * err;
  if (!c.pass && lhs <= rhs + 3.0 * err) c.detail = "inconclusive: error estimate exceeds the tolerance";
  return c;
}

CheckRecord skipped(std::string name, std::string why) {
  CheckRecord c;
  c.name = std::move(name);
  c.pass = true;
  c.skipped = true;
  c.detail = std::move(why);
  return c;
}

// Runs one item; an exception turns into a failed record instead of aborting the suite.
void guarded(std::vector<CheckRecord>& out, const std::string& name, const std::function<void()>& body) {
  try {
    body();
  } catch (const std::exception& e) {
    CheckRecord c;
    c.name = name;
    c.pass = false;
    c.detail = e.what();
    out.push_back(c);
  }
}

struct Battery {
  std::vector<std::pair<std::string, TrialFunction>> full_space;  // bubble, Gaussian, cutoff bubble
  TrialFunction bump_plus, bump_minus;
};

Battery default_battery(const FracParams& params) {
  Battery b;
  const auto bubble = trial::make_bubble(params);
  b.full_space = {{"bubble", bubble},
                  {"gaussian", trial::make_gaussian({0.4, 0.0, 0.0})},
                  {"cutoff", trial::make_cutoff_bubble(bubble, 2.0, 1.0)}};
  auto bump = [](double c) {
    return trial::make_cutoff_bubble(trial::make_gaussian({c, 0.0, 0.0}, 0.5), 0.5, 0.5, {c, 0.0, 0.0});
  };
  b.bump_plus = bump(2.0);
  b.bump_minus = bump(-2.0);
  return b;
}

Point sample_minus(int k, int count, int n) {
  // x_1 log-spaced over [-100, -0.01], tangential coordinates fixed
  const double t = count > 1 ? static_cast<double>(k) / (count - 1) : 0.0;
  const double x1 = -std::pow(10.0, -2.0 + 4.0 * t);
  return {x1, n >= 2 ? 0.3 : 0.0, n >= 3 ? -0.2 : 0.0};
}

}  // namespace

std::vector<CheckRecord> identity_suite(const FracParams& params, const QuadratureSpec& spec, double tol) {
  params.validate();
  if (!params.fractional()) throw PreconditionError("identity_suite: requires s < 1");
  const int n = params.n;
  const double s = params.s;
  const double gamma = specfun::gamma_half(s).value;
  const Battery bat = default_battery(params);
  auto E = [&](const TrialFunction& u, Region z) { return quadrature::energy(u, z, params, spec); };
  std::vector<CheckRecord> out;

  // (a) supported in R^n_+: full = regional + gamma_s int x1^{-2s} u^2
  const std::vector<std::pair<std::string, TrialFunction>> plus_trials{{"bump", bat.bump_plus},
                                                                      {"zero", trial::make_constant(0.0)}};
  for (const auto& [label, u] : plus_trials) {
    const std::string name = "a:hardy_term[" + label + "]";
    guarded(out, name, [&, &u = u] {
      const auto full = E(u, Region::FullSpace);
      const auto pp = E(u, Region::PlusPlus);
      const auto h = quadrature::lp_integral(u, 2.0, Half::Plus, Weight::power_x1(-2.0 * s), n, spec);
      out.push_back(equality(name, full.value, pp.value + gamma * h.value,
                             full.err_est + pp.err_est + gamma * h.err_est, tol));
    });
  }

  for (const auto& [label, u] : bat.full_space) {
    // (b) even extension: full(u^) = 2 regional(u) + 2 cross(u^), cross(u^) <= regional(u)
    guarded(out, "b:even_extension[" + label + "]", [&, &u = u, &label = label] {
      const auto ue = trial::even_extend(u);
      const auto full = E(ue, Region::FullSpace);
      const auto pp = E(u, Region::PlusPlus);
      const auto pm = E(ue, Region::PlusMinus);
      out.push_back(equality("b:even_extension[" + label + "]", full.value, 2.0 * pp.value + 2.0 * pm.value,
                             full.err_est + 2.0 * (pp.err_est + pm.err_est), tol));
      out.push_back(inequality("b:cross_below_regional[" + label + "]", pm.value, pp.value,
                               pm.err_est + pp.err_est, tol));
    });
    // (c), (d) two decompositions of the semirestricted form
    guarded(out, "c:sr_decomposition[" + label + "]", [&, &u = u, &label = label] {
      const auto sr = E(u, Region::SemiRestricted);
      const auto pp = E(u, Region::PlusPlus);
      const auto pm = E(u, Region::PlusMinus);
      const auto full = E(u, Region::FullSpace);
      const auto mm = E(u, Region::MinusMinus);
      out.push_back(equality("c:sr_decomposition[" + label + "]", sr.value, pp.value + 2.0 * pm.value,
                             sr.err_est + pp.err_est + 2.0 * pm.err_est, tol));
      out.push_back(equality("d:sr_complement[" + label + "]", sr.value, full.value - mm.value,
                             sr.err_est + full.err_est + mm.err_est, tol));
    });
  }

  // (e) vanishing on R^n_+
  guarded(out, "e:vanishing_on_plus", [&] {
    const auto sr = E(bat.bump_minus, Region::SemiRestricted);
    const auto h =
        quadrature::lp_integral(bat.bump_minus, 2.0, Half::Minus, Weight::power_x1(-2.0 * s), n, spec);
    out.push_back(
        equality("e:vanishing_on_plus", sr.value, gamma * h.value, sr.err_est + gamma * h.err_est, tol));
  });

  // (f) cutoff commutator, regional and semirestricted
  {
    const auto u = trial::make_gaussian({0.4, 0.0, 0.0});
    const auto phi = trial::make_cutoff_bubble(trial::make_constant(1.0), 1.0, 1.0, {0.5, 0.0, 0.0});
    const auto phiu = trial::multiply(phi, u);
    const auto phi2u = trial::multiply(phi, phiu);
    for (Region z : {Region::PlusPlus, Region::SemiRestricted}) {
      const std::string name = "f:commutator[" + std::string(to_string(z)) + "]";
      guarded(out, name, [&] {
        const auto a = E(phiu, z);
        const auto b = quadrature::bilinear_energy(u, phi2u, z, params, spec);
        const auto c = quadrature::commutator_energy(u, phi, z, params, spec);
        out.push_back(equality(name, a.value - b.value, c.value, a.err_est + b.err_est + c.err_est, tol,
                               std::max(std::abs(a.value), std::abs(b.value))));
      });
    }
  }

  // (g) spectral form against half the full-space energy of the even extension
  for (const auto& [label, u] : bat.full_space) {
    const std::string name = "g:spectral[" + label + "]";
    if (n != 1) {
      out.push_back(skipped(name, "for n >= 2 the spectral form is computed through the even extension itself"));
      continue;
    }
    guarded(out, name, [&, &u = u] {
      const auto ct = quadrature::cosine_transform_energy(u, params, spec);
      const auto full = E(trial::even_extend(u), Region::FullSpace);
      out.push_back(equality(name, ct.value, 0.5 * full.value, ct.err_est + 0.5 * full.err_est, tol));
    });
  }

  // (h) s < 1/2: regional quotient of u = (full - Hardy term) quotient of chi_+ u
  for (const auto& [label, u] : bat.full_space) {
    const std::string name = "h:dirichlet_minus_hardy[" + label + "]";
    if (!(s < 0.5)) {
      out.push_back(skipped(name, "needs s < 1/2"));
      continue;
    }
    guarded(out, name, [&, &u = u] {
      const auto chi = trial::restrict_to(u, Half::Plus);
      const double p = params.critical_exponent();
      const auto norm = quadrature::lp_norm(u, p, Half::Plus, Weight::none(), n, spec);
      const auto pp = E(u, Region::PlusPlus);
      const auto full = E(chi, Region::FullSpace);
      const auto h = quadrature::lp_integral(chi, 2.0, Half::Plus, Weight::power_x1(-2.0 * s), n, spec);
      const double d2 = norm.value * norm.value;
      out.push_back(equality(name, pp.value / d2, (full.value - gamma * h.value) / d2,
                             (pp.err_est + full.err_est + gamma * h.err_est) / d2, tol));
    });
  }

  // (i) the projector P_s on the bubble
  {
    const auto u = trial::make_bubble(params);
    guarded(out, "i:idempotence", [&] {
      const auto Pu = extension::extend(u, params, spec).extended;
      const auto PPu = extension::extend(trial::restrict_to(Pu, Half::Plus), params, spec).extended;
      double defect = 0.0;
      for (int k = 0; k < 50; ++k) {
        const Point x = sample_minus(k, 50, n);
        defect = std::max(defect, std::abs(PPu.value(x) - Pu.value(x)));
      }
      CheckRecord c;
      c.name = "i:idempotence";
      c.lhs = defect;
      c.rhs = 0.0;
      c.tol = 1e-6;
      c.pass = defect <= 1e-6;
      c.detail = "max |P(Pu) - Pu| over 50 points of R^n_-";
      out.push_back(c);
    });
    if (n == 1) {
      guarded(out, "i:pythagoras", [&] {
        const auto Pu = extension::extend(u, params, spec).extended;
        const auto even = trial::even_extend(u);
        const auto eP = E(Pu, Region::SemiRestricted);
        const auto eE = E(even, Region::SemiRestricted);
        const auto eD = E(trial::combine({{1.0, even}, {-1.0, Pu}}), Region::SemiRestricted);
        auto c = equality("i:pythagoras", eE.value, eP.value + eD.value, eE.err_est + eP.err_est + eD.err_est, tol);
        c.detail = "E(v) = E(Pu) + E(v - Pu) for the even extension v";
        out.push_back(c);
      });
    } else {
      out.push_back(skipped("i:pythagoras", "the semirestricted energy of P_s u is an n = 1 computation"));
    }
    guarded(out, "i:euler_lagrange", [&] {
      const auto Pu = extension::extend(u, params, spec).extended;
      double worst = 0.0;
      for (int k = 0; k < 10; ++k) {
        const Point x = sample_minus(k, 10, n);
        worst = std::max(worst, std::abs(quadrature::regional_frac_laplacian_at(Pu, x, Half::Plus, params, spec)));
      }
      CheckRecord c;
      c.name = "i:euler_lagrange";
      c.lhs = worst;
      c.rhs = 0.0;
      c.tol = 1e-2;  // times sup|u| = 1
      c.pass = worst <= 1e-2;
      c.detail = "max |int_{R^n_+} (Pu(x) - u(y)) K(x-y) dy| over 10 points of R^n_-";
      out.push_back(c);
    });
  }
  return out;
}

std::vector<CheckRecord> strict_sr_chain(const FracParams& params, const QuadratureSpec& spec) {
  params.validate();
  const int n = params.n;
  std::vector<CheckRecord> out;
  if (n > 2) {
    out.push_back(skipped("d:full_over_sr", "the chain is stated for n in {1,2}"));
    return out;
  }
  const auto U = trial::make_bubble(params);
  guarded(out, "d:full_over_sr", [&] {
    const auto full = quadrature::energy(U, Region::FullSpace, params, spec);
    const auto sr = quadrature::energy(U, Region::SemiRestricted, params, spec);
    CheckRecord c;
    c.name = "d:full_over_sr";
    c.lhs = full.value / sr.value;
    c.rhs = 4.0 / 3.0;
    // error of the ratio, first order
    const double err = c.lhs * (full.rel_err() + sr.rel_err());
    c.tol = 3.0 * err;
    const Strictness st = adjudicate(c.lhs - c.rhs, err);
    c.pass = st != Strictness::Violated;
    c.detail = "ratio full/semirestricted, " + std::string(to_string(st));
    out.push_back(c);
  });
  CheckRecord t;
  t.name = "d:threshold";
  t.lhs = 2.0 * params.s / n;
  t.rhs = specfun::strict_sr_threshold();
  t.pass = true;
  t.detail = (1.0 > t.lhs && t.lhs >= t.rhs) ? "threshold test holds" : "threshold test does not hold";
  out.push_back(t);
  return out;
}

GapReport theorem_gap_report(const FracParams& params, const OptimizerConfig& cfg, const QuadratureSpec& spec) {
  params.validate();
  if (!params.fractional()) throw PreconditionError("theorem_gap_report: requires s < 1");
  cfg.validate();
  const int n = params.n;
  const double S = specfun::sobolev_const(params).value;
  const double Ssp = specfun::spectral_neumann_const(params).value;
  const auto U = trial::make_bubble(params);
  GapReport g;
  g.threshold = specfun::strict_sr_threshold();

  auto strict_record = [](std::string name, double value, double bound, double err) {
    CheckRecord c;
    c.name = std::move(name);
    c.lhs = value;
    c.rhs = bound;
    c.tol = 3.0 * err;
    const Strictness st = adjudicate(bound - value, err);
    c.pass = st != Strictness::Violated;
    c.detail = std::string(to_string(st));
    return c;
  };

  // (a) restricted: the bubble itself and the optimizer's upper bound, both below 2^{-2s/n} S_s
  guarded(g.checks, "a:restricted_bubble", [&] {
    const auto r = rayleigh(U, {Operator::Restricted, std::nullopt}, params, spec);
    g.checks.push_back(strict_record("a:restricted_bubble", r.quotient, Ssp, r.err_est()));
  });
  guarded(g.checks, "a:restricted_optimizer", [&] {
    const auto m = minimize_quotient({Operator::Restricted, std::nullopt}, params, cfg, spec);
    g.checks.push_back(strict_record("a:restricted_optimizer", m.best.quotient, Ssp, m.best.err_est()));
  });
  // (b) spectral equality at the bubble
  guarded(g.checks, "b:spectral_equality", [&] {
    const auto r = rayleigh(U, {Operator::Spectral, std::nullopt}, params, spec);
    CheckRecord c;
    c.name = "b:spectral_equality";
    c.lhs = r.quotient;
    c.rhs = Ssp;
    c.tol = 3.0 * r.err_est();
    c.pass = std::abs(r.quotient - Ssp) <= c.tol;
    g.checks.push_back(c);
  });
  // (c) semirestricted upper bound against S_s, through P_s
  guarded(g.checks, "c:semirestricted_optimizer", [&] {
    const auto m = minimize_quotient({Operator::Semirestricted, std::nullopt}, params, cfg, spec);
    auto c = strict_record("c:semirestricted_optimizer", m.best.quotient, S, m.best.err_est());
    c.detail += " (upper-bound evidence only)";
    g.checks.push_back(c);
  });
  // (d) the n in {1,2} chain
  for (auto& c : strict_sr_chain(params, spec)) g.checks.push_back(std::move(c));
  // (e) s -> 1: semirestricted energy of a cutoff bubble against half its Dirichlet energy
  for (double se : {0.8, 0.9, 0.95, 0.99}) {
    if (!(n > 2.0 * se)) continue;
    const std::string name = "e:sr_to_dirichlet[s=" + std::to_string(se) + "]";
    guarded(g.checks, name, [&] {
      const FracParams pe = FracParams::make(n, se);
      const auto ue = trial::make_cutoff_bubble(trial::make_bubble(pe), 1.0, 1.0);
      const auto sr = quadrature::energy(ue, Region::SemiRestricted, pe, spec);
      const auto d = quadrature::dirichlet_energy(ue, Half::All, n, spec);
      g.sr_to_dirichlet.push_back({se, sr.value, 0.5 * d.value});
    });
  }
  if (g.sr_to_dirichlet.empty()) g.checks.push_back(skipped("e:sr_to_dirichlet", "needs n > 2s for s near 1"));
  return g;
}

std::vector<LimitRow> limit_sweep(const TrialFunction& u, const std::vector<double>& s_grid, int n,
                                  const QuadratureSpec& spec) {
  if (n < 1 || n > 3) throw PreconditionError("limit_sweep: requires n in {1,2,3}");
  const double l2 = quadrature::lp_integral(u, 2.0, Half::All, Weight::none(), n, spec).value;
  const double l2p = quadrature::lp_integral(u, 2.0, Half::Plus, Weight::none(), n, spec).value;
  const double l2m = quadrature::lp_integral(u, 2.0, Half::Minus, Weight::none(), n, spec).value;
  const double d = quadrature::dirichlet_energy(u, Half::All, n, spec).value;
  const double dp = quadrature::dirichlet_energy(u, Half::Plus, n, spec).value;
  // P_s only sees u on R^n_+
  const TrialFunction plus_part = trial::restrict_to(u, Half::Plus);
  std::vector<LimitRow> rows;
  for (double s : s_grid) {
    if (!(s > 0.0 && s < 1.0)) throw PreconditionError("limit_sweep: every s must lie in (0,1)");
    // energies need no critical exponent: n <= 2s is allowed here
    const FracParams p{n, s, std::nullopt};
    LimitRow r;
    r.s = s;
    r.full = quadrature::energy(u, Region::FullSpace, p, spec).value;
    r.plus_plus = quadrature::energy(u, Region::PlusPlus, p, spec).value;
    r.semirestricted = quadrature::energy(u, Region::SemiRestricted, p, spec).value;
    r.projected =
        quadrature::energy(extension::extend(plus_part, p, spec).extended, Region::SemiRestricted, p, spec).value;
    if (s < 0.5) {
      r.regime = "s->0";
      r.full_target = l2;
      r.plus_plus_target = 0.5 * l2p;
      r.semirestricted_target = l2p + 0.5 * l2m;
      r.projected_target = l2p;
    } else {
      r.regime = "s->1";
      r.full_target = d;
      r.plus_plus_target = dp;
      // the cross term vanishes as s -> 1 for smooth u
      r.semirestricted_target = dp;
      r.projected_target = dp;
    }
    rows.push_back(r);
  }
  return rows;
}

std::vector<CheckRecord> limit_checks(const std::vector<LimitRow>& rows) {
  std::vector<CheckRecord> out;
  for (const auto& r : rows) {
    const bool zero = r.regime == "s->0";
    const double tol = zero ? 0.10 : 0.15;
    auto add = [&](const char* what, double v, double target, bool asserted) {
      CheckRecord c;
      c.name = std::string(what) + "[s=" + std::to_string(r.s) + "]";
      c.lhs = v;
      c.rhs = target;
      c.tol = tol;
      const double dev = r.deviation(v, target);
      c.pass = !asserted || dev <= tol;
      c.skipped = !asserted;
      c.detail = "relative deviation " + std::to_string(dev) + (asserted ? "" : " (reported only)");
      out.push_back(c);
    };
    add("full", r.full, r.full_target, true);
    add("plus_plus", r.plus_plus, r.plus_plus_target, true);
    add("semirestricted", r.semirestricted, r.semirestricted_target, zero);
    add("projected", r.projected, r.projected_target, zero);
  }
  return out;
}

HardyReport hardy_sobolev_report(const FracParams& params, const OptimizerConfig& cfg, const QuadratureSpec& spec) {
  params.validate();
  if (!params.sigma) throw PreconditionError("hardy_sobolev_report: requires sigma");
  cfg.validate();
  const int n = params.n;
  const double sigma = *params.sigma;
  const OperatorKind dir{Operator::Dirichlet, sigma};
  HardyReport rep;
  const TrialFunction base = params.fractional() ? trial::make_bubble(params) : trial::make_sigma_bubble(n, sigma);
  for (Operator op : {Operator::Dirichlet, Operator::Restricted, Operator::Spectral, Operator::Semirestricted}) {
    guarded(rep.checks, "quotient[" + std::string(to_string(op)) + "]",
            [&] { rep.quotients.push_back(rayleigh(base, {op, sigma}, params, spec)); });
  }
  // even trial: spectral quotient = 2^{-2 sigma/n} x Dirichlet quotient of the even extension
  guarded(rep.checks, "even_trial_factor", [&] {
    const auto g = trial::make_gaussian({0.0, n >= 2 ? 0.4 : 0.0, 0.0});
    const auto sp = rayleigh(g, {Operator::Spectral, sigma}, params, spec);
    const auto fd = rayleigh(g, dir, params, spec);
    const double rhs = std::pow(2.0, -2.0 * sigma / n) * fd.quotient;
    CheckRecord c;
    c.name = "even_trial_factor";
    c.lhs = sp.quotient;
    c.rhs = rhs;
    c.tol = 0.03;
    c.pass = std::abs(sp.quotient - rhs) <= 0.03 * std::abs(rhs);
    rep.checks.push_back(c);
  });
  // classical case: U^(sigma) against radial perturbations U (1 + eps bump)
  if (!params.fractional() && n == 3) {
    guarded(rep.checks, "local_minimality", [&] {
      const auto U = trial::make_sigma_bubble(n, sigma);
      const double q0 = rayleigh(U, dir, params, spec).quotient;
      std::mt19937_64 rng(cfg.seed);
      std::uniform_real_distribution<double> width(0.3, 3.0);
      const double eps = 0.05;
      for (int k = 0; k < 5; ++k) {
        const double w = width(rng);
        const double sign = (rng() & 1u) ? 1.0 : -1.0;
        const auto bump = trial::make_gaussian({0.0, 0.0, 0.0}, w);
        const auto pert = trial::multiply(U, trial::combine({{1.0, trial::make_constant(1.0)}, {sign * eps, bump}}));
        const auto r = rayleigh(pert, dir, params, spec);
        CheckRecord c;
        c.name = "local_minimality[" + std::to_string(k) + "]";
        c.lhs = q0;
        c.rhs = r.quotient;
        c.pass = q0 <= r.quotient;
        c.detail = "bump width " + std::to_string(w) + ", sign " + (sign > 0 ? "+" : "-");
        rep.checks.push_back(c);
      }
    });
  }
  return rep;
}

}  // namespace analysis
}  // namespace fraclap
