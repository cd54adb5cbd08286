#include <cmath>
#include <numbers>

#include "doctest.h"
#include "fraclap/analysis.hpp"

using namespace fraclap;

namespace {

const QuadratureSpec kSpec1 = QuadratureSpec::defaults_for(1);
const FracParams kQuarter = FracParams::make(1, 0.25);

QuotientReport q(const TrialFunction& u, Operator op, const FracParams& p = kQuarter) {
  return analysis::rayleigh(u, {op, std::nullopt}, p, kSpec1);
}

bool all_pass(const std::vector<CheckRecord>& checks) {
  bool ok = true;
  for (const auto& c : checks) {
    if (!c.pass) {
      MESSAGE(c.name << " lhs=" << c.lhs << " rhs=" << c.rhs << " " << c.detail);
      ok = false;
    }
  }
  return ok;
}

}  // namespace

TEST_CASE("Rayleigh quotients of the bubble") {
  const auto U = trial::make_bubble(kQuarter);
  const double S = specfun::sobolev_const(kQuarter).value;
  const double Ssp = specfun::spectral_neumann_const(kQuarter).value;

  const auto d = q(U, Operator::Dirichlet);
  CHECK(std::abs(d.quotient - S) <= 2 * kSpec1.target_rel_tol * S);
  CHECK(d.quotient == doctest::Approx(d.numerator.value / (d.denominator.value * d.denominator.value)));
  for (double lam : {0.5, 2.0}) {
    CHECK(q(trial::make_bubble(kQuarter, 0.0, lam), Operator::Dirichlet).quotient ==
          doctest::Approx(d.quotient).epsilon(1e-7));
  }

  const auto sp = q(U, Operator::Spectral);
  CHECK(std::abs(sp.quotient - Ssp) <= 3 * sp.err_est() + 1e-7 * Ssp);

  const auto r = q(U, Operator::Restricted);
  CHECK(adjudicate(Ssp - r.quotient, r.err_est()) == Strictness::Resolved);

  CHECK_THROWS_AS(q(trial::make_constant(0.0), Operator::Dirichlet), PreconditionError);
  CHECK_THROWS_AS(analysis::rayleigh(U, {Operator::Dirichlet, 0.3}, kQuarter, kSpec1), PreconditionError);
}

TEST_CASE("weighted quotient tends to the unweighted one as sigma -> s") {
  const auto U = trial::make_bubble(kQuarter);
  const auto plain = q(U, Operator::Dirichlet);
  const auto w = analysis::rayleigh(U, {Operator::Dirichlet, 0.99 * 0.25}, kQuarter, kSpec1);
  CHECK(std::abs(w.quotient - plain.quotient) <= 0.03 * plain.quotient);
}

TEST_CASE("monotone chain and compact support in the upper half") {
  const auto g = trial::make_gaussian({0.3, 0, 0});
  const auto pp = quadrature::energy(g, Region::PlusPlus, kQuarter, kSpec1).value;
  const auto sr = quadrature::energy(g, Region::SemiRestricted, kQuarter, kSpec1).value;
  const auto full = quadrature::energy(g, Region::FullSpace, kQuarter, kSpec1).value;
  CHECK(pp <= sr);
  CHECK(sr <= full);

  const auto bump =
      trial::make_cutoff_bubble(trial::make_gaussian({2, 0, 0}, 0.5), 0.5, 0.5, {2, 0, 0});
  const auto a = q(bump, Operator::Semirestricted);
  const auto b = q(bump, Operator::Dirichlet);
  CHECK(a.quotient == doctest::Approx(b.quotient).epsilon(1e-6));
}

TEST_CASE("strictness adjudication") {
  CHECK(adjudicate(1.0, 0.1) == Strictness::Resolved);
  CHECK(adjudicate(0.2, 0.1) == Strictness::Unresolved);
  CHECK(adjudicate(-1.0, 0.1) == Strictness::Violated);
  CHECK(to_string(Strictness::Unresolved) == "unresolved");
}

TEST_CASE("optimizer config") {
  OptimizerConfig c;
  CHECK_NOTHROW(c.validate());
  const auto back = OptimizerConfig::from_json(c.to_json());
  CHECK(back.to_json() == c.to_json());
  CHECK_THROWS_AS(OptimizerConfig::from_json({{"restarts", 0}}), PreconditionError);
  CHECK_THROWS_AS(OptimizerConfig::from_json({{"family", "BubblePlusCorrection"}, {"atoms", 4}}),
                  PreconditionError);
  CHECK_THROWS_AS(OptimizerConfig::from_json({{"family", "Simplex"}}), PreconditionError);
}

TEST_CASE("minimisation over the shifted, scaled bubble") {
  OptimizerConfig cfg;
  cfg.restarts = 2;
  cfg.max_iters = 40;
  const double S = specfun::sobolev_const(kQuarter).value;
  const double Ssp = specfun::spectral_neumann_const(kQuarter).value;

  SUBCASE("Dirichlet: the family contains the extremal") {
    const auto m = analysis::minimize_quotient({Operator::Dirichlet, std::nullopt}, kQuarter, cfg, kSpec1);
    CHECK(m.best.quotient == doctest::Approx(S).epsilon(2e-6));
    CHECK(m.best.quotient == m.history_min);
    // scale invariance: every restart lands on the same value
    for (double v : m.restart_values) CHECK(v == doctest::Approx(S).epsilon(1e-4));
  }
  SUBCASE("Spectral: optimum at zero shift") {
    const auto m = analysis::minimize_quotient({Operator::Spectral, std::nullopt}, kQuarter, cfg, kSpec1);
    CHECK(m.best.quotient == doctest::Approx(Ssp).epsilon(1e-6));
    CHECK(m.best_params[0] < 0.05);
  }
  SUBCASE("Restricted: strictly below the spectral constant, consistent with a grid scan") {
    const auto m = analysis::minimize_quotient({Operator::Restricted, std::nullopt}, kQuarter, cfg, kSpec1);
    CHECK(m.best.quotient == m.history_min);
    CHECK(adjudicate(Ssp - m.best.quotient, m.best.err_est()) == Strictness::Resolved);
    double grid_min = 1e300;
    for (double tau : {0.0, 0.25, 0.5, 1.0, 2.0}) {
      for (double lam : {0.5, 1.0, 2.0}) {
        grid_min = std::min(grid_min, q(trial::make_bubble(kQuarter, tau, lam), Operator::Restricted).quotient);
      }
    }
    CHECK(m.best.quotient <= grid_min * (1 + 1e-6));
    MESSAGE("restricted upper bound " << m.best.quotient << " grid " << grid_min);
  }
  SUBCASE("correction atoms") {
    OptimizerConfig c2 = cfg;
    c2.family = OptimizerConfig::Family::BubblePlusCorrection;
    c2.atoms = 1;
    c2.restarts = 1;
    c2.max_iters = 20;
    const auto m = analysis::minimize_quotient({Operator::Restricted, std::nullopt}, kQuarter, c2, kSpec1);
    CHECK(m.best_params.size() == 3);
    CHECK(m.best.quotient < Ssp);
  }
}

TEST_CASE("identity suite, n = 1") {
  const auto checks = analysis::identity_suite(kQuarter, kSpec1, 1e-6);
  CHECK(checks.size() >= 20);
  CHECK(all_pass(checks));
  for (const auto& c : checks) CHECK_FALSE(c.skipped);
}

TEST_CASE("strict semirestricted chain") {
  const auto chain = analysis::strict_sr_chain(FracParams::make(1, 0.45), kSpec1);
  REQUIRE(chain.size() == 2);
  CHECK(chain[0].lhs > 4.0 / 3.0);
  CHECK(chain[0].detail.find("resolved") != std::string::npos);
  CHECK(chain[1].rhs == std::log(1.5) / std::log(2.0));
  CHECK(chain[1].detail == "threshold test holds");
  CHECK(analysis::strict_sr_chain(FracParams::make(3, 0.5), kSpec1)[0].skipped);
}

TEST_CASE("limit sweep on a Gaussian") {
  const auto rows = analysis::limit_sweep(trial::make_gaussian({0.3, 0, 0}), {0.02, 0.98}, 1, kSpec1);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].regime == "s->0");
  CHECK(rows[1].regime == "s->1");
  const auto checks = analysis::limit_checks(rows);
  CHECK(checks.size() == 8);
  CHECK(all_pass(checks));
  CHECK_THROWS_AS(analysis::limit_sweep(trial::make_gaussian({0, 0, 0}), {1.0}, 1, kSpec1), PreconditionError);
}

TEST_CASE("Hardy-Sobolev report, classical n = 3") {
  const auto p = FracParams::make(3, 1.0, 0.5);
  const auto rep = analysis::hardy_sobolev_report(p, OptimizerConfig{}, QuadratureSpec::defaults_for(3));
  CHECK(rep.quotients.size() == 4);
  int minimality = 0;
  for (const auto& c : rep.checks) {
    if (c.name.rfind("local_minimality", 0) == 0) ++minimality;
  }
  CHECK(minimality == 5);
  CHECK(all_pass(rep.checks));
  CHECK_THROWS_AS(analysis::hardy_sobolev_report(FracParams::make(3, 1.0), OptimizerConfig{},
                                                 QuadratureSpec::defaults_for(3)),
                  PreconditionError);
}

TEST_CASE("reports serialise") {
  const auto r = q(trial::make_bubble(kQuarter), Operator::Restricted);
  const auto j = r.to_json();
  CHECK(j.at("operator") == "Restricted");
  CHECK(j.at("quotient").get<double>() == r.quotient);
  CHECK(operator_from_string("Semirestricted") == Operator::Semirestricted);
  CHECK_THROWS_AS(operator_from_string("Neumann"), PreconditionError);
}
