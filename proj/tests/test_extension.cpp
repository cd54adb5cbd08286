#include <cmath>
#include <numbers>
#include <thread>

#include "doctest.h"
#include "fraclap/extension.hpp"

using namespace fraclap;
using std::numbers::pi;

namespace {

const QuadratureSpec kSpec1 = QuadratureSpec::defaults_for(1);

// P_s takes no critical exponent, so (n=1, s=1/2) is legal here even though
// FracParams::make rejects it.
FracParams raw(int n, double s) { return FracParams{n, s, std::nullopt}; }

}  // namespace

TEST_CASE("P_s reproduces constants") {
  const auto one = trial::make_constant(1.0);
  for (int n : {1, 2, 3}) {
    const auto p = FracParams::make(n, 0.25);
    const auto sp = QuadratureSpec::defaults_for(n);
    const Point x = n == 1 ? Point{-0.7, 0, 0} : Point{-0.7, 0.2, n == 3 ? -0.1 : 0.0};
    CHECK(extension::apply_Ps(one, x, p, sp) == doctest::Approx(1.0).epsilon(1e-9));
  }
  CHECK(extension::apply_Ps(trial::make_constant(-2.5), {-3, 0, 0}, raw(1, 0.5), kSpec1) ==
        doctest::Approx(-2.5).epsilon(1e-9));
}

TEST_CASE("kernel moment identity") {
  SUBCASE("n=1, s=1/2, beta=1/2 gives pi/2") {
    const auto k = extension::kernel_beta_identity({-1, 0, 0}, 0.5, raw(1, 0.5), kSpec1);
    CHECK(k.rhs == doctest::Approx(pi / 2).epsilon(1e-12));
    CHECK(k.lhs == doctest::Approx(pi / 2).epsilon(1e-8));
    CHECK_FALSE(k.near_divergence);
  }
  SUBCASE("x-independence, n=2") {
    const auto p = FracParams::make(2, 0.4);
    const auto sp = QuadratureSpec::defaults_for(2);
    const auto a = extension::kernel_beta_identity({-1, 0, 0}, 0.3, p, sp);
    const auto b = extension::kernel_beta_identity({-3, 2, 0}, 0.3, p, sp);
    CHECK(a.lhs == doctest::Approx(b.lhs).epsilon(1e-8));
    CHECK(a.lhs == doctest::Approx(a.rhs).epsilon(1e-8));
  }
  SUBCASE("n=3") {
    const auto p = FracParams::make(3, 0.5);
    const auto k = extension::kernel_beta_identity({-2, 0.5, 0}, 0.3, p, QuadratureSpec::defaults_for(3));
    CHECK(k.lhs == doctest::Approx(k.rhs).epsilon(1e-7));
  }
  SUBCASE("beta = 0 is the gamma_s normalisation") {
    for (int n : {1, 2}) {
      const auto p = FracParams::make(n, 0.3);
      const double expect = specfun::gamma_half(0.3).value / specfun::c_frac(p).value;
      for (const Point& x : {Point{-0.2, 0, 0}, Point{-5, 0, 0}}) {
        const auto k = extension::kernel_beta_identity(x, 0.0, p, QuadratureSpec::defaults_for(n));
        CHECK(k.rhs == doctest::Approx(expect).epsilon(1e-12));
        CHECK(k.lhs == doctest::Approx(expect).epsilon(1e-8));
      }
    }
  }
  SUBCASE("endpoints") {
    const auto p = FracParams::make(1, 0.25);
    CHECK(extension::kernel_beta_identity({-1, 0, 0}, 0.97, p, kSpec1).near_divergence);
    CHECK(extension::kernel_beta_identity({-1, 0, 0}, -0.47, p, kSpec1).near_divergence);
    CHECK_THROWS_AS(extension::kernel_beta_identity({-1, 0, 0}, 1.0, p, kSpec1), PreconditionError);
    CHECK_THROWS_AS(extension::kernel_beta_identity({-1, 0, 0}, -0.5, p, kSpec1), PreconditionError);
  }
}

TEST_CASE("P_s of the bubble against independent quadrature") {
  const auto p = FracParams::make(1, 0.25);
  const auto u = trial::make_bubble(p);
  // mpmath, 20 digits: (C/gamma) |x|^{1/2} int_0^inf (1+y^2)^{-1/4} |x-y|^{-3/2} dy at x = -1
  CHECK(extension::apply_Ps(u, {-1, 0, 0}, p, kSpec1) == doctest::Approx(0.55743474091519064).epsilon(1e-10));
  const Point g = extension::apply_Ps_gradient(u, {-1, 0, 0}, p, kSpec1);
  CHECK(g[0] == doctest::Approx(0.13935868522883595).epsilon(1e-8));

  // scipy dblquad for n = 2, s = 1/2 at x = (-1, 0.3)
  const auto p2 = FracParams::make(2, 0.5);
  const auto sp2 = QuadratureSpec::defaults_for(2);
  const auto u2 = trial::make_bubble(p2);
  CHECK(extension::apply_Ps(u2, {-1, 0.3, 0}, p2, sp2) == doctest::Approx(0.45559594146665827).epsilon(1e-9));

  SUBCASE("gradient against central differences, n=2") {
    const Point x{-0.8, 0.4, 0};
    const Point gr = extension::apply_Ps_gradient(u2, x, p2, sp2);
    const double h = 1e-5;
    for (int i = 0; i < 2; ++i) {
      Point a = x, b = x;
      a[i] += h;
      b[i] -= h;
      const double fd = (extension::apply_Ps(u2, a, p2, sp2) - extension::apply_Ps(u2, b, p2, sp2)) / (2 * h);
      CHECK(gr[i] == doctest::Approx(fd).epsilon(1e-6));
    }
  }
  SUBCASE("far points keep the |x|^{-1/2} asymptote") {
    for (double r : {1e20, 1e30, 1e100, 1e200}) {
      CHECK(extension::apply_Ps(u, {-r, 0, 0}, p, kSpec1) * std::sqrt(r) == doctest::Approx(1.0).epsilon(1e-8));
    }
  }
}

TEST_CASE("extend: restriction, linearity, positivity, idempotence") {
  const auto p = FracParams::make(1, 0.25);
  const auto u = trial::make_bubble(p);
  const auto gs = trial::make_gaussian({0.5, 0, 0}, 0.7);
  const auto Pu = extension::extend(u, p, kSpec1).extended;
  const auto Pg = extension::extend(gs, p, kSpec1).extended;

  for (double x : {0.0, 0.3, 2.0, 40.0}) CHECK(Pu.value({x, 0, 0}) == u.value({x, 0, 0}));
  for (double x : {-1e-6, -0.01, -1.0, -50.0}) CHECK(std::isfinite(Pu.value({x, 0, 0})));

  const auto combo = extension::extend(trial::combine({{2.0, u}, {-3.0, gs}}), p, kSpec1).extended;
  for (double x : {-0.05, -0.7, -4.0}) {
    const Point X{x, 0, 0};
    CHECK(combo.value(X) == doctest::Approx(2.0 * Pu.value(X) - 3.0 * Pg.value(X)).epsilon(1e-9));
    CHECK(Pg.value(X) > 0.0);
  }

  // P_s only sees the data on R^n_+, so projecting the extension again changes nothing
  const auto PPu = extension::extend(Pu, p, kSpec1).extended;
  double defect = 0.0;
  for (int i = 1; i <= 50; ++i) {
    const Point X{-0.1 * i, 0, 0};
    defect = std::max(defect, std::abs(PPu.value(X) - Pu.value(X)));
  }
  CHECK(defect <= 1e-6);
}

TEST_CASE("extension descriptor: feature, support, cache, JSON") {
  const auto p = FracParams::make(1, 0.25);
  const auto u = trial::make_bubble(p);
  const auto r = extension::extend(u, p, kSpec1);
  CHECK(r.extended.feature() == HyperplaneFeature::Holder);
  CHECK_FALSE(r.extended.support().bounded);
  CHECK(r.source_norm.value ==
        doctest::Approx(quadrature::lp_norm(u, p.critical_exponent(), Half::Plus, Weight::none(), 1, kSpec1).value));

  const Point X{-0.37, 0, 0};
  const double first = r.extended.value(X);
  CHECK(r.extended.value(X) == first);

  std::vector<double> serial, parallel(8);
  for (int i = 0; i < 8; ++i) serial.push_back(extension::apply_Ps(u, {-0.2 - i, 0, 0}, p, kSpec1));
  {
    std::vector<std::thread> threads;
    for (int i = 0; i < 8; ++i) threads.emplace_back([&, i] { parallel[i] = r.extended.value({-0.2 - i, 0, 0}); });
    for (auto& t : threads) t.join();
  }
  for (int i = 0; i < 8; ++i) CHECK(parallel[i] == serial[i]);

  const auto j = r.extended.to_json();
  CHECK(j.at("kind") == "extension");
  const auto back = TrialFunction::from_json(j);
  CHECK(back.value(X) == first);
  CHECK(back.value({1.5, 0, 0}) == u.value({1.5, 0, 0}));
}

TEST_CASE("preconditions and tail flag") {
  const auto p = FracParams::make(1, 0.25);
  const auto u = trial::make_bubble(p);
  CHECK_THROWS_AS(extension::apply_Ps(u, {0.1, 0, 0}, p, kSpec1), PreconditionError);
  CHECK_THROWS_AS(extension::apply_Ps(u, {0.0, 0, 0}, p, kSpec1), PreconditionError);
  CHECK_THROWS_AS(extension::apply_Ps(u, {-1, 0.5, 0}, p, kSpec1), PreconditionError);
  CHECK_THROWS_AS(extension::extend(u, raw(1, 1.0), kSpec1), PreconditionError);
  CHECK_THROWS_AS(extension::extend(u, raw(4, 0.5), kSpec1), PreconditionError);
  // U_{1/4} decays like |y|^{-1/2}, slower than |y|^{-n}
  CHECK(extension::apply_Ps_checked(u, {-1, 0, 0}, p, kSpec1).slow_tail);
  CHECK_FALSE(extension::apply_Ps_checked(trial::make_gaussian({1, 0, 0}), {-1, 0, 0}, p, kSpec1).slow_tail);
}

TEST_CASE("minimality and Pythagoras against the even extension") {
  const auto p = FracParams::make(1, 0.25);
  const auto u = trial::make_bubble(p);
  const auto Pu = extension::extend(u, p, kSpec1).extended;
  const auto even = trial::even_extend(u);
  const auto eP = quadrature::energy(Pu, Region::SemiRestricted, p, kSpec1);
  const auto eE = quadrature::energy(even, Region::SemiRestricted, p, kSpec1);
  const auto eD = quadrature::energy(trial::combine({{1.0, even}, {-1.0, Pu}}), Region::SemiRestricted, p, kSpec1);
  MESSAGE("E(Pu)=" << eP.value << " E(even)=" << eE.value << " E(even-Pu)=" << eD.value);
  CHECK(eP.value < eE.value - 3 * (eP.err_est + eE.err_est));
  CHECK(std::abs(eD.value - (eE.value - eP.value)) <= eD.err_est + eE.err_est + eP.err_est);
}

TEST_CASE("Euler-Lagrange residual of the extension on R^n_-") {
  const auto p = FracParams::make(1, 0.25);
  const auto u = trial::make_bubble(p);
  const auto Pu = extension::extend(u, p, kSpec1).extended;
  const auto even = trial::even_extend(u);
  for (double x : {-0.05, -0.5, -2.0, -10.0}) {
    const double res = quadrature::regional_frac_laplacian_at(Pu, {x, 0, 0}, Half::Plus, p, kSpec1);
    CHECK(std::abs(res) <= 1e-8);
    CHECK(quadrature::regional_frac_laplacian_at(even, {x, 0, 0}, Half::Plus, p, kSpec1) > 1e-3);
  }
}

TEST_CASE("weighted mapping bound") {
  const auto p = FracParams::make(1, 0.25);
  // U_{1/4} is not square integrable on the half line, so the bound is probed
  // with a cutoff bubble.
  const auto cb = trial::make_cutoff_bubble(trial::make_bubble(p), 2.0, 1.0);
  const auto m = extension::mapping_bound_check(cb, 2.0, 0.0, 0.25, p, kSpec1);
  CHECK(m.lhs > 0.0);
  CHECK(m.lhs < m.rhs);

  const auto q = FracParams::make(1, 0.09);
  const double coef = std::pow(std::tgamma(0.3) * std::tgamma(0.88) / std::tgamma(0.18), 2);
  CHECK(coef < 1.0);
  const auto cq = trial::make_cutoff_bubble(trial::make_bubble(q), 2.0, 1.0);
  const auto mq = extension::mapping_bound_check(cq, 2.0, 0.09, 0.7, q, kSpec1);
  const double weighted = quadrature::lp_integral(cq, 2.0, Half::Plus, Weight::power_x1(-0.18), 1, kSpec1).value;
  CHECK(mq.rhs == doctest::Approx(coef * weighted).epsilon(1e-6));
  CHECK(mq.lhs < mq.rhs);

  const auto z = extension::mapping_bound_check(trial::make_constant(0.0), 2.0, 0.0, 0.25, p, kSpec1);
  CHECK(z.lhs == 0.0);
  CHECK(z.rhs == 0.0);

  CHECK_THROWS_WITH_AS(extension::mapping_bound_check(cb, 2.0, 2.0, 0.25, p, kSpec1), doctest::Contains("t"),
                       PreconditionError);
  CHECK_THROWS_AS(extension::mapping_bound_check(cb, 1.0, 0.0, 0.25, p, kSpec1), PreconditionError);
  CHECK_THROWS_AS(extension::mapping_bound_check(cb, 2.0, 0.0, 1.2, p, kSpec1), PreconditionError);
  CHECK_THROWS_WITH_AS(extension::mapping_bound_check(trial::make_bubble(p), 2.0, 0.0, 0.25, p, kSpec1),
                       doctest::Contains("weighted L^p"), PreconditionError);
}

TEST_CASE("tail of P_s for a compactly supported source") {
  for (int n : {1, 2}) {
    const auto p = FracParams::make(n, 0.25);
    const auto sp = QuadratureSpec::defaults_for(n);
    const double k = std::pow(2.0, 1.0 / n);
    const auto E = trial::make_cutoff_bubble(trial::make_constant(1.0), 0.5, 0.25, {2, 0, 0});
    const auto E2 = trial::make_cutoff_bubble(trial::make_constant(1.0), 0.5 * k, 0.25 * k, {2, 0, 0});
    const std::vector<Point> ray{{-2, 0, 0}, {-4, 0, 0}, {-8, 0, 0}, {-16, 0, 0}};
    const auto a = extension::tail_decay_probe(E, ray, p, sp);
    double partial = 0.0, prev_term = 0.0;
    for (std::size_t i = 0; i < ray.size(); ++i) {
      CHECK(a[i].value > 0.0);
      CHECK(a[i].holds);
      CHECK(a[i].value >= a[i].lower_bound);
      // dyadic shell [r, 2r): value * r^{n-1} * r does not shrink, so the sum grows without bound
      const double r = -ray[i][0];
      const double term = a[i].value * std::pow(r, n);
      CHECK(term >= prev_term);
      partial += term;
      prev_term = term;
    }
    CHECK(partial > 3.0 * (a[0].value * std::pow(2.0, n)));

    const std::vector<Point> far{{-100, 0, 0}, {-1000, 0, 0}};
    const auto f1 = extension::tail_decay_probe(E, far, p, sp);
    const auto f2 = extension::tail_decay_probe(E2, far, p, sp);
    for (std::size_t i = 0; i < far.size(); ++i) CHECK(f2[i].value / f1[i].value == doctest::Approx(2.0).epsilon(0.05));
  }
  const auto p = FracParams::make(1, 0.25);
  CHECK_THROWS_AS(extension::tail_decay_probe(trial::make_bubble(p), {{-1, 0, 0}}, p, kSpec1), PreconditionError);
}
