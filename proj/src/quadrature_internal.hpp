#pragma once

// Shared machinery of the quadrature translation units: pair forms, the
// radial line integral, outer rules and the deterministic batch runner.

#include <cstdint>
#include <functional>
#include <vector>

#include "fraclap/quadrature.hpp"

namespace fraclap::detail {

/// Values of the form's factors at the anchor point x, cached per line.
struct Anchor {
  Point x{};
  double a = 0.0;
  double b = 0.0;
};

/// Integrand F(x, y) of a double integral against |x-y|^{-n-2s}, split as
/// local(x) + remainder(x, y) so the far field can integrate local(x)
/// against the kernel in closed form.
class PairForm {
 public:
  virtual ~PairForm() = default;
  virtual Anchor anchor(const Point& x) const = 0;
  virtual double full(const Anchor& A, const Point& y) const = 0;
  virtual double local(const Anchor& A) const = 0;
  virtual double remainder(const Anchor& A, const Point& y) const = 0;
  /// lim_{r->0} F(x, x + r w) / r^2.
  virtual double taylor(const Anchor& A, const Point& w) const = 0;
  virtual HyperplaneFeature feature() const = 0;
  /// Ball outside which remainder(x, .) vanishes.
  virtual Support remainder_support() const = 0;
  virtual Hint hint() const = 0;
};

class EnergyForm final : public PairForm {
 public:
  explicit EnergyForm(TrialFunction u) : u_(std::move(u)) {}
  Anchor anchor(const Point& x) const override { return {x, u_.value(x), 0.0}; }
  double full(const Anchor& A, const Point& y) const override {
    const double d = A.a - u_.value(y);
    return d * d;
  }
  double local(const Anchor& A) const override { return A.a * A.a; }
  double remainder(const Anchor& A, const Point& y) const override {
    const double uy = u_.value(y);
    return uy * (uy - 2.0 * A.a);
  }
  double taylor(const Anchor& A, const Point& w) const override {
    const double d = u_.directional(A.x, w);
    return d * d;
  }
  HyperplaneFeature feature() const override { return u_.feature(); }
  Support remainder_support() const override { return u_.support(); }
  Hint hint() const override { return u_.hint(); }

 private:
  TrialFunction u_;
};

class BilinearForm final : public PairForm {
 public:
  BilinearForm(TrialFunction u, TrialFunction v) : u_(std::move(u)), v_(std::move(v)) {}
  Anchor anchor(const Point& x) const override { return {x, u_.value(x), v_.value(x)}; }
  double full(const Anchor& A, const Point& y) const override {
    return (A.a - u_.value(y)) * (A.b - v_.value(y));
  }
  double local(const Anchor& A) const override { return A.a * A.b; }
  double remainder(const Anchor& A, const Point& y) const override {
    const double uy = u_.value(y);
    const double vy = v_.value(y);
    return uy * vy - A.a * vy - A.b * uy;
  }
  double taylor(const Anchor& A, const Point& w) const override {
    return u_.directional(A.x, w) * v_.directional(A.x, w);
  }
  HyperplaneFeature feature() const override { return std::max(u_.feature(), v_.feature()); }
  Support remainder_support() const override;
  Hint hint() const override { return u_.hint(); }

 private:
  TrialFunction u_, v_;
};

/// u(x) u(y) (phi(x) - phi(y))^2.
class CommutatorForm final : public PairForm {
 public:
  CommutatorForm(TrialFunction u, TrialFunction phi) : u_(std::move(u)), phi_(std::move(phi)) {}
  Anchor anchor(const Point& x) const override { return {x, u_.value(x), phi_.value(x)}; }
  double full(const Anchor& A, const Point& y) const override {
    if (A.a == 0.0) return 0.0;
    const double d = A.b - phi_.value(y);
    return A.a * u_.value(y) * d * d;
  }
  double local(const Anchor&) const override { return 0.0; }
  double remainder(const Anchor& A, const Point& y) const override { return full(A, y); }
  double taylor(const Anchor& A, const Point& w) const override {
    const double d = phi_.directional(A.x, w);
    return A.a * A.a * d * d;
  }
  HyperplaneFeature feature() const override { return std::max(u_.feature(), phi_.feature()); }
  Support remainder_support() const override { return u_.support(); }
  Hint hint() const override { return u_.hint(); }

 private:
  TrialFunction u_, phi_;
};

struct LineConfig {
  double s = 0.5;
  double delta = 0.5;
  double r_switch = 1e-4;  // below this, F is modelled instead of sampled
  double tol = 1e-8;
  unsigned max_depth = 12;
  // Absolute floor tol * floor_ref * (L / (L + |x - c|))^floor_power for the line
  // from anchor x (c, L from the hint): lines far out, whose integrand is
  // rounding noise of a cancellation, are not refined below what the outer
  // integral can see. floor_ref = 0 disables it.
  double floor_ref = 0.0;
  double floor_power = 1.0;
  double abs_tol = 0.0;  // set per line from the floor
};

struct LineResult {
  double value = 0.0;
  double error = 0.0;
};

/// int_{r >= 0, x + r w in yhalf} F(x, x + r w) r^{-1-2s} dr.
LineResult line_integral(const PairForm& f, const Anchor& A, const Point& w, Half yhalf, const LineConfig& cfg,
                         std::uint64_t& evals);

/// Sphere quadrature rule (directions and weights summing to |S^{n-1}|).
struct Direction {
  Point w{};
  double weight = 0.0;
};
/// With `toward` (a unit vector) and alpha > 0 the pieces cluster around
/// that direction at angular offsets alpha, 4 alpha, 16 alpha.
std::vector<Direction> sphere_rule(int n, int m, const Point* toward = nullptr, double alpha = 0.0);
double sphere_area(int n);

/// Gauss-Legendre nodes/weights on [-1, 1].
void gauss_legendre(int m, std::vector<double>& nodes, std::vector<double>& weights);

/// Deterministic fan-out: runs task(i) for i in [0, count) on worker_count()
/// threads. Callers store per-task results and reduce in index order.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& task);

/// Adaptive integral of f over (0, inf) with breakpoints at `centre` and a
/// tail beyond centre + 4 scale (tanh-sinh on finite pieces, exp-sinh tail).
struct HalfLineResult {
  double value = 0.0;
  double error = 0.0;
};
HalfLineResult integrate_half_line(const std::function<double(double)>& f, double centre, double scale, double tol);

/// (a^{-p} - b^{-p}) / p for 0 < a < b <= inf, stable for small p.
double power_window(double a, double b, double p);
/// power_window(a, a + width, p), accurate when width << a.
double power_window_width(double a, double width, double p);
/// (b^q - a^q) / q for 0 <= a < b, stable for small q.
double rising_window(double a, double b, double q);

nlohmann::json params_json(const FracParams& p);

}  // namespace fraclap::detail
