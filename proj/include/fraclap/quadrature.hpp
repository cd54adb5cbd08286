#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>

#include "fraclap/specfun.hpp"
#include "fraclap/trialspace.hpp"
#include "json.hpp"

namespace fraclap {

/// Integration domain Z of a double integral over R^n x R^n.
enum class Region { FullSpace, PlusPlus, PlusMinus, MinusMinus, SemiRestricted };

std::string_view to_string(Region r);
Region region_from_string(std::string_view name);

enum class Method {
  TensorGauss,    // n = 1: nested adaptive quadrature (tanh-sinh / exp-sinh / Gauss-Kronrod)
  AdaptivePolar,  // n <= 3: tensor Gauss in mapped coordinates times a sphere product rule
  ImportanceMC,   // randomised Sobol points with a heavy-tailed proposal, 16 shift replicates
};

std::string_view to_string(Method m);
Method method_from_string(std::string_view name);

struct QuadratureSpec {
  Method method = Method::TensorGauss;
  std::uint64_t budget = 100000;
  double split_radius = 0.5;  // delta: near/far split of |x - y|
  std::uint64_t seed = 42;
  double target_rel_tol = 1e-6;

  void validate() const;
  /// TensorGauss at 1e-6 for n = 1, ImportanceMC at 1e-2 with budget 1e6 otherwise.
  static QuadratureSpec defaults_for(int n);

  nlohmann::json to_json() const;
  static QuadratureSpec from_json(const nlohmann::json& j);
  static QuadratureSpec from_json(const nlohmann::json& j, const QuadratureSpec& fallback);

  friend bool operator==(const QuadratureSpec&, const QuadratureSpec&) = default;
};

struct EnergyEstimate {
  double value = 0.0;
  double err_est = 0.0;
  std::uint64_t nodes = 0;
  QuadratureSpec spec;
  /// false when the achieved error exceeds target_rel_tol * |value|.
  bool converged = true;

  double rel_err() const { return value != 0.0 ? err_est / std::abs(value) : err_est; }
};

/// Weight of a single integral: none, |x_1|^a or |x|^a.
struct Weight {
  enum class Kind { None, PowerX1, PowerAbsX };
  Kind kind = Kind::None;
  double exponent = 0.0;

  static Weight none() { return {}; }
  static Weight power_x1(double a) { return {Kind::PowerX1, a}; }
  static Weight power_abs_x(double a) { return {Kind::PowerAbsX, a}; }
  double operator()(const Point& x) const;
};

/// Optional store consulted by the energy entry points (installed by the CLI cache).
class EnergyMemo {
 public:
  virtual ~EnergyMemo() = default;
  virtual std::optional<EnergyEstimate> lookup(const std::string& key) = 0;
  virtual void store(const std::string& key, const EnergyEstimate& e) = 0;
};

/// Installs a memo for the lifetime of the guard (one run per process).
class ScopedEnergyMemo {
 public:
  explicit ScopedEnergyMemo(EnergyMemo* memo);
  ~ScopedEnergyMemo();
  ScopedEnergyMemo(const ScopedEnergyMemo&) = delete;
  ScopedEnergyMemo& operator=(const ScopedEnergyMemo&) = delete;

 private:
  EnergyMemo* previous_;
};

/// Worker count from FRACLAP_THREADS (0 or unset = hardware concurrency).
unsigned worker_count();

namespace quadrature {

/// (C_{n,s}/2) iint_Z (u(x)-u(y))^2 / |x-y|^{n+2s} dx dy.
EnergyEstimate energy(const TrialFunction& u, Region z, const FracParams& params, const QuadratureSpec& spec);

/// Polarised form (C_{n,s}/2) iint_Z (u(x)-u(y))(v(x)-v(y)) / |x-y|^{n+2s}.
EnergyEstimate bilinear_energy(const TrialFunction& u, const TrialFunction& v, Region z, const FracParams& params,
                               const QuadratureSpec& spec);

/// (C_{n,s}/2) iint_Z u(x) u(y) (phi(x)-phi(y))^2 / |x-y|^{n+2s}: the cutoff commutator term.
EnergyEstimate commutator_energy(const TrialFunction& u, const TrialFunction& phi, Region z, const FracParams& params,
                                 const QuadratureSpec& spec);

/// int_half w |u|^p dx (no root).
EnergyEstimate lp_integral(const TrialFunction& u, double p, Half half, const Weight& w, int n,
                           const QuadratureSpec& spec);
/// (int_half w |u|^p dx)^{1/p}.
EnergyEstimate lp_norm(const TrialFunction& u, double p, Half half, const Weight& w, int n,
                       const QuadratureSpec& spec);

/// Spectral Neumann form of u on R^n_+, evaluated as half the full-space energy of its even extension.
EnergyEstimate spectral_energy(const TrialFunction& u, const FracParams& params, const QuadratureSpec& spec);

/// int_0^inf xi^{2s} |F_c u(xi)|^2 d xi with F_c the cosine transform (n = 1 only).
EnergyEstimate cosine_transform_energy(const TrialFunction& u, const FracParams& params,
                                       const QuadratureSpec& spec);

/// int_half |grad u|^2 dx.
EnergyEstimate dirichlet_energy(const TrialFunction& u, Half half, int n, const QuadratureSpec& spec);

/// C_{n,s} P.V. int_half (u(x)-u(y)) / |x-y|^{n+2s} dy. Throws NumericalError if the
/// symmetric shell sums do not settle.
double regional_frac_laplacian_at(const TrialFunction& u, const Point& x, Half half, const FracParams& params,
                                  const QuadratureSpec& spec);

struct TraceEstimate {
  double value = 0.0;
  double spread = 0.0;  // disagreement between extrapolants
  bool converged = true;
};

/// -(2s-1) lim_{x1 -> 0+} x1^{1-2s} (u(x1,x') - u(0,x')) by Richardson extrapolation over h, h/2, h/4.
TraceEstimate neumann_trace(const TrialFunction& u, const Point& xprime, const FracParams& params,
                            const QuadratureSpec& spec);

/// Generic single integral int_half f(x) dx on the engine selected by spec.
EnergyEstimate integrate(const std::function<double(const Point&)>& f, Half half, int n, const Hint& hint,
                         const QuadratureSpec& spec);

}  // namespace quadrature
}  // namespace fraclap
