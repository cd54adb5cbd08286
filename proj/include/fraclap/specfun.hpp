#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace fraclap {

/// Raised when an argument violates a documented precondition.
class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a numerical routine cannot deliver a trustworthy value.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dimension n, fractional order s and an optional Hardy-Sobolev exponent sigma.
///
/// s is accepted on (0, 1]; s == 1 denotes the classical (local) endpoint and is
/// only meaningful for closed forms and the classical Dirichlet integral.
struct FracParams {
  int n = 1;
  double s = 0.5;
  std::optional<double> sigma;

  /// Validating factory. Throws PreconditionError naming the violated constraint.
  static FracParams make(int n, double s, std::optional<double> sigma = std::nullopt);

  void validate() const;

  /// 2n / (n - 2s).
  double critical_exponent() const;
  /// 2n / (n - 2 sigma); requires sigma.
  double sigma_exponent() const;

  bool fractional() const { return s < 1.0; }

  friend bool operator==(const FracParams&, const FracParams&) = default;
};

enum class ConstantName { C_ns, gamma_s, S_s, B_s, S_sp_neumann };

std::string_view to_string(ConstantName name);

struct ConstantValue {
  double value = 0.0;
  ConstantName name = ConstantName::C_ns;
  FracParams params;
  std::optional<double> beta;
};

namespace specfun {

/// Gamma function by a Lanczos approximation (g = 7, 9 terms) with reflection.
double gamma(double x);
/// log|Gamma(x)| for x > 0.
double log_gamma(double x);

/// C_{n,s}, the normalisation of the fractional Laplacian kernel.
ConstantValue c_frac(const FracParams& params);
/// Half-space kernel mass gamma_s (independent of n).
ConstantValue gamma_half(double s);
/// Sharp fractional Sobolev constant; accepts s in (0, n/2).
ConstantValue sobolev_const(const FracParams& params);
/// Gamma ratio Gamma(1-beta) Gamma(2s+beta) / Gamma(2s) on -2s < beta < 1.
ConstantValue b_beta(double s, double beta);
/// 2^{-2s/n} S_s, the spectral Neumann Sobolev constant of the half space.
ConstantValue spectral_neumann_const(const FracParams& params);

/// Distance below which b_beta refuses to evaluate near a pole.
inline constexpr double kPoleGuard = 1e-6;

/// ln(3/2)/ln(2): threshold on 2s/n in the n in {1,2} semirestricted chain.
double strict_sr_threshold();

}  // namespace specfun
}  // namespace fraclap
