#include "fraclap/specfun.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <sstream>

namespace fraclap {

namespace {

std::string fmt_num(double v) {
  std::ostringstream os;
  os.precision(10);
  os << v;
  return os.str();
}

void require_open_unit(double s, const char* what) {
  if (!(s > 0.0 && s < 1.0)) {
    throw PreconditionError(std::string(what) + ": s must lie in (0,1), got s=" + fmt_num(s));
  }
}

// Lanczos coefficients for g = 7, 9 terms.
constexpr double kLanczosG = 7.0;
constexpr std::array<double, 9> kLanczos = {
    0.99999999999980993,  676.5203681218851,     -1259.1392167224028,
    771.32342877765313,   -176.61502916214059,   12.507343278686905,
    -0.13857109526572012, 9.9843695780195716e-6, 1.5056327351493116e-7};

}  // namespace

FracParams FracParams::make(int n, double s, std::optional<double> sigma) {
  FracParams p{n, s, sigma};
  p.validate();
  return p;
}

void FracParams::validate() const {
  if (n < 1) throw PreconditionError("dimension n must be a positive integer, got n=" + std::to_string(n));
  // n > 2s first: for s > 1 it is usually the constraint the caller meant to respect
  if (!(n > 2.0 * s)) {
    throw PreconditionError("constraint n > 2s violated: n=" + std::to_string(n) + ", s=" + fmt_num(s));
  }
  if (!(s > 0.0 && s <= 1.0)) throw PreconditionError("order s must lie in (0,1], got s=" + fmt_num(s));
  if (sigma) {
    if (!(*sigma > 0.0 && *sigma < s)) {
      throw PreconditionError("constraint 0 < sigma < s violated: sigma=" + fmt_num(*sigma) +
                              ", s=" + fmt_num(s));
    }
  }
}

double FracParams::critical_exponent() const { return 2.0 * n / (n - 2.0 * s); }

double FracParams::sigma_exponent() const {
  if (!sigma) throw PreconditionError("sigma_exponent requires sigma");
  return 2.0 * n / (n - 2.0 * *sigma);
}

std::string_view to_string(ConstantName name) {
  switch (name) {
    case ConstantName::C_ns: return "C_ns";
    case ConstantName::gamma_s: return "gamma_s";
    case ConstantName::S_s: return "S_s";
    case ConstantName::B_s: return "B_s";
    case ConstantName::S_sp_neumann: return "S_sp_neumann";
  }
  return "unknown";
}

namespace specfun {

double gamma(double x) {
  using std::numbers::pi;
  if (x <= 0.0 && x == std::floor(x)) throw NumericalError("gamma: pole at non-positive integer " + fmt_num(x));
  if (x < 0.5) {
    const double sp = std::sin(pi * x);
    if (sp == 0.0) throw NumericalError("gamma: pole at non-positive integer " + fmt_num(x));
    return pi / (sp * gamma(1.0 - x));
  }
  const double z = x - 1.0;
  double a = kLanczos[0];
  const double t = z + kLanczosG + 0.5;
  for (std::size_t i = 1; i < kLanczos.size(); ++i) a += kLanczos[i] / (z + static_cast<double>(i));
  return std::sqrt(2.0 * pi) * std::pow(t, z + 0.5) * std::exp(-t) * a;
}

double log_gamma(double x) {
  using std::numbers::pi;
  if (!(x > 0.0)) throw PreconditionError("log_gamma: x must be positive");
  if (x < 0.5) return std::log(pi / std::sin(pi * x)) - log_gamma(1.0 - x);
  const double z = x - 1.0;
  double a = kLanczos[0];
  const double t = z + kLanczosG + 0.5;
  for (std::size_t i = 1; i < kLanczos.size(); ++i) a += kLanczos[i] / (z + static_cast<double>(i));
  return 0.5 * std::log(2.0 * pi) + (z + 0.5) * std::log(t) - t + std::log(a);
}

ConstantValue c_frac(const FracParams& params) {
  using std::numbers::pi;
  // C_{n,s} is defined for every n >= 1; n > 2s is not needed here (C_{1,1/2} = 1/pi).
  require_open_unit(params.s, "c_frac");
  if (params.n < 1) throw PreconditionError("c_frac: n must be a positive integer");
  const double n = params.n;
  const double s = params.s;
  const double v = s * std::pow(2.0, 2.0 * s) * gamma(n / 2.0 + s) /
                   (std::pow(pi, n / 2.0) * gamma(1.0 - s));
  return {v, ConstantName::C_ns, params, std::nullopt};
}

ConstantValue gamma_half(double s) {
  using std::numbers::pi;
  require_open_unit(s, "gamma_half");
  const double v = std::pow(2.0, 2.0 * s - 1.0) * gamma(s + 0.5) / (std::sqrt(pi) * gamma(1.0 - s));
  FracParams p{1, s, std::nullopt};
  return {v, ConstantName::gamma_s, p, std::nullopt};
}

ConstantValue sobolev_const(const FracParams& params) {
  using std::numbers::pi;
  const double n = params.n;
  const double s = params.s;
  if (params.n < 1) throw PreconditionError("sobolev_const: n must be positive");
  if (!(s > 0.0 && s < n / 2.0)) {
    throw PreconditionError("sobolev_const: requires 0 < s < n/2 (constraint n > 2s), got n=" +
                            std::to_string(params.n) + ", s=" + fmt_num(s));
  }
  const double ratio = gamma(n / 2.0 + s) / gamma(n / 2.0 - s);
  const double bracket = std::exp(log_gamma(n / 2.0) - log_gamma(n));
  // Sharp constant for the C_{n,s}-normalised energy: 2^{2s} pi^{s}, not (2 pi)^{2s}.
  const double v = std::pow(4.0, s) * std::pow(pi, s) * ratio * std::pow(bracket, 2.0 * s / n);
  return {v, ConstantName::S_s, params, std::nullopt};
}

ConstantValue b_beta(double s, double beta) {
  require_open_unit(s, "b_beta");
  if (!(beta > -2.0 * s && beta < 1.0)) {
    throw PreconditionError("b_beta: beta must lie in (-2s, 1), got beta=" + fmt_num(beta) +
                            " with s=" + fmt_num(s));
  }
  if (std::abs(beta - 1.0) < kPoleGuard || std::abs(beta + 2.0 * s) < kPoleGuard) {
    throw NumericalError("b_beta: beta=" + fmt_num(beta) + " within 1e-6 of a pole");
  }
  const double v = gamma(1.0 - beta) * gamma(2.0 * s + beta) / gamma(2.0 * s);
  FracParams p{1, s, std::nullopt};
  return {v, ConstantName::B_s, p, beta};
}

ConstantValue spectral_neumann_const(const FracParams& params) {
  auto c = sobolev_const(params);
  c.value *= std::pow(2.0, -2.0 * params.s / params.n);
  c.name = ConstantName::S_sp_neumann;
  return c;
}

double strict_sr_threshold() { return std::log(1.5) / std::log(2.0); }

}  // namespace specfun
}  // namespace fraclap
