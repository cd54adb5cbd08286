#pragma once

// The best extension P_s from R^n_+ to R^n_- and the diagnostics around it.

#include <vector>

#include "fraclap/quadrature.hpp"
#include "fraclap/trialspace.hpp"

namespace fraclap {

struct ExtensionResult {
  /// u on R^n_+ (and on the hyperplane), P_s u on R^n_-.
  TrialFunction extended;
  /// ||u||_{L^{2*_s}(R^n_+)}, the norm the extension is measured against.
  EnergyEstimate source_norm;
};

struct PsValue {
  double value = 0.0;
  double error = 0.0;
  /// The source decays slower than |y|^{-n}: the tail is resolved only up to
  /// the quadrature's reach.
  bool slow_tail = false;
};

struct KernelIdentity {
  double lhs = 0.0;
  double rhs = 0.0;
  /// beta within 0.05 of an endpoint of (-2s, 1), where both sides blow up.
  bool near_divergence = false;
};

struct MappingBound {
  double lhs = 0.0;
  double rhs = 0.0;
};

struct TailSample {
  Point x{};
  double value = 0.0;
  double lower_bound = 0.0;
  bool holds = false;
};

namespace extension {

/// (C_{n,s}/gamma_s) |x_1|^{2s} int_{R^n_+} u(y) |x-y|^{-n-2s} dy for x_1 < 0.
double apply_Ps(const TrialFunction& u, const Point& x, const FracParams& params, const QuadratureSpec& spec);
PsValue apply_Ps_checked(const TrialFunction& u, const Point& x, const FracParams& params,
                         const QuadratureSpec& spec);
/// Gradient of P_s u at x_1 < 0, differentiating under the integral.
Point apply_Ps_gradient(const TrialFunction& u, const Point& x, const FracParams& params,
                        const QuadratureSpec& spec);

ExtensionResult extend(const TrialFunction& u, const FracParams& params, const QuadratureSpec& spec);
ExtensionResult extend(const TrialFunction& u, const FracParams& params);

/// (|x_1|^{2s+beta} int_{R^n_+} y_1^{-beta} |x-y|^{-n-2s} dy, (gamma_s / C_{n,s}) B_s(beta)).
KernelIdentity kernel_beta_identity(const Point& x, double beta, const FracParams& params,
                                    const QuadratureSpec& spec);

/// Weighted L^p bound for P_s:
///   int_{R^n_-} |x_1|^{-tp} |P_s u|^p  <=  B_s(alpha/(p-1))^{p-1} B_s(alpha+tp-2s) int_{R^n_+} |x_1|^{-tp} |u|^p.
MappingBound mapping_bound_check(const TrialFunction& u, double p, double t, double alpha, const FracParams& params,
                                 const QuadratureSpec& spec);

/// P_s of a compactly supported nonnegative source against the lower bound
/// c(E) |x_1|^{2s} / (R + |x|)^{n+2s}, c(E) = (C_{n,s}/gamma_s) int E.
std::vector<TailSample> tail_decay_probe(const TrialFunction& indicator, const std::vector<Point>& points,
                                         const FracParams& params, const QuadratureSpec& spec);

/// Makes {"kind": "extension", ...} descriptors loadable by TrialFunction::from_json.
void register_descriptor();

}  // namespace extension
}  // namespace fraclap
