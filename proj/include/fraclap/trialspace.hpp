#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <memory>
#include <utility>
#include <variant>
#include <vector>

#include "fraclap/specfun.hpp"
#include "json.hpp"

namespace fraclap {

/// A point of R^n, n <= 3. Unused trailing coordinates are zero.
using Point = std::array<double, 3>;

/// Side of the hyperplane {x_1 = 0}: R^n_+, R^n_- or the whole space.
enum class Half { Plus, Minus, All };

std::string_view to_string(Half h);
Half half_from_string(std::string_view name);

inline bool in_half(const Point& x, Half h) {
  switch (h) {
    case Half::Plus: return x[0] > 0.0;
    case Half::Minus: return x[0] < 0.0;
    case Half::All: return true;
  }
  return true;
}

/// Regularity of a descriptor across the hyperplane x_1 = 0. Holder: continuous,
/// but the gradient blows up at the hyperplane (|x_1|^a with 0 < a < 1, P_s u).
enum class HyperplaneFeature { Smooth = 0, Kink = 1, Holder = 2, Jump = 3 };

/// Ball containing the support; unbounded when `bounded` is false.
struct Support {
  bool bounded = false;
  Point center{};
  double radius = std::numeric_limits<double>::infinity();
};

/// Location and length scale where a descriptor carries its mass.
struct Hint {
  Point center{};
  double scale = 1.0;
};

class NonSmoothPoint : public PreconditionError {
 public:
  using PreconditionError::PreconditionError;
};

inline double norm(const Point& x) { return std::sqrt(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]); }
inline double dot(const Point& a, const Point& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }

/// Field plugged in from another module (the P_s extension lives in `extension`).
class ExternalField {
 public:
  virtual ~ExternalField() = default;
  virtual double value(const Point& x) const = 0;
  virtual Point gradient(const Point& x) const = 0;
  virtual HyperplaneFeature feature() const = 0;
  virtual Support support() const = 0;
  virtual Hint hint() const = 0;
  virtual bool even_in_x1() const { return false; }
  virtual bool radial_about_origin() const { return false; }
  virtual nlohmann::json to_json() const = 0;
};

/// Immutable symbolic test function on R^n.
///
/// Descriptors compose (cutoff, even extension, restriction, product, linear
/// combination) and evaluate exactly at arbitrary points, so quadrature rules
/// never interpolate.
class TrialFunction {
 public:
  struct Bubble {
    int n = 1;
    double exponent = -0.5;  // (2s - n) / 2
    double shift = 0.0;      // along e_1
    double scale = 1.0;
    double amplitude = 1.0;
  };
  struct SigmaBubble {
    int n = 3;
    double sigma = 0.5;
    double scale = 1.0;
    double amplitude = 1.0;
  };
  struct Gaussian {
    Point center{};
    double width = 1.0;
    double amplitude = 1.0;
  };
  struct Constant {
    double value = 0.0;
  };
  /// amplitude * |x_1|^exponent; diagnostic weights and boundary probes.
  struct PowerX1 {
    double exponent = 1.0;
    double amplitude = 1.0;
  };
  struct Cutoff;
  struct EvenExtension;
  struct Restriction;
  struct Product;
  struct Combination;
  struct External {
    std::shared_ptr<const ExternalField> field;
  };

  using Node = std::variant<Bubble, SigmaBubble, Gaussian, Constant, PowerX1, Cutoff, EvenExtension,
                            Restriction, Product, Combination, External>;

  TrialFunction();
  explicit TrialFunction(Node node);

  double value(const Point& x) const;
  /// Exact gradient; throws NonSmoothPoint on a declared kink or jump.
  Point gradient(const Point& x) const;
  double directional(const Point& x, const Point& dir) const { return dot(gradient(x), dir); }

  HyperplaneFeature feature() const;
  Support support() const;
  Hint hint() const;
  bool even_in_x1() const;
  bool radial_about_origin() const;

  const Node& node() const;

  nlohmann::json to_json() const;
  static TrialFunction from_json(const nlohmann::json& j);

  /// Hook for descriptor kinds owned by other modules.
  using JsonFactory = TrialFunction (*)(const nlohmann::json&);
  static void register_kind(const std::string& kind, JsonFactory factory);

 private:
  std::shared_ptr<const Node> node_;
};

struct TrialFunction::Cutoff {
  TrialFunction base;
  Point center{};
  double radius = 1.0;
  double transition = 1.0;
};
struct TrialFunction::EvenExtension {
  TrialFunction base;
};
/// base on the chosen open half, zero elsewhere.
struct TrialFunction::Restriction {
  TrialFunction base;
  Half side = Half::Plus;
};
struct TrialFunction::Product {
  TrialFunction a;
  TrialFunction b;
};
struct TrialFunction::Combination {
  std::vector<std::pair<double, TrialFunction>> terms;
};

namespace trial {

/// (1 + |(x - shift e_1)/scale|^2)^{(2s-n)/2}, the Aubin-Talenti profile U_s.
TrialFunction make_bubble(const FracParams& params, double shift = 0.0, double scale = 1.0,
                          double amplitude = 1.0);
/// Same profile with an explicit outer exponent (used for the classical U at s = 1).
TrialFunction make_power_bubble(int n, double exponent, double shift = 0.0, double scale = 1.0,
                                double amplitude = 1.0);
/// U^(sigma)(x) = (1 + |x|^{2 sigma (n-2)/(n - 2 sigma)})^{(2 sigma - n)/(2 sigma)}.
TrialFunction make_sigma_bubble(int n, double sigma, double scale = 1.0);
TrialFunction make_gaussian(const Point& center, double width = 1.0, double amplitude = 1.0);
TrialFunction make_constant(double value);
TrialFunction make_power_x1(double exponent, double amplitude = 1.0);
/// base times a C^2 radial cutoff: 1 on |x-c| <= R, 0 on |x-c| >= R + w.
TrialFunction make_cutoff_bubble(const TrialFunction& base, double radius, double transition,
                                 const Point& center = {});
/// x -> f(|x_1|, x').
TrialFunction even_extend(const TrialFunction& f);
TrialFunction restrict_to(const TrialFunction& f, Half side);
TrialFunction multiply(const TrialFunction& a, const TrialFunction& b);
TrialFunction combine(std::vector<std::pair<double, TrialFunction>> terms);
TrialFunction from_external(std::shared_ptr<const ExternalField> field);

/// Quintic smoothstep profile of the cutoff, 1 at t <= 0 and 0 at t >= 1.
double cutoff_profile(double t);
double cutoff_profile_derivative(double t);

}  // namespace trial

/// Free-function form of TrialFunction::gradient.
Point gradient_at(const TrialFunction& f, const Point& x);

}  // namespace fraclap
