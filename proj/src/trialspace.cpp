#include "fraclap/trialspace.hpp"

#include <algorithm>
#include <map>
#include <mutex>

namespace fraclap {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

Point scaled(const Point& p, double a) { return {a * p[0], a * p[1], a * p[2]}; }
Point added(const Point& p, const Point& q) { return {p[0] + q[0], p[1] + q[1], p[2] + q[2]}; }
Point sub(const Point& p, const Point& q) { return {p[0] - q[0], p[1] - q[1], p[2] - q[2]}; }

double sigma_inner_exponent(const TrialFunction::SigmaBubble& b) {
  return 2.0 * b.sigma * (b.n - 2.0) / (b.n - 2.0 * b.sigma);
}
double sigma_outer_exponent(const TrialFunction::SigmaBubble& b) {
  return (2.0 * b.sigma - b.n) / (2.0 * b.sigma);
}

nlohmann::json point_json(const Point& p) { return nlohmann::json::array({p[0], p[1], p[2]}); }

Point point_from_json(const nlohmann::json& j) {
  Point p{};
  if (!j.is_array() || j.size() > 3) throw PreconditionError("point must be an array of at most 3 numbers");
  for (std::size_t i = 0; i < j.size(); ++i) p[i] = j[i].get<double>();
  return p;
}

std::map<std::string, TrialFunction::JsonFactory>& registry() {
  static std::map<std::string, TrialFunction::JsonFactory> r;
  return r;
}
std::mutex& registry_mutex() {
  static std::mutex m;
  return m;
}

void require_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v)) throw PreconditionError(std::string(what) + " must be positive and finite");
}

}  // namespace

std::string_view to_string(Half h) {
  switch (h) {
    case Half::Plus: return "plus";
    case Half::Minus: return "minus";
    case Half::All: return "all";
  }
  return "all";
}

Half half_from_string(std::string_view name) {
  if (name == "plus") return Half::Plus;
  if (name == "minus") return Half::Minus;
  if (name == "all") return Half::All;
  throw PreconditionError("unknown half-space marker '" + std::string(name) + "'");
}

TrialFunction::TrialFunction() : node_(std::make_shared<const Node>(Constant{0.0})) {}
TrialFunction::TrialFunction(Node node) : node_(std::make_shared<const Node>(std::move(node))) {}
const TrialFunction::Node& TrialFunction::node() const { return *node_; }

double TrialFunction::value(const Point& x) const {
  return std::visit(
      overloaded{
          [&](const Bubble& b) {
            const double d0 = (x[0] - b.shift) / b.scale;
            const double q = d0 * d0 + (x[1] * x[1] + x[2] * x[2]) / (b.scale * b.scale);
            if (q > 1e300 || !std::isfinite(q)) {
              // far out, where the square overflows: (1+q)^e = |z|^{2e}
              const double z = std::hypot(d0, x[1] / b.scale, x[2] / b.scale);
              return b.amplitude * std::pow(z, b.exponent) * std::pow(z, b.exponent);
            }
            return b.amplitude * std::pow(1.0 + q, b.exponent);
          },
          [&](const SigmaBubble& b) {
            const double r = norm(x) / b.scale;
            return b.amplitude * std::pow(1.0 + std::pow(r, sigma_inner_exponent(b)), sigma_outer_exponent(b));
          },
          [&](const Gaussian& g) {
            const Point d = sub(x, g.center);
            return g.amplitude * std::exp(-dot(d, d) / (g.width * g.width));
          },
          [&](const Constant& c) { return c.value; },
          [&](const PowerX1& p) { return p.amplitude * std::pow(std::abs(x[0]), p.exponent); },
          [&](const Cutoff& c) {
            const double rho = norm(sub(x, c.center));
            if (rho >= c.radius + c.transition) return 0.0;
            const double chi = trial::cutoff_profile((rho - c.radius) / c.transition);
            return chi * c.base.value(x);
          },
          [&](const EvenExtension& e) { return e.base.value({std::abs(x[0]), x[1], x[2]}); },
          [&](const Restriction& r) { return in_half(x, r.side) ? r.base.value(x) : 0.0; },
          [&](const Product& p) {
            const double a = p.a.value(x);
            if (a == 0.0) return 0.0;
            return a * p.b.value(x);
          },
          [&](const Combination& c) {
            double v = 0.0;
            for (const auto& [coef, f] : c.terms) v += coef * f.value(x);
            return v;
          },
          [&](const External& e) { return e.field->value(x); },
      },
      *node_);
}

Point TrialFunction::gradient(const Point& x) const {
  return std::visit(
      overloaded{
          [&](const Bubble& b) -> Point {
            const Point d{(x[0] - b.shift), x[1], x[2]};
            const double l2 = b.scale * b.scale;
            const double q = dot(d, d) / l2;
            const double f = b.amplitude * b.exponent * std::pow(1.0 + q, b.exponent - 1.0) * 2.0 / l2;
            return scaled(d, f);
          },
          [&](const SigmaBubble& b) -> Point {
            const double r = norm(x);
            if (r == 0.0) return {0.0, 0.0, 0.0};
            const double k = sigma_inner_exponent(b);
            const double e = sigma_outer_exponent(b);
            const double rho = r / b.scale;
            const double pk = std::pow(rho, k);
            const double dudr = b.amplitude * e * std::pow(1.0 + pk, e - 1.0) * k * pk / rho / b.scale;
            return scaled(x, dudr / r);
          },
          [&](const Gaussian& g) -> Point {
            const Point d = sub(x, g.center);
            const double w2 = g.width * g.width;
            const double v = g.amplitude * std::exp(-dot(d, d) / w2);
            return scaled(d, -2.0 * v / w2);
          },
          [&](const Constant&) -> Point { return {0.0, 0.0, 0.0}; },
          [&](const PowerX1& p) -> Point {
            if (x[0] == 0.0) throw NonSmoothPoint("gradient requested on the kink hyperplane x1=0");
            const double a = std::abs(x[0]);
            const double d = p.amplitude * p.exponent * std::pow(a, p.exponent - 1.0) * (x[0] > 0 ? 1.0 : -1.0);
            return {d, 0.0, 0.0};
          },
          [&](const Cutoff& c) -> Point {
            const Point d = sub(x, c.center);
            const double rho = norm(d);
            if (rho >= c.radius + c.transition) return {0.0, 0.0, 0.0};
            const double t = (rho - c.radius) / c.transition;
            const double chi = trial::cutoff_profile(t);
            Point g = scaled(c.base.gradient(x), chi);
            if (t > 0.0 && rho > 0.0) {
              const double dchi = trial::cutoff_profile_derivative(t) / c.transition;
              g = added(g, scaled(d, c.base.value(x) * dchi / rho));
            }
            return g;
          },
          [&](const EvenExtension& e) -> Point {
            if (x[0] == 0.0 && feature() != HyperplaneFeature::Smooth) {
              throw NonSmoothPoint("gradient requested on the kink hyperplane x1=0");
            }
            Point g = e.base.gradient({std::abs(x[0]), x[1], x[2]});
            if (x[0] < 0.0) g[0] = -g[0];
            return g;
          },
          [&](const Restriction& r) -> Point {
            if (x[0] == 0.0) throw NonSmoothPoint("gradient requested on the jump hyperplane x1=0");
            return in_half(x, r.side) ? r.base.gradient(x) : Point{0.0, 0.0, 0.0};
          },
          [&](const Product& p) -> Point {
            return added(scaled(p.a.gradient(x), p.b.value(x)), scaled(p.b.gradient(x), p.a.value(x)));
          },
          [&](const Combination& c) -> Point {
            Point g{0.0, 0.0, 0.0};
            for (const auto& [coef, f] : c.terms) {
              if (coef != 0.0) g = added(g, scaled(f.gradient(x), coef));
            }
            return g;
          },
          [&](const External& e) -> Point { return e.field->gradient(x); },
      },
      *node_);
}

HyperplaneFeature TrialFunction::feature() const {
  return std::visit(
      overloaded{
          [&](const PowerX1& p) {
            if (p.exponent == 0.0) return HyperplaneFeature::Smooth;
            return p.exponent < 1.0 ? HyperplaneFeature::Holder : HyperplaneFeature::Kink;
          },
          [&](const Cutoff& c) { return c.base.feature(); },
          [&](const EvenExtension& e) {
            if (e.base.even_in_x1()) return e.base.feature();
            return std::max(e.base.feature(), HyperplaneFeature::Kink);
          },
          [&](const Restriction&) { return HyperplaneFeature::Jump; },
          [&](const Product& p) { return std::max(p.a.feature(), p.b.feature()); },
          [&](const Combination& c) {
            auto f = HyperplaneFeature::Smooth;
            for (const auto& t : c.terms) f = std::max(f, t.second.feature());
            return f;
          },
          [&](const External& e) { return e.field->feature(); },
          [&](const auto&) { return HyperplaneFeature::Smooth; },
      },
      *node_);
}

Support TrialFunction::support() const {
  return std::visit(
      overloaded{
          [&](const Constant& c) {
            if (c.value == 0.0) return Support{true, {}, 0.0};
            return Support{};
          },
          [&](const Cutoff& c) {
            Support s{true, c.center, c.radius + c.transition};
            return s;
          },
          [&](const EvenExtension& e) {
            Support b = e.base.support();
            if (!b.bounded) return b;
            // Ball centred on the hyperplane containing both mirror images.
            Support s{true, {0.0, b.center[1], b.center[2]}, b.radius + std::abs(b.center[0])};
            return s;
          },
          [&](const Restriction& r) { return r.base.support(); },
          [&](const Product& p) {
            Support a = p.a.support();
            Support b = p.b.support();
            if (!a.bounded) return b;
            if (!b.bounded) return a;
            return a.radius <= b.radius ? a : b;
          },
          [&](const Combination& c) {
            Support out{true, {}, 0.0};
            bool first = true;
            for (const auto& [coef, f] : c.terms) {
              if (coef == 0.0) continue;
              Support t = f.support();
              if (!t.bounded) return Support{};
              if (t.radius == 0.0) continue;
              if (first) {
                out = t;
                first = false;
                continue;
              }
              const double d = norm(sub(t.center, out.center));
              out.radius = std::max(out.radius, d + t.radius);
            }
            return out;
          },
          [&](const External& e) { return e.field->support(); },
          [&](const auto&) { return Support{}; },
      },
      *node_);
}

Hint TrialFunction::hint() const {
  return std::visit(
      overloaded{
          [&](const Bubble& b) { return Hint{{b.shift, 0.0, 0.0}, b.scale}; },
          [&](const SigmaBubble& b) { return Hint{{}, b.scale}; },
          [&](const Gaussian& g) { return Hint{g.center, g.width}; },
          [&](const Constant&) { return Hint{}; },
          [&](const PowerX1&) { return Hint{}; },
          [&](const Cutoff& c) {
            Hint b = c.base.hint();
            return Hint{c.center, std::min(b.scale, c.radius + c.transition)};
          },
          [&](const EvenExtension& e) {
            Hint b = e.base.hint();
            return Hint{{0.0, b.center[1], b.center[2]}, b.scale + std::abs(b.center[0])};
          },
          [&](const Restriction& r) { return r.base.hint(); },
          [&](const Product& p) {
            if (p.b.support().bounded && !p.a.support().bounded) return p.b.hint();
            return p.a.hint();
          },
          [&](const Combination& c) {
            for (const auto& [coef, f] : c.terms) {
              if (coef != 0.0) return f.hint();
            }
            return Hint{};
          },
          [&](const External& e) { return e.field->hint(); },
      },
      *node_);
}

bool TrialFunction::even_in_x1() const {
  return std::visit(
      overloaded{
          [&](const Bubble& b) { return b.shift == 0.0; },
          [&](const Gaussian& g) { return g.center[0] == 0.0; },
          [&](const Cutoff& c) { return c.center[0] == 0.0 && c.base.even_in_x1(); },
          [&](const EvenExtension&) { return true; },
          [&](const Restriction&) { return false; },
          [&](const Product& p) { return p.a.even_in_x1() && p.b.even_in_x1(); },
          [&](const Combination& c) {
            return std::all_of(c.terms.begin(), c.terms.end(),
                               [](const auto& t) { return t.first == 0.0 || t.second.even_in_x1(); });
          },
          [&](const External& e) { return e.field->even_in_x1(); },
          [&](const auto&) { return true; },
      },
      *node_);
}

bool TrialFunction::radial_about_origin() const {
  return std::visit(
      overloaded{
          [&](const Bubble& b) { return b.shift == 0.0; },
          [&](const SigmaBubble&) { return true; },
          [&](const Gaussian& g) { return norm(g.center) == 0.0; },
          [&](const Constant&) { return true; },
          [&](const PowerX1& p) { return p.exponent == 0.0; },
          [&](const Cutoff& c) { return norm(c.center) == 0.0 && c.base.radial_about_origin(); },
          [&](const EvenExtension& e) { return e.base.radial_about_origin(); },
          [&](const Restriction&) { return false; },
          [&](const Product& p) { return p.a.radial_about_origin() && p.b.radial_about_origin(); },
          [&](const Combination& c) {
            return std::all_of(c.terms.begin(), c.terms.end(),
                               [](const auto& t) { return t.first == 0.0 || t.second.radial_about_origin(); });
          },
          [&](const External& e) { return e.field->radial_about_origin(); },
      },
      *node_);
}

nlohmann::json TrialFunction::to_json() const {
  using nlohmann::json;
  return std::visit(
      overloaded{
          [&](const Bubble& b) {
            return json{{"kind", "bubble"},   {"n", b.n},         {"exponent", b.exponent},
                        {"shift", b.shift},   {"scale", b.scale}, {"amplitude", b.amplitude}};
          },
          [&](const SigmaBubble& b) {
            return json{{"kind", "sigma_bubble"},
                        {"n", b.n},
                        {"sigma", b.sigma},
                        {"scale", b.scale},
                        {"amplitude", b.amplitude}};
          },
          [&](const Gaussian& g) {
            return json{{"kind", "gaussian"}, {"center", point_json(g.center)}, {"width", g.width},
                        {"amplitude", g.amplitude}};
          },
          [&](const Constant& c) { return json{{"kind", "constant"}, {"value", c.value}}; },
          [&](const PowerX1& p) {
            return json{{"kind", "power_x1"}, {"exponent", p.exponent}, {"amplitude", p.amplitude}};
          },
          [&](const Cutoff& c) {
            return json{{"kind", "cutoff"},       {"base", c.base.to_json()},     {"center", point_json(c.center)},
                        {"radius", c.radius}, {"transition", c.transition}};
          },
          [&](const EvenExtension& e) { return json{{"kind", "even_extension"}, {"base", e.base.to_json()}}; },
          [&](const Restriction& r) {
            return json{{"kind", "restriction"}, {"side", std::string(to_string(r.side))}, {"base", r.base.to_json()}};
          },
          [&](const Product& p) {
            return json{{"kind", "product"}, {"factors", json::array({p.a.to_json(), p.b.to_json()})}};
          },
          [&](const Combination& c) {
            json terms = json::array();
            for (const auto& [coef, f] : c.terms) terms.push_back({{"coefficient", coef}, {"atom", f.to_json()}});
            return json{{"kind", "combination"}, {"terms", terms}};
          },
          [&](const External& e) { return e.field->to_json(); },
      },
      *node_);
}

void TrialFunction::register_kind(const std::string& kind, JsonFactory factory) {
  std::lock_guard lock(registry_mutex());
  registry()[kind] = factory;
}

TrialFunction TrialFunction::from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("kind")) throw PreconditionError("trial descriptor must be an object with 'kind'");
  const std::string kind = j.at("kind").get<std::string>();
  auto num = [&](const char* key, double def) { return j.contains(key) ? j.at(key).get<double>() : def; };
  if (kind == "bubble") {
    const int n = j.at("n").get<int>();
    double exponent = 0.0;
    if (j.contains("exponent")) {
      exponent = j.at("exponent").get<double>();
    } else {
      const double s = j.at("s").get<double>();
      exponent = (2.0 * s - n) / 2.0;
    }
    return trial::make_power_bubble(n, exponent, num("shift", 0.0), num("scale", 1.0), num("amplitude", 1.0));
  }
  if (kind == "sigma_bubble") {
    auto f = trial::make_sigma_bubble(j.at("n").get<int>(), j.at("sigma").get<double>(), num("scale", 1.0));
    const double a = num("amplitude", 1.0);
    if (a == 1.0) return f;
    auto b = std::get<SigmaBubble>(f.node());
    b.amplitude = a;
    return TrialFunction(b);
  }
  if (kind == "gaussian") {
    Point c{};
    if (j.contains("center")) c = point_from_json(j.at("center"));
    return trial::make_gaussian(c, num("width", 1.0), num("amplitude", 1.0));
  }
  if (kind == "constant") return trial::make_constant(num("value", 0.0));
  if (kind == "power_x1") return trial::make_power_x1(j.at("exponent").get<double>(), num("amplitude", 1.0));
  if (kind == "cutoff") {
    Point c{};
    if (j.contains("center")) c = point_from_json(j.at("center"));
    return trial::make_cutoff_bubble(from_json(j.at("base")), j.at("radius").get<double>(),
                                     j.at("transition").get<double>(), c);
  }
  if (kind == "even_extension") return trial::even_extend(from_json(j.at("base")));
  if (kind == "restriction") {
    return trial::restrict_to(from_json(j.at("base")), half_from_string(j.value("side", std::string("plus"))));
  }
  if (kind == "product") {
    const auto& f = j.at("factors");
    if (!f.is_array() || f.size() != 2) throw PreconditionError("product needs exactly two factors");
    return trial::multiply(from_json(f[0]), from_json(f[1]));
  }
  if (kind == "combination") {
    std::vector<std::pair<double, TrialFunction>> terms;
    for (const auto& t : j.at("terms")) terms.emplace_back(t.at("coefficient").get<double>(), from_json(t.at("atom")));
    return trial::combine(std::move(terms));
  }
  JsonFactory factory = nullptr;
  {
    std::lock_guard lock(registry_mutex());
    auto it = registry().find(kind);
    if (it != registry().end()) factory = it->second;
  }
  if (factory == nullptr) throw PreconditionError("unknown trial descriptor kind '" + kind + "'");
  return factory(j);
}

Point gradient_at(const TrialFunction& f, const Point& x) { return f.gradient(x); }

namespace trial {

TrialFunction make_bubble(const FracParams& params, double shift, double scale, double amplitude) {
  params.validate();
  return make_power_bubble(params.n, (2.0 * params.s - params.n) / 2.0, shift, scale, amplitude);
}

TrialFunction make_power_bubble(int n, double exponent, double shift, double scale, double amplitude) {
  require_positive(scale, "bubble scale");
  if (n < 1 || n > 3) throw PreconditionError("bubble dimension must be 1, 2 or 3");
  return TrialFunction(TrialFunction::Bubble{n, exponent, shift, scale, amplitude});
}

TrialFunction make_sigma_bubble(int n, double sigma, double scale) {
  if (n < 3) throw PreconditionError("sigma bubble requires n >= 3, got n=" + std::to_string(n));
  if (n > 3) throw PreconditionError("sigma bubble supports n <= 3");
  if (!(sigma > 0.0 && sigma <= 1.0)) throw PreconditionError("sigma bubble requires sigma in (0,1]");
  require_positive(scale, "sigma bubble scale");
  return TrialFunction(TrialFunction::SigmaBubble{n, sigma, scale, 1.0});
}

TrialFunction make_gaussian(const Point& center, double width, double amplitude) {
  require_positive(width, "gaussian width");
  return TrialFunction(TrialFunction::Gaussian{center, width, amplitude});
}

TrialFunction make_constant(double value) { return TrialFunction(TrialFunction::Constant{value}); }

TrialFunction make_power_x1(double exponent, double amplitude) {
  return TrialFunction(TrialFunction::PowerX1{exponent, amplitude});
}

TrialFunction make_cutoff_bubble(const TrialFunction& base, double radius, double transition, const Point& center) {
  require_positive(radius, "cutoff radius");
  require_positive(transition, "cutoff transition width");
  return TrialFunction(TrialFunction::Cutoff{base, center, radius, transition});
}

TrialFunction even_extend(const TrialFunction& f) {
  if (std::holds_alternative<TrialFunction::EvenExtension>(f.node())) return f;
  return TrialFunction(TrialFunction::EvenExtension{f});
}

TrialFunction restrict_to(const TrialFunction& f, Half side) {
  if (side == Half::All) return f;
  return TrialFunction(TrialFunction::Restriction{f, side});
}

TrialFunction multiply(const TrialFunction& a, const TrialFunction& b) {
  return TrialFunction(TrialFunction::Product{a, b});
}

TrialFunction combine(std::vector<std::pair<double, TrialFunction>> terms) {
  return TrialFunction(TrialFunction::Combination{std::move(terms)});
}

TrialFunction from_external(std::shared_ptr<const ExternalField> field) {
  if (!field) throw PreconditionError("external field must not be null");
  return TrialFunction(TrialFunction::External{std::move(field)});
}

double cutoff_profile(double t) {
  if (t <= 0.0) return 1.0;
  if (t >= 1.0) return 0.0;
  return 1.0 - t * t * t * (10.0 + t * (-15.0 + 6.0 * t));
}

double cutoff_profile_derivative(double t) {
  if (t <= 0.0 || t >= 1.0) return 0.0;
  return -30.0 * t * t * (1.0 - t) * (1.0 - t);
}

}  // namespace trial
}  // namespace fraclap
