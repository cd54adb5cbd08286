#include <atomic>
#include <cmath>
#include <cstdlib>
#include <mutex>
#include <numbers>
#include <thread>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "quadrature_internal.hpp"

namespace fraclap {

namespace {
EnergyMemo* g_memo = nullptr;
}  // namespace

std::string_view to_string(Region r) {
  switch (r) {
    case Region::FullSpace: return "FullSpace";
    case Region::PlusPlus: return "PlusPlus";
    case Region::PlusMinus: return "PlusMinus";
    case Region::MinusMinus: return "MinusMinus";
    case Region::SemiRestricted: return "SemiRestricted";
  }
  return "FullSpace";
}

Region region_from_string(std::string_view name) {
  for (Region r : {Region::FullSpace, Region::PlusPlus, Region::PlusMinus, Region::MinusMinus,
                   Region::SemiRestricted}) {
    if (to_string(r) == name) return r;
  }
  throw PreconditionError("unknown region '" + std::string(name) + "'");
}

std::string_view to_string(Method m) {
  switch (m) {
    case Method::TensorGauss: return "TensorGauss";
    case Method::AdaptivePolar: return "AdaptivePolar";
    case Method::ImportanceMC: return "ImportanceMC";
  }
  return "TensorGauss";
}

Method method_from_string(std::string_view name) {
  for (Method m : {Method::TensorGauss, Method::AdaptivePolar, Method::ImportanceMC}) {
    if (to_string(m) == name) return m;
  }
  throw PreconditionError("unknown quadrature method '" + std::string(name) + "'");
}

void QuadratureSpec::validate() const {
  if (budget < 1000) throw PreconditionError("quadrature budget must be >= 1000, got " + std::to_string(budget));
  if (!(split_radius > 0.0)) throw PreconditionError("splitRadius must be positive");
  if (!(target_rel_tol > 0.0)) throw PreconditionError("targetRelTol must be positive");
}

QuadratureSpec QuadratureSpec::defaults_for(int n) {
  QuadratureSpec s;
  if (n == 1) {
    s.method = Method::TensorGauss;
    s.budget = 100000;
    s.target_rel_tol = 1e-6;
  } else {
    s.method = Method::ImportanceMC;
    s.budget = 1000000;
    s.target_rel_tol = 1e-2;
  }
  return s;
}

nlohmann::json QuadratureSpec::to_json() const {
  return {{"method", std::string(to_string(method))},
          {"budget", budget},
          {"splitRadius", split_radius},
          {"seed", seed},
          {"targetRelTol", target_rel_tol}};
}

QuadratureSpec QuadratureSpec::from_json(const nlohmann::json& j, const QuadratureSpec& fallback) {
  QuadratureSpec s = fallback;
  if (!j.is_object()) throw PreconditionError("quadrature spec must be a JSON object");
  if (j.contains("method")) s.method = method_from_string(j.at("method").get<std::string>());
  if (j.contains("budget")) s.budget = j.at("budget").get<std::uint64_t>();
  if (j.contains("splitRadius")) s.split_radius = j.at("splitRadius").get<double>();
  if (j.contains("seed")) s.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("targetRelTol")) s.target_rel_tol = j.at("targetRelTol").get<double>();
  s.validate();
  return s;
}

QuadratureSpec QuadratureSpec::from_json(const nlohmann::json& j) { return from_json(j, QuadratureSpec{}); }

double Weight::operator()(const Point& x) const {
  switch (kind) {
    case Kind::None: return 1.0;
    case Kind::PowerX1: return std::pow(std::abs(x[0]), exponent);
    case Kind::PowerAbsX: return std::pow(norm(x), exponent);
  }
  return 1.0;
}

ScopedEnergyMemo::ScopedEnergyMemo(EnergyMemo* memo) : previous_(g_memo) { g_memo = memo; }
ScopedEnergyMemo::~ScopedEnergyMemo() { g_memo = previous_; }

namespace detail {
EnergyMemo* installed_memo() { return g_memo; }
}  // namespace detail

unsigned worker_count() {
  if (const char* env = std::getenv("FRACLAP_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && v > 0) return static_cast<unsigned>(std::min<long>(v, 256));
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

namespace detail {

void parallel_for(std::size_t count, const std::function<void(std::size_t)>& task) {
  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(worker_count(), count));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto run = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        task(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = count;
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < workers; ++t) pool.emplace_back(run);
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

void gauss_legendre(int m, std::vector<double>& nodes, std::vector<double>& weights) {
  // Newton on P_m with the asymptotic initial guess; weights from P'_m.
  nodes.assign(m, 0.0);
  weights.assign(m, 0.0);
  for (int i = 0; i < (m + 1) / 2; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (m + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= m; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      if (m == 1) p0 = 1.0;
      dp = m * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= m; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      if (m == 1) p0 = 1.0;
      dp = m * (x * p1 - p0) / (x * x - 1.0);
    }
    nodes[i] = -x;
    nodes[m - 1 - i] = x;
    weights[i] = weights[m - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
  }
}

double sphere_area(int n) {
  switch (n) {
    case 1: return 2.0;
    case 2: return 2.0 * std::numbers::pi;
    case 3: return 4.0 * std::numbers::pi;
  }
  throw PreconditionError("dimension n must be 1, 2 or 3");
}

namespace {

// Gauss-Legendre on each piece of a sorted breakpoint list.
void piecewise_gl(const std::vector<double>& cuts, int per, std::vector<std::pair<double, double>>& out) {
  std::vector<double> gx, gw;
  gauss_legendre(per, gx, gw);
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double a = cuts[i], b = cuts[i + 1];
    if (!(b > a)) continue;
    for (int k = 0; k < per; ++k) out.emplace_back(a + (gx[k] + 1.0) * (b - a) / 2, gw[k] * (b - a) / 2);
  }
}

std::vector<double> with_cluster(std::vector<double> cuts, double centre, double width, double period) {
  const double lo = cuts.front(), hi = cuts.back();
  for (double k : {1.0, 4.0, 16.0}) {
    for (double sgn : {-1.0, 1.0}) {
      double c = centre + sgn * k * width;
      if (period > 0.0) {
        while (c < lo) c += period;
        while (c >= hi) c -= period;
      }
      if (c > lo && c < hi) cuts.push_back(c);
    }
  }
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  return cuts;
}

}  // namespace

std::vector<Direction> sphere_rule(int n, int m, const Point* toward, double alpha) {
  using std::numbers::pi;
  std::vector<Direction> out;
  if (n == 1) return {{{1.0, 0.0, 0.0}, 1.0}, {{-1.0, 0.0, 0.0}, 1.0}};
  if (n != 2 && n != 3) throw PreconditionError("dimension n must be 1, 2 or 3");
  const bool cluster = toward != nullptr && alpha > 0.0 && alpha < pi / 8;
  // Angles split into quarters so that the directions tangent to the
  // hyperplane (w_1 = 0) fall on piece boundaries.
  std::vector<double> phi_cuts{-pi / 2, 0.0, pi / 2, pi, 3 * pi / 2};
  std::vector<double> z_cuts{-1.0, 0.0, 1.0};
  const int per_phi = std::max(2, m / 4);
  const int per_z = std::max(2, m / 2);
  int per_phi_c = per_phi, per_z_c = per_z;
  if (cluster) {
    const Point& v = *toward;
    if (n == 2) {
      phi_cuts = with_cluster(phi_cuts, std::atan2(v[1], v[0]), alpha, 2 * pi);
    } else {
      const double rho = std::hypot(v[1], v[2]);
      z_cuts = with_cluster(z_cuts, v[0], alpha * std::max(rho, alpha), 0.0);
      if (rho > alpha) phi_cuts = with_cluster(phi_cuts, std::atan2(v[2], v[1]), alpha / rho, 2 * pi);
    }
    // keep the node count near the unclustered rule
    per_phi_c = std::max(3, per_phi * 4 / static_cast<int>(phi_cuts.size() - 1) + 1);
    per_z_c = std::max(3, per_z * 2 / static_cast<int>(z_cuts.size() - 1) + 1);
  }
  std::vector<std::pair<double, double>> phi;
  piecewise_gl(phi_cuts, per_phi_c, phi);
  if (n == 2) {
    for (auto [t, w] : phi) out.push_back({{std::cos(t), std::sin(t), 0.0}, w});
    return out;
  }
  // w_1 = cos(theta) = z by Gauss-Legendre; azimuth in the (x2, x3) plane.
  std::vector<std::pair<double, double>> zs;
  piecewise_gl(z_cuts, per_z_c, zs);
  for (auto [z, wz] : zs) {
    const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
    for (auto [t, w] : phi) out.push_back({{z, rho * std::cos(t), rho * std::sin(t)}, wz * w});
  }
  return out;
}

HalfLineResult integrate_half_line(const std::function<double(double)>& f, double centre, double scale, double tol) {
  thread_local boost::math::quadrature::tanh_sinh<double> ts(15, 1e-15);
  thread_local boost::math::quadrature::exp_sinh<double> es;
  HalfLineResult out;
  std::vector<double> cuts{0.0};
  if (centre > 0.0) cuts.push_back(centre);
  cuts.push_back(std::max(centre, 0.0) + 4.0 * scale);
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    double err = 0.0, l1 = 0.0;
    std::size_t levels = 0;
    out.value += ts.integrate(f, cuts[i], cuts[i + 1], tol, &err, &l1, &levels);
    out.error += err;
  }
  const double a = cuts.back();
  double err = 0.0, l1 = 0.0;
  std::size_t levels = 0;
  auto tail = [&](double t) {
    const double v = f(t);
    return std::isfinite(v) ? v : 0.0;
  };
  out.value += es.integrate([&](double t) { return tail(a + t); }, tol, &err, &l1, &levels);
  out.error += err;
  return out;
}

double power_window(double a, double b, double p) {
  if (!(a > 0.0)) return std::numeric_limits<double>::infinity();
  const double ap = std::pow(a, -p);
  if (std::isinf(b)) return ap / p;
  return -ap * std::expm1(-p * std::log(b / a)) / p;
}

double power_window_width(double a, double width, double p) {
  if (std::isinf(width)) return power_window(a, width, p);
  return -std::pow(a, -p) * std::expm1(-p * std::log1p(width / a)) / p;
}

double rising_window(double a, double b, double q) {
  const double bq = std::pow(b, q);
  if (a <= 0.0) return bq / q;
  return -bq * std::expm1(q * std::log(a / b)) / q;
}

nlohmann::json params_json(const FracParams& p) {
  nlohmann::json j{{"n", p.n}, {"s", p.s}};
  if (p.sigma) j["sigma"] = *p.sigma;
  return j;
}

}  // namespace detail
}  // namespace fraclap
