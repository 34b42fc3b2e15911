#include "wdiff/oracle.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <thread>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/non_central_chi_squared.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/special_functions/bessel.hpp>
#include <boost/math/special_functions/factorials.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "wdiff/rng.hpp"

namespace wdiff::oracle {

BesselOracle BesselOracle::make(int d, double alpha) {
  BesselOracle o;
  o.d = d;
  o.alpha = alpha;
  o.delta = bessel_dimension(d, alpha);
  return o;
}

double bessel_dimension(int d, double alpha) {
  if (d < 1) throw std::invalid_argument("bessel_dimension: d must be >= 1");
  if (!(alpha > -d)) throw std::invalid_argument("bessel_dimension: alpha must exceed -d");
  return d + alpha;
}

double besq_mean(double r0, double t, double delta) {
  if (!(t >= 0.0)) throw std::invalid_argument("besq_mean: t must be >= 0");
  return r0 * r0 + delta * t;
}

double besq_mean(const Vec& x0, double t, const BesselOracle& o) { return besq_mean(x0.norm(), t, o.delta); }

bool hits_origin(double delta) {
  if (!(delta > 0.0)) throw std::invalid_argument("hits_origin: delta must be positive");
  return delta < 2.0;
}

namespace {

void check_args(double t, double r0, double delta) {
  if (!(t > 0.0)) throw std::invalid_argument("besq: t must be positive");
  if (!(r0 >= 0.0)) throw std::invalid_argument("besq: r0 must be >= 0");
  if (!(delta > 0.0)) throw std::invalid_argument("besq: delta must be positive");
}

// Law of |X_t|^2 / t under the reflecting convention, evaluated as a density in r.
double reflecting_density(double r, double t, double r0, double delta) {
  const double z = r * r / t;
  const double jac = 2.0 * r / t;
  if (r0 == 0.0) return boost::math::pdf(boost::math::chi_squared_distribution<double>(delta), z) * jac;
  const boost::math::non_central_chi_squared_distribution<double> law(delta, r0 * r0 / t);
  return boost::math::pdf(law, z) * jac;
}

double reflecting_cdf(double r, double t, double r0, double delta) {
  const double z = r * r / t;
  if (r0 == 0.0) return boost::math::cdf(boost::math::chi_squared_distribution<double>(delta), z);
  return boost::math::cdf(boost::math::non_central_chi_squared_distribution<double>(delta, r0 * r0 / t), z);
}

}  // namespace

double besq_radial_density(double r, double t, double r0, double delta, Boundary b) {
  check_args(t, r0, delta);
  if (!(r > 0.0)) throw std::invalid_argument("besq_radial_density: r must be positive");
  double value = 0.0;
  if (b == Boundary::reflecting || delta >= 2.0) {
    value = reflecting_density(r, t, r0, delta);
  } else {
    if (r0 == 0.0) return 0.0;  // absorbed immediately
    const double nu = 0.5 * delta - 1.0;
    value = std::pow(r / r0, 2.0 * nu) * reflecting_density(r, t, r0, 4.0 - delta);
  }
  if (!std::isfinite(value)) throw std::range_error("besq_radial_density: non-finite value");
  if (value == 0.0 && r > 1e-6 * std::sqrt(t) && std::abs(r - r0) < 10.0 * std::sqrt(t) * (1.0 + delta))
    throw std::range_error("besq_radial_density: underflow inside the bulk of the law");
  return value;
}

double absorbed_mass(double t, double r0, double delta) {
  check_args(t, r0, delta);
  if (delta >= 2.0) return 0.0;
  if (r0 == 0.0) return 1.0;
  // T_0 = r0^2 / (2 Z) with Z ~ Gamma(1 - delta/2)
  return boost::math::gamma_q(1.0 - 0.5 * delta, r0 * r0 / (2.0 * t));
}

double besq_radial_cdf(double r, double t, double r0, double delta, Boundary b) {
  check_args(t, r0, delta);
  if (r <= 0.0) return (b == Boundary::absorbing && delta < 2.0) ? absorbed_mass(t, r0, delta) : 0.0;
  if (b == Boundary::reflecting || delta >= 2.0) return reflecting_cdf(r, t, r0, delta);
  if (r0 == 0.0) return 1.0;
  auto f = [&](double s) { return s > 0.0 ? besq_radial_density(s, t, r0, delta, b) : 0.0; };
  boost::math::quadrature::tanh_sinh<double> rule;
  const double mass = rule.integrate(f, 0.0, r, 1e-12);
  return std::min(1.0, absorbed_mass(t, r0, delta) + mass);
}

double ever_hit_probability(double delta, double r0, double eps) {
  if (!(eps > 0.0 && r0 > 0.0)) throw std::invalid_argument("ever_hit_probability: need r0, eps > 0");
  if (r0 <= eps) return 1.0;
  if (delta <= 2.0) return 1.0;
  return std::pow(eps / r0, delta - 2.0);
}

double hit_probability_delta_one(double r0, double eps, double horizon) {
  if (!(horizon > 0.0)) throw std::invalid_argument("hit_probability_delta_one: horizon must be positive");
  if (r0 <= eps) return 1.0;
  return std::erfc((r0 - eps) / std::sqrt(2.0 * horizon));
}

namespace {

// Gaver-Stehfest weights for an even number of terms.
std::vector<long double> stehfest_weights(int n) {
  using boost::math::factorial;
  const int half = n / 2;
  std::vector<long double> v(n + 1, 0.0L);
  for (int k = 1; k <= n; ++k) {
    long double sum = 0.0L;
    for (int j = (k + 1) / 2; j <= std::min(k, half); ++j) {
      sum += std::pow(static_cast<long double>(j), half) * factorial<long double>(2 * j) /
             (factorial<long double>(half - j) * factorial<long double>(j) * factorial<long double>(j - 1) *
              factorial<long double>(k - j) * factorial<long double>(2 * j - k));
    }
    v[k] = ((k + half) % 2 == 0 ? 1.0L : -1.0L) * sum;
  }
  return v;
}

}  // namespace

double hit_probability_by(double delta, double r0, double eps, double horizon) {
  if (!(delta > 0.0)) throw std::invalid_argument("hit_probability_by: delta must be positive");
  if (!(eps > 0.0 && r0 > 0.0)) throw std::invalid_argument("hit_probability_by: need r0, eps > 0");
  if (!(horizon > 0.0)) throw std::invalid_argument("hit_probability_by: horizon must be positive");
  if (r0 <= eps) return 1.0;
  constexpr int kTerms = 16;
  static const std::vector<long double> weights = stehfest_weights(kTerms);
  const long double nu = 0.5L * delta - 1.0L;
  const long double ln2_t = std::log(2.0L) / horizon;
  long double sum = 0.0L;
  for (int k = 1; k <= kTerms; ++k) {
    const long double s = k * ln2_t;
    const long double q = std::sqrt(2.0L * s);
    const long double num = boost::math::cyl_bessel_k(nu, r0 * q);
    const long double den = boost::math::cyl_bessel_k(nu, eps * q);
    const long double transform = (num == 0.0L) ? 0.0L : std::pow(eps / static_cast<long double>(r0), nu) * num / den;
    sum += weights[k] * transform / s;
  }
  return std::clamp(static_cast<double>(ln2_t * sum), 0.0, 1.0);
}

namespace {

struct RadialPath {
  double radius = 0.0;
  double first_hit = std::numeric_limits<double>::infinity();
  bool touched = false;
  bool absorbed = false;
};

RadialPath radial_path(double delta, double r0, double horizon, double dt, PhiloxStream& rng,
                       const RadialSimOptions& o) {
  RadialPath p;
  double r = r0;
  double t = 0.0;
  if (o.hit_radius > 0.0 && r0 <= o.hit_radius) p.first_hit = 0.0;
  const double c = 0.5 * (delta - 1.0);
  const double floor_scale = std::sqrt(o.dt_min);
  while (t < horizon) {
    const double cap = std::min(dt, horizon - t);
    const double b = r > 0.0 ? c / r : 0.0;
    const double scale = o.theta * std::max(r, floor_scale);
    double h = cap;
    if (b != 0.0) h = std::min(cap, std::max(o.dt_min, scale / std::abs(b)));
    double drift = b * h;
    if (std::abs(drift) > scale) drift = std::copysign(scale, drift);
    double next = r + std::sqrt(h) * rng.normal() + drift;
    const double t_next = (h == horizon - t) ? horizon : t + h;
    if (o.hit_radius > 0.0 && !std::isfinite(p.first_hit) && next <= o.hit_radius) {
      const double s = (r - o.hit_radius) / (r - next);
      p.first_hit = t + std::clamp(s, 0.0, 1.0) * h;
    }
    if (next < o.r_floor) {
      p.touched = true;
      if (o.boundary == Boundary::absorbing && delta < 2.0) {
        p.absorbed = true;
        p.radius = 0.0;
        return p;
      }
      next = 2.0 * o.r_floor - next;
    }
    r = next;
    t = t_next;
  }
  p.radius = r;
  return p;
}

}  // namespace

RadialSample radial_reference_sim(double delta, double r0, double t, std::size_t n, double dt, std::uint64_t seed,
                                  const RadialSimOptions& opts) {
  check_args(t, r0, delta);
  if (!(dt > 0.0)) throw std::invalid_argument("radial_reference_sim: dt must be positive");
  if (n < 1) throw std::invalid_argument("radial_reference_sim: n must be >= 1");
  std::vector<RadialPath> paths(n);
  std::atomic<std::size_t> next{0};
  constexpr std::size_t chunk = 256;
  auto work = [&] {
    for (;;) {
      const std::size_t begin = next.fetch_add(chunk);
      if (begin >= n) return;
      for (std::size_t i = begin; i < std::min(n, begin + chunk); ++i) {
        PhiloxStream rng(seed, i);
        paths[i] = radial_path(delta, r0, t, dt, rng, opts);
      }
    }
  };
  const unsigned workers = std::max(1u, std::min<unsigned>(opts.workers, static_cast<unsigned>(n)));
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  RadialSample s;
  s.radius.reserve(n);
  s.first_hit.reserve(n);
  s.touched_floor.reserve(n);
  for (const auto& p : paths) {
    s.radius.push_back(p.radius);
    s.first_hit.push_back(p.first_hit);
    s.touched_floor.push_back(p.touched ? 1 : 0);
    s.n_touched += p.touched;
    s.n_absorbed += p.absorbed;
  }
  return s;
}

}  // namespace wdiff::oracle
