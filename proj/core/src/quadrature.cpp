#include "wdiff/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "wdiff/errors.hpp"
#include "wdiff/rng.hpp"

namespace wdiff::quad {

namespace {

constexpr int kMaxShells = 400;
constexpr double kPi = std::numbers::pi;

struct Nodes {
  std::vector<double> x;
  std::vector<double> w;
};

// Gauss-Legendre nodes on [-1, 1] by Newton iteration on P_n.
Nodes gauss_legendre(int n) {
  Nodes out;
  out.x.resize(n);
  out.w.resize(n);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double z = std::cos(kPi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = z;
      for (int k = 2; k <= n; ++k) {
        const double pk = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = pk;
      }
      if (n == 1) p0 = 1.0;
      dp = n * (z * p1 - p0) / (z * z - 1.0);
      const double dz = p1 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    out.x[i] = -z;
    out.x[n - 1 - i] = z;
    const double w = 2.0 / ((1.0 - z * z) * dp * dp);
    out.w[i] = w;
    out.w[n - 1 - i] = w;
  }
  return out;
}

const Nodes& cached_gl(int n) {
  static thread_local std::vector<std::pair<int, Nodes>> cache;
  for (const auto& [k, nodes] : cache)
    if (k == n) return nodes;
  cache.emplace_back(n, gauss_legendre(n));
  return cache.back().second;
}

// Orthonormal frame whose first column is the unit vector `axis`.
Mat frame(const Vec& axis) {
  const int d = static_cast<int>(axis.size());
  Mat q = Mat::Identity(d, d);
  const double norm = axis.norm();
  if (norm == 0.0) return q;
  const Vec a = axis / norm;
  Vec v = a;
  v[0] -= 1.0;
  const double vv = v.squaredNorm();
  if (vv < 1e-28) return q;
  q -= 2.0 * v * v.transpose() / vv;
  return q;
}

double gl20(const std::function<double(double)>& g, double a, double b) {
  return boost::math::quadrature::gauss<double, 20>::integrate(g, a, b);
}

bool close_enough(double now, double before, double rtol, double atol) {
  return std::abs(now - before) <= rtol * std::abs(now) + atol;
}

}  // namespace

double sphere_area(int d) {
  return 2.0 * std::pow(kPi, 0.5 * d) / boost::math::tgamma(0.5 * d);
}

double ball_volume(int d, double r) { return sphere_area(d) / d * std::pow(r, d); }

DirectionRule sphere_rule(int d, int level, const Vec& axis, std::uint64_t seed) {
  DirectionRule rule;
  const Mat q = frame(axis.size() == d ? axis : unit(d, 0));
  if (d == 2) {
    const int n = 16 << level;
    for (int j = 0; j < n; ++j) {
      const double phi = (j + 0.5) * 2.0 * kPi / n;
      Vec local(2);
      local << std::cos(phi), std::sin(phi);
      rule.directions.push_back(q * local);
      rule.weights.push_back(2.0 * kPi / n);
    }
  } else if (d == 3) {
    const int np = 8 << level;
    const int na = 2 * np;
    const Nodes& gl = cached_gl(np);
    for (int i = 0; i < np; ++i) {
      const double u = gl.x[i];
      const double s = std::sqrt(std::max(0.0, 1.0 - u * u));
      for (int j = 0; j < na; ++j) {
        const double psi = (j + 0.5) * 2.0 * kPi / na;
        Vec local(3);
        local << u, s * std::cos(psi), s * std::sin(psi);
        rule.directions.push_back(q * local);
        rule.weights.push_back(gl.w[i] * 2.0 * kPi / na);
      }
    }
  } else {
    const int pairs = 512 << level;
    PhiloxStream rng(seed, static_cast<std::uint64_t>(level));
    const double w = sphere_area(d) / (2.0 * pairs);
    for (int j = 0; j < pairs; ++j) {
      Vec z = rng.normal_vec(d);
      z /= z.norm();
      rule.directions.push_back(z);
      rule.directions.push_back(-z);
      rule.weights.push_back(w);
      rule.weights.push_back(w);
    }
  }
  return rule;
}

DirectionRule cap_rule(int d, const Vec& axis, double half_angle, int level) {
  if (d != 2 && d != 3) throw std::invalid_argument("cap_rule: only d = 2, 3 are supported");
  DirectionRule rule;
  const Mat q = frame(axis);
  const int nv = 8 << level;
  const Nodes& gl = cached_gl(nv);
  if (d == 2) {
    // phi = +-beta (1 - v^2), v in [0, 1]
    for (int i = 0; i < nv; ++i) {
      const double v = 0.5 * (gl.x[i] + 1.0);
      const double wv = 0.5 * gl.w[i] * 2.0 * half_angle * v;
      const double phi = half_angle * (1.0 - v * v);
      for (double sign : {1.0, -1.0}) {
        Vec local(2);
        local << std::cos(phi), sign * std::sin(phi);
        rule.directions.push_back(q * local);
        rule.weights.push_back(wv);
      }
    }
  } else {
    // u = cos(beta) + (1 - cos(beta)) v^2, v in [0, 1]
    const double cb = std::cos(half_angle);
    const int na = 16 << level;
    for (int i = 0; i < nv; ++i) {
      const double v = 0.5 * (gl.x[i] + 1.0);
      const double wv = 0.5 * gl.w[i] * 2.0 * (1.0 - cb) * v;
      const double u = cb + (1.0 - cb) * v * v;
      const double s = std::sqrt(std::max(0.0, 1.0 - u * u));
      for (int j = 0; j < na; ++j) {
        const double psi = (j + 0.5) * 2.0 * kPi / na;
        Vec local(3);
        local << u, s * std::cos(psi), s * std::sin(psi);
        rule.directions.push_back(q * local);
        rule.weights.push_back(wv * 2.0 * kPi / na);
      }
    }
  }
  return rule;
}

Result integrate_from_pole(const std::function<double(double)>& g, double length, double rtol) {
  Result res;
  if (!(length > 0.0)) {
    res.converged = true;
    return res;
  }
  double total = 0.0;
  double total_abs = 0.0;
  double prev = 0.0;
  double prev_q = std::numeric_limits<double>::quiet_NaN();
  int growing = 0, stable = 0, zeros = 0;
  for (int k = 0; k < kMaxShells; ++k) {
    const double b = std::ldexp(length, -k);
    const double a = 0.5 * b;
    const double shell = gl20(g, a, b);
    res.evaluations += 20;
    if (!std::isfinite(shell)) {
      res.divergent = true;
      res.value = std::numeric_limits<double>::infinity();
      return res;
    }
    total += shell;
    total_abs += std::abs(shell);
    if (k >= 3) {
      if (shell == 0.0 && prev == 0.0) {
        if (++zeros >= 3) {
          res.value = total;
          res.converged = true;
          return res;
        }
      } else {
        zeros = 0;
      }
      if (prev != 0.0) {
        const double q = shell / prev;
        growing = (q >= 1.0 - 1e-6) ? growing + 1 : 0;
        if (growing >= 4 && k >= 8) {
          res.divergent = true;
          res.value = std::numeric_limits<double>::infinity();
          return res;
        }
        if (std::abs(q) < 1.0) {
          const double tail = shell * q / (1.0 - q);
          const bool small = std::abs(tail) <= 0.01 * rtol * total_abs;
          stable = (std::isfinite(prev_q) && std::abs(q - prev_q) <= 1e-7 * std::abs(q)) ? stable + 1 : 0;
          if (small || stable >= 3) {
            // geometric tail is exact for a pure power law
            res.value = total + tail;
            res.error = small ? std::abs(tail) : std::abs(tail) * 1e-6;
            res.converged = true;
            return res;
          }
        }
        prev_q = q;
      }
    }
    prev = shell;
  }
  res.value = total;
  res.converged = false;
  return res;
}

Result integrate_segment(const std::function<double(double)>& g, double a, double b, double rtol) {
  Result res;
  if (!(b > a)) {
    res.converged = true;
    return res;
  }
  double err = 0.0, l1 = 0.0;
  try {
    res.value = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(g, a, b, 15, rtol, &err, &l1);
  } catch (const std::exception&) {
    res.divergent = true;
    res.value = std::numeric_limits<double>::infinity();
    return res;
  }
  res.error = err;
  res.evaluations = 31;
  if (!std::isfinite(res.value)) {
    res.divergent = true;
    return res;
  }
  res.converged = err <= std::max(rtol * l1, 1e-300) * 10.0;
  return res;
}

namespace {

// Ball integral by rays from the center; used for d >= 4 when the pole is
// outside the ball so the integrand is regular.
Result ball_from_center(const ScalarFn& f, const Ball& ball, const Options& opts) {
  const int d = ball.dim();
  Result res;
  double previous = 0.0;
  for (int level = 0; level <= opts.max_level; ++level) {
    const DirectionRule rule = sphere_rule(d, level, unit(d, 0), opts.seed);
    double total = 0.0, total_abs = 0.0;
    for (std::size_t j = 0; j < rule.directions.size(); ++j) {
      const Vec& dir = rule.directions[j];
      auto g = [&](double s) { return f(ball.center + s * dir) * std::pow(s, d - 1); };
      const Result ray = integrate_segment(g, 0.0, ball.radius, 0.1 * opts.rtol);
      res.evaluations += ray.evaluations;
      if (ray.divergent) {
        res.divergent = true;
        res.value = ray.value;
        return res;
      }
      total += rule.weights[j] * ray.value;
      total_abs += rule.weights[j] * std::abs(ray.value);
    }
    res.value = total;
    res.level = level;
    if (level > 0) {
      res.error = std::abs(total - previous);
      if (close_enough(total, previous, opts.rtol, opts.atol + opts.rtol * total_abs)) {
        res.converged = true;
        return res;
      }
    }
    previous = total;
  }
  return res;
}

}  // namespace

Result integrate_ball(const ScalarFn& f, const Ball& ball, const Options& opts, const Vec& pole) {
  const int d = ball.dim();
  const Vec c = ball.center - pole;
  const double dist = c.norm();
  const double r = ball.radius;
  const bool inside = dist < r * (1.0 - 1e-12);
  if (!inside && d >= 4) return ball_from_center(f, ball, opts);

  const Vec axis = dist > 0.0 ? Vec(c / dist) : unit(d, 0);
  const double ray_rtol = 0.1 * opts.rtol;
  Result res;
  double previous = 0.0;
  for (int level = 0; level <= opts.max_level; ++level) {
    const DirectionRule rule = inside ? sphere_rule(d, level, axis, opts.seed)
                                      : cap_rule(d, axis, std::asin(std::min(1.0, r / dist)), level);
    double total = 0.0, total_abs = 0.0;
    for (std::size_t j = 0; j < rule.directions.size(); ++j) {
      const Vec& dir = rule.directions[j];
      const double t = c.dot(dir);
      const double disc = r * r - dist * dist + t * t;
      if (disc <= 0.0) continue;
      const double sq = std::sqrt(disc);
      const double s1 = inside ? 0.0 : t - sq;
      const double s2 = t + sq;
      if (s2 <= 0.0) continue;
      auto g = [&](double s) { return f(pole + s * dir) * std::pow(s, d - 1); };
      const Result ray = (s1 <= 1e-14 * r) ? integrate_from_pole(g, s2, ray_rtol)
                                            : integrate_segment(g, s1, s2, ray_rtol);
      res.evaluations += ray.evaluations;
      if (ray.divergent || !ray.converged) {
        res.divergent = true;
        res.value = std::numeric_limits<double>::infinity();
        return res;
      }
      total += rule.weights[j] * ray.value;
      total_abs += rule.weights[j] * std::abs(ray.value);
    }
    res.value = total;
    res.level = level;
    if (level > 0) {
      res.error = std::abs(total - previous);
      if (close_enough(total, previous, opts.rtol, opts.atol + opts.rtol * total_abs)) {
        res.converged = true;
        return res;
      }
    }
    previous = total;
  }
  return res;
}

Result integrate_ball(const ScalarFn& f, const Ball& ball, const Options& opts) {
  return integrate_ball(f, ball, opts, Vec::Zero(ball.dim()));
}

Result integrate_annulus(const ScalarFn& f, int d, double r_in, double r_out, const Options& opts) {
  if (!(r_out > r_in) || r_in < 0.0) throw std::invalid_argument("integrate_annulus: need 0 <= r_in < r_out");
  Result res;
  double previous = 0.0;
  const double ray_rtol = 0.1 * opts.rtol;
  for (int level = 0; level <= opts.max_level; ++level) {
    const DirectionRule rule = sphere_rule(d, level, unit(d, 0), opts.seed);
    double total = 0.0, total_abs = 0.0;
    for (std::size_t j = 0; j < rule.directions.size(); ++j) {
      const Vec& dir = rule.directions[j];
      auto g = [&](double s) { return f(s * dir) * std::pow(s, d - 1); };
      const Result ray = r_in == 0.0 ? integrate_from_pole(g, r_out, ray_rtol)
                                     : integrate_segment(g, r_in, r_out, ray_rtol);
      res.evaluations += ray.evaluations;
      if (ray.divergent || !ray.converged) {
        res.divergent = true;
        res.value = std::numeric_limits<double>::infinity();
        return res;
      }
      total += rule.weights[j] * ray.value;
      total_abs += rule.weights[j] * std::abs(ray.value);
    }
    res.value = total;
    res.level = level;
    if (level > 0) {
      res.error = std::abs(total - previous);
      if (close_enough(total, previous, opts.rtol, opts.atol + opts.rtol * total_abs)) {
        res.converged = true;
        return res;
      }
    }
    previous = total;
  }
  return res;
}

std::vector<Result> integrate_box_stratified(const MultiFn& f, std::size_t n_outputs, const Box& box,
                                             const Options& opts) {
  const int d = box.dim();
  const Vec width = box.hi - box.lo;
  const double volume = box.volume();
  std::vector<Result> res(n_outputs);
  std::vector<double> previous(n_outputs, 0.0);
  std::vector<double> sums(n_outputs);
  std::vector<double> abs_sums(n_outputs);
  std::vector<double> scratch(n_outputs);
  for (int level = 0; level <= opts.max_level; ++level) {
    const double target = static_cast<double>(opts.initial_samples) * std::ldexp(1.0, level);
    const long m = std::max(1L, std::lround(std::pow(target, 1.0 / d)));
    long cells = 1;
    for (int i = 0; i < d; ++i) cells *= m;
    PhiloxStream rng(opts.seed, static_cast<std::uint64_t>(level));
    std::fill(sums.begin(), sums.end(), 0.0);
    std::fill(abs_sums.begin(), abs_sums.end(), 0.0);
    std::vector<long> idx(d, 0);
    Vec x(d);
    for (long cell = 0; cell < cells; ++cell) {
      long rest = cell;
      for (int i = 0; i < d; ++i) {
        idx[i] = rest % m;
        rest /= m;
        x[i] = box.lo[i] + width[i] * (static_cast<double>(idx[i]) + rng.uniform()) / static_cast<double>(m);
      }
      f(x, scratch);
      for (std::size_t k = 0; k < n_outputs; ++k) {
        sums[k] += scratch[k];
        abs_sums[k] += std::abs(scratch[k]);
      }
    }
    bool all_converged = level > 0;
    for (std::size_t k = 0; k < n_outputs; ++k) {
      const double est = volume * sums[k] / static_cast<double>(cells);
      res[k].evaluations += static_cast<std::size_t>(cells);
      res[k].value = est;
      res[k].level = level;
      if (!std::isfinite(est)) {
        res[k].divergent = true;
        all_converged = false;
        continue;
      }
      if (level > 0) {
        res[k].error = std::abs(est - previous[k]);
        const double l1 = volume * abs_sums[k] / static_cast<double>(cells);
        res[k].converged = close_enough(est, previous[k], opts.rtol, opts.atol + opts.rtol * l1);
        all_converged = all_converged && res[k].converged;
      }
      previous[k] = est;
    }
    if (all_converged) break;
  }
  return res;
}

Result integrate_box_stratified(const ScalarFn& f, const Box& box, const Options& opts) {
  return integrate_box_stratified([&](const Vec& x, std::span<double> out) { out[0] = f(x); }, 1, box,
                                  opts)[0];
}

std::vector<Result> integrate_box_gauss(const MultiFn& f, std::size_t n_outputs, const Box& box,
                                        const Options& opts) {
  constexpr int kNodesPerPanel = 8;
  constexpr std::size_t kMaxEvaluations = 20'000'000;
  const int d = box.dim();
  const Nodes& gl = cached_gl(kNodesPerPanel);
  std::vector<Result> res(n_outputs);
  std::vector<double> previous(n_outputs, 0.0);
  std::vector<double> sums(n_outputs);
  std::vector<double> abs_sums(n_outputs);
  std::vector<double> scratch(n_outputs);
  for (int level = 0; level <= opts.max_level; ++level) {
    const int panels = 1 << level;
    const int per_axis = panels * kNodesPerPanel;
    std::size_t total = 1;
    for (int i = 0; i < d; ++i) total *= static_cast<std::size_t>(per_axis);
    if (total > kMaxEvaluations) break;

    // 1-D composite nodes per axis
    std::vector<std::vector<double>> xs(d), ws(d);
    for (int i = 0; i < d; ++i) {
      const double h = (box.hi[i] - box.lo[i]) / panels;
      for (int p = 0; p < panels; ++p) {
        const double a = box.lo[i] + p * h;
        for (int k = 0; k < kNodesPerPanel; ++k) {
          xs[i].push_back(a + 0.5 * h * (gl.x[k] + 1.0));
          ws[i].push_back(0.5 * h * gl.w[k]);
        }
      }
    }
    std::fill(sums.begin(), sums.end(), 0.0);
    std::fill(abs_sums.begin(), abs_sums.end(), 0.0);
    Vec x(d);
    for (std::size_t flat = 0; flat < total; ++flat) {
      std::size_t rest = flat;
      double w = 1.0;
      for (int i = 0; i < d; ++i) {
        const std::size_t j = rest % static_cast<std::size_t>(per_axis);
        rest /= static_cast<std::size_t>(per_axis);
        x[i] = xs[i][j];
        w *= ws[i][j];
      }
      f(x, scratch);
      for (std::size_t k = 0; k < n_outputs; ++k) {
        sums[k] += w * scratch[k];
        abs_sums[k] += w * std::abs(scratch[k]);
      }
    }
    bool all_converged = level > 0;
    for (std::size_t k = 0; k < n_outputs; ++k) {
      res[k].evaluations += total;
      res[k].level = level;
      if (level > 0) {
        // Richardson step for a composite rule of order 2 * nodes per panel.
        const double factor = std::ldexp(1.0, 2 * kNodesPerPanel) - 1.0;
        const double extrapolated = sums[k] + (sums[k] - previous[k]) / factor;
        res[k].error = std::abs(sums[k] - previous[k]);
        res[k].value = extrapolated;
        res[k].converged = close_enough(sums[k], previous[k], opts.rtol, opts.atol + opts.rtol * abs_sums[k]);
        all_converged = all_converged && res[k].converged;
      } else {
        res[k].value = sums[k];
      }
      if (!std::isfinite(sums[k])) res[k].divergent = true;
      previous[k] = sums[k];
    }
    if (all_converged) break;
  }
  return res;
}

Result integrate_box_gauss(const ScalarFn& f, const Box& box, const Options& opts) {
  return integrate_box_gauss([&](const Vec& x, std::span<double> out) { out[0] = f(x); }, 1, box, opts)[0];
}

Result integrate_ball_radial(const std::function<double(double, double)>& shell, const Ball& ball,
                             const Vec& pole, double rtol) {
  const int d = ball.dim();
  const double dist = (ball.center - pole).norm();
  const double r = ball.radius;
  Result res;
  try {
    if (dist <= 1e-14 * r) {
      res.value = sphere_area(d) * shell(0.0, r);
      res.converged = true;
      return res;
    }
    const double ring = d == 2 ? 2.0 : sphere_area(d - 1);
    const double sin_power = d - 2.0;
    std::function<double(double)> integrand;
    double upper;
    if (dist < r) {
      integrand = [&](double phi) {
        const double sp = std::sin(phi);
        const double s2 = dist * std::cos(phi) + std::sqrt(std::max(0.0, r * r - dist * dist * sp * sp));
        return std::pow(sp, sin_power) * shell(0.0, s2);
      };
      upper = kPi;
    } else {
      const double beta = std::asin(std::min(1.0, r / dist));
      // phi = beta (1 - v^2) smooths the square-root edge at phi = beta
      integrand = [&, beta](double v) {
        const double phi = beta * (1.0 - v * v);
        const double sp = std::sin(phi);
        const double sq = std::sqrt(std::max(0.0, r * r - dist * dist * sp * sp));
        const double t = dist * std::cos(phi);
        const double s1 = std::max(0.0, t - sq);
        return std::pow(sp, sin_power) * shell(s1, t + sq) * 2.0 * beta * v;
      };
      upper = 1.0;
    }
    double err = 0.0, l1 = 0.0;
    const double value =
        boost::math::quadrature::gauss_kronrod<double, 31>::integrate(integrand, 0.0, upper, 20, rtol, &err, &l1);
    res.value = ring * value;
    res.error = ring * err;
    res.converged = std::isfinite(value) && err <= std::max(10.0 * rtol * l1, 1e-300);
    if (!std::isfinite(value)) res.divergent = true;
  } catch (const DivergentIntegralError&) {
    res.divergent = true;
    res.value = std::numeric_limits<double>::infinity();
  }
  return res;
}

Result integrate_box_from_pole(const ScalarFn& f, const Box& box, const Options& opts, const Vec& pole) {
  const int d = box.dim();
  if (pole.size() != d) throw std::invalid_argument("integrate_box_from_pole: dimension mismatch");
  if (!box.contains(pole)) return integrate_box_gauss(f, box, opts);

  Result res;
  res.converged = true;
  const double scale = (box.hi - box.lo).maxCoeff();
  for (int axis = 0; axis < d; ++axis) {
    for (const double side : {box.lo[axis], box.hi[axis]}) {
      const double h = std::abs(side - pole[axis]);
      if (h <= 1e-14 * scale) continue;
      // Face coordinates: every axis except `axis`. A one-dimensional box is
      // used for d = 2.
      Vec flo(d - 1), fhi(d - 1);
      for (int i = 0, k = 0; i < d; ++i) {
        if (i == axis) continue;
        flo[k] = box.lo[i];
        fhi[k] = box.hi[i];
        ++k;
      }
      bool bad_ray = false;
      auto face = [&](const Vec& q) {
        Vec p(d);
        for (int i = 0, k = 0; i < d; ++i) p[i] = (i == axis) ? side : q[k++];
        const Vec dir = p - pole;
        auto g = [&](double s) { return f(pole + s * dir) * std::pow(s, d - 1); };
        const Result ray = integrate_from_pole(g, 1.0, 0.1 * opts.rtol);
        res.evaluations += ray.evaluations;
        if (ray.divergent || !ray.converged) bad_ray = true;
        return h * ray.value;
      };
      const Result part = integrate_box_gauss(face, Box(flo, fhi), opts);
      if (bad_ray) {
        res.divergent = true;
        res.converged = false;
        res.value = std::numeric_limits<double>::infinity();
        return res;
      }
      res.value += part.value;
      res.error += part.error;
      res.level = std::max(res.level, part.level);
      res.converged = res.converged && part.converged;
    }
  }
  return res;
}

}  // namespace wdiff::quad
