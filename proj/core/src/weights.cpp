#include "wdiff/weights.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "wdiff/errors.hpp"
#include "wdiff/rng.hpp"

namespace wdiff {

// ---------------------------------------------------------------------------
// Weight

Weight Weight::power(int dim, double alpha) {
  if (dim < 1 || dim > kMaxDim) throw std::invalid_argument("Weight::power: unsupported dimension");
  if (!(alpha > -dim))
    throw std::invalid_argument("Weight::power: alpha must exceed -d for local integrability");
  Weight w;
  w.kind_ = Kind::power;
  w.dim_ = dim;
  w.alpha_ = alpha;
  return w;
}

Weight Weight::exponential(int dim, ScalarField phi) {
  if (dim < 1 || dim > kMaxDim) throw std::invalid_argument("Weight::exponential: unsupported dimension");
  Weight w;
  w.kind_ = Kind::exponential;
  w.dim_ = dim;
  w.phi_ = std::make_shared<const ScalarField>(std::move(phi));
  return w;
}

Weight Weight::product(ScalarField multiplier, double bound, Weight base) {
  if (!(bound >= 1.0)) throw std::invalid_argument("Weight::product: multiplier bound c must be >= 1");
  Weight w;
  w.kind_ = Kind::product;
  w.dim_ = base.dim();
  w.bound_ = bound;
  w.multiplier_ = std::make_shared<const ScalarField>(std::move(multiplier));
  w.base_ = std::make_shared<const Weight>(std::move(base));
  return w;
}

Weight Weight::custom(int dim, ScalarField density) {
  if (dim < 1 || dim > kMaxDim) throw std::invalid_argument("Weight::custom: unsupported dimension");
  Weight w;
  w.kind_ = Kind::custom;
  w.dim_ = dim;
  w.density_ = std::make_shared<const ScalarField>(std::move(density));
  return w;
}

double Weight::operator()(const Vec& x) const {
  switch (kind_) {
    case Kind::power: {
      if (alpha_ == 0.0) return 1.0;
      const double r = x.norm();
      if (r == 0.0) {
        if (alpha_ < 0.0) throw SingularPointError("power weight with alpha < 0 evaluated at the origin");
        return 0.0;
      }
      return std::pow(r, alpha_);
    }
    case Kind::exponential:
      return std::exp((*phi_)(x));
    case Kind::product: {
      const double m = (*multiplier_)(x);
      if (m < (1.0 - 1e-12) / bound_ || m > bound_ * (1.0 + 1e-12)) {
        std::ostringstream msg;
        msg << "product weight multiplier " << m << " outside [1/c, c] with c = " << bound_;
        throw std::domain_error(msg.str());
      }
      return m * (*base_)(x);
    }
    case Kind::custom:
      return (*density_)(x);
  }
  return 0.0;
}

std::optional<Vec> Weight::gradient(const Vec& x) const {
  switch (kind_) {
    case Kind::power: {
      if (alpha_ == 0.0) return Vec::Zero(dim_);
      const double r = x.norm();
      if (r == 0.0) return std::nullopt;
      return Vec(alpha_ * std::pow(r, alpha_ - 2.0) * x);
    }
    case Kind::exponential:
      if (!phi_->gradient) return std::nullopt;
      return Vec(std::exp((*phi_)(x)) * (*phi_->gradient)(x));
    case Kind::product: {
      if (!multiplier_->gradient) return std::nullopt;
      const auto gb = base_->gradient(x);
      if (!gb) return std::nullopt;
      return Vec((*multiplier_->gradient)(x) * (*base_)(x) + (*multiplier_)(x) * *gb);
    }
    case Kind::custom:
      if (!density_->gradient) return std::nullopt;
      return (*density_->gradient)(x);
  }
  return std::nullopt;
}

std::optional<double> Weight::power_exponent() const {
  if (kind_ == Kind::power) return alpha_;
  return std::nullopt;
}

bool Weight::is_singular_at(const Vec& x) const {
  if (kind_ == Kind::power) return alpha_ != 0.0 && x.norm() == 0.0;
  try {
    const double v = (*this)(x);
    return !std::isfinite(v) || v <= 0.0;
  } catch (const SingularPointError&) {
    return true;
  }
}

std::string Weight::describe() const {
  std::ostringstream os;
  switch (kind_) {
    case Kind::power:
      os << "power(alpha=" << alpha_ << ", d=" << dim_ << ")";
      break;
    case Kind::exponential:
      os << "exponential(phi=" << phi_->name << ", d=" << dim_ << ")";
      break;
    case Kind::product:
      os << "product(" << multiplier_->name << ", c=" << bound_ << ", " << base_->describe() << ")";
      break;
    case Kind::custom:
      os << "custom(" << density_->name << ", d=" << dim_ << ")";
      break;
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Quadrature helpers

quad::Options QuadratureConfig::options() const {
  quad::Options o;
  o.rtol = rtol;
  o.max_level = max_level;
  o.seed = seed;
  o.initial_samples = initial_samples;
  return o;
}

quad::Options QuadratureConfig::mc_options() const {
  quad::Options o = options();
  o.rtol = mc_rtol;
  o.max_level = std::max(max_level, 8);
  return o;
}

namespace {

std::string describe_ball(const Ball& b) {
  std::ostringstream os;
  os << "ball(center=[";
  for (int i = 0; i < b.dim(); ++i) os << (i ? "," : "") << b.center[i];
  os << "], r=" << b.radius << ")";
  return os.str();
}

// int_a^b s^{beta + d - 1} ds
std::function<double(double, double)> power_shell(double beta, int d) {
  return [beta, d](double a, double b) {
    const double e = beta + d;
    if (a <= 0.0 && e <= 0.0)
      throw DivergentIntegralError("|x|^beta is not locally integrable at the origin for beta <= -d");
    if (std::abs(e) < 1e-14) return std::log(b / a);
    return (std::pow(b, e) - std::pow(a, e)) / e;
  };
}

struct Integral {
  double value;
  double rel_error;
};

Integral require(const quad::Result& r, const char* what) {
  if (r.divergent || !r.converged || !std::isfinite(r.value))
    throw DivergentIntegralError(std::string(what) + ": quadrature failed its convergence test");
  const double rel = r.value != 0.0 ? r.error / std::abs(r.value) : r.error;
  return {r.value, rel};
}

// int_B |x|^beta dx for the power kinds, by exact radial reduction.
Integral power_integral(double beta, const Ball& b, double rtol, const char* what) {
  return require(quad::integrate_ball_radial(power_shell(beta, b.dim()), b, Vec::Zero(b.dim()), rtol), what);
}

Integral weight_integral(const Weight& w, const Ball& b, const QuadratureConfig& qc, bool inverse,
                         const char* what) {
  if (const auto alpha = w.power_exponent())
    return power_integral(inverse ? -*alpha : *alpha, b, qc.rtol * 1e-3, what);
  auto f = [&w, inverse](const Vec& x) {
    const double v = w(x);
    return inverse ? 1.0 / v : v;
  };
  return require(quad::integrate_ball(f, b, qc.options()), what);
}

struct RatioWithError {
  double ratio;
  double rel_error;
};

RatioWithError a2_ratio_impl(const Weight& w, const Ball& b, const QuadratureConfig& qc) {
  if (b.dim() != w.dim()) throw std::invalid_argument("a2_ratio: dimension mismatch");
  const double vol = quad::ball_volume(b.dim(), b.radius);
  const Integral mass = weight_integral(w, b, qc, false, "a2_ratio(rho)");
  const Integral inv = weight_integral(w, b, qc, true, "a2_ratio(1/rho)");
  return {(mass.value / vol) * (inv.value / vol), mass.rel_error + inv.rel_error};
}

RatioWithError doubling_impl(const Weight& w, const Ball& b, const QuadratureConfig& qc) {
  if (b.dim() != w.dim()) throw std::invalid_argument("doubling_ratio: dimension mismatch");
  const Integral small = weight_integral(w, b, qc, false, "doubling_ratio(B_r)");
  const Integral big = weight_integral(w, Ball(b.center, 2.0 * b.radius), qc, false, "doubling_ratio(B_2r)");
  return {big.value / small.value, small.rel_error + big.rel_error};
}

template <class RatioFn>
WeightClassReport sample_balls(const std::string& condition, const Weight& w, const BallSampling& s,
                               int n_balls, std::uint64_t seed, double threshold, const QuadratureConfig& qc,
                               RatioFn ratio_fn) {
  if (n_balls < 1) throw std::invalid_argument(condition + ": n_balls must be >= 1");
  if (s.region.dim() != w.dim()) throw std::invalid_argument(condition + ": region dimension mismatch");
  if (!(s.r_min > 0.0 && s.r_max >= s.r_min)) throw std::invalid_argument(condition + ": bad radius range");
  PhiloxStream rng(seed, 0);
  struct Entry {
    double ratio;
    std::string what;
  };
  std::vector<Entry> entries;
  WeightClassReport rep;
  rep.condition = condition;
  rep.threshold = threshold;
  rep.rtol = qc.rtol;
  const double log_lo = std::log(s.r_min), log_hi = std::log(s.r_max);
  for (int i = 0; i < n_balls; ++i) {
    Vec c(w.dim());
    for (int k = 0; k < w.dim(); ++k) c[k] = s.region.lo[k] + rng.uniform() * (s.region.hi[k] - s.region.lo[k]);
    const double r = std::exp(log_lo + rng.uniform() * (log_hi - log_lo));
    const Ball b(c, r);
    const RatioWithError rr = ratio_fn(b);
    rep.quadrature_error = std::max(rep.quadrature_error, rr.rel_error);
    entries.push_back({rr.ratio, describe_ball(b)});
  }
  std::stable_sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) { return a.ratio > b.ratio; });
  rep.worst_ratio = entries.front().ratio;
  rep.n_samples = entries.size();
  for (std::size_t i = 0; i < std::min<std::size_t>(entries.size(), 5); ++i) rep.regions.push_back(entries[i].what);
  rep.pass = rep.worst_ratio <= threshold;
  return rep;
}

}  // namespace

// ---------------------------------------------------------------------------
// Operations

quad::Result ball_mass(const Weight& w, const Ball& b, const QuadratureConfig& qc) {
  if (const auto alpha = w.power_exponent())
    return quad::integrate_ball_radial(power_shell(*alpha, b.dim()), b, Vec::Zero(b.dim()), qc.rtol * 1e-3);
  return quad::integrate_ball([&w](const Vec& x) { return w(x); }, b, qc.options());
}

double a2_ratio(const Weight& w, const Ball& b, const QuadratureConfig& qc) {
  return a2_ratio_impl(w, b, qc).ratio;
}

WeightClassReport check_a2(const Weight& w, const BallSampling& sampling, int n_balls, std::uint64_t seed,
                           double threshold, const QuadratureConfig& qc) {
  return sample_balls("a2", w, sampling, n_balls, seed, threshold, qc,
                      [&](const Ball& b) { return a2_ratio_impl(w, b, qc); });
}

double doubling_ratio(const Weight& w, const Ball& b, const QuadratureConfig& qc) {
  return doubling_impl(w, b, qc).ratio;
}

WeightClassReport check_doubling(const Weight& w, const BallSampling& sampling, int n_balls,
                                 std::uint64_t seed, double threshold, const QuadratureConfig& qc) {
  if (threshold <= 0.0) threshold = std::pow(2.0, w.dim() + std::abs(w.power_exponent().value_or(0.0)) + 1.0);
  return sample_balls("doubling", w, sampling, n_balls, seed, threshold, qc,
                      [&](const Ball& b) { return doubling_impl(w, b, qc); });
}

double bmo_exp_avg(const ScalarField& phi, const Box& cube, const QuadratureConfig& qc) {
  const quad::Options opts = qc.mc_options();
  const double vol = cube.volume();
  const Integral mean = require(quad::integrate_box_stratified(phi.value, cube, opts), "bmo_exp_avg(phi_Q)");
  const double phi_q = mean.value / vol;
  const Integral avg = require(
      quad::integrate_box_stratified([&](const Vec& x) { return std::exp(std::abs(phi(x) - phi_q)); }, cube, opts),
      "bmo_exp_avg");
  return avg.value / vol;
}

double poincare_ratio(const Weight& w, const Ball& b, const GradientField& u, const QuadratureConfig& qc) {
  if (b.dim() != w.dim()) throw std::invalid_argument("poincare_ratio: dimension mismatch");
  const quad::Options opts = qc.options();
  const double grad_term =
      require(quad::integrate_ball([&](const Vec& x) { return u.gradient(x).squaredNorm() * w(x); }, b, opts),
              "poincare_ratio(gradient)")
          .value;
  if (!(grad_term > 0.0))
    throw DegenerateTestFunctionError("poincare_ratio: int |grad u|^2 dm vanishes on the ball");
  const double mass = weight_integral(w, b, qc, false, "poincare_ratio(mass)").value;
  const double u_mean =
      require(quad::integrate_ball([&](const Vec& x) { return u.value(x) * w(x); }, b, opts), "poincare_ratio(mean)")
          .value /
      mass;
  const double deviation = require(quad::integrate_ball(
                                       [&](const Vec& x) {
                                         const double e = u.value(x) - u_mean;
                                         return e * e * w(x);
                                       },
                                       b, opts),
                                   "poincare_ratio(deviation)")
                                .value;
  return deviation / (b.radius * b.radius * grad_term);
}

double mean_deviation(std::span<const WeightedSample> samples, const Weight& w, std::optional<double> reference) {
  if (samples.empty()) throw std::invalid_argument("mean_deviation: empty sample list");
  double mass = 0.0, first = 0.0;
  std::vector<double> rho(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    rho[i] = w(samples[i].point);
    mass += rho[i];
    first += rho[i] * samples[i].value;
  }
  const double ref = reference.value_or(first / mass);
  double acc = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double e = samples[i].value - ref;
    acc += rho[i] * e * e;
  }
  return acc / mass;
}

// ---------------------------------------------------------------------------
// Scalar fields

namespace fields {

ScalarField constant(double c) {
  return {[c](const Vec&) { return c; }, [](const Vec& x) { return Vec(Vec::Zero(x.size())); }, "constant"};
}

ScalarField linear(const Vec& v) {
  return {[v](const Vec& x) { return v.dot(x); }, [v](const Vec&) { return v; }, "linear"};
}

ScalarField log_norm(double scale) {
  return {[scale](const Vec& x) { return scale * std::log(x.norm()); },
          [scale](const Vec& x) { return Vec(scale * x / x.squaredNorm()); }, "log_norm"};
}

ScalarField sine_ripple(double amplitude, const Vec& k) {
  if (!(std::abs(amplitude) < 1.0)) throw std::invalid_argument("sine_ripple: |amplitude| must be < 1");
  return {[amplitude, k](const Vec& x) { return 1.0 + amplitude * std::sin(k.dot(x)); },
          [amplitude, k](const Vec& x) { return Vec(amplitude * std::cos(k.dot(x)) * k); }, "sine_ripple"};
}

ScalarField norm_power(double alpha) {
  return {[alpha](const Vec& x) { return std::pow(x.norm(), alpha); },
          [alpha](const Vec& x) {
            const double r = x.norm();
            return Vec(alpha * std::pow(r, alpha - 2.0) * x);
          },
          "norm_power"};
}

}  // namespace fields

}  // namespace wdiff
