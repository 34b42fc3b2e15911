#include "wdiff/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "wdiff/errors.hpp"

namespace wdiff {

std::vector<Vec> states_at(const PathBatch& b, double t) {
  std::vector<Vec> out;
  if (t == 0.0) {
    out.assign(b.paths.size(), b.x0);
    return out;
  }
  const auto& snaps = b.config.snapshot_times;
  for (std::size_t j = 0; j < snaps.size(); ++j) {
    if (std::abs(snaps[j] - t) <= 1e-12 * std::max(1.0, t)) {
      for (const auto& p : b.paths)
        if (p.snapshots.size() > j) out.push_back(p.snapshots[j]);
      return out;
    }
  }
  if (std::abs(b.config.horizon - t) <= 1e-12 * std::max(1.0, t)) {
    for (const auto& p : b.paths)
      if (p.event == TerminalEvent::ran_to_horizon) out.push_back(p.terminal_state());
    return out;
  }
  throw std::invalid_argument("states_at: time was not recorded in the batch");
}

// ---------------------------------------------------------------------------
// Kernel density estimation

Bandwidth Bandwidth::silverman(double scale) {
  Bandwidth b;
  b.scale = scale;
  return b;
}

Bandwidth Bandwidth::fixed(const Vec& h) {
  Bandwidth b;
  b.kind = Kind::fixed;
  b.fixed_h = h;
  return b;
}

Vec silverman_bandwidth(const std::vector<Vec>& sample) {
  if (sample.size() < 2) throw EmptyBatchError("silverman_bandwidth: need at least two sample points");
  const int d = static_cast<int>(sample.front().size());
  const double n = static_cast<double>(sample.size());
  Vec mean = Vec::Zero(d);
  for (const auto& x : sample) mean += x;
  mean /= n;
  Vec var = Vec::Zero(d);
  for (const auto& x : sample) var += (x - mean).cwiseAbs2();
  var /= (n - 1.0);
  const double factor = std::pow(4.0 / ((d + 2.0) * n), 1.0 / (d + 4.0));
  return Vec(var.cwiseSqrt() * factor);
}

DensityEstimate kde_transition_density(const std::vector<Vec>& sample, std::size_t n_total, const Weight& w,
                                       const std::vector<Vec>& ys, const Bandwidth& bw, double t) {
  if (sample.empty() || n_total == 0) throw EmptyBatchError("kde_transition_density: empty sample");
  if (n_total < sample.size()) throw std::invalid_argument("kde_transition_density: n_total below sample size");
  const int d = static_cast<int>(sample.front().size());
  DensityEstimate est;
  est.t = t;
  est.points = ys;
  est.n_total = n_total;
  est.n_used = sample.size();
  Vec h = bw.kind == Bandwidth::Kind::fixed ? bw.fixed_h : silverman_bandwidth(sample);
  if (h.size() != d) throw std::invalid_argument("kde_transition_density: bandwidth dimension mismatch");
  h *= bw.scale;
  if (!(h.minCoeff() > 0.0)) throw std::invalid_argument("kde_transition_density: bandwidth must be positive");
  est.bandwidth = h;
  const Vec inv_h = h.cwiseInverse();
  const double norm = 1.0 / (std::pow(2.0 * std::numbers::pi, 0.5 * d) * h.prod());
  const double n = static_cast<double>(n_total);
  for (const auto& y : ys) {
    if (w.is_singular_at(y)) throw SingularPointError("kde_transition_density: rho undefined or zero at an evaluation point");
    const double rho = w(y);
    if (!(rho > 0.0) || !std::isfinite(rho))
      throw SingularPointError("kde_transition_density: rho undefined or zero at an evaluation point");
    double sum = 0.0, sum_sq = 0.0;
    for (const auto& x : sample) {
      const double q = (y - x).cwiseProduct(inv_h).squaredNorm();
      const double k = norm * std::exp(-0.5 * q);
      sum += k;
      sum_sq += k * k;
    }
    const double mean = sum / n;
    const double var = n > 1.0 ? std::max(0.0, (sum_sq - n * mean * mean) / (n - 1.0)) : 0.0;
    est.value.push_back(mean / rho);
    est.se.push_back(std::sqrt(var / n) / rho);
  }
  return est;
}

DensityEstimate kde_transition_density(const PathBatch& b, double t, const Weight& w, const std::vector<Vec>& ys,
                                       const Bandwidth& bw) {
  if (b.paths.empty()) throw EmptyBatchError("kde_transition_density: empty batch");
  return kde_transition_density(states_at(b, t), b.paths.size(), w, ys, bw, t);
}

BandwidthSensitivity kde_sensitivity(const PathBatch& b, double t, const Weight& w, const std::vector<Vec>& ys,
                                     const Bandwidth& bw) {
  if (b.paths.empty()) throw EmptyBatchError("kde_sensitivity: empty batch");
  const auto sample = states_at(b, t);
  BandwidthSensitivity s;
  s.base = kde_transition_density(sample, b.paths.size(), w, ys, bw, t);
  s.half = kde_transition_density(sample, b.paths.size(), w, ys, Bandwidth::fixed(s.base.bandwidth * 0.5), t);
  s.twice = kde_transition_density(sample, b.paths.size(), w, ys, Bandwidth::fixed(s.base.bandwidth * 2.0), t);
  for (std::size_t i = 0; i < ys.size(); ++i) {
    const double p = s.base.value[i];
    if (p <= 0.0) continue;
    s.max_rel_change = std::max({s.max_rel_change, std::abs(s.half.value[i] - p) / p, std::abs(s.twice.value[i] - p) / p});
  }
  return s;
}

// ---------------------------------------------------------------------------
// Heat-kernel envelope

double heat_kernel_envelope(const Weight& w, double lambda, const Vec& x, const Vec& y, double t, double eps,
                            const QuadratureConfig& qc) {
  return HeatKernelEnvelope(w, lambda, qc)(x, y, t, eps);
}

HeatKernelEnvelope::HeatKernelEnvelope(Weight w, double lambda, QuadratureConfig qc)
    : w_(std::move(w)), lambda_(lambda), qc_(qc) {
  if (!(lambda >= 1.0)) throw std::invalid_argument("HeatKernelEnvelope: lambda must be >= 1");
}

QuadratureConfig HeatKernelEnvelope::default_config() {
  QuadratureConfig qc;
  qc.rtol = 1e-3;
  return qc;
}

double HeatKernelEnvelope::ball_mass(const Vec& centre, double radius) const {
  std::vector<long long> key;
  key.reserve(centre.size() + 1);
  for (Eigen::Index i = 0; i < centre.size(); ++i) key.push_back(std::llround(centre[i] * 1e9));
  key.push_back(std::llround(std::log(radius) * 1e9));
  if (auto it = cache_.find(key); it != cache_.end()) return it->second;
  const auto r = wdiff::ball_mass(w_, Ball(centre, radius), qc_);
  cache_.emplace(std::move(key), r.value);
  return r.value;
}

double HeatKernelEnvelope::operator()(const Vec& x, const Vec& y, double t, double eps) const {
  if (!(t > 0.0)) throw std::invalid_argument("heat_kernel_envelope: t must be positive");
  if (!(eps > 0.0)) throw std::invalid_argument("heat_kernel_envelope: eps must be positive");
  const double r = std::sqrt(t);
  const double mx = ball_mass(x, r);
  const double my = ball_mass(y, r);
  return std::exp(-(x - y).squaredNorm() / (lambda_ * (4.0 + eps) * t)) / std::sqrt(mx * my);
}

EnvelopeReport fit_heat_kernel_constant(const DensityEstimate& est, const std::vector<double>& envelope, double eps,
                                        double z) {
  if (envelope.size() != est.value.size())
    throw std::invalid_argument("fit_heat_kernel_constant: grid size mismatch");
  EnvelopeReport rep;
  rep.t = est.t;
  rep.eps = eps;
  rep.confidence_z = z;
  bool any_positive = false;
  for (std::size_t i = 0; i < envelope.size(); ++i) {
    if (!(envelope[i] > 0.0) || !std::isfinite(envelope[i])) {
      ++rep.excluded;
      continue;
    }
    ++rep.n_points;
    any_positive = any_positive || est.value[i] > 0.0;
    rep.c_hat = std::max(rep.c_hat, (est.value[i] + z * est.se[i]) / envelope[i]);
  }
  if (rep.excluded > 0) rep.warnings.push_back(std::to_string(rep.excluded) + " grid points with zero envelope excluded");
  if (!any_positive) {
    rep.degenerate = true;
    rep.warnings.push_back("every density estimate is zero; c_hat reflects the standard-error term only");
  }
  for (std::size_t i = 0; i < envelope.size(); ++i) {
    if (!(envelope[i] > 0.0) || !std::isfinite(envelope[i])) continue;
    if (est.value[i] + z * est.se[i] > rep.c_hat * envelope[i] * (1.0 + 1e-12)) ++rep.exceedances;
  }
  return rep;
}

EnvelopeStability envelope_stability(const std::vector<EnvelopeReport>& sweep, double max_ratio) {
  if (sweep.empty()) throw std::invalid_argument("envelope_stability: empty sweep");
  EnvelopeStability s;
  s.c_min = std::numeric_limits<double>::infinity();
  for (const auto& r : sweep) {
    s.c_min = std::min(s.c_min, r.c_hat);
    s.c_max = std::max(s.c_max, r.c_hat);
  }
  s.ratio = s.c_min > 0.0 ? s.c_max / s.c_min : std::numeric_limits<double>::infinity();
  s.stable = s.ratio < max_ratio;
  return s;
}

// ---------------------------------------------------------------------------
// Riesz potentials

RieszSource RieszSource::indicator_ball(const Ball& b) {
  RieszSource s;
  s.ball = b;
  s.g = [c = b.center, r2 = b.radius * b.radius](const Vec& y) { return (y - c).squaredNorm() <= r2 ? 1.0 : 0.0; };
  s.name = "indicator_ball";
  return s;
}

RieszSource RieszSource::zero(int dim) {
  RieszSource s;
  s.ball = Ball(Vec::Zero(dim), 1.0);
  s.g = [](const Vec&) { return 0.0; };
  s.name = "zero";
  return s;
}

int RieszSource::dim() const {
  if (ball) return ball->dim();
  if (box) return box->dim();
  throw std::invalid_argument("RieszSource: no support declared");
}

Ball RieszSource::support_ball() const {
  if (ball) return *ball;
  if (box) return Ball(Vec(0.5 * (box->lo + box->hi)), 0.5 * (box->hi - box->lo).norm() * (1.0 + 1e-12));
  throw std::invalid_argument("RieszSource: no support declared");
}

quad::Result riesz_potential(const RieszSource& g, double eta, const Vec& x, const quad::Options& opts) {
  const int d = g.dim();
  if (x.size() != d) throw std::invalid_argument("riesz_potential: dimension mismatch");
  if (!(eta > 0.0 && eta < d)) throw std::invalid_argument("riesz_potential: eta must lie in (0, d)");
  const Ball support = g.support_ball();
  const std::optional<Box> box = g.ball ? std::nullopt : g.box;
  auto integrand = [&](const Vec& y) {
    if (box && !box->contains(y)) return 0.0;
    const double v = g.g(y);
    if (v == 0.0) return 0.0;
    return v * std::pow((x - y).norm(), eta - d);
  };
  const auto r = box ? quad::integrate_box_from_pole(integrand, *box, opts, x)
                     : quad::integrate_ball(integrand, support, opts, x);
  if (r.divergent || !r.converged)
    throw DivergentIntegralError("riesz_potential: quadrature failed its convergence test");
  return r;
}

double resolvent_envelope(double alpha, int d, const Vec& x, const Vec& y) {
  if (!(alpha > -d)) throw std::invalid_argument("resolvent_envelope: alpha must exceed -d");
  const double dist = (x - y).norm();
  if (dist == 0.0) throw CoincidentPointsError("resolvent_envelope: x and y coincide");
  const bool with_psi = alpha < 0.0;
  if (with_psi && y.norm() == 0.0) throw SingularPointError("resolvent_envelope: y = 0 with alpha < 0");
  double value = std::pow(dist, -(alpha + d - 2.0));
  if (with_psi) value += std::pow(dist, 2.0 - d) * std::pow(y.norm(), -alpha);
  return value;
}

HoelderReport check_hoelder_hypotheses(const RieszSource& g, double p, double eta, int d, const quad::Options& opts) {
  HoelderReport rep;
  rep.eta = eta;
  rep.p = p;
  rep.d = d;
  rep.eta_in_range = eta > 0.0 && eta < d;
  if (!rep.eta_in_range) rep.failures.push_back("eta outside (0, d)");
  rep.order = eta - d / p;
  rep.order_in_range = p >= 1.0 && rep.order > 0.0 && rep.order < 1.0;
  if (!rep.order_in_range) rep.failures.push_back("eta - d/p outside (0, 1)");
  try {
    const Ball support = g.support_ball();
    const std::optional<Box> box = g.ball ? std::nullopt : g.box;
    auto integrand = [&](const Vec& y) {
      if (box && !box->contains(y)) return 0.0;
      return std::pow(1.0 + y.norm(), eta - d) * std::abs(g.g(y));
    };
    const auto r = box ? quad::integrate_box_gauss(integrand, *box, opts) : quad::integrate_ball(integrand, support, opts);
    rep.tail_finite = r.converged && !r.divergent && std::isfinite(r.value);
    rep.tail_integral = rep.tail_finite ? r.value : std::numeric_limits<double>::infinity();
  } catch (const std::exception& e) {
    rep.tail_finite = false;
    rep.tail_integral = std::numeric_limits<double>::infinity();
    rep.failures.push_back(std::string("tail integral: ") + e.what());
  }
  if (!rep.tail_finite && rep.failures.empty()) rep.failures.push_back("tail integral not finite");
  rep.pass = rep.eta_in_range && rep.order_in_range && rep.tail_finite;
  return rep;
}

// ---------------------------------------------------------------------------
// Moments

MomentSummary moment_summary(const PathBatch& b, double t) {
  const auto xs = states_at(b, t);
  if (xs.empty()) throw EmptyBatchError("moment_summary: no path alive at t");
  const int d = static_cast<int>(xs.front().size());
  MomentSummary m;
  m.t = t;
  m.n = xs.size();
  std::vector<double> sq;
  sq.reserve(xs.size());
  for (const auto& x : xs) sq.push_back(x.squaredNorm());
  m.mean_sq_norm = stats::mean_se(sq);
  const double z = stats::normal_critical(0.99);
  m.mean_sq_norm_ci = {m.mean_sq_norm.mean - z * m.mean_sq_norm.se, m.mean_sq_norm.mean + z * m.mean_sq_norm.se};
  std::vector<double> comp(xs.size());
  Vec mean = Vec::Zero(d);
  for (int i = 0; i < d; ++i) {
    for (std::size_t k = 0; k < xs.size(); ++k) comp[k] = xs[k][i];
    m.component_means.push_back(stats::mean_se(comp));
    mean[i] = m.component_means.back().mean;
  }
  m.covariance = Mat::Zero(d, d);
  for (const auto& x : xs) m.covariance += (x - mean) * (x - mean).transpose();
  if (xs.size() > 1) m.covariance /= static_cast<double>(xs.size() - 1);
  return m;
}

}  // namespace wdiff
