#include "wdiff/sde.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "wdiff/rng.hpp"

namespace wdiff {

// ---------------------------------------------------------------------------
// Configuration types

StepPolicy StepPolicy::fixed(bool tamed) {
  StepPolicy p;
  p.kind = Kind::fixed;
  p.tamed = tamed;
  return p;
}

StepPolicy StepPolicy::adaptive(double theta, double dt_min, bool tamed) {
  StepPolicy p;
  p.kind = Kind::adaptive;
  p.theta = theta;
  p.dt_min = dt_min;
  p.tamed = tamed;
  return p;
}

std::string StepPolicy::describe() const {
  std::ostringstream os;
  if (kind == Kind::fixed) {
    os << "fixed";
  } else {
    os << "adaptive(theta=" << theta << ", dt_min=" << dt_min << ")";
  }
  if (tamed) os << "+tamed";
  return os.str();
}

Domain Domain::full() { return Domain{}; }

Domain Domain::annulus(int k) {
  if (k < 1) throw std::invalid_argument("Domain::annulus: k must be >= 1");
  Domain d;
  d.kind = Kind::annulus;
  d.k = k;
  return d;
}

Domain Domain::ball(double radius) {
  if (!(radius > 0.0)) throw std::invalid_argument("Domain::ball: radius must be positive");
  Domain d;
  d.kind = Kind::ball;
  d.radius = radius;
  return d;
}

bool Domain::contains(const Vec& x) const {
  switch (kind) {
    case Kind::full:
      return true;
    case Kind::annulus: {
      const double r = x.norm();
      return r > 1.0 / k && r < k;
    }
    case Kind::ball:
      return x.norm() < radius;
  }
  return true;
}

std::string Domain::describe() const {
  std::ostringstream os;
  switch (kind) {
    case Kind::full:
      os << "full";
      break;
    case Kind::annulus:
      os << "annulus(k=" << k << ")";
      break;
    case Kind::ball:
      os << "ball(radius=" << radius << ")";
      break;
  }
  return os.str();
}

void SimConfig::validate() const {
  if (!(horizon > 0.0)) throw std::invalid_argument("SimConfig: horizon must be positive");
  if (!(dt > 0.0)) throw std::invalid_argument("SimConfig: dt must be positive");
  if (dt > horizon) throw std::invalid_argument("SimConfig: dt must not exceed the horizon");
  if (policy.kind == StepPolicy::Kind::adaptive) {
    if (!(policy.theta > 0.0 && policy.theta < 1.0)) throw std::invalid_argument("SimConfig: theta must lie in (0,1)");
    if (!(policy.dt_min > 0.0 && policy.dt_min <= dt))
      throw std::invalid_argument("SimConfig: need 0 < dt_min <= dt");
  }
  if (!(r_max > 0.0)) throw std::invalid_argument("SimConfig: r_max must be positive");
  if (record_stride < 0) throw std::invalid_argument("SimConfig: record_stride must be >= 0");
  for (std::size_t j = 0; j < snapshot_times.size(); ++j) {
    if (!(snapshot_times[j] >= 0.0 && snapshot_times[j] <= horizon))
      throw std::invalid_argument("SimConfig: snapshot times must lie in [0, horizon]");
    if (j > 0 && !(snapshot_times[j] > snapshot_times[j - 1]))
      throw std::invalid_argument("SimConfig: snapshot times must be strictly increasing");
  }
  for (double r : hit_radii)
    if (!(r > 0.0)) throw std::invalid_argument("SimConfig: hit radii must be positive");
}

std::string to_string(TerminalEvent e) {
  switch (e) {
    case TerminalEvent::ran_to_horizon: return "ran_to_horizon";
    case TerminalEvent::exited_domain: return "exited_domain";
    case TerminalEvent::exceeded_rmax: return "exceeded_rmax";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Geometry helpers

namespace {

// Smallest s in [0,1] with |a + s (b - a)| <= r, or -1.
double first_entry(const Vec& a, const Vec& b, double r) {
  const double r2 = r * r;
  if (a.squaredNorm() <= r2) return 0.0;
  const Vec delta = b - a;
  const double qa = delta.squaredNorm();
  if (qa == 0.0) return -1.0;
  const double qb = a.dot(delta);
  const double qc = a.squaredNorm() - r2;
  const double disc = qb * qb - qa * qc;
  if (disc < 0.0) return -1.0;
  const double s = (-qb - std::sqrt(disc)) / qa;
  return (s >= 0.0 && s <= 1.0) ? s : -1.0;
}

// Smallest s in [0,1] with |a + s (b - a)| >= r, given |a| < r; or -1.
double first_exit_sphere(const Vec& a, const Vec& b, double r) {
  if (b.squaredNorm() < r * r) return -1.0;
  const Vec delta = b - a;
  const double qa = delta.squaredNorm();
  if (qa == 0.0) return 0.0;
  const double qb = a.dot(delta);
  const double qc = a.squaredNorm() - r * r;
  const double disc = std::max(0.0, qb * qb - qa * qc);
  return std::clamp((-qb + std::sqrt(disc)) / qa, 0.0, 1.0);
}

// First parameter in [0,1] at which the segment a -> b leaves `dom`, or -1.
double first_exit(const Vec& a, const Vec& b, const Domain& dom) {
  switch (dom.kind) {
    case Domain::Kind::full:
      return -1.0;
    case Domain::Kind::ball:
      return first_exit_sphere(a, b, dom.radius);
    case Domain::Kind::annulus: {
      const double s_out = first_exit_sphere(a, b, static_cast<double>(dom.k));
      const double s_in = first_entry(a, b, 1.0 / dom.k);
      if (s_out < 0.0) return s_in;
      if (s_in < 0.0) return s_out;
      return std::min(s_in, s_out);
    }
  }
  return -1.0;
}

double drift_scale(const Vec& x, const StepPolicy& policy) {
  return policy.theta * std::max(x.norm(), std::sqrt(policy.dt_min));
}

double allowed_step(double drift_norm, const Vec& x, double dt, const StepPolicy& policy) {
  if (policy.kind == StepPolicy::Kind::fixed || drift_norm == 0.0) return dt;
  const double h = drift_scale(x, policy) / drift_norm;
  return std::min(dt, std::max(policy.dt_min, h));
}

// Drift displacement b h under the policy (taming and clipping).
Vec drift_displacement(const Vec& b, double bnorm, const Vec& x, double h, const StepPolicy& policy) {
  Vec disp = b * h;
  if (policy.tamed) disp /= (1.0 + h * bnorm);
  if (policy.kind == StepPolicy::Kind::adaptive) {
    const double cap = drift_scale(x, policy);
    const double len = disp.norm();
    if (len > cap) disp *= cap / len;
  }
  return disp;
}

// Coefficient access with the constant-dispersion fast path cached.
class Coefficients {
 public:
  explicit Coefficients(const SdeCoefficients& c) : c_(c), d_(c.dim()) {
    if (c.constant_dispersion()) {
      constant_ = true;
      s_ = c.dispersion(Vec::Zero(d_));
      identity_ = (s_ == Mat::Identity(d_, d_));
    }
  }

  Vec drift(const Vec& x) const { return c_.drift(x); }

  // dispersion(x) * z
  Vec apply_dispersion(const Vec& x, const Vec& z) const {
    if (identity_) return z;
    if (constant_) return s_ * z;
    return c_.dispersion(x) * z;
  }

  Mat dispersion(const Vec& x) const { return constant_ ? s_ : c_.dispersion(x); }

 private:
  const SdeCoefficients& c_;
  int d_;
  bool constant_ = false;
  bool identity_ = false;
  Mat s_;
};

void fnv_bytes(std::uint64_t& h, const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
}

void fnv_vec(std::uint64_t& h, const Vec& v) { fnv_bytes(h, v.data(), sizeof(double) * v.size()); }

}  // namespace

// ---------------------------------------------------------------------------
// Stepping

double step_size(const SdeCoefficients& c, const Vec& x, double dt, const StepPolicy& policy) {
  return allowed_step(c.drift(x).norm(), x, dt, policy);
}

EmStep em_step(const SdeCoefficients& c, const Vec& x, double dt, const Vec& dw, const StepPolicy& policy) {
  const Vec b = c.drift(x);
  const double bnorm = b.norm();
  EmStep out;
  out.dt_used = allowed_step(bnorm, x, dt, policy);
  out.x = x + c.dispersion(x) * dw + drift_displacement(b, bnorm, x, out.dt_used, policy);
  return out;
}

PathSample simulate_path(const SdeCoefficients& c, const Vec& x0, const SimConfig& cfg, std::uint64_t seed,
                         std::uint64_t stream_id) {
  cfg.validate();
  const int d = c.dim();
  if (x0.size() != d) throw std::invalid_argument("simulate_path: x0 dimension mismatch");
  const Coefficients coeff(c);
  PhiloxStream rng(seed, stream_id);

  PathSample p;
  p.stream_id = stream_id;
  p.times.push_back(0.0);
  p.states.push_back(x0);
  p.first_hits.assign(cfg.hit_radii.size(), std::numeric_limits<double>::infinity());
  for (std::size_t j = 0; j < cfg.hit_radii.size(); ++j)
    if (x0.norm() <= cfg.hit_radii[j]) p.first_hits[j] = 0.0;

  const auto& snaps = cfg.snapshot_times;
  std::size_t next_snap = 0;
  while (next_snap < snaps.size() && snaps[next_snap] <= 0.0) {
    p.snapshots.push_back(x0);
    ++next_snap;
  }

  auto finish = [&](TerminalEvent e, double t, const Vec& x) {
    p.event = e;
    p.event_time = t;
    p.event_state = x;
    if (p.times.back() != t || p.states.size() == 1) {
      p.times.push_back(t);
      p.states.push_back(x);
    } else {
      p.states.back() = x;
    }
  };

  if (!cfg.domain.contains(x0)) {
    p.event = TerminalEvent::exited_domain;
    p.event_time = 0.0;
    p.event_state = x0;
    return p;
  }

  Vec x = x0;
  double t = 0.0;
  const double horizon = cfg.horizon;
  while (t < horizon) {
    const double stop = next_snap < snaps.size() ? snaps[next_snap] : horizon;
    const double cap = std::min(cfg.dt, stop - t);
    const Vec b = coeff.drift(x);
    const double bnorm = b.norm();
    const double h = allowed_step(bnorm, x, cap, cfg.policy);
    const Vec z = rng.normal_vec(d);
    const Vec x_new = x + coeff.apply_dispersion(x, std::sqrt(h) * z) + drift_displacement(b, bnorm, x, h, cfg.policy);
    const double t_new = (h == stop - t) ? stop : t + h;
    ++p.steps;

    for (std::size_t j = 0; j < cfg.hit_radii.size(); ++j) {
      if (std::isfinite(p.first_hits[j])) continue;
      const double s = first_entry(x, x_new, cfg.hit_radii[j]);
      if (s >= 0.0) p.first_hits[j] = t + s * (t_new - t);
    }

    const double s_exit = first_exit(x, x_new, cfg.domain);
    if (s_exit >= 0.0) {
      const Vec xe = x + s_exit * (x_new - x);
      finish(TerminalEvent::exited_domain, t + s_exit * (t_new - t), xe);
      return p;
    }
    if (!x_new.allFinite() || x_new.norm() > cfg.r_max) {
      finish(TerminalEvent::exceeded_rmax, t_new, x_new);
      return p;
    }

    x = x_new;
    t = t_new;
    if (next_snap < snaps.size() && t == snaps[next_snap]) {
      p.snapshots.push_back(x);
      ++next_snap;
    }
    if (cfg.record_stride > 0 && p.steps % static_cast<std::uint64_t>(cfg.record_stride) == 0) {
      p.times.push_back(t);
      p.states.push_back(x);
    }
  }
  finish(TerminalEvent::ran_to_horizon, horizon, x);
  return p;
}

// ---------------------------------------------------------------------------
// Batches

std::uint64_t path_digest(const PathSample& p, std::uint64_t h) {
  const std::uint64_t n = p.times.size();
  fnv_bytes(h, &n, sizeof n);
  fnv_bytes(h, p.times.data(), sizeof(double) * p.times.size());
  for (const auto& s : p.states) fnv_vec(h, s);
  const int e = static_cast<int>(p.event);
  fnv_bytes(h, &e, sizeof e);
  fnv_bytes(h, &p.event_time, sizeof p.event_time);
  fnv_vec(h, p.event_state);
  fnv_bytes(h, &p.stream_id, sizeof p.stream_id);
  fnv_bytes(h, &p.steps, sizeof p.steps);
  for (const auto& s : p.snapshots) fnv_vec(h, s);
  fnv_bytes(h, p.first_hits.data(), sizeof(double) * p.first_hits.size());
  return h;
}

PathBatch simulate_batch(const SdeCoefficients& c, const Vec& x0, std::size_t n, const SimConfig& cfg,
                         std::uint64_t master_seed, unsigned workers) {
  if (n < 1) throw std::invalid_argument("simulate_batch: N must be >= 1");
  cfg.validate();
  PathBatch batch;
  batch.config = cfg;
  batch.coefficients = c.describe();
  batch.x0 = x0;
  batch.master_seed = master_seed;
  batch.paths.resize(n);
  if (c.is_singular(x0)) {
    const auto alpha = c.field().weight().power_exponent();
    batch.origin_start_heuristic = !alpha || (c.dim() + *alpha < 2.0);
  }

  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, n));
  constexpr std::size_t chunk = 64;
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (;;) {
      const std::size_t begin = next.fetch_add(chunk);
      if (begin >= n) return;
      const std::size_t end = std::min(n, begin + chunk);
      for (std::size_t i = begin; i < end; ++i) batch.paths[i] = simulate_path(c, x0, cfg, master_seed, i);
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }

  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& p : batch.paths) {
    ++batch.counts[static_cast<int>(p.event)];
    const std::uint64_t ph = path_digest(p);
    fnv_bytes(h, &ph, sizeof ph);
  }
  batch.digest = h;
  return batch;
}

PathSample kill_at_exit(const PathSample& p, const Domain& domain) {
  if (domain.kind == Domain::Kind::full || p.states.empty()) return p;
  if (!domain.contains(p.states.front())) {
    PathSample out = p;
    out.times.resize(1);
    out.states.resize(1);
    out.event = TerminalEvent::exited_domain;
    out.event_time = out.times[0];
    out.event_state = out.states[0];
    out.snapshots.clear();
    for (auto& h : out.first_hits)
      if (h > out.event_time) h = std::numeric_limits<double>::infinity();
    return out;
  }
  for (std::size_t i = 1; i < p.states.size(); ++i) {
    const double s = first_exit(p.states[i - 1], p.states[i], domain);
    if (s < 0.0) continue;
    // Already truncated at this crossing: nothing to do.
    if (i + 1 == p.states.size() && p.event == TerminalEvent::exited_domain && !domain.contains(p.states[i]))
      return p;
    PathSample out = p;
    const double te = p.times[i - 1] + s * (p.times[i] - p.times[i - 1]);
    const Vec xe = p.states[i - 1] + s * (p.states[i] - p.states[i - 1]);
    out.times.resize(i + 1);
    out.states.resize(i + 1);
    out.times[i] = te;
    out.states[i] = xe;
    out.event = TerminalEvent::exited_domain;
    out.event_time = te;
    out.event_state = xe;
    for (auto& h : out.first_hits)
      if (h > te) h = std::numeric_limits<double>::infinity();
    return out;
  }
  return p;
}

HittingStats hitting_stats(const PathBatch& b, double radius, double confidence) {
  if (!(radius > 0.0)) throw std::invalid_argument("hitting_stats: radius must be positive");
  const auto& radii = b.config.hit_radii;
  std::size_t j = radii.size();
  for (std::size_t k = 0; k < radii.size(); ++k)
    if (std::abs(radii[k] - radius) <= 1e-12 * radius) j = k;
  if (j == radii.size()) throw std::invalid_argument("hitting_stats: radius was not tracked during simulation");
  HittingStats s;
  s.radius = radius;
  s.n = b.paths.size();
  s.confidence = confidence;
  std::vector<double> times;
  for (const auto& p : b.paths) {
    if (std::isfinite(p.first_hits[j])) times.push_back(p.first_hits[j]);
  }
  s.hits = times.size();
  s.fraction = s.n ? static_cast<double>(s.hits) / static_cast<double>(s.n) : 0.0;
  s.ci = stats::wilson_interval(s.hits, s.n, confidence);
  s.quantile_levels = {0.1, 0.25, 0.5, 0.75, 0.9};
  for (double q : s.quantile_levels)
    s.time_quantiles.push_back(times.empty() ? std::numeric_limits<double>::quiet_NaN() : stats::quantile(times, q));
  return s;
}

QuadraticVariation quadratic_variation(const SdeCoefficients& c, const Vec& x0, const SimConfig& cfg,
                                       std::uint64_t seed, std::uint64_t stream_id) {
  cfg.validate();
  const int d = c.dim();
  const Coefficients coeff(c);
  PhiloxStream rng(seed, stream_id);
  QuadraticVariation qv;
  qv.realized = Mat::Zero(d, d);
  qv.expected = Mat::Zero(d, d);
  Vec x = x0;
  double t = 0.0;
  while (t < cfg.horizon) {
    const double cap = std::min(cfg.dt, cfg.horizon - t);
    const Vec b = coeff.drift(x);
    const double bnorm = b.norm();
    const double h = allowed_step(bnorm, x, cap, cfg.policy);
    const Mat s = coeff.dispersion(x);
    const Vec x_new = x + s * (std::sqrt(h) * rng.normal_vec(d)) + drift_displacement(b, bnorm, x, h, cfg.policy);
    const Vec m = x_new - x - b * h;
    qv.realized += m * m.transpose();
    qv.expected += (s * s.transpose()) * h;
    ++qv.steps;
    if (!cfg.domain.contains(x_new) || x_new.norm() > cfg.r_max) break;
    x = x_new;
    t = (h == cfg.horizon - t) ? cfg.horizon : t + h;
  }
  qv.max_abs_diff = (qv.realized - qv.expected).cwiseAbs().maxCoeff();
  qv.scale = qv.expected.cwiseAbs().maxCoeff();
  return qv;
}

}  // namespace wdiff
