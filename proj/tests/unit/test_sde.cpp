#include <doctest.h>

#include <cmath>
#include <vector>

#include "wdiff/oracle.hpp"
#include "wdiff/sde.hpp"
#include "wdiff/stats.hpp"

using namespace wdiff;

namespace {

Vec vec(std::initializer_list<double> xs) {
  Vec v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

SdeCoefficients iso(int d, double a) { return SdeCoefficients(DiffusionField::isotropic_power(d, a)); }

SimConfig config(double horizon, double dt) {
  SimConfig c;
  c.horizon = horizon;
  c.dt = dt;
  return c;
}

}  // namespace

TEST_CASE("euler step examples") {
  const auto bm = iso(3, 0.0);
  const Vec dw = vec({0.1, -0.2, 0.05});
  const EmStep s = em_step(bm, vec({1, 2, 3}), 0.01, dw, StepPolicy::fixed());
  CHECK((s.x - vec({1.1, 1.8, 3.05})).norm() < 1e-15);
  CHECK(s.dt_used == 0.01);

  const auto c = iso(3, 1.0);
  const EmStep e = em_step(c, vec({1, 0, 0}), 0.01, Vec::Zero(3), StepPolicy::adaptive());
  CHECK(e.dt_used == doctest::Approx(0.01));
  CHECK((e.x - vec({1.005, 0, 0})).norm() < 1e-14);
}

TEST_CASE("adaptive step near the singularity") {
  const auto c = iso(3, 1.0);
  const auto policy = StepPolicy::adaptive(0.1, 1e-8);
  const Vec x = vec({1e-4, 0, 0});
  // |b| = alpha / (2 |x|), so theta |x| / |b| = 2e-9, below the floor.
  const double bound = 0.1 * x.norm() / (1.0 / (2 * x.norm()));
  CHECK(bound == doctest::Approx(2e-9));
  const double h = step_size(c, x, 0.01, policy);
  CHECK(h == doctest::Approx(1e-8));
  const EmStep s = em_step(c, x, 0.01, Vec::Zero(3), policy);
  // With the floor binding the drift displacement is clipped to theta max(|x|, sqrt(dt_min)).
  CHECK((s.x - x).norm() <= 0.1 * std::max(x.norm(), 1e-4) * (1 + 1e-12));
  // Away from the singularity the base step is used.
  CHECK(step_size(c, vec({1, 0, 0}), 0.01, policy) == doctest::Approx(0.01));
}

TEST_CASE("configuration validation") {
  SimConfig c = config(1.0, 1e-3);
  CHECK_NOTHROW(c.validate());
  c.policy.theta = 1.5;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = config(1.0, 2.0);
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = config(1.0, 1e-3);
  c.snapshot_times = {0.5, 0.25};
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  CHECK(Domain::annulus(2).contains(vec({1, 0, 0})));
  CHECK_FALSE(Domain::annulus(2).contains(vec({0.4, 0, 0})));
  CHECK_FALSE(Domain::annulus(2).contains(vec({2.5, 0, 0})));
}

TEST_CASE("path invariants") {
  const auto c = iso(3, 0.0);
  SimConfig cfg = config(1.0, 1e-2);
  cfg.record_stride = 1;
  const PathSample p = simulate_path(c, vec({1, 0, 0}), cfg, 5, 0);
  CHECK(p.times.front() == 0.0);
  CHECK(p.states.front() == vec({1, 0, 0}));
  CHECK(p.event == TerminalEvent::ran_to_horizon);
  CHECK(p.times.back() == doctest::Approx(1.0));
  for (std::size_t i = 1; i < p.times.size(); ++i) CHECK(p.times[i] > p.times[i - 1]);
  CHECK(p.times.size() == p.states.size());
}

TEST_CASE("start outside the annulus exits immediately") {
  const auto c = iso(3, 1.0);
  SimConfig cfg = config(1.0, 1e-3);
  cfg.domain = Domain::annulus(2);
  const PathSample p = simulate_path(c, vec({0.4, 0, 0}), cfg, 1, 0);
  CHECK(p.event == TerminalEvent::exited_domain);
  CHECK(p.event_time == 0.0);
  CHECK(p.states.size() == 1);
}

TEST_CASE("brownian paths run to the horizon") {
  const auto c = iso(3, 0.0);
  SimConfig cfg = config(1.0, 1e-2);
  cfg.r_max = 1e6;
  const PathBatch b = simulate_batch(c, vec({1, 0, 0}), 500, cfg, 3, 1);
  CHECK(b.counts[0] == 500);
  CHECK(b.counts[1] + b.counts[2] == 0);
}

TEST_CASE("start at the origin with dimension four leaves and never returns") {
  const auto c = iso(3, 1.0);
  SimConfig cfg = config(1.0, 1e-3);
  cfg.record_stride = 1;
  const PathBatch b = simulate_batch(c, Vec::Zero(3), 200, cfg, 11, 1);
  CHECK_FALSE(b.origin_start_heuristic);
  CHECK_FALSE(oracle::hits_origin(4.0));
  std::size_t returned = 0;
  for (const auto& p : b.paths) {
    CHECK(p.states.size() > 2);
    CHECK(p.states[1].norm() > 0.0);
    for (std::size_t k = 0; k < p.states.size(); ++k)
      if (p.times[k] >= 0.05 && p.states[k].norm() < 1e-3) ++returned;
  }
  CHECK(returned == 0);
  // Dimension below two from the origin is flagged.
  const PathBatch h = simulate_batch(iso(2, -1.0), Vec::Zero(2), 2, config(0.1, 1e-2), 1, 1);
  CHECK(h.origin_start_heuristic);
}

TEST_CASE("batches are deterministic across worker counts") {
  const auto c = iso(3, 1.0);
  SimConfig cfg = config(0.5, 1e-2);
  cfg.snapshot_times = {0.25};
  cfg.hit_radii = {0.5};
  const PathBatch one = simulate_batch(c, vec({1, 0, 0}), 300, cfg, 77, 1);
  const PathBatch many = simulate_batch(c, vec({1, 0, 0}), 300, cfg, 77, 8);
  CHECK(one.digest == many.digest);
  CHECK(one.counts == many.counts);
  for (std::size_t i = 0; i < one.size(); ++i) CHECK(one.paths[i].terminal_state() == many.paths[i].terminal_state());
  const PathBatch other = simulate_batch(c, vec({1, 0, 0}), 300, cfg, 78, 1);
  CHECK(other.digest != one.digest);

  const PathBatch single = simulate_batch(c, vec({1, 0, 0}), 1, cfg, 77, 1);
  const PathSample direct = simulate_path(c, vec({1, 0, 0}), cfg, 77, 0);
  CHECK(path_digest(single.paths[0]) == path_digest(direct));
  CHECK(single.paths[0].terminal_state() == direct.terminal_state());
}

TEST_CASE("counts sum to the batch size") {
  SimConfig cfg = config(1.0, 1e-2);
  cfg.domain = Domain::ball(1.5);
  const PathBatch b = simulate_batch(iso(3, 0.0), vec({1, 0, 0}), 400, cfg, 5, 1);
  CHECK(b.counts[0] + b.counts[1] + b.counts[2] == 400);
  CHECK(b.counts[1] > 0);
  for (const auto& p : b.paths)
    if (p.event == TerminalEvent::exited_domain) CHECK(p.event_state.norm() == doctest::Approx(1.5).epsilon(1e-9));
  SimConfig full = config(1.0, 1e-2);
  const PathBatch f = simulate_batch(iso(3, 0.0), vec({1, 0, 0}), 400, full, 5, 1);
  CHECK(f.counts[1] == 0);
}

TEST_CASE("brownian second moment") {
  SimConfig cfg = config(1.0, 1e-2);
  cfg.policy = StepPolicy::fixed();
  const PathBatch b = simulate_batch(iso(3, 0.0), vec({1, 0, 0}), 20000, cfg, 9, 1);
  std::vector<double> sq;
  for (const auto& p : b.paths) sq.push_back(p.terminal_state().squaredNorm());
  const auto m = stats::mean_se(sq);
  CHECK(std::abs(m.mean - 4.0) <= 3 * m.se);
}

TEST_CASE("isotropic moment identity at small sample size") {
  struct Case {
    int d;
    double a;
  };
  for (Case k : {Case{3, 1.0}, Case{2, 0.5}, Case{3, -1.0}}) {
    CAPTURE(k.d);
    CAPTURE(k.a);
    SimConfig cfg = config(1.0, 1e-2);
    const PathBatch b = simulate_batch(iso(k.d, k.a), unit(k.d, 0), 4000, cfg, 21, 1);
    std::vector<double> sq;
    for (const auto& p : b.paths) sq.push_back(p.terminal_state().squaredNorm());
    const auto m = stats::mean_se(sq);
    CHECK(std::abs(m.mean - 1.0 - (k.d + k.a)) <= 3 * m.se);
  }
}

TEST_CASE("kill_at_exit") {
  PathSample p;
  p.times = {0.0, 1.0, 2.0};
  p.states = {vec({1, 0, 0}), vec({1.5, 0, 0}), vec({3, 0, 0})};
  p.event = TerminalEvent::ran_to_horizon;
  p.event_time = 2.0;
  p.event_state = p.states.back();
  p.first_hits = {std::numeric_limits<double>::infinity()};

  const PathSample inside = kill_at_exit(p, Domain::ball(10.0));
  CHECK(inside.times == p.times);
  CHECK(inside.states == p.states);
  CHECK(inside.event == TerminalEvent::ran_to_horizon);

  const PathSample cut = kill_at_exit(p, Domain::annulus(2));
  CHECK(cut.event == TerminalEvent::exited_domain);
  CHECK(cut.event_time == doctest::Approx(4.0 / 3.0));
  CHECK(cut.event_state.norm() == doctest::Approx(2.0));
  CHECK(cut.times.back() <= cut.event_time);

  const PathSample twice = kill_at_exit(cut, Domain::annulus(2));
  CHECK(twice.times == cut.times);
  CHECK(twice.states == cut.states);
  CHECK(twice.event_time == cut.event_time);
}

TEST_CASE("paths killed on an annulus agree with full-space paths before the exit") {
  const auto c = iso(3, 1.0);
  SimConfig full = config(2.0, 1e-2);
  full.record_stride = 1;
  SimConfig ann = full;
  ann.domain = Domain::annulus(2);
  std::size_t exited = 0;
  for (std::uint64_t i = 0; i < 50; ++i) {
    const PathSample a = simulate_path(c, vec({1, 0, 0}), full, 4, i);
    const PathSample b = simulate_path(c, vec({1, 0, 0}), ann, 4, i);
    // A killed path ends with its interpolated exit point; everything before it is shared.
    const bool out = b.event == TerminalEvent::exited_domain;
    const std::size_t n = out ? b.states.size() - 1 : b.states.size();
    REQUIRE(n <= a.states.size());
    if (out) CHECK(b.states.back() == b.event_state);
    for (std::size_t k = 0; k < n; ++k) {
      CHECK(a.times[k] == b.times[k]);
      CHECK(a.states[k] == b.states[k]);
    }
    if (b.event == TerminalEvent::exited_domain) {
      ++exited;
      const PathSample killed = kill_at_exit(a, Domain::annulus(2));
      CHECK(killed.event == TerminalEvent::exited_domain);
      CHECK(killed.event_time == doctest::Approx(b.event_time).epsilon(1e-9));
    }
  }
  CHECK(exited > 0);
}

TEST_CASE("hitting statistics") {
  SimConfig cfg = config(1.0, 1e-2);
  cfg.hit_radii = {2.0, 0.5};
  const PathBatch b = simulate_batch(iso(3, 0.0), vec({1, 0, 0}), 300, cfg, 2, 1);
  const HittingStats all = hitting_stats(b, 2.0);
  CHECK(all.fraction == 1.0);
  CHECK(all.hits == 300);
  for (double q : all.time_quantiles) CHECK(q == 0.0);
  const HittingStats some = hitting_stats(b, 0.5);
  CHECK(some.fraction > 0.0);
  CHECK(some.fraction < 1.0);
  CHECK(some.ci.contains(some.fraction));
  CHECK_THROWS_AS(hitting_stats(b, 0.3), std::invalid_argument);
}

TEST_CASE("small-ball hits in dimension one agree with the radial reference") {
  const double eps = 1e-3, horizon = 2.0;
  SimConfig cfg = config(horizon, 1e-3);
  cfg.hit_radii = {eps};
  const std::size_t n = 2000;
  const PathBatch b = simulate_batch(iso(2, -1.0), vec({1, 0}), n, cfg, 31, 1);
  const HittingStats h = hitting_stats(b, eps);
  oracle::RadialSimOptions ro;
  ro.hit_radius = eps;
  const auto r = oracle::radial_reference_sim(1.0, 1.0, horizon, n, 1e-3, 32, ro);
  std::size_t rh = 0;
  for (double t : r.first_hit) rh += std::isfinite(t);
  const double p1 = h.fraction, p2 = double(rh) / n;
  const double pooled = 0.5 * (p1 + p2);
  const double z = (p1 - p2) / std::sqrt(2 * pooled * (1 - pooled) / n);
  CHECK(std::abs(z) < 3.0);
  // Both sit near the closed-form reflected Brownian value.
  const double exact = oracle::hit_probability_delta_one(1.0, eps, horizon);
  CHECK(std::abs(p2 - exact) < 4 * std::sqrt(exact * (1 - exact) / n));
}

TEST_CASE("small-ball hits above dimension two stay below the ever-hit probability") {
  const double eps = 1e-2;
  SimConfig cfg = config(2.0, 1e-3);
  cfg.hit_radii = {eps};
  const PathBatch b = simulate_batch(iso(2, 0.5), vec({1, 0}), 2000, cfg, 41, 1);
  const HittingStats h = hitting_stats(b, eps);
  // P(ever enter B_eps) = eps^{delta - 2}; a finite horizon can only lower it.
  CHECK(h.ci.lo <= oracle::ever_hit_probability(2.5, 1.0, eps));
}

TEST_CASE("quadratic variation matches integrated A / rho") {
  SimConfig cfg = config(1.0, 1e-4);
  for (const auto& f : {DiffusionField::isotropic_power(3, 1.0), DiffusionField::power_radial_anisotropic(3, 1.0, 0.5)}) {
    CAPTURE(f.name());
    const SdeCoefficients c(f);
    const QuadraticVariation qv = quadratic_variation(c, vec({1, 0.5, 0}), cfg, 3, 0);
    CHECK(qv.steps > 0);
    CHECK(qv.max_abs_diff < 0.05 * qv.scale);
  }
}
