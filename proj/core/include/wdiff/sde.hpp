#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "wdiff/forms.hpp"
#include "wdiff/stats.hpp"
#include "wdiff/types.hpp"

namespace wdiff {

/// Time-step control for Euler-Maruyama.
///
/// The adaptive policy shrinks the step so that the drift displacement stays
/// below theta * max(|x|, sqrt(dt_min)); when the floor dt_min binds, the
/// displacement itself is clipped to that bound.
struct StepPolicy {
  enum class Kind { fixed, adaptive };
  Kind kind = Kind::adaptive;
  double theta = 0.1;
  double dt_min = 1e-8;
  bool tamed = false;  ///< replace b dt by b dt / (1 + dt |b|)

  static StepPolicy fixed(bool tamed = false);
  static StepPolicy adaptive(double theta = 0.1, double dt_min = 1e-8, bool tamed = false);
  std::string describe() const;
};

/// Open simulation domain: all of R^d, the annulus {1/k < |x| < k}, or the
/// ball {|x| < radius}.
struct Domain {
  enum class Kind { full, annulus, ball };
  Kind kind = Kind::full;
  int k = 1;
  double radius = 1.0;

  static Domain full();
  static Domain annulus(int k);
  static Domain ball(double radius);

  bool contains(const Vec& x) const;
  std::string describe() const;
};

struct SimConfig {
  double horizon = 1.0;
  double dt = 1e-3;
  StepPolicy policy;
  Domain domain;
  double r_max = 1e6;
  /// Keep every `record_stride`-th state in PathSample::states; 0 keeps only
  /// the initial and terminal states.
  int record_stride = 0;
  /// Times at which the state is captured exactly (steps land on them).
  std::vector<double> snapshot_times;
  /// Radii of origin-centred balls whose first entry times are tracked.
  std::vector<double> hit_radii;

  /// Throws std::invalid_argument when the configuration is inconsistent.
  void validate() const;
};

enum class TerminalEvent { ran_to_horizon = 0, exited_domain = 1, exceeded_rmax = 2 };
std::string to_string(TerminalEvent e);

struct PathSample {
  std::vector<double> times;
  std::vector<Vec> states;
  TerminalEvent event = TerminalEvent::ran_to_horizon;
  double event_time = 0.0;  ///< horizon, exit time, or explosion time
  Vec event_state;
  std::uint64_t stream_id = 0;
  std::uint64_t steps = 0;
  /// snapshots[j] is the state at SimConfig::snapshot_times[j]; shorter than
  /// the snapshot list when the path terminated first.
  std::vector<Vec> snapshots;
  /// First entry time into B_{hit_radii[j]}(0); +inf when never entered.
  std::vector<double> first_hits;

  const Vec& terminal_state() const { return states.back(); }
};

struct EmStep {
  Vec x;
  double dt_used = 0.0;
};

/// Step size the policy allows at x (<= dt).
double step_size(const SdeCoefficients& c, const Vec& x, double dt, const StepPolicy& policy);

/// One Euler-Maruyama step x' = x + dispersion(x) dW + drift(x) dt_used, with
/// dt_used = step_size(c, x, dt, policy). dW must already be drawn with
/// variance dt_used; the simulation loop does this by asking for the step size
/// first.
EmStep em_step(const SdeCoefficients& c, const Vec& x, double dt, const Vec& dw, const StepPolicy& policy);

/// Simulate a single path with Philox stream (seed, stream_id).
PathSample simulate_path(const SdeCoefficients& c, const Vec& x0, const SimConfig& cfg, std::uint64_t seed,
                         std::uint64_t stream_id);

struct PathBatch {
  SimConfig config;
  std::string coefficients;
  Vec x0;
  std::uint64_t master_seed = 0;
  std::vector<PathSample> paths;
  std::array<std::size_t, 3> counts{};  ///< indexed by TerminalEvent
  /// FNV-1a over every path's recorded content, in path order.
  std::uint64_t digest = 0;
  /// The start is singular and the radial dimension is below 2, where the
  /// zero-drift first step has no consistency guarantee.
  bool origin_start_heuristic = false;

  std::size_t size() const { return paths.size(); }
};

/// N paths, path i on stream (master_seed, i). `workers` = 0 picks the
/// hardware concurrency; results do not depend on it.
PathBatch simulate_batch(const SdeCoefficients& c, const Vec& x0, std::size_t n, const SimConfig& cfg,
                         std::uint64_t master_seed, unsigned workers = 0);

/// FNV-1a digest of one path (times, states, event, snapshots, hits).
std::uint64_t path_digest(const PathSample& p, std::uint64_t h = 0xcbf29ce484222325ULL);

/// Truncate the path at its first exit from `domain`, interpolating the
/// crossing between recorded states. Hit times after the exit are reset;
/// snapshots are left as they are. Idempotent.
PathSample kill_at_exit(const PathSample& p, const Domain& domain);

struct HittingStats {
  double radius = 0.0;
  std::size_t n = 0;
  std::size_t hits = 0;
  double fraction = 0.0;
  Interval ci;
  double confidence = 0.99;
  std::vector<double> quantile_levels;
  std::vector<double> time_quantiles;  ///< of first-hit times among hitting paths
};

/// Hit statistics for B_radius(0); the radius must be among the batch's
/// SimConfig::hit_radii.
HittingStats hitting_stats(const PathBatch& b, double radius, double confidence = 0.99);

struct QuadraticVariation {
  Mat realized;  ///< sum (dX - b dt)(dX - b dt)^T
  Mat expected;  ///< sum (A / rho)(X) dt
  double max_abs_diff = 0.0;
  double scale = 0.0;
  std::uint64_t steps = 0;
};

/// Realized covariation of the martingale part along one path versus the
/// integrated A / rho.
QuadraticVariation quadratic_variation(const SdeCoefficients& c, const Vec& x0, const SimConfig& cfg,
                                       std::uint64_t seed, std::uint64_t stream_id);

}  // namespace wdiff
