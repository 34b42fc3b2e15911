#pragma once

#include <cstdint>
#include <vector>

#include "wdiff/types.hpp"

/// Exact reference quantities for the isotropic field A = |x|^alpha I,
/// rho = |x|^alpha, whose SDE is dX = dW + (alpha/2) X/|X|^2 dt and whose
/// squared radius is a squared Bessel process of dimension delta = d + alpha.
namespace wdiff::oracle {

struct BesselOracle {
  int d = 3;
  double alpha = 0.0;
  double delta = 3.0;

  /// Throws std::invalid_argument when alpha <= -d.
  static BesselOracle make(int d, double alpha);
};

double bessel_dimension(int d, double alpha);

/// E|X_t|^2 = |x0|^2 + delta t.
double besq_mean(const Vec& x0, double t, const BesselOracle& o);
double besq_mean(double r0, double t, double delta);

/// true iff delta < 2.
bool hits_origin(double delta);

/// Behaviour at 0 when delta < 2 (for delta >= 2 the origin is never reached
/// and both conventions coincide).
enum class Boundary { reflecting, absorbing };

/// Density of |X_t| at r > 0 given |X_0| = r0. Reflecting: the noncentral
/// chi-square law of |X_t|^2 / t. Absorbing: the killed density
/// (y/x)^nu p^{4-delta}(x, y), nu = delta/2 - 1, which integrates to the
/// survival probability. Throws std::range_error on underflow of every term
/// when the arguments are extreme.
double besq_radial_density(double r, double t, double r0, double delta, Boundary b = Boundary::reflecting);

/// P(|X_t| <= r). Under absorption this includes the mass stuck at 0.
double besq_radial_cdf(double r, double t, double r0, double delta, Boundary b = Boundary::reflecting);

/// Probability that the process started at r0 has been absorbed at 0 by t
/// (0 when delta >= 2).
double absorbed_mass(double t, double r0, double delta);

/// Probability of ever entering B_eps(0) from radius r0 > eps: (eps/r0)^{delta-2}
/// for delta > 2, and 1 for delta <= 2.
double ever_hit_probability(double delta, double r0, double eps);

/// For delta = 1 (|X| is reflected Brownian motion): P(min_{s<=T} |X_s| <= eps)
/// = 2 Phi(-(r0 - eps)/sqrt(T)).
double hit_probability_delta_one(double r0, double eps, double horizon);

/// P(min_{s<=T} |X_s| <= eps) from radius r0 > eps for any delta > 0, by
/// Gaver-Stehfest inversion of the Laplace transform
/// E exp(-l T_eps) = r0^{-nu} K_nu(r0 sqrt(2 l)) / (eps^{-nu} K_nu(eps sqrt(2 l))),
/// nu = delta/2 - 1. About five significant digits.
double hit_probability_by(double delta, double r0, double eps, double horizon);

struct RadialSimOptions {
  double r_floor = 1e-6;
  Boundary boundary = Boundary::reflecting;
  double hit_radius = 0.0;  ///< 0 disables hit tracking
  double theta = 0.1;       ///< drift displacement cap, as in the d-dimensional simulator
  double dt_min = 1e-8;
  unsigned workers = 1;
};

struct RadialSample {
  std::vector<double> radius;     ///< |X_t| per path (0 when absorbed)
  std::vector<double> first_hit;  ///< first time R <= hit_radius, +inf if never
  std::vector<std::uint8_t> touched_floor;
  std::size_t n_touched = 0;
  std::size_t n_absorbed = 0;
};

/// Euler scheme for dR = dW + (delta-1)/(2R) dt with reflection (or
/// absorption) at r_floor. Path i uses Philox stream (seed, i).
RadialSample radial_reference_sim(double delta, double r0, double t, std::size_t n, double dt, std::uint64_t seed,
                                  const RadialSimOptions& opts = {});

}  // namespace wdiff::oracle
