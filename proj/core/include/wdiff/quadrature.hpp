#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "wdiff/types.hpp"

/// Numerical integration over balls, annuli, and boxes in R^d.
///
/// Ball and annulus rules integrate along rays emanating from a "pole" (the
/// point where the integrand may be singular, the origin for every weight in
/// this library). Along each ray the integral near the pole is summed over
/// geometric shells [L 2^{-k-1}, L 2^{-k}]; the shell ratio detects
/// non-integrable power singularities and extrapolates the tail of
/// integrable ones. Box rules are jittered Monte Carlo or tensor Gauss.
namespace wdiff::quad {

struct Options {
  double rtol = 1e-6;
  double atol = 0.0;
  int max_level = 5;
  std::uint64_t seed = 0;
  std::size_t initial_samples = 4096;  ///< Monte Carlo rules only
};

struct Result {
  double value = 0.0;
  double error = 0.0;
  std::size_t evaluations = 0;
  bool converged = false;
  bool divergent = false;
  int level = 0;
};

/// Surface area of the unit sphere S^{d-1}.
double sphere_area(int d);
/// Lebesgue volume of a d-ball of radius r.
double ball_volume(int d, double r);

/// Directions with weights summing to the measure of the covered solid angle.
struct DirectionRule {
  std::vector<Vec> directions;
  std::vector<double> weights;
};

/// Rule on the full sphere with its polar axis along `axis`. Deterministic
/// product rules for d = 2, 3; antithetic Monte Carlo for d >= 4.
DirectionRule sphere_rule(int d, int level, const Vec& axis, std::uint64_t seed = 0);

/// Rule on the spherical cap of half-angle `half_angle` around `axis`
/// (d = 2 or 3). The polar variable is substituted so that integrands with a
/// square-root edge (chord lengths of a ball seen from outside) stay smooth.
DirectionRule cap_rule(int d, const Vec& axis, double half_angle, int level);

/// int_0^L g(s) ds for g possibly singular at 0, by geometric shells.
Result integrate_from_pole(const std::function<double(double)>& g, double length, double rtol);

/// int_a^b g(s) ds by adaptive Gauss-Kronrod.
Result integrate_segment(const std::function<double(double)>& g, double a, double b, double rtol);

/// int over `ball` of f dx, using rays from `pole`.
Result integrate_ball(const ScalarFn& f, const Ball& ball, const Options& opts, const Vec& pole);
Result integrate_ball(const ScalarFn& f, const Ball& ball, const Options& opts);

/// int over {r_in < |x| < r_out} of f dx (r_in may be 0).
Result integrate_annulus(const ScalarFn& f, int d, double r_in, double r_out, const Options& opts);

/// Integrand writing `out.size()` values at a point; lets several integrals
/// share one set of nodes.
using MultiFn = std::function<void(const Vec&, std::span<double>)>;

/// Jittered (one point per cell) Monte Carlo over a box with a two-level
/// test: the estimate at N samples must agree with the one at N/2 within rtol.
std::vector<Result> integrate_box_stratified(const MultiFn& f, std::size_t n_outputs, const Box& box,
                                             const Options& opts);
Result integrate_box_stratified(const ScalarFn& f, const Box& box, const Options& opts);

/// Tensor Gauss-Legendre panels, doubling the panel count per level, with a
/// Richardson-corrected final estimate.
std::vector<Result> integrate_box_gauss(const MultiFn& f, std::size_t n_outputs, const Box& box,
                                        const Options& opts);
Result integrate_box_gauss(const ScalarFn& f, const Box& box, const Options& opts);

/// Radial reduction for integrands that depend on |x - pole| only. `shell`
/// must return int_a^b g(s) s^{d-1} ds (and may throw DivergentIntegralError).
/// The ball integral is then a 1-D integral over the polar angle.
Result integrate_ball_radial(const std::function<double(double, double)>& shell, const Ball& ball,
                             const Vec& pole, double rtol);

/// int over `box` of f dx for f possibly singular at `pole`. A pole outside
/// the box uses the tensor Gauss rule; otherwise the box is cut into one
/// pyramid per face with apex at the pole, each integrated radially from the
/// apex and with Gauss panels across the face.
Result integrate_box_from_pole(const ScalarFn& f, const Box& box, const Options& opts, const Vec& pole);

}  // namespace wdiff::quad
