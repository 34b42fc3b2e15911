#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "wdiff/quadrature.hpp"
#include "wdiff/types.hpp"

namespace wdiff {

/// A positive density rho on R^d defining the measure m = rho dx.
///
/// Four kinds are supported:
///  - power: |x|^alpha with alpha > -d (local integrability)
///  - exponential: e^{phi(x)}
///  - product: multiplier(x) * base(x) with multiplier in [1/c, c]
///  - custom: any positive density
///
/// Every kind is singular at most at the origin, which is where ball
/// quadrature places its pole.
class Weight {
 public:
  enum class Kind { power, exponential, product, custom };

  static Weight power(int dim, double alpha);
  static Weight exponential(int dim, ScalarField phi);
  static Weight product(ScalarField multiplier, double bound, Weight base);
  static Weight custom(int dim, ScalarField density);

  Kind kind() const { return kind_; }
  int dim() const { return dim_; }

  /// rho(x). Throws SingularPointError at x = 0 for power weights with alpha < 0.
  double operator()(const Vec& x) const;
  double eval(const Vec& x) const { return (*this)(x); }

  /// Gradient of rho when available analytically.
  std::optional<Vec> gradient(const Vec& x) const;

  /// Exponent alpha when the weight is exactly |x|^alpha.
  std::optional<double> power_exponent() const;

  /// True when rho cannot be evaluated pointwise at x.
  bool is_singular_at(const Vec& x) const;

  std::string describe() const;

  // Component access for product / exponential kinds.
  const ScalarField* phi() const { return phi_ ? phi_.get() : nullptr; }
  const ScalarField* multiplier() const { return multiplier_ ? multiplier_.get() : nullptr; }
  const Weight* base() const { return base_.get(); }
  double multiplier_bound() const { return bound_; }

 private:
  Kind kind_ = Kind::power;
  int dim_ = 0;
  double alpha_ = 0.0;
  double bound_ = 1.0;
  std::shared_ptr<const ScalarField> phi_;         // exponential
  std::shared_ptr<const ScalarField> multiplier_;  // product
  std::shared_ptr<const Weight> base_;             // product
  std::shared_ptr<const ScalarField> density_;     // custom
};

/// Numeric evidence for one weight-class condition.
struct WeightClassReport {
  std::string condition;
  std::vector<std::string> regions;  ///< descriptors of sampled regions (worst first)
  double worst_ratio = 0.0;
  std::size_t n_samples = 0;
  double threshold = 0.0;
  bool pass = false;
  double rtol = 0.0;
  double quadrature_error = 0.0;
};

/// Quadrature settings shared by the weight checkers.
struct QuadratureConfig {
  double rtol = 1e-6;     ///< deterministic ball rules
  double mc_rtol = 2e-3;  ///< Monte Carlo box rules (two-level test)
  int max_level = 5;
  std::uint64_t seed = 0x5eed;
  std::size_t initial_samples = 1 << 12;

  quad::Options options() const;
  quad::Options mc_options() const;
};

/// m(B) = int_B rho dx.
quad::Result ball_mass(const Weight& w, const Ball& b, const QuadratureConfig& qc = {});

/// (avg_B rho) * (avg_B rho^{-1}); >= 1 by Jensen.
double a2_ratio(const Weight& w, const Ball& b, const QuadratureConfig& qc = {});

struct BallSampling {
  Box region;
  double r_min = 1e-3;
  double r_max = 10.0;
};

/// Sample `n_balls` balls with centers uniform in the region and radii
/// log-uniform in [r_min, r_max]; report the largest A2 ratio.
WeightClassReport check_a2(const Weight& w, const BallSampling& sampling, int n_balls, std::uint64_t seed,
                           double threshold = 1e3, const QuadratureConfig& qc = {});

/// m(B_{2r}(x)) / m(B_r(x)).
double doubling_ratio(const Weight& w, const Ball& b, const QuadratureConfig& qc = {});

/// Same sampling as check_a2 for the doubling ratio. A non-positive threshold
/// selects the default 2^{d + |alpha| + 1} (alpha = 0 for non-power weights).
WeightClassReport check_doubling(const Weight& w, const BallSampling& sampling, int n_balls,
                                 std::uint64_t seed, double threshold = 0.0,
                                 const QuadratureConfig& qc = {});

/// (1/|Q|) int_Q e^{|phi - phi_Q|} dx over a cube.
double bmo_exp_avg(const ScalarField& phi, const Box& cube, const QuadratureConfig& qc = {});

/// Test function for the Poincare ratio: value and gradient.
struct GradientField {
  ScalarFn value;
  VectorFn gradient;
};

/// [int_B |u - u_B|^2 dm] / [r^2 int_B |grad u|^2 dm].
double poincare_ratio(const Weight& w, const Ball& b, const GradientField& u, const QuadratureConfig& qc = {});

struct WeightedSample {
  Vec point;
  double value = 0.0;
};

/// sum rho(x_i) (u_i - ref)^2 / sum rho(x_i); ref = weighted mean when omitted.
double mean_deviation(std::span<const WeightedSample> samples, const Weight& w,
                      std::optional<double> reference = std::nullopt);

namespace fields {

ScalarField constant(double c);
/// <v, x>
ScalarField linear(const Vec& v);
/// scale * log|x|
ScalarField log_norm(double scale = 1.0);
/// 1 + a sin(<k, x>), |a| < 1
ScalarField sine_ripple(double amplitude, const Vec& k);
/// |x|^alpha
ScalarField norm_power(double alpha);

}  // namespace fields

}  // namespace wdiff
