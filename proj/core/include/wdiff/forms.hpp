#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "wdiff/quadrature.hpp"
#include "wdiff/types.hpp"
#include "wdiff/weights.hpp"

namespace wdiff {

/// What to do when a coefficient is requested at a point where the weight is
/// singular (the origin for power weights).
enum class SingularPolicy { zero_at_singularity, error };

/// The diffusion matrix A(x) together with its row divergence
/// (sum_j d_j a_ij)_i and the weight rho it is uniformly elliptic against:
///   lambda^{-1} rho |xi|^2 <= <A xi, xi> <= lambda rho |xi|^2.
class DiffusionField {
 public:
  DiffusionField(int dim, MatrixFn matrix, std::optional<VectorFn> divergence, Weight weight, double lambda,
                 std::string name = "custom");

  /// A = |x|^alpha I with rho = |x|^alpha.
  static DiffusionField isotropic_power(int dim, double alpha);
  /// A = |x|^alpha M for a constant SPD matrix M.
  static DiffusionField power_times_const_spd(double alpha, const Mat& m);
  /// A = |x|^alpha (I + b x x^T / |x|^2), b > -1: radial/tangential anisotropy.
  static DiffusionField power_radial_anisotropic(int dim, double alpha, double b);
  /// A = e^{phi} I with rho = e^{phi}.
  static DiffusionField exponential_isotropic(int dim, ScalarField phi);

  int dim() const { return dim_; }
  const std::string& name() const { return name_; }
  const Weight& weight() const { return weight_; }
  /// Declared ellipticity constant (>= 1).
  double lambda() const { return lambda_; }

  Mat matrix(const Vec& x) const { return matrix_(x); }

  /// Row divergence: analytic when supplied, otherwise central differences.
  Vec divergence(const Vec& x) const;
  /// Row divergence by central differences with h = 1e-5 max(1, |x|).
  Vec fd_divergence(const Vec& x) const;
  bool has_analytic_divergence() const { return divergence_.has_value(); }

  /// Same field with a different divergence evaluator (used to probe the
  /// integration-by-parts check with deliberately inconsistent data).
  DiffusionField with_divergence(VectorFn divergence) const;

  /// Fast-path metadata for the simulator.
  std::optional<double> isotropic_alpha() const { return isotropic_alpha_; }
  const std::optional<Mat>& constant_shape() const { return constant_shape_; }

 private:
  int dim_;
  MatrixFn matrix_;
  std::optional<VectorFn> divergence_;
  Weight weight_;
  double lambda_;
  std::string name_;
  std::optional<double> isotropic_alpha_;  // A = |x|^alpha * shape
  std::optional<Mat> constant_shape_;
};

/// Symmetric positive square root via eigendecomposition. Eigenvalues in
/// [-tol, 0) with tol = 1e-12 |M| are clamped to 0; anything below throws
/// IndefiniteMatrixError.
Mat sqrt_spd(const Mat& m);

/// SDE coefficients derived from a DiffusionField:
///   dispersion(x) = sqrt(A(x)) / sqrt(rho(x)),  drift(x) = (1/2) div A(x) / rho(x).
class SdeCoefficients {
 public:
  explicit SdeCoefficients(DiffusionField field, SingularPolicy policy = SingularPolicy::zero_at_singularity);

  int dim() const { return field_.dim(); }
  const DiffusionField& field() const { return field_; }
  SingularPolicy policy() const { return policy_; }

  Mat dispersion(const Vec& x) const;
  Vec drift(const Vec& x) const;
  /// Both at once; avoids recomputing rho on the generic path.
  void evaluate(const Vec& x, Mat& dispersion, Vec& drift) const;

  /// True when x lies on the weight's singular set.
  bool is_singular(const Vec& x) const;
  /// Dispersion does not depend on x (isotropic or constant-shape fields).
  bool constant_dispersion() const { return const_dispersion_.has_value(); }

  std::string describe() const;

 private:
  DiffusionField field_;
  SingularPolicy policy_;
  std::optional<Mat> const_dispersion_;
};

/// Compactly supported (or globally defined) C^2 test function.
struct SmoothTestFunction {
  ScalarFn value;
  VectorFn gradient;
  MatrixFn hessian;
  std::optional<Box> support;  ///< nullopt: not compactly supported
  std::string name = "custom";

  /// exp(1 - 1/(1 - |x-c|^2/R^2)) inside B_R(c), 0 outside.
  static SmoothTestFunction bump(const Vec& center, double radius);
  /// x_i
  static SmoothTestFunction coordinate(int dim, int i);
  /// |x|^2
  static SmoothTestFunction norm_squared(int dim);
  static SmoothTestFunction constant(int dim, double c);
};

/// Estimated ellipticity constant over sampled points and directions; a lower
/// bound on the true lambda.
struct EllipticityEstimate {
  double lambda_hat = 1.0;
  double min_ratio = 1.0;  ///< smallest <A xi, xi> / (rho |xi|^2) seen
  double max_ratio = 1.0;
  std::size_t n_points = 0;
};

EllipticityEstimate ellipticity_lambda(const DiffusionField& field, int n_points, int n_dirs, const Box& region,
                                       std::uint64_t seed);

/// (1/2) sum_ij [(a_ij / rho) d_ij f + (d_j a_ij / rho) d_i f](x).
double apply_generator(const SdeCoefficients& coeffs, const SmoothTestFunction& f, const Vec& x);

/// (1/2) int <A grad f, grad g> dx over the intersection of the supports.
quad::Result form_energy(const DiffusionField& field, const SmoothTestFunction& f, const SmoothTestFunction& g,
                         const quad::Options& opts = {});

struct IbpResidual {
  double energy = 0.0;      ///< E^A(x_i, g)
  double drift_term = 0.0;  ///< (1/2) int (sum_j d_j a_ij / rho) g dm
  double residual = 0.0;    ///< |energy + drift_term|
  double scale = 0.0;       ///< max(|energy|, |drift_term|)
  double relative() const { return scale > 0.0 ? residual / scale : residual; }
};

/// Integration-by-parts consistency of the supplied divergence with A for the
/// i-th coordinate function against a compactly supported g.
IbpResidual check_ibp(const DiffusionField& field, int i, const SmoothTestFunction& g, const quad::Options& opts = {});

/// Enclosure [|x-y| / sqrt(lambda), sqrt(lambda) |x-y|] of the intrinsic distance.
Interval intrinsic_bounds(double lambda, const Vec& x, const Vec& y);

enum class IntegrabilityCondition { hp3_i, hp3_ii, hp3_iii, hp3_prime, hp6 };

struct ExponentWindow {
  struct Entry {
    std::string exponent;  ///< "p" or "q"
    std::string applies_to;
    Interval window;
  };
  IntegrabilityCondition condition;
  bool applicable = false;  ///< alpha inside the condition's stated range
  std::vector<Entry> entries;
};

/// Feasible integrability exponents for a condition at (alpha, d), solved from
/// its strict inequalities. Empty (applicable = false) when alpha is outside
/// the range in which the condition is stated.
ExponentWindow exponent_window(double alpha, int d, IntegrabilityCondition condition);

std::string to_string(IntegrabilityCondition c);
IntegrabilityCondition integrability_condition_from_string(const std::string& s);

/// Region for local-norm checks.
struct Region {
  enum class Kind { ball, annulus, box };
  Kind kind = Kind::ball;
  Ball ball;
  double r_in = 0.0, r_out = 1.0;  // annulus about the origin
  Box box;
  int dim = 0;

  static Region of_ball(const Ball& b);
  static Region of_annulus(int dim, double r_in, double r_out);
  static Region of_box(const Box& b);
  std::string describe() const;
};

struct LocalNormReport {
  std::string field;
  double exponent = 1.0;
  std::string region;
  double value = 0.0;  ///< int |f|^p over the region (inf when divergent)
  bool converged = false;
  bool pass = false;
  double error = 0.0;
};

/// Quadrature estimate of int_region |f|^p dx (or dm when `measure` is given).
LocalNormReport check_local_norms(const ScalarFn& f, double p, const Region& region, const quad::Options& opts = {},
                                  const Weight* measure = nullptr, std::string field_name = "f");

/// |drift|, the Euclidean norm of (1/2) div A / rho.
ScalarFn drift_norm(const SdeCoefficients& coeffs);

/// Condition summary for a field: ellipticity, windows, and local norms of the
/// quantities each integrability condition constrains.
struct ConditionReport {
  EllipticityEstimate ellipticity;
  bool ellipticity_consistent = false;  ///< lambda_hat <= declared lambda
  std::vector<ExponentWindow> windows;
  std::vector<LocalNormReport> norms;
  bool pass = false;
};

ConditionReport check_conditions(const SdeCoefficients& coeffs, double radius, std::uint64_t seed,
                                 const quad::Options& opts = {});

}  // namespace wdiff
