#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "wdiff/quadrature.hpp"
#include "wdiff/sde.hpp"
#include "wdiff/stats.hpp"
#include "wdiff/types.hpp"
#include "wdiff/weights.hpp"

namespace wdiff {

/// States of the batch at time t: x0 at t = 0, a snapshot when t is one of
/// the configured snapshot times, or the terminal state of paths that ran to
/// the horizon when t is the horizon. Paths that ended earlier are absent.
/// Throws std::invalid_argument when t was not recorded.
std::vector<Vec> states_at(const PathBatch& b, double t);

/// Gaussian product-kernel bandwidths.
struct Bandwidth {
  enum class Kind { silverman, fixed };
  Kind kind = Kind::silverman;
  Vec fixed_h;         ///< per-dimension bandwidths when kind == fixed
  double scale = 1.0;  ///< multiplier applied to the chosen bandwidths

  static Bandwidth silverman(double scale = 1.0);
  static Bandwidth fixed(const Vec& h);
};

/// h_j = sigma_j (4 / ((d + 2) n))^{1/(d+4)}.
Vec silverman_bandwidth(const std::vector<Vec>& sample);

/// Transition density estimate with respect to m = rho dx.
struct DensityEstimate {
  double t = 0.0;
  std::vector<Vec> points;
  std::vector<double> value;
  std::vector<double> se;
  Vec bandwidth;
  std::size_t n_total = 0;  ///< normaliser (paths lost before t count as zero)
  std::size_t n_used = 0;
};

/// Kernel estimate of the law of X_t with respect to Lebesgue measure, divided
/// by rho(y). Throws EmptyBatchError for an empty sample and
/// SingularPointError when rho(y) is zero or undefined at an evaluation point.
DensityEstimate kde_transition_density(const std::vector<Vec>& sample, std::size_t n_total, const Weight& w,
                                       const std::vector<Vec>& ys, const Bandwidth& bw, double t = 0.0);
DensityEstimate kde_transition_density(const PathBatch& b, double t, const Weight& w, const std::vector<Vec>& ys,
                                       const Bandwidth& bw = {});

/// Estimates at half, one and two times the chosen bandwidth.
struct BandwidthSensitivity {
  DensityEstimate half, base, twice;
  double max_rel_change = 0.0;  ///< max over points of |p(h/2 or 2h) - p(h)| / p(h)
};
BandwidthSensitivity kde_sensitivity(const PathBatch& b, double t, const Weight& w, const std::vector<Vec>& ys,
                                     const Bandwidth& bw = {});

/// m(B_sqrt(t)(x))^{-1/2} m(B_sqrt(t)(y))^{-1/2} exp(-|x-y|^2 / (lambda (4 + eps) t)).
double heat_kernel_envelope(const Weight& w, double lambda, const Vec& x, const Vec& y, double t, double eps,
                            const QuadratureConfig& qc = {});

/// Envelope evaluator that caches ball masses by (centre, radius) buckets.
class HeatKernelEnvelope {
 public:
  HeatKernelEnvelope(Weight w, double lambda, QuadratureConfig qc = default_config());
  double operator()(const Vec& x, const Vec& y, double t, double eps) const;
  double ball_mass(const Vec& centre, double radius) const;
  std::size_t cache_size() const { return cache_.size(); }

  static QuadratureConfig default_config();

 private:
  Weight w_;
  double lambda_;
  QuadratureConfig qc_;
  mutable std::map<std::vector<long long>, double> cache_;
};

struct EnvelopeReport {
  double t = 0.0;
  double eps = 1.0;
  double c_hat = 0.0;
  double confidence_z = 3.0;
  std::size_t n_points = 0;
  std::size_t exceedances = 0;  ///< points with p + z SE > c_hat envelope (0 by construction)
  std::size_t excluded = 0;     ///< points with zero or non-finite envelope
  bool degenerate = false;      ///< every estimate was zero; c_hat comes from SE alone
  std::vector<std::string> warnings;
};

/// c_hat = max over the grid of (p + z SE) / envelope.
EnvelopeReport fit_heat_kernel_constant(const DensityEstimate& est, const std::vector<double>& envelope,
                                        double eps = 1.0, double z = 3.0);

struct EnvelopeStability {
  double c_min = 0.0;
  double c_max = 0.0;
  double ratio = 0.0;  ///< c_max / c_min
  bool stable = false; ///< ratio < 10
};
EnvelopeStability envelope_stability(const std::vector<EnvelopeReport>& sweep, double max_ratio = 10.0);

/// Integrable source for Riesz potentials, supported in a ball or a box.
struct RieszSource {
  ScalarFn g;
  std::optional<Ball> ball;
  std::optional<Box> box;
  std::string name = "g";

  static RieszSource indicator_ball(const Ball& b);
  static RieszSource zero(int dim);
  int dim() const;
  /// Smallest ball containing the support.
  Ball support_ball() const;
};

/// V_eta g(x) = int |x-y|^{eta-d} g(y) dy. Throws DivergentIntegralError when
/// the quadrature does not converge.
quad::Result riesz_potential(const RieszSource& g, double eta, const Vec& x, const quad::Options& opts = {});

/// Phi(x,y) + Psi(x,y) 1_{alpha in (-d,0)}, Phi = |x-y|^{-(alpha+d-2)},
/// Psi = |x-y|^{2-d} |y|^{-alpha}.
double resolvent_envelope(double alpha, int d, const Vec& x, const Vec& y);

struct HoelderReport {
  double eta = 0.0;
  double p = 0.0;
  int d = 0;
  bool eta_in_range = false;  ///< 0 < eta < d
  double order = 0.0;         ///< eta - d/p
  bool order_in_range = false;
  double tail_integral = 0.0;  ///< int (1 + |y|)^{eta-d} |g(y)| dy
  bool tail_finite = false;
  bool pass = false;
  std::vector<std::string> failures;
};

HoelderReport check_hoelder_hypotheses(const RieszSource& g, double p, double eta, int d,
                                       const quad::Options& opts = {});

struct MomentSummary {
  double t = 0.0;
  std::size_t n = 0;
  stats::MeanSe mean_sq_norm;
  Interval mean_sq_norm_ci;  ///< 99% normal interval
  std::vector<stats::MeanSe> component_means;
  Mat covariance;            ///< unbiased sample covariance
};

/// Sample statistics of X_t. Throws EmptyBatchError when no path is alive at t.
MomentSummary moment_summary(const PathBatch& b, double t);

}  // namespace wdiff
