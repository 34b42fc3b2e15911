#include <cctype>
#include "wdiff/forms.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "wdiff/errors.hpp"
#include "wdiff/rng.hpp"

namespace wdiff {

namespace {

bool is_identity(const Mat& m) { return m == Mat::Identity(m.rows(), m.cols()); }

void require_nonsingular_origin(const Vec& x, double alpha, const char* what) {
  if (alpha != 0.0 && x.squaredNorm() == 0.0)
    throw SingularPointError(std::string(what) + ": evaluated at the origin");
}

}  // namespace

// ---------------------------------------------------------------------------
// DiffusionField

DiffusionField::DiffusionField(int dim, MatrixFn matrix, std::optional<VectorFn> divergence, Weight weight,
                               double lambda, std::string name)
    : dim_(dim),
      matrix_(std::move(matrix)),
      divergence_(std::move(divergence)),
      weight_(std::move(weight)),
      lambda_(lambda),
      name_(std::move(name)) {
  if (dim < 1 || dim > kMaxDim) throw std::invalid_argument("DiffusionField: unsupported dimension");
  if (weight_.dim() != dim) throw std::invalid_argument("DiffusionField: weight dimension mismatch");
  if (!(lambda >= 1.0)) throw std::invalid_argument("DiffusionField: lambda must be >= 1");
}

DiffusionField DiffusionField::isotropic_power(int dim, double alpha) {
  Weight w = Weight::power(dim, alpha);
  auto matrix = [w, dim](const Vec& x) { return Mat(w(x) * Mat::Identity(dim, dim)); };
  auto div = [alpha](const Vec& x) {
    if (alpha == 0.0) return Vec(Vec::Zero(x.size()));
    require_nonsingular_origin(x, alpha, "isotropic_power divergence");
    return Vec(alpha * std::pow(x.norm(), alpha - 2.0) * x);
  };
  std::ostringstream name;
  name << "isotropic_power(d=" << dim << ", alpha=" << alpha << ")";
  DiffusionField f(dim, matrix, div, w, 1.0, name.str());
  f.isotropic_alpha_ = alpha;
  f.constant_shape_ = Mat::Identity(dim, dim);
  return f;
}

DiffusionField DiffusionField::power_times_const_spd(double alpha, const Mat& m) {
  const int dim = static_cast<int>(m.rows());
  if (m.rows() != m.cols()) throw std::invalid_argument("power_times_const_spd: matrix must be square");
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * m.cwiseAbs().maxCoeff())
    throw NonSymmetricMatrixError("power_times_const_spd: matrix is not symmetric");
  Eigen::SelfAdjointEigenSolver<Mat> eig(m);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  if (!(lo > 0.0)) throw IndefiniteMatrixError("power_times_const_spd: matrix must be positive definite");
  Weight w = Weight::power(dim, alpha);
  auto matrix = [w, m](const Vec& x) { return Mat(w(x) * m); };
  auto div = [alpha, m](const Vec& x) {
    if (alpha == 0.0) return Vec(Vec::Zero(x.size()));
    require_nonsingular_origin(x, alpha, "power_times_const_spd divergence");
    return Vec(alpha * std::pow(x.norm(), alpha - 2.0) * (m * x));
  };
  std::ostringstream name;
  name << "power_times_const_spd(d=" << dim << ", alpha=" << alpha << ")";
  DiffusionField f(dim, matrix, div, w, std::max(hi, 1.0 / lo), name.str());
  f.isotropic_alpha_ = alpha;
  f.constant_shape_ = m;
  return f;
}

DiffusionField DiffusionField::power_radial_anisotropic(int dim, double alpha, double b) {
  if (!(b > -1.0)) throw std::invalid_argument("power_radial_anisotropic: b must exceed -1");
  Weight w = Weight::power(dim, alpha);
  auto matrix = [w, b, dim](const Vec& x) {
    const double r2 = x.squaredNorm();
    Mat a = Mat::Identity(dim, dim);
    if (r2 > 0.0) a += b * x * x.transpose() / r2;
    return Mat(w(x) * a);
  };
  // sum_j d_j [|x|^alpha (delta_ij + b x_i x_j / |x|^2)] = (alpha + b (alpha + d - 1)) |x|^{alpha-2} x_i
  const double coef = alpha + b * (alpha + dim - 1.0);
  auto full_div = [coef, alpha](const Vec& x) {
    if (coef == 0.0) return Vec(Vec::Zero(x.size()));
    require_nonsingular_origin(x, 1.0, "power_radial_anisotropic divergence");
    return Vec(coef * std::pow(x.norm(), alpha - 2.0) * x);
  };
  std::ostringstream name;
  name << "power_radial_anisotropic(d=" << dim << ", alpha=" << alpha << ", b=" << b << ")";
  return DiffusionField(dim, matrix, full_div, w, std::max(1.0 + b, 1.0 / (1.0 + b)), name.str());
}

DiffusionField DiffusionField::exponential_isotropic(int dim, ScalarField phi) {
  Weight w = Weight::exponential(dim, phi);
  auto matrix = [w, dim](const Vec& x) { return Mat(w(x) * Mat::Identity(dim, dim)); };
  std::optional<VectorFn> div;
  if (phi.gradient) {
    div = [phi](const Vec& x) { return Vec(std::exp(phi(x)) * (*phi.gradient)(x)); };
  }
  DiffusionField f(dim, matrix, div, w, 1.0, "exponential_isotropic(phi=" + phi.name + ")");
  return f;
}

Vec DiffusionField::divergence(const Vec& x) const {
  if (divergence_) return (*divergence_)(x);
  return fd_divergence(x);
}

Vec DiffusionField::fd_divergence(const Vec& x) const {
  const double h = 1e-5 * std::max(1.0, x.norm());
  Vec out = Vec::Zero(dim_);
  for (int j = 0; j < dim_; ++j) {
    Vec xp = x, xm = x;
    xp[j] += h;
    xm[j] -= h;
    out += (matrix_(xp).col(j) - matrix_(xm).col(j)) / (2.0 * h);
  }
  return out;
}

DiffusionField DiffusionField::with_divergence(VectorFn divergence) const {
  DiffusionField f = *this;
  f.divergence_ = std::move(divergence);
  f.name_ = name_ + "+override";
  // the fast paths assume the analytic divergence
  f.isotropic_alpha_.reset();
  f.constant_shape_.reset();
  return f;
}

// ---------------------------------------------------------------------------
// sqrt_spd

Mat sqrt_spd(const Mat& m) {
  if (m.rows() != m.cols()) throw std::invalid_argument("sqrt_spd: matrix must be square");
  Eigen::SelfAdjointEigenSolver<Mat> eig(m);
  if (eig.info() != Eigen::Success) throw IndefiniteMatrixError("sqrt_spd: eigendecomposition failed");
  const Vec& values = eig.eigenvalues();
  const double norm = values.cwiseAbs().maxCoeff();
  const double tol = 1e-12 * norm;
  Vec roots(values.size());
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    if (values[i] < -tol) {
      std::ostringstream msg;
      msg << "sqrt_spd: eigenvalue " << values[i] << " below -tol = " << -tol;
      throw IndefiniteMatrixError(msg.str());
    }
    roots[i] = std::sqrt(std::max(0.0, values[i]));
  }
  const Mat& v = eig.eigenvectors();
  Mat s = v * roots.asDiagonal() * v.transpose();
  return 0.5 * (s + s.transpose());
}

// ---------------------------------------------------------------------------
// SdeCoefficients

SdeCoefficients::SdeCoefficients(DiffusionField field, SingularPolicy policy)
    : field_(std::move(field)), policy_(policy) {
  if (field_.isotropic_alpha() && field_.constant_shape()) {
    const Mat& shape = *field_.constant_shape();
    const_dispersion_ = is_identity(shape) ? Mat(Mat::Identity(shape.rows(), shape.cols())) : sqrt_spd(shape);
  }
}

bool SdeCoefficients::is_singular(const Vec& x) const { return field_.weight().is_singular_at(x); }

Vec SdeCoefficients::drift(const Vec& x) const {
  const int d = dim();
  if (is_singular(x)) {
    if (policy_ == SingularPolicy::error) throw SingularPointError("drift requested at a singular point");
    return Vec::Zero(d);
  }
  if (const auto alpha = field_.isotropic_alpha(); alpha && field_.constant_shape()) {
    if (*alpha == 0.0) return Vec::Zero(d);
    const double k = 0.5 * *alpha / x.squaredNorm();
    if (const_dispersion_ && is_identity(*const_dispersion_)) return Vec(k * x);
    return Vec(k * (*field_.constant_shape() * x));
  }
  return Vec(0.5 * field_.divergence(x) / field_.weight()(x));
}

Mat SdeCoefficients::dispersion(const Vec& x) const {
  if (const_dispersion_) return *const_dispersion_;
  if (is_singular(x)) {
    if (policy_ == SingularPolicy::error) throw SingularPointError("dispersion requested at a singular point");
    // measure-zero perturbation off the singular point
    Vec y = x;
    y[0] += 1e-9;
    return sqrt_spd(field_.matrix(y) / field_.weight()(y));
  }
  return sqrt_spd(field_.matrix(x) / field_.weight()(x));
}

void SdeCoefficients::evaluate(const Vec& x, Mat& disp, Vec& drift_out) const {
  disp = dispersion(x);
  drift_out = drift(x);
}

std::string SdeCoefficients::describe() const {
  return field_.name() + (policy_ == SingularPolicy::error ? " [policy=error]" : " [policy=zero_at_singularity]");
}

// ---------------------------------------------------------------------------
// SmoothTestFunction

SmoothTestFunction SmoothTestFunction::bump(const Vec& center, double radius) {
  if (!(radius > 0.0)) throw std::invalid_argument("bump: radius must be positive");
  const int d = static_cast<int>(center.size());
  const double r2 = radius * radius;
  SmoothTestFunction f;
  f.name = "bump";
  f.value = [center, r2](const Vec& x) {
    const double q = (x - center).squaredNorm() / r2;
    if (q >= 1.0) return 0.0;
    return std::exp(1.0 - 1.0 / (1.0 - q));
  };
  f.gradient = [center, r2, d](const Vec& x) {
    const Vec y = x - center;
    const double q = y.squaredNorm() / r2;
    if (q >= 1.0) return Vec(Vec::Zero(d));
    const double u = 1.0 / (1.0 - q);
    const double v = std::exp(1.0 - u);
    return Vec(-2.0 * v * u * u / r2 * y);
  };
  f.hessian = [center, r2, d](const Vec& x) {
    const Vec y = x - center;
    const double q = y.squaredNorm() / r2;
    if (q >= 1.0) return Mat(Mat::Zero(d, d));
    const double u = 1.0 / (1.0 - q);
    const double v = std::exp(1.0 - u);
    const double u2 = u * u;
    Mat h = u2 * Mat::Identity(d, d) + (4.0 * u2 * u - 2.0 * u2 * u2) / r2 * (y * y.transpose());
    return Mat(-2.0 * v / r2 * h);
  };
  f.support = Box::cube(center, radius);
  return f;
}

SmoothTestFunction SmoothTestFunction::coordinate(int dim, int i) {
  if (i < 0 || i >= dim) throw std::invalid_argument("coordinate: index out of range");
  SmoothTestFunction f;
  f.name = "coordinate";
  f.value = [i](const Vec& x) { return x[i]; };
  f.gradient = [dim, i](const Vec&) { return unit(dim, i); };
  f.hessian = [dim](const Vec&) { return Mat(Mat::Zero(dim, dim)); };
  return f;
}

SmoothTestFunction SmoothTestFunction::norm_squared(int dim) {
  SmoothTestFunction f;
  f.name = "norm_squared";
  f.value = [](const Vec& x) { return x.squaredNorm(); };
  f.gradient = [](const Vec& x) { return Vec(2.0 * x); };
  f.hessian = [dim](const Vec&) { return Mat(2.0 * Mat::Identity(dim, dim)); };
  return f;
}

SmoothTestFunction SmoothTestFunction::constant(int dim, double c) {
  SmoothTestFunction f;
  f.name = "constant";
  f.value = [c](const Vec&) { return c; };
  f.gradient = [dim](const Vec&) { return Vec(Vec::Zero(dim)); };
  f.hessian = [dim](const Vec&) { return Mat(Mat::Zero(dim, dim)); };
  return f;
}

// ---------------------------------------------------------------------------
// Operations

EllipticityEstimate ellipticity_lambda(const DiffusionField& field, int n_points, int n_dirs, const Box& region,
                                       std::uint64_t seed) {
  if (n_points < 1) throw std::invalid_argument("ellipticity_lambda: n_points must be >= 1");
  if (region.dim() != field.dim()) throw std::invalid_argument("ellipticity_lambda: region dimension mismatch");
  const int d = field.dim();
  PhiloxStream rng(seed, 0);
  EllipticityEstimate est;
  est.min_ratio = std::numeric_limits<double>::infinity();
  est.max_ratio = 0.0;
  for (int p = 0; p < n_points; ++p) {
    Vec x(d);
    for (int k = 0; k < d; ++k) x[k] = region.lo[k] + rng.uniform() * (region.hi[k] - region.lo[k]);
    if (field.weight().is_singular_at(x)) continue;
    const Mat a = field.matrix(x);
    const double scale = a.cwiseAbs().maxCoeff();
    if ((a - a.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale)
      throw NonSymmetricMatrixError("ellipticity_lambda: A(x) is not symmetric");
    const double rho = field.weight()(x);
    const Mat b = a / rho;
    auto consider = [&](double q) {
      if (!(q > 0.0)) throw NonPositiveRatioError("ellipticity_lambda: <A xi, xi> / (rho |xi|^2) <= 0");
      est.min_ratio = std::min(est.min_ratio, q);
      est.max_ratio = std::max(est.max_ratio, q);
    };
    // extremal directions: the eigenvectors of A / rho
    Eigen::SelfAdjointEigenSolver<Mat> eig(0.5 * (b + b.transpose()), Eigen::EigenvaluesOnly);
    consider(eig.eigenvalues().minCoeff());
    consider(eig.eigenvalues().maxCoeff());
    for (int k = 0; k < n_dirs; ++k) {
      const Vec xi = rng.normal_vec(d);
      consider(xi.dot(b * xi) / xi.squaredNorm());
    }
    ++est.n_points;
  }
  if (est.n_points == 0) throw std::invalid_argument("ellipticity_lambda: no nonsingular sample points");
  est.lambda_hat = std::max({1.0, est.max_ratio, 1.0 / est.min_ratio});
  return est;
}

double apply_generator(const SdeCoefficients& coeffs, const SmoothTestFunction& f, const Vec& x) {
  const DiffusionField& field = coeffs.field();
  Mat a_over_rho;
  if (coeffs.is_singular(x)) {
    const Mat s = coeffs.dispersion(x);  // throws under the error policy
    a_over_rho = s * s.transpose();
  } else {
    a_over_rho = field.matrix(x) / field.weight()(x);
  }
  const Vec b = coeffs.drift(x);
  const Mat h = f.hessian(x);
  return 0.5 * (a_over_rho.cwiseProduct(h)).sum() + b.dot(f.gradient(x));
}

namespace {

std::optional<Box> intersect(const std::optional<Box>& a, const std::optional<Box>& b) {
  if (!a) return b;
  if (!b) return a;
  Vec lo = a->lo.cwiseMax(b->lo);
  Vec hi = a->hi.cwiseMin(b->hi);
  if (((hi - lo).array() <= 0.0).any()) return Box();  // empty marker (dim 0)
  return Box(lo, hi);
}

}  // namespace

quad::Result form_energy(const DiffusionField& field, const SmoothTestFunction& f, const SmoothTestFunction& g,
                         const quad::Options& opts) {
  const auto box = intersect(f.support, g.support);
  if (!box) throw std::invalid_argument("form_energy: at least one test function must be compactly supported");
  if (box->dim() == 0) {
    quad::Result r;
    r.converged = true;
    return r;
  }
  auto integrand = [&](const Vec& x) {
    const Vec gf = f.gradient(x);
    const Vec gg = g.gradient(x);
    if (gf.isZero(0.0) || gg.isZero(0.0)) return 0.0;
    return 0.5 * gf.dot(field.matrix(x) * gg);
  };
  return quad::integrate_box_gauss(integrand, *box, opts);
}

IbpResidual check_ibp(const DiffusionField& field, int i, const SmoothTestFunction& g, const quad::Options& opts) {
  if (i < 0 || i >= field.dim()) throw std::invalid_argument("check_ibp: coordinate index out of range");
  if (!g.support) throw std::invalid_argument("check_ibp: g must be compactly supported");
  auto integrand = [&](const Vec& x, std::span<double> out) {
    const double gv = g.value(x);
    const Vec gg = g.gradient(x);
    if (gv == 0.0 && gg.isZero(0.0)) {
      out[0] = out[1] = 0.0;
      return;
    }
    // E^A(f^i, g) density: (1/2) <A e_i, grad g>; drift density: (1/2) (div_i / rho) g rho
    out[0] = 0.5 * field.matrix(x).row(i).dot(gg);
    out[1] = 0.5 * field.divergence(x)[i] * gv;
  };
  const auto parts = quad::integrate_box_gauss(integrand, 2, *g.support, opts);
  IbpResidual r;
  r.energy = parts[0].value;
  r.drift_term = parts[1].value;
  r.residual = std::abs(r.energy + r.drift_term);
  r.scale = std::max(std::abs(r.energy), std::abs(r.drift_term));
  return r;
}

Interval intrinsic_bounds(double lambda, const Vec& x, const Vec& y) {
  if (!(lambda >= 1.0)) throw std::invalid_argument("intrinsic_bounds: lambda must be >= 1");
  const double dist = (x - y).norm();
  const double s = std::sqrt(lambda);
  return {dist / s, s * dist};
}

std::string to_string(IntegrabilityCondition c) {
  switch (c) {
    case IntegrabilityCondition::hp3_i: return "HP3-i";
    case IntegrabilityCondition::hp3_ii: return "HP3-ii";
    case IntegrabilityCondition::hp3_iii: return "HP3-iii";
    case IntegrabilityCondition::hp3_prime: return "HP3prime";
    case IntegrabilityCondition::hp6: return "HP6";
  }
  return "?";
}

IntegrabilityCondition integrability_condition_from_string(const std::string& s) {
  // Case, '-' and '_' are ignored, so "hp3_iii" and "HP3-iii" name the same condition.
  auto norm = [](const std::string& in) {
    std::string out;
    for (char ch : in)
      if (ch != '-' && ch != '_') out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
    return out;
  };
  for (auto c : {IntegrabilityCondition::hp3_i, IntegrabilityCondition::hp3_ii, IntegrabilityCondition::hp3_iii,
                 IntegrabilityCondition::hp3_prime, IntegrabilityCondition::hp6})
    if (norm(to_string(c)) == norm(s)) return c;
  throw std::invalid_argument("unknown integrability condition '" + s + "'");
}

ExponentWindow exponent_window(double alpha, int d, IntegrabilityCondition condition) {
  if (d < 2) throw std::invalid_argument("exponent_window: d must be >= 2");
  constexpr double inf = std::numeric_limits<double>::infinity();
  const double dd = d;
  ExponentWindow w;
  w.condition = condition;
  // 0 < 2 - d/q < 1  <=>  d/2 < q < d
  const Interval q_window{dd / 2.0, dd, true, true};
  // 0 < 2 - alpha - d/p < 1  <=>  d/(2-alpha) < p < d/(1-alpha)   (upper end inf when alpha >= 1)
  auto p_window = [&] { return Interval{dd / (2.0 - alpha), alpha >= 1.0 ? inf : dd / (1.0 - alpha), true, true}; };
  switch (condition) {
    case IntegrabilityCondition::hp3_i:
      w.applicable = alpha > -dd && alpha <= -dd + 2.0;
      if (w.applicable) w.entries.push_back({"q", "d_j a_ij / rho in L^q_loc(dx)", q_window});
      break;
    case IntegrabilityCondition::hp3_ii:
      w.applicable = alpha > -dd + 2.0 && alpha < 0.0;
      if (w.applicable) {
        w.entries.push_back({"p", "d_j a_ij in L^p_loc(dx)", p_window()});
        w.entries.push_back({"q", "d_j a_ij / rho in L^q_loc(dx)", q_window});
      }
      break;
    case IntegrabilityCondition::hp3_iii:
      w.applicable = alpha >= 0.0 && alpha < 2.0;
      if (w.applicable) w.entries.push_back({"p", "d_j a_ij in L^p_loc(dx)", p_window()});
      break;
    case IntegrabilityCondition::hp3_prime:
      w.applicable = true;
      w.entries.push_back({"p", "d_j a_ij in L^{d/2+eps}_loc(dx)", Interval{dd / 2.0, inf, true, true}});
      break;
    case IntegrabilityCondition::hp6:
      w.applicable = true;
      w.entries.push_back({"p", "sum_k d_k a_ik / rho and |grad(sigma_ij/sqrt(rho))| in L^p_loc(dx)",
                           Interval{2.0 * (dd + 1.0), inf, false, true}});
      break;
  }
  return w;
}

// ---------------------------------------------------------------------------
// Local norms

Region Region::of_ball(const Ball& b) {
  Region r;
  r.kind = Kind::ball;
  r.ball = b;
  r.dim = b.dim();
  return r;
}

Region Region::of_annulus(int dim, double r_in, double r_out) {
  if (!(r_in >= 0.0 && r_out > r_in)) throw std::invalid_argument("Region::of_annulus: need 0 <= r_in < r_out");
  Region r;
  r.kind = Kind::annulus;
  r.r_in = r_in;
  r.r_out = r_out;
  r.dim = dim;
  return r;
}

Region Region::of_box(const Box& b) {
  Region r;
  r.kind = Kind::box;
  r.box = b;
  r.dim = b.dim();
  return r;
}

std::string Region::describe() const {
  std::ostringstream os;
  switch (kind) {
    case Kind::ball:
      os << "ball(r=" << ball.radius << ", |center|=" << ball.center.norm() << ")";
      break;
    case Kind::annulus:
      os << "annulus(" << r_in << " < |x| < " << r_out << ")";
      break;
    case Kind::box:
      os << "box(volume=" << box.volume() << ")";
      break;
  }
  return os.str();
}

LocalNormReport check_local_norms(const ScalarFn& f, double p, const Region& region, const quad::Options& opts,
                                  const Weight* measure, std::string field_name) {
  if (!(p >= 1.0)) throw std::invalid_argument("check_local_norms: p must be >= 1");
  LocalNormReport rep;
  rep.field = std::move(field_name);
  rep.exponent = p;
  rep.region = region.describe();
  auto integrand = [&](const Vec& x) {
    double v = std::pow(std::abs(f(x)), p);
    if (measure) v *= (*measure)(x);
    return v;
  };
  quad::Result r;
  switch (region.kind) {
    case Region::Kind::ball:
      r = quad::integrate_ball(integrand, region.ball, opts);
      break;
    case Region::Kind::annulus:
      r = quad::integrate_annulus(integrand, region.dim, region.r_in, region.r_out, opts);
      break;
    case Region::Kind::box:
      r = quad::integrate_box_stratified(integrand, region.box, opts);
      break;
  }
  rep.converged = r.converged && !r.divergent && std::isfinite(r.value);
  rep.value = rep.converged ? r.value : std::numeric_limits<double>::infinity();
  rep.error = r.error;
  rep.pass = rep.converged;
  return rep;
}

ScalarFn drift_norm(const SdeCoefficients& coeffs) {
  return [coeffs](const Vec& x) { return coeffs.drift(x).norm(); };
}

namespace {

// Frobenius norm of the array (d_j a_ij(x))_ij by central differences. Any
// norm on the finite array gives the same L^p_loc verdict; this one is smooth
// in the direction of x, which the angular rules need.
double partial_norm(const DiffusionField& field, const Vec& x) {
  const double h = 1e-5 * std::min(1.0, std::max(x.norm(), 1e-150));  // relative step keeps the stencil off the origin
  double sq = 0.0;
  for (int j = 0; j < field.dim(); ++j) {
    Vec xp = x, xm = x;
    xp[j] += h;
    xm[j] -= h;
    sq += ((field.matrix(xp).col(j) - field.matrix(xm).col(j)) / (2.0 * h)).squaredNorm();
  }
  return std::sqrt(sq);
}

double dispersion_gradient_norm(const SdeCoefficients& coeffs, const Vec& x) {
  const double h = 1e-5 * std::min(1.0, std::max(x.norm(), 1e-150));
  const int d = coeffs.dim();
  double sq = 0.0;
  for (int k = 0; k < d; ++k) {
    Vec xp = x, xm = x;
    xp[k] += h;
    xm[k] -= h;
    const Mat diff = (coeffs.dispersion(xp) - coeffs.dispersion(xm)) / (2.0 * h);
    sq += diff.squaredNorm();
  }
  return std::sqrt(sq);
}

double pick_exponent(const Interval& w) {
  if (!w.lo_open) return w.lo;
  if (std::isinf(w.hi)) return w.lo + 1.0;
  return 0.5 * (w.lo + w.hi);
}

}  // namespace

ConditionReport check_conditions(const SdeCoefficients& coeffs, double radius, std::uint64_t seed,
                                 const quad::Options& opts) {
  const DiffusionField& field = coeffs.field();
  const int d = field.dim();
  ConditionReport rep;
  rep.ellipticity = ellipticity_lambda(field, 256, 8, Box::cube(Vec::Zero(d), radius), seed);
  rep.ellipticity_consistent = rep.ellipticity.lambda_hat <= field.lambda() * (1.0 + 1e-9);

  std::vector<IntegrabilityCondition> conditions{IntegrabilityCondition::hp3_prime, IntegrabilityCondition::hp6};
  if (const auto alpha = field.weight().power_exponent()) {
    for (auto c : {IntegrabilityCondition::hp3_i, IntegrabilityCondition::hp3_ii, IntegrabilityCondition::hp3_iii}) {
      if (exponent_window(*alpha, d, c).applicable) conditions.insert(conditions.begin(), c);
    }
  }
  const Region ball = Region::of_ball(Ball(Vec::Zero(d), radius));
  const Weight& w = field.weight();
  auto partial = [&field](const Vec& x) { return partial_norm(field, x); };
  auto partial_over_rho = [&field, &w](const Vec& x) { return partial_norm(field, x) / w(x); };
  auto div_over_rho = [&field, &w](const Vec& x) { return field.divergence(x).norm() / w(x); };
  auto disp_grad = [&coeffs](const Vec& x) { return dispersion_gradient_norm(coeffs, x); };

  for (auto c : conditions) {
    ExponentWindow win = exponent_window(field.weight().power_exponent().value_or(0.0), d, c);
    for (const auto& e : win.entries) {
      const double p = pick_exponent(e.window);
      const std::string tag = to_string(c) + ":" + e.exponent;
      if (c == IntegrabilityCondition::hp6) {
        rep.norms.push_back(check_local_norms(div_over_rho, p, ball, opts, nullptr, tag + ":div_i/rho"));
        rep.norms.push_back(check_local_norms(disp_grad, p, ball, opts, nullptr, tag + ":grad(sigma/sqrt(rho))"));
      } else if (e.exponent == "q") {
        rep.norms.push_back(check_local_norms(partial_over_rho, p, ball, opts, nullptr, tag + ":d_j a_ij/rho"));
      } else {
        rep.norms.push_back(check_local_norms(partial, p, ball, opts, nullptr, tag + ":d_j a_ij"));
      }
    }
    rep.windows.push_back(std::move(win));
  }
  rep.pass = rep.ellipticity_consistent &&
             std::all_of(rep.norms.begin(), rep.norms.end(), [](const LocalNormReport& r) { return r.pass; });
  return rep;
}

}  // namespace wdiff
