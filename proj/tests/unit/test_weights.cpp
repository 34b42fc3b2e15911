#include <doctest.h>

#include <cmath>
#include <vector>

#include "wdiff/errors.hpp"
#include "wdiff/rng.hpp"
#include "wdiff/weights.hpp"

using namespace wdiff;

namespace {

Vec vec(std::initializer_list<double> xs) {
  Vec v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

// For rho = |x|^alpha on B_1(0) in R^d, the average of |x|^s is d / (d + s).
double radial_average(int d, double s) { return d / (d + s); }

BallSampling default_sampling(int d) { return {Box::cube(Vec::Zero(d), 2.0), 1e-3, 10.0}; }

}  // namespace

TEST_CASE("weight evaluation") {
  CHECK(Weight::power(3, 1.0)(vec({2, 0, 0})) == doctest::Approx(2.0));
  CHECK(Weight::power(3, 0.0)(vec({0.3, -7, 2})) == 1.0);
  CHECK(Weight::power(3, 0.0)(vec({0, 0, 0})) == 1.0);
  const Weight e = Weight::exponential(3, fields::log_norm());
  CHECK(e(vec({std::exp(1.0), 0, 0})) == doctest::Approx(std::exp(1.0)));
}

TEST_CASE("weight construction guards") {
  CHECK_THROWS_AS(Weight::power(3, -3.0), std::invalid_argument);
  CHECK_THROWS_AS(Weight::power(3, -3.5), std::invalid_argument);
  CHECK_NOTHROW(Weight::power(3, -2.9));
  CHECK_THROWS(Weight::product(fields::constant(1.0), 0.5, Weight::power(3, 0.0)));
  // The multiplier bound is enforced where the weight is evaluated.
  const Weight loose = Weight::product(fields::constant(5.0), 2.0, Weight::power(3, 0.0));
  CHECK_THROWS_AS(loose(vec({1, 0, 0})), std::domain_error);
  CHECK_THROWS_AS(Weight::power(3, -1.0)(vec({0, 0, 0})), SingularPointError);
  const Weight p = Weight::product(fields::sine_ripple(0.5, vec({1, 0, 0})), 2.0, Weight::power(3, 1.0));
  const Vec x = vec({0.7, 0.2, -0.4});
  CHECK(p(x) == doctest::Approx((1 + 0.5 * std::sin(0.7)) * x.norm()));
}

TEST_CASE("a2 ratio examples") {
  CHECK(a2_ratio(Weight::power(3, 0.0), Ball(vec({1, 2, 3}), 0.5)) == doctest::Approx(1.0).epsilon(1e-9));
  const double expected = radial_average(3, 1.0) * radial_average(3, -1.0);
  CHECK(expected == doctest::Approx(9.0 / 8.0));
  CHECK(a2_ratio(Weight::power(3, 1.0), Ball(Vec::Zero(3), 1.0)) == doctest::Approx(expected).epsilon(1e-6));
  // A density below the integrability limit, declared through the custom kind.
  const Weight bad = Weight::custom(3, fields::norm_power(-3.5));
  CHECK_THROWS_AS(a2_ratio(bad, Ball(vec({0.1, 0, 0}), 0.5)), DivergentIntegralError);
}

TEST_CASE("a2 ratio is at least one on random balls") {
  PhiloxStream rng(99, 0);
  const std::vector<Weight> ws{Weight::power(3, -2.0), Weight::power(3, 1.5), Weight::power(2, 0.5),
                               Weight::exponential(3, fields::log_norm(0.5)),
                               Weight::product(fields::sine_ripple(0.3, vec({2, 1, 0})), 2.0, Weight::power(3, 1.0))};
  for (const auto& w : ws) {
    for (int k = 0; k < 20; ++k) {
      Vec c(w.dim());
      for (int i = 0; i < w.dim(); ++i) c[i] = 4 * rng.uniform() - 2;
      const double r = std::pow(10.0, -2 + 3 * rng.uniform());
      CHECK(a2_ratio(w, Ball(c, r)) >= 1.0 - 1e-6);
    }
  }
}

TEST_CASE("check_a2 verdicts on power weights in three dimensions") {
  for (double a : {-2.0, -1.0, 0.0, 1.0, 2.0}) {
    CAPTURE(a);
    const auto r = check_a2(Weight::power(3, a), default_sampling(3), 60, 3);
    CHECK(r.pass);
    CHECK(r.worst_ratio >= 1.0 - 1e-6);
  }
  const auto zero = check_a2(Weight::power(3, 0.0), default_sampling(3), 30, 3);
  CHECK(zero.worst_ratio == doctest::Approx(1.0).epsilon(1e-8));
  // alpha >= d: rho^{-1} is not integrable near 0, so balls around 0 diverge.
  CHECK_THROWS_AS(check_a2(Weight::power(3, 3.5), default_sampling(3), 60, 3), DivergentIntegralError);
  CHECK_THROWS_AS(check_a2(Weight::power(3, 4.0), default_sampling(3), 60, 3), DivergentIntegralError);
  CHECK_THROWS_AS(Weight::power(3, -3.5), std::invalid_argument);
}

TEST_CASE("a2 ratio for alpha = 4 grows without bound near the origin") {
  const Weight w = Weight::power(3, 4.0);
  // Off-centre balls avoid the pole; the ratio grows as they approach it.
  const double far = a2_ratio(w, Ball(vec({1.0, 0, 0}), 0.5));
  const double near = a2_ratio(w, Ball(vec({0.1, 0, 0}), 0.099));
  const double nearer = a2_ratio(w, Ball(vec({0.1, 0, 0}), 0.0999));
  CHECK(near > far);
  CHECK(nearer > near);
}

TEST_CASE("doubling ratio examples") {
  CHECK(doubling_ratio(Weight::power(3, 0.0), Ball(vec({0.4, 1, -2}), 0.3)) == doctest::Approx(8.0).epsilon(1e-8));
  CHECK(doubling_ratio(Weight::power(3, 1.0), Ball(Vec::Zero(3), 0.7)) == doctest::Approx(16.0).epsilon(1e-6));
  CHECK(doubling_ratio(Weight::power(3, 1.0), Ball(vec({10, 0, 0}), 0.01)) == doctest::Approx(8.0).epsilon(1e-2));
}

TEST_CASE("doubling ratio at origin-centred balls is 2^(d+alpha)") {
  for (int d : {2, 3, 4}) {
    for (double a : {-d + 0.5, -1.0, 0.0, 0.5, 1.0, 2.0, 3.5}) {
      CAPTURE(d);
      CAPTURE(a);
      for (double r : {0.01, 1.0, 30.0})
        CHECK(doubling_ratio(Weight::power(d, a), Ball(Vec::Zero(d), r)) ==
              doctest::Approx(std::pow(2.0, d + a)).epsilon(1e-5));
    }
  }
}

TEST_CASE("check_doubling passes power weights") {
  const auto r = check_doubling(Weight::power(3, 1.0), default_sampling(3), 60, 9);
  CHECK(r.pass);
  CHECK(r.threshold == doctest::Approx(std::pow(2.0, 3 + 1 + 1)));
}

TEST_CASE("exponential bmo averages") {
  const Box unit = Box(Vec::Zero(3), Vec::Ones(3));
  CHECK(bmo_exp_avg(fields::constant(2.0), unit) == doctest::Approx(1.0).epsilon(1e-9));
  const double lin = bmo_exp_avg(fields::linear(vec({1, 0, 0})), unit);
  CHECK(lin > 1.0);
  CHECK(lin <= std::exp(0.5));
  // phi_Q = 1/2 and the average of e^{|x1 - 1/2|} over [0,1] is 2 (e^{1/2} - 1).
  CHECK(lin == doctest::Approx(2 * (std::exp(0.5) - 1)).epsilon(5e-3));
  double worst = 0.0;
  for (double h : {1.0, 0.1, 0.01, 0.001, 1e-4}) {
    const double v = bmo_exp_avg(fields::log_norm(), Box::cube(Vec::Zero(3), h));
    CHECK(v >= 1.0 - 5e-3);
    worst = std::max(worst, v);
  }
  CHECK(worst < 3.0);
}

TEST_CASE("poincare ratio") {
  const int d = 3;
  GradientField x1{[](const Vec& x) { return x[0]; }, [](const Vec&) { return unit(3, 0); }};
  GradientField flat{[](const Vec&) { return 4.0; }, [](const Vec&) { return Vec::Zero(3); }};
  CHECK_THROWS_AS(poincare_ratio(Weight::power(d, 0.0), Ball(Vec::Zero(3), 1.0), flat), DegenerateTestFunctionError);
  for (double r : {0.1, 1.0, 10.0})
    CHECK(poincare_ratio(Weight::power(d, 0.0), Ball(Vec::Zero(3), r), x1) == doctest::Approx(1.0 / (d + 2)).epsilon(1e-6));

  // Invariance under u -> a u + b.
  GradientField mixed{[](const Vec& x) { return x[0] + 0.5 * std::sin(x[1]); },
                      [](const Vec& x) { return vec({1.0, 0.5 * std::cos(x[1]), 0.0}); }};
  GradientField scaled{[&](const Vec& x) { return -3.0 * mixed.value(x) + 7.0; },
                       [&](const Vec& x) { return Vec(-3.0 * mixed.gradient(x)); }};
  const Weight w = Weight::power(d, 1.0);
  const Ball b(Vec::Zero(3), 1.0);
  const double base = poincare_ratio(w, b, mixed);
  CHECK(std::isfinite(base));
  CHECK(poincare_ratio(w, b, scaled) == doctest::Approx(base).epsilon(1e-8));
  GradientField doubled{[](const Vec& x) { return 2 * x[0]; }, [](const Vec&) { return Vec(2 * unit(3, 0)); }};
  CHECK(poincare_ratio(w, b, doubled) == doctest::Approx(poincare_ratio(w, b, x1)).epsilon(1e-10));
}

TEST_CASE("mean deviation examples") {
  const Weight w = Weight::power(2, 0.0);
  std::vector<WeightedSample> s{{vec({1, 0}), 0.0}, {vec({0, 1}), 1.0}};
  CHECK(mean_deviation(s, w) == doctest::Approx(0.25));
  CHECK(mean_deviation(s, w, 0.0) == doctest::Approx(0.5));
}

TEST_CASE("own weighted mean minimises the deviation") {
  PhiloxStream rng(17, 0);
  const Weight w = Weight::power(3, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<WeightedSample> s;
    double sw = 0, swu = 0;
    for (int i = 0; i < 25; ++i) {
      Vec p = rng.normal_vec(3);
      const double u = rng.normal() * 2 + 1;
      s.push_back({p, u});
      sw += w(p);
      swu += w(p) * u;
    }
    const double mean = swu / sw;
    const double own = mean_deviation(s, w);
    const double c = rng.normal() * 3;
    const double other = mean_deviation(s, w, c);
    CHECK(own <= other + 1e-12);
    CHECK(other - own == doctest::Approx((mean - c) * (mean - c)).epsilon(1e-9));
    CHECK(mean_deviation(s, w, mean) == doctest::Approx(own).epsilon(1e-12));
  }
}
