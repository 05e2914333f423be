#include <catch_amalgamated.hpp>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <cmath>
#include <sstream>

#include "jsde/levy_measure.hpp"

using namespace jsde;
using Catch::Approx;

TEST_CASE("stable tail moments match closed forms and an independent quadrature", "[levy]") {
  const auto nu = LevyMeasure::stable(1.5);
  CHECK(nu.tail_first_moment(1.0) == Approx(2.0).epsilon(1e-14));
  CHECK(nu.truncated_second_moment(1.0) == Approx(2.0).epsilon(1e-14));

  boost::math::quadrature::exp_sinh<double> es;
  boost::math::quadrature::tanh_sinh<double> ts;
  for (double x : {0.01, 0.3, 1.0, 7.0}) {
    const double g = es.integrate([](double z) { return std::pow(z, -1.5); }, x, std::numeric_limits<double>::infinity());
    const double h = ts.integrate([](double z) { return std::pow(z, -0.5); }, 0.0, x);
    CHECK(nu.tail_first_moment(x) == Approx(g).epsilon(1e-9));
    CHECK(nu.truncated_second_moment(x) == Approx(h).epsilon(1e-9));
  }
}

TEST_CASE("point mass tail moments", "[levy]") {
  const auto pm = LevyMeasure::point_mass(1.0, 1.0);
  CHECK(pm.tail_first_moment(2.0) == 0.0);
  CHECK(pm.tail_first_moment(0.5) == 1.0);
  CHECK(LevyMeasure::point_mass(1.0, 3.0).truncated_second_moment(2.0) == 3.0);
}

TEST_CASE("domain and integrability errors", "[levy]") {
  const auto nu = LevyMeasure::stable(1.5);
  CHECK_THROWS_AS(nu.tail_first_moment(0.0), DomainError);
  CHECK_THROWS_AS(nu.truncated_second_moment(-1.0), DomainError);
  CHECK_THROWS_AS(nu.truncated_first_moment(1.0), IntegrabilityError);
  CHECK_THROWS_AS(LevyMeasure::stable(2.5), DomainError);
  // density z^-2.5 at infinity still fine; z^-1.5 upper tail breaks the driver contract
  Tabulated t{{0.1, 1.0, 10.0}, {1.0, 1.0, 1.0}, {}, {TailDescriptor::Kind::Power, -1.5}};
  CHECK_THROWS(LevyMeasure(t, MeasureRole::CompensatedDriver));
}

TEST_CASE("finite activity and tempered measures integrate consistently", "[levy]") {
  const auto fa = LevyMeasure::finite_activity(1.0, JumpLaw::uniform(0.0, 1.0));
  // G(x) = (1 - x^2)/2 for uniform(0,1) jumps at rate 1
  for (double x : {0.1, 0.5, 0.9}) CHECK(fa.tail_first_moment(x) == Approx((1.0 - x * x) / 2.0).epsilon(1e-9));
  CHECK(fa.tail_mass(0.25) == Approx(0.75));
  const auto tem = LevyMeasure::tempered(1.5, 1.0, 2.0);
  boost::math::quadrature::exp_sinh<double> es;
  const double g = es.integrate([](double z) { return std::pow(z, -1.5) * std::exp(-2.0 * z); }, 0.5,
                                std::numeric_limits<double>::infinity());
  CHECK(tem.tail_first_moment(0.5) == Approx(g).epsilon(1e-8));
}

TEST_CASE("monotonicity and integration by parts on the scan grid", "[levy]") {
  const std::vector<LevyMeasure> ms{LevyMeasure::stable(1.2), LevyMeasure::stable(1.8, 0.5),
                                    LevyMeasure::point_mass(0.3, 2.0),
                                    LevyMeasure::finite_activity(2.0, JumpLaw::exponential(3.0)),
                                    LevyMeasure::tempered(1.4, 1.0, 1.0)};
  const LogGrid grid{1e-6, 1.0, 5};
  for (const auto& m : ms) {
    const auto tf = TailFunctions::tabulate(m, grid);
    for (std::size_t i = 0; i + 1 < tf.x.size(); ++i) {
      CHECK(tf.G[i] >= tf.G[i + 1]);
      CHECK(tf.H[i] <= tf.H[i + 1]);
    }
    for (std::size_t i = 0; i < tf.x.size(); i += 5) {
      const double x = tf.x[i];
      // integral of G over (0, x] by an independent route
      boost::math::quadrature::tanh_sinh<double> ts;
      const double intG = m.as<PointMass>()
                              ? std::min(x, 0.3) * 0.6
                              : ts.integrate([&](double z) { return z <= 0.0 ? 0.0 : m.tail_first_moment(z); }, 0.0, x);
      CHECK(std::abs(tf.H[i] + x * tf.G[i] - intG) <= 1e-6 * (1.0 + tf.H[i]));
    }
  }
}

TEST_CASE("stable homogeneity", "[levy]") {
  const auto nu = LevyMeasure::stable(1.7, 2.0);
  for (double x : {1e-4, 0.2, 3.0}) {
    for (double lam : {0.1, 2.0, 50.0}) {
      CHECK(nu.tail_first_moment(lam * x) == Approx(std::pow(lam, -0.7) * nu.tail_first_moment(x)).epsilon(1e-9));
      CHECK(nu.truncated_second_moment(lam * x) ==
            Approx(std::pow(lam, 0.3) * nu.truncated_second_moment(x)).epsilon(1e-9));
    }
  }
}

TEST_CASE("critical exponent estimator", "[levy]") {
  for (double a : {1.2, 1.5, 1.8}) {
    const auto est = estimate_alpha_nu(LevyMeasure::stable(a));
    CHECK(est.alpha == Approx(a).margin(0.05));
    CHECK(est.residual < 1e-6);
  }
  CHECK(estimate_alpha_nu(LevyMeasure::point_mass(1.0, 1.0)).alpha == Approx(1.0).margin(0.05));
  CHECK(estimate_alpha_nu(LevyMeasure::finite_activity(1.0, JumpLaw::uniform(0.0, 1.0))).alpha ==
        Approx(1.0).margin(0.05));
  CHECK_THROWS_AS(estimate_alpha_nu(LevyMeasure::stable(1.5), LogGrid{1e-3, 1.0, 10}), DomainError);
}

TEST_CASE("critical exponent estimator rejects a table with a kink in the smallest decade", "[levy]") {
  // z^-2.5 with a block of extra mass on [2e-8, 5e-8]: log G is far from linear there
  std::vector<double> k, d;
  for (int i = 0; i <= 90; ++i) {
    const double z = std::pow(10.0, -9.0 + 0.1 * i);
    k.push_back(z);
    d.push_back((z > 1.9e-8 && z < 5.1e-8 ? 1e6 : 1.0) * std::pow(z, -2.5));
  }
  const LevyMeasure m(Tabulated{k, d, {TailDescriptor::Kind::Power, -2.5}, {TailDescriptor::Kind::Power, -2.5}},
                      MeasureRole::CompensatedDriver);
  try {
    (void)estimate_alpha_nu(m);
    FAIL("expected EstimationError");
  } catch (const EstimationError& e) {
    CHECK(e.residual() > 0.05);
  }
}

TEST_CASE("small-jump decay check", "[levy]") {
  const auto nu = LevyMeasure::stable(1.5);
  const auto ok = check_small_jump_decay(nu, 1.8);
  CHECK(ok.pass);
  CHECK(ok.slope == Approx(0.3).margin(1e-6));
  const auto edge = check_small_jump_decay(nu, 1.5);
  CHECK_FALSE(edge.pass);
  CHECK(edge.values.front() == Approx(2.0).epsilon(1e-12));
  CHECK(check_small_jump_decay(LevyMeasure::point_mass(1.0, 1.0), 1.5).pass);
}

TEST_CASE("laplace exponent", "[levy]") {
  const auto nu = LevyMeasure::stable(1.5);
  const double c = std::tgamma(0.5) / (1.5 * 0.5);
  CHECK(c == Approx(2.3633).margin(1e-4));
  CHECK(laplace_exponent(nu, 1.0) == Approx(c).epsilon(1e-8));
  CHECK(laplace_exponent(nu, 2.0) == Approx(std::pow(2.0, 1.5) * laplace_exponent(nu, 1.0)).epsilon(1e-8));
  CHECK(laplace_exponent(nu, 0.0) == 0.0);
  for (double a : {1.2, 1.8}) {
    CHECK(laplace_exponent(LevyMeasure::stable(a), 1.0) == Approx(stable_laplace_coefficient(a)).epsilon(1e-8));
  }
  // non-negative and convex on a grid
  const auto fa = LevyMeasure::finite_activity(2.0, JumpLaw::exponential(1.0));
  for (const LevyMeasure* m : {&nu, &fa}) {
    std::vector<double> v;
    for (int i = 0; i <= 40; ++i) v.push_back(laplace_exponent(*m, 0.1 * i));
    for (std::size_t i = 1; i + 1 < v.size(); ++i) {
      CHECK(v[i] >= 0.0);
      CHECK(v[i + 1] - 2.0 * v[i] + v[i - 1] >= -1e-9);
    }
  }
  CHECK_THROWS_AS(laplace_exponent(LevyMeasure::point_mass(1.0, 1.0, MeasureRole::Subordinator), 1.0), DomainError);
}

TEST_CASE("tabulated measures load from two-column text", "[levy]") {
  std::istringstream in("# z density\n0.1 10\n0.5 2\n1.0 1\n2.0 0.25\n");
  const auto t = read_tabulated(in, {TailDescriptor::Kind::Power, -1.5}, {TailDescriptor::Kind::Exponential, 1.0});
  CHECK(t.knots.size() == 4);
  const LevyMeasure m(t, MeasureRole::CompensatedDriver);
  CHECK(m.density(0.5) == Approx(2.0));
  // log-log interpolation between knots
  CHECK(m.density(std::sqrt(0.5)) == Approx(std::sqrt(2.0)).epsilon(1e-12));
  std::istringstream bad("0.5 1\n0.2 1\n");
  CHECK_THROWS_AS(read_tabulated(bad), FormatError);
  std::istringstream neg("0.5 -1\n0.7 1\n");
  CHECK_THROWS(LevyMeasure(read_tabulated(neg), MeasureRole::CompensatedDriver));
}
