#include <catch_amalgamated.hpp>

#include <algorithm>
#include <boost/math/quadrature/exp_sinh.hpp>
#include <cmath>
#include <complex>
#include <numbers>

#include "jsde/noise.hpp"

using namespace jsde;
using Catch::Approx;

namespace {

std::shared_ptr<const NoiseModel> stable_model(double eps, std::uint64_t seed = 1, bool brown = true,
                                               SmallJumpMode mode = SmallJumpMode::Auto) {
  NoiseSpec s;
  s.has_brownian = brown;
  s.nu0 = LevyMeasure::stable(1.5);
  s.epsilon = eps;
  s.small_mode = mode;
  s.master_seed = seed;
  return NoiseModel::build(s, 100);
}

// P(X <= x) for the law with E exp(-uX) = exp(c u^alpha), by Gil-Pelaez inversion
double stable_cdf(double alpha, double c, double x) {
  const double pi = std::numbers::pi;
  auto integrand = [&](double th) {
    // log E exp(i th X) = c (-i th)^alpha on the principal branch
    const std::complex<double> w = std::pow(std::complex<double>(0.0, -th), alpha);
    const std::complex<double> phi = std::exp(c * w - std::complex<double>(0.0, th * x));
    return phi.imag() / th;
  };
  boost::math::quadrature::exp_sinh<double> es;
  return 0.5 - es.integrate(integrand, 0.0, std::numeric_limits<double>::infinity()) / pi;
}

double stable_median(double alpha) {
  double lo = -3.0, hi = 3.0;
  for (int i = 0; i < 60; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (stable_cdf(alpha, 1.0, mid) < 0.5) lo = mid; else hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

TEST_CASE("expected large-jump count and poisson moments", "[noise]") {
  const auto model = stable_model(0.01);
  const double rate = std::pow(0.01, -1.5) / 1.5;
  CHECK(model->rate0 == Approx(rate).epsilon(1e-12));
  CHECK(rate == Approx(666.67).margin(0.01));
  const int N = 10000;
  double s = 0, ss = 0;
  for (int p = 0; p < N; ++p) {
    const double k = static_cast<double>(sample_noise(model, 4, p).jumps.size());
    s += k;
    ss += k * k;
  }
  const double mean = s / N, var = (ss - N * mean * mean) / (N - 1);
  CHECK(std::abs(mean - rate) < 5.0 * std::sqrt(rate / N));
  CHECK(std::abs(var - rate) < 5.0 * rate * std::sqrt(2.0 / N));
}

TEST_CASE("brownian marginal", "[noise]") {
  NoiseSpec s;
  s.master_seed = 77;
  const auto model = NoiseModel::build(s, 1000);
  const auto grid = uniform_grid(1.0, 1000);
  const int N = 100000;
  double ss = 0.0;
  for (int p = 0; p < N; ++p) {
    const auto path = sample_noise(model, grid, p);
    double b = 0.0;
    for (double x : path.brownian) b += x;
    ss += b * b;
  }
  CHECK(ss / N == Approx(1.0).margin(0.02));
}

TEST_CASE("gaussian substitute variance", "[noise]") {
  const auto model = stable_model(0.01, 3, true, SmallJumpMode::GaussianSubstitute);
  CHECK(model->small_variance0 * 0.001 == Approx(2e-4).epsilon(1e-12));
  // default mode picks the substitute when H(eps)/eps^2 is large
  CHECK(stable_model(0.01)->mode == SmallJumpMode::GaussianSubstitute);
  CHECK(stable_model(10.0)->mode == SmallJumpMode::CompensateOnly);
  const auto grid = uniform_grid(1.0, 1000);
  double ss = 0.0;
  int n = 0;
  for (int p = 0; p < 200; ++p) {
    for (double x : sample_noise(model, grid, p).small) {
      ss += x * x;
      ++n;
    }
  }
  CHECK(ss / n == Approx(2e-4).epsilon(0.02));
  CHECK(sample_noise(stable_model(0.01, 3, true, SmallJumpMode::CompensateOnly), grid, 0).small ==
        std::vector<double>(1000, 0.0));
}

TEST_CASE("jump sizes follow the normalized restricted tail", "[noise]") {
  const double crit = 1.628 / std::sqrt(10000.0);  // KS, significance 0.01
  SECTION("stable closed form") {
    const auto model = stable_model(0.01, 5);
    std::vector<double> z;
    for (int p = 0; z.size() < 10000; ++p) {
      for (const Jump& j : sample_noise(model, 2, p).jumps) z.push_back(j.z);
    }
    z.resize(10000);
    std::sort(z.begin(), z.end());
    double d = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
      const double F = 1.0 - std::pow(z[i] / 0.01, -1.5);
      d = std::max({d, std::abs(F - static_cast<double>(i) / z.size()), std::abs(F - (i + 1.0) / z.size())});
    }
    CHECK(d < crit);
  }
  SECTION("tabulated inverse table") {
    std::vector<double> k, dens;
    for (int i = 0; i <= 40; ++i) {
      const double x = std::pow(10.0, -2.0 + 0.1 * i);
      k.push_back(x);
      dens.push_back(std::pow(x, -2.2) * std::exp(-x));
    }
    NoiseSpec s;
    s.nu0 = LevyMeasure(Tabulated{k, dens, {TailDescriptor::Kind::Power, -2.2}, {TailDescriptor::Kind::Exponential, 1.0}},
                        MeasureRole::CompensatedDriver);
    s.epsilon = 0.05;
    s.master_seed = 9;
    const auto model = NoiseModel::build(s, 10);
    const double rate = s.nu0->tail_mass(0.05);
    CHECK(model->rate0 == Approx(rate).epsilon(1e-8));
    const JumpSizeSampler& sam = *model->sizes0;
    // inversion accuracy in probability
    for (double u : {1e-6, 0.01, 0.3, 0.77, 0.999}) {
      CHECK(std::abs(s.nu0->tail_mass(sam.sample(u)) / rate - u) < 1e-9);
    }
    std::vector<double> z;
    for (int p = 0; z.size() < 10000; ++p) {
      for (const Jump& j : sample_noise(model, 2, p).jumps) z.push_back(j.z);
    }
    z.resize(10000);
    std::sort(z.begin(), z.end());
    double d = 0.0;
    for (std::size_t i = 0; i < z.size(); i += 7) {
      const double F = 1.0 - s.nu0->tail_mass(z[i]) / rate;
      d = std::max({d, std::abs(F - static_cast<double>(i) / z.size()), std::abs(F - (i + 1.0) / z.size())});
    }
    CHECK(d < crit);
  }
}

TEST_CASE("components are independent", "[noise]") {
  const auto model = stable_model(0.1, 11);
  const int N = 10000;
  std::vector<double> b(N), m(N);
  for (int p = 0; p < N; ++p) {
    const auto path = sample_noise(model, 8, p);
    for (double x : path.brownian) b[p] += x;
    for (const Jump& j : path.jumps) m[p] += j.z;
  }
  const auto corr = [&] {
    double mb = 0, mm = 0;
    for (int i = 0; i < N; ++i) { mb += b[i]; mm += m[i]; }
    mb /= N; mm /= N;
    double sbm = 0, sbb = 0, smm = 0;
    for (int i = 0; i < N; ++i) {
      sbm += (b[i] - mb) * (m[i] - mm);
      sbb += (b[i] - mb) * (b[i] - mb);
      smm += (m[i] - mm) * (m[i] - mm);
    }
    return sbm / std::sqrt(sbb * smm);
  }();
  CHECK(std::abs(corr) <= 3.0 / std::sqrt(N));
}

TEST_CASE("sampling is reproducible", "[noise]") {
  const auto a = sample_noise(stable_model(0.05, 21), 64, 5);
  const auto b = sample_noise(stable_model(0.05, 21), 64, 5);
  CHECK(a.brownian == b.brownian);
  CHECK(a.small == b.small);
  CHECK(a.jumps == b.jumps);
  CHECK(a.provenance == b.provenance);
  const auto c = sample_noise(stable_model(0.05, 21), 64, 6);
  CHECK(a.brownian != c.brownian);
}

TEST_CASE("spec errors", "[noise]") {
  NoiseSpec s;
  s.nu0 = LevyMeasure::point_mass(1.0, 1.0, MeasureRole::Subordinator);
  CHECK_THROWS_AS(NoiseModel::build(s, 10), SpecError);
  NoiseSpec t;
  t.nu0 = LevyMeasure::stable(1.5);
  t.epsilon = 1e-9;
  CHECK_THROWS_AS(NoiseModel::build(t, 10), SpecError);
  NoiseSpec u;
  u.nu1 = LevyMeasure::tempered(0.5, 1.0, 1.0, MeasureRole::Subordinator);
  CHECK_THROWS_AS(NoiseModel::build(u, 10), SpecError);
  u.epsilon1 = 0.01;
  CHECK(NoiseModel::build(u, 10)->rate1 > 0.0);
  const auto model = stable_model(0.1);
  CHECK_THROWS_AS(sample_noise(model, std::vector<double>{0.0, 0.5, 0.9}, 0), SpecError);
}

TEST_CASE("default threshold targets ten root cells", "[noise]") {
  NoiseSpec s;
  s.nu0 = LevyMeasure::stable(1.5);
  const auto model = NoiseModel::build(s, 400);
  CHECK(model->rate0 == Approx(200.0).epsilon(1e-6));
}

TEST_CASE("refinement", "[noise]") {
  const auto model = stable_model(0.05, 31, true, SmallJumpMode::GaussianSubstitute);
  const auto coarse = sample_noise(model, 8, 3);
  const auto g16 = uniform_grid(1.0, 16), g64 = uniform_grid(1.0, 64);
  const auto once = refine(coarse, g64);
  const auto twice = refine(refine(coarse, g16), g64);
  SECTION("bridge sums are bit-exact") {
    CHECK(coarse_sum(g64, once.brownian, coarse.grid) == coarse.brownian);
    CHECK(coarse_sum(g64, once.small, coarse.grid) == coarse.small);
  }
  SECTION("staged and direct refinement agree") {
    CHECK(once.brownian == twice.brownian);
    CHECK(once.small == twice.small);
  }
  SECTION("jumps and provenance") {
    CHECK(once.jumps == coarse.jumps);
    CHECK(once.provenance.cells == 64);
    CHECK(once.provenance.master_seed == coarse.provenance.master_seed);
    CHECK(once.provenance.stream_index == coarse.provenance.stream_index);
  }
  SECTION("non-superset grids are rejected") {
    CHECK_THROWS_AS(refine(coarse, uniform_grid(1.0, 12)), RefinementError);
    CHECK_THROWS_AS(refine(coarse, uniform_grid(1.0, 4)), RefinementError);
  }
  SECTION("refined increments have the right variance") {
    double ss = 0.0;
    int n = 0;
    for (int p = 0; p < 400; ++p) {
      const auto f = refine(sample_noise(model, 4, p), g64);
      for (double x : f.brownian) { ss += x * x; ++n; }
    }
    CHECK(ss / n == Approx(1.0 / 64).epsilon(0.03));
  }
}

TEST_CASE("walking events splits cells at jump epochs", "[noise]") {
  const auto model = stable_model(0.05, 41);
  const auto path = sample_noise(model, 16, 2);
  double sb = 0.0, total = 0.0, t = 0.0;
  std::size_t jumps = 0;
  walk_events(path, [&](const Substep& s) {
    CHECK(s.t_end >= t);
    CHECK(s.dt == Approx(s.t_end - t).margin(1e-15));
    t = s.t_end;
    sb += s.dB;
    if (s.jump) ++jumps;
  });
  for (double x : path.brownian) total += x;
  CHECK(jumps == path.jumps.size());
  CHECK(sb == Approx(total).margin(1e-12));
  CHECK(t == 1.0);
}

TEST_CASE("stable increments", "[noise]") {
  const RandomStream rs(99, 0);
  SECTION("laplace transform") {
    for (double alpha : {1.2, 1.5, 1.8}) {
      Lane lane(rs, Purpose::Generic, static_cast<std::uint64_t>(alpha * 1e6));
      const int N = 100000;
      double s = 0.0;
      for (int i = 0; i < N; ++i) s += std::exp(-stable_increment(alpha, 1.0, 1.0, lane));
      const double target = std::exp(1.0);
      const double se = std::sqrt((std::exp(std::pow(2.0, alpha)) - std::exp(2.0)) / N);
      CHECK(std::abs(s / N - target) <= std::max(0.02 * target, 3.0 * se));
    }
  }
  SECTION("additivity in dt") {
    Lane lane(rs, Purpose::Generic, 1u << 30);
    const int N = 100000;
    double one = 0.0, two = 0.0;
    for (int i = 0; i < N; ++i) {
      one += std::exp(-stable_increment(1.5, 1.0, 1.0, lane));
      two += std::exp(-(stable_increment(1.5, 1.0, 0.5, lane) + stable_increment(1.5, 1.0, 0.5, lane)));
    }
    CHECK(two / N == Approx(one / N).epsilon(0.02));
  }
  SECTION("median against Gil-Pelaez inversion") {
    const double med = stable_median(1.5);
    Lane lane(rs, Purpose::Generic, 1u << 31);
    const int N = 100000;
    int below = 0;
    for (int i = 0; i < N; ++i) below += stable_increment(1.5, 1.0, 1.0, lane) <= med;
    CHECK(std::abs(static_cast<double>(below) / N - 0.5) < 4.0 * std::sqrt(0.25 / N));
  }
  SECTION("centered: truncated mean matches the tail correction") {
    // E[min(X, M)] = -E[(X - M)^+] ~ -s M^{1-alpha} / (alpha (alpha - 1)) with s the density scale
    const double alpha = 1.5, M = 1e3;
    const double s = alpha * (alpha - 1.0) / std::tgamma(2.0 - alpha);
    const double expect = -s * std::pow(M, 1.0 - alpha) / (alpha * (alpha - 1.0));
    Lane lane(rs, Purpose::Generic, std::uint64_t{1} << 33);
    const int N = 1000000;
    double sum = 0.0, sq = 0.0;
    for (int i = 0; i < N; ++i) {
      const double x = std::min(stable_increment(alpha, 1.0, 1.0, lane), M);
      sum += x;
      sq += x * x;
    }
    const double mean = sum / N, se = std::sqrt((sq / N - mean * mean) / N);
    CHECK(std::abs(mean - expect) < 4.0 * se);
  }
  CHECK_THROWS_AS(stable_increment(2.0, 1.0, 1.0, 0.3, 0.4), DomainError);
}

TEST_CASE("driver values on the grid", "[noise]") {
  NoiseSpec s;
  s.has_brownian = false;
  s.nu0 = LevyMeasure::point_mass(1.0, 2.0);
  s.epsilon = 0.5;
  s.master_seed = 4;
  const auto model = NoiseModel::build(s, 4);
  const auto path = sample_noise(model, 4, 0);
  const auto L = driver0_on_grid(path);
  // compensated: jumps of size 1 minus 2 t
  CHECK(L.back() == Approx(static_cast<double>(path.jumps.size()) - 2.0).margin(1e-12));
}
