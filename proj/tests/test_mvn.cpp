#include "msnmix/mvn.hpp"

#include "msnmix/special.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace msnmix;

TEST_CASE("density at the mode of a standard bivariate normal") {
  VectorXd z = VectorXd::Zero(2);
  CHECK(mvn_pdf(z, z, MatrixXd::Identity(2, 2)) == doctest::Approx(1.0 / (2.0 * M_PI)));
}

TEST_CASE("density determinant factorization for diagonal dispersion") {
  VectorXd mu(2);
  mu << -1.3, 2.2;
  MatrixXd s = MatrixXd::Zero(2, 2);
  s(0, 0) = 4.0;
  s(1, 1) = 9.0;
  CHECK(mvn_pdf(mu, mu, s) == doctest::Approx(1.0 / (2.0 * M_PI * 6.0)));
}

TEST_CASE("3-d density integrates to one (quadrature oracle)") {
  std::mt19937_64 rng(42);
  VectorXd mu = oracle::random_vector(3, rng);
  MatrixXd s = oracle::random_spd(3, rng);
  double sd0 = std::sqrt(s(0, 0)), sd1 = std::sqrt(s(1, 1)), sd2 = std::sqrt(s(2, 2));
  double mass = oracle::integrate_3d(
      [&](double x, double y, double z) {
        VectorXd v(3);
        v << x, y, z;
        return mvn_pdf(v, mu, s);
      },
      mu[0] - 8 * sd0, mu[0] + 8 * sd0, mu[1] - 8 * sd1, mu[1] + 8 * sd1, mu[2] - 8 * sd2,
      mu[2] + 8 * sd2, 6);
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("density rejects singular dispersion") {
  MatrixXd s(2, 2);
  s << 1.0, 1.0, 1.0, 1.0;
  CHECK_THROWS_AS(mvn_pdf(VectorXd::Zero(2), VectorXd::Zero(2), s), singularity_error);
}

TEST_CASE("rectangle probability: total mass and half line") {
  Rectangle all = Rectangle::whole_space(3);
  std::mt19937_64 rng(1);
  MatrixXd s = oracle::random_spd(3, rng);
  CHECK(mvn_rect_prob(all, VectorXd::Zero(3), s) == doctest::Approx(1.0));

  Rectangle half{VectorXd::Constant(1, 0.0), VectorXd::Constant(1, kInf)};
  CHECK(mvn_rect_prob(half, VectorXd::Zero(1), MatrixXd::Identity(1, 1)) ==
        doctest::Approx(0.5));
}

TEST_CASE("bivariate orthant probability matches the arcsine closed form") {
  MatrixXd s(2, 2);
  s << 1.0, 0.5, 0.5, 1.0;
  Rectangle orthant{VectorXd::Zero(2), VectorXd::Constant(2, kInf)};
  double expected = 0.25 + std::asin(0.5) / (2.0 * M_PI);
  CHECK(mvn_rect_prob(orthant, VectorXd::Zero(2), s) == doctest::Approx(expected).epsilon(1e-10));

  // General rho spot checks.
  for (double rho : {-0.9, -0.3, 0.0, 0.6, 0.95}) {
    MatrixXd c(2, 2);
    c << 1.0, rho, rho, 1.0;
    double p = mvn_rect_prob(orthant, VectorXd::Zero(2), c);
    CHECK(p == doctest::Approx(0.25 + std::asin(rho) / (2.0 * M_PI)).epsilon(1e-10));
  }
}

TEST_CASE("bivariate rectangles match 2-d quadrature") {
  std::mt19937_64 rng(5);
  for (int rep = 0; rep < 5; ++rep) {
    MatrixXd s = oracle::random_spd(2, rng);
    VectorXd mu = oracle::random_vector(2, rng);
    Rectangle r{mu - VectorXd::Constant(2, 1.0), mu + VectorXd::Constant(2, 1.7)};
    double quad = oracle::integrate_2d(
        [&](double x, double y) {
          VectorXd v(2);
          v << x, y;
          return mvn_pdf(v, mu, s);
        },
        r.lower[0], r.upper[0], r.lower[1], r.upper[1], 12);
    CHECK(mvn_rect_prob(r, mu, s) == doctest::Approx(quad).epsilon(1e-9));
  }
}

TEST_CASE("QMC path (p = 3, 4) agrees with quadrature and tensor closed forms") {
  std::mt19937_64 rng(9);
  MatrixXd s = oracle::random_spd(3, rng);
  VectorXd mu = oracle::random_vector(3, rng);
  Rectangle r{mu - VectorXd::Constant(3, 1.2), mu + VectorXd::Constant(3, 0.9)};
  double quad = oracle::integrate_3d(
      [&](double x, double y, double z) {
        VectorXd v(3);
        v << x, y, z;
        return mvn_pdf(v, mu, s);
      },
      r.lower[0], r.upper[0], r.lower[1], r.upper[1], r.lower[2], r.upper[2], 8);
  double err = 0.0;
  double p3 = mvn_rect_prob_err(r, mu, s, 1e-6, &err);
  CHECK(std::abs(p3 - quad) <= 3e-6);
  CHECK(err <= 1e-6);

  // Independent coordinates: product of univariate interval masses.
  MatrixXd d4 = MatrixXd::Zero(4, 4);
  d4.diagonal() << 1.0, 2.0, 0.5, 3.0;
  Rectangle r4{VectorXd::Constant(4, -0.7), VectorXd::Constant(4, 1.1)};
  double expect = 1.0;
  for (int k = 0; k < 4; ++k) {
    double sd = std::sqrt(d4(k, k));
    expect *= norm_interval(-0.7 / sd, 1.1 / sd);
  }
  CHECK(mvn_rect_prob(r4, VectorXd::Zero(4), d4) == doctest::Approx(expect).epsilon(2e-6));
}

TEST_CASE("deterministic: same inputs give identical probabilities") {
  std::mt19937_64 rng(13);
  MatrixXd s = oracle::random_spd(4, rng);
  Rectangle r{VectorXd::Constant(4, -1.0), VectorXd::Constant(4, 2.0)};
  double p1 = mvn_rect_prob(r, VectorXd::Zero(4), s);
  double p2 = mvn_rect_prob(r, VectorXd::Zero(4), s);
  CHECK(p1 == p2);
}

TEST_CASE("invalid rectangles and empty intervals") {
  Rectangle bad{VectorXd::Constant(1, 1.0), VectorXd::Constant(1, 0.0)};
  CHECK_THROWS_AS(mvn_rect_prob(bad, VectorXd::Zero(1), MatrixXd::Identity(1, 1)),
                  invalid_input_error);
  Rectangle empty{VectorXd::Constant(2, -kInf), VectorXd::Constant(2, -kInf)};
  CHECK(mvn_rect_prob(empty, VectorXd::Zero(2), MatrixXd::Identity(2, 2)) == 0.0);
  CHECK_THROWS(mvn_rect_prob(Rectangle{VectorXd(0), VectorXd(0)}, VectorXd(0), MatrixXd(0, 0)));
}
