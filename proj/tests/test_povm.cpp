#include <doctest.h>

#include <cmath>
#include <numeric>

#include "pnr/error.hpp"
#include "pnr/oracle.hpp"
#include "pnr/povm.hpp"

using namespace pnr;

TEST_CASE("reported detector: eta = 0.71, k = 2.55") {
  const PovmElement raw = pi_one_coefficients(0.71, 2.55, 12);
  CHECK_FALSE(raw.normalized);
  CHECK(raw.coeffs[0] == 0.0);
  CHECK(raw.coeffs[1] == doctest::Approx(0.71).epsilon(1e-15));

  const double ratios[] = {0.7010, 0.373, 0.178, 0.080, 0.035};
  for (int n = 2; n <= 6; ++n) {
    CAPTURE(n);
    CHECK(std::abs(raw.coeffs[static_cast<std::size_t>(n)] / raw.coeffs[1] - ratios[n - 2]) <= 0.002);
  }

  const PovmElement norm = normalize_pi_one(raw);
  const double printed[] = {0.418, 0.293, 0.156, 0.0744, 0.0336, 0.0147};
  for (int n = 1; n <= 6; ++n) {
    CAPTURE(n);
    CHECK(std::abs(norm.coeffs[static_cast<std::size_t>(n)] - printed[n - 1]) <= 0.005);
  }
  CHECK(std::abs(normalize_pi_one(pi_one_coefficients(0.71, 2.55, 9)).coeffs[1] - 0.418) <= 0.002);

  CHECK(std::abs(eta_pnr(raw) - 0.360) <= 0.005);
  CHECK(eta_pnr(pi_one_coefficients(0.71, 6.0)) > eta_pnr(raw));
}

TEST_CASE("closed-form sum matches N (q^n - r^n)") {
  for (double eta : {0.1, 0.5, 0.71, 1.0}) {
    for (double k : {0.0, 1.0, 2.55, 7.0}) {
      const auto e = pi_one_coefficients(eta, k, 20);
      const double ports = std::exp2(k), r = 1.0 - eta, q = r + eta / ports;
      for (int n = 1; n <= 20; ++n) {
        CHECK(e.coeffs[static_cast<std::size_t>(n)] ==
              doctest::Approx(ports * (std::pow(q, n) - std::pow(r, n))).epsilon(1e-10));
      }
    }
  }
}

TEST_CASE("coefficients decrease past n = 2 at the reported parameters") {
  const auto e = pi_one_coefficients(0.71, 2.55, 30);
  for (std::size_t n = 1; n < e.coeffs.size(); ++n) CHECK(e.coeffs[n] > 0.0);
  for (std::size_t n = 2; n + 1 < e.coeffs.size(); ++n) CHECK(e.coeffs[n + 1] < e.coeffs[n]);
}

TEST_CASE("ideal detector limit") {
  const auto e = pi_one_coefficients(1.0, 60.0, 10);
  CHECK(e.coeffs[1] == 1.0);
  for (std::size_t n = 2; n < e.coeffs.size(); ++n) CHECK(e.coeffs[n] < 1e-17);
  CHECK(eta_pnr(e) == doctest::Approx(1.0).epsilon(1e-12));

  const PovmElement exact{1.0, 3.0, {0.0, 1.0}, false};
  // The sum continues past the stored range with the true tree coefficients,
  // so an element that only stores c_1 = 1 still sees its own multiphoton tail.
  CHECK(eta_pnr(exact) < 1.0);
}

TEST_CASE("two photons through a lossy depth-1 tree") {
  CHECK(pi_one_coefficients(0.5, 1.0, 2).coeffs[2] == doctest::Approx(0.625).epsilon(1e-15));
}

TEST_CASE("agreement with explicit routing through the tree") {
  for (int k = 1; k <= 3; ++k) {
    for (double eta : {0.3, 0.71, 1.0}) {
      const auto e = pi_one_coefficients(eta, k, 6);
      for (int n = 0; n <= 6; ++n) {
        CAPTURE(k);
        CAPTURE(n);
        CHECK(std::abs(povm_click_probability(n, eta, k) - e.coeffs[static_cast<std::size_t>(n)]) <= 1e-12);
      }
    }
  }
}

TEST_CASE("normalization") {
  const auto e = normalize_pi_one(pi_one_coefficients(0.4, 1.7, 15));
  CHECK(e.normalized);
  CHECK(std::accumulate(e.coeffs.begin(), e.coeffs.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
  const auto again = normalize_pi_one(e);
  for (std::size_t n = 0; n < e.coeffs.size(); ++n) CHECK(again.coeffs[n] == doctest::Approx(e.coeffs[n]).epsilon(1e-15));
  CHECK_THROWS_AS(normalize_pi_one(pi_one_coefficients(0.0, 2.0, 6)), InvalidArgument);
  CHECK_THROWS_AS(eta_pnr(e), InvalidArgument);
}

TEST_CASE("exact tail") {
  const double eta = 0.71, k = 2.55;
  const auto long_sum = pi_one_coefficients(eta, k, 400);
  const double beyond = std::accumulate(long_sum.coeffs.begin() + 13, long_sum.coeffs.end(), 0.0);
  CHECK(pi_one_tail(eta, k, 12) == doctest::Approx(beyond).epsilon(1e-9));
  CHECK(std::isinf(pi_one_tail(0.5, 0.0, 12)));
}

TEST_CASE("eta_pnr grows with efficiency and depth") {
  for (double eta = 0.1; eta <= 1.0; eta += 0.1) {
    double prev = -std::numeric_limits<double>::infinity();
    for (double k = 0.5; k <= 10.0; k += 0.5) {
      const double v = eta_pnr(pi_one_coefficients(eta, k));
      CHECK(v > prev);
      prev = v;
    }
  }
  for (double k : {0.5, 2.55, 8.0}) {
    double prev = -std::numeric_limits<double>::infinity();
    for (double eta = 0.05; eta <= 1.0; eta += 0.05) {
      const double v = eta_pnr(pi_one_coefficients(eta, k));
      CHECK(v > prev);
      prev = v;
    }
  }
}

TEST_CASE("threshold detector has no finite discrimination efficiency") {
  CHECK_THROWS_AS(eta_pnr(pi_one_coefficients(0.71, 0.0)), DivergenceError);
  CHECK_THROWS_AS(pi_one_coefficients(1.5, 1.0), InvalidArgument);
  CHECK_THROWS_AS(pi_one_coefficients(0.5, -1.0), InvalidArgument);
}
