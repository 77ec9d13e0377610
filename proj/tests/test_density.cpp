#include <doctest.h>

#include <cmath>
#include <vector>

#include "sep/density.hpp"
#include "sep/errors.hpp"
#include "sep/exact.hpp"
#include "sep/experiment.hpp"

using namespace sep;

namespace {

DegreePreservingSpec plain_spec(int p, double beta) {
  return make_degree_preserving_spec(p, beta);
}

// Residual of the left-block stationary equation at site j.
double f05a_residual(const DegreePreservingSpec& spec,
                     const DensityProfile& rho, int j) {
  const int p = spec.p;
  double v = spec.reservoir_rate(j) *
             (spec.reservoir_density(j) - rho.at(j));
  for (int k = -p; k <= 0; ++k) {
    if (k == j) continue;
    v += spec.copy_rate(j, k) * (rho.at(k) - rho.at(j));
    v += spec.anticopy_rate(j, k) * (1.0 - rho.at(k) - rho.at(j));
  }
  if (j == -p)
    v += rho.at(-p + 1) - rho.at(-p);
  else if (j == 0)
    v += rho.at(-1) - rho.at(0);
  else
    v += rho.at(j + 1) + rho.at(j - 1) - 2.0 * rho.at(j);
  return v;
}

}  // namespace

TEST_SUITE_BEGIN("density");

TEST_CASE("uniform reservoirs pin the block at alpha") {
  auto spec = plain_spec(2, 0.5);
  spec.set_reservoir(-2, 0.3, 0.7);
  spec.set_reservoir(0, 1.2, 0.7);
  const auto rho = solve_left_density(spec);
  for (int j = -2; j <= 0; ++j) CHECK(rho.at(j) == doctest::Approx(0.7).epsilon(1e-13));
}

TEST_CASE("inverse-copy dynamics alone pins the block at one half") {
  auto spec = plain_spec(2, 0.5);
  spec.a(0, 2) = 0.8;  // a_{-2,0}
  spec.a(2, 1) = 0.4;  // a_{0,-1}
  const auto rho = solve_left_density(spec);
  for (int j = -2; j <= 0; ++j) CHECK(rho.at(j) == doctest::Approx(0.5).epsilon(1e-13));
}

TEST_CASE("non-ergodic specs are refused") {
  auto spec = plain_spec(1, 0.5);
  spec.c(1, 0) = 1.0;
  CHECK_THROWS_AS(solve_left_density(spec), SingularSystem);
  CHECK_THROWS_AS(solve_finite_one_point(spec, 8), SingularSystem);
}

TEST_CASE("left density matches the exact stationary state of the block chain") {
  for (int i = 0; i < 8; ++i) {
    const auto spec = random_degree_preserving_spec(
        120 + i, 2, ErgodicityTag::unique_stationary);
    const auto rho = solve_left_density(spec);
    for (int j = -2; j <= 0; ++j)
      CHECK(std::abs(f05a_residual(spec, rho, j)) <= 1e-12);

    const auto G = left_block_generator(spec);
    const auto mu = stationary_distribution(G);
    const auto exact = observable_density(G, mu);
    for (int j = -2; j <= 0; ++j)
      CHECK(rho.at(j) == doctest::Approx(exact.at(j)).epsilon(1e-9));
  }
}

TEST_CASE("hat extension solves the sign-doubled system") {
  // For specs with a != 0: extend rho by rho_hat(+1,k) = rho(k) and
  // rho_hat(-1,k) = 1 - rho(k); both sign rows must satisfy the extended
  // stationary equations.
  for (int i = 0; i < 6; ++i) {
    const auto spec = random_degree_preserving_spec(
        77 + i, 2, ErgodicityTag::unique_stationary);
    if (spec.sum_a() == 0.0) continue;
    const auto rho = solve_left_density(spec);
    const int p = spec.p;
    auto rho_hat = [&](int sigma, int k) {
      return sigma > 0 ? rho.at(k) : 1.0 - rho.at(k);
    };
    for (int sigma : {1, -1}) {
      for (int j = -p; j <= 0; ++j) {
        const double alpha_eff = sigma > 0 ? spec.reservoir_density(j)
                                           : 1.0 - spec.reservoir_density(j);
        double v = spec.reservoir_rate(j) * (alpha_eff - rho_hat(sigma, j));
        for (int k = -p; k <= 0; ++k) {
          if (k == j) continue;
          v += spec.copy_rate(j, k) * (rho_hat(sigma, k) - rho_hat(sigma, j));
          v += spec.anticopy_rate(j, k) *
               (rho_hat(-sigma, k) - rho_hat(sigma, j));
        }
        if (j == -p)
          v += rho_hat(sigma, -p + 1) - rho_hat(sigma, -p);
        else if (j == 0)
          v += rho_hat(sigma, -1) - rho_hat(sigma, 0);
        else
          v += rho_hat(sigma, j + 1) + rho_hat(sigma, j - 1) -
               2.0 * rho_hat(sigma, j);
        CHECK(std::abs(v) <= 1e-12);
      }
    }
  }
}

TEST_CASE("equilibrium finite system is flat at beta") {
  auto spec = plain_spec(1, 0.6);
  spec.set_reservoir(-1, 0.5, 0.6);
  spec.set_reservoir(0, 1.5, 0.6);
  const auto prof = solve_finite_one_point(spec, 12);
  for (int k = -1; k <= 11; ++k)
    CHECK(prof.at(k) == doctest::Approx(0.6).epsilon(1e-12));
}

TEST_CASE("bulk interpolates linearly between rho_N(0) and beta") {
  const auto spec = random_degree_preserving_spec(
      5, 2, ErgodicityTag::unique_stationary);
  const auto prof = solve_finite_one_point(spec, 10);
  CHECK(prof.interpolation_defect <= 1e-12);
  const double expect5 = 0.5 * spec.beta + 0.5 * prof.at(0);
  CHECK(prof.at(5) == doctest::Approx(expect5).epsilon(1e-12));
  // forced arithmetic: endpoints 0.2 / 0.8 meet at 0.5 in the middle
  CHECK(macroscopic_profile(0.2, 0.8)(0.5) == doctest::Approx(0.5));
}

TEST_CASE("finite one-point density matches the full exact chain") {
  for (int i = 0; i < 5; ++i) {
    const auto spec = random_degree_preserving_spec(
        300 + i, 1, ErgodicityTag::unique_stationary);
    const int N = 6;
    const auto prof = solve_finite_one_point(spec, N);

    ModelSpec ms;
    ms.N = N;
    ms.boundary = spec;
    const auto G = build_generator(ms);
    const auto mu = stationary_distribution(G);
    const auto exact = observable_density(G, mu);
    for (int k = -1; k <= N - 1; ++k)
      CHECK(prof.at(k) == doctest::Approx(exact.at(k)).epsilon(1e-10));
  }
}

TEST_CASE("block density error decays like 1/N") {
  const auto spec = random_degree_preserving_spec(
      42, 2, ErgodicityTag::unique_stationary);
  const auto rho = solve_left_density(spec);
  std::vector<std::pair<double, double>> points;
  for (int N : {50, 100, 200, 400}) {
    const auto prof = solve_finite_one_point(spec, N);
    points.emplace_back(N, std::abs(prof.at(0) - rho.at(0)));
  }
  const auto fit = fit_power_law(points);
  CHECK(fit.slope <= -0.9);
  CHECK(fit.r2 >= 0.99);
}

TEST_CASE("macroscopic profile endpoints") {
  const auto flat = macroscopic_profile(0.6, 0.6);
  CHECK(flat(0.3) == 0.6);
  const auto ramp = macroscopic_profile(0.0, 1.0);
  CHECK(ramp(0.25) == 0.25);
  CHECK_THROWS_AS(macroscopic_profile(-0.1, 0.5), SpecError);
}

TEST_SUITE_END();
