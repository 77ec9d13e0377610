#include <doctest.h>

#include <bit>
#include <cmath>

#include "sep/errors.hpp"
#include "sep/exact.hpp"
#include "sep/experiment.hpp"

using namespace sep;

namespace {

ModelSpec flip_model(int N, int p, double beta, std::vector<double> table_lex) {
  FlipBoundarySpec b;
  b.p = p;
  b.beta = beta;
  b.table.resize(table_lex.size());
  for (std::uint32_t w = 0; w < table_lex.size(); ++w)
    b.table[reverse_bits(w, p)] = table_lex[w];
  ModelSpec spec;
  spec.N = N;
  spec.boundary = std::move(b);
  return spec;
}

double row_sum(const GeneratorMatrix& G, std::int64_t row) {
  double s = 0.0;
  for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(G.Q, row);
       it; ++it)
    s += it.value();
  return s;
}

}  // namespace

TEST_SUITE_BEGIN("exact");

TEST_CASE("hand-enumerated generator: three sites between two reservoirs") {
  // Flip model with a configuration-independent rate table acts as a left
  // reservoir: creation A, annihilation B at site 1, reservoir beta at
  // site 3, stirring on (1,2), (2,3).
  const double A = 0.3, B = 0.7, beta = 0.25;
  const auto spec = flip_model(4, 1, beta, {A, B});
  const auto G = build_generator(spec);
  REQUIRE(G.num_states() == 8);

  // state word: bit0 = site1, bit1 = site2, bit2 = site3
  Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(8, 8);
  for (int w = 0; w < 8; ++w) {
    auto add = [&](int to, double rate) {
      Q(w, to) += rate;
      Q(w, w) -= rate;
    };
    const int s1 = w & 1, s2 = (w >> 1) & 1, s3 = (w >> 2) & 1;
    if (s1 != s2) add(w ^ 0b011, 1.0);
    if (s2 != s3) add(w ^ 0b110, 1.0);
    add(w ^ 0b001, s1 ? B : A);
    add(w ^ 0b100, s3 ? 1.0 - beta : beta);
  }
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 8; ++j)
      CHECK(G.Q.coeff(i, j) == doctest::Approx(Q(i, j)).epsilon(1e-15));
}

TEST_CASE("generator rows sum to zero for random specs of all models") {
  for (int i = 0; i < 3; ++i) {
    ModelSpec m1;
    m1.N = 5;
    m1.boundary = random_degree_preserving_spec(600 + i, 2,
                                                ErgodicityTag::unique_stationary);
    const auto G1 = build_generator(m1);
    for (std::int64_t w = 0; w < static_cast<std::int64_t>(G1.num_states()); ++w)
      CHECK(std::abs(row_sum(G1, w)) <= 1e-12);
  }
  const auto m2 = flip_model(6, 2, 0.4, {0.5, 0.1, 0.6, 0.2});
  const auto G2 = build_generator(m2);
  for (std::int64_t w = 0; w < static_cast<std::int64_t>(G2.num_states()); ++w)
    CHECK(std::abs(row_sum(G2, w)) <= 1e-12);
}

TEST_CASE("speed factor scales exactly the block transitions") {
  SpeededBoundarySpec b;
  b.p = 1;
  b.beta = 0.5;
  b.ell = 1.0;
  b.generator.resize(4, 4);
  b.generator << -1.0, 0.4, 0.3, 0.3,
                  0.2, -0.5, 0.1, 0.2,
                  0.3, 0.3, -0.8, 0.2,
                  0.1, 0.1, 0.3, -0.5;
  ModelSpec spec;
  spec.N = 4;
  spec.boundary = b;
  const auto G1 = build_generator(spec);
  std::get<SpeededBoundarySpec>(spec.boundary).ell = 2.0;
  const auto G2 = build_generator(spec);

  // Block-only transitions (bulk part fixed) must double exactly; the rest
  // must be unchanged.
  const std::uint32_t block_mask = 0b11;
  for (std::int64_t w = 0; w < static_cast<std::int64_t>(G1.num_states()); ++w) {
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(G1.Q, w);
         it; ++it) {
      if (it.col() == w) continue;
      const std::uint32_t from = static_cast<std::uint32_t>(w);
      const std::uint32_t to = static_cast<std::uint32_t>(it.col());
      // only the block chain changes bits 0..1 alone; stirring edges and the
      // right flip touch bit 2 and above
      const bool pure_block_move = (to & ~block_mask) == (from & ~block_mask);
      const double expected = pure_block_move ? 2.0 * it.value() : it.value();
      CHECK(G2.Q.coeff(w, it.col()) == doctest::Approx(expected).epsilon(1e-14));
    }
  }
}

TEST_CASE("two-state birth-death stationary state") {
  GeneratorMatrix G;
  G.model = 1;
  G.first_site = 0;
  G.num_sites = 1;
  const double a = 0.7, b = 0.2;
  std::vector<Eigen::Triplet<double>> trips{
      {0, 1, a}, {0, 0, -a}, {1, 0, b}, {1, 1, -b}};
  G.Q.resize(2, 2);
  G.Q.setFromTriplets(trips.begin(), trips.end());
  const auto mu = stationary_distribution(G);
  CHECK(mu.weights(0) == doctest::Approx(b / (a + b)).epsilon(1e-12));
  CHECK(mu.weights(1) == doctest::Approx(a / (a + b)).epsilon(1e-12));
}

TEST_CASE("equilibrium spec has the product Bernoulli stationary state") {
  const double beta = 0.35;
  auto b = make_degree_preserving_spec(1, beta);
  b.set_reservoir(-1, 0.8, beta);
  b.set_reservoir(0, 1.1, beta);
  ModelSpec spec;
  spec.N = 4;
  spec.boundary = b;
  const auto G = build_generator(spec);
  const auto mu = stationary_distribution(G);
  for (std::int64_t w = 0; w < static_cast<std::int64_t>(G.num_states()); ++w) {
    const int ones = std::popcount(static_cast<std::uint32_t>(w));
    const double expect = std::pow(beta, ones) *
                          std::pow(1.0 - beta, G.num_sites - ones);
    CHECK(mu.weights(w) == doctest::Approx(expect).epsilon(1e-10));
  }
  const auto rho = observable_density(G, mu);
  for (int k = rho.first_site; k <= rho.last_site(); ++k)
    CHECK(rho.at(k) == doctest::Approx(beta).epsilon(1e-10));

  const auto corr = observable_correlation(G, mu);
  CHECK(corr.max_abs() <= 1e-10);
  CHECK(corr.phi(-1, 0, 2) == -corr.phi(1, 0, 2));
}

TEST_CASE("absorbing left chain is reported as reducible") {
  auto b = make_degree_preserving_spec(1, 0.5);
  b.c(1, 0) = 1.0;
  const auto G = left_block_generator(b);
  CHECK_THROWS_AS(stationary_distribution(G), ReducibleChain);
}

TEST_CASE("deterministic absorbing state has density one") {
  // all-ones is absorbing for the pure-copy block chain; embed it by hand
  GeneratorMatrix G;
  G.model = 1;
  G.first_site = 0;
  G.num_sites = 2;
  std::vector<Eigen::Triplet<double>> trips{
      {0, 3, 1.0}, {0, 0, -1.0}, {1, 3, 1.0}, {1, 1, -1.0},
      {2, 3, 1.0}, {2, 2, -1.0}};
  G.Q.resize(4, 4);
  G.Q.setFromTriplets(trips.begin(), trips.end());
  const auto mu = stationary_distribution(G);
  const auto rho = observable_density(G, mu);
  CHECK(rho.at(0) == doctest::Approx(1.0));
  CHECK(rho.at(1) == doctest::Approx(1.0));
}

TEST_CASE("state-space caps") {
  ModelSpec big;
  big.N = 30;
  big.boundary = random_degree_preserving_spec(1, 1,
                                               ErgodicityTag::unique_stationary);
  CHECK_THROWS_AS(build_generator(big), StateSpaceTooLarge);
}

TEST_SUITE_END();
