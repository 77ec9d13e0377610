#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Sparse>

#include "sep/density.hpp"
#include "sep/model_spec.hpp"
#include "sep/rng.hpp"

namespace sep {

// Signed two-point function phi(sigma, j, k) on pairs first <= j < k <= last.
// Only the sigma = +1 triangle is stored; phi(-1,j,k) = -phi(1,j,k).
class CorrelationField {
 public:
  CorrelationField() = default;
  CorrelationField(int first_site, int last_site);

  int first_site() const { return first_; }
  int last_site() const { return last_; }
  std::size_t pair_count() const { return values_.size(); }

  double phi(int sigma, int j, int k) const;
  void set(int j, int k, double value);  // sigma = +1 value

  double max_abs() const;
  // max |phi(1,j,k)| over pairs with j > j_min
  double max_abs_beyond(int j_min) const;

 private:
  std::size_t pair_index(int j, int k) const;
  int first_ = 0;
  int last_ = 0;
  std::vector<double> values_;
};

// A point of the extended simplex: an interior pair or one of the three
// cemetery classes (kill at a reservoir site, diagonal contact, right edge).
struct SimplexIndex {
  enum class Kind { interior, killed, diagonal, right_edge, left_column };
  Kind kind = Kind::interior;
  int sigma = 1;
  int j = 0;
  int k = 1;
};

// Absorbed-walk representation of the two-point boundary value problem:
// per interior index, the outgoing transitions (interior target or cemetery
// with its Dirichlet value) and the source term F.
struct DualWalkGenerator {
  struct Transition {
    double rate;
    std::int64_t target;    // interior index, or -1 for a cemetery
    double boundary_value;  // Dirichlet datum when target == -1
    SimplexIndex::Kind cemetery = SimplexIndex::Kind::interior;
  };

  int model = 1;
  int N = 0;
  int p = 0;
  bool has_sign = true;  // model 1 carries the sigma coordinate

  std::vector<std::vector<Transition>> moves;
  std::vector<double> out_rate;
  std::vector<double> source;         // F on interior indices
  std::vector<double> rhs_dirichlet;  // inflow of boundary data per index

  // Dirichlet data needed to evaluate b at cemetery starts: diagonal values
  // rho(m)(1-rho(m)) on the block (model 1) and the left column (model 2).
  std::vector<double> diag_rho_var;  // model 1, index m + p
  std::vector<double> left_column;   // model 2, index k - 3

  std::size_t size() const { return moves.size(); }
  std::int64_t index_of(const SimplexIndex& s) const;
  SimplexIndex index_to_point(std::int64_t idx) const;
  double boundary_value(const SimplexIndex& s) const;
};

// System (dual generator, F, b) for the degree-preserving model on the
// extended simplex over {-p..N-1}; rho_N must come from the finite one-point
// solve on the same spec and N.
DualWalkGenerator assemble_system_model1(const DegreePreservingSpec& spec,
                                         int N, const DensityProfile& rho_N);

// System for the flip model on pairs {2 <= j < k <= N-1}.  The left column
// phi_N(1,k) enters as Dirichlet data: exact values, Monte Carlo estimates or
// the zero ansatz.  left_data[k-3] holds phi_N(1,k) for k = 3..N-1; an empty
// vector means the zero ansatz.
DualWalkGenerator assemble_system_model2(int N, double beta, double rho1,
                                         std::span<const double> left_data);

// Closed form of the source-only piece for the flip model.
double model2_phi1_closed_form(int N, double beta, double rho1, int j, int k);

struct CorrelationSolveResult {
  CorrelationField field;
  double residual = 0.0;
  double antisymmetry_defect = 0.0;  // model 1 only
  // Model 2 only: the F-driven piece and its deviation from the closed form.
  std::optional<CorrelationField> phi1;
  double phi1_defect = 0.0;
};

// Sparse Dirichlet solve of (dual generator) phi + F = 0, phi = b on the
// cemetery points.  Residual verified to 1e-10.
CorrelationSolveResult solve_correlations(const DualWalkGenerator& sys);

struct McEstimate {
  double mean = 0.0;
  double stderr_ = 0.0;
  std::size_t n = 0;
};

// Monte Carlo representation phi = E[int_0^H F(X_s) ds] + E[b(X_H)] over the
// absorbed dual walk started at `start`.
McEstimate mc_dual_walk(const DualWalkGenerator& sys, const SimplexIndex& start,
                        std::size_t n_samples, std::uint64_t seed);

struct HittingRow {
  SimplexIndex start;
  double prob = 0.0;     // P[hit Sigma before the kill/right cemeteries]
  double stderr_ = 0.0;
  double diagonal_frac = 0.0;  // runs absorbed on the diagonal instead
  std::size_t n = 0;
};

// Estimates P[H(Sigma) < H(partial_N)] for the model-1 dual walk, where
// Sigma = {(sigma,l,0): -p <= l < 0} and partial_N collects the zero-data
// cemeteries (kill points and right edge).
std::vector<HittingRow> hitting_experiment(const DualWalkGenerator& sys,
                                           std::span<const SimplexIndex> starts,
                                           std::size_t n_samples,
                                           std::uint64_t seed);

}  // namespace sep
