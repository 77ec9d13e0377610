#include "sep/density.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Sparse>

#include "sep/errors.hpp"

namespace sep {

BoundaryOperators boundary_operators(const DegreePreservingSpec& spec) {
  const int n = spec.p + 1;
  BoundaryOperators ops;
  ops.C = Eigen::MatrixXd::Zero(n, n);
  ops.T = Eigen::MatrixXd::Zero(n, n);
  ops.A_linear = Eigen::MatrixXd::Zero(n, n);
  ops.A_const = Eigen::VectorXd::Zero(n);
  for (int b = 0; b < n; ++b) {
    for (int k = 0; k < n; ++k) {
      if (k == b) continue;
      ops.C(b, k) = spec.c(b, k);
      ops.C(b, b) -= spec.c(b, k);
      ops.A_linear(b, k) -= spec.a(b, k);
      ops.A_linear(b, b) -= spec.a(b, k);
      ops.A_const(b) += spec.a(b, k);
    }
    // Stirring inside the block: reflecting chain on {-p..0}.
    if (b + 1 < n) {
      ops.T(b, b + 1) += 1.0;
      ops.T(b, b) -= 1.0;
    }
    if (b - 1 >= 0) {
      ops.T(b, b - 1) += 1.0;
      ops.T(b, b) -= 1.0;
    }
  }
  return ops;
}

namespace {

void check_range(std::vector<double>& rho) {
  for (double& v : rho) {
    if (v < -1e-9 || v > 1.0 + 1e-9)
      throw SolverFailure("density escaped [0,1]: " + std::to_string(v));
    v = std::clamp(v, 0.0, 1.0);
  }
}

}  // namespace

DensityProfile solve_left_density(const DegreePreservingSpec& spec) {
  spec.validate();
  if (!spec.ergodic_left())
    throw SingularSystem(
        "left chain has no unique stationary state (sum r + sum a = 0)");
  const int n = spec.p + 1;
  const auto ops = boundary_operators(spec);

  Eigen::MatrixXd M = -(ops.C + ops.A_linear + ops.T);
  Eigen::VectorXd rhs = ops.A_const;
  for (int b = 0; b < n; ++b) {
    M(b, b) += spec.reservoir_rate(b - spec.p);
    rhs(b) += spec.creation_rate(b - spec.p);
  }

  Eigen::FullPivLU<Eigen::MatrixXd> lu(M);
  if (!lu.isInvertible())
    throw SingularSystem("left-block density system is singular");
  Eigen::VectorXd rho = lu.solve(rhs);

  DensityProfile out;
  out.first_site = -spec.p;
  out.role = ProfileRole::left_block_rho;
  out.rho.assign(rho.data(), rho.data() + n);
  out.residual = (M * rho - rhs).cwiseAbs().maxCoeff();
  if (out.residual > 1e-12)
    throw SolverFailure("left-block density residual " +
                        std::to_string(out.residual) + " exceeds 1e-12");
  check_range(out.rho);
  return out;
}

DensityProfile solve_finite_one_point(const DegreePreservingSpec& spec, int N) {
  spec.validate();
  if (N < 3) throw SpecError("finite system needs N >= 3");
  if (!spec.ergodic_left())
    throw SingularSystem(
        "left chain has no unique stationary state (sum r + sum a = 0)");
  const int p = spec.p;
  const int n = N + p;  // unknowns at sites -p..N-1, index b = site + p
  const auto ops = boundary_operators(spec);

  std::vector<Eigen::Triplet<double>> trips;
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);

  // Left block and junction rows.  The stirring part of the junction row
  // couples to site 1, which ops.T does not know about.
  for (int b = 0; b <= p; ++b) {
    for (int k = 0; k <= p; ++k) {
      double v = -(ops.C(b, k) + ops.A_linear(b, k) + ops.T(b, k));
      if (b == k) v += spec.reservoir_rate(b - p);
      if (v != 0.0) trips.emplace_back(b, k, v);
    }
    rhs(b) = spec.creation_rate(b - p) + ops.A_const(b);
  }
  // junction: add the (0,1) stirring edge to the site-0 row
  trips.emplace_back(p, p, 1.0);
  trips.emplace_back(p, p + 1, -1.0);

  // Bulk rows: discrete Laplacian with rho_N(N) := beta.
  for (int site = 1; site <= N - 1; ++site) {
    const int b = site + p;
    trips.emplace_back(b, b, 2.0);
    trips.emplace_back(b, b - 1, -1.0);
    if (site + 1 <= N - 1)
      trips.emplace_back(b, b + 1, -1.0);
    else
      rhs(b) = spec.beta;
  }

  Eigen::SparseMatrix<double> M(n, n);
  M.setFromTriplets(trips.begin(), trips.end());
  Eigen::SparseLU<Eigen::SparseMatrix<double>> solver;
  solver.compute(M);
  if (solver.info() != Eigen::Success)
    throw SingularSystem("finite one-point system is singular");
  Eigen::VectorXd rho = solver.solve(rhs);

  DensityProfile out;
  out.first_site = -p;
  out.role = ProfileRole::finite_N_rhoN;
  out.rho.assign(rho.data(), rho.data() + n);
  out.residual = (M * rho - rhs).cwiseAbs().maxCoeff();
  if (out.residual > 1e-12)
    throw SolverFailure("finite one-point residual " +
                        std::to_string(out.residual) + " exceeds 1e-12");

  // The bulk must interpolate linearly between rho_N(0) and beta.
  const double rho0 = out.at(0);
  double defect = 0.0;
  for (int k = 0; k <= N - 1; ++k) {
    const double lin =
        (static_cast<double>(k) / N) * spec.beta +
        (static_cast<double>(N - k) / N) * rho0;
    defect = std::max(defect, std::abs(out.at(k) - lin));
  }
  out.interpolation_defect = defect;
  if (defect > 1e-12)
    throw SolverFailure("bulk profile deviates from linear interpolation by " +
                        std::to_string(defect));
  check_range(out.rho);
  return out;
}

LinearProfile macroscopic_profile(double rho0, double beta) {
  if (rho0 < 0.0 || rho0 > 1.0 || beta < 0.0 || beta > 1.0)
    throw SpecError("macroscopic endpoints must lie in [0,1]");
  return LinearProfile{rho0, beta};
}

}  // namespace sep
