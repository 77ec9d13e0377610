#pragma once

#include <vector>

#include <Eigen/Dense>

#include "sep/model_spec.hpp"

namespace sep {

enum class ProfileRole { left_block_rho, finite_N_rhoN };

// Per-site expected occupations, indexed by signed lattice sites.
struct DensityProfile {
  int first_site = 0;
  std::vector<double> rho;
  ProfileRole role = ProfileRole::left_block_rho;
  double residual = 0.0;              // linear-system residual, max norm
  double interpolation_defect = 0.0;  // finite-N only: deviation from the
                                      // exact linear bulk interpolation

  double at(int site) const { return rho[site - first_site]; }
  int last_site() const {
    return first_site + static_cast<int>(rho.size()) - 1;
  }
};

// Macroscopic stationary profile: the linear interpolation between the left
// density u(0) and the reservoir density u(1) = beta.
struct LinearProfile {
  double rho0 = 0.0;
  double beta = 0.0;
  double operator()(double x) const { return rho0 + (beta - rho0) * x; }
};

// Boundary operators of the left-block stationary equation, acting on
// functions on {-p..0}.  C and T have zero row sums; the inverse-copy
// operator is affine and split into a linear part plus a constant.
struct BoundaryOperators {
  Eigen::MatrixXd C;
  Eigen::MatrixXd T;
  Eigen::MatrixXd A_linear;
  Eigen::VectorXd A_const;
};

BoundaryOperators boundary_operators(const DegreePreservingSpec& spec);

// Unique solution of the left-block stationary density equation
//   0 = r_j (alpha_j - rho_j) + (C rho)_j + (A rho)_j + (T rho)_j.
// Requires the ergodicity condition sum r + sum a > 0; throws SingularSystem
// otherwise.  The residual is verified to 1e-12.
DensityProfile solve_left_density(const DegreePreservingSpec& spec);

// Finite-N one-point system on {-p..N-1} with rho_N(N) := beta: the
// left-block equations plus the junction at site 0 and the discrete Laplace
// equation in the bulk.  Verifies both the residual and the exact linear
// interpolation of the bulk values between rho_N(0) and beta.
DensityProfile solve_finite_one_point(const DegreePreservingSpec& spec, int N);

LinearProfile macroscopic_profile(double rho0, double beta);

}  // namespace sep
