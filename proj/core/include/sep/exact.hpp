#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Sparse>

#include "sep/correlation.hpp"
#include "sep/density.hpp"
#include "sep/model_spec.hpp"

namespace sep {

// Full rate matrix over the enumerated state space.  States are words with
// bit (site - first_site) holding the occupation of `site`.
struct GeneratorMatrix {
  int model = 1;
  int first_site = 0;
  int num_sites = 0;
  Eigen::SparseMatrix<double, Eigen::RowMajor> Q;  // row = from-state

  std::size_t num_states() const { return std::size_t(1) << num_sites; }
};

// Enumeration feasibility caps.
inline constexpr int kMaxExactSites = 22;

GeneratorMatrix build_generator(const ModelSpec& spec);

// Left chain L_S + L_R + L_C + L_A alone on {0,1}^{-p..0}; oracle for the
// left-block density equation and for the ergodicity classification.
GeneratorMatrix left_block_generator(const DegreePreservingSpec& spec);

// Arbitrary block chain of the speeded model (the speed factor drops out of
// the stationary state).
GeneratorMatrix block_generator(const SpeededBoundarySpec& spec);

struct StationaryState {
  Eigen::VectorXd weights;
  double residual = 0.0;  // ||mu Q||_1
};

// mu Q = 0, sum mu = 1.  Direct sparse LU below 2^18 states, power iteration
// above.  Throws ReducibleChain when the rate graph has more than one closed
// communicating class.
StationaryState stationary_distribution(const GeneratorMatrix& G);

DensityProfile observable_density(const GeneratorMatrix& G,
                                  const StationaryState& mu);

CorrelationField observable_correlation(const GeneratorMatrix& G,
                                        const StationaryState& mu);

}  // namespace sep
