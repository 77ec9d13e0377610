#pragma once

#include <cstdint>
#include <vector>

#include "sep/model_spec.hpp"

namespace sep {

// General Glauber flip rates on the left block {-p..0}: one table per site,
// indexed by the block configuration word (site -p = lowest bit).
struct GlauberRateTable {
  int p = 1;
  std::vector<std::vector<double>> rates;  // (p+1) tables of length 2^{p+1}

  int num_block_states() const { return 1 << (p + 1); }
  double rate(int site, std::uint32_t config_word) const {
    return rates[site + p][config_word];
  }
  void validate() const;
};

// Expansion of each flip rate over occupation monomials: for site k,
// c_k(eta) = sum_{A subset of block} R_{k,A} prod_{m in A} eta_m.
// Subsets use the same bit convention as configuration words.
struct SubsetCoefficients {
  int p = 1;
  std::vector<std::vector<double>> R;  // (p+1) tables of length 2^{p+1}

  double coeff(int site, std::uint32_t subset_mask) const {
    return R[site + p][subset_mask];
  }
};

// Inclusion-exclusion over indicator configurations:
//   R_{k,A} = sum_{B subset A} (-1)^{|A \ B|} c_k(1_B).
SubsetCoefficients subset_coefficients(const GlauberRateTable& table);

// Inverse (zeta) transform; reconstructs the table exactly.
GlauberRateTable table_from_coefficients(const SubsetCoefficients& coeffs);

struct DegreeViolation {
  int site;                   // j, paper label
  std::uint32_t subset_mask;  // offending subset A
  double actual;
  double expected;
};

// A rate table keeps degrees of monomials of order 1 and 2 iff every
// per-site expansion has the shape
//   c_j = R_empty + R_{j} eta_j + sum_{k != j} R_{k} eta_k (1 - 2 eta_j),
// i.e. all coefficients of subsets of size >= 2 vanish except the pair
// {j,k}, which must equal -2 R_{j,{k}}.  Returns the offending subsets.
std::vector<DegreeViolation> check_degree_preserving(
    const SubsetCoefficients& coeffs, double tol = 1e-12);

// Rewrites degree-preserving rates with non-negative reservoir/copy
// parameters.  Throws NegativityError when the table takes negative values
// (impossible parametrization) and SpecError when the degree check fails.
DegreePreservingSpec decompose_rates(const SubsetCoefficients& coeffs,
                                     double beta = 0.5);

// Pointwise evaluation of the reservoir + copy + inverse-copy rate sum.
GlauberRateTable compose_spec(const DegreePreservingSpec& spec);

// Reservoir creation/annihilation split: creation = r_j alpha_j and
// annihilation = r_j - creation, so the two parts add up to r_j exactly.
std::pair<double, double> reservoir_parts(const DegreePreservingSpec& spec,
                                          int site);

// Flip rate of site j in the given block configuration (reservoir + copy +
// inverse-copy).  Shared by the exact generator and the kinetic sampler.
double left_flip_rate(const DegreePreservingSpec& spec, int site,
                      std::uint32_t block_word);

enum class ErgodicityTag { unique_stationary, two_absorbing, other };

struct ErgodicityClass {
  ErgodicityTag tag;           // from explicit reachability analysis
  ErgodicityTag rate_sum_tag;  // from the sums of r, a, c
  // Closed communicating classes of the left chain, as configuration words.
  std::vector<std::vector<std::uint32_t>> closed_classes;
};

// Classifies the left chain L_S + L_R + L_C + L_A on {0,1}^{p+1} by finding
// its closed communicating classes; also evaluates the rate-sum criterion.
// The two must agree; a mismatch indicates a bug and throws.
ErgodicityClass classify_ergodicity(const DegreePreservingSpec& spec);

const char* to_string(ErgodicityTag tag);

}  // namespace sep
