#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

namespace sep {

// Model 1 left boundary: reservoirs r_j/alpha_j, copy rates c_{j,k} and
// inverse-copy rates a_{j,k} on the block {-p..0}, superposed with stirring.
// The reservoir is stored as the creation/annihilation split
// (q_j, p_j) = (r_j alpha_j, r_j (1 - alpha_j)); that pair is what the rate
// decomposition produces and what every engine consumes, and it keeps the
// rate algebra exact where the ratio alpha = q/(p+q) would not round-trip.
struct DegreePreservingSpec {
  int p = 1;
  double beta = 0.5;
  std::vector<double> creation;      // q_j, site j stored at j+p
  std::vector<double> annihilation;  // p_j
  Eigen::MatrixXd c;                 // (p+1)x(p+1), zero diagonal
  Eigen::MatrixXd a;                 // (p+1)x(p+1), zero diagonal

  void set_reservoir(int j, double r, double alpha) {
    creation[j + p] = r * alpha;
    annihilation[j + p] = r - creation[j + p];
  }
  double creation_rate(int j) const { return creation[j + p]; }
  double annihilation_rate(int j) const { return annihilation[j + p]; }
  double reservoir_rate(int j) const {  // r_j
    return creation[j + p] + annihilation[j + p];
  }
  double reservoir_density(int j) const {  // alpha_j; 0 when r_j = 0
    const double r = reservoir_rate(j);
    return r > 0.0 ? creation[j + p] / r : 0.0;
  }
  double copy_rate(int j, int k) const { return c(j + p, k + p); }
  double anticopy_rate(int j, int k) const { return a(j + p, k + p); }

  double sum_r() const;
  double sum_a() const;
  double sum_c() const;
  // Condition for a unique stationary state of the left chain.
  bool ergodic_left() const { return sum_r() + sum_a() > 0.0; }

  void validate() const;
};

// Blank spec with all rates zero, ready for set_reservoir / c / a fills.
DegreePreservingSpec make_degree_preserving_spec(int p, double beta);

// Model 2 left boundary: site 1 flips at rate c(eta_1,...,eta_p).  The table
// is stored with window word w = sum_i eta_i 2^{i-1} (site 1 = lowest bit);
// JSON files use lexicographic order of (eta_1,...,eta_p) and are converted
// on load.
struct FlipBoundarySpec {
  int p = 1;
  double beta = 0.5;
  std::vector<double> table;  // size 2^p, indexed by window word

  double rate(std::uint32_t window) const { return table[window]; }

  // Minimal creation / annihilation rates A = min c(0,.), B = min c(1,.).
  double min_creation() const;
  double min_annihilation() const;
  // lambda(a,xi) = c(a,xi) - (a == 0 ? A : B), indexed like the table.
  std::vector<double> marginal_rates() const;
  double sum_lambda() const;
  bool weak_dependence() const;

  void validate() const;
};

// Model 3 left boundary: an arbitrary irreducible generator on {0,1}^{-p..0},
// speeded up by ell.  States are indexed by word sum_j eta_j 2^{j+p}
// (site -p = lowest bit); JSON files use lexicographic order of
// (eta_{-p},...,eta_0) and are converted on load.
struct SpeededBoundarySpec {
  int p = 1;
  double beta = 0.5;
  double ell = 1.0;
  Eigen::MatrixXd generator;  // 2^{p+1} square, zero row sums

  int num_states() const { return 1 << (p + 1); }

  void validate() const;  // includes an irreducibility (reachability) check
};

using BoundarySpec =
    std::variant<DegreePreservingSpec, FlipBoundarySpec, SpeededBoundarySpec>;

struct ModelSpec {
  int N = 8;
  BoundarySpec boundary;

  int model() const { return static_cast<int>(boundary.index()) + 1; }
  int p() const;
  double beta() const;
  void validate() const;

  const DegreePreservingSpec& degree_preserving() const {
    return std::get<DegreePreservingSpec>(boundary);
  }
  const FlipBoundarySpec& flip() const {
    return std::get<FlipBoundarySpec>(boundary);
  }
  const SpeededBoundarySpec& speeded() const {
    return std::get<SpeededBoundarySpec>(boundary);
  }
};

ModelSpec load_model_spec(const std::string& path);
ModelSpec parse_model_spec(const std::string& json_text);
std::string model_spec_to_json(const ModelSpec& spec);

// FNV-1a over the canonical JSON dump; embedded in every output file.
std::uint64_t spec_hash(const ModelSpec& spec);

// Reverses the low `width` bits of w (lexicographic <-> internal word order).
std::uint32_t reverse_bits(std::uint32_t w, int width);

}  // namespace sep
