#pragma once

#include <cstdint>
#include <vector>

#include "sep/lattice.hpp"
#include "sep/marks.hpp"
#include "sep/model_spec.hpp"
#include "sep/rng.hpp"

namespace sep {

// Set-valued revealment state: the sites whose occupation at the current
// backward time must be known to determine eta_1(0).
struct DualState {
  std::vector<int> sites;  // sorted, subset of {1..N-1}
  double elapsed = 0.0;    // backward time
  long created = 0;        // particles created by branchings
  int max_site = 1;

  bool contains(int site) const;
};

// Everything needed to replay one perfect sample: the marks that touched the
// dual cluster (backward times, ascending), the extinction time and the
// geometry.
struct RevealmentRecord {
  int N = 0;
  int p = 0;
  MarkLog marks;  // mark.time = elapsed backward time; physical instant -time
  double extinction_time = 0.0;
  long created = 0;
  int max_site = 1;
};

struct RevealmentOptions {
  bool record_marks = true;
  std::uint64_t event_cap = 10'000'000;  // guards non weak-dependence specs
};

struct RevealmentResult {
  DualState final_state;
  RevealmentRecord record;
};

// Runs the dual from {1} until extinction.  Throws CapExceeded if the event
// cap is hit first.
RevealmentResult run_revealment(const FlipBoundarySpec& spec, int N, Rng& rng,
                                const RevealmentOptions& options = {});

// Forward pass over the record with the three-symbol alphabet {0,1,unknown}:
// daggers write known bits, arrows exchange symbols, window daggers flip
// site 1 only when the whole window is known and matches.  Returns
// eta_1(0) in {0,1}; throws std::logic_error if it is still unknown (that
// would contradict the recoverability of the value from the marks).
int reconstruct_value(const RevealmentRecord& record,
                      const FlipBoundarySpec& spec);

// Replays the recorded marks forward in physical time from an arbitrary
// configuration at time -T and reads off eta_1(0).  Oracle for
// reconstruct_value: the result must not depend on eta_at_minus_T.
int forward_replay(const RevealmentRecord& record,
                   const FlipBoundarySpec& spec, Configuration eta_at_minus_T);

struct AlphaEstimate {
  double mean = 0.0;
  double stderr_ = 0.0;
  std::size_t n = 0;
  std::size_t capped = 0;  // discarded samples that hit the event cap
};

// Perfect sampling of the stationary left density rho_N(1): mean of
// reconstructed bits over independent revealment runs.  Samples use
// independent streams; with threads > 1 they run chunked in parallel and
// reduce in fixed chunk order, so results do not depend on the thread count.
AlphaEstimate perfect_sample_alpha(const FlipBoundarySpec& spec, int N,
                                   std::size_t n_samples, std::uint64_t seed,
                                   int threads = 1);

struct DualStatistics {
  double mean_created = 0.0;
  double se_created = 0.0;
  double created_bound = 0.0;  // (p-1) lambda / (A+B - (p-1) lambda)
  std::vector<double> t_grid;
  std::vector<double> survival;  // P[T > t]
  std::vector<int> ell_grid;
  std::vector<double> range_tail;  // P[max site >= ell]
  std::size_t n = 0;
  std::size_t capped = 0;
};

DualStatistics dual_statistics(const FlipBoundarySpec& spec, int N,
                               std::size_t n_samples, std::uint64_t seed,
                               std::vector<int> ell_grid = {},
                               std::vector<double> t_grid = {},
                               int threads = 1);

struct CouplingResult {
  double reach_prob = 0.0;  // P[dual on {1..N-1} ever contains N-1]
  double stderr_ = 0.0;
  std::size_t n = 0;
  std::size_t divergences = 0;  // joint runs where the two duals differed
                                // before N-1 was reached (must stay 0)
};

// Shared-marks coupling of the duals on {1..N-1} and {1..M-1}; the two sets
// coincide until the smaller one touches N-1, so the reach probability
// bounds |rho_N(1) - rho_M(1)|.
CouplingResult coupling_experiment(const FlipBoundarySpec& spec, int N, int M,
                                   std::size_t n_samples, std::uint64_t seed);

// Length-prefixed little-endian record container ("SEPDUAL1"); each payload
// holds the geometry, extinction time, counters and the mark list, enough to
// replay the sample.
void write_records(const std::string& path,
                   const std::vector<RevealmentRecord>& records);
std::vector<RevealmentRecord> read_records(const std::string& path);

}  // namespace sep
