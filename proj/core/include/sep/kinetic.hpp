#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "sep/density.hpp"
#include "sep/lattice.hpp"
#include "sep/marks.hpp"
#include "sep/model_spec.hpp"
#include "sep/rng.hpp"

namespace sep {

// Event-driven continuous-time sampler for all three models.  Events are the
// constant-rate Poisson classes of the graphical construction (stirring
// arrows, reservoir set events, copy events, window daggers); classes whose
// effect does not apply in the current configuration fire as no-ops, which
// leaves the law of the chain unchanged.
class KineticSimulator {
 public:
  KineticSimulator(const ModelSpec& spec, Configuration eta0,
                   std::uint64_t seed);

  // Time of the next event (sampled once and cached until applied).
  double next_event_time();
  void apply_next();
  double step() {
    next_event_time();
    apply_next();
    return time_;
  }
  double time() const { return time_; }
  const Configuration& config() const { return eta_; }
  const ModelSpec& spec() const { return spec_; }

 private:
  struct EventClass {
    double rate;
    int kind;  // 0 exchange, 1 set, 2 copy, 3 anticopy, 4 window dagger
    int a;
    int b;
  };

  void apply(const EventClass& ev);
  std::uint32_t block_word() const;

  ModelSpec spec_;
  Configuration eta_;
  Rng rng_;
  double time_ = 0.0;
  double pending_time_ = -1.0;  // < 0 means no event sampled yet

  int first_edge_site_;
  int num_edges_;
  std::vector<EventClass> classes_;  // non-stirring constant-rate classes
  double class_total_ = 0.0;
  // model 3: jump rates out of each block state
  std::vector<std::vector<EventClass>> block_rows_;
  std::vector<double> block_row_total_;
};

Configuration simulate(
    const ModelSpec& spec, Configuration eta0, double horizon,
    std::uint64_t seed,
    const std::function<void(double, const Configuration&)>& on_event = {});

// Graphical construction for the flip model: independent Poisson processes
// merged into a time-sorted mark log on [0, t_end), and the deterministic
// replay of a log from an initial configuration.
MarkLog generate_marklog(const FlipBoundarySpec& spec, int N, double t_end,
                         Rng& rng);
void apply_mark(Configuration& eta, const Mark& mark,
                const FlipBoundarySpec& spec);
Configuration replay_marklog(const MarkLog& log, Configuration eta0,
                             const FlipBoundarySpec& spec);

struct StationaryEstimate {
  int first_site = 1;
  std::vector<double> mean;
  std::vector<double> se;  // batch-means standard errors
  double burn_in = 0.0;
  int batches = 0;
  double batch_len = 0.0;
  std::uint64_t seed = 0;
  std::string warning;

  double at(int site) const { return mean[site - first_site]; }
  double se_at(int site) const { return se[site - first_site]; }
};

// Time-average density along one trajectory with batch-means errors.
// Defaults follow the diffusive relaxation scale: burn_in = 10 N^2 and
// batch_len = N^2 when passed as zero.
StationaryEstimate estimate_density(const ModelSpec& spec, double burn_in,
                                    int batches, double batch_len,
                                    std::uint64_t seed);

// Same estimator driven by mark-log replay (flip model only).
StationaryEstimate estimate_density_graphical(const ModelSpec& spec,
                                              double burn_in, int batches,
                                              double batch_len,
                                              std::uint64_t seed);

struct ProfileError {
  double weighted = 0.0;  // (1/N) sum_k G(k/N) [rho(k) - u(k/N)]
  double l1 = 0.0;        // (1/N) sum_k |rho(k) - u(k/N)|
};

// Hydrostatic error statistics over the bulk k = 1..N-1.
ProfileError profile_error(const DensityProfile& rho, int N,
                           const LinearProfile& u,
                           const std::function<double(double)>& G);

struct MajorityScenario {
  std::vector<double> times;
  std::vector<int> site1;
  double occupied_fraction = 0.0;  // fraction of time site 1 was occupied
};

// Exploratory run of the majority boundary rule: at rate 1 site 1 takes the
// value 1{sum_{2<=j<=2p} eta_j >= p}.  Data only; no limit claim attached.
MajorityScenario majority_scenario(int p, int N, double beta, double horizon,
                                   double sample_dt, std::uint64_t seed,
                                   bool start_filled = false);

}  // namespace sep
