#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sep/model_spec.hpp"
#include "sep/rate_algebra.hpp"

namespace sep {

struct FitResult {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

// Ordinary least squares on (log x, log y); needs >= 3 strictly positive
// points.
FitResult fit_power_law(std::span<const std::pair<double, double>> points);

enum class ExperimentKind {
  hydrostatic_m1,
  hydrostatic_m2,
  hydrostatic_m3,
  correlation_decay,
  dual_bounds,
  speeded_scaling,
  rate_roundtrip,
};

const char* to_string(ExperimentKind kind);
ExperimentKind experiment_kind_from_string(const std::string& name);

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::hydrostatic_m1;
  ModelSpec spec;
  bool has_spec = false;
  std::vector<int> N_values;
  std::vector<double> ell_values;
  std::size_t samples = 10000;
  std::uint64_t seed = 1;
  std::string out_dir;
  int threads = 1;
};

// Parses and validates a config document; error messages carry the line of
// the offending construct.
ExperimentConfig load_experiment_config(const std::string& path);
ExperimentConfig parse_experiment_config(const std::string& json_text,
                                         const std::string& base_dir);

struct ExperimentReport {
  bool passed = false;
  std::string summary;  // JSON text, also written to <out>/summary.json
};

// Runs one experiment: writes CSV tables, an SVG plot and a JSON summary
// with pass/fail against the built-in thresholds.
ExperimentReport run_experiment(const ExperimentConfig& config);

// Default output root: $SEPSIM_OUT or ./out.
std::string default_output_root();

// Deterministic random admissible boundary spec on a dyadic value grid (the
// grid keeps the subset-coefficient round trip exact in double arithmetic).
DegreePreservingSpec random_degree_preserving_spec(std::uint64_t seed, int p,
                                                   ErgodicityTag klass);

}  // namespace sep
