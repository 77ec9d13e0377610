#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sep/correlation.hpp"
#include "sep/density.hpp"
#include "sep/dual.hpp"
#include "sep/errors.hpp"
#include "sep/exact.hpp"
#include "sep/experiment.hpp"
#include "sep/io.hpp"
#include "sep/kinetic.hpp"
#include "sep/model_spec.hpp"
#include "sep/rate_algebra.hpp"

namespace {

using nlohmann::json;
using namespace sep;

std::vector<std::pair<std::string, std::string>> file_metadata(
    const ModelSpec& spec, std::uint64_t seed) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(spec_hash(spec)));
  return {{"version", kVersion},
          {"spec_hash", buf},
          {"seed", std::to_string(seed)}};
}

GlauberRateTable load_rate_table(const std::string& path) {
  json j = json::parse(read_text_file(path));
  GlauberRateTable table;
  table.p = j.at("p").get<int>();
  const auto rows = j.at("tables").get<std::vector<std::vector<double>>>();
  if (static_cast<int>(rows.size()) != table.p + 1)
    throw SpecError("tables must hold p+1 rows (sites -p..0)");
  table.rates.assign(rows.size(), {});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != (std::size_t(1) << (table.p + 1)))
      throw SpecError("each table row must have 2^{p+1} entries");
    // rows are lexicographic in (eta_{-p},...,eta_0); internal order keys
    // site -p to the lowest bit
    table.rates[i].resize(rows[i].size());
    for (std::uint32_t w = 0; w < rows[i].size(); ++w)
      table.rates[i][reverse_bits(w, table.p + 1)] = rows[i][w];
  }
  table.validate();
  return table;
}

int cmd_rates_decompose(const std::string& path) {
  const auto table = load_rate_table(path);
  const auto coeffs = subset_coefficients(table);
  const auto violations = check_degree_preserving(coeffs);
  json out;
  if (!violations.empty()) {
    out["degree_preserving"] = false;
    json list = json::array();
    for (const auto& v : violations) {
      json entry;
      entry["site"] = v.site;
      std::vector<int> subset;
      for (int b = 0; b <= table.p; ++b)
        if (v.subset_mask & (1u << b)) subset.push_back(b - table.p);
      entry["subset"] = subset;
      entry["coefficient"] = v.actual;
      entry["allowed"] = v.expected;
      list.push_back(entry);
    }
    out["violations"] = list;
    std::cout << out.dump(2) << "\n";
    return 1;
  }
  try {
    const auto spec = decompose_rates(coeffs);
    out["degree_preserving"] = true;
    std::vector<double> r(table.p + 1), alpha(table.p + 1);
    for (int i = 0; i <= table.p; ++i) {
      r[i] = spec.reservoir_rate(i - table.p);
      alpha[i] = spec.reservoir_density(i - table.p);
    }
    out["r"] = r;
    out["alpha"] = alpha;
    std::vector<std::vector<double>> c(table.p + 1), a(table.p + 1);
    for (int i = 0; i <= table.p; ++i)
      for (int k = 0; k <= table.p; ++k) {
        c[i].push_back(spec.c(i, k));
        a[i].push_back(spec.a(i, k));
      }
    out["c"] = c;
    out["a"] = a;
    const auto klass = classify_ergodicity(spec);
    out["ergodicity"] = to_string(klass.tag);
  } catch (const NegativityError& e) {
    out["degree_preserving"] = true;
    out["decomposable"] = false;
    out["error"] = e.what();
    std::cout << out.dump(2) << "\n";
    return 1;
  }
  out["decomposable"] = true;
  std::cout << out.dump(2) << "\n";
  return 0;
}

int cmd_density(const std::string& spec_path, int N_override,
                const std::string& out_path) {
  auto spec = load_model_spec(spec_path);
  if (spec.model() != 1)
    throw SpecError("density solves need a model-1 spec");
  if (N_override > 0) spec.N = N_override;
  const auto& b = spec.degree_preserving();
  const auto prof = solve_finite_one_point(b, spec.N);
  CsvWriter csv(out_path, "site,rho", file_metadata(spec, 0));
  for (int k = prof.first_site; k <= prof.last_site(); ++k)
    csv.row({static_cast<double>(k), prof.at(k)});
  std::cout << "wrote " << out_path << " (residual " << prof.residual
            << ", interpolation defect " << prof.interpolation_defect
            << ")\n";
  return 0;
}

int cmd_exact(const std::string& spec_path, const std::string& observables,
              const std::string& out_dir) {
  const auto spec = load_model_spec(spec_path);
  ensure_directory(out_dir);
  const auto G = build_generator(spec);
  const auto mu = stationary_distribution(G);
  bool want_density = observables.find("density") != std::string::npos;
  bool want_corr = observables.find("correlation") != std::string::npos;
  if (!want_density && !want_corr)
    throw SpecError("observables must mention density and/or correlation");
  if (want_density) {
    const auto rho = observable_density(G, mu);
    CsvWriter csv(join_path(out_dir, "density.csv"), "site,rho",
                  file_metadata(spec, 0));
    for (int k = rho.first_site; k <= rho.last_site(); ++k)
      csv.row({static_cast<double>(k), rho.at(k)});
  }
  if (want_corr) {
    const auto phi = observable_correlation(G, mu);
    CsvWriter csv(join_path(out_dir, "correlation.csv"), "sigma,j,k,phi",
                  file_metadata(spec, 0));
    for (int sigma : {1, -1})
      for (int j = phi.first_site(); j < phi.last_site(); ++j)
        for (int k = j + 1; k <= phi.last_site(); ++k)
          csv.row({static_cast<double>(sigma), static_cast<double>(j),
                   static_cast<double>(k), phi.phi(sigma, j, k)});
  }
  std::cout << "stationary residual " << mu.residual << "; wrote " << out_dir
            << "\n";
  return 0;
}

struct CorrelationArgs {
  std::string spec_path;
  int model = 0;
  int N_override = 0;
  std::string mode = "solve";
  std::string left_data = "zero";
  std::size_t mc_samples = 20000;
  std::uint64_t seed = 1;
  std::string out_dir;
};

int cmd_correlations(const CorrelationArgs& args) {
  auto spec = load_model_spec(args.spec_path);
  if (args.model != 0 && args.model != spec.model())
    throw SpecError("--model disagrees with the spec file");
  if (args.N_override > 0) spec.N = args.N_override;
  ensure_directory(args.out_dir);

  DualWalkGenerator sys;
  if (spec.model() == 1) {
    const auto& b = spec.degree_preserving();
    if (b.sum_r() == 0.0 && b.sum_a() > 0.0)
      std::cerr << "note: sum r = 0 regime; the kill boundary is reduced and "
                   "decay is conjectural, results are experimental\n";
    const auto rho = solve_finite_one_point(b, spec.N);
    sys = assemble_system_model1(b, spec.N, rho);
  } else if (spec.model() == 2) {
    const auto& b = spec.flip();
    double rho1 = 0.0;
    std::vector<double> left(spec.N - 3, 0.0);
    if (args.left_data == "exact") {
      const auto G = build_generator(spec);
      const auto mu = stationary_distribution(G);
      rho1 = observable_density(G, mu).at(1);
      const auto phi = observable_correlation(G, mu);
      for (int k = 3; k <= spec.N - 1; ++k) left[k - 3] = phi.phi(1, 1, k);
    } else if (args.left_data == "mc") {
      const auto est = perfect_sample_alpha(b, spec.N, args.mc_samples,
                                            args.seed);
      rho1 = est.mean;
      // zero ansatz for the correlation column; only rho1 is estimated
    } else if (args.left_data == "zero") {
      const auto est = perfect_sample_alpha(b, spec.N, args.mc_samples,
                                            args.seed);
      rho1 = est.mean;
      std::fill(left.begin(), left.end(), 0.0);
    } else {
      throw SpecError("--left-data must be zero, mc or exact");
    }
    sys = assemble_system_model2(spec.N, b.beta, rho1, left);
  } else {
    throw SpecError("correlations are defined for models 1 and 2");
  }

  const bool do_solve = args.mode == "solve" || args.mode == "both";
  const bool do_mc = args.mode == "mc" || args.mode == "both";
  if (!do_solve && !do_mc)
    throw SpecError("--mode must be solve, mc or both");

  if (do_solve) {
    const auto sol = solve_correlations(sys);
    CsvWriter csv(join_path(args.out_dir, "phi_solve.csv"),
                  "sigma,j,k,phi,stderr", file_metadata(spec, args.seed));
    const auto& f = sol.field;
    for (int sigma : {1, -1}) {
      if (!sys.has_sign && sigma < 0) break;
      for (int j = f.first_site(); j < f.last_site(); ++j)
        for (int k = j + 1; k <= f.last_site(); ++k)
          csv.row({static_cast<double>(sigma), static_cast<double>(j),
                   static_cast<double>(k), f.phi(sigma, j, k), 0.0});
    }
    std::cout << "solve residual " << sol.residual << "\n";
  }
  if (do_mc) {
    CsvWriter csv(join_path(args.out_dir, "phi_mc.csv"),
                  "sigma,j,k,phi,stderr", file_metadata(spec, args.seed));
    // estimate along a thinned set of pairs to keep runtimes sane
    const int first = sys.model == 1 ? -sys.p : 2;
    const int last = spec.N - 1;
    const int stride = std::max(1, (last - first) / 8);
    for (int j = first; j < last; j += stride)
      for (int k = j + 1; k <= last; k += stride) {
        SimplexIndex start{SimplexIndex::Kind::interior, 1, j, k};
        const auto est = mc_dual_walk(sys, start, args.mc_samples, args.seed);
        csv.row({1.0, static_cast<double>(j), static_cast<double>(k),
                 est.mean, est.stderr_});
      }
  }
  return 0;
}

struct SimulateArgs {
  std::string spec_path;
  int N_override = 0;
  double ell = 0.0;
  int batches = 64;
  double burn_in = 0.0;
  double batch_len = 0.0;
  std::uint64_t seed = 1;
  std::string out_dir;
  double snapshot_dt = 0.0;
  double horizon = 0.0;
};

void write_snapshots(const std::string& path, const ModelSpec& spec,
                     double horizon, double dt, std::uint64_t seed) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw SpecError("cannot open " + path);
  const char magic[8] = {'S', 'E', 'P', 'T', 'R', 'J', '0', '1'};
  out.write(magic, 8);
  Configuration eta = spec.model() == 2
                          ? Configuration(1, spec.N - 1)
                          : Configuration(-spec.p(), spec.N + spec.p());
  const std::int32_t first = eta.first_site(), nsites = eta.num_sites();
  out.write(reinterpret_cast<const char*>(&first), 4);
  out.write(reinterpret_cast<const char*>(&nsites), 4);
  KineticSimulator sim(spec, eta, seed);
  double next = 0.0;
  const auto dump = [&](double t, const Configuration& cfg) {
    out.write(reinterpret_cast<const char*>(&t), 8);
    std::vector<std::uint8_t> bytes((nsites + 7) / 8, 0);
    for (int i = 0; i < nsites; ++i)
      if (cfg.bit(first + i)) bytes[i / 8] |= (1u << (i % 8));
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
  };
  while (next <= horizon) {
    while (sim.next_event_time() <= next) sim.apply_next();
    dump(next, sim.config());
    next += dt;
  }
}

int cmd_simulate(const SimulateArgs& args) {
  auto spec = load_model_spec(args.spec_path);
  if (args.N_override > 0) spec.N = args.N_override;
  if (args.ell > 0.0) {
    if (spec.model() != 3)
      throw SpecError("--ell applies to model-3 specs only");
    std::get<SpeededBoundarySpec>(spec.boundary).ell = args.ell;
  }
  ensure_directory(args.out_dir);
  const auto est = estimate_density(spec, args.burn_in, args.batches,
                                    args.batch_len, args.seed);
  if (!est.warning.empty()) std::cerr << "warning: " << est.warning << "\n";
  CsvWriter csv(join_path(args.out_dir, "density_estimate.csv"),
                "site,mean,stderr", file_metadata(spec, args.seed));
  for (std::size_t i = 0; i < est.mean.size(); ++i)
    csv.row({static_cast<double>(est.first_site + static_cast<int>(i)),
             est.mean[i], est.se[i]});
  if (args.snapshot_dt > 0.0) {
    const double horizon =
        args.horizon > 0.0 ? args.horizon : 100.0 * args.snapshot_dt;
    write_snapshots(join_path(args.out_dir, "snapshots.bin"), spec, horizon,
                    args.snapshot_dt, args.seed + 1);
  }
  return 0;
}

struct DualArgs {
  std::string spec_path;
  int N_override = 0;
  std::size_t samples = 10000;
  std::uint64_t seed = 1;
  bool stats = false;
  std::size_t records = 0;
  std::string audit_path;
  int threads = 1;
  std::string out_dir;
};

std::vector<RevealmentRecord> sample_records(const FlipBoundarySpec& spec,
                                             int N, std::size_t count,
                                             std::uint64_t seed) {
  std::vector<RevealmentRecord> records;
  records.reserve(count);
  for (std::size_t s = 0; s < count; ++s) {
    Rng rng = Rng::stream(seed, s);
    records.push_back(run_revealment(spec, N, rng).record);
  }
  return records;
}

int cmd_dual(const DualArgs& args) {
  auto spec = load_model_spec(args.spec_path);
  if (spec.model() != 2)
    throw SpecError("the dual process is defined for model-2 specs");
  if (args.N_override > 0) spec.N = args.N_override;
  const auto& b = spec.flip();

  if (!args.audit_path.empty()) {
    // replay persisted records: reconstruction must match the forward replay
    const auto records = read_records(args.audit_path);
    Rng rng(args.seed);
    std::size_t ok = 0;
    for (const auto& rec : records) {
      const int value = reconstruct_value(rec, b);
      Configuration random_cfg(1, rec.N - 1);
      for (int s = 1; s <= rec.N - 1; ++s)
        random_cfg.set(s, rng.bernoulli(0.5) ? 1 : 0);
      if (forward_replay(rec, b, Configuration(1, rec.N - 1, true)) == value &&
          forward_replay(rec, b, random_cfg) == value)
        ++ok;
    }
    std::cout << "audited " << records.size() << " records, " << ok
              << " consistent\n";
    return ok == records.size() ? 0 : 1;
  }
  if (!b.weak_dependence())
    std::cerr << "warning: spec is not weak-dependence; runs may hit the "
                 "event cap\n";
  ensure_directory(args.out_dir);

  const auto est =
      perfect_sample_alpha(b, spec.N, args.samples, args.seed, args.threads);
  json summary;
  summary["alpha"] = est.mean;
  summary["stderr"] = est.stderr_;
  summary["samples"] = est.n;
  summary["capped"] = est.capped;
  summary["seed"] = args.seed;
  summary["version"] = kVersion;

  if (args.stats) {
    const auto stats = dual_statistics(b, spec.N, args.samples, args.seed, {},
                                       {}, args.threads);
    CsvWriter range_csv(join_path(args.out_dir, "range_tail.csv"),
                        "ell,p_max_ge_ell", file_metadata(spec, args.seed));
    for (std::size_t i = 0; i < stats.ell_grid.size(); ++i)
      range_csv.row({static_cast<double>(stats.ell_grid[i]),
                     stats.range_tail[i]});
    CsvWriter surv_csv(join_path(args.out_dir, "survival.csv"), "t,p_T_gt_t",
                       file_metadata(spec, args.seed));
    for (std::size_t i = 0; i < stats.t_grid.size(); ++i)
      surv_csv.row({stats.t_grid[i], stats.survival[i]});
    summary["mean_created"] = stats.mean_created;
    summary["created_bound"] = stats.created_bound;
  }
  if (args.records > 0)
    write_records(join_path(args.out_dir, "records.bin"),
                  sample_records(b, spec.N, args.records, args.seed + 0x9E37));
  write_text_file(join_path(args.out_dir, "summary.json"), summary.dump(2));
  std::cout << "alpha = " << est.mean << " +- " << est.stderr_ << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"boundary-driven exclusion process laboratory"};
  app.require_subcommand(1);
  app.fallthrough();  // --seed/--threads/--out may follow the subcommand

  std::uint64_t global_seed = 1;
  int global_threads = 1;
  std::string global_out;
  app.add_option("--seed", global_seed, "master seed")->capture_default_str();
  app.add_option("--threads", global_threads, "worker threads")
      ->capture_default_str();
  app.add_option("--out", global_out,
                 "output directory (default: $SEPSIM_OUT or ./out)");

  auto out_dir = [&](const std::string& leaf) {
    return global_out.empty() ? join_path(default_output_root(), leaf)
                              : global_out;
  };

  // rates decompose
  auto* rates = app.add_subcommand("rates", "rate-algebra utilities");
  rates->require_subcommand(1);
  auto* decompose = rates->add_subcommand(
      "decompose", "split Glauber rates into reservoir/copy parameters");
  std::string rates_path;
  decompose->add_option("table", rates_path, "rate table JSON")->required();

  // density
  auto* density = app.add_subcommand("density", "stationary one-point solve");
  std::string density_spec, density_out = "profile.csv";
  int density_N = 0;
  density->add_option("--spec", density_spec, "model spec JSON")->required();
  density->add_option("--N", density_N, "lattice size override");
  density->add_option("--out", density_out, "output CSV")
      ->capture_default_str();

  // exact
  auto* exact = app.add_subcommand("exact", "brute-force stationary state");
  std::string exact_spec, exact_obs = "density,correlation";
  exact->add_option("--spec", exact_spec, "model spec JSON")->required();
  exact->add_option("--observables", exact_obs, "density,correlation")
      ->capture_default_str();

  // correlations
  auto* corr = app.add_subcommand("correlations",
                                  "two-point boundary-value problems");
  CorrelationArgs corr_args;
  corr->add_option("--spec", corr_args.spec_path, "model spec JSON")
      ->required();
  corr->add_option("--model", corr_args.model, "1 or 2 (checked against spec)");
  corr->add_option("--N", corr_args.N_override, "lattice size override");
  corr->add_option("--mode", corr_args.mode, "solve | mc | both")
      ->capture_default_str();
  corr->add_option("--left-data", corr_args.left_data,
                   "model 2 left column: zero | mc | exact")
      ->capture_default_str();
  corr->add_option("--mc-samples", corr_args.mc_samples, "walk samples")
      ->capture_default_str();

  // simulate
  auto* sim = app.add_subcommand("simulate", "kinetic Monte Carlo estimate");
  SimulateArgs sim_args;
  sim->add_option("--spec", sim_args.spec_path, "model spec JSON")->required();
  sim->add_option("--N", sim_args.N_override, "lattice size override");
  sim->add_option("--ell", sim_args.ell, "speed factor override (model 3)");
  sim->add_option("--samples", sim_args.batches, "number of batches")
      ->capture_default_str();
  sim->add_option("--burn-in", sim_args.burn_in, "burn-in time (default 10 N^2)");
  sim->add_option("--batch-len", sim_args.batch_len,
                  "batch length (default N^2)");
  sim->add_option("--snapshot-dt", sim_args.snapshot_dt,
                  "also dump bit-packed snapshots at this interval");
  sim->add_option("--horizon", sim_args.horizon, "snapshot horizon");

  // dual
  auto* dual = app.add_subcommand("dual", "revealment process / perfect sampling");
  DualArgs dual_args;
  dual->add_option("--spec", dual_args.spec_path, "model spec JSON")
      ->required();
  dual->add_option("--N", dual_args.N_override, "lattice size override");
  dual->add_option("--samples", dual_args.samples, "number of runs")
      ->capture_default_str();
  dual->add_flag("--stats", dual_args.stats, "emit survival and range curves");
  dual->add_option("--records", dual_args.records,
                   "persist this many replayable records");
  dual->add_option("--audit", dual_args.audit_path,
                   "verify a records.bin file against forward replay");

  // experiment
  auto* exp = app.add_subcommand("experiment", "run a configured experiment");
  std::string exp_config;
  exp->add_option("config", exp_config, "experiment config JSON")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (decompose->parsed()) return cmd_rates_decompose(rates_path);
    if (density->parsed())
      return cmd_density(density_spec, density_N, density_out);
    if (exact->parsed())
      return cmd_exact(exact_spec, exact_obs, out_dir("exact"));
    if (corr->parsed()) {
      corr_args.seed = global_seed;
      corr_args.out_dir = out_dir("correlations");
      return cmd_correlations(corr_args);
    }
    if (sim->parsed()) {
      sim_args.seed = global_seed;
      sim_args.out_dir = out_dir("simulate");
      return cmd_simulate(sim_args);
    }
    if (dual->parsed()) {
      dual_args.seed = global_seed;
      dual_args.threads = global_threads;
      dual_args.out_dir = out_dir("dual");
      return cmd_dual(dual_args);
    }
    if (exp->parsed()) {
      auto cfg = load_experiment_config(exp_config);
      if (global_seed != 1) cfg.seed = global_seed;
      if (!global_out.empty()) cfg.out_dir = global_out;
      cfg.threads = global_threads;
      const auto report = run_experiment(cfg);
      std::cout << report.summary << "\n";
      return report.passed ? 0 : 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
