#include "sep/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <future>
#include <sstream>

#include <json.hpp>

#include "sep/correlation.hpp"
#include "sep/density.hpp"
#include "sep/dual.hpp"
#include "sep/errors.hpp"
#include "sep/exact.hpp"
#include "sep/io.hpp"
#include "sep/kinetic.hpp"
#include "sep/rate_algebra.hpp"
#include "sep/rng.hpp"

namespace sep {

using nlohmann::json;

FitResult fit_power_law(std::span<const std::pair<double, double>> points) {
  if (points.size() < 3)
    throw SpecError("power-law fit needs at least 3 points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
  for (auto [x, y] : points) {
    if (x <= 0.0 || y <= 0.0)
      throw SpecError("power-law fit needs strictly positive points");
    const double lx = std::log(x), ly = std::log(y);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    syy += ly * ly;
  }
  const double n = static_cast<double>(points.size());
  const double denom = n * sxx - sx * sx;
  FitResult fit;
  fit.slope = (n * sxy - sx * sy) / denom;
  fit.intercept = (sy - fit.slope * sx) / n;
  double ss_res = 0, ss_tot = 0;
  const double ybar = sy / n;
  for (auto [x, y] : points) {
    const double ly = std::log(y);
    const double pred = fit.intercept + fit.slope * std::log(x);
    ss_res += (ly - pred) * (ly - pred);
    ss_tot += (ly - ybar) * (ly - ybar);
  }
  fit.r2 = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
  return fit;
}

const char* to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::hydrostatic_m1: return "hydrostatic_m1";
    case ExperimentKind::hydrostatic_m2: return "hydrostatic_m2";
    case ExperimentKind::hydrostatic_m3: return "hydrostatic_m3";
    case ExperimentKind::correlation_decay: return "correlation_decay";
    case ExperimentKind::dual_bounds: return "dual_bounds";
    case ExperimentKind::speeded_scaling: return "speeded_scaling";
    default: return "rate_roundtrip";
  }
}

ExperimentKind experiment_kind_from_string(const std::string& name) {
  for (int k = 0; k <= static_cast<int>(ExperimentKind::rate_roundtrip); ++k) {
    const auto kind = static_cast<ExperimentKind>(k);
    if (name == to_string(kind)) return kind;
  }
  throw SpecError("unknown experiment kind: \"" + name + "\"");
}

std::string default_output_root() {
  if (const char* env = std::getenv("SEPSIM_OUT")) return env;
  return "out";
}

namespace {

int line_of_offset(const std::string& text, std::size_t byte) {
  int line = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i)
    if (text[i] == '\n') ++line;
  return line;
}

int line_of_key(const std::string& text, const std::string& key) {
  const auto pos = text.find("\"" + key + "\"");
  return pos == std::string::npos ? 1 : line_of_offset(text, pos);
}

[[noreturn]] void config_error(const std::string& text, const std::string& key,
                               const std::string& what) {
  throw SpecError("experiment config, line " +
                  std::to_string(line_of_key(text, key)) + ": " + what);
}

}  // namespace

ExperimentConfig parse_experiment_config(const std::string& text,
                                         const std::string& base_dir) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw SpecError("experiment config, line " +
                    std::to_string(line_of_offset(text, e.byte)) + ": " +
                    e.what());
  }
  ExperimentConfig cfg;
  if (!j.contains("kind")) config_error(text, "kind", "missing field 'kind'");
  try {
    cfg.kind = experiment_kind_from_string(j.at("kind").get<std::string>());
  } catch (const SpecError& e) {
    config_error(text, "kind", e.what());
  }
  if (j.contains("spec")) {
    cfg.spec = parse_model_spec(j.at("spec").dump());
    cfg.has_spec = true;
  } else if (j.contains("spec_file")) {
    auto path = j.at("spec_file").get<std::string>();
    if (!base_dir.empty() && !path.empty() && path[0] != '/')
      path = join_path(base_dir, path);
    cfg.spec = load_model_spec(path);
    cfg.has_spec = true;
  }
  if (j.contains("N_values")) {
    cfg.N_values = j.at("N_values").get<std::vector<int>>();
    if (cfg.N_values.empty() ||
        !std::is_sorted(cfg.N_values.begin(), cfg.N_values.end()) ||
        std::adjacent_find(cfg.N_values.begin(), cfg.N_values.end()) !=
            cfg.N_values.end())
      config_error(text, "N_values", "N_values must be non-empty and increasing");
  }
  if (j.contains("ell_values")) {
    cfg.ell_values = j.at("ell_values").get<std::vector<double>>();
    if (cfg.ell_values.empty() ||
        !std::is_sorted(cfg.ell_values.begin(), cfg.ell_values.end()))
      config_error(text, "ell_values",
                   "ell_values must be non-empty and increasing");
  }
  cfg.samples = j.value("samples", std::size_t{10000});
  cfg.seed = j.value("seed", std::uint64_t{1});
  cfg.threads = j.value("threads", 1);
  cfg.out_dir = j.value("out", std::string{});
  if (cfg.out_dir.empty())
    cfg.out_dir = join_path(default_output_root(), to_string(cfg.kind));

  const bool needs_spec = cfg.kind != ExperimentKind::rate_roundtrip;
  if (needs_spec && !cfg.has_spec)
    config_error(text, "kind", "this experiment kind needs 'spec' or 'spec_file'");
  if (cfg.has_spec) {
    const int model = cfg.spec.model();
    auto expect = [&](int m) {
      if (model != m)
        config_error(text, "spec",
                     std::string("experiment '") + to_string(cfg.kind) +
                         "' needs a model-" + std::to_string(m) + " spec");
    };
    switch (cfg.kind) {
      case ExperimentKind::hydrostatic_m1:
      case ExperimentKind::correlation_decay:
        expect(1);
        break;
      case ExperimentKind::hydrostatic_m2:
      case ExperimentKind::dual_bounds:
        expect(2);
        break;
      case ExperimentKind::hydrostatic_m3:
      case ExperimentKind::speeded_scaling:
        expect(3);
        break;
      default:
        break;
    }
  }
  return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  const auto dir = std::string(path).find('/') == std::string::npos
                       ? std::string(".")
                       : path.substr(0, path.rfind('/'));
  return parse_experiment_config(read_text_file(path), dir);
}

DegreePreservingSpec random_degree_preserving_spec(std::uint64_t seed, int p,
                                                   ErgodicityTag klass) {
  Rng rng(seed);
  // dyadic grids keep the rate algebra exact in double arithmetic
  auto grid = [&](double scale) {
    return static_cast<double>(rng.uniform_below(129)) / 64.0 * scale;
  };
  DegreePreservingSpec spec = make_degree_preserving_spec(
      p, 0.25 + 0.5 * (static_cast<double>(rng.uniform_below(17)) / 16.0));
  for (int i = 0; i <= p; ++i) {
    for (int k = 0; k <= p; ++k) {
      if (i == k) continue;
      if (rng.bernoulli(0.6)) spec.c(i, k) = grid(1.0);
      if (klass != ErgodicityTag::two_absorbing && rng.bernoulli(0.4))
        spec.a(i, k) = grid(1.0);
    }
  }
  if (klass == ErgodicityTag::unique_stationary) {
    for (int i = 0; i <= p; ++i) {
      if (rng.bernoulli(0.7))
        spec.set_reservoir(i - p, grid(2.0),
                           static_cast<double>(rng.uniform_below(17)) / 16.0);
    }
    // guarantee the ergodicity condition
    if (spec.sum_r() + spec.sum_a() == 0.0) spec.set_reservoir(-p, 1.0, 0.5);
  } else if (klass == ErgodicityTag::two_absorbing) {
    spec.a.setZero();
    if (spec.sum_c() == 0.0) spec.c(0, 1) = 1.0;
  } else {
    spec.a.setZero();
    spec.c.setZero();
  }
  spec.validate();
  return spec;
}

namespace {

struct Summary {
  json j;
  bool passed = true;

  void check(const std::string& name, bool ok, json details) {
    details["pass"] = ok;
    j["checks"][name] = std::move(details);
    passed = passed && ok;
  }
};

std::vector<std::pair<std::string, std::string>> metadata(
    const ExperimentConfig& cfg) {
  std::vector<std::pair<std::string, std::string>> md;
  md.emplace_back("version", kVersion);
  md.emplace_back("kind", to_string(cfg.kind));
  md.emplace_back("seed", std::to_string(cfg.seed));
  if (cfg.has_spec) {
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(spec_hash(cfg.spec)));
    md.emplace_back("spec_hash", buf);
  }
  return md;
}

ExperimentReport finish(const ExperimentConfig& cfg, Summary& summary) {
  summary.j["kind"] = to_string(cfg.kind);
  summary.j["seed"] = cfg.seed;
  summary.j["version"] = kVersion;
  if (cfg.has_spec) {
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(spec_hash(cfg.spec)));
    summary.j["spec_hash"] = buf;
  }
  summary.j["pass"] = summary.passed;
  ExperimentReport report;
  report.passed = summary.passed;
  report.summary = summary.j.dump(2);
  write_text_file(join_path(cfg.out_dir, "summary.json"), report.summary);
  return report;
}

ExperimentReport run_hydrostatic_m1(const ExperimentConfig& cfg) {
  const auto& spec = cfg.spec.degree_preserving();
  std::vector<int> Ns = cfg.N_values.empty()
                            ? std::vector<int>{100, 200, 400, 800}
                            : cfg.N_values;
  const auto rho = solve_left_density(spec);
  const auto u = macroscopic_profile(rho.at(0), spec.beta);

  CsvWriter csv(join_path(cfg.out_dir, "data.csv"),
                "N,err_rho0,l1_hydrostatic,interpolation_defect",
                metadata(cfg));
  std::vector<std::pair<double, double>> points;
  for (int N : Ns) {
    const auto prof = solve_finite_one_point(spec, N);
    const double err = std::abs(prof.at(0) - rho.at(0));
    const auto pe = profile_error(prof, N, u, nullptr);
    csv.row({static_cast<double>(N), err, pe.l1, prof.interpolation_defect});
    points.emplace_back(N, err);
  }
  const auto fit = fit_power_law(points);

  std::vector<PlotSeries> series;
  series.push_back({"|rho_N(0) - rho(0)|", points, true});
  PlotSeries fitted{"fit slope " + CsvWriter::format(fit.slope), {}, true};
  for (auto [x, y] : points)
    fitted.points.emplace_back(
        x, std::exp(fit.intercept + fit.slope * std::log(x)));
  series.push_back(fitted);
  write_svg_plot(join_path(cfg.out_dir, "plot.svg"),
                 "Hydrostatic scaling, degree-preserving boundary", "N",
                 "error", series, true, metadata(cfg));

  Summary s;
  s.check("power_law",
          fit.slope <= -0.9 && fit.r2 >= 0.99,
          {{"slope", fit.slope}, {"r2", fit.r2}, {"slope_max", -0.9},
           {"r2_min", 0.99}});
  return finish(cfg, s);
}

ExperimentReport run_hydrostatic_m2(const ExperimentConfig& cfg) {
  const auto& spec = cfg.spec.flip();
  std::vector<int> Ns =
      cfg.N_values.empty() ? std::vector<int>{6, 8, 12, 16} : cfg.N_values;

  CsvWriter csv(join_path(cfg.out_dir, "data.csv"), "N,alpha,se", metadata(cfg));
  std::vector<AlphaEstimate> estimates;
  for (int N : Ns) {
    const auto est = perfect_sample_alpha(spec, N, cfg.samples, cfg.seed);
    csv.row({static_cast<double>(N), est.mean, est.stderr_});
    estimates.push_back(est);
  }

  Summary s;
  bool all_ok = true;
  json pairs = json::array();
  for (std::size_t i = 0; i + 1 < Ns.size(); ++i) {
    const auto coupling =
        coupling_experiment(spec, Ns[i], Ns[i + 1], cfg.samples, cfg.seed);
    const double gap = std::abs(estimates[i].mean - estimates[i + 1].mean);
    const double budget = coupling.reach_prob +
                          3.0 * (estimates[i].stderr_ +
                                 estimates[i + 1].stderr_ + coupling.stderr_);
    const bool ok = gap <= budget && coupling.divergences == 0;
    all_ok = all_ok && ok;
    pairs.push_back({{"N", Ns[i]},
                     {"M", Ns[i + 1]},
                     {"gap", gap},
                     {"coupling_bound", coupling.reach_prob},
                     {"budget", budget},
                     {"pass", ok}});
  }
  s.check("cauchy_by_coupling", all_ok, {{"pairs", pairs}});

  std::vector<PlotSeries> series;
  PlotSeries pts{"alpha_N", {}, true};
  for (std::size_t i = 0; i < Ns.size(); ++i)
    pts.points.emplace_back(Ns[i], estimates[i].mean);
  series.push_back(pts);
  write_svg_plot(join_path(cfg.out_dir, "plot.svg"),
                 "Perfect-sampled left density", "N", "alpha", series, false,
                 metadata(cfg));
  return finish(cfg, s);
}

ExperimentReport run_hydrostatic_m3(const ExperimentConfig& cfg) {
  const auto& spec = cfg.spec.speeded();
  std::vector<int> Ns =
      cfg.N_values.empty() ? std::vector<int>{6, 8, 10, 12} : cfg.N_values;

  const auto block = block_generator(spec);
  const auto block_mu = stationary_distribution(block);
  const auto rho_block = observable_density(block, block_mu);
  const auto u = macroscopic_profile(rho_block.at(0), spec.beta);

  CsvWriter csv(join_path(cfg.out_dir, "data.csv"), "N,ell,l1_hydrostatic",
                metadata(cfg));
  std::vector<std::pair<double, double>> points;
  for (std::size_t i = 0; i < Ns.size(); ++i) {
    ModelSpec ms = cfg.spec;
    ms.N = Ns[i];
    auto& b = std::get<SpeededBoundarySpec>(ms.boundary);
    b.ell = i < cfg.ell_values.size() ? cfg.ell_values[i]
                                      : static_cast<double>(Ns[i]);
    const auto G = build_generator(ms);
    const auto mu = stationary_distribution(G);
    const auto rho = observable_density(G, mu);
    const auto pe = profile_error(rho, Ns[i], u, nullptr);
    csv.row({static_cast<double>(Ns[i]), b.ell, pe.l1});
    points.emplace_back(Ns[i], pe.l1);
  }

  Summary s;
  bool decreasing = true;
  for (std::size_t i = 0; i + 1 < points.size(); ++i)
    decreasing = decreasing && points[i + 1].second <= 1.05 * points[i].second;
  const bool shrunk = points.back().second <= 0.8 * points.front().second;
  s.check("l1_error_decreases", decreasing && shrunk,
          {{"first", points.front().second}, {"last", points.back().second}});

  write_svg_plot(join_path(cfg.out_dir, "plot.svg"),
                 "Hydrostatic error, speeded boundary", "N", "L1 error",
                 {{"l1 error", points, true}}, true, metadata(cfg));
  return finish(cfg, s);
}

ExperimentReport run_correlation_decay(const ExperimentConfig& cfg) {
  const auto& spec = cfg.spec.degree_preserving();
  if (spec.sum_r() <= 0.0)
    throw SpecError("correlation decay experiment needs sum r > 0");
  std::vector<int> Ns = cfg.N_values.empty() ? std::vector<int>{50, 100, 200}
                                             : cfg.N_values;

  CsvWriter csv(join_path(cfg.out_dir, "data.csv"), "N,max_phi_beyond_quarter",
                metadata(cfg));
  std::vector<std::pair<double, double>> points;
  for (int N : Ns) {
    const auto rho = solve_finite_one_point(spec, N);
    const auto sys = assemble_system_model1(spec, N, rho);
    const auto sol = solve_correlations(sys);
    const double stat = sol.field.max_abs_beyond(N / 4);
    csv.row({static_cast<double>(N), stat});
    points.emplace_back(N, stat);
  }

  Summary s;
  bool decreasing = true;
  for (std::size_t i = 0; i + 1 < points.size(); ++i)
    decreasing = decreasing && points[i + 1].second < points[i].second;
  const bool shrunk = points.back().second <= 0.4 * points.front().second;
  s.check("decay", decreasing && shrunk,
          {{"values", [&] {
              json arr = json::array();
              for (auto [n, v] : points) arr.push_back({{"N", n}, {"max", v}});
              return arr;
            }()},
           {"ratio_max", 0.4}});

  write_svg_plot(join_path(cfg.out_dir, "plot.svg"),
                 "Two-point decay beyond N/4", "N", "max |phi|",
                 {{"max |phi|, j > N/4", points, true}}, true, metadata(cfg));
  return finish(cfg, s);
}

ExperimentReport run_dual_bounds(const ExperimentConfig& cfg) {
  const auto& spec = cfg.spec.flip();
  if (!spec.weak_dependence())
    throw SpecError("dual bounds experiment needs a weak-dependence spec");
  const auto stats =
      dual_statistics(spec, cfg.spec.N, cfg.samples, cfg.seed);

  CsvWriter range_csv(join_path(cfg.out_dir, "range_tail.csv"),
                      "ell,p_max_ge_ell", metadata(cfg));
  std::vector<std::pair<double, double>> range_pts;
  for (std::size_t i = 0; i < stats.ell_grid.size(); ++i) {
    range_csv.row({static_cast<double>(stats.ell_grid[i]),
                   stats.range_tail[i]});
    if (stats.range_tail[i] > 0.0)
      range_pts.emplace_back(stats.ell_grid[i], stats.range_tail[i]);
  }
  CsvWriter surv_csv(join_path(cfg.out_dir, "survival.csv"), "t,p_T_gt_t",
                     metadata(cfg));
  for (std::size_t i = 0; i < stats.t_grid.size(); ++i)
    surv_csv.row({stats.t_grid[i], stats.survival[i]});

  const auto fit = fit_power_law(range_pts);

  Summary s;
  s.check("created_mean_bound",
          stats.mean_created <= stats.created_bound + 3.0 * stats.se_created,
          {{"mean", stats.mean_created},
           {"bound", stats.created_bound},
           {"se", stats.se_created}});
  s.check("range_tail_slope", fit.slope <= -0.8,
          {{"slope", fit.slope}, {"slope_max", -0.8}});
  s.j["capped"] = stats.capped;

  write_svg_plot(join_path(cfg.out_dir, "plot.svg"), "Dual range tail", "ell",
                 "P[max site >= ell]", {{"tail", range_pts, true}}, true,
                 metadata(cfg));
  return finish(cfg, s);
}

ExperimentReport run_speeded_scaling(const ExperimentConfig& cfg) {
  const auto& spec = cfg.spec.speeded();
  std::vector<double> ells = cfg.ell_values.empty()
                                 ? std::vector<double>{1, 4, 16, 64, 256}
                                 : cfg.ell_values;

  const auto block = block_generator(spec);
  const auto block_mu = stationary_distribution(block);
  const auto rho_block = observable_density(block, block_mu);

  CsvWriter csv(join_path(cfg.out_dir, "data.csv"), "ell,err_rho0,bound",
                metadata(cfg));
  std::vector<std::pair<double, double>> points;
  std::vector<double> errs;
  for (double ell : ells) {
    ModelSpec ms = cfg.spec;
    std::get<SpeededBoundarySpec>(ms.boundary).ell = ell;
    const auto G = build_generator(ms);
    const auto mu = stationary_distribution(G);
    const auto rho = observable_density(G, mu);
    errs.push_back(std::abs(rho.at(0) - rho_block.at(0)));
    points.emplace_back(ell, errs.back());
  }
  const double C = errs.front() * std::sqrt(ells.front());
  bool bounded = true, monotone = true;
  for (std::size_t i = 0; i < ells.size(); ++i) {
    const double bound = C / std::sqrt(ells[i]);
    csv.row({ells[i], errs[i], bound});
    bounded = bounded && errs[i] <= bound * (1.0 + 1e-9);
    if (i) monotone = monotone && errs[i] <= errs[i - 1] * (1.0 + 1e-12);
  }

  Summary s;
  s.check("sqrt_ell_bound", bounded, {{"C", C}});
  s.check("non_increasing", monotone, {{"err_first", errs.front()},
                                       {"err_last", errs.back()}});
  write_svg_plot(join_path(cfg.out_dir, "plot.svg"),
                 "Speeded-boundary scaling", "ell", "|rho_N(0) - rho(0)|",
                 {{"error", points, true}}, true, metadata(cfg));
  return finish(cfg, s);
}

ExperimentReport run_rate_roundtrip(const ExperimentConfig& cfg) {
  const std::size_t count = cfg.samples ? cfg.samples : 100;
  CsvWriter csv(join_path(cfg.out_dir, "data.csv"),
                "index,p,class,roundtrip_exact,classes_agree", metadata(cfg));
  bool all_exact = true, all_agree = true;
  for (std::size_t i = 0; i < count; ++i) {
    const int p = 1 + static_cast<int>(i % 3);
    const ErgodicityTag klass =
        i % 5 == 3 ? ErgodicityTag::two_absorbing
                   : (i % 5 == 4 ? ErgodicityTag::other
                                 : ErgodicityTag::unique_stationary);
    const auto spec = random_degree_preserving_spec(cfg.seed + i, p, klass);
    const auto table = compose_spec(spec);
    const auto coeffs = subset_coefficients(table);
    bool exact = check_degree_preserving(coeffs).empty();
    if (exact) {
      const auto spec2 = decompose_rates(coeffs, spec.beta);
      const auto table2 = compose_spec(spec2);
      for (int b = 0; b <= p && exact; ++b)
        exact = table.rates[b] == table2.rates[b];
    }
    bool agree = true;
    try {
      const auto klass2 = classify_ergodicity(spec);
      agree = klass2.tag == klass;
      if (klass == ErgodicityTag::two_absorbing)
        agree = agree &&
                klass2.closed_classes ==
                    std::vector<std::vector<std::uint32_t>>{
                        {0u}, {(1u << (p + 1)) - 1u}};
    } catch (const SolverFailure&) {
      agree = false;
    }
    csv.row({static_cast<double>(i), static_cast<double>(p),
             static_cast<double>(static_cast<int>(klass)), exact ? 1.0 : 0.0,
             agree ? 1.0 : 0.0});
    all_exact = all_exact && exact;
    all_agree = all_agree && agree;
  }
  Summary s;
  s.check("roundtrip_exact", all_exact, {{"count", count}});
  s.check("classification_agrees", all_agree, {{"count", count}});
  return finish(cfg, s);
}

}  // namespace

ExperimentReport run_experiment(const ExperimentConfig& cfg) {
  ensure_directory(cfg.out_dir);
  switch (cfg.kind) {
    case ExperimentKind::hydrostatic_m1: return run_hydrostatic_m1(cfg);
    case ExperimentKind::hydrostatic_m2: return run_hydrostatic_m2(cfg);
    case ExperimentKind::hydrostatic_m3: return run_hydrostatic_m3(cfg);
    case ExperimentKind::correlation_decay: return run_correlation_decay(cfg);
    case ExperimentKind::dual_bounds: return run_dual_bounds(cfg);
    case ExperimentKind::speeded_scaling: return run_speeded_scaling(cfg);
    default: return run_rate_roundtrip(cfg);
  }
}

}  // namespace sep
