#include "sep/correlation.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseLU>

#include "sep/errors.hpp"

namespace sep {

CorrelationField::CorrelationField(int first_site, int last_site)
    : first_(first_site), last_(last_site) {
  if (last_site <= first_site)
    throw SpecError("correlation field needs at least two sites");
  const std::size_t n = static_cast<std::size_t>(last_ - first_ + 1);
  values_.assign(n * (n - 1) / 2, 0.0);
}

std::size_t CorrelationField::pair_index(int j, int k) const {
  if (j > k) std::swap(j, k);
  if (j == k) throw std::out_of_range("diagonal is boundary data, not stored");
  if (j < first_ || k > last_) throw std::out_of_range("pair outside field");
  const std::size_t J = static_cast<std::size_t>(j - first_);
  const std::size_t K = static_cast<std::size_t>(k - first_);
  return K * (K - 1) / 2 + J;
}

double CorrelationField::phi(int sigma, int j, int k) const {
  if (sigma != 1 && sigma != -1) throw std::out_of_range("sigma must be +-1");
  const double v = values_[pair_index(j, k)];
  return sigma > 0 ? v : -v;
}

void CorrelationField::set(int j, int k, double value) {
  values_[pair_index(j, k)] = value;
}

double CorrelationField::max_abs() const {
  double m = 0.0;
  for (double v : values_) m = std::max(m, std::abs(v));
  return m;
}

double CorrelationField::max_abs_beyond(int j_min) const {
  double m = 0.0;
  for (int j = std::max(first_, j_min + 1); j < last_; ++j)
    for (int k = j + 1; k <= last_; ++k)
      m = std::max(m, std::abs(values_[pair_index(j, k)]));
  return m;
}

namespace {

std::size_t tri_pairs(int n_sites) {
  return static_cast<std::size_t>(n_sites) * (n_sites - 1) / 2;
}

std::size_t tri_index(int first_site, int j, int k) {
  const std::size_t J = static_cast<std::size_t>(j - first_site);
  const std::size_t K = static_cast<std::size_t>(k - first_site);
  return K * (K - 1) / 2 + J;
}

}  // namespace

std::int64_t DualWalkGenerator::index_of(const SimplexIndex& s) const {
  if (s.kind != SimplexIndex::Kind::interior) return -1;
  if (model == 1) {
    const std::size_t pairs = tri_pairs(N + p);
    const std::size_t block = (s.sigma == 1) ? 0 : 1;
    return static_cast<std::int64_t>(block * pairs + tri_index(-p, s.j, s.k));
  }
  return static_cast<std::int64_t>(tri_index(2, s.j, s.k));
}

SimplexIndex DualWalkGenerator::index_to_point(std::int64_t idx) const {
  SimplexIndex out;
  std::size_t u = static_cast<std::size_t>(idx);
  int first = 2;
  if (model == 1) {
    const std::size_t pairs = tri_pairs(N + p);
    out.sigma = (u < pairs) ? 1 : -1;
    if (u >= pairs) u -= pairs;
    first = -p;
  }
  // invert the triangular numbering
  std::size_t K = 1;
  while ((K + 1) * K / 2 <= u) ++K;
  const std::size_t J = u - K * (K - 1) / 2;
  out.j = first + static_cast<int>(J);
  out.k = first + static_cast<int>(K);
  return out;
}

double DualWalkGenerator::boundary_value(const SimplexIndex& s) const {
  switch (s.kind) {
    case SimplexIndex::Kind::killed:
    case SimplexIndex::Kind::right_edge:
      return 0.0;
    case SimplexIndex::Kind::diagonal:
      return s.sigma * diag_rho_var[s.j + p];
    case SimplexIndex::Kind::left_column:
      return left_column.empty() ? 0.0 : left_column[s.k - 3];
    default:
      throw std::out_of_range("interior point carries no boundary value");
  }
}

DualWalkGenerator assemble_system_model1(const DegreePreservingSpec& spec,
                                         int N, const DensityProfile& rho_N) {
  spec.validate();
  const int p = spec.p;
  if (rho_N.first_site != -p ||
      static_cast<int>(rho_N.rho.size()) != N + p)
    throw SpecError("density profile does not match the requested lattice");

  DualWalkGenerator sys;
  sys.model = 1;
  sys.N = N;
  sys.p = p;
  sys.has_sign = true;
  const std::size_t pairs = tri_pairs(N + p);
  const std::size_t total = 2 * pairs;
  sys.moves.assign(total, {});
  sys.out_rate.assign(total, 0.0);
  sys.source.assign(total, 0.0);
  sys.rhs_dirichlet.assign(total, 0.0);
  sys.diag_rho_var.resize(p + 1);
  for (int m = -p; m <= 0; ++m)
    sys.diag_rho_var[m + p] = rho_N.at(m) * (1.0 - rho_N.at(m));

  using Kind = SimplexIndex::Kind;
  for (int sblock = 0; sblock < 2; ++sblock) {
    const int sigma = sblock == 0 ? 1 : -1;
    auto idx_of = [&](int sg, int j, int k) {
      return static_cast<std::int64_t>(((sg == 1) ? 0 : 1) * pairs +
                                       tri_index(-p, j, k));
    };
    for (int j = -p; j < N - 1; ++j) {
      for (int k = j + 1; k <= N - 1; ++k) {
        const std::int64_t idx = idx_of(sigma, j, k);
        auto& mv = sys.moves[idx];
        auto add_interior = [&](int sg, int a, int b, double rate) {
          if (rate <= 0.0) return;
          if (a > b) std::swap(a, b);
          mv.push_back({rate, idx_of(sg, a, b), 0.0, Kind::interior});
        };
        auto add_cemetery = [&](Kind kind, double rate, double value) {
          if (rate <= 0.0) return;
          mv.push_back({rate, -1, value, kind});
        };

        // nearest-neighbor pair walk (first coordinate sigma untouched)
        if (k - j > 1) {
          if (j - 1 >= -p) add_interior(sigma, j - 1, k, 1.0);
          add_interior(sigma, j + 1, k, 1.0);
          add_interior(sigma, j, k - 1, 1.0);
          if (k + 1 <= N - 1) add_interior(sigma, j, k + 1, 1.0);
        } else {
          if (j - 1 >= -p) add_interior(sigma, j - 1, k, 1.0);
          if (k + 1 <= N - 1) add_interior(sigma, j, k + 1, 1.0);
        }

        // reservoir killing
        if (j <= 0) add_cemetery(Kind::killed, spec.reservoir_rate(j), 0.0);
        if (k <= 0) add_cemetery(Kind::killed, spec.reservoir_rate(k), 0.0);

        // right-edge absorption
        if (k == N - 1) add_cemetery(Kind::right_edge, 1.0, 0.0);

        // copy moves (same sigma) and inverse-copy moves (sigma flips)
        auto leg = [&](int fixed, int moving) {
          if (moving > 0) return;
          for (int m = -p; m <= 0; ++m) {
            if (m == moving) continue;
            const double rc = spec.copy_rate(moving, m);
            if (rc > 0.0) {
              if (m == fixed)
                add_cemetery(Kind::diagonal, rc,
                             sigma * sys.diag_rho_var[m + p]);
              else
                add_interior(sigma, m, fixed, rc);
            }
            const double ra = spec.anticopy_rate(moving, m);
            if (ra > 0.0) {
              if (m == fixed)
                add_cemetery(Kind::diagonal, ra,
                             -sigma * sys.diag_rho_var[m + p]);
              else
                add_interior(-sigma, m, fixed, ra);
            }
          }
        };
        leg(k, j);
        leg(j, k);

        // source term lives on the diagonal
        if (k == j + 1) {
          const double d = rho_N.at(j + 1) - rho_N.at(j);
          sys.source[idx] = -sigma * d * d;
        }
        for (const auto& t : mv) {
          sys.out_rate[idx] += t.rate;
          if (t.target < 0) sys.rhs_dirichlet[idx] += t.rate * t.boundary_value;
        }
      }
    }
  }
  return sys;
}

DualWalkGenerator assemble_system_model2(int N, double beta, double rho1,
                                         std::span<const double> left_data) {
  if (N < 5) throw SpecError("flip-model correlation system needs N >= 5");
  if (!left_data.empty() &&
      static_cast<int>(left_data.size()) != N - 3)
    throw SpecError("left boundary data must cover k = 3..N-1");

  DualWalkGenerator sys;
  sys.model = 2;
  sys.N = N;
  sys.p = 0;
  sys.has_sign = false;
  const std::size_t total = tri_pairs(N - 2);
  sys.moves.assign(total, {});
  sys.out_rate.assign(total, 0.0);
  sys.source.assign(total, 0.0);
  sys.rhs_dirichlet.assign(total, 0.0);
  sys.left_column.assign(left_data.begin(), left_data.end());
  if (sys.left_column.empty()) sys.left_column.assign(N - 3, 0.0);

  using Kind = SimplexIndex::Kind;
  const double increment = (beta - rho1) / (N - 1);
  const double F_diag = -increment * increment;

  for (int j = 2; j < N - 1; ++j) {
    for (int k = j + 1; k <= N - 1; ++k) {
      const std::int64_t idx = static_cast<std::int64_t>(tri_index(2, j, k));
      auto& mv = sys.moves[idx];
      auto add = [&](int a, int b, double rate) {
        if (a > b) std::swap(a, b);
        if (a == 1) {
          mv.push_back({rate, -1, sys.left_column[b - 3], Kind::left_column});
        } else if (b == N) {
          mv.push_back({rate, -1, 0.0, Kind::right_edge});
        } else {
          mv.push_back({rate, static_cast<std::int64_t>(tri_index(2, a, b)),
                        0.0, Kind::interior});
        }
      };

      if (k - j > 1) {
        add(j - 1, k, 1.0);
        add(j + 1, k, 1.0);
        add(j, k - 1, 1.0);
        add(j, k + 1, 1.0);
      } else {
        add(j - 1, k, 1.0);
        add(j, k + 1, 1.0);
        sys.source[idx] = F_diag;
      }
      for (const auto& t : mv) {
        sys.out_rate[idx] += t.rate;
        if (t.target < 0) sys.rhs_dirichlet[idx] += t.rate * t.boundary_value;
      }
    }
  }
  return sys;
}

double model2_phi1_closed_form(int N, double beta, double rho1, int j, int k) {
  const double d = beta - rho1;
  return -(d * d) / (static_cast<double>(N - 1) * (N - 1)) *
         (static_cast<double>(j - 1) * (N - k)) / (N - 2);
}

namespace {

Eigen::VectorXd solve_sparse(const Eigen::SparseMatrix<double>& A,
                             const Eigen::VectorXd& rhs) {
  if (A.rows() <= 400000) {
    Eigen::SparseLU<Eigen::SparseMatrix<double>> solver;
    solver.compute(A);
    if (solver.info() != Eigen::Success)
      throw SolverFailure("correlation LU factorization failed");
    return solver.solve(rhs);
  }
  Eigen::BiCGSTAB<Eigen::SparseMatrix<double>> solver;
  solver.setTolerance(1e-13);
  solver.setMaxIterations(200000);
  solver.compute(A);
  Eigen::VectorXd x = solver.solve(rhs);
  if (solver.info() != Eigen::Success)
    throw SolverFailure("correlation iterative solve stalled, residual " +
                        std::to_string(solver.error()));
  return x;
}

}  // namespace

CorrelationSolveResult solve_correlations(const DualWalkGenerator& sys) {
  const std::int64_t n = static_cast<std::int64_t>(sys.size());
  std::vector<Eigen::Triplet<double>> trips;
  Eigen::VectorXd rhs_F(n), rhs_b(n);
  for (std::int64_t i = 0; i < n; ++i) {
    trips.emplace_back(static_cast<int>(i), static_cast<int>(i),
                       sys.out_rate[i]);
    for (const auto& t : sys.moves[i])
      if (t.target >= 0)
        trips.emplace_back(static_cast<int>(i), static_cast<int>(t.target),
                           -t.rate);
    rhs_F(i) = sys.source[i];
    rhs_b(i) = sys.rhs_dirichlet[i];
  }
  Eigen::SparseMatrix<double> A(n, n);
  A.setFromTriplets(trips.begin(), trips.end());

  Eigen::VectorXd rhs = rhs_F + rhs_b;
  Eigen::VectorXd phi = solve_sparse(A, rhs);

  CorrelationSolveResult out;
  out.residual = (A * phi - rhs).cwiseAbs().maxCoeff();
  if (out.residual > 1e-10)
    throw SolverFailure("correlation residual " + std::to_string(out.residual) +
                        " exceeds 1e-10");

  if (sys.model == 1) {
    const std::size_t pairs = tri_pairs(sys.N + sys.p);
    for (std::size_t u = 0; u < pairs; ++u)
      out.antisymmetry_defect =
          std::max(out.antisymmetry_defect,
                   std::abs(phi(static_cast<std::int64_t>(u)) +
                            phi(static_cast<std::int64_t>(u + pairs))));
    if (out.antisymmetry_defect > 1e-10)
      throw SolverFailure("correlation antisymmetry violated by " +
                          std::to_string(out.antisymmetry_defect));
    out.field = CorrelationField(-sys.p, sys.N - 1);
    for (int j = -sys.p; j < sys.N - 1; ++j)
      for (int k = j + 1; k <= sys.N - 1; ++k)
        out.field.set(j, k, phi(static_cast<std::int64_t>(
                                tri_index(-sys.p, j, k))));
  } else {
    out.field = CorrelationField(2, sys.N - 1);
    for (int j = 2; j < sys.N - 1; ++j)
      for (int k = j + 1; k <= sys.N - 1; ++k)
        out.field.set(j, k,
                      phi(static_cast<std::int64_t>(tri_index(2, j, k))));

    // F-driven piece and its closed form (left data switched off).
    Eigen::VectorXd phi1 = solve_sparse(A, rhs_F);
    // The diagonal source is -((beta - rho1)/(N-1))^2, so the closed form
    // reduces to -inc2 (j-1)(N-k)/(N-2) with inc2 = -F_diag.
    double inc2 = 0.0;
    for (double f : sys.source)
      if (f != 0.0) inc2 = -f;
    CorrelationField f1(2, sys.N - 1);
    double defect = 0.0;
    for (int j = 2; j < sys.N - 1; ++j)
      for (int k = j + 1; k <= sys.N - 1; ++k) {
        const double v = phi1(static_cast<std::int64_t>(tri_index(2, j, k)));
        f1.set(j, k, v);
        const double closed =
            -inc2 * (static_cast<double>(j - 1) * (sys.N - k)) / (sys.N - 2);
        defect = std::max(defect, std::abs(v - closed));
      }
    out.phi1 = std::move(f1);
    out.phi1_defect = defect;
  }
  return out;
}

McEstimate mc_dual_walk(const DualWalkGenerator& sys, const SimplexIndex& start,
                        std::size_t n_samples, std::uint64_t seed) {
  McEstimate est;
  est.n = n_samples;
  if (start.kind != SimplexIndex::Kind::interior) {
    est.mean = sys.boundary_value(start);
    est.stderr_ = 0.0;
    return est;
  }
  const std::int64_t start_idx = sys.index_of(start);
  if (start_idx < 0 || start_idx >= static_cast<std::int64_t>(sys.size()))
    throw SpecError("mc_dual_walk start outside the simplex");

  Rng rng = Rng::stream(seed, 0x1D0);
  double sum = 0.0, sum_sq = 0.0;
  std::vector<double> rates;
  for (std::size_t s = 0; s < n_samples; ++s) {
    std::int64_t state = start_idx;
    double acc = 0.0;
    while (true) {
      const double out = sys.out_rate[state];
      acc += sys.source[state] * rng.exponential(out);
      const auto& mv = sys.moves[state];
      rates.clear();
      for (const auto& t : mv) rates.push_back(t.rate);
      const auto& chosen = mv[rng.pick_weighted(rates, out)];
      if (chosen.target < 0) {
        acc += chosen.boundary_value;
        break;
      }
      state = chosen.target;
    }
    sum += acc;
    sum_sq += acc * acc;
  }
  est.mean = sum / static_cast<double>(n_samples);
  const double var =
      std::max(0.0, sum_sq / static_cast<double>(n_samples) - est.mean * est.mean);
  est.stderr_ = std::sqrt(var / static_cast<double>(n_samples));
  return est;
}

std::vector<HittingRow> hitting_experiment(const DualWalkGenerator& sys,
                                           std::span<const SimplexIndex> starts,
                                           std::size_t n_samples,
                                           std::uint64_t seed) {
  if (sys.model != 1)
    throw SpecError("hitting experiment is defined for the model-1 dual");
  std::vector<HittingRow> rows;
  rows.reserve(starts.size());
  std::vector<double> rates;
  for (std::size_t si = 0; si < starts.size(); ++si) {
    const auto& start = starts[si];
    HittingRow row;
    row.start = start;
    row.n = n_samples;
    if (start.kind != SimplexIndex::Kind::interior) {
      row.prob = 0.0;
      rows.push_back(row);
      continue;
    }
    Rng rng = Rng::stream(seed, 0x515 + si);
    std::size_t hits = 0, diag = 0;
    for (std::size_t s = 0; s < n_samples; ++s) {
      std::int64_t state = sys.index_of(start);
      bool done = false;
      while (!done) {
        const SimplexIndex pt = sys.index_to_point(state);
        if (pt.k == 0 && pt.j < 0) {  // Sigma reached
          ++hits;
          break;
        }
        const auto& mv = sys.moves[state];
        rates.clear();
        for (const auto& t : mv) rates.push_back(t.rate);
        const auto& chosen = mv[rng.pick_weighted(rates, sys.out_rate[state])];
        if (chosen.target < 0) {
          if (chosen.cemetery == SimplexIndex::Kind::diagonal) ++diag;
          done = true;
        } else {
          state = chosen.target;
        }
      }
    }
    row.prob = static_cast<double>(hits) / static_cast<double>(n_samples);
    row.diagonal_frac = static_cast<double>(diag) / static_cast<double>(n_samples);
    row.stderr_ = std::sqrt(row.prob * (1.0 - row.prob) /
                            static_cast<double>(n_samples));
    rows.push_back(row);
  }
  return rows;
}

}  // namespace sep
