#include "sep/exact.hpp"

#include <Eigen/IterativeLinearSolvers>

#include <algorithm>
#include <bit>
#include <cmath>
#include <string>

#include "sep/errors.hpp"
#include "sep/rate_algebra.hpp"

namespace sep {

namespace {

using Triplets = std::vector<Eigen::Triplet<double>>;

void add_rate(Triplets& trips, std::uint32_t from, std::uint32_t to,
              double rate) {
  if (rate <= 0.0) return;
  trips.emplace_back(static_cast<int>(from), static_cast<int>(to), rate);
  trips.emplace_back(static_cast<int>(from), static_cast<int>(from), -rate);
}

GeneratorMatrix finalize(int model, int first_site, int num_sites,
                         Triplets& trips) {
  GeneratorMatrix G;
  G.model = model;
  G.first_site = first_site;
  G.num_sites = num_sites;
  const auto n = std::int64_t(1) << num_sites;
  G.Q.resize(n, n);
  G.Q.setFromTriplets(trips.begin(), trips.end());
  return G;
}

}  // namespace

GeneratorMatrix left_block_generator(const DegreePreservingSpec& spec) {
  spec.validate();
  const int p = spec.p;
  const std::uint32_t n_states = 1u << (p + 1);
  Triplets trips;
  for (std::uint32_t w = 0; w < n_states; ++w) {
    for (int b = 0; b + 1 <= p; ++b) {
      const std::uint32_t bits = (w >> b) & 3u;
      if (bits == 1u || bits == 2u) add_rate(trips, w, w ^ (3u << b), 1.0);
    }
    for (int b = 0; b <= p; ++b)
      add_rate(trips, w, w ^ (1u << b), left_flip_rate(spec, b - p, w));
  }
  return finalize(1, -p, p + 1, trips);
}

GeneratorMatrix block_generator(const SpeededBoundarySpec& spec) {
  spec.validate();
  const int n = spec.num_states();
  Triplets trips;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j)
        add_rate(trips, static_cast<std::uint32_t>(i),
                 static_cast<std::uint32_t>(j), spec.generator(i, j));
  return finalize(3, -spec.p, spec.p + 1, trips);
}

GeneratorMatrix build_generator(const ModelSpec& spec) {
  spec.validate();
  const int N = spec.N;
  const int model = spec.model();

  if (model == 2) {
    const auto& b = spec.flip();
    const int num_sites = N - 1;  // sites 1..N-1, bit = site - 1
    if (num_sites > kMaxExactSites)
      throw StateSpaceTooLarge("model 2 enumeration capped at N <= " +
                               std::to_string(kMaxExactSites + 1));
    const std::uint32_t n_states = 1u << num_sites;
    const std::uint32_t window_mask = (1u << b.p) - 1u;
    Triplets trips;
    for (std::uint32_t w = 0; w < n_states; ++w) {
      for (int e = 0; e + 1 < num_sites; ++e) {  // edges (site, site+1)
        const std::uint32_t bits = (w >> e) & 3u;
        if (bits == 1u || bits == 2u) add_rate(trips, w, w ^ (3u << e), 1.0);
      }
      add_rate(trips, w, w ^ 1u, b.rate(w & window_mask));
      const std::uint32_t right = 1u << (num_sites - 1);
      add_rate(trips, w, w ^ right,
               (w & right) ? 1.0 - b.beta : b.beta);
    }
    return finalize(2, 1, num_sites, trips);
  }

  const int p = spec.p();
  const int num_sites = N + p;  // sites -p..N-1, bit = site + p
  if (num_sites > kMaxExactSites)
    throw StateSpaceTooLarge("enumeration capped at N + p <= " +
                             std::to_string(kMaxExactSites));
  const std::uint32_t n_states = 1u << num_sites;
  const std::uint32_t block_mask = (1u << (p + 1)) - 1u;
  const double beta = spec.beta();
  Triplets trips;

  for (std::uint32_t w = 0; w < n_states; ++w) {
    // stirring: model 1 has edges on the whole lattice, model 3 only from
    // the junction (0,1) rightwards (the block chain handles -p..0).
    const int first_edge = (model == 1) ? 0 : p;
    for (int e = first_edge; e + 1 < num_sites; ++e) {
      const std::uint32_t bits = (w >> e) & 3u;
      if (bits == 1u || bits == 2u) add_rate(trips, w, w ^ (3u << e), 1.0);
    }
    if (model == 1) {
      const auto& b = spec.degree_preserving();
      for (int bb = 0; bb <= p; ++bb)
        add_rate(trips, w, w ^ (1u << bb),
                 left_flip_rate(b, bb - p, w & block_mask));
    } else {
      const auto& b = spec.speeded();
      const std::uint32_t xi = w & block_mask;
      for (std::uint32_t xi2 = 0; xi2 <= block_mask; ++xi2) {
        if (xi2 == xi) continue;
        add_rate(trips, w, (w & ~block_mask) | xi2,
                 b.ell * b.generator(xi, xi2));
      }
    }
    const std::uint32_t right = 1u << (num_sites - 1);
    add_rate(trips, w, w ^ right, (w & right) ? 1.0 - beta : beta);
  }
  return finalize(model, -p, num_sites, trips);
}

namespace {

struct ClosedClassInfo {
  std::size_t count = 0;
  std::int64_t representative = 0;  // a state inside some closed class
};

// Closed communicating classes of the rate graph via an iterative Tarjan
// pass over the sparse pattern.
ClosedClassInfo closed_classes(
    const Eigen::SparseMatrix<double, Eigen::RowMajor>& Q) {
  const std::int64_t n = Q.rows();
  std::vector<std::int32_t> comp(n, -1), index(n, -1), low(n, 0);
  std::vector<char> on_stack(n, 0);
  std::vector<std::int64_t> stack;
  std::int32_t next_index = 0, comp_count = 0;

  struct Frame {
    std::int64_t v;
    Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it;
  };

  for (std::int64_t root = 0; root < n; ++root) {
    if (index[root] != -1) continue;
    std::vector<Frame> call;
    call.push_back({root, {Q, root}});
    index[root] = low[root] = next_index++;
    stack.push_back(root);
    on_stack[root] = 1;
    while (!call.empty()) {
      auto& frame = call.back();
      bool descended = false;
      for (auto& it = frame.it; it; ++it) {
        const std::int64_t w = it.col();
        if (w == frame.v || it.value() <= 0.0) continue;
        if (index[w] == -1) {
          index[w] = low[w] = next_index++;
          stack.push_back(w);
          on_stack[w] = 1;
          ++it;
          call.push_back({w, {Q, w}});
          descended = true;
          break;
        }
        if (on_stack[w]) low[frame.v] = std::min(low[frame.v], index[w]);
      }
      if (descended) continue;
      const std::int64_t v = frame.v;
      if (low[v] == index[v]) {
        while (true) {
          const std::int64_t w = stack.back();
          stack.pop_back();
          on_stack[w] = 0;
          comp[w] = comp_count;
          if (w == v) break;
        }
        ++comp_count;
      }
      call.pop_back();
      if (!call.empty())
        low[call.back().v] = std::min(low[call.back().v], low[v]);
    }
  }

  std::vector<char> closed(comp_count, 1);
  for (std::int64_t v = 0; v < n; ++v)
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(Q, v);
         it; ++it)
      if (it.col() != v && it.value() > 0.0 && comp[it.col()] != comp[v])
        closed[comp[v]] = 0;
  ClosedClassInfo info;
  info.count = static_cast<std::size_t>(
      std::count(closed.begin(), closed.end(), char(1)));
  for (std::int64_t v = 0; v < n; ++v)
    if (closed[comp[v]]) {
      info.representative = v;
      break;
    }
  return info;
}

double l1_residual(const Eigen::SparseMatrix<double, Eigen::RowMajor>& Q,
                   const Eigen::VectorXd& mu) {
  // ||mu Q||_1 = ||Q^T mu||_1
  Eigen::VectorXd r = Q.transpose() * mu;
  return r.cwiseAbs().sum();
}

}  // namespace

StationaryState stationary_distribution(const GeneratorMatrix& G) {
  const std::int64_t n = static_cast<std::int64_t>(G.num_states());
  const auto classes = closed_classes(G.Q);
  if (classes.count != 1)
    throw ReducibleChain("rate graph has " + std::to_string(classes.count) +
                         " closed communicating classes");

  // Ground a recurrent state g: set mu_g = 1, drop its (redundant) balance
  // equation and solve the remaining (n-1)-dimensional system
  //   sum_{i != g} mu_i Q_{ij} = -Q_{gj},  j != g.
  // The grounded matrix is nonsingular when g lies in the closed class.
  // Direct LU only pays off on small state spaces: the hypercube-like
  // transition graph produces heavy fill-in, so larger systems go to
  // BiCGSTAB, with uniformized power iteration as a last resort.
  const std::int64_t g = classes.representative;
  auto reduced = [&](std::int64_t i) { return i - (i > g ? 1 : 0); };
  std::vector<Eigen::Triplet<double>> trips;
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n - 1);
  for (std::int64_t row = 0; row < n; ++row)
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(
             G.Q, row);
         it; ++it) {
      if (it.col() == g) continue;
      if (row == g)
        rhs(reduced(it.col())) = -it.value();
      else
        trips.emplace_back(static_cast<int>(reduced(it.col())),
                           static_cast<int>(reduced(row)), it.value());
    }
  Eigen::SparseMatrix<double> A(n - 1, n - 1);
  A.setFromTriplets(trips.begin(), trips.end());

  StationaryState out;
  out.weights.resize(n);
  bool solved = false;
  Eigen::VectorXd tail;
  if (n <= (std::int64_t(1) << 12)) {
    Eigen::SparseLU<Eigen::SparseMatrix<double>> solver;
    solver.compute(A);
    if (solver.info() != Eigen::Success)
      throw SolverFailure("stationary LU factorization failed");
    tail = solver.solve(rhs);
    solved = true;
  } else {
    Eigen::BiCGSTAB<Eigen::SparseMatrix<double>> solver;
    solver.setTolerance(1e-13);
    solver.setMaxIterations(20000);
    solver.compute(A);
    tail = solver.solve(rhs);
    solved = solver.info() == Eigen::Success;
  }
  if (solved) {
    out.weights(g) = 1.0;
    for (std::int64_t i = 0; i < n; ++i)
      if (i != g) out.weights(i) = tail(reduced(i));
  }
  if (!solved) {
    // uniformized power iteration
    double max_rate = 0.0;
    for (std::int64_t row = 0; row < n; ++row)
      max_rate = std::max(max_rate, -G.Q.coeff(row, row));
    const double lam = max_rate * 1.05 + 1.0;
    Eigen::VectorXd mu = Eigen::VectorXd::Constant(n, 1.0 / double(n));
    Eigen::SparseMatrix<double> Qt = G.Q.transpose();
    for (int iter = 0; iter < 2000000; ++iter) {
      Eigen::VectorXd flow = Qt * mu;
      if (iter % 16 == 0 && flow.cwiseAbs().sum() <= 1e-11) break;
      mu += flow / lam;
      mu /= mu.sum();
    }
    out.weights = mu;
  }

  // clean tiny negatives from the solve and renormalize
  for (std::int64_t i = 0; i < n; ++i) {
    if (out.weights(i) < -1e-9)
      throw SolverFailure("stationary weight strongly negative");
    out.weights(i) = std::max(out.weights(i), 0.0);
  }
  out.weights /= out.weights.sum();
  out.residual = l1_residual(G.Q, out.weights);
  if (out.residual > 1e-10)
    throw SolverFailure("stationary residual " + std::to_string(out.residual) +
                        " exceeds 1e-10");
  return out;
}

DensityProfile observable_density(const GeneratorMatrix& G,
                                  const StationaryState& mu) {
  DensityProfile out;
  out.first_site = G.first_site;
  out.role = ProfileRole::finite_N_rhoN;
  out.rho.assign(G.num_sites, 0.0);
  const std::int64_t n = static_cast<std::int64_t>(G.num_states());
  for (std::int64_t w = 0; w < n; ++w) {
    const double weight = mu.weights(w);
    if (weight == 0.0) continue;
    auto bits = static_cast<std::uint32_t>(w);
    while (bits) {
      out.rho[std::countr_zero(bits)] += weight;
      bits &= bits - 1;
    }
  }
  for (double& v : out.rho) v = std::clamp(v, 0.0, 1.0);
  return out;
}

CorrelationField observable_correlation(const GeneratorMatrix& G,
                                        const StationaryState& mu) {
  const int first = G.first_site;
  const int last = G.first_site + G.num_sites - 1;
  const DensityProfile rho = observable_density(G, mu);

  Eigen::MatrixXd second = Eigen::MatrixXd::Zero(G.num_sites, G.num_sites);
  const std::int64_t n = static_cast<std::int64_t>(G.num_states());
  std::vector<int> set_bits;
  for (std::int64_t w = 0; w < n; ++w) {
    const double weight = mu.weights(w);
    if (weight == 0.0) continue;
    set_bits.clear();
    auto bits = static_cast<std::uint32_t>(w);
    while (bits) {
      set_bits.push_back(std::countr_zero(bits));
      bits &= bits - 1;
    }
    for (std::size_t i = 0; i < set_bits.size(); ++i)
      for (std::size_t l = i + 1; l < set_bits.size(); ++l)
        second(set_bits[i], set_bits[l]) += weight;
  }

  CorrelationField field(first, last);
  for (int j = first; j < last; ++j)
    for (int k = j + 1; k <= last; ++k)
      field.set(j, k,
                second(j - first, k - first) - rho.at(j) * rho.at(k));
  return field;
}

}  // namespace sep
