#include "sep/rate_algebra.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <string>

#include "sep/errors.hpp"

namespace sep {

void GlauberRateTable::validate() const {
  if (p < 1 || p > 16) throw SpecError("rate table needs 1 <= p <= 16");
  if (static_cast<int>(rates.size()) != p + 1)
    throw SpecError("rate table needs one row per block site");
  for (const auto& row : rates) {
    if (static_cast<int>(row.size()) != num_block_states())
      throw SpecError("rate table rows must have 2^{p+1} entries");
    for (double v : row)
      if (v < 0.0) throw SpecError("flip rates must be non-negative");
  }
}

SubsetCoefficients subset_coefficients(const GlauberRateTable& table) {
  table.validate();
  SubsetCoefficients out;
  out.p = table.p;
  out.R = table.rates;
  const int n = table.num_block_states();
  for (int bit = 0; bit <= table.p; ++bit) {
    for (auto& row : out.R) {
      for (int mask = 0; mask < n; ++mask) {
        if (mask & (1 << bit)) row[mask] -= row[mask ^ (1 << bit)];
      }
    }
  }
  return out;
}

GlauberRateTable table_from_coefficients(const SubsetCoefficients& coeffs) {
  GlauberRateTable out;
  out.p = coeffs.p;
  out.rates = coeffs.R;
  const int n = out.num_block_states();
  for (int bit = 0; bit <= coeffs.p; ++bit) {
    for (auto& row : out.rates) {
      for (int mask = 0; mask < n; ++mask) {
        if (mask & (1 << bit)) row[mask] += row[mask ^ (1 << bit)];
      }
    }
  }
  return out;
}

std::vector<DegreeViolation> check_degree_preserving(
    const SubsetCoefficients& coeffs, double tol) {
  std::vector<DegreeViolation> violations;
  const int p = coeffs.p;
  const std::uint32_t n = 1u << (p + 1);
  for (int b = 0; b <= p; ++b) {
    const int site = b - p;
    const std::uint32_t self = 1u << b;
    for (std::uint32_t mask = 0; mask < n; ++mask) {
      if (std::popcount(mask) < 2) continue;
      double expected = 0.0;
      if ((mask & self) && std::popcount(mask) == 2) {
        // Allowed pair {j,k}: tied to the singleton by the (1-2 eta_j)
        // coupling.
        expected = -2.0 * coeffs.R[b][mask ^ self];
      }
      const double actual = coeffs.R[b][mask];
      if (std::abs(actual - expected) > tol)
        violations.push_back({site, mask, actual, expected});
    }
  }
  return violations;
}

DegreePreservingSpec decompose_rates(const SubsetCoefficients& coeffs,
                                     double beta) {
  auto violations = check_degree_preserving(coeffs);
  if (!violations.empty()) {
    throw SpecError("rates are not degree-preserving (" +
                    std::to_string(violations.size()) +
                    " offending subsets); run the degree check for details");
  }
  const int p = coeffs.p;
  constexpr double kNoise = 1e-12;  // inversion arithmetic noise is clamped
  DegreePreservingSpec spec = make_degree_preserving_spec(p, beta);

  for (int b = 0; b <= p; ++b) {
    const int site = b - p;
    const double r_empty = coeffs.R[b][0];
    const double r_self = coeffs.R[b][1u << b];
    double pos_sum = 0.0;  // singletons with non-negative coefficient
    double neg_sum = 0.0;  // singletons with negative coefficient
    for (int k = 0; k <= p; ++k) {
      if (k == b) continue;
      double v = coeffs.R[b][1u << k];
      if (std::abs(v) <= kNoise) v = 0.0;
      if (v >= 0.0) {
        spec.c(b, k) = v;
        pos_sum += v;
      } else {
        spec.a(b, k) = -v;
        neg_sum += v;
      }
    }
    double p_j = r_empty + r_self - pos_sum;
    double q_j = r_empty + neg_sum;
    if (p_j < 0.0 && p_j >= -kNoise) p_j = 0.0;
    if (q_j < 0.0 && q_j >= -kNoise) q_j = 0.0;
    if (p_j < 0.0 || q_j < 0.0) {
      throw NegativityError(
          "rates at site " + std::to_string(site) +
          " take negative values (p_j=" + std::to_string(p_j) +
          ", q_j=" + std::to_string(q_j) + ")");
    }
    spec.creation[b] = q_j;
    spec.annihilation[b] = p_j;
  }
  spec.validate();
  return spec;
}

std::pair<double, double> reservoir_parts(const DegreePreservingSpec& spec,
                                          int site) {
  return {spec.creation_rate(site), spec.annihilation_rate(site)};
}

double left_flip_rate(const DegreePreservingSpec& spec, int site,
                      std::uint32_t block_word) {
  const int b = site + spec.p;
  const int self = (block_word >> b) & 1u;
  auto [creation, annihilation] = reservoir_parts(spec, site);
  double rate = self ? annihilation : creation;
  for (int k = 0; k <= spec.p; ++k) {
    if (k == b) continue;
    const int other = (block_word >> k) & 1u;
    if (other != self)
      rate += spec.c(b, k);
    else
      rate += spec.a(b, k);
  }
  return rate;
}

GlauberRateTable compose_spec(const DegreePreservingSpec& spec) {
  spec.validate();
  GlauberRateTable table;
  table.p = spec.p;
  const std::uint32_t n = 1u << (spec.p + 1);
  table.rates.assign(spec.p + 1, std::vector<double>(n, 0.0));
  for (int b = 0; b <= spec.p; ++b)
    for (std::uint32_t w = 0; w < n; ++w)
      table.rates[b][w] = left_flip_rate(spec, b - spec.p, w);
  return table;
}

namespace {

// Strongly connected components (iterative Tarjan) of the transition graph.
struct SccResult {
  std::vector<int> comp;  // state -> component id
  int count = 0;
};

SccResult strongly_connected_components(
    const std::vector<std::vector<int>>& adj) {
  const int n = static_cast<int>(adj.size());
  SccResult res;
  res.comp.assign(n, -1);
  std::vector<int> index(n, -1), low(n, 0), on_stack(n, 0), stack;
  int next_index = 0;

  struct Frame {
    int v;
    std::size_t child;
  };
  for (int root = 0; root < n; ++root) {
    if (index[root] != -1) continue;
    std::vector<Frame> call{{root, 0}};
    index[root] = low[root] = next_index++;
    stack.push_back(root);
    on_stack[root] = 1;
    while (!call.empty()) {
      auto& [v, child] = call.back();
      if (child < adj[v].size()) {
        int w = adj[v][child++];
        if (index[w] == -1) {
          index[w] = low[w] = next_index++;
          stack.push_back(w);
          on_stack[w] = 1;
          call.push_back({w, 0});
        } else if (on_stack[w]) {
          low[v] = std::min(low[v], index[w]);
        }
      } else {
        if (low[v] == index[v]) {
          while (true) {
            int w = stack.back();
            stack.pop_back();
            on_stack[w] = 0;
            res.comp[w] = res.count;
            if (w == v) break;
          }
          ++res.count;
        }
        int finished = v;
        call.pop_back();
        if (!call.empty())
          low[call.back().v] = std::min(low[call.back().v], low[finished]);
      }
    }
  }
  return res;
}

ErgodicityTag rate_sum_tag(const DegreePreservingSpec& spec) {
  if (spec.sum_r() + spec.sum_a() > 0.0) return ErgodicityTag::unique_stationary;
  if (spec.sum_c() > 0.0) return ErgodicityTag::two_absorbing;
  return ErgodicityTag::other;
}

}  // namespace

ErgodicityClass classify_ergodicity(const DegreePreservingSpec& spec) {
  spec.validate();
  const int p = spec.p;
  const int n = 1 << (p + 1);
  std::vector<std::vector<int>> adj(n);
  for (int w = 0; w < n; ++w) {
    // block stirring
    for (int b = 0; b + 1 <= p; ++b) {
      const int bits = (w >> b) & 3;
      if (bits == 1 || bits == 2) adj[w].push_back(w ^ (3 << b));
    }
    // reservoir / copy / inverse-copy flips
    for (int b = 0; b <= p; ++b) {
      if (left_flip_rate(spec, b - p, static_cast<std::uint32_t>(w)) > 0.0)
        adj[w].push_back(w ^ (1 << b));
    }
  }

  auto scc = strongly_connected_components(adj);
  std::vector<char> closed(scc.count, 1);
  for (int w = 0; w < n; ++w)
    for (int t : adj[w])
      if (scc.comp[t] != scc.comp[w]) closed[scc.comp[w]] = 0;

  ErgodicityClass out;
  for (int cidx = 0; cidx < scc.count; ++cidx) {
    if (!closed[cidx]) continue;
    std::vector<std::uint32_t> members;
    for (int w = 0; w < n; ++w)
      if (scc.comp[w] == cidx) members.push_back(static_cast<std::uint32_t>(w));
    std::sort(members.begin(), members.end());
    out.closed_classes.push_back(std::move(members));
  }
  std::sort(out.closed_classes.begin(), out.closed_classes.end());

  const std::uint32_t full = (1u << (p + 1)) - 1u;
  if (out.closed_classes.size() == 1) {
    out.tag = ErgodicityTag::unique_stationary;
  } else if (out.closed_classes.size() == 2 &&
             out.closed_classes[0] == std::vector<std::uint32_t>{0} &&
             out.closed_classes[1] == std::vector<std::uint32_t>{full}) {
    out.tag = ErgodicityTag::two_absorbing;
  } else {
    out.tag = ErgodicityTag::other;
  }
  out.rate_sum_tag = rate_sum_tag(spec);
  if (out.tag != out.rate_sum_tag)
    throw SolverFailure("ergodicity classification disagrees with rate sums");
  return out;
}

const char* to_string(ErgodicityTag tag) {
  switch (tag) {
    case ErgodicityTag::unique_stationary:
      return "unique_stationary";
    case ErgodicityTag::two_absorbing:
      return "two_absorbing";
    default:
      return "other";
  }
}

}  // namespace sep
