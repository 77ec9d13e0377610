#include "sep/dual.hpp"

#include <algorithm>
#include <atomic>
#include <cstring>
#include <fstream>
#include <cmath>
#include <future>
#include <limits>
#include <stdexcept>
#include <vector>

#include "sep/errors.hpp"
#include "sep/kinetic.hpp"

namespace sep {

bool DualState::contains(int site) const {
  return std::binary_search(sites.begin(), sites.end(), site);
}

namespace {

void insert_site(std::vector<int>& sites, int site) {
  auto it = std::lower_bound(sites.begin(), sites.end(), site);
  if (it == sites.end() || *it != site) sites.insert(it, site);
}

void erase_site(std::vector<int>& sites, int site) {
  auto it = std::lower_bound(sites.begin(), sites.end(), site);
  if (it != sites.end() && *it == site) sites.erase(it);
}

bool has_site(const std::vector<int>& sites, int site) {
  return std::binary_search(sites.begin(), sites.end(), site);
}

// Dual event classes recomputed from the current set; the cluster stays tiny
// under weak dependence so a linear rebuild per event is cheap.
struct DualClasses {
  std::vector<int> edges;  // left endpoints of active edges
  double A = 0.0, B = 0.0;
  double lambda_total = 0.0;
  double right_create = 0.0, right_annihilate = 0.0;
  double total = 0.0;
};

DualClasses active_classes(const std::vector<int>& sites, int N,
                           const FlipBoundarySpec& spec, double lambda_total) {
  DualClasses cl;
  int prev_edge = 0;  // edges labelled by left endpoint in 1..N-2
  for (int s : sites) {
    if (s - 1 >= 1 && s - 1 != prev_edge) {
      cl.edges.push_back(s - 1);
      prev_edge = s - 1;
    }
    if (s <= N - 2 && s != prev_edge) {
      cl.edges.push_back(s);
      prev_edge = s;
    }
  }
  cl.total = static_cast<double>(cl.edges.size());
  if (!sites.empty() && sites.front() == 1) {
    cl.A = spec.min_creation();
    cl.B = spec.min_annihilation();
    cl.lambda_total = lambda_total;
    cl.total += cl.A + cl.B + cl.lambda_total;
  }
  if (!sites.empty() && sites.back() == N - 1) {
    cl.right_create = spec.beta;
    cl.right_annihilate = 1.0 - spec.beta;
    cl.total += 1.0;
  }
  return cl;
}

}  // namespace

RevealmentResult run_revealment(const FlipBoundarySpec& spec, int N, Rng& rng,
                                const RevealmentOptions& options) {
  spec.validate();
  if (spec.p > N - 1) throw SpecError("window must fit inside {1..N-1}");

  const auto lambda = spec.marginal_rates();
  double lambda_total = 0.0;
  for (double x : lambda) lambda_total += x;

  RevealmentResult res;
  res.record.N = N;
  res.record.p = spec.p;
  DualState& st = res.final_state;
  st.sites = {1};

  std::uint64_t events = 0;
  while (!st.sites.empty()) {
    if (++events > options.event_cap)
      throw CapExceeded("revealment run exceeded " +
                        std::to_string(options.event_cap) + " events");
    const DualClasses cl = active_classes(st.sites, N, spec, lambda_total);
    st.elapsed += rng.exponential(cl.total);

    double u = rng.uniform() * cl.total;
    if (u < static_cast<double>(cl.edges.size())) {
      const int e =
          cl.edges[std::min(static_cast<std::size_t>(u), cl.edges.size() - 1)];
      const bool left = has_site(st.sites, e);
      const bool right = has_site(st.sites, e + 1);
      if (left != right) {
        if (left) {
          erase_site(st.sites, e);
          insert_site(st.sites, e + 1);
          st.max_site = std::max(st.max_site, e + 1);
        } else {
          erase_site(st.sites, e + 1);
          insert_site(st.sites, e);
        }
      }
      if (options.record_marks)
        res.record.marks.push_back({st.elapsed, Mark::Kind::arrow, e, 0});
      continue;
    }
    u -= static_cast<double>(cl.edges.size());
    if (u < cl.A + cl.B) {
      const int value = u < cl.A ? 1 : 0;
      erase_site(st.sites, 1);
      if (options.record_marks)
        res.record.marks.push_back({st.elapsed, Mark::Kind::left_dagger, 1, value});
      continue;
    }
    u -= cl.A + cl.B;
    if (u < cl.lambda_total) {
      // branching: pick the window label proportionally to its marginal rate
      std::uint32_t w = 0;
      double acc = u;
      for (std::uint32_t cand = 0; cand < lambda.size(); ++cand) {
        acc -= lambda[cand];
        w = cand;
        if (acc < 0.0) break;
      }
      for (int s = 1; s <= spec.p; ++s) {
        if (!has_site(st.sites, s)) {
          insert_site(st.sites, s);
          ++st.created;
          st.max_site = std::max(st.max_site, s);
        }
      }
      if (options.record_marks)
        res.record.marks.push_back({st.elapsed, Mark::Kind::branch_dagger, 1,
                                    static_cast<int>(w)});
      continue;
    }
    // right dagger (either sign reveals and removes N-1)
    const int value = (u - cl.lambda_total) < cl.right_create ? 1 : 0;
    erase_site(st.sites, N - 1);
    if (options.record_marks)
      res.record.marks.push_back(
          {st.elapsed, Mark::Kind::right_dagger, N - 1, value});
  }
  res.record.extinction_time = st.elapsed;
  res.record.created = st.created;
  res.record.max_site = st.max_site;
  return res;
}

int reconstruct_value(const RevealmentRecord& record,
                      const FlipBoundarySpec& spec) {
  constexpr int kUnknown = 2;
  std::vector<int> zeta(record.N, kUnknown);  // sites 1..N-1 at index site

  // marks are stored by increasing backward time; physical order is reversed
  for (auto it = record.marks.rbegin(); it != record.marks.rend(); ++it) {
    const Mark& m = *it;
    switch (m.kind) {
      case Mark::Kind::left_dagger:
      case Mark::Kind::right_dagger:
        zeta[m.site] = m.value;
        break;
      case Mark::Kind::arrow:
        std::swap(zeta[m.site], zeta[m.site + 1]);
        break;
      case Mark::Kind::branch_dagger: {
        bool known = true;
        std::uint32_t w = 0;
        for (int s = 1; s <= spec.p; ++s) {
          if (zeta[s] == kUnknown) {
            known = false;
            break;
          }
          if (zeta[s]) w |= 1u << (s - 1);
        }
        if (known && w == static_cast<std::uint32_t>(m.value))
          zeta[1] = 1 - static_cast<int>(w & 1u);
        break;
      }
    }
  }
  if (zeta[1] == kUnknown)
    throw std::logic_error(
        "incomplete reveal: eta_1(0) not determined by the recorded marks");
  return zeta[1];
}

int forward_replay(const RevealmentRecord& record,
                   const FlipBoundarySpec& spec,
                   Configuration eta_at_minus_T) {
  if (eta_at_minus_T.first_site() != 1 ||
      eta_at_minus_T.num_sites() != record.N - 1)
    throw SpecError("replay configuration must cover sites 1..N-1");
  for (auto it = record.marks.rbegin(); it != record.marks.rend(); ++it)
    apply_mark(eta_at_minus_T, *it, spec);
  return eta_at_minus_T.bit(1);
}

namespace {

// Fixed chunk grid independent of the thread count; partial results combine
// in chunk order so parallel runs match sequential ones bit for bit.
template <typename Chunk, typename Fn>
std::vector<Chunk> run_chunked(std::size_t n_samples, int threads, Fn&& body) {
  const std::size_t n_chunks = 64;
  std::vector<Chunk> chunks(n_chunks);
  auto work = [&](std::size_t c) {
    const std::size_t lo = n_samples * c / n_chunks;
    const std::size_t hi = n_samples * (c + 1) / n_chunks;
    for (std::size_t s = lo; s < hi; ++s) body(chunks[c], s);
  };
  if (threads <= 1) {
    for (std::size_t c = 0; c < n_chunks; ++c) work(c);
  } else {
    std::vector<std::future<void>> futures;
    std::atomic<std::size_t> next{0};
    for (int t = 0; t < threads; ++t)
      futures.push_back(std::async(std::launch::async, [&] {
        for (std::size_t c = next.fetch_add(1); c < n_chunks;
             c = next.fetch_add(1))
          work(c);
      }));
    for (auto& f : futures) f.get();
  }
  return chunks;
}

}  // namespace

AlphaEstimate perfect_sample_alpha(const FlipBoundarySpec& spec, int N,
                                   std::size_t n_samples, std::uint64_t seed,
                                   int threads) {
  struct Chunk {
    long ones = 0;
    long kept = 0;
    long capped = 0;
  };
  auto chunks = run_chunked<Chunk>(
      n_samples, threads, [&](Chunk& chunk, std::size_t s) {
        Rng rng = Rng::stream(seed, s);
        try {
          auto res = run_revealment(spec, N, rng);
          chunk.ones += reconstruct_value(res.record, spec);
          ++chunk.kept;
        } catch (const CapExceeded&) {
          ++chunk.capped;
        }
      });

  AlphaEstimate est;
  est.n = n_samples;
  long ones = 0, kept = 0;
  for (const auto& c : chunks) {
    ones += c.ones;
    kept += c.kept;
    est.capped += c.capped;
  }
  if (kept == 0) throw CapExceeded("all revealment samples hit the event cap");
  est.mean = static_cast<double>(ones) / static_cast<double>(kept);
  est.stderr_ =
      std::sqrt(std::max(est.mean * (1.0 - est.mean), 1e-300) /
                static_cast<double>(kept));
  return est;
}

DualStatistics dual_statistics(const FlipBoundarySpec& spec, int N,
                               std::size_t n_samples, std::uint64_t seed,
                               std::vector<int> ell_grid,
                               std::vector<double> t_grid, int threads) {
  DualStatistics out;
  out.n = n_samples;
  if (ell_grid.empty()) ell_grid = {8, 16, 32, 64};
  if (t_grid.empty()) {
    t_grid.resize(32);
    for (std::size_t i = 0; i < t_grid.size(); ++i)
      t_grid[i] = 0.25 * std::pow(1.5, static_cast<double>(i));
  }
  out.ell_grid = ell_grid;
  out.t_grid = t_grid;
  out.survival.assign(t_grid.size(), 0.0);
  out.range_tail.assign(ell_grid.size(), 0.0);

  const double A = spec.min_creation();
  const double B = spec.min_annihilation();
  const double lambda = spec.sum_lambda();
  const double margin = A + B - (spec.p - 1) * lambda;
  out.created_bound = margin > 0.0
                          ? (spec.p - 1) * lambda / margin
                          : std::numeric_limits<double>::infinity();

  RevealmentOptions options;
  options.record_marks = false;

  struct Chunk {
    double sum_c = 0.0, sum_c2 = 0.0;
    long kept = 0, capped = 0;
    std::vector<long> survival, range;
  };
  auto chunks = run_chunked<Chunk>(
      n_samples, threads, [&](Chunk& chunk, std::size_t s) {
        if (chunk.survival.empty()) {
          chunk.survival.assign(t_grid.size(), 0);
          chunk.range.assign(ell_grid.size(), 0);
        }
        Rng rng = Rng::stream(seed, s);
        try {
          auto res = run_revealment(spec, N, rng, options);
          ++chunk.kept;
          const double c = static_cast<double>(res.record.created);
          chunk.sum_c += c;
          chunk.sum_c2 += c * c;
          for (std::size_t i = 0; i < t_grid.size(); ++i)
            if (res.record.extinction_time > t_grid[i]) ++chunk.survival[i];
          for (std::size_t i = 0; i < ell_grid.size(); ++i)
            if (res.record.max_site >= ell_grid[i]) ++chunk.range[i];
        } catch (const CapExceeded&) {
          ++chunk.capped;
        }
      });

  double sum_c = 0.0, sum_c2 = 0.0;
  long kept = 0;
  for (const auto& c : chunks) {
    sum_c += c.sum_c;
    sum_c2 += c.sum_c2;
    kept += c.kept;
    out.capped += c.capped;
    for (std::size_t i = 0; i < c.survival.size(); ++i)
      out.survival[i] += static_cast<double>(c.survival[i]);
    for (std::size_t i = 0; i < c.range.size(); ++i)
      out.range_tail[i] += static_cast<double>(c.range[i]);
  }
  if (kept == 0) throw CapExceeded("all revealment samples hit the event cap");
  out.mean_created = sum_c / static_cast<double>(kept);
  const double var = std::max(
      0.0, sum_c2 / static_cast<double>(kept) - out.mean_created * out.mean_created);
  out.se_created = std::sqrt(var / static_cast<double>(kept));
  for (double& v : out.survival) v /= static_cast<double>(kept);
  for (double& v : out.range_tail) v /= static_cast<double>(kept);
  return out;
}

CouplingResult coupling_experiment(const FlipBoundarySpec& spec, int N, int M,
                                   std::size_t n_samples, std::uint64_t seed) {
  spec.validate();
  if (M < N) throw SpecError("coupling experiment expects M >= N");
  if (M == N) {
    CouplingResult out;  // identical systems, the gap is identically zero
    out.n = n_samples;
    return out;
  }
  const auto lambda = spec.marginal_rates();
  double lambda_total = 0.0;
  for (double x : lambda) lambda_total += x;

  CouplingResult out;
  out.n = n_samples;
  std::size_t reached = 0;

  for (std::size_t s = 0; s < n_samples; ++s) {
    Rng rng = Rng::stream(seed, 0xC0 + s);
    std::vector<int> a_n{1}, a_m{1};
    bool reach = false;
    bool diverged = false;
    std::uint64_t events = 0;
    while (!a_n.empty() || !a_m.empty()) {
      if (++events > 10'000'000)
        throw CapExceeded("coupled revealment exceeded the event cap");
      // merged class list over the union of both duals
      std::vector<int> edges;
      {
        std::vector<int> joined;
        std::merge(a_n.begin(), a_n.end(), a_m.begin(), a_m.end(),
                   std::back_inserter(joined));
        joined.erase(std::unique(joined.begin(), joined.end()), joined.end());
        int prev = 0;
        for (int site : joined) {
          if (site - 1 >= 1 && site - 1 != prev) edges.push_back(prev = site - 1);
          if (site <= M - 2 && site != prev) edges.push_back(prev = site);
        }
      }
      const bool left_active = (!a_n.empty() && a_n.front() == 1) ||
                               (!a_m.empty() && a_m.front() == 1);
      const bool right_n = !a_n.empty() && a_n.back() == N - 1;
      const bool right_m = !a_m.empty() && a_m.back() == M - 1;
      double total = static_cast<double>(edges.size());
      const double left_rate =
          left_active ? spec.min_creation() + spec.min_annihilation() +
                            lambda_total
                      : 0.0;
      total += left_rate + (right_n ? 1.0 : 0.0) + (right_m ? 1.0 : 0.0);

      rng.exponential(total);  // time is irrelevant here
      double u = rng.uniform() * total;
      if (u < static_cast<double>(edges.size())) {
        const int e =
            edges[std::min(static_cast<std::size_t>(u), edges.size() - 1)];
        auto stir = [&](std::vector<int>& set, int limit) {
          if (e > limit) return;
          const bool l = has_site(set, e), r = has_site(set, e + 1);
          if (l != r) {
            if (l) {
              erase_site(set, e);
              insert_site(set, e + 1);
            } else {
              erase_site(set, e + 1);
              insert_site(set, e);
            }
          }
        };
        stir(a_n, N - 2);
        stir(a_m, M - 2);
      } else if (left_active && u < static_cast<double>(edges.size()) + left_rate) {
        const double v = u - static_cast<double>(edges.size());
        if (v < spec.min_creation() + spec.min_annihilation()) {
          if (!a_n.empty() && a_n.front() == 1) erase_site(a_n, 1);
          if (!a_m.empty() && a_m.front() == 1) erase_site(a_m, 1);
        } else {
          auto branch = [&](std::vector<int>& set) {
            if (set.empty() || set.front() != 1) return;
            for (int site = 1; site <= spec.p; ++site) insert_site(set, site);
          };
          branch(a_n);
          branch(a_m);
        }
      } else {
        double v = u - static_cast<double>(edges.size()) - left_rate;
        if (right_n && v < 1.0) {
          erase_site(a_n, N - 1);
        } else {
          erase_site(a_m, M - 1);
        }
      }
      if (!reach && has_site(a_n, N - 1)) reach = true;
      if (!reach && a_n != a_m) diverged = true;
    }
    if (reach) ++reached;
    if (diverged) ++out.divergences;
  }
  out.reach_prob = static_cast<double>(reached) / static_cast<double>(n_samples);
  out.stderr_ = std::sqrt(out.reach_prob * (1.0 - out.reach_prob) /
                          static_cast<double>(n_samples));
  return out;
}

namespace {

constexpr char kRecordMagic[8] = {'S', 'E', 'P', 'D', 'U', 'A', 'L', '1'};

template <typename T>
void put(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T take(std::ifstream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw SpecError("truncated record file");
  return v;
}

}  // namespace

void write_records(const std::string& path,
                   const std::vector<RevealmentRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw SpecError("cannot open " + path);
  out.write(kRecordMagic, 8);
  for (const auto& rec : records) {
    const std::uint32_t n_marks = static_cast<std::uint32_t>(rec.marks.size());
    const std::uint32_t payload = 4 + 4 + 8 + 8 + 4 + 4 + n_marks * 20;
    put(out, payload);
    put(out, static_cast<std::int32_t>(rec.N));
    put(out, static_cast<std::int32_t>(rec.p));
    put(out, rec.extinction_time);
    put(out, static_cast<std::int64_t>(rec.created));
    put(out, static_cast<std::int32_t>(rec.max_site));
    put(out, n_marks);
    for (const auto& m : rec.marks) {
      put(out, m.time);
      put(out, static_cast<std::uint32_t>(m.kind));
      put(out, static_cast<std::int32_t>(m.site));
      put(out, static_cast<std::int32_t>(m.value));
    }
  }
}

std::vector<RevealmentRecord> read_records(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SpecError("cannot open " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kRecordMagic, 8) != 0)
    throw SpecError(path + " is not a dual record file");
  std::vector<RevealmentRecord> records;
  while (true) {
    std::uint32_t payload;
    in.read(reinterpret_cast<char*>(&payload), 4);
    if (in.eof()) break;
    if (!in) throw SpecError("truncated record file");
    RevealmentRecord rec;
    rec.N = take<std::int32_t>(in);
    rec.p = take<std::int32_t>(in);
    rec.extinction_time = take<double>(in);
    rec.created = take<std::int64_t>(in);
    rec.max_site = take<std::int32_t>(in);
    const auto n_marks = take<std::uint32_t>(in);
    if (payload != 4 + 4 + 8 + 8 + 4 + 4 + n_marks * 20)
      throw SpecError("record payload length mismatch");
    rec.marks.reserve(n_marks);
    for (std::uint32_t i = 0; i < n_marks; ++i) {
      Mark m;
      m.time = take<double>(in);
      m.kind = static_cast<Mark::Kind>(take<std::uint32_t>(in));
      m.site = take<std::int32_t>(in);
      m.value = take<std::int32_t>(in);
      rec.marks.push_back(m);
    }
    records.push_back(std::move(rec));
  }
  return records;
}

}  // namespace sep
