#include "sep/kinetic.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "sep/errors.hpp"
#include "sep/rate_algebra.hpp"

namespace sep {

KineticSimulator::KineticSimulator(const ModelSpec& spec, Configuration eta0,
                                   std::uint64_t seed)
    : spec_(spec), eta_(std::move(eta0)), rng_(seed) {
  spec_.validate();
  const int N = spec_.N;
  const int model = spec_.model();

  if (model == 2) {
    if (eta_.first_site() != 1 || eta_.num_sites() != N - 1)
      throw SpecError("flip-model configuration must cover sites 1..N-1");
    first_edge_site_ = 1;
    num_edges_ = N - 2;
    const auto& b = spec_.flip();
    classes_.push_back({b.min_creation(), 1, 1, 1});
    classes_.push_back({b.min_annihilation(), 1, 1, 0});
    auto lambda = b.marginal_rates();
    for (std::uint32_t w = 0; w < lambda.size(); ++w)
      if (lambda[w] > 0.0)
        classes_.push_back({lambda[w], 4, static_cast<int>(w),
                            1 - static_cast<int>(w & 1u)});
    classes_.push_back({b.beta, 1, N - 1, 1});
    classes_.push_back({1.0 - b.beta, 1, N - 1, 0});
  } else {
    const int p = spec_.p();
    if (eta_.first_site() != -p || eta_.num_sites() != N + p)
      throw SpecError("configuration must cover sites -p..N-1");
    first_edge_site_ = (model == 1) ? -p : 0;
    num_edges_ = N - 1 - first_edge_site_;
    const double beta = spec_.beta();
    if (model == 1) {
      const auto& b = spec_.degree_preserving();
      for (int j = -p; j <= 0; ++j) {
        auto [creation, annihilation] = reservoir_parts(b, j);
        if (creation > 0.0) classes_.push_back({creation, 1, j, 1});
        if (annihilation > 0.0) classes_.push_back({annihilation, 1, j, 0});
        for (int k = -p; k <= 0; ++k) {
          if (k == j) continue;
          if (b.copy_rate(j, k) > 0.0)
            classes_.push_back({b.copy_rate(j, k), 2, j, k});
          if (b.anticopy_rate(j, k) > 0.0)
            classes_.push_back({b.anticopy_rate(j, k), 3, j, k});
        }
      }
    } else {
      const auto& b = spec_.speeded();
      const int n = b.num_states();
      block_rows_.resize(n);
      block_row_total_.assign(n, 0.0);
      for (int xi = 0; xi < n; ++xi) {
        for (int xi2 = 0; xi2 < n; ++xi2) {
          if (xi2 == xi) continue;
          const double rate = b.ell * b.generator(xi, xi2);
          if (rate > 0.0) {
            block_rows_[xi].push_back({rate, 5, xi2, 0});
            block_row_total_[xi] += rate;
          }
        }
      }
    }
    classes_.push_back({beta, 1, N - 1, 1});
    classes_.push_back({1.0 - beta, 1, N - 1, 0});
  }
  for (const auto& ev : classes_) class_total_ += ev.rate;
}

std::uint32_t KineticSimulator::block_word() const {
  const int p = spec_.p();
  std::uint32_t w = 0;
  for (int j = -p; j <= 0; ++j)
    if (eta_.bit(j)) w |= 1u << (j + p);
  return w;
}

void KineticSimulator::apply(const EventClass& ev) {
  switch (ev.kind) {
    case 0:
      eta_.exchange(ev.a);
      break;
    case 1:
      eta_.set(ev.a, ev.b);
      break;
    case 2:
      eta_.set(ev.a, eta_.bit(ev.b));
      break;
    case 3:
      eta_.set(ev.a, 1 - eta_.bit(ev.b));
      break;
    case 4: {
      const int p = spec_.p();
      std::uint32_t w = 0;
      for (int i = 1; i <= p; ++i)
        if (eta_.bit(i)) w |= 1u << (i - 1);
      if (w == static_cast<std::uint32_t>(ev.a)) eta_.set(1, ev.b);
      break;
    }
    default: {  // model-3 block jump
      const int p = spec_.p();
      for (int j = -p; j <= 0; ++j)
        eta_.set(j, (ev.a >> (j + p)) & 1);
      break;
    }
  }
}

double KineticSimulator::next_event_time() {
  if (pending_time_ < 0.0) {
    double left_total = 0.0;
    if (!block_rows_.empty()) left_total = block_row_total_[block_word()];
    const double total =
        static_cast<double>(num_edges_) + class_total_ + left_total;
    pending_time_ = time_ + rng_.exponential(total);
  }
  return pending_time_;
}

void KineticSimulator::apply_next() {
  time_ = next_event_time();
  pending_time_ = -1.0;

  double left_total = 0.0;
  const std::vector<EventClass>* row = nullptr;
  if (!block_rows_.empty()) {
    const std::uint32_t xi = block_word();
    left_total = block_row_total_[xi];
    row = &block_rows_[xi];
  }
  const double total =
      static_cast<double>(num_edges_) + class_total_ + left_total;

  double u = rng_.uniform() * total;
  if (u < static_cast<double>(num_edges_)) {
    const int edge = std::min(static_cast<int>(u), num_edges_ - 1);
    eta_.exchange(first_edge_site_ + edge);
    return;
  }
  u -= static_cast<double>(num_edges_);
  for (const auto& ev : classes_) {
    u -= ev.rate;
    if (u < 0.0) {
      apply(ev);
      return;
    }
  }
  if (row && !row->empty()) {
    for (const auto& ev : *row) {
      u -= ev.rate;
      if (u < 0.0) {
        apply(ev);
        return;
      }
    }
    apply(row->back());
  } else if (!classes_.empty()) {
    apply(classes_.back());  // floating-point slack lands on the last class
  }
}

Configuration simulate(
    const ModelSpec& spec, Configuration eta0, double horizon,
    std::uint64_t seed,
    const std::function<void(double, const Configuration&)>& on_event) {
  KineticSimulator sim(spec, std::move(eta0), seed);
  while (sim.next_event_time() <= horizon) {
    sim.apply_next();
    if (on_event) on_event(sim.time(), sim.config());
  }
  return sim.config();
}

MarkLog generate_marklog(const FlipBoundarySpec& spec, int N, double t_end,
                         Rng& rng) {
  spec.validate();
  MarkLog log;
  auto pour = [&](double rate, Mark::Kind kind, int site, int value) {
    if (rate <= 0.0) return;
    double t = rng.exponential(rate);
    while (t < t_end) {
      log.push_back({t, kind, site, value});
      t += rng.exponential(rate);
    }
  };
  for (int i = 1; i <= N - 2; ++i) pour(1.0, Mark::Kind::arrow, i, 0);
  pour(spec.min_creation(), Mark::Kind::left_dagger, 1, 1);
  pour(spec.min_annihilation(), Mark::Kind::left_dagger, 1, 0);
  const auto lambda = spec.marginal_rates();
  for (std::uint32_t w = 0; w < lambda.size(); ++w)
    pour(lambda[w], Mark::Kind::branch_dagger, 1, static_cast<int>(w));
  pour(spec.beta, Mark::Kind::right_dagger, N - 1, 1);
  pour(1.0 - spec.beta, Mark::Kind::right_dagger, N - 1, 0);
  std::sort(log.begin(), log.end(),
            [](const Mark& a, const Mark& b) { return a.time < b.time; });
  return log;
}

void apply_mark(Configuration& eta, const Mark& mark,
                const FlipBoundarySpec& spec) {
  switch (mark.kind) {
    case Mark::Kind::arrow:
      eta.exchange(mark.site);
      break;
    case Mark::Kind::left_dagger:
    case Mark::Kind::right_dagger:
      eta.set(mark.site, mark.value);
      break;
    case Mark::Kind::branch_dagger: {
      std::uint32_t w = 0;
      for (int i = 1; i <= spec.p; ++i)
        if (eta.bit(i)) w |= 1u << (i - 1);
      if (w == static_cast<std::uint32_t>(mark.value))
        eta.set(1, 1 - static_cast<int>(w & 1u));
      break;
    }
  }
}

Configuration replay_marklog(const MarkLog& log, Configuration eta0,
                             const FlipBoundarySpec& spec) {
  for (const auto& mark : log) apply_mark(eta0, mark, spec);
  return eta0;
}

namespace {

Configuration initial_configuration(const ModelSpec& spec) {
  if (spec.model() == 2) return Configuration(1, spec.N - 1);
  return Configuration(-spec.p(), spec.N + spec.p());
}

StationaryEstimate run_batch_means(
    const ModelSpec& spec, double burn_in, int batches, double batch_len,
    std::uint64_t seed,
    const std::function<void(double t_end, Configuration&, Rng&,
                             std::vector<double>& acc)>& advance_to) {
  if (batches < 2) throw SpecError("batch means need at least two batches");
  const int N = spec.N;
  if (burn_in <= 0.0) burn_in = 10.0 * N * N;
  if (batch_len <= 0.0) batch_len = static_cast<double>(N) * N;

  Configuration eta = initial_configuration(spec);
  const int n_sites = eta.num_sites();
  Rng rng(seed);

  StationaryEstimate out;
  out.first_site = eta.first_site();
  out.burn_in = burn_in;
  out.batches = batches;
  out.batch_len = batch_len;
  out.seed = seed;
  if (spec.model() == 1) {
    const auto& b = spec.degree_preserving();
    if (!b.ergodic_left())
      out.warning =
          "left chain alone is not ergodic (sum r + sum a = 0); the full "
          "chain still mixes through the right reservoir";
  }

  std::vector<double> scratch(n_sites, 0.0);
  advance_to(burn_in, eta, rng, scratch);

  std::vector<std::vector<double>> batch_means;
  for (int bi = 0; bi < batches; ++bi) {
    std::fill(scratch.begin(), scratch.end(), 0.0);
    advance_to(burn_in + (bi + 1) * batch_len, eta, rng, scratch);
    std::vector<double> means(n_sites);
    for (int i = 0; i < n_sites; ++i) means[i] = scratch[i] / batch_len;
    batch_means.push_back(std::move(means));
  }

  out.mean.assign(n_sites, 0.0);
  out.se.assign(n_sites, 0.0);
  for (const auto& bm : batch_means)
    for (int i = 0; i < n_sites; ++i) out.mean[i] += bm[i];
  for (double& m : out.mean) m /= batches;
  for (const auto& bm : batch_means)
    for (int i = 0; i < n_sites; ++i) {
      const double d = bm[i] - out.mean[i];
      out.se[i] += d * d;
    }
  for (double& s : out.se)
    s = std::sqrt(s / (batches - 1.0) / static_cast<double>(batches));
  return out;
}

}  // namespace

StationaryEstimate estimate_density(const ModelSpec& spec, double burn_in,
                                    int batches, double batch_len,
                                    std::uint64_t seed) {
  // One shared simulator; the lambda advances it in place and accumulates
  // occupation times between events.
  struct State {
    std::unique_ptr<KineticSimulator> sim;
    double clock = 0.0;
  };
  auto state = std::make_shared<State>();
  auto advance = [state, &spec, seed](double t_end, Configuration& eta,
                                      Rng& rng, std::vector<double>& acc) {
    (void)rng;
    if (!state->sim)
      state->sim = std::make_unique<KineticSimulator>(spec, eta, seed);
    auto& sim = *state->sim;
    while (state->clock < t_end) {
      const double next = sim.next_event_time();
      const double upto = std::min(next, t_end);
      if (upto > state->clock) {
        const auto& cfg = sim.config();
        for (int i = 0; i < cfg.num_sites(); ++i)
          if (cfg.bit(cfg.first_site() + i)) acc[i] += upto - state->clock;
        state->clock = upto;
      }
      if (next > t_end) break;
      sim.apply_next();
    }
    eta = state->sim->config();
  };
  return run_batch_means(spec, burn_in, batches, batch_len, seed, advance);
}

StationaryEstimate estimate_density_graphical(const ModelSpec& spec,
                                              double burn_in, int batches,
                                              double batch_len,
                                              std::uint64_t seed) {
  if (spec.model() != 2)
    throw SpecError("graphical mode is defined for the flip model");
  const auto& b = spec.flip();
  // Marks are generated in windows and replayed; occupation time accumulates
  // between consecutive marks.
  struct State {
    MarkLog log;
    std::size_t next = 0;
    double window_end = 0.0;
    double clock = 0.0;
  };
  auto state = std::make_shared<State>();
  const double window = 64.0;
  auto advance = [state, &b, spec, window](double t_end, Configuration& eta,
                                           Rng& rng, std::vector<double>& acc) {
    while (state->clock < t_end) {
      if (state->next >= state->log.size() && state->window_end <= t_end) {
        // extend the log with a fresh window of marks
        MarkLog fresh = generate_marklog(b, spec.N, window, rng);
        for (auto& m : fresh) m.time += state->window_end;
        state->log = std::move(fresh);
        state->next = 0;
        state->window_end += window;
      }
      double next_time = state->next < state->log.size()
                             ? state->log[state->next].time
                             : state->window_end;
      const double upto = std::min(next_time, t_end);
      if (upto > state->clock) {
        for (int i = 0; i < eta.num_sites(); ++i)
          if (eta.bit(eta.first_site() + i)) acc[i] += upto - state->clock;
        state->clock = upto;
      }
      if (next_time > t_end) break;
      if (state->next < state->log.size())
        apply_mark(eta, state->log[state->next++], b);
    }
  };
  return run_batch_means(spec, burn_in, batches, batch_len, seed, advance);
}

ProfileError profile_error(const DensityProfile& rho, int N,
                           const LinearProfile& u,
                           const std::function<double(double)>& G) {
  ProfileError out;
  for (int k = 1; k <= N - 1; ++k) {
    const double x = static_cast<double>(k) / N;
    const double d = rho.at(k) - u(x);
    out.weighted += (G ? G(x) : 1.0) * d;
    out.l1 += std::abs(d);
  }
  out.weighted /= N;
  out.l1 /= N;
  return out;
}

MajorityScenario majority_scenario(int p, int N, double beta, double horizon,
                                   double sample_dt, std::uint64_t seed,
                                   bool start_filled) {
  if (2 * p > N - 1) throw SpecError("majority window 2p must fit in the bulk");
  if (beta <= 0.0 || beta >= 1.0) throw SpecError("beta must lie in (0,1)");
  Configuration eta(1, N - 1, start_filled);
  Rng rng(seed);
  const int num_edges = N - 2;
  const double total = num_edges + 1.0 /*majority*/ + 1.0 /*right*/;

  MajorityScenario out;
  double t = 0.0, next_sample = 0.0, occupied_time = 0.0, last = 0.0;
  while (t < horizon) {
    const double tau = rng.exponential(total);
    const double t_new = t + tau;
    if (eta.bit(1)) occupied_time += std::min(t_new, horizon) - last;
    last = std::min(t_new, horizon);
    while (next_sample <= std::min(t_new, horizon) && next_sample <= horizon) {
      out.times.push_back(next_sample);
      out.site1.push_back(eta.bit(1));
      next_sample += sample_dt;
    }
    t = t_new;
    if (t >= horizon) break;
    double u = rng.uniform() * total;
    if (u < num_edges) {
      eta.exchange(1 + std::min(static_cast<int>(u), num_edges - 1));
    } else if (u < num_edges + 1.0) {
      int count = 0;
      for (int j = 2; j <= 2 * p; ++j) count += eta.bit(j);
      eta.set(1, count >= p ? 1 : 0);
    } else {
      eta.set(N - 1, rng.bernoulli(beta) ? 1 : 0);
    }
  }
  out.occupied_fraction = horizon > 0 ? occupied_time / horizon : 0.0;
  return out;
}

}  // namespace sep
