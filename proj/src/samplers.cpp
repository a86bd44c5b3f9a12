#include "maskdiff/samplers.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace maskdiff {

namespace {

int validated_steps(double span, double step, const char* what) {
  if (step <= 0.0) throw ConfigError(std::string(what) + ": step must be positive");
  const double ratio = span / step;
  const long n = std::lround(ratio);
  if (n < 1 || std::abs(ratio - static_cast<double>(n)) > 1e-9 * std::max(1.0, ratio)) {
    throw ConfigError(std::string(what) + ": (T - delta) is not an integer multiple of the step");
  }
  return static_cast<int>(n);
}

Sequence draw_target_point(const SparseDistribution& q0, Rng& rng) {
  const double u = rng.uniform();
  double acc = 0.0;
  for (const auto& entry : q0.support()) {
    acc += entry.prob;
    if (u < acc) return entry.point;
  }
  return q0.support().back().point;
}

// Sorted uniform event times on [lo, hi]; a stable sort keeps the draw
// order on (probability-zero) ties.
std::vector<double> sorted_event_times(double lo, double hi, long count, Rng& rng) {
  std::vector<double> times(static_cast<std::size_t>(count));
  for (double& tau : times) tau = lo + (hi - lo) * rng.uniform();
  std::stable_sort(times.begin(), times.end());
  return times;
}

}  // namespace

int SamplerSchedule::num_segments() const {
  return validated_steps(span(), segment, "SamplerSchedule(eta)");
}

int SamplerSchedule::num_euler_steps() const {
  return validated_steps(span(), euler_step, "SamplerSchedule(h)");
}

void SamplerSchedule::validate() const {
  if (!(early_stop > 0.0) || !(early_stop < horizon)) {
    throw ConfigError("SamplerSchedule: need 0 < delta < T");
  }
  num_segments();
  num_euler_steps();
}

SamplerSchedule default_schedule(double epsilon, const SpaceSpec& spec) {
  if (!(epsilon > 0.0) || !(epsilon < 1.0)) {
    throw ConfigError("default_schedule: epsilon must lie in (0, 1)");
  }
  const double d = spec.length();
  const double k = spec.vocab();
  SamplerSchedule sched;
  sched.early_stop = epsilon / d;
  sched.segment = epsilon / (2.0 * d);
  const double nominal_horizon = std::log(4.0 * d / (epsilon * epsilon));
  const double segments = (nominal_horizon - sched.early_stop) / sched.segment;
  const long w = static_cast<long>(std::ceil(segments - 1e-9));
  sched.horizon = sched.early_stop + static_cast<double>(w) * sched.segment;

  // Euler step from the step-size preconditions of the Euler analysis,
  // shrunk to the nearest exact divisor of the span.
  const double log_term = std::max(1.0, std::log(d / epsilon));
  const double h0 = std::min(epsilon / (k * k * d * d * log_term),
                             std::pow(epsilon, 1.5) / (d * std::sqrt(log_term)));
  const double span = sched.horizon - sched.early_stop;
  const long n = static_cast<long>(std::ceil(span / h0 - 1e-9));
  sched.euler_step = span / static_cast<double>(n);
  return sched;
}

double score_call_bound(const SpaceSpec& spec, double epsilon) {
  if (!(epsilon > 0.0) || !(epsilon < 1.0)) {
    throw DomainError("score_call_bound: epsilon must lie in (0, 1)");
  }
  const double d = spec.length();
  const double k = spec.vocab();
  return 2.0 * k * (d - epsilon * epsilon / 4.0) + 12.0 * k * d * std::log(d);
}

RunReport euler_sequential_run(const SparseDistribution& q0, const ScoreModel& model,
                               const SamplerSchedule& sched, Rng& rng) {
  sched.validate();
  const SpaceSpec& space = q0.spec();
  const int steps = sched.num_euler_steps();
  const double h = sched.euler_step;
  ScoreOracle oracle(model);
  ReverseRateView rates(oracle, sched.horizon);

  RunReport report;
  Sequence y = tilde_sample(space, sched.horizon, rng);
  std::vector<double> row;
  const int tokens = space.vocab() - 1;
  for (int k = 0; k < steps; ++k) {
    const double t = k * h;
    const std::vector<int> masked = masked_positions(space, y);
    double total = rates.rate_row(t, y, row);
    double stay = 1.0 - h * total;
    if (stay < 0.0) {
      stay = 0.0;
      ++report.clamped_steps;
    }
    const double norm = stay + h * total;
    const double u = rng.uniform() * norm;
    if (u >= stay && total > 0.0) {
      // Pick the move proportional to its rate.
      double acc = stay;
      std::size_t j = 0;
      for (; j + 1 < row.size(); ++j) {
        acc += h * row[j];
        if (u < acc) break;
      }
      const int pos = masked[j / static_cast<std::size_t>(tokens)];
      const Token token = static_cast<Token>(j % static_cast<std::size_t>(tokens)) + 1;
      y[static_cast<std::size_t>(pos)] = token;
      ++report.events;
    }
  }
  report.final = std::move(y);
  report.score_calls = oracle.calls();
  report.neighbor_reads = oracle.neighbor_reads();
  return report;
}

RunReport euler_parallel_run(const SparseDistribution& q0, const ScoreModel& model,
                             const SamplerSchedule& sched, Rng& rng) {
  sched.validate();
  const SpaceSpec& space = q0.spec();
  const int steps = sched.num_euler_steps();
  const double h = sched.euler_step;
  ScoreOracle oracle(model);
  ReverseRateView rates(oracle, sched.horizon);

  RunReport report;
  Sequence y = tilde_sample(space, sched.horizon, rng);
  std::vector<double> row;
  const int tokens = space.vocab() - 1;
  for (int k = 0; k < steps; ++k) {
    const double t = k * h;
    const std::vector<int> masked = masked_positions(space, y);
    rates.rate_row(t, y, row);
    // Every masked coordinate updates independently from the same row.
    for (std::size_t m = 0; m < masked.size(); ++m) {
      double coord_total = 0.0;
      for (int j = 0; j < tokens; ++j) coord_total += row[m * tokens + j];
      const double norm = 1.0 + h * coord_total;
      const double u = rng.uniform() * norm;
      if (u < 1.0) continue;  // stay masked
      double acc = 1.0;
      int j = 0;
      for (; j + 1 < tokens; ++j) {
        acc += h * row[m * tokens + j];
        if (u < acc) break;
      }
      y[static_cast<std::size_t>(masked[m])] = static_cast<Token>(j + 1);
      ++report.events;
    }
  }
  report.final = std::move(y);
  report.score_calls = oracle.calls();
  report.neighbor_reads = oracle.neighbor_reads();
  return report;
}

RunReport uniformization_run(const SparseDistribution& q0, const ScoreModel& model,
                             double horizon, double early_stop,
                             const std::vector<double>& grid,
                             const std::function<double(int)>& beta_fn, Rng& rng) {
  if (grid.size() < 2 || grid.front() != 0.0 ||
      std::abs(grid.back() - (horizon - early_stop)) > 1e-9) {
    throw ConfigError("uniformization_run: grid must run from 0 to T - delta");
  }
  const SpaceSpec& space = q0.spec();
  ScoreOracle oracle(model);
  ReverseRateView rates(oracle, horizon);

  RunReport report;
  Sequence y = sample_forward(space, draw_target_point(q0, rng), horizon, rng);
  std::vector<double> row;
  const int tokens = space.vocab() - 1;
  for (std::size_t w = 1; w < grid.size(); ++w) {
    const double lo = grid[w - 1];
    const double hi = grid[w];
    const double beta = beta_fn(static_cast<int>(w));
    if (beta < 0.0) throw ConfigError("uniformization_run: negative dominating rate");
    const long draws = beta == 0.0 ? 0 : rng.poisson(beta * (hi - lo));
    report.per_segment_draws.push_back(draws);
    if (draws == 0) continue;
    for (double tau : sorted_event_times(lo, hi, draws, rng)) {
      const std::vector<int> masked = masked_positions(space, y);
      const double total = rates.rate_row(tau, y, row);
      if (total > beta * (1.0 + 1e-12)) {
        std::ostringstream msg;
        msg << "uniformization_run: outgoing rate " << total << " exceeds beta " << beta
            << " at state " << to_string(y) << ", time " << tau;
        throw BetaViolationError(msg.str());
      }
      const double u = rng.uniform();
      if (u >= total / beta) continue;  // stay
      double acc = 0.0;
      std::size_t j = 0;
      for (; j + 1 < row.size(); ++j) {
        acc += row[j] / beta;
        if (u < acc) break;
      }
      const int pos = masked[j / static_cast<std::size_t>(tokens)];
      y[static_cast<std::size_t>(pos)] = static_cast<Token>(j % static_cast<std::size_t>(tokens)) + 1;
      ++report.events;
    }
  }
  report.final = std::move(y);
  report.score_calls = oracle.calls();
  report.neighbor_reads = oracle.neighbor_reads();
  return report;
}

RunReport matu_run(const SparseDistribution& q0, const ScoreModel& model,
                   const SamplerSchedule& sched, Rng& rng,
                   std::vector<Sequence>* trajectory) {
  if (!(sched.early_stop > 0.0) || !(sched.early_stop < sched.horizon)) {
    throw ConfigError("matu_run: need 0 < delta < T");
  }
  const int segments = sched.num_segments();
  const SpaceSpec& space = q0.spec();
  ScoreOracle oracle(model);
  ReverseRateView rates(oracle, sched.horizon);

  RunReport report;
  Sequence y(static_cast<std::size_t>(space.length()), space.mask_token());
  if (trajectory) trajectory->push_back(y);
  std::vector<double> row;
  const int tokens = space.vocab() - 1;
  for (int w = 1; w <= segments; ++w) {
    const double lo = (w - 1) * sched.segment;
    const double hi = (w == segments) ? sched.span() : w * sched.segment;
    const TruncationContext ctx = make_truncation_context(space, sched.horizon, hi, y);
    if (ctx.beta <= 0.0) {
      // Fully unmasked anchor: no legal moves, the segment is skipped.
      report.per_segment_draws.push_back(0);
      continue;
    }
    const long draws = rng.poisson(ctx.beta * (hi - lo));
    report.per_segment_draws.push_back(draws);
    if (draws == 0) continue;
    for (double tau : sorted_event_times(lo, hi, draws, rng)) {
      const std::vector<int> masked = masked_positions(space, y);
      const TruncatedRow trow = truncated_row(ctx, rates, tau, y, row);
      const double move_mass = std::min(trow.outgoing_raw, ctx.beta) / ctx.beta;
      const double u = rng.uniform();
      if (u >= move_mass || row.empty()) continue;  // stay
      double acc = 0.0;
      std::size_t j = 0;
      for (; j + 1 < row.size(); ++j) {
        acc += row[j] * trow.scale / ctx.beta;
        if (u < acc) break;
      }
      const int pos = masked[j / static_cast<std::size_t>(tokens)];
      y[static_cast<std::size_t>(pos)] = static_cast<Token>(j % static_cast<std::size_t>(tokens)) + 1;
      ++report.events;
      if (trajectory) trajectory->push_back(y);
    }
  }
  report.final = std::move(y);
  report.score_calls = oracle.calls();
  report.neighbor_reads = oracle.neighbor_reads();
  return report;
}

}  // namespace maskdiff
