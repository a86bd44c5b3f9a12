#ifndef MASKDIFF_SAMPLERS_HPP
#define MASKDIFF_SAMPLERS_HPP

#include <cstdint>
#include <functional>
#include <vector>

#include "maskdiff/reverse_dynamics.hpp"
#include "maskdiff/rng.hpp"
#include "maskdiff/score_engine.hpp"

namespace maskdiff {

// Reverse-time schedule shared by all samplers: horizon T, early stop
// delta, uniformization segment length eta, Euler step h.  The grids
// must tile [0, T - delta] exactly.
struct SamplerSchedule {
  double horizon = 0.0;     // T
  double early_stop = 0.0;  // delta
  double segment = 0.0;     // eta
  double euler_step = 0.0;  // h
  std::uint64_t seed = 0;

  double span() const { return horizon - early_stop; }
  int num_segments() const;    // W = span / eta, validated integral
  int num_euler_steps() const; // n = span / h, validated integral
  void validate() const;
};

// Schedule driven by the target accuracy: T = ln(4 d / eps^2),
// delta = eps / d, eta = eps / 2d, with W rounded up and T stretched
// minimally so W * eta = T - delta exactly.  The Euler step defaults to
// eps-scaled values shrunk to the nearest exact divisor of the span.
SamplerSchedule default_schedule(double epsilon, const SpaceSpec& spec);

// Expected-score-call bound 2K(d - eps^2/4) + 12 K d ln d.
double score_call_bound(const SpaceSpec& spec, double epsilon);

// Outcome of one reverse chain.
struct RunReport {
  Sequence final;
  std::uint64_t score_calls = 0;    // one per queried (t, state)
  std::uint64_t neighbor_reads = 0;
  std::uint64_t events = 0;         // accepted state changes
  std::uint64_t clamped_steps = 0;  // Euler steps whose stay weight was clamped at 0
  std::vector<long> per_segment_draws;  // uniformization/MATU Poisson counts
};

// Sequential Euler chain: per step one categorical over {stay} plus all
// single-coordinate unmask moves, weights {1 - h R, h R(move)} with the
// stay weight clamped at zero before renormalizing.  Initial state is a
// draw from the factorized approximation at time T.
RunReport euler_sequential_run(const SparseDistribution& q0, const ScoreModel& model,
                               const SamplerSchedule& sched, Rng& rng);

// Coordinate-parallel Euler chain: each masked coordinate independently
// samples {stay, h * rate(token)} per step; unmasked coordinates never
// change.
RunReport euler_parallel_run(const SparseDistribution& q0, const ScoreModel& model,
                             const SamplerSchedule& sched, Rng& rng);

// Generic uniformization over an arbitrary segment grid.  beta_fn(w)
// must dominate the outgoing rate throughout segment w (1-based); a
// violated bound raises BetaViolationError naming the state and time.
// The initial state is an exact draw from the time-T forward law.
RunReport uniformization_run(const SparseDistribution& q0, const ScoreModel& model,
                             double horizon, double early_stop,
                             const std::vector<double>& grid,
                             const std::function<double(int)>& beta_fn, Rng& rng);

// Mask-Aware Truncated Uniformization: starts from the all-mask state;
// per segment the dominating rate K numK(anchor) / (e^{T - t_w} - 1) is
// computed from the segment-start anchor, Poisson(beta eta) candidate
// times are drawn, and moves use the truncated rates.  Fully-unmasked
// anchors skip their segment.  A non-null `trajectory` receives the
// initial state and the state after every accepted event.
RunReport matu_run(const SparseDistribution& q0, const ScoreModel& model,
                   const SamplerSchedule& sched, Rng& rng,
                   std::vector<Sequence>* trajectory = nullptr);

}  // namespace maskdiff

#endif  // MASKDIFF_SAMPLERS_HPP
