#ifndef MASKDIFF_SCORE_ENGINE_HPP
#define MASKDIFF_SCORE_ENGINE_HPP

#include <cstdint>
#include <memory>
#include <mutex>
#include <unordered_map>
#include <vector>

#include "maskdiff/forward_process.hpp"
#include "maskdiff/state_space.hpp"

namespace maskdiff {

// Bregman divergence of phi(c) = c ln c in closed form:
// u ln(u/v) - u + v, with the 0 ln 0 = 0 limit at u = 0.  Always >= 0.
double bregman_phi(double u, double v);

// Evaluator of the discrete score v_{t,y}(y') = q_t^<-(y')/q_t^<-(y) at
// reverse time t in [0, T).  Implementations are read-only and safe to
// share across concurrently running chains.
//
// A "row" is the vector of scores toward all single-coordinate unmask
// moves of y, laid out as row[m*(K-1) + (k-1)] for the m-th masked
// position (ascending) and replacement token k in {1,...,K-1}.
class ScoreModel {
 public:
  virtual ~ScoreModel() = default;
  virtual double score(double t, const Sequence& y, const Sequence& y2) const = 0;
  virtual void score_row(double t, const Sequence& y, std::vector<double>& row) const;
  virtual const SpaceSpec& spec() const = 0;
  virtual double horizon() const = 0;
};

// Exact discrete score computed from the closed-form forward kernel
// summed over the sparse target support.  With caching enabled, the
// dense forward marginal is materialized once per distinct (rounded)
// time and reused; cached and uncached evaluations are bitwise equal.
// Caching is meant for samplers that revisit a fixed time grid; event-
// driven samplers touching fresh random times should disable it.
class ExactScoreModel : public ScoreModel {
 public:
  ExactScoreModel(SparseDistribution target, double horizon, bool cache_marginals = true);

  double score(double t, const Sequence& y, const Sequence& y2) const override;
  void score_row(double t, const Sequence& y, std::vector<double>& row) const override;
  const SpaceSpec& spec() const override { return target_.spec(); }
  double horizon() const override { return horizon_; }

  const SparseDistribution& target() const { return target_; }
  // Forward marginal mass at forward time u = T - t.
  double marginal_prob(double u, const Sequence& y) const;

 private:
  void check_time(double t) const;
  const std::vector<double>* cached_marginal(double u) const;

  SparseDistribution target_;
  double horizon_;
  bool cache_marginals_;
  mutable std::mutex cache_mutex_;
  mutable std::unordered_map<std::int64_t, std::unique_ptr<std::vector<double>>> cache_;
};

// Multiplicative log-normal perturbation of a base score model,
// standing in for an imperfectly trained estimator.  sigma = 0
// reproduces the base model bit-for-bit; the noise is a deterministic
// standard normal keyed by (time bucket, y, y', seed), so replays with
// the same seed see the same oracle.
struct PerturbationSpec {
  double sigma = 0.0;
  std::uint64_t seed = 0;
};

class PerturbedScoreModel : public ScoreModel {
 public:
  PerturbedScoreModel(std::shared_ptr<const ScoreModel> base, PerturbationSpec spec);

  double score(double t, const Sequence& y, const Sequence& y2) const override;
  const SpaceSpec& spec() const override { return base_->spec(); }
  double horizon() const override { return base_->horizon(); }

 private:
  std::shared_ptr<const ScoreModel> base_;
  PerturbationSpec perturbation_;
};

// Per-chain counting wrapper.  The canonical counter increments once
// per queried (t, y) state, the way a score network is invoked; the
// neighbor counter additionally tracks individual ratio reads.
// Aggregation across chains is a plain sum of the per-chain counters.
class ScoreOracle {
 public:
  explicit ScoreOracle(const ScoreModel& model) : model_(&model) {}

  double score(double t, const Sequence& y, const Sequence& y2) {
    ++state_calls_;
    ++neighbor_reads_;
    return model_->score(t, y, y2);
  }

  void score_row(double t, const Sequence& y, std::vector<double>& row) {
    ++state_calls_;
    model_->score_row(t, y, row);
    neighbor_reads_ += row.size();
  }

  std::uint64_t calls() const { return state_calls_; }
  std::uint64_t neighbor_reads() const { return neighbor_reads_; }
  const ScoreModel& model() const { return *model_; }

 private:
  const ScoreModel* model_;
  std::uint64_t state_calls_ = 0;
  std::uint64_t neighbor_reads_ = 0;
};

// Score entropy loss of an estimator against the exact score, computed
// by exact state enumeration and trapezoid quadrature over `grid`
// (reverse times within [0, T]).  Zero for the exact oracle.
double score_entropy_loss(const SparseDistribution& q0, double horizon,
                          const ScoreModel& estimator, const std::vector<double>& grid);

// Discrete-time variant: the estimator is frozen at the left endpoint
// kh of each segment while the true score and the state distribution
// follow t.  Quadrature is per-segment trapezoid on
// `points_per_segment` uniform nodes.  Requires (T - delta) = n h.
double dis_score_entropy_loss(const SparseDistribution& q0, double horizon,
                              double early_stop, double step,
                              const ScoreModel& estimator, int points_per_segment = 9);

// Uniform grid of `points` times from lo to hi inclusive.
std::vector<double> uniform_grid(double lo, double hi, int points);

}  // namespace maskdiff

#endif  // MASKDIFF_SCORE_ENGINE_HPP
