#ifndef MASKDIFF_ANALYSIS_HPP
#define MASKDIFF_ANALYSIS_HPP

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "maskdiff/samplers.hpp"
#include "maskdiff/state_space.hpp"

namespace maskdiff {

// Total variation distance, 1/2 * L1 convention: the accuracy metric the
// convergence statements are phrased in ("TV <= 2 eps" reads literally).
double tv_distance(const DenseDistribution& p, const DenseDistribution& q);

// KL(p || q); requires support(p) within support(q), otherwise raises
// AbsoluteContinuityError.
double kl_divergence(const DenseDistribution& p, const DenseDistribution& q);

// Frequency vector of a nonempty batch of sequences.
DenseDistribution empirical_distribution(std::span<const Sequence> samples,
                                         const SpaceSpec& spec);

// One experiment: a target file, a sampler, an accuracy target, and a
// chain budget, with optional schedule overrides.
struct ExperimentConfig {
  std::string target_path;
  std::string sampler;  // euler_seq | euler_par | unif | matu
  double epsilon = 0.2;
  int chains = 1;
  std::uint64_t seed = 0;
  std::optional<double> horizon;     // --T
  std::optional<double> early_stop;  // --delta
  std::optional<double> euler_step;  // --h
  std::optional<double> segment;     // --eta
  double sigma = 0.0;                // score perturbation scale
  std::string out_csv;               // empty: no file output
  int threads = 0;                   // 0: hardware concurrency
};

constexpr const char* kCsvHeader =
    "sampler,d,K,eps,chains,tv,kl_init,mean_calls,bound_calls,seconds,seed";

struct ResultRow {
  std::string sampler;
  int d = 0;
  int k = 0;
  double eps = 0.0;
  int chains = 0;
  double tv = 0.0;
  double kl_init = 0.0;
  double mean_calls = 0.0;
  double bound_calls = 0.0;
  double seconds = 0.0;
  std::uint64_t seed = 0;

  std::string csv() const;
};

// Resolves the schedule for a config: default_schedule(eps) with the
// overrides applied, the horizon re-stretched (unless pinned by an
// explicit T) and the Euler step shrunk so both grids tile the span.
SamplerSchedule resolve_schedule(const ExperimentConfig& cfg, const SpaceSpec& spec);

// Runs the configured chains (concurrently, reduction-order independent),
// measures TV to the target and the score-call statistics, appends one
// CSV row and writes a JSON sidecar holding the full config for replay.
ResultRow run_experiment(const ExperimentConfig& cfg);

// Same, with the target supplied in memory; file outputs are written
// only when cfg.out_csv is nonempty.
ResultRow run_experiment(const ExperimentConfig& cfg, const SparseDistribution& target);

// Re-runs the experiment recorded in a sidecar; the returned row must
// match the recorded one bit-for-bit except for the seconds column.
ResultRow replay_sidecar(const std::string& sidecar_path);
ResultRow replay_sidecar(const std::string& sidecar_path, const SparseDistribution& target);

// Runs `chains` independent chains with per-chain rng streams split from
// `seed`; results come back indexed by chain, so any thread count yields
// the same reduction.
std::vector<RunReport> run_chains(int chains, std::uint64_t seed, int threads,
                                  const std::function<RunReport(int, Rng&)>& body);

}  // namespace maskdiff

#endif  // MASKDIFF_ANALYSIS_HPP
