// Acceptance suite: one pass/fail line per criterion, nonzero exit on
// any failure.  Every tolerance is pinned here in code.

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "maskdiff/analysis.hpp"
#include "maskdiff/checks.hpp"
#include "maskdiff/forward_process.hpp"
#include "maskdiff/samplers.hpp"
#include "maskdiff/score_engine.hpp"

using namespace maskdiff;

namespace {

int failures = 0;

void report(int id, const char* name, bool pass, const std::string& detail, double seconds) {
  std::printf("[%s] criterion %d %-24s %s  (%.1fs)\n", pass ? "PASS" : "FAIL", id, name,
              detail.c_str(), seconds);
  std::fflush(stdout);
  if (!pass) ++failures;
}

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

std::string fmt(const char* format, ...) {
  char buf[512];
  va_list args;
  va_start(args, format);
  std::vsnprintf(buf, sizeof(buf), format, args);
  va_end(args);
  return buf;
}

// Every transition must unmask exactly one coordinate and leave the
// already-unmasked ones untouched.
bool trajectory_legal(const SpaceSpec& spec, const std::vector<Sequence>& trajectory) {
  for (std::size_t s = 1; s < trajectory.size(); ++s) {
    const Sequence& prev = trajectory[s - 1];
    const Sequence& next = trajectory[s];
    int changed = 0;
    for (std::size_t i = 0; i < prev.size(); ++i) {
      if (prev[i] == next[i]) continue;
      ++changed;
      if (prev[i] != spec.mask_token() || next[i] == spec.mask_token()) return false;
    }
    if (changed != 1) return false;
  }
  return true;
}

SparseDistribution target_d2_k3() {
  const SpaceSpec spec(2, 3);
  return SparseDistribution(
      spec, {{{1, 2}, 0.35}, {{2, 1}, 0.25}, {{1, 1}, 0.25}, {{2, 2}, 0.15}});
}

SparseDistribution target_d4_k3() {
  const SpaceSpec spec(4, 3);
  return SparseDistribution(spec, {{{1, 2, 1, 2}, 0.3},
                                   {{2, 1, 2, 1}, 0.25},
                                   {{1, 1, 2, 2}, 0.2},
                                   {{2, 2, 1, 1}, 0.15},
                                   {{1, 1, 1, 1}, 0.1}});
}

// Full-support (3,3) target with uneven but well-spread weights.
SparseDistribution target_d3_k3_full() {
  const SpaceSpec spec(3, 3);
  std::vector<SparseDistribution::Entry> entries;
  double total = 0.0;
  int salt = 0;
  for (Token a = 1; a <= 2; ++a) {
    for (Token b = 1; b <= 2; ++b) {
      for (Token c = 1; c <= 2; ++c) {
        const double weight = 1.0 + 0.45 * std::sin(1.7 * ++salt);
        entries.push_back({{a, b, c}, weight});
        total += weight;
      }
    }
  }
  for (auto& e : entries) e.prob /= total;
  return SparseDistribution(spec, std::move(entries));
}

std::atomic<std::uint64_t> monotonicity_violations{0};
std::uint64_t monotonicity_chains = 0;

// Shared between criteria 5, 8 and 9.
ResultRow criterion5_row;
std::string criterion5_sidecar;
std::string sigma_sidecar;
ResultRow sigma_row;

void criterion_1() {
  Stopwatch clock;
  const std::vector<std::pair<int, int>> sizes = {{1, 2}, {2, 3}, {3, 3}, {3, 4}};
  const ForwardInvariantReport rep = check_forward_invariants(sizes, 17);
  const bool pass = rep.pass(1e-10, 1e-4) && clock.seconds() < 10.0;
  report(1, "forward-correctness", pass,
         fmt("closed-form max %.2e / %.2e / %.2e (tol 1e-10), generator max %.2e (tol 1e-4)",
             rep.max_column_violation, rep.max_row_violation, rep.max_chapman_violation,
             rep.max_generator_violation),
         clock.seconds());
}

void criterion_2() {
  Stopwatch clock;
  const InitBoundReport rep = check_init_bound(20, 20240);
  const bool pass = rep.violations == 0 && rep.mixing_kl_at_01 <= 0.1 &&
                    rep.mixing_kl_at_001 <= 0.01 && clock.seconds() < 30.0;
  report(2, "init-kl-bound", pass,
         fmt("%d points, %d violations, worst kl/bound %.4f, mixing kl %.3e / %.3e",
             rep.points_checked, rep.violations, rep.max_ratio, rep.mixing_kl_at_01,
             rep.mixing_kl_at_001),
         clock.seconds());
}

void criterion_3() {
  Stopwatch clock;
  const RateBoundReport rep = check_rate_bounds(50, 313);
  const bool pass = rep.violations == 0 && clock.seconds() < 60.0;
  report(3, "outgoing-rate-bound", pass,
         fmt("%d points, %d violations, worst outgoing/beta %.4f, worst score/limit %.4f",
             rep.points_checked, rep.violations, rep.max_outgoing_over_beta,
             rep.max_score_over_limit),
         clock.seconds());
}

void criterion_4() {
  Stopwatch clock;
  const SparseDistribution q0 = target_d2_k3();
  SamplerSchedule sched = default_schedule(0.2, q0.spec());
  sched.seed = 4001;
  const ExactScoreModel exact(q0, sched.horizon, false);
  const int chains = 1000000;
  const auto reports = run_chains(chains, sched.seed, 0, [&](int, Rng& rng) {
    std::vector<Sequence> trajectory;
    RunReport r = matu_run(q0, exact, sched, rng, &trajectory);
    if (!trajectory_legal(q0.spec(), trajectory)) ++monotonicity_violations;
    // Only the final state is reduced over a million chains.
    r.per_segment_draws = {};
    return r;
  });
  monotonicity_chains += static_cast<std::uint64_t>(chains);
  std::vector<Sequence> finals;
  finals.reserve(reports.size());
  for (const auto& r : reports) finals.push_back(r.final);
  const DenseDistribution reference = marginal_at(q0, sched.early_stop);
  const double tv = tv_distance(empirical_distribution(finals, q0.spec()), reference);
  const bool pass = tv <= 0.02 && clock.seconds() < 300.0;
  report(4, "uniformization-unbiased", pass,
         fmt("TV(empirical, exact reverse marginal) = %.5f (tol 0.02, %d chains)", tv, chains),
         clock.seconds());
}

void criterion_5(const std::filesystem::path& outdir) {
  Stopwatch clock;
  const SparseDistribution q0 = target_d4_k3();

  ExperimentConfig cfg;
  cfg.target_path = (outdir / "target_d4_k3.json").string();
  cfg.sampler = "matu";
  cfg.epsilon = 0.5;
  cfg.chains = 10000;
  cfg.seed = 5001;
  cfg.out_csv = (outdir / "acceptance.csv").string();
  criterion5_row = run_experiment(cfg, q0);
  criterion5_sidecar = cfg.out_csv + ".row0.json";

  // Trajectory legality on the same instance feeds criterion 6.
  const SamplerSchedule sched = resolve_schedule(cfg, q0.spec());
  const ExactScoreModel exact(q0, sched.horizon, false);
  run_chains(cfg.chains, cfg.seed, 0, [&](int, Rng& rng) {
    std::vector<Sequence> trajectory;
    RunReport r = matu_run(q0, exact, sched, rng, &trajectory);
    if (!trajectory_legal(q0.spec(), trajectory)) ++monotonicity_violations;
    return r;
  });
  monotonicity_chains += static_cast<std::uint64_t>(cfg.chains);

  const double tv_budget = 2.0 * cfg.epsilon;
  const bool pass = criterion5_row.tv <= tv_budget &&
                    criterion5_row.mean_calls <= criterion5_row.bound_calls &&
                    clock.seconds() < 300.0;
  report(5, "end-to-end-tv-and-calls", pass,
         fmt("TV %.4f <= %.2f (margin %.4f); mean calls %.2f <= %.2f (margin %.2f)",
             criterion5_row.tv, tv_budget, tv_budget - criterion5_row.tv,
             criterion5_row.mean_calls, criterion5_row.bound_calls,
             criterion5_row.bound_calls - criterion5_row.mean_calls),
         clock.seconds());
}

void criterion_6() {
  Stopwatch clock;
  const std::uint64_t bad = monotonicity_violations.load();
  const bool pass = monotonicity_chains > 0 && bad == 0;
  report(6, "monotone-unmasking", pass,
         fmt("%llu/%llu trajectories legal",
             static_cast<unsigned long long>(monotonicity_chains - bad),
             static_cast<unsigned long long>(monotonicity_chains)),
         clock.seconds());
}

void criterion_7() {
  Stopwatch clock;
  const SparseDistribution q0 = target_d3_k3_full();
  SamplerSchedule sched = default_schedule(0.1, q0.spec());
  const double h0 = sched.span() / 256.0;
  const int chains = 100000;
  const DenseDistribution reference = marginal_at(q0, sched.early_stop);

  std::vector<double> tvs;
  for (int level = 0; level < 3; ++level) {
    sched.euler_step = h0 / static_cast<double>(1 << level);
    const ExactScoreModel exact(q0, sched.horizon, true);
    const auto reports = run_chains(chains, 7001 + level, 0, [&](int, Rng& rng) {
      return euler_sequential_run(q0, exact, sched, rng);
    });
    std::vector<Sequence> finals;
    finals.reserve(reports.size());
    for (const auto& r : reports) finals.push_back(r.final);
    tvs.push_back(tv_distance(empirical_distribution(finals, q0.spec()), reference));
  }

  // 3-sigma band for the difference of two empirical TV estimates.
  const double sigma_tv_hat =
      0.5 * std::sqrt(static_cast<double>(q0.spec().num_states()) / chains);
  const double band = 3.0 * sigma_tv_hat * std::sqrt(2.0);
  const bool monotone = tvs[1] <= tvs[0] + band && tvs[2] <= tvs[1] + band;
  const bool small = tvs[2] <= 0.1;
  const bool pass = monotone && small && clock.seconds() < 300.0;
  report(7, "euler-convergence-trend", pass,
         fmt("TV(h0)=%.4f TV(h0/2)=%.4f TV(h0/4)=%.4f (band %.4f, final tol 0.1)", tvs[0],
             tvs[1], tvs[2], band),
         clock.seconds());
}

void criterion_8(const std::filesystem::path& outdir) {
  Stopwatch clock;
  // Loss calibration on (3,3).
  const SparseDistribution q0 = target_d3_k3_full();
  const double horizon = default_schedule(0.1, q0.spec()).horizon;
  auto exact = std::make_shared<ExactScoreModel>(q0, horizon);
  const std::vector<double> grid = uniform_grid(0.05, horizon - 0.05, 64);
  const double exact_loss = score_entropy_loss(q0, horizon, *exact, grid);
  bool strictly_increasing = true;
  double previous = exact_loss;
  std::vector<double> losses{exact_loss};
  for (double sigma : {0.05, 0.1, 0.2}) {
    const PerturbedScoreModel noisy(exact, {sigma, 8001});
    const double loss = score_entropy_loss(q0, horizon, noisy, grid);
    strictly_increasing = strictly_increasing && loss > previous;
    previous = loss;
    losses.push_back(loss);
  }

  // Graceful MATU degradation on the criterion-5 instance.
  const SparseDistribution q5 = target_d4_k3();
  ExperimentConfig cfg;
  cfg.target_path = (outdir / "target_d4_k3.json").string();
  cfg.sampler = "matu";
  cfg.epsilon = 0.5;
  cfg.chains = 10000;
  cfg.seed = 5001;
  cfg.sigma = 0.1;
  cfg.out_csv = (outdir / "acceptance.csv").string();
  sigma_row = run_experiment(cfg, q5);
  sigma_sidecar = cfg.out_csv + ".row1.json";
  const double degradation = sigma_row.tv - criterion5_row.tv;

  const bool pass = exact_loss <= 1e-12 && strictly_increasing && degradation < 0.1;
  report(8, "score-loss-calibration", pass,
         fmt("L_SE(exact)=%.2e; L_SE over sigma=%.2e/%.2e/%.2e %s; TV degradation %.4f (tol 0.1)",
             exact_loss, losses[1], losses[2], losses[3],
             strictly_increasing ? "strictly increasing" : "NOT increasing", degradation),
         clock.seconds());
}

std::string masked_csv(const ResultRow& row) {
  // Blank the wallclock column (field 10 of 11).
  const std::string csv = row.csv();
  std::size_t commas = 0, lo = 0, hi = csv.size();
  for (std::size_t i = 0; i < csv.size(); ++i) {
    if (csv[i] != ',') continue;
    ++commas;
    if (commas == 9) lo = i + 1;
    if (commas == 10) hi = i;
  }
  return csv.substr(0, lo) + "-" + csv.substr(hi);
}

void criterion_9() {
  Stopwatch clock;
  const SparseDistribution q5 = target_d4_k3();
  const ResultRow replay5 = replay_sidecar(criterion5_sidecar, q5);
  const bool match5 = masked_csv(replay5) == masked_csv(criterion5_row);
  const ResultRow replay_sigma = replay_sidecar(sigma_sidecar, q5);
  const bool match_sigma = masked_csv(replay_sigma) == masked_csv(sigma_row);

  const bool pass = match5 && match_sigma;
  report(9, "determinism-replay", pass,
         fmt("criterion-5 row %s, sigma row %s", match5 ? "reproduced" : "DIFFERS",
             match_sigma ? "reproduced" : "DIFFERS"),
         clock.seconds());
}

}  // namespace

int main() {
  const auto outdir = std::filesystem::temp_directory_path() / "maskdiff_acceptance";
  std::filesystem::remove_all(outdir);
  std::filesystem::create_directories(outdir);

  criterion_1();
  criterion_2();
  criterion_3();
  criterion_4();
  criterion_5(outdir);
  criterion_6();
  criterion_7();
  criterion_8(outdir);
  criterion_9();

  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
