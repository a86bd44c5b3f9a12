#include "maskdiff/checks.hpp"

#include <algorithm>
#include <cmath>

#include "maskdiff/forward_process.hpp"
#include "maskdiff/reverse_dynamics.hpp"
#include "maskdiff/rng.hpp"
#include "maskdiff/score_engine.hpp"

namespace maskdiff {

namespace {

SparseDistribution full_support_mask_free(const SpaceSpec& spec, Rng& rng) {
  std::vector<SparseDistribution::Entry> entries;
  Sequence y(static_cast<std::size_t>(spec.length()), 1);
  double total = 0.0;
  while (true) {
    const double weight = 0.2 + rng.uniform();
    entries.push_back({y, weight});
    total += weight;
    int i = spec.length() - 1;
    while (i >= 0 && y[static_cast<std::size_t>(i)] == spec.vocab() - 1) {
      y[static_cast<std::size_t>(i)] = 1;
      --i;
    }
    if (i < 0) break;
    ++y[static_cast<std::size_t>(i)];
  }
  for (auto& e : entries) e.prob /= total;
  return SparseDistribution(spec, std::move(entries));
}

SparseDistribution random_mask_free(const SpaceSpec& spec, int support_size, Rng& rng) {
  std::vector<SparseDistribution::Entry> entries;
  std::vector<StateIndex> seen;
  while (static_cast<int>(entries.size()) < support_size) {
    Sequence y(static_cast<std::size_t>(spec.length()));
    for (Token& t : y) {
      t = 1 + static_cast<Token>(rng.uniform() * (spec.vocab() - 1));
      if (t >= spec.vocab()) t = spec.vocab() - 1;
    }
    const StateIndex id = encode(spec, y);
    if (std::find(seen.begin(), seen.end(), id) != seen.end()) continue;
    seen.push_back(id);
    const double weight = -std::log(rng.uniform_pos()) - std::log(rng.uniform_pos());
    entries.push_back({std::move(y), weight});
  }
  double total = 0.0;
  for (const auto& e : entries) total += e.prob;
  for (auto& e : entries) e.prob /= total;
  return SparseDistribution(spec, std::move(entries));
}

}  // namespace

ForwardInvariantReport check_forward_invariants(
    const std::vector<std::pair<int, int>>& sizes, std::uint64_t seed) {
  ForwardInvariantReport report;
  Rng rng(seed);
  const double probe_time = std::log(2.0);
  const double dt = 1e-6;
  for (const auto& [d, k] : sizes) {
    const SpaceSpec spec(d, k);
    for (StateIndex j = 0; j < spec.num_states(); ++j) {
      const Sequence yprev = decode(spec, j);
      double column = 0.0;
      double row = 0.0;
      for (StateIndex i = 0; i < spec.num_states(); ++i) {
        const Sequence y = decode(spec, i);
        column += rate_forward(spec, y, yprev);
        row += kernel_prob(spec, y, yprev, probe_time);
        const double fd =
            (kernel_prob(spec, y, yprev, dt) - (y == yprev ? 1.0 : 0.0)) / dt;
        report.max_generator_violation = std::max(
            report.max_generator_violation, std::abs(fd - rate_forward(spec, y, yprev)));
      }
      report.max_column_violation = std::max(report.max_column_violation, std::abs(column));
      report.max_row_violation = std::max(report.max_row_violation, std::abs(row - 1.0));
    }

    // Chapman-Kolmogorov against a random sparse initial distribution.
    const int mask_free_states = static_cast<int>(std::pow(k - 1, d));
    const int support = std::min(4, mask_free_states);
    const SparseDistribution q0 = random_mask_free(spec, support, rng);
    const double s = 0.6, t = 1.1;
    const DenseDistribution direct = marginal_at(q0, s + t);
    const DenseDistribution at_s = marginal_at(q0, s);
    for (StateIndex i = 0; i < spec.num_states(); ++i) {
      const Sequence y = decode(spec, i);
      double pushed = 0.0;
      for (StateIndex jj = 0; jj < spec.num_states(); ++jj) {
        pushed += kernel_prob(spec, y, decode(spec, jj), t) * at_s.prob(jj);
      }
      report.max_chapman_violation =
          std::max(report.max_chapman_violation, std::abs(pushed - direct.prob(i)));
    }
  }
  return report;
}

InitBoundReport check_init_bound(int num_targets, std::uint64_t seed) {
  InitBoundReport report;
  Rng rng(seed);
  const std::vector<std::pair<int, int>> sizes = {{2, 3}, {3, 3}, {4, 4}, {5, 4}, {5, 3},
                                                  {2, 4}, {3, 4}, {4, 3}, {5, 2}, {1, 2}};
  for (int n = 0; n < num_targets; ++n) {
    const auto [d, k] = sizes[static_cast<std::size_t>(n) % sizes.size()];
    const SpaceSpec spec(d, k);
    const int max_support = static_cast<int>(
        std::min<StateIndex>(6, static_cast<StateIndex>(std::pow(k - 1, d))));
    const int support = std::max(1, std::min(max_support, 2 + static_cast<int>(rng.uniform() * 5)));
    const SparseDistribution q0 = random_mask_free(spec, support, rng);

    for (double t = 0.5; t <= 8.0 + 1e-12; t += 0.5) {
      const KlInitGap gap = kl_init_gap(q0, t);
      ++report.points_checked;
      if (gap.kl > gap.bound) ++report.violations;
      report.max_kl_minus_bound = std::max(report.max_kl_minus_bound, gap.kl - gap.bound);
      report.max_ratio = std::max(report.max_ratio, gap.kl / gap.bound);
    }
    for (double eps : {0.1, 0.01}) {
      const double t = std::log(4.0 * d / eps);
      const double kl = kl_init_gap(q0, t).kl;
      double& slot = eps == 0.1 ? report.mixing_kl_at_01 : report.mixing_kl_at_001;
      slot = std::max(slot, kl);
      if (kl > eps) ++report.violations;
    }
  }
  return report;
}

RateBoundReport check_rate_bounds(int grid_points, std::uint64_t seed) {
  RateBoundReport report;
  Rng rng(seed);
  const SpaceSpec spec(3, 3);
  const SparseDistribution q0 = full_support_mask_free(spec, rng);
  const double horizon = 3.0;
  const ExactScoreModel exact(q0, horizon);
  ScoreOracle oracle(exact);
  const ReverseRateView view(oracle, horizon);

  std::vector<double> row;
  for (int g = 0; g < grid_points; ++g) {
    const double t = 0.01 + (horizon - 0.02) * g / (grid_points - 1);
    const double limit = 1.0 / std::expm1(horizon - t);
    for (StateIndex i = 0; i < spec.num_states(); ++i) {
      const Sequence y = decode(spec, i);
      if (num_mask(spec, y) == 0) continue;
      const double outgoing = view.rate_row(t, y, row);
      const double beta = beta_bound(spec, horizon, t, y);
      ++report.points_checked;
      if (outgoing > beta) ++report.violations;
      report.max_outgoing_over_beta = std::max(report.max_outgoing_over_beta, outgoing / beta);
      for (double score : row) {
        if (score / limit > report.max_score_over_limit) {
          report.max_score_over_limit = score / limit;
        }
        if (score > limit * (1 + 1e-12)) ++report.violations;
      }
    }
  }
  return report;
}

}  // namespace maskdiff
