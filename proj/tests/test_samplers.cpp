#include <doctest.h>

#include <cmath>

#include "maskdiff/analysis.hpp"
#include "maskdiff/samplers.hpp"
#include "test_helpers.hpp"

using namespace maskdiff;
using namespace maskdiff::testing;

namespace {

// Oracle whose every neighbor ratio is zero: no chain ever moves.
class ZeroModel : public ScoreModel {
 public:
  ZeroModel(const SpaceSpec& spec, double horizon) : spec_(spec), horizon_(horizon) {}
  double score(double, const Sequence& y, const Sequence& y2) const override {
    return y == y2 ? 1.0 : 0.0;
  }
  const SpaceSpec& spec() const override { return spec_; }
  double horizon() const override { return horizon_; }

 private:
  SpaceSpec spec_;
  double horizon_;
};

class ScaledModel : public ScoreModel {
 public:
  ScaledModel(const ScoreModel& base, double factor) : base_(&base), factor_(factor) {}
  double score(double t, const Sequence& y, const Sequence& y2) const override {
    return factor_ * base_->score(t, y, y2);
  }
  const SpaceSpec& spec() const override { return base_->spec(); }
  double horizon() const override { return base_->horizon(); }

 private:
  const ScoreModel* base_;
  double factor_;
};

double empirical_tv(const std::vector<Sequence>& samples, const DenseDistribution& reference) {
  return tv_distance(empirical_distribution(samples, reference.spec()), reference);
}

bool reports_equal(const RunReport& a, const RunReport& b) {
  return a.final == b.final && a.score_calls == b.score_calls && a.events == b.events &&
         a.clamped_steps == b.clamped_steps && a.per_segment_draws == b.per_segment_draws;
}

}  // namespace

TEST_CASE("default schedule follows the accuracy-driven formulas") {
  const SpaceSpec spec(4, 3);
  const SamplerSchedule sched = default_schedule(0.5, spec);
  CHECK(sched.early_stop == doctest::Approx(0.125));
  CHECK(sched.segment == doctest::Approx(0.0625));
  const double nominal = std::log(64.0);
  CHECK(nominal == doctest::Approx(4.158883).epsilon(1e-6));
  CHECK(sched.horizon >= nominal);
  CHECK(sched.horizon - nominal < sched.segment);
  // W * eta tiles the span exactly after the stretch.
  const int segments = sched.num_segments();
  CHECK(std::abs(segments * sched.segment - sched.span()) <= 1e-9);
  CHECK(std::abs(sched.num_euler_steps() * sched.euler_step - sched.span()) <= 1e-9);

  const SpaceSpec wide(10, 3);
  CHECK(default_schedule(0.1, wide).horizon >= std::log(4000.0));

  CHECK_THROWS_AS(default_schedule(1.0, spec), ConfigError);
  CHECK_THROWS_AS(default_schedule(0.0, spec), ConfigError);
}

TEST_CASE("score call bound") {
  const SpaceSpec spec(4, 3);
  CHECK(score_call_bound(spec, 0.5) ==
        doctest::Approx(6.0 * 3.9375 + 144.0 * std::log(4.0)).epsilon(1e-12));
  CHECK(score_call_bound(spec, 0.5) == doctest::Approx(223.2561).epsilon(1e-4));
  CHECK(score_call_bound(spec, 0.9) < score_call_bound(spec, 0.1));
  CHECK_THROWS_AS(score_call_bound(spec, 1.2), DomainError);
}

TEST_CASE("euler samplers") {
  const SpaceSpec spec(2, 3);
  Rng seeder(71);
  const auto q0 = random_target(spec, 3, seeder);

  SUBCASE("zero rates leave the initial draw untouched") {
    SamplerSchedule sched = default_schedule(0.3, spec);
    const ZeroModel zero(spec, sched.horizon);
    Rng rng(2001);
    const RunReport report = euler_sequential_run(q0, zero, sched, rng);
    Rng replay(2001);
    CHECK(report.final == tilde_sample(spec, sched.horizon, replay));
    CHECK(report.score_calls == static_cast<std::uint64_t>(sched.num_euler_steps()));
    CHECK(report.events == 0);

    Rng rng2(2001);
    const RunReport parallel = euler_parallel_run(q0, zero, sched, rng2);
    CHECK(parallel.final == report.final);
    CHECK(parallel.events == 0);
  }

  SUBCASE("two-state chain reaches the exact reverse marginal") {
    const SpaceSpec line(1, 2);
    const auto point = point_mass(line, {1});
    SamplerSchedule sched = default_schedule(0.2, line);
    const ExactScoreModel exact(point, sched.horizon);
    const DenseDistribution reference = marginal_at(point, sched.early_stop);
    const int chains = 100000;
    std::vector<Sequence> finals;
    finals.reserve(chains);
    for (int c = 0; c < chains; ++c) {
      Rng rng = Rng::for_chain(31, static_cast<std::uint64_t>(c));
      finals.push_back(euler_sequential_run(point, exact, sched, rng).final);
    }
    CHECK(empirical_tv(finals, reference) <= 0.05);
  }

  SUBCASE("sequential and parallel agree on a product target") {
    // Independent coordinates: mu^{(x)d} target.
    const SpaceSpec spec3(3, 3);
    std::vector<SparseDistribution::Entry> entries;
    const double mu[2] = {0.7, 0.3};
    for (Token a = 1; a <= 2; ++a) {
      for (Token b = 1; b <= 2; ++b) {
        for (Token c = 1; c <= 2; ++c) {
          entries.push_back({{a, b, c}, mu[a - 1] * mu[b - 1] * mu[c - 1]});
        }
      }
    }
    const SparseDistribution product(spec3, entries);
    // Generous early stop keeps the end-of-horizon rates tame, so the
    // O(h) gap between the two update rules sits below the noise band.
    SamplerSchedule sched;
    sched.horizon = 5.0;
    sched.early_stop = 0.5;
    sched.segment = (sched.horizon - sched.early_stop) / 4.0;
    sched.euler_step = (sched.horizon - sched.early_stop) / 256.0;
    const ExactScoreModel exact(product, sched.horizon);

    const int chains = 100000;
    std::vector<Sequence> seq_finals, par_finals;
    for (int c = 0; c < chains; ++c) {
      Rng rng_a = Rng::for_chain(77, static_cast<std::uint64_t>(c));
      seq_finals.push_back(euler_sequential_run(product, exact, sched, rng_a).final);
      Rng rng_b = Rng::for_chain(2077, static_cast<std::uint64_t>(c));
      par_finals.push_back(euler_parallel_run(product, exact, sched, rng_b).final);
    }
    const DenseDistribution seq_emp = empirical_distribution(seq_finals, spec3);
    const DenseDistribution par_emp = empirical_distribution(par_finals, spec3);
    // 3-sigma-style band for the TV between two empirical laws.
    const double band =
        1.5 * (std::sqrt(spec3.num_states() / static_cast<double>(chains)) * 2.0);
    CHECK(tv_distance(seq_emp, par_emp) <= band);
  }

  SUBCASE("oversized steps clamp the stay weight and get recorded") {
    // Few huge steps: the late ones meet end-of-horizon rates with
    // h * R > 1, which must clamp rather than produce negative weights.
    Rng full_rng(6);
    const auto full = full_support_target(spec, full_rng);
    SamplerSchedule sched;
    sched.horizon = 2.0;
    sched.early_stop = 0.05;
    sched.segment = sched.span();
    sched.euler_step = sched.span() / 3.0;
    const ExactScoreModel exact(full, sched.horizon);
    std::uint64_t clamped = 0;
    for (int c = 0; c < 500; ++c) {
      Rng rng = Rng::for_chain(5, static_cast<std::uint64_t>(c));
      clamped += euler_sequential_run(full, exact, sched, rng).clamped_steps;
    }
    CHECK(clamped > 0);
  }
}

TEST_CASE("generic uniformization") {
  const SpaceSpec spec(2, 3);
  Rng seeder(81);
  const auto q0 = random_target(spec, 3, seeder);
  SamplerSchedule sched = default_schedule(0.25, spec);
  const ExactScoreModel exact(q0, sched.horizon, false);

  const int segments = sched.num_segments();
  std::vector<double> grid(static_cast<std::size_t>(segments) + 1, 0.0);
  for (int w = 1; w <= segments; ++w) {
    grid[static_cast<std::size_t>(w)] = (w == segments) ? sched.span() : w * sched.segment;
  }
  const double d = spec.length(), k = spec.vocab(), horizon = sched.horizon;
  auto beta_exact = [&](int w) {
    return d * k / std::expm1(horizon - grid[static_cast<std::size_t>(w)]);
  };
  auto beta_inflated = [&](int w) { return 10.0 * beta_exact(w); };

  SUBCASE("output law is invariant to the dominating rate") {
    const int chains = 100000;
    std::vector<Sequence> tight, loose;
    for (int c = 0; c < chains; ++c) {
      Rng rng_a = Rng::for_chain(11, static_cast<std::uint64_t>(c));
      tight.push_back(uniformization_run(q0, exact, sched.horizon, sched.early_stop, grid,
                                         beta_exact, rng_a)
                          .final);
      Rng rng_b = Rng::for_chain(211, static_cast<std::uint64_t>(c));
      loose.push_back(uniformization_run(q0, exact, sched.horizon, sched.early_stop, grid,
                                         beta_inflated, rng_b)
                          .final);
    }
    const double band =
        1.5 * (std::sqrt(spec.num_states() / static_cast<double>(chains)) * 2.0);
    CHECK(tv_distance(empirical_distribution(tight, spec), empirical_distribution(loose, spec)) <=
          band);
  }

  SUBCASE("zero-rate oracle stays put but still spends score calls") {
    const ZeroModel zero(spec, sched.horizon);
    std::uint64_t calls = 0, draws = 0;
    for (int c = 0; c < 300; ++c) {
      Rng rng = Rng::for_chain(13, static_cast<std::uint64_t>(c));
      const RunReport report =
          uniformization_run(q0, zero, sched.horizon, sched.early_stop, grid, beta_exact, rng);
      CHECK(report.events == 0);
      calls += report.score_calls;
      for (long n : report.per_segment_draws) draws += static_cast<std::uint64_t>(n);
    }
    CHECK(calls == draws);
    CHECK(calls > 0);
  }

  SUBCASE("two-state chain with frozen rates matches the analytic law") {
    // Constant unmask rate r: the reverse chain is a two-state CTMC with
    // absorbing unmasked state, so P(still masked at t) = e^{-r t}.
    class ConstRateModel : public ScoreModel {
     public:
      ConstRateModel(const SpaceSpec& spec, double rate) : spec_(spec), rate_(rate) {}
      double score(double, const Sequence& y, const Sequence& y2) const override {
        if (y == y2) return 1.0;
        return y[0] == spec_.mask_token() ? rate_ : 0.0;
      }
      const SpaceSpec& spec() const override { return spec_; }
      double horizon() const override { return 700.0; }

     private:
      SpaceSpec spec_;
      double rate_;
    };

    const SpaceSpec line(1, 2);
    const auto point = point_mass(line, {1});
    const double rate = 0.8, t_end = 1.5;
    const ConstRateModel frozen(line, rate);
    // Horizon 700 forces a deterministic all-mask initial draw.
    const std::vector<double> two_grid{0.0, t_end};
    const int chains = 100000;
    int masked = 0;
    for (int c = 0; c < chains; ++c) {
      Rng rng = Rng::for_chain(19, static_cast<std::uint64_t>(c));
      const RunReport report = uniformization_run(
          point, frozen, 700.0, 700.0 - t_end, two_grid, [&](int) { return 2.0 * rate; }, rng);
      masked += report.final[0] == line.mask_token();
    }
    const double expected = std::exp(-rate * t_end);
    CHECK(std::abs(static_cast<double>(masked) / chains - expected) <=
          3 * freq_sigma(expected, chains));
  }

  SUBCASE("a violated dominating rate is reported, not absorbed") {
    const ScaledModel inflated(exact, 25.0);
    bool violated = false;
    for (int c = 0; c < 200 && !violated; ++c) {
      Rng rng = Rng::for_chain(17, static_cast<std::uint64_t>(c));
      try {
        uniformization_run(q0, inflated, sched.horizon, sched.early_stop, grid, beta_exact, rng);
      } catch (const BetaViolationError& e) {
        violated = true;
        CHECK(std::string(e.what()).find("state") != std::string::npos);
        CHECK(std::string(e.what()).find("time") != std::string::npos);
      }
    }
    CHECK(violated);
  }
}

TEST_CASE("mask-aware truncated uniformization") {
  const SpaceSpec spec(3, 3);
  Rng seeder(91);
  const auto q0 = random_target(spec, 4, seeder);

  SUBCASE("trajectories unmask monotonically") {
    SamplerSchedule sched = default_schedule(0.3, spec);
    const ExactScoreModel exact(q0, sched.horizon, false);
    for (int c = 0; c < 2000; ++c) {
      Rng rng = Rng::for_chain(23, static_cast<std::uint64_t>(c));
      std::vector<Sequence> trajectory;
      matu_run(q0, exact, sched, rng, &trajectory);
      for (std::size_t s = 1; s < trajectory.size(); ++s) {
        const Sequence& prev = trajectory[s - 1];
        const Sequence& next = trajectory[s];
        CHECK(num_mask(spec, next) == num_mask(spec, prev) - 1);
        for (std::size_t i = 0; i < prev.size(); ++i) {
          if (prev[i] != spec.mask_token()) CHECK(next[i] == prev[i]);
        }
      }
    }
  }

  SUBCASE("point-mass target is recovered at the guaranteed rate") {
    const Sequence truth{1, 2, 1};
    const auto point = point_mass(spec, truth);
    const double eps = 0.1;
    SamplerSchedule sched = default_schedule(eps, spec);
    const ExactScoreModel exact(point, sched.horizon, false);
    const int chains = 20000;
    int hits = 0;
    for (int c = 0; c < chains; ++c) {
      Rng rng = Rng::for_chain(29, static_cast<std::uint64_t>(c));
      hits += matu_run(point, exact, sched, rng).final == truth;
    }
    // Early stopping alone leaves ~1 - e^{-eps} of chains unfinished, so
    // the guaranteed rate is 1 - 2 eps; observe it with margin.
    CHECK(static_cast<double>(hits) / chains >= 1.0 - 2.0 * eps);

    // Shrinking delta pushes the recovery rate toward one.
    SamplerSchedule tight = sched;
    tight.early_stop = 0.002;
    const double segments = std::ceil((tight.horizon - tight.early_stop) / tight.segment - 1e-9);
    tight.horizon = tight.early_stop + segments * tight.segment;
    const ExactScoreModel exact_tight(point, tight.horizon, false);
    hits = 0;
    for (int c = 0; c < chains; ++c) {
      Rng rng = Rng::for_chain(31, static_cast<std::uint64_t>(c));
      hits += matu_run(point, exact_tight, tight, rng).final == truth;
    }
    CHECK(static_cast<double>(hits) / chains >= 0.99);
  }

  SUBCASE("per-segment draws are Poisson with the prescribed mean") {
    // Single segment: the anchor is the all-mask state for every chain,
    // so draws are iid Poisson(beta * span).
    SamplerSchedule sched = default_schedule(0.5, spec);
    sched.segment = sched.span();
    const ExactScoreModel exact(q0, sched.horizon, false);
    const int chains = 10000;
    double sum = 0.0, sum_sq = 0.0;
    for (int c = 0; c < chains; ++c) {
      Rng rng = Rng::for_chain(37, static_cast<std::uint64_t>(c));
      const RunReport report = matu_run(q0, exact, sched, rng);
      REQUIRE(report.per_segment_draws.size() == 1);
      const double n = static_cast<double>(report.per_segment_draws[0]);
      sum += n;
      sum_sq += n * n;
      CHECK(report.events <= static_cast<std::uint64_t>(report.per_segment_draws[0]));
    }
    const double mean = sum / chains;
    const double variance = sum_sq / chains - mean * mean;
    const double expected =
        beta_bound(spec, sched.horizon, sched.span(), Sequence{3, 3, 3}) * sched.span();
    CHECK(mean == doctest::Approx(expected).epsilon(0.03));
    CHECK(variance / mean >= 0.95);
    CHECK(variance / mean <= 1.05);
  }

  SUBCASE("spaces above the dense cap run through sampling-only paths") {
    // 2^30 states: exact enumeration is refused, but the sparse-support
    // oracle and the event-driven sampler never need it.
    const SpaceSpec big(30, 2);
    REQUIRE_FALSE(big.dense_allowed());
    const Sequence truth(30, 1);
    const auto point = point_mass(big, truth);
    CHECK_THROWS_AS(marginal_at(point, 1.0), DenseCapError);

    SamplerSchedule sched = default_schedule(0.3, big);
    const ExactScoreModel exact(point, sched.horizon, true);  // cache auto-disabled
    const int chains = 50;
    int hits = 0;
    for (int c = 0; c < chains; ++c) {
      Rng rng = Rng::for_chain(43, static_cast<std::uint64_t>(c));
      hits += matu_run(point, exact, sched, rng).final == truth;
    }
    CHECK(hits >= chains / 2);  // early stopping leaves ~1 - e^{-eps} unfinished
  }

  SUBCASE("runs are deterministic given the seed") {
    SamplerSchedule sched = default_schedule(0.3, spec);
    const ExactScoreModel exact(q0, sched.horizon, false);
    Rng rng_a(404), rng_b(404);
    CHECK(reports_equal(matu_run(q0, exact, sched, rng_a), matu_run(q0, exact, sched, rng_b)));

    const ExactScoreModel cached(q0, sched.horizon, true);
    Rng rng_c(505), rng_d(505);
    CHECK(reports_equal(euler_sequential_run(q0, cached, sched, rng_c),
                        euler_sequential_run(q0, cached, sched, rng_d)));
  }
}
