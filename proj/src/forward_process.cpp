#include "maskdiff/forward_process.hpp"

#include <cmath>

namespace maskdiff {

namespace {

// e^{-elapsed} with the long-horizon clamp: beyond 700 time units the
// survival weight underflows anyway, so it is pinned to exactly 0.
double survival_weight(double elapsed) {
  return elapsed > 700.0 ? 0.0 : std::exp(-elapsed);
}

}  // namespace

double rate_forward(const SpaceSpec& spec, const Sequence& y, const Sequence& yprev) {
  spec.require_member(y, "rate_forward");
  spec.require_member(yprev, "rate_forward");
  if (y == yprev) return -static_cast<double>(spec.length() - num_mask(spec, y));
  if (hamming(y, yprev) != 1) return 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] != yprev[i]) return y[i] == spec.mask_token() ? 1.0 : 0.0;
  }
  return 0.0;  // unreachable
}

double kernel_prob(const SpaceSpec& spec, const Sequence& y, const Sequence& y0,
                   double elapsed) {
  spec.require_member(y, "kernel_prob");
  spec.require_member(y0, "kernel_prob");
  if (elapsed < 0.0) throw DomainError("kernel_prob: negative elapsed time");
  const Token mask = spec.mask_token();
  const double keep = survival_weight(elapsed);
  double prob = 1.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y0[i] == mask) {
      if (y[i] != mask) return 0.0;  // masked coordinates never unmask
    } else if (y[i] == y0[i]) {
      prob *= keep;
    } else if (y[i] == mask) {
      prob *= 1.0 - keep;
    } else {
      return 0.0;  // a non-mask token never changes into another token
    }
  }
  return prob;
}

Sequence sample_forward(const SpaceSpec& spec, const Sequence& y0, double elapsed,
                        Rng& rng) {
  spec.require_member(y0, "sample_forward");
  if (elapsed < 0.0) throw DomainError("sample_forward: negative elapsed time");
  const double mask_prob = 1.0 - survival_weight(elapsed);
  const Token mask = spec.mask_token();
  Sequence y = y0;
  for (Token& t : y) {
    if (t != mask && rng.uniform() < mask_prob) t = mask;
  }
  return y;
}

double forward_prob(const SparseDistribution& q0, double t, const Sequence& y) {
  double prob = 0.0;
  for (const auto& entry : q0.support()) {
    prob += entry.prob * kernel_prob(q0.spec(), y, entry.point, t);
  }
  return prob;
}

DenseDistribution marginal_at(const SparseDistribution& q0, double t) {
  const SpaceSpec& spec = q0.spec();
  spec.require_dense("marginal_at");
  q0.require_mask_free("marginal_at");
  std::vector<double> probs(spec.num_states());
  for (StateIndex i = 0; i < spec.num_states(); ++i) {
    probs[i] = forward_prob(q0, t, decode(spec, i));
  }
  return DenseDistribution(spec, std::move(probs));
}

double tilde_prob(const SpaceSpec& spec, double t, const Sequence& y) {
  spec.require_member(y, "tilde_prob");
  if (t <= 0.0) throw DomainError("tilde_prob: t must be positive");
  const double decay = std::exp(-t);
  const double mask_prob = 1.0 / (1.0 + decay);
  const double token_prob = decay / ((1.0 + decay) * (spec.vocab() - 1));
  const int masks = num_mask(spec, y);
  return std::pow(mask_prob, masks) * std::pow(token_prob, spec.length() - masks);
}

DenseDistribution tilde_init(const SpaceSpec& spec, double t) {
  spec.require_dense("tilde_init");
  if (t <= 0.0) throw DomainError("tilde_init: t must be positive");
  std::vector<double> probs(spec.num_states());
  for (StateIndex i = 0; i < spec.num_states(); ++i) {
    probs[i] = tilde_prob(spec, t, decode(spec, i));
  }
  return DenseDistribution(spec, std::move(probs));
}

Sequence tilde_sample(const SpaceSpec& spec, double t, Rng& rng) {
  if (t <= 0.0) throw DomainError("tilde_sample: t must be positive");
  const double decay = std::exp(-t);
  const double mask_prob = 1.0 / (1.0 + decay);
  Sequence y(static_cast<std::size_t>(spec.length()));
  for (Token& token : y) {
    if (rng.uniform() < mask_prob) {
      token = spec.mask_token();
    } else {
      token = 1 + static_cast<Token>(rng.uniform() * (spec.vocab() - 1));
      if (token >= spec.vocab()) token = spec.vocab() - 1;
    }
  }
  return y;
}

double tilde_normalizer(const SpaceSpec& spec, double t) {
  if (t <= 0.0) throw DomainError("tilde_normalizer: t must be positive");
  return std::pow(1.0 + std::exp(-t), spec.length());
}

KlInitGap kl_init_gap(const SparseDistribution& q0, double t) {
  const SpaceSpec& spec = q0.spec();
  const DenseDistribution forward = marginal_at(q0, t);
  const DenseDistribution tilde = tilde_init(spec, t);
  double kl = 0.0;
  for (StateIndex i = 0; i < spec.num_states(); ++i) {
    const double p = forward.prob(i);
    if (p > 0.0) kl += p * std::log(p / tilde.prob(i));
  }
  KlInitGap gap;
  gap.kl = kl;
  gap.bound = std::pow(1.0 + std::exp(-t), spec.length()) - 1.0;
  return gap;
}

double BinomialLaw::pmf(int k) const {
  if (k < 0 || k > trials) return 0.0;
  double log_choose = 0.0;
  for (int j = 1; j <= k; ++j) {
    log_choose += std::log(static_cast<double>(trials - k + j)) - std::log(static_cast<double>(j));
  }
  if (success <= 0.0) return k == 0 ? 1.0 : 0.0;
  if (success >= 1.0) return k == trials ? 1.0 : 0.0;
  return std::exp(log_choose + k * std::log(success) +
                  (trials - k) * std::log1p(-success));
}

BinomialLaw mask_count_law(const SpaceSpec& spec, double t) {
  if (t < 0.0) throw DomainError("mask_count_law: negative t");
  BinomialLaw law;
  law.trials = spec.length();
  law.success = 1.0 - survival_weight(t);
  return law;
}

}  // namespace maskdiff
