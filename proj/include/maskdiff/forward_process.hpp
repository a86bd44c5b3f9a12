#ifndef MASKDIFF_FORWARD_PROCESS_HPP
#define MASKDIFF_FORWARD_PROCESS_HPP

#include "maskdiff/rng.hpp"
#include "maskdiff/state_space.hpp"

namespace maskdiff {

// Absorbing forward transition rate: the instantaneous rate of moving
// from yprev to y.  Off-diagonal entries are 1 exactly for single
// masking moves; the diagonal is -(d - numK), the value forced by rate
// conservation (and by the Kronecker decomposition of the rate matrix,
// whose per-coordinate factor has diagonal -1 on non-mask tokens).
double rate_forward(const SpaceSpec& spec, const Sequence& y, const Sequence& yprev);

// Closed-form transition kernel over `elapsed` time units: each
// non-masked coordinate independently survives with weight e^{-elapsed}
// or becomes masked with weight 1 - e^{-elapsed}; masked coordinates
// stay masked.  Throws on negative elapsed.
double kernel_prob(const SpaceSpec& spec, const Sequence& y, const Sequence& y0,
                   double elapsed);

// Exact draw from kernel_prob(. | y0, elapsed).
Sequence sample_forward(const SpaceSpec& spec, const Sequence& y0, double elapsed,
                        Rng& rng);

// Forward marginal mass q_t(y) for a sparse initial distribution,
// summed in closed form over the support.  No dense allocation.
double forward_prob(const SparseDistribution& q0, double t, const Sequence& y);

// Dense forward marginal at time t.  Requires a mask-free q0 and the
// dense cap; every entry is forward_prob(q0, t, y).
DenseDistribution marginal_at(const SparseDistribution& q0, double t);

// Factorized approximation of the forward marginal used to initialize
// reverse samplers: per coordinate, mask with probability 1/(1+e^{-t}),
// otherwise uniform over the K-1 non-mask tokens.  The induced mask-count
// law is Binomial(d, 1/(1+e^{-t})) with level normalizer (1+e^{-t})^d.
DenseDistribution tilde_init(const SpaceSpec& spec, double t);
Sequence tilde_sample(const SpaceSpec& spec, double t, Rng& rng);
double tilde_prob(const SpaceSpec& spec, double t, const Sequence& y);
double tilde_normalizer(const SpaceSpec& spec, double t);  // (1+e^{-t})^d

// KL(q_t || tilde_q_t) together with the (1+e^{-t})^d - 1 bound it is
// measured against.
struct KlInitGap {
  double kl;
  double bound;
};
KlInitGap kl_init_gap(const SparseDistribution& q0, double t);

// Law of the mask count under a mask-free initial distribution:
// Binomial(d, 1 - e^{-t}).
struct BinomialLaw {
  int trials;
  double success;
  double mean() const { return trials * success; }
  double pmf(int k) const;
};
BinomialLaw mask_count_law(const SpaceSpec& spec, double t);

}  // namespace maskdiff

#endif  // MASKDIFF_FORWARD_PROCESS_HPP
