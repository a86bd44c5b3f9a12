#ifndef MASKDIFF_REVERSE_DYNAMICS_HPP
#define MASKDIFF_REVERSE_DYNAMICS_HPP

#include <vector>

#include "maskdiff/score_engine.hpp"

namespace maskdiff {

// Dominating rate numK(y) * K / (e^{T - t_ref} - 1) for the reverse
// outgoing rate at any time up to t_ref from any state reachable from y
// by unmasking.  Requires t_ref < T.
double beta_bound(const SpaceSpec& spec, double horizon, double t_ref, const Sequence& y);

// Reverse transition rates derived from a score oracle:
// rate(t, to, from) = R_forward(from, to) * v_t,from(to), nonzero only
// when `to` unmasks exactly one coordinate of `from`.
class ReverseRateView {
 public:
  ReverseRateView(ScoreOracle& oracle, double horizon)
      : oracle_(&oracle), horizon_(horizon) {}

  const SpaceSpec& spec() const { return oracle_->model().spec(); }
  double horizon() const { return horizon_; }
  ScoreOracle& oracle() const { return *oracle_; }

  double rate(double t, const Sequence& to, const Sequence& from) const;

  // Total rate out of `from`; enumerates only the numK * (K-1) legal moves.
  double outgoing(double t, const Sequence& from) const;

  // Fills `row` with rates toward every unmask move (same layout as
  // ScoreModel rows) and returns their sum.  One oracle call.
  double rate_row(double t, const Sequence& from, std::vector<double>& row) const;

 private:
  ScoreOracle* oracle_;
  double horizon_;
};

// Per-segment truncation data: the segment-start anchor state, the
// segment's right endpoint, and the dominating rate computed from them.
struct TruncationContext {
  Sequence anchor;
  double t_end;
  double beta;
};

TruncationContext make_truncation_context(const SpaceSpec& spec, double horizon,
                                          double t_end, const Sequence& anchor);

// Mask-aware truncated rate: unchanged while the raw outgoing rate stays
// below ctx.beta, otherwise rescaled by ctx.beta / outgoing so the
// truncated outgoing rate never exceeds ctx.beta.
double truncated_rate(const TruncationContext& ctx, const ReverseRateView& view, double t,
                      const Sequence& to, const Sequence& from);

// Row variant used by samplers: fills raw rates, returns the common
// truncation scale (1 when inactive) and the raw outgoing rate.
struct TruncatedRow {
  double scale;
  double outgoing_raw;
};
TruncatedRow truncated_row(const TruncationContext& ctx, const ReverseRateView& view,
                           double t, const Sequence& from, std::vector<double>& row);

}  // namespace maskdiff

#endif  // MASKDIFF_REVERSE_DYNAMICS_HPP
