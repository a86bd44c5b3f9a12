#include "maskdiff/reverse_dynamics.hpp"

#include <cmath>

namespace maskdiff {

double beta_bound(const SpaceSpec& spec, double horizon, double t_ref, const Sequence& y) {
  if (t_ref >= horizon) throw DomainError("beta_bound: t_ref must be below the horizon");
  const double remaining = horizon - t_ref;
  return num_mask(spec, y) * static_cast<double>(spec.vocab()) / std::expm1(remaining);
}

double ReverseRateView::rate(double t, const Sequence& to, const Sequence& from) const {
  const SpaceSpec& space = spec();
  space.require_member(to, "reverse_rate");
  space.require_member(from, "reverse_rate");
  // Structurally zero unless `to` unmasks exactly one coordinate: the
  // forward rate from `to` back to `from` vanishes otherwise.
  if (hamming(to, from) != 1) return 0.0;
  for (std::size_t i = 0; i < to.size(); ++i) {
    if (to[i] != from[i]) {
      if (from[i] != space.mask_token() || to[i] == space.mask_token()) return 0.0;
      break;
    }
  }
  return oracle_->score(t, from, to);
}

double ReverseRateView::outgoing(double t, const Sequence& from) const {
  std::vector<double> row;
  return rate_row(t, from, row);
}

double ReverseRateView::rate_row(double t, const Sequence& from, std::vector<double>& row) const {
  oracle_->score_row(t, from, row);
  double total = 0.0;
  for (double r : row) total += r;
  return total;
}

TruncationContext make_truncation_context(const SpaceSpec& spec, double horizon,
                                          double t_end, const Sequence& anchor) {
  TruncationContext ctx;
  ctx.anchor = anchor;
  ctx.t_end = t_end;
  ctx.beta = beta_bound(spec, horizon, t_end, anchor);
  return ctx;
}

double truncated_rate(const TruncationContext& ctx, const ReverseRateView& view, double t,
                      const Sequence& to, const Sequence& from) {
  const double raw = view.rate(t, to, from);
  if (raw == 0.0) return 0.0;
  const double total = view.outgoing(t, from);
  if (total <= ctx.beta) return raw;
  return raw * ctx.beta / total;
}

TruncatedRow truncated_row(const TruncationContext& ctx, const ReverseRateView& view,
                           double t, const Sequence& from, std::vector<double>& row) {
  TruncatedRow result;
  result.outgoing_raw = view.rate_row(t, from, row);
  result.scale = result.outgoing_raw > ctx.beta ? ctx.beta / result.outgoing_raw : 1.0;
  return result;
}

}  // namespace maskdiff
