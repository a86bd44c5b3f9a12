#include "maskdiff/score_engine.hpp"

#include <cmath>
#include <sstream>

namespace maskdiff {

namespace {

std::int64_t time_key(double u) {
  // 12-decimal rounding: distinct uniformization event times collapse
  // onto one cache entry only when they agree to 1e-12.
  return static_cast<std::int64_t>(std::llround(u * 1e12));
}

std::int64_t perturbation_bucket(double t) {
  return static_cast<std::int64_t>(std::llround(t * 1e6));
}

}  // namespace

double bregman_phi(double u, double v) {
  if (v <= 0.0) throw DomainError("bregman_phi: second argument must be positive");
  if (u < 0.0) throw DomainError("bregman_phi: first argument must be nonnegative");
  if (u == 0.0) return v;
  return u * std::log(u / v) - u + v;
}

void ScoreModel::score_row(double t, const Sequence& y, std::vector<double>& row) const {
  const SpaceSpec& space = spec();
  const std::vector<int> masked = masked_positions(space, y);
  row.assign(masked.size() * static_cast<std::size_t>(space.vocab() - 1), 0.0);
  Sequence neighbor = y;
  std::size_t j = 0;
  for (int pos : masked) {
    for (Token k = 1; k < space.vocab(); ++k) {
      neighbor[static_cast<std::size_t>(pos)] = k;
      row[j++] = score(t, y, neighbor);
    }
    neighbor[static_cast<std::size_t>(pos)] = space.mask_token();
  }
}

ExactScoreModel::ExactScoreModel(SparseDistribution target, double horizon,
                                 bool cache_marginals)
    : target_(std::move(target)), horizon_(horizon), cache_marginals_(cache_marginals) {
  if (horizon_ <= 0.0) throw DomainError("ExactScoreModel: horizon must be positive");
  target_.require_mask_free("ExactScoreModel");
  if (!target_.spec().dense_allowed()) cache_marginals_ = false;
}

void ExactScoreModel::check_time(double t) const {
  if (t < 0.0 || t >= horizon_) {
    std::ostringstream msg;
    msg << "ExactScoreModel: reverse time " << t << " outside [0, " << horizon_ << ")";
    throw DomainError(msg.str());
  }
}

const std::vector<double>* ExactScoreModel::cached_marginal(double u) const {
  if (!cache_marginals_) return nullptr;
  const std::int64_t key = time_key(u);
  std::lock_guard<std::mutex> lock(cache_mutex_);
  auto it = cache_.find(key);
  if (it == cache_.end()) {
    const SpaceSpec& space = target_.spec();
    auto dense = std::make_unique<std::vector<double>>(space.num_states());
    for (StateIndex i = 0; i < space.num_states(); ++i) {
      (*dense)[i] = forward_prob(target_, u, decode(space, i));
    }
    it = cache_.emplace(key, std::move(dense)).first;
  }
  return it->second.get();
}

double ExactScoreModel::marginal_prob(double u, const Sequence& y) const {
  if (const std::vector<double>* dense = cached_marginal(u)) {
    return (*dense)[encode(target_.spec(), y)];
  }
  return forward_prob(target_, u, y);
}

double ExactScoreModel::score(double t, const Sequence& y, const Sequence& y2) const {
  check_time(t);
  const double u = horizon_ - t;
  const double denom = marginal_prob(u, y);
  if (denom <= 0.0) {
    throw ZeroProbabilityError("ExactScoreModel: conditioning state " + to_string(y) +
                               " has zero forward probability");
  }
  return marginal_prob(u, y2) / denom;
}

void ExactScoreModel::score_row(double t, const Sequence& y, std::vector<double>& row) const {
  check_time(t);
  const SpaceSpec& space = spec();
  const double u = horizon_ - t;
  const std::vector<double>* dense = cached_marginal(u);
  const double denom = dense ? (*dense)[encode(space, y)] : forward_prob(target_, u, y);
  if (denom <= 0.0) {
    throw ZeroProbabilityError("ExactScoreModel: conditioning state " + to_string(y) +
                               " has zero forward probability");
  }
  const std::vector<int> masked = masked_positions(space, y);
  row.assign(masked.size() * static_cast<std::size_t>(space.vocab() - 1), 0.0);
  Sequence neighbor = y;
  std::size_t j = 0;
  for (int pos : masked) {
    for (Token k = 1; k < space.vocab(); ++k) {
      neighbor[static_cast<std::size_t>(pos)] = k;
      const double numer =
          dense ? (*dense)[encode(space, neighbor)] : forward_prob(target_, u, neighbor);
      row[j++] = numer / denom;
    }
    neighbor[static_cast<std::size_t>(pos)] = space.mask_token();
  }
}

PerturbedScoreModel::PerturbedScoreModel(std::shared_ptr<const ScoreModel> base,
                                         PerturbationSpec spec)
    : base_(std::move(base)), perturbation_(spec) {
  if (perturbation_.sigma < 0.0) {
    throw DomainError("PerturbedScoreModel: sigma must be nonnegative");
  }
}

double PerturbedScoreModel::score(double t, const Sequence& y, const Sequence& y2) const {
  const double base = base_->score(t, y, y2);
  if (perturbation_.sigma == 0.0) return base;
  const SpaceSpec& space = base_->spec();
  const double g = keyed_normal(static_cast<std::uint64_t>(perturbation_bucket(t)),
                                encode(space, y), encode(space, y2), perturbation_.seed);
  return base * std::exp(perturbation_.sigma * g);
}

namespace {

// Inner expectation of the score-entropy losses at one reverse time: the
// state follows the reverse marginal at t_state while the estimator is
// read at t_model.
double loss_integrand(const ExactScoreModel& exact, const ScoreModel& estimator,
                      double t_state, double t_model) {
  const SpaceSpec& space = exact.spec();
  const double u = exact.horizon() - t_state;
  double total = 0.0;
  Sequence neighbor;
  for (StateIndex i = 0; i < space.num_states(); ++i) {
    const Sequence y = decode(space, i);
    const double weight = exact.marginal_prob(u, y);
    if (weight <= 0.0) continue;
    neighbor = y;
    for (int pos : masked_positions(space, y)) {
      for (Token k = 1; k < space.vocab(); ++k) {
        neighbor[static_cast<std::size_t>(pos)] = k;
        const double v_true = exact.marginal_prob(u, neighbor) / weight;
        const double v_est = estimator.score(t_model, y, neighbor);
        // D_phi(0 || 0) = 0 in the limit: moves toward unreachable
        // states carry no reverse rate and no divergence.
        if (v_true != 0.0 || v_est != 0.0) {
          total += weight * bregman_phi(v_true, v_est);
        }
      }
      neighbor[static_cast<std::size_t>(pos)] = space.mask_token();
    }
  }
  return total;
}

double trapezoid(const std::vector<double>& xs, const std::vector<double>& ys) {
  double area = 0.0;
  for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
    area += 0.5 * (ys[i] + ys[i + 1]) * (xs[i + 1] - xs[i]);
  }
  return area;
}

}  // namespace

std::vector<double> uniform_grid(double lo, double hi, int points) {
  if (points < 2 || hi <= lo) throw DomainError("uniform_grid: need points >= 2 and hi > lo");
  std::vector<double> grid(static_cast<std::size_t>(points));
  for (int i = 0; i < points; ++i) {
    grid[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (points - 1);
  }
  return grid;
}

double score_entropy_loss(const SparseDistribution& q0, double horizon,
                          const ScoreModel& estimator, const std::vector<double>& grid) {
  if (grid.size() < 2) throw DomainError("score_entropy_loss: grid needs at least 2 points");
  for (double t : grid) {
    if (t < 0.0 || t > horizon) throw DomainError("score_entropy_loss: grid point outside [0, T]");
  }
  q0.spec().require_dense("score_entropy_loss");
  const ExactScoreModel exact(q0, horizon);
  std::vector<double> values(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    // The estimator contract excludes t = T; the integrand there weights
    // only mask-free states, whose neighbor sum is empty.
    values[i] = grid[i] >= horizon ? loss_integrand(exact, exact, grid[i], 0.0)
                                   : loss_integrand(exact, estimator, grid[i], grid[i]);
  }
  return trapezoid(grid, values) / horizon;
}

double dis_score_entropy_loss(const SparseDistribution& q0, double horizon,
                              double early_stop, double step, const ScoreModel& estimator,
                              int points_per_segment) {
  if (early_stop < 0.0 || early_stop >= horizon) {
    throw DomainError("dis_score_entropy_loss: need 0 <= delta < T");
  }
  if (points_per_segment < 2) {
    throw DomainError("dis_score_entropy_loss: need at least 2 points per segment");
  }
  const double span = horizon - early_stop;
  const double steps = span / step;
  const long n = std::lround(steps);
  if (n < 1 || std::abs(steps - static_cast<double>(n)) > 1e-9) {
    throw ConfigError("dis_score_entropy_loss: (T - delta) is not an integer multiple of h");
  }
  q0.spec().require_dense("dis_score_entropy_loss");
  const ExactScoreModel exact(q0, horizon);
  double total = 0.0;
  for (long k = 0; k < n; ++k) {
    const double lo = k * step;
    const double hi = (k == n - 1) ? span : (k + 1) * step;
    const std::vector<double> nodes = uniform_grid(lo, hi, points_per_segment);
    std::vector<double> values(nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      values[i] = loss_integrand(exact, estimator, nodes[i], lo);
    }
    total += trapezoid(nodes, values);
  }
  return total / span;
}

}  // namespace maskdiff
