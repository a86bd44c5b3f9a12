#include "maskdiff/analysis.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "maskdiff/forward_process.hpp"

namespace maskdiff {

namespace {

void require_same_spec(const DenseDistribution& p, const DenseDistribution& q,
                       const char* where) {
  if (!(p.spec() == q.spec())) {
    throw DomainError(std::string(where) + ": distributions live on different spaces");
  }
}

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", x);
  return buf;
}

}  // namespace

double tv_distance(const DenseDistribution& p, const DenseDistribution& q) {
  require_same_spec(p, q, "tv_distance");
  double l1 = 0.0;
  for (StateIndex i = 0; i < p.spec().num_states(); ++i) {
    l1 += std::abs(p.prob(i) - q.prob(i));
  }
  return 0.5 * l1;
}

double kl_divergence(const DenseDistribution& p, const DenseDistribution& q) {
  require_same_spec(p, q, "kl_divergence");
  double kl = 0.0;
  for (StateIndex i = 0; i < p.spec().num_states(); ++i) {
    const double pi = p.prob(i);
    if (pi <= 0.0) continue;
    const double qi = q.prob(i);
    if (qi <= 0.0) {
      throw AbsoluteContinuityError("kl_divergence: p has mass where q vanishes, state " +
                                    to_string(decode(p.spec(), i)));
    }
    kl += pi * std::log(pi / qi);
  }
  return kl;
}

DenseDistribution empirical_distribution(std::span<const Sequence> samples,
                                         const SpaceSpec& spec) {
  if (samples.empty()) throw DomainError("empirical_distribution: empty sample list");
  spec.require_dense("empirical_distribution");
  std::vector<double> counts(spec.num_states(), 0.0);
  for (const Sequence& y : samples) {
    counts[encode(spec, y)] += 1.0;
  }
  for (double& c : counts) c /= static_cast<double>(samples.size());
  return DenseDistribution(spec, std::move(counts));
}

std::string ResultRow::csv() const {
  std::ostringstream out;
  out << sampler << ',' << d << ',' << k << ',' << format_double(eps) << ',' << chains << ','
      << format_double(tv) << ',' << format_double(kl_init) << ',' << format_double(mean_calls)
      << ',' << format_double(bound_calls) << ',' << format_double(seconds) << ',' << seed;
  return out.str();
}

SamplerSchedule resolve_schedule(const ExperimentConfig& cfg, const SpaceSpec& spec) {
  SamplerSchedule sched = default_schedule(cfg.epsilon, spec);
  sched.seed = cfg.seed;
  if (cfg.early_stop) sched.early_stop = *cfg.early_stop;
  if (cfg.segment) sched.segment = *cfg.segment;
  if (cfg.euler_step) sched.euler_step = *cfg.euler_step;
  if (cfg.horizon) {
    sched.horizon = *cfg.horizon;
  } else {
    // Re-stretch so the segment grid tiles the span exactly.
    const double segments = std::ceil((sched.horizon - sched.early_stop) / sched.segment - 1e-9);
    sched.horizon = sched.early_stop + segments * sched.segment;
  }
  if (!(sched.early_stop > 0.0) || !(sched.early_stop < sched.horizon)) {
    throw ConfigError("resolve_schedule: need 0 < delta < T after overrides");
  }
  const double span = sched.horizon - sched.early_stop;
  {
    const double ratio = span / sched.segment;
    if (std::abs(ratio - std::round(ratio)) > 1e-9 * std::max(1.0, ratio)) {
      throw ConfigError("resolve_schedule: eta does not divide T - delta (adjust --T/--eta)");
    }
  }
  // The Euler step is shrunk (never grown) to the nearest exact divisor.
  const long n = static_cast<long>(std::ceil(span / sched.euler_step - 1e-9));
  sched.euler_step = span / static_cast<double>(n);
  sched.validate();
  return sched;
}

std::vector<RunReport> run_chains(int chains, std::uint64_t seed, int threads,
                                  const std::function<RunReport(int, Rng&)>& body) {
  if (chains < 1) throw ConfigError("run_chains: need at least one chain");
  if (threads <= 0) {
    threads = static_cast<int>(std::thread::hardware_concurrency());
    if (threads < 1) threads = 1;
  }
  threads = std::min(threads, chains);
  std::vector<RunReport> reports(static_cast<std::size_t>(chains));
  std::vector<std::exception_ptr> failures(static_cast<std::size_t>(threads));
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(threads));
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&, t]() {
      try {
        for (int c = t; c < chains; c += threads) {
          Rng rng = Rng::for_chain(seed, static_cast<std::uint64_t>(c));
          reports[static_cast<std::size_t>(c)] = body(c, rng);
        }
      } catch (...) {
        failures[static_cast<std::size_t>(t)] = std::current_exception();
      }
    });
  }
  for (auto& worker : pool) worker.join();
  for (auto& failure : failures) {
    if (failure) std::rethrow_exception(failure);
  }
  return reports;
}

namespace {

RunReport dispatch(const std::string& sampler, const SparseDistribution& target,
                   const ScoreModel& model, const SamplerSchedule& sched, Rng& rng) {
  if (sampler == "euler_seq") return euler_sequential_run(target, model, sched, rng);
  if (sampler == "euler_par") return euler_parallel_run(target, model, sched, rng);
  if (sampler == "matu") return matu_run(target, model, sched, rng);
  if (sampler == "unif") {
    const int segments = sched.num_segments();
    std::vector<double> grid(static_cast<std::size_t>(segments) + 1, 0.0);
    for (int w = 1; w <= segments; ++w) {
      grid[static_cast<std::size_t>(w)] = (w == segments) ? sched.span() : w * sched.segment;
    }
    const SpaceSpec& space = target.spec();
    const double d = space.length();
    const double k = space.vocab();
    const double horizon = sched.horizon;
    auto beta_fn = [&grid, d, k, horizon](int w) {
      return d * k / std::expm1(horizon - grid[static_cast<std::size_t>(w)]);
    };
    return uniformization_run(target, model, sched.horizon, sched.early_stop, grid, beta_fn,
                              rng);
  }
  throw ConfigError("unknown sampler id: " + sampler +
                    " (expected euler_seq | euler_par | unif | matu)");
}

nlohmann::json config_to_json(const ExperimentConfig& cfg) {
  nlohmann::json j;
  j["target"] = cfg.target_path;
  j["sampler"] = cfg.sampler;
  j["eps"] = cfg.epsilon;
  j["chains"] = cfg.chains;
  j["seed"] = cfg.seed;
  j["sigma"] = cfg.sigma;
  if (cfg.horizon) j["T"] = *cfg.horizon;
  if (cfg.early_stop) j["delta"] = *cfg.early_stop;
  if (cfg.euler_step) j["h"] = *cfg.euler_step;
  if (cfg.segment) j["eta"] = *cfg.segment;
  return j;
}

ExperimentConfig config_from_json(const nlohmann::json& j) {
  ExperimentConfig cfg;
  cfg.target_path = j.at("target").get<std::string>();
  cfg.sampler = j.at("sampler").get<std::string>();
  cfg.epsilon = j.at("eps").get<double>();
  cfg.chains = j.at("chains").get<int>();
  cfg.seed = j.at("seed").get<std::uint64_t>();
  cfg.sigma = j.value("sigma", 0.0);
  if (j.contains("T")) cfg.horizon = j["T"].get<double>();
  if (j.contains("delta")) cfg.early_stop = j["delta"].get<double>();
  if (j.contains("h")) cfg.euler_step = j["h"].get<double>();
  if (j.contains("eta")) cfg.segment = j["eta"].get<double>();
  return cfg;
}

// Appends a row, creating the header for a fresh file, and returns the
// 0-based index of the appended data row.  Emission is single-writer:
// call after all chains have been reduced.
std::size_t append_csv(const std::string& path, const ResultRow& row) {
  std::size_t existing_rows = 0;
  bool fresh = true;
  if (std::filesystem::exists(path) && std::filesystem::file_size(path) > 0) {
    fresh = false;
    std::ifstream in(path);
    std::string line;
    while (std::getline(in, line)) ++existing_rows;
    if (existing_rows > 0) --existing_rows;  // header
  }
  std::ofstream out(path, std::ios::app);
  if (!out) throw ConfigError("cannot open CSV for append: " + path);
  if (fresh) out << kCsvHeader << '\n';
  out << row.csv() << '\n';
  return existing_rows;
}

std::string sidecar_path_for(const std::string& csv_path, std::size_t row_index) {
  std::ostringstream name;
  name << csv_path << ".row" << row_index << ".json";
  return name.str();
}

}  // namespace

ResultRow run_experiment(const ExperimentConfig& cfg, const SparseDistribution& target) {
  if (cfg.chains < 1) throw ConfigError("run_experiment: chain count must be >= 1");
  if (!(cfg.epsilon > 0.0) || !(cfg.epsilon < 1.0)) {
    throw ConfigError("run_experiment: epsilon must lie in (0, 1)");
  }
  if (cfg.sigma < 0.0) throw ConfigError("run_experiment: sigma must be >= 0");
  target.require_mask_free("run_experiment");

  const SpaceSpec& space = target.spec();
  const SamplerSchedule sched = resolve_schedule(cfg, space);

  // Event-driven samplers touch fresh random times; caching dense
  // marginals per time would only grow memory there.
  const bool fixed_time_grid = cfg.sampler == "euler_seq" || cfg.sampler == "euler_par";
  auto exact = std::make_shared<ExactScoreModel>(target, sched.horizon, fixed_time_grid);
  std::shared_ptr<const ScoreModel> model = exact;
  if (cfg.sigma > 0.0) {
    model = std::make_shared<PerturbedScoreModel>(exact,
                                                  PerturbationSpec{cfg.sigma, cfg.seed});
  }

  const auto start = std::chrono::steady_clock::now();
  const std::vector<RunReport> reports =
      run_chains(cfg.chains, cfg.seed, cfg.threads, [&](int, Rng& rng) {
        return dispatch(cfg.sampler, target, *model, sched, rng);
      });
  const auto stop = std::chrono::steady_clock::now();

  std::vector<Sequence> finals;
  finals.reserve(reports.size());
  double total_calls = 0.0;
  for (const RunReport& report : reports) {
    finals.push_back(report.final);
    total_calls += static_cast<double>(report.score_calls);
  }

  ResultRow row;
  row.sampler = cfg.sampler;
  row.d = space.length();
  row.k = space.vocab();
  row.eps = cfg.epsilon;
  row.chains = cfg.chains;
  row.tv = tv_distance(empirical_distribution(finals, space), target.densify());
  row.kl_init = kl_init_gap(target, sched.horizon).kl;
  row.mean_calls = total_calls / static_cast<double>(cfg.chains);
  row.bound_calls = score_call_bound(space, cfg.epsilon);
  row.seconds = std::chrono::duration<double>(stop - start).count();
  row.seed = cfg.seed;

  if (!cfg.out_csv.empty()) {
    const std::size_t row_index = append_csv(cfg.out_csv, row);
    nlohmann::json sidecar;
    sidecar["config"] = config_to_json(cfg);
    sidecar["schedule"] = {{"T", sched.horizon},
                           {"delta", sched.early_stop},
                           {"eta", sched.segment},
                           {"h", sched.euler_step},
                           {"W", sched.num_segments()},
                           {"n", sched.num_euler_steps()}};
    sidecar["row"] = row.csv();
    std::ofstream side(sidecar_path_for(cfg.out_csv, row_index));
    if (!side) throw ConfigError("cannot write sidecar next to " + cfg.out_csv);
    side << sidecar.dump(2) << '\n';
  }
  return row;
}

ResultRow run_experiment(const ExperimentConfig& cfg) {
  return run_experiment(cfg, load_target(cfg.target_path));
}

namespace {

ExperimentConfig sidecar_config(const std::string& sidecar_path) {
  std::ifstream in(sidecar_path);
  if (!in) throw ConfigError("cannot open sidecar: " + sidecar_path);
  nlohmann::json doc;
  in >> doc;
  ExperimentConfig cfg = config_from_json(doc.at("config"));
  cfg.out_csv.clear();  // replay recomputes, never re-appends
  return cfg;
}

}  // namespace

ResultRow replay_sidecar(const std::string& sidecar_path) {
  const ExperimentConfig cfg = sidecar_config(sidecar_path);
  return run_experiment(cfg, load_target(cfg.target_path));
}

ResultRow replay_sidecar(const std::string& sidecar_path, const SparseDistribution& target) {
  return run_experiment(sidecar_config(sidecar_path), target);
}

}  // namespace maskdiff
