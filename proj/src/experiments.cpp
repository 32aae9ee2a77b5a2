#include "tailsim/experiments.hpp"

#include <fmt/format.h>
#include <fmt/ostream.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <map>
#include <mutex>
#include <ostream>
#include <stdexcept>
#include <thread>
#include <tuple>

namespace tailsim {

std::string config_hash(std::string_view canonical) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : canonical) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return fmt::format("{:016x}", h);
}

namespace {

std::uint64_t hash_word(std::string_view canonical) {
  return std::stoull(config_hash(canonical), nullptr, 16);
}

std::string stop_text(const StopCondition& s) {
  switch (s.kind) {
    case StopCondition::Kind::Blocks:
      return fmt::format("blocks:{}", s.value);
    case StopCondition::Kind::Pows:
      return fmt::format("pows:{}", s.value);
    case StopCondition::Kind::Seconds:
      return fmt::format("seconds:{}", s.value);
  }
  return "?";
}

// Shortest round-trip representation keeps CSVs stable and exact.
std::string num(double v) { return fmt::format("{}", v); }

}  // namespace

void parallel_for(std::size_t count, std::size_t workers,
                  const std::function<void(std::size_t)>& fn) {
  workers = std::max<std::size_t>(1, std::min(workers, count));
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> threads;
  threads.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    threads.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
          next = count;
        }
      }
    });
  }
  for (auto& t : threads) t.join();
  if (error) std::rethrow_exception(error);
}

MeanSe mean_se(const std::vector<double>& xs) {
  MeanSe r;
  r.n = xs.size();
  if (xs.empty()) return r;
  double sum = 0;
  for (double x : xs) sum += x;
  r.mean = sum / static_cast<double>(r.n);
  if (r.n > 1) {
    double sq = 0;
    for (double x : xs) sq += (x - r.mean) * (x - r.mean);
    r.se = std::sqrt(sq / static_cast<double>(r.n - 1) / static_cast<double>(r.n));
  }
  return r;
}

// ---------------------------------------------------------------------------

void FairnessConfig::validate() const {
  if (protocol.kind == ProtocolKind::Bk) throw ConfigError("fairness supports bitcoin and tailstorm");
  if (!(weak_share > 0 && weak_share < 1)) throw ConfigError("weak share must lie in (0, 1)");
  if (!(T > 0)) throw ConfigError("T must be positive");
  if (!(delay >= 0)) throw ConfigError("delay must be non-negative");
  if (T / protocol.k < delay) {
    throw ConfigError(fmt::format(
        "expected subblock interval T/k = {:.3g} s is below the network delay of {} s", T / protocol.k,
        delay));
  }
  if (pows_per_observation(protocol.k, T) == 0) throw ConfigError("observation has no PoWs");
  if (budget_pows == 0) throw ConfigError("PoW budget must be positive");
}

std::string FairnessConfig::canonical() const {
  return fmt::format("fairness protocol={} k={} c={} T={} delay={} weak={} budget={}",
                     protocol.name(), protocol.k, num(protocol.c), num(T), num(delay),
                     num(weak_share), budget_pows);
}

std::uint64_t pows_per_observation(std::uint32_t k, double T) {
  return static_cast<std::uint64_t>(std::floor(24.0 * 3600.0 * k / T));
}

std::vector<FairnessObservation> run_fairness(const FairnessConfig& cfg, std::size_t workers) {
  cfg.validate();
  const std::uint64_t per = pows_per_observation(cfg.protocol.k, cfg.T);
  const std::size_t count = std::max<std::uint64_t>(1, cfg.budget_pows / per);
  const std::uint64_t word = hash_word(cfg.canonical());
  std::vector<FairnessObservation> out(count);
  parallel_for(count, workers, [&](std::size_t i) {
    SimConfig sc;
    sc.protocol = cfg.protocol;
    sc.n = 2;
    sc.hashrates = {cfg.weak_share, 1.0 - cfg.weak_share};
    sc.pow_rate = cfg.protocol.k / cfg.T;
    sc.network = NetworkModel::uniform(cfg.delay);
    sc.seed = mix_seed(cfg.seed, word, i);
    sc.stop = {StopCondition::Kind::Pows, static_cast<double>(per)};
    Environment env(sc);
    env.run();
    const DagView global(env.store());
    const BlockId tip = winning_chain(global, env.protocol());
    const RewardLedger ledger = accumulate_rewards(global, tip, env.protocol(), 2);
    FairnessObservation& o = out[i];
    o.index = i;
    o.seed = sc.seed;
    o.weak_reward = ledger.per_miner[0];
    o.total_reward = ledger.total();
    o.relative_pct =
        o.total_reward > 0 ? 100.0 * (o.weak_reward / o.total_reward) / cfg.weak_share : 0.0;
  });
  return out;
}

void write_fairness_csv(std::ostream& out, const FairnessConfig& cfg,
                        const std::vector<FairnessObservation>& obs) {
  const std::string hash = config_hash(cfg.canonical());
  out << "protocol,k,T,observation,weak_reward,total_reward,relative_pct,seed,config_hash\n";
  for (const auto& o : obs) {
    fmt::print(out, "{},{},{},{},{},{},{},{},{}\n", cfg.protocol.name(), cfg.protocol.k, num(cfg.T),
               o.index, num(o.weak_reward), num(o.total_reward), num(o.relative_pct), o.seed, hash);
  }
}

// ---------------------------------------------------------------------------

std::string AttackPoint::canonical() const {
  return fmt::format("attack protocol={} k={} c={} alpha={} gamma={} policy={} n={} stop={}",
                     protocol, k, num(c), num(alpha), num(gamma), policy, n, stop_text(stop));
}

AttackScenario AttackPoint::scenario() const {
  AttackScenario s;
  s.protocol = parse_protocol(protocol, k, c);
  s.alpha = alpha;
  s.gamma = gamma;
  s.n = n;
  s.stop = stop;
  return s;
}

std::uint64_t run_seed(std::uint64_t base, const AttackPoint& p, std::size_t run) {
  return mix_seed(base, hash_word(p.canonical()), run);
}

std::vector<AttackRow> run_point(const AttackPoint& p, std::size_t runs, std::uint64_t base_seed,
                                 std::size_t workers, std::size_t first_run) {
  const AttackScenario s = p.scenario();
  make_attack_config(s, 0).validate();  // fail before spawning work
  const Policy policy(parse_policy(p.policy));
  const std::string hash = config_hash(p.canonical());
  std::vector<AttackRow> rows(runs);
  parallel_for(runs, workers, [&](std::size_t i) {
    const std::size_t run = first_run + i;
    const std::uint64_t seed = run_seed(base_seed, p, run);
    const AttackOutcome o = run_attack(s, policy, seed);
    rows[i] = AttackRow{p.protocol, s.protocol.k,         p.alpha, p.gamma, p.policy, run,
                        o.normalized_reward, o.orphans.orphaned, o.simulated_seconds, seed, hash};
  });
  return rows;
}

std::vector<AttackRow> run_attack_eval(const AttackEvalConfig& cfg, std::size_t workers) {
  std::vector<AttackPoint> points;
  for (const auto& proto : cfg.protocols) {
    for (double a : cfg.alphas) {
      for (double g : cfg.gammas) {
        for (const auto& pol : cfg.policies) {
          points.push_back(AttackPoint{proto, cfg.k, cfg.c, a, g, pol, cfg.n, cfg.stop});
          points.back().scenario();  // validates names early
          parse_policy(pol);
        }
      }
    }
  }
  // Flatten (point, run) so that the pool stays busy across points.
  const std::size_t total = points.size() * cfg.runs;
  std::vector<AttackRow> rows(total);
  std::vector<std::string> hashes;
  for (const auto& p : points) hashes.push_back(config_hash(p.canonical()));
  parallel_for(total, workers, [&](std::size_t idx) {
    const AttackPoint& p = points[idx / cfg.runs];
    const std::size_t run = idx % cfg.runs;
    const AttackScenario s = p.scenario();
    const std::uint64_t seed = run_seed(cfg.seed, p, run);
    const AttackOutcome o = run_attack(s, Policy(parse_policy(p.policy)), seed);
    rows[idx] = AttackRow{p.protocol,        s.protocol.k,      p.alpha,
                          p.gamma,           p.policy,          run,
                          o.normalized_reward, o.orphans.orphaned, o.simulated_seconds,
                          seed,              hashes[idx / cfg.runs]};
  });
  std::sort(rows.begin(), rows.end(), [](const AttackRow& a, const AttackRow& b) {
    return std::tie(a.protocol, a.k, a.alpha, a.gamma, a.policy, a.run) <
           std::tie(b.protocol, b.k, b.alpha, b.gamma, b.policy, b.run);
  });
  return rows;
}

void write_attack_csv(std::ostream& out, const std::vector<AttackRow>& rows) {
  out << "protocol,k,alpha,gamma,policy,run,normalized_reward,orphans,simulated_seconds,seed,"
         "config_hash\n";
  for (const auto& r : rows) {
    fmt::print(out, "{},{},{},{},{},{},{},{},{},{},{}\n", r.protocol, r.k, num(r.alpha),
               num(r.gamma), r.policy, r.run, num(r.normalized_reward), r.orphans,
               num(r.simulated_seconds), r.seed, r.config_hash);
  }
}

std::vector<AttackAggregate> aggregate(const std::vector<AttackRow>& rows, std::size_t min_runs,
                                       bool force) {
  using Key = std::tuple<std::string, std::uint32_t, double, double, std::string>;
  std::map<Key, std::pair<std::vector<double>, std::vector<double>>> groups;
  for (const auto& r : rows) {
    auto& g = groups[Key{r.protocol, r.k, r.alpha, r.gamma, r.policy}];
    g.first.push_back(r.normalized_reward);
    g.second.push_back(static_cast<double>(r.orphans));
  }
  std::vector<AttackAggregate> out;
  for (const auto& [key, g] : groups) {
    if (g.first.size() < min_runs && !force) {
      throw std::runtime_error(fmt::format(
          "refusing to aggregate {} runs of {} (minimum {}); pass --force to override",
          g.first.size(), std::get<0>(key), min_runs));
    }
    out.push_back(AttackAggregate{std::get<0>(key), std::get<1>(key), std::get<2>(key),
                                  std::get<3>(key), std::get<4>(key), mean_se(g.first),
                                  mean_se(g.second)});
  }
  return out;
}

nlohmann::json to_json(const std::vector<AttackAggregate>& aggs) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& a : aggs) {
    arr.push_back({{"protocol", a.protocol},
                   {"k", a.k},
                   {"alpha", a.alpha},
                   {"gamma", a.gamma},
                   {"policy", a.policy},
                   {"runs", a.normalized_reward.n},
                   {"normalized_reward", {{"mean", a.normalized_reward.mean},
                                          {"se", a.normalized_reward.se}}},
                   {"orphans", {{"mean", a.orphans.mean}, {"se", a.orphans.se}}}});
  }
  return arr;
}

// ---------------------------------------------------------------------------

std::string BreakEvenResult::describe() const {
  switch (kind) {
    case Kind::Found:
      return fmt::format("{:.1f}", 100 * alpha);
    case Kind::BelowFloor:
      return fmt::format("<= {:.0f} (grid floor)", 100 * lo);
    case Kind::NoneInRange:
      return "no break-even in range";
  }
  return "?";
}

BreakEvenResult break_even(const BreakEvenConfig& cfg, std::size_t workers) {
  if (!(cfg.lo < cfg.hi) || cfg.batch < 2) throw ConfigError("invalid break-even search range");
  BreakEvenResult result;
  result.lo = cfg.lo;
  result.hi = cfg.hi;

  auto probe = [&](double alpha) {
    AttackPoint p = cfg.point;
    p.alpha = alpha;
    std::vector<double> xs;
    std::size_t want = cfg.batch;
    MeanSe m;
    for (;;) {
      for (const auto& r : run_point(p, want - xs.size(), cfg.seed, workers, xs.size())) {
        xs.push_back(r.normalized_reward);
      }
      m = mean_se(xs);
      if (std::abs(m.mean - alpha) >= 2 * m.se || want >= cfg.max_batch) break;
      want = std::min(cfg.max_batch, 2 * want);
    }
    result.probes.push_back({alpha, m});
    return m;
  };

  const MeanSe at_lo = probe(cfg.lo);
  if (at_lo.mean + 2 * at_lo.se >= cfg.lo) {
    result.kind = BreakEvenResult::Kind::BelowFloor;
    result.alpha = cfg.lo;
    return result;
  }
  const MeanSe at_hi = probe(cfg.hi);
  if (at_hi.mean + 2 * at_hi.se < cfg.hi) {
    result.kind = BreakEvenResult::Kind::NoneInRange;
    return result;
  }
  double lo = cfg.lo;
  double hi = cfg.hi;
  while (hi - lo > cfg.tolerance) {
    const double mid = 0.5 * (lo + hi);
    if (probe(mid).mean > mid) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  result.kind = BreakEvenResult::Kind::Found;
  result.lo = lo;
  result.hi = hi;
  result.alpha = 0.5 * (lo + hi);
  return result;
}

// ---------------------------------------------------------------------------

double block_race(std::size_t n, double gamma, std::uint64_t seed, double epsilon) {
  SimConfig c;
  c.protocol = parse_protocol("bitcoin", 1);
  c.n = n;
  c.hashrates.assign(n, 1.0);
  c.network = NetworkModel::attacker(n, epsilon, gamma);
  c.seed = seed;
  c.stop = {StopCondition::Kind::Pows, 0};
  Environment env(c);
  const BlockTemplate tmpl{{kGenesis}, ProtocolFields{true, 1, 0}};
  env.inject(1, tmpl, true);
  const BlockId mine = env.inject(0, tmpl, true);
  env.drain();
  std::size_t won = 0;
  for (NodeId i = 1; i < n; ++i) won += env.tip(i) == mine ? 1 : 0;
  return static_cast<double>(won) / static_cast<double>(n - 1);
}

std::vector<OrphanTableRow> orphan_table(double tau0, double transmit,
                                         const std::vector<double>& Ts,
                                         const std::vector<std::uint32_t>& ks) {
  std::vector<OrphanTableRow> rows;
  for (double T : Ts) {
    for (std::uint32_t k : ks) {
      rows.push_back({T, k, 100.0 * orphan_bound({tau0, transmit, T, k})});
    }
  }
  return rows;
}

void write_orphan_csv(std::ostream& out, const std::vector<OrphanTableRow>& rows) {
  out << "T,k,bound_percent\n";
  for (const auto& r : rows) fmt::print(out, "{},{},{:.4f}\n", num(r.T), r.k, r.bound_pct);
}

// ---------------------------------------------------------------------------

namespace {

nlohmann::json obs_json(const Observation& o) {
  const auto a = o.to_array();
  return nlohmann::json(std::vector<std::int64_t>(a.begin(), a.end()));
}

}  // namespace

nlohmann::json EpisodeServer::handle(const nlohmann::json& request) {
  try {
    const auto cmd = request.at("cmd").get<std::string>();
    if (cmd == "reset") {
      AttackScenario s;
      s.protocol = parse_protocol(request.at("protocol").get<std::string>(),
                                  request.value("k", 8u), request.value("c", 1.0));
      s.alpha = request.at("alpha").get<double>();
      s.gamma = request.at("gamma").get<double>();
      s.n = request.value("n", std::size_t{32});
      s.stop = {StopCondition::Kind::Blocks, request.value("stop_blocks", 2048.0)};
      const Observation o = episode_.reset(s, request.value("seed", std::uint64_t{0}));
      return {{"obs", obs_json(o)}, {"done", episode_.done()}};
    }
    if (cmd == "step") {
      const Action a{parse_withhold(request.at("withhold").get<std::string>()),
                     parse_extend(request.value("extend", std::string("inclusive")))};
      const StepResult r = episode_.step(a);
      return {{"obs", obs_json(r.obs)}, {"reward", r.reward}, {"done", r.done}};
    }
    if (cmd == "close") {
      closed_ = true;
      return {{"ok", true}};
    }
    return {{"error", fmt::format("unknown command '{}'", cmd)}};
  } catch (const std::exception& e) {
    return {{"error", e.what()}};
  }
}

}  // namespace tailsim
