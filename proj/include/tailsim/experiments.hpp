#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "tailsim/attacks.hpp"

namespace tailsim {

/// FNV-1a 64 of the text, as 16 hex digits.
std::string config_hash(std::string_view canonical);

/// Calls fn(i) for i in [0, count) on up to `workers` threads. The first
/// exception thrown by any call is rethrown after all threads joined.
void parallel_for(std::size_t count, std::size_t workers,
                  const std::function<void(std::size_t)>& fn);

struct MeanSe {
  double mean = 0;
  double se = 0;
  std::size_t n = 0;
};
MeanSe mean_se(const std::vector<double>& xs);

// ---------------------------------------------------------------------------
// Fairness: one weak and one strong miner, fixed message delay.

struct FairnessConfig {
  ProtocolConfig protocol{ProtocolKind::Bitcoin, 1, 1.0, RewardScheme::Constant};
  double T = 600;  // expected summary interval, seconds
  double delay = 6;
  double weak_share = 0.01;
  std::uint64_t budget_pows = 100'000;
  std::uint64_t seed = 0;

  /// Throws ConfigError for invalid splits or T/k below the delay.
  void validate() const;
  std::string canonical() const;
};

/// floor(86400 k / T): PoWs in one simulated day.
std::uint64_t pows_per_observation(std::uint32_t k, double T);

struct FairnessObservation {
  std::size_t index = 0;
  std::uint64_t seed = 0;
  double weak_reward = 0;
  double total_reward = 0;
  double relative_pct = 0;  // weak share of rewards as % of its hash share
};

std::vector<FairnessObservation> run_fairness(const FairnessConfig& cfg, std::size_t workers);
void write_fairness_csv(std::ostream& out, const FairnessConfig& cfg,
                        const std::vector<FairnessObservation>& obs);

// ---------------------------------------------------------------------------
// Attack evaluation

struct AttackEvalConfig {
  std::vector<std::string> protocols{"tailstorm"};
  std::uint32_t k = 8;
  double c = 1.0;
  std::vector<double> alphas{0.25};
  std::vector<double> gammas{0.5};
  std::vector<std::string> policies{"honest"};
  std::size_t runs = 30;
  std::size_t n = 32;
  StopCondition stop{StopCondition::Kind::Blocks, 2048};
  std::uint64_t seed = 0;
};

struct AttackRow {
  std::string protocol;
  std::uint32_t k = 0;
  double alpha = 0;
  double gamma = 0;
  std::string policy;
  std::size_t run = 0;
  double normalized_reward = 0;
  std::uint64_t orphans = 0;
  double simulated_seconds = 0;
  std::uint64_t seed = 0;
  std::string config_hash;
};

struct AttackPoint {
  std::string protocol;
  std::uint32_t k = 8;
  double c = 1.0;
  double alpha = 0;
  double gamma = 0;
  std::string policy;
  std::size_t n = 32;
  StopCondition stop{StopCondition::Kind::Blocks, 2048};

  std::string canonical() const;
  AttackScenario scenario() const;
};

/// Seed of run `run` at a configuration point.
std::uint64_t run_seed(std::uint64_t base, const AttackPoint& p, std::size_t run);

/// Runs one point; rows come back in run order.
std::vector<AttackRow> run_point(const AttackPoint& p, std::size_t runs, std::uint64_t base_seed,
                                 std::size_t workers, std::size_t first_run = 0);

/// All grid points, rows sorted by (protocol, k, alpha, gamma, policy, run).
std::vector<AttackRow> run_attack_eval(const AttackEvalConfig& cfg, std::size_t workers);
void write_attack_csv(std::ostream& out, const std::vector<AttackRow>& rows);

struct AttackAggregate {
  std::string protocol;
  std::uint32_t k = 0;
  double alpha = 0;
  double gamma = 0;
  std::string policy;
  MeanSe normalized_reward;
  MeanSe orphans;
};

/// Groups rows by configuration. Throws std::runtime_error for groups with
/// fewer than `min_runs` runs unless `force` is set.
std::vector<AttackAggregate> aggregate(const std::vector<AttackRow>& rows,
                                       std::size_t min_runs = 10, bool force = false);
nlohmann::json to_json(const std::vector<AttackAggregate>& aggs);

// ---------------------------------------------------------------------------
// Break-even search

struct BreakEvenConfig {
  AttackPoint point;  // alpha is overwritten per probe
  double lo = 0.05;
  double hi = 0.50;
  std::size_t batch = 30;
  std::size_t max_batch = 240;
  double tolerance = 0.005;
  std::uint64_t seed = 0;
};

struct BreakEvenProbe {
  double alpha = 0;
  MeanSe reward;
};

struct BreakEvenResult {
  enum class Kind { Found, BelowFloor, NoneInRange };
  Kind kind = Kind::Found;
  double alpha = 0;  // midpoint of the final bracket when found
  double lo = 0;
  double hi = 0;
  std::vector<BreakEvenProbe> probes;

  std::string describe() const;
};

/// Bisection on alpha for mean normalized reward == alpha. Probes whose sign
/// is within two standard errors are re-run with doubled batches up to
/// max_batch.
BreakEvenResult break_even(const BreakEvenConfig& cfg, std::size_t workers);

// ---------------------------------------------------------------------------
// Block races

/// Staged Bitcoin race in the attacker network: defender 1 publishes a block
/// on genesis and the attacker answers at once with its own. Returns the
/// share of the n-1 defenders whose tip ends up on the attacker's block.
double block_race(std::size_t n, double gamma, std::uint64_t seed,
                  double epsilon = default_epsilon(1.0));

// ---------------------------------------------------------------------------
// Orphan bound table

struct OrphanTableRow {
  double T = 0;
  std::uint32_t k = 1;
  double bound_pct = 0;
};

std::vector<OrphanTableRow> orphan_table(double tau0, double transmit,
                                         const std::vector<double>& Ts,
                                         const std::vector<std::uint32_t>& ks);
void write_orphan_csv(std::ostream& out, const std::vector<OrphanTableRow>& rows);

// ---------------------------------------------------------------------------
// Episode server

/// Line protocol for external policy search. Requests:
///   {"cmd":"reset","protocol":"tailstorm","k":8,"alpha":0.3,"gamma":0.5,
///    "n":32,"stop_blocks":2048,"seed":1}
///   {"cmd":"step","withhold":"override","extend":"inclusive"}
///   {"cmd":"close"}
/// Responses carry "obs" (8 integers), "reward", "done", or "error".
class EpisodeServer {
 public:
  nlohmann::json handle(const nlohmann::json& request);
  bool closed() const { return closed_; }

 private:
  Episode episode_;
  bool closed_ = false;
};

}  // namespace tailsim
