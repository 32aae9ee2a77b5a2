#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "tailsim/metrics.hpp"
#include "tailsim/sim.hpp"

namespace tailsim {

/// Heights are relative to the common summary b_c; the rest describe the
/// subblock trees R(b_a), R'(b_a) and R(b_d).
struct Observation {
  std::int64_t h_a = 0;
  std::int64_t h_d = 0;
  std::int64_t s_a = 0;
  std::int64_t s_a_excl = 0;
  std::int64_t s_d = 0;
  std::int64_t d_a = 0;
  std::int64_t d_a_excl = 0;
  std::int64_t d_d = 0;

  std::array<std::int64_t, 8> to_array() const {
    return {h_a, h_d, s_a, s_a_excl, s_d, d_a, d_a_excl, d_d};
  }
  bool operator==(const Observation&) const = default;
};

struct ObservationDetail {
  Observation obs;
  BlockId b_a = kGenesis;
  BlockId b_d = kGenesis;
  BlockId b_c = kGenesis;
};

/// Computes the observation for the attacker whose preferred summary is
/// `b_a`, against the defender tips that are visible in `view`. Among equally
/// ranked defender tips, the one forking off lowest below b_a is used. R(b_d)
/// only counts blocks that at least one defender has seen.
ObservationDetail observe(const DagView& view, BlockId b_a, std::span<const BlockId> defender_tips,
                          const Protocol& protocol, NodeId attacker);

enum class Withhold { Wait, Match, Override, Adopt };
enum class ExtendMode { Inclusive, Exclusive };

struct Action {
  Withhold withhold = Withhold::Wait;
  ExtendMode extend = ExtendMode::Inclusive;
  bool operator==(const Action&) const = default;
};

std::string to_string(Withhold w);
std::string to_string(ExtendMode e);
Withhold parse_withhold(std::string_view s);
ExtendMode parse_extend(std::string_view s);

enum class NamedPolicy { Honest, GetAhead, MinorDelay, Sm1 };

Action policy_honest(const Observation& o);
Action policy_get_ahead(const Observation& o);
Action policy_minor_delay(const Observation& o);
/// Selfish mining for longest-chain protocols.
Action policy_sm1(const Observation& o);

/// Search family. Rules are checked top to bottom:
///   Adopt    if h_d - h_a >= adopt_deficit
///   Wait     if wait_when_defender_idle and h_d == 0
///   Override if override_lead_min <= h_a - h_d <= override_lead_max
///   Match    if h_a == h_d and 1 <= h_d <= match_max
///   Wait     otherwise
/// Summaries are Exclusive when exclusive_min_depth > 0 and d_a' reaches it.
struct ThresholdPolicy {
  int adopt_deficit = 1;
  bool wait_when_defender_idle = false;
  int override_lead_min = 0;
  int override_lead_max = 1 << 20;
  int match_max = 0;
  int exclusive_min_depth = 0;

  Action operator()(const Observation& o) const;
  std::string describe() const;
  bool operator==(const ThresholdPolicy&) const = default;
};

/// Threshold parameters equivalent to a named policy.
ThresholdPolicy as_threshold(NamedPolicy p);

class Policy {
 public:
  Policy(NamedPolicy p) : impl_(p) {}  // NOLINT(google-explicit-constructor)
  Policy(ThresholdPolicy p) : impl_(p) {}  // NOLINT(google-explicit-constructor)

  Action operator()(const Observation& o) const;
  std::string name() const;

 private:
  std::variant<NamedPolicy, ThresholdPolicy> impl_;
};

/// honest, getahead, minordelay, sm1.
NamedPolicy parse_policy(std::string_view name);
std::string to_string(NamedPolicy p);

/// Dishonest node following a policy. Without a policy every update waits for
/// an external decision via set_action().
class AttackerAgent final : public Agent {
 public:
  AttackerAgent(const Protocol& protocol, NodeId self, std::optional<Policy> policy);

  BlockTemplate extend(const DagView& view, BlockId tip) override;
  bool begin_update(const NodeContext& ctx, BlockId b) override;
  UpdateResult finish_update(const NodeContext& ctx) override;

  const ObservationDetail& last_observation() const { return last_; }
  void set_action(Action a) { action_ = a; }
  const std::set<BlockId>& withheld() const { return withheld_; }
  std::uint64_t decisions() const { return decisions_; }

 private:
  const Protocol* protocol_;
  NodeId self_;
  std::optional<Policy> policy_;
  BlockId pref_ = kGenesis;
  std::set<BlockId> withheld_;
  ObservationDetail last_;
  std::optional<Action> action_;
  std::vector<BlockId> defender_tips_;
  std::uint64_t decisions_ = 0;
};

// ---------------------------------------------------------------------------
// Scenarios

/// Attacker (node 0) with hash share alpha against n-1 equal defenders.
struct AttackScenario {
  ProtocolConfig protocol;
  double alpha = 0.25;
  double gamma = 0.5;
  std::size_t n = 32;
  double pow_rate = 1.0;
  std::optional<double> epsilon;
  StopCondition stop{StopCondition::Kind::Blocks, 2048};
};

SimConfig make_attack_config(const AttackScenario& s, std::uint64_t seed);

struct AttackOutcome {
  double normalized_reward = 0;
  OrphanCount orphans;
  double simulated_seconds = 0;
  BlockId tip = kGenesis;
};

AttackOutcome evaluate_outcome(const Environment& env);
AttackOutcome run_attack(const AttackScenario& s, const Policy& policy, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Episodes

struct StepResult {
  Observation obs;
  double reward = 0;
  bool done = false;
};

class EpisodeError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Step-wise control of the attacker. Rewards are increments of the attacker's
/// normalized reward at the common summary b_c, and at the end of the episode
/// of the normalized reward on the winning chain, so they sum to the final
/// normalized reward.
class Episode {
 public:
  Observation reset(const AttackScenario& s, std::uint64_t seed);
  StepResult step(Action a);

  bool done() const { return done_; }
  bool active() const { return env_ != nullptr; }
  const Environment& env() const;
  double cumulative_reward() const { return value_; }

 private:
  double current_value();

  std::unique_ptr<Environment> env_;
  AttackerAgent* attacker_ = nullptr;
  std::unique_ptr<RewardTracker> tracker_;
  double value_ = 0;
  bool done_ = false;
};

// ---------------------------------------------------------------------------
// Policy search

struct SearchBudget {
  std::size_t candidates = 16;
  std::size_t runs = 10;
};

struct ScoredPolicy {
  ThresholdPolicy policy;
  double score = 0;
};

struct SearchResult {
  ScoredPolicy best;
  std::vector<ScoredPolicy> evaluated;
};

/// Random-restart hill climbing over ThresholdPolicy, seeded with the named
/// policies that make sense for the protocol. Every candidate is evaluated on
/// the same run seeds.
SearchResult threshold_search(const AttackScenario& s, const SearchBudget& budget,
                              std::uint64_t seed, std::vector<ThresholdPolicy> seeds = {});

/// Mixes a base seed with further words; used for per-run seeds.
std::uint64_t mix_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0);

}  // namespace tailsim
