#pragma once

#include <cstdint>
#include <vector>

#include "tailsim/dag.hpp"
#include "tailsim/protocol.hpp"

namespace tailsim {

/// Best summary over the view under the protocol's ranking; remaining ties go
/// to the smallest id.
BlockId winning_chain(const DagView& view, const Protocol& protocol);

struct RewardLedger {
  std::vector<double> per_miner;
  BlockId basis = kGenesis;
  std::int64_t progress = 0;

  double total() const;
};

/// Rewards paid by every summary on the chain ending in `tip`. Subblocks that
/// only confirm `tip` itself are not yet rewarded.
RewardLedger accumulate_rewards(const DagView& view, BlockId tip, const Protocol& protocol,
                                std::size_t num_nodes);

/// Reward of `node` divided by progress at the ledger's basis. Throws
/// std::domain_error when progress is zero.
double normalized_reward(const RewardLedger& ledger, NodeId node);

struct OrphanBoundInputs {
  double tau0 = 0;      // latency, seconds
  double transmit = 0;  // full-block transmission time, seconds
  double T = 0;         // expected summary interval, seconds
  std::uint32_t k = 1;
};

/// tau0/T + transmit/(k T).
double orphan_bound(const OrphanBoundInputs& in);

struct OrphanCount {
  std::uint64_t orphaned = 0;
  std::uint64_t confirmed = 0;
  std::uint64_t pending = 0;  // PoW blocks confirming the tip itself

  double rate() const;
};

/// PoW blocks in the ancestry of `tip` are confirmed. Blocks in R(tip) are
/// pending and counted in neither class; everything else is orphaned.
OrphanCount count_orphans(const DagView& view, BlockId tip);
double measured_orphan_rate(const DagView& view, BlockId tip);

struct ShortTermRates {
  double summarize_now = 0;        // (k-1)/k
  double delay = 0;                // k/(k+1)
  double relative_gain = 0;        // delay/summarize_now - 1 = 1/(k^2-1)
  double absolute_difference = 0;  // delay - summarize_now = 1/(k(k+1))
};

/// Reward per expected subblock interval for an attacker that summarizes a
/// k-1 tree right away versus one that waits for its own k-th subblock.
ShortTermRates short_term_rates(std::uint32_t k);

/// Memoized reward of one node along summary chains, for repeated queries on a
/// growing DAG.
class RewardTracker {
 public:
  RewardTracker(const Protocol& protocol, NodeId node) : protocol_(&protocol), node_(node) {}

  /// Reward of the node paid by all summaries up to and including `summary`.
  double reward_up_to(const DagView& view, BlockId summary);
  /// reward_up_to / progress, zero at genesis.
  double normalized(const DagView& view, BlockId summary);

 private:
  const Protocol* protocol_;
  NodeId node_;
  std::vector<double> memo_;
  std::vector<std::uint8_t> known_;
  std::vector<Reward> scratch_;
};

}  // namespace tailsim
