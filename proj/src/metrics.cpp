#include "tailsim/metrics.hpp"

#include <algorithm>
#include <stdexcept>

namespace tailsim {

BlockId winning_chain(const DagView& view, const Protocol& protocol) {
  const DagStore& store = view.store();
  std::uint32_t top = 0;
  for (std::uint32_t i = 0; i < store.size(); ++i) {
    const Block& b = store.block(BlockId{i});
    if (b.fields.summary && view.contains(b.id)) top = std::max(top, b.fields.height);
  }
  std::optional<BlockId> best;
  for (std::uint32_t i = 0; i < store.size(); ++i) {
    const Block& b = store.block(BlockId{i});
    if (!b.fields.summary || b.fields.height != top || !view.contains(b.id)) continue;
    if (!best || protocol.ranks_above(view, *best, b.id)) best = b.id;
  }
  if (!best) throw StructuralError("view has no summary block");
  return *best;
}

double RewardLedger::total() const {
  double t = 0;
  for (double r : per_miner) t += r;
  return t;
}

RewardLedger accumulate_rewards(const DagView& view, BlockId tip, const Protocol& protocol,
                                std::size_t num_nodes) {
  RewardLedger ledger;
  ledger.per_miner.assign(num_nodes, 0.0);
  ledger.basis = tip;
  ledger.progress = protocol.progress(view.block(tip));
  if (!view[tip].fields.summary) throw StructuralError("rewards are paid by summaries only");
  std::vector<Reward> rewards;
  for (BlockId s = tip; !view[s].parents.empty(); s = last_summary_before(view, s)) {
    protocol.summary_rewards(view, s, rewards);
  }
  for (const Reward& r : rewards) {
    if (r.miner < num_nodes) ledger.per_miner[r.miner] += r.amount;
  }
  return ledger;
}

double normalized_reward(const RewardLedger& ledger, NodeId node) {
  if (ledger.progress <= 0) throw std::domain_error("normalized reward needs positive progress");
  return ledger.per_miner.at(node) / static_cast<double>(ledger.progress);
}

double orphan_bound(const OrphanBoundInputs& in) {
  if (!(in.T > 0) || in.k < 1) throw std::invalid_argument("orphan bound needs T > 0, k >= 1");
  return in.tau0 / in.T + in.transmit / (in.k * in.T);
}

double OrphanCount::rate() const {
  return confirmed == 0 ? 0.0 : static_cast<double>(orphaned) / static_cast<double>(confirmed);
}

OrphanCount count_orphans(const DagView& view, BlockId tip) {
  const DagStore& store = view.store();
  std::vector<std::uint8_t> cls(store.size(), 0);  // 1 confirmed, 2 pending
  for (BlockId a : ancestors(view, tip)) cls[a.value] = 1;
  cls[tip.value] = 1;
  for (BlockId r : confirming_subblocks(view, tip)) cls[r.value] = 2;
  OrphanCount out;
  for (std::uint32_t i = 0; i < store.size(); ++i) {
    const Block& b = store.block(BlockId{i});
    if (!b.pow || !view.contains(b.id)) continue;
    switch (cls[i]) {
      case 0:
        ++out.orphaned;
        break;
      case 1:
        ++out.confirmed;
        break;
      default:
        ++out.pending;
    }
  }
  return out;
}

double measured_orphan_rate(const DagView& view, BlockId tip) {
  return count_orphans(view, tip).rate();
}

ShortTermRates short_term_rates(std::uint32_t k) {
  if (k < 2) throw std::invalid_argument("short-term rates need k >= 2");
  const double kd = k;
  ShortTermRates r;
  r.summarize_now = (kd - 1) / kd;
  r.delay = kd / (kd + 1);
  r.relative_gain = 1.0 / (kd * kd - 1);
  r.absolute_difference = 1.0 / (kd * (kd + 1));
  return r;
}

double RewardTracker::reward_up_to(const DagView& view, BlockId summary) {
  const std::size_t size = view.store().size();
  if (memo_.size() < size) {
    memo_.resize(size, 0.0);
    known_.resize(size, 0);
  }
  std::vector<BlockId> chain;
  BlockId s = summary;
  while (!known_[s.value] && !view[s].parents.empty()) {
    chain.push_back(s);
    s = last_summary_before(view, s);
  }
  double acc = memo_[s.value];  // genesis memo stays 0
  for (auto it = chain.rbegin(); it != chain.rend(); ++it) {
    scratch_.clear();
    protocol_->summary_rewards(view, *it, scratch_);
    for (const Reward& r : scratch_) {
      if (r.miner == node_) acc += r.amount;
    }
    memo_[it->value] = acc;
    known_[it->value] = 1;
  }
  return acc;
}

double RewardTracker::normalized(const DagView& view, BlockId summary) {
  const auto progress = protocol_->progress(view[summary]);
  if (progress <= 0) return 0.0;
  return reward_up_to(view, summary) / static_cast<double>(progress);
}

}  // namespace tailsim
