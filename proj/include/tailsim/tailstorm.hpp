#pragma once

#include <span>
#include <vector>

#include "tailsim/protocol.hpp"

namespace tailsim {

struct TailstormParams {
  std::uint32_t k = 2;
  double c = 1.0;
  RewardScheme scheme = RewardScheme::Discount;
};

struct SubblockSelection {
  std::vector<BlockId> selected;  // k blocks forming a tree under the summary
  std::vector<BlockId> leaves;    // leaves of that tree; the summary's parents
};

/// Greedy subblock selection. Each round adds the feasible candidate (with its
/// not yet selected ancestors inside `candidates`) that adds the most blocks
/// mined by `self`. Ties: fewest new blocks, then deepest, then lowest hash.
/// Throws std::invalid_argument if fewer than k candidates are given.
SubblockSelection select_subblocks(const DagView& view, std::span<const BlockId> candidates,
                                   std::uint32_t k, NodeId self);

/// Per-subblock reward of the tree summarized by `summary`: (c/k) * max depth,
/// or exactly c under the constant scheme. 0 for genesis.
double discount(const DagView& view, BlockId summary, const TailstormParams& params);

inline std::int64_t ts_progress(const Block& b, std::uint32_t k) {
  return static_cast<std::int64_t>(k) * b.fields.height + b.fields.depth;
}

/// Reward `self` receives from the tree summarized by `summary`.
double own_summary_reward(const DagView& view, BlockId summary, NodeId self,
                          const TailstormParams& params);

/// Preference(s, b): whether `self` prefers summary b over s.
bool ts_prefers(const DagView& view, BlockId s, BlockId b, NodeId self,
                const TailstormParams& params);

class Tailstorm final : public Protocol {
 public:
  explicit Tailstorm(TailstormParams params);

  const ProtocolConfig& config() const override { return config_; }
  const TailstormParams& params() const { return params_; }

  BlockTemplate root() const override;
  bool validate(const DagView& view, const Block& b) const override;
  UpdateResult update(const DagView& view, BlockId tip, BlockId b, NodeId self) const override;
  BlockTemplate extend(const DagView& view, BlockId tip) const override;

  bool ranks_above(const DagView& view, BlockId s, BlockId b) const override;
  std::int64_t progress(const Block& b) const override { return ts_progress(b, params_.k); }
  bool has_depth() const override { return true; }
  std::optional<BlockTemplate> summary_from(const DagView& view, BlockId summary,
                                            std::span<const BlockId> candidates,
                                            NodeId self) const override;
  void summary_rewards(const DagView& view, BlockId summary,
                       std::vector<Reward>& out) const override;

 private:
  TailstormParams params_;
  ProtocolConfig config_;
};

}  // namespace tailsim
