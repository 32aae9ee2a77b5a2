#pragma once

#include "tailsim/protocol.hpp"

namespace tailsim {

/// Parallel proof-of-work with k votes (subblocks) per summary and leader
/// election: only the miner of the lowest-hash referenced subblock may append
/// the summary. Subblocks reference the summary directly and carry depth 0.
class Bk final : public Protocol {
 public:
  explicit Bk(std::uint32_t k, double c = 1.0);

  const ProtocolConfig& config() const override { return config_; }

  BlockTemplate root() const override;
  bool validate(const DagView& view, const Block& b) const override;
  UpdateResult update(const DagView& view, BlockId tip, BlockId b, NodeId self) const override;
  BlockTemplate extend(const DagView& view, BlockId tip) const override;

  /// Preference(s, b); node independent.
  bool prefers(const DagView& view, BlockId s, BlockId b) const;
  bool ranks_above(const DagView& view, BlockId s, BlockId b) const override {
    return prefers(view, s, b);
  }
  /// k * height, plus one for subblocks.
  std::int64_t progress(const Block& b) const override;
  std::optional<BlockTemplate> summary_from(const DagView& view, BlockId summary,
                                            std::span<const BlockId> candidates,
                                            NodeId self) const override;
  void summary_rewards(const DagView& view, BlockId summary,
                       std::vector<Reward>& out) const override;

  /// k subblocks led by the node's lowest-hash own subblock: own ones first,
  /// then ascending hash, all hashing above the leader. Empty when the node
  /// cannot lead a valid summary.
  std::optional<std::vector<BlockId>> select(const DagView& view,
                                             std::span<const BlockId> candidates,
                                             NodeId self) const;

 private:
  ProtocolConfig config_;
};

}  // namespace tailsim
