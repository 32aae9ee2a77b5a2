#pragma once

#include "tailsim/protocol.hpp"

namespace tailsim {

/// Longest-chain protocol with first-seen tie breaking. Every block is its own
/// "summary" (summary flag set, depth 0) so that chain walks are shared with
/// the summary-based protocols.
class Bitcoin final : public Protocol {
 public:
  Bitcoin();

  const ProtocolConfig& config() const override { return config_; }

  BlockTemplate root() const override;
  bool validate(const DagView& view, const Block& b) const override;
  UpdateResult update(const DagView& view, BlockId tip, BlockId b, NodeId self) const override;
  BlockTemplate extend(const DagView& view, BlockId tip) const override;

  bool ranks_above(const DagView& view, BlockId s, BlockId b) const override;
  std::int64_t progress(const Block& b) const override { return b.fields.height; }
  bool has_subblocks() const override { return false; }
  void summary_rewards(const DagView& view, BlockId summary,
                       std::vector<Reward>& out) const override;

 private:
  ProtocolConfig config_;
};

}  // namespace tailsim
