#include "tailsim/bitcoin.hpp"

namespace tailsim {

Bitcoin::Bitcoin() : config_{ProtocolKind::Bitcoin, 1, 1.0, RewardScheme::Constant} {}

BlockTemplate Bitcoin::root() const { return BlockTemplate{{}, ProtocolFields{true, 0, 0}}; }

bool Bitcoin::validate(const DagView& view, const Block& b) const {
  if (!b.pow || b.parents.size() != 1) return false;
  const Block& parent = view[b.parents.front()];
  return b.fields.summary && b.fields.depth == 0 &&
         b.fields.height == parent.fields.height + 1;
}

UpdateResult Bitcoin::update(const DagView& view, BlockId tip, BlockId b, NodeId) const {
  if (view[b].fields.height > view[tip].fields.height) return {b, {b}, {}};
  return {tip, {}, {}};
}

BlockTemplate Bitcoin::extend(const DagView& view, BlockId tip) const {
  return BlockTemplate{{tip}, ProtocolFields{true, view[tip].fields.height + 1, 0}};
}

bool Bitcoin::ranks_above(const DagView& view, BlockId s, BlockId b) const {
  return view[b].fields.height > view[s].fields.height;
}

void Bitcoin::summary_rewards(const DagView& view, BlockId summary,
                              std::vector<Reward>& out) const {
  const Block& blk = view[summary];
  if (blk.pow) out.push_back({blk.miner, 1.0});
}

}  // namespace tailsim
