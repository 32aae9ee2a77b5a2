#include "tailsim/bk.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace tailsim {

namespace {

std::uint64_t min_parent_hash(const DagView& view, BlockId s) {
  std::uint64_t v = std::numeric_limits<std::uint64_t>::max();
  for (BlockId p : view[s].parents) v = std::min(v, view[p].hash);
  return v;
}

}  // namespace

Bk::Bk(std::uint32_t k, double c) : config_{ProtocolKind::Bk, k, c, RewardScheme::Constant} {
  if (k < 1) throw std::invalid_argument("bk requires k >= 1");
  if (!(c > 0)) throw std::invalid_argument("bk requires c > 0");
}

BlockTemplate Bk::root() const { return BlockTemplate{{}, ProtocolFields{true, 0, 0}}; }

bool Bk::validate(const DagView& view, const Block& b) const {
  if (b.parents.empty() || b.fields.depth != 0) return false;
  if (b.fields.summary) {
    SubblockSpan span = subblock_span(view, b.parents);
    if (span.summaries.size() != 1 || span.subblocks.size() != config_.k) return false;
    const Block& p = view[span.summaries.front()];
    if (b.fields.height != p.fields.height + 1) return false;
    BlockId leader = span.subblocks.front();
    for (BlockId x : span.subblocks) {
      if (view[x].hash < view[leader].hash) leader = x;
    }
    return b.miner == view[leader].miner;
  }
  const Block& p = view[b.parents.front()];
  return b.pow && b.parents.size() == 1 && p.fields.summary &&
         b.fields.height == p.fields.height;
}

bool Bk::prefers(const DagView& view, BlockId s, BlockId b) const {
  if (s == b) return false;
  const auto hs = view[s].fields.height;
  const auto hb = view[b].fields.height;
  if (hb != hs) return hb > hs;
  const auto ns = confirming_subblocks(view, s).size();
  const auto nb = confirming_subblocks(view, b).size();
  if (nb != ns) return nb > ns;
  return min_parent_hash(view, b) < min_parent_hash(view, s);
}

std::optional<std::vector<BlockId>> Bk::select(const DagView& view,
                                               std::span<const BlockId> candidates,
                                               NodeId self) const {
  std::vector<BlockId> pool(candidates.begin(), candidates.end());
  auto by_hash = [&](BlockId a, BlockId b) {
    const Block& ba = view[a];
    const Block& bb = view[b];
    return ba.hash != bb.hash ? ba.hash < bb.hash : a < b;
  };
  std::sort(pool.begin(), pool.end(), by_hash);
  // The node's lowest own vote leads; only votes above it can join.
  auto lead = std::find_if(pool.begin(), pool.end(),
                           [&](BlockId x) { return view[x].miner == self; });
  if (lead == pool.end() || static_cast<std::size_t>(pool.end() - lead) < config_.k) {
    return std::nullopt;
  }
  std::stable_partition(lead, pool.end(), [&](BlockId x) { return view[x].miner == self; });
  std::vector<BlockId> out(lead, lead + config_.k);
  std::sort(out.begin(), out.end());
  return out;
}

UpdateResult Bk::update(const DagView& view, BlockId tip, BlockId b, NodeId self) const {
  UpdateResult r{tip, {b}, {}};
  if (view[b].fields.summary) {
    if (prefers(view, r.tip, b)) r.tip = b;
    return r;
  }
  BlockId p = last_summary_before(view, b);
  if (prefers(view, r.tip, p)) r.tip = p;
  std::vector<BlockId> votes = confirming_subblocks(view, r.tip);
  if (auto tmpl = summary_from(view, r.tip, votes, self)) r.append.push_back(std::move(*tmpl));
  return r;
}

BlockTemplate Bk::extend(const DagView& view, BlockId tip) const {
  return BlockTemplate{{tip}, ProtocolFields{false, view[tip].fields.height, 0}};
}

std::int64_t Bk::progress(const Block& b) const {
  return static_cast<std::int64_t>(config_.k) * b.fields.height + (b.fields.summary ? 0 : 1);
}

std::optional<BlockTemplate> Bk::summary_from(const DagView& view, BlockId summary,
                                              std::span<const BlockId> candidates,
                                              NodeId self) const {
  if (candidates.size() < config_.k) return std::nullopt;
  auto votes = select(view, candidates, self);
  if (!votes) return std::nullopt;
  return BlockTemplate{std::move(*votes), ProtocolFields{true, view[summary].fields.height + 1, 0}};
}

void Bk::summary_rewards(const DagView& view, BlockId summary, std::vector<Reward>& out) const {
  const Block& s = view[summary];
  if (s.parents.empty()) return;
  for (BlockId x : subblock_span(view, s.parents).subblocks) {
    out.push_back({view[x].miner, config_.c});
  }
}

}  // namespace tailsim
