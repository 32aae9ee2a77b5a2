#include "tailsim/tailstorm.hpp"

#include <algorithm>
#include <stdexcept>

namespace tailsim {

namespace {

bool contains_sorted(std::span<const BlockId> sorted, BlockId b) {
  return std::binary_search(sorted.begin(), sorted.end(), b);
}

struct Proposal {
  BlockId candidate;
  std::vector<BlockId> fresh;  // B'_x
  std::size_t own = 0;         // r_x
};

// a ranks above b for the greedy argmax
bool better(const DagView& view, const Proposal& a, const Proposal& b) {
  if (a.own != b.own) return a.own > b.own;
  if (a.fresh.size() != b.fresh.size()) return a.fresh.size() < b.fresh.size();
  const Block& ba = view[a.candidate];
  const Block& bb = view[b.candidate];
  if (ba.fields.depth != bb.fields.depth) return ba.fields.depth > bb.fields.depth;
  if (ba.hash != bb.hash) return ba.hash < bb.hash;
  return a.candidate < b.candidate;
}

}  // namespace

SubblockSelection select_subblocks(const DagView& view, std::span<const BlockId> candidates,
                                   std::uint32_t k, NodeId self) {
  if (candidates.size() < k) {
    throw std::invalid_argument("subblock selection needs at least k candidates");
  }
  std::vector<BlockId> pool(candidates.begin(), candidates.end());
  std::sort(pool.begin(), pool.end());
  pool.erase(std::unique(pool.begin(), pool.end()), pool.end());

  std::vector<BlockId> selected;  // kept sorted
  while (selected.size() < k) {
    std::optional<Proposal> best;
    for (BlockId x : pool) {
      if (contains_sorted(selected, x)) continue;
      Proposal p{x, {}, 0};
      for (BlockId y = x;;) {
        p.fresh.push_back(y);
        if (view[y].miner == self) ++p.own;
        const auto& parents = view[y].parents;
        if (parents.empty()) break;
        y = parents.front();
        if (!contains_sorted(pool, y) || contains_sorted(selected, y)) break;
      }
      if (selected.size() + p.fresh.size() > k) continue;
      if (!best || better(view, p, *best)) best = std::move(p);
    }
    if (!best) throw std::logic_error("subblock selection found no feasible candidate");
    selected.insert(selected.end(), best->fresh.begin(), best->fresh.end());
    std::sort(selected.begin(), selected.end());
  }

  SubblockSelection out;
  out.selected = selected;
  for (BlockId x : selected) {
    bool has_child = false;
    view.for_each_child(x, [&](BlockId c) { has_child |= contains_sorted(selected, c); });
    if (!has_child) out.leaves.push_back(x);
  }
  return out;
}

double discount(const DagView& view, BlockId summary, const TailstormParams& params) {
  const Block& s = view[summary];
  if (s.parents.empty()) return 0.0;
  if (params.scheme == RewardScheme::Constant) return params.c;
  SubblockSpan span = subblock_span(view, s.parents);
  return params.c / params.k * max_depth(view, span.subblocks);
}

double own_summary_reward(const DagView& view, BlockId summary, NodeId self,
                          const TailstormParams& params) {
  const Block& s = view[summary];
  if (s.parents.empty()) return 0.0;
  SubblockSpan span = subblock_span(view, s.parents);
  auto own = std::count_if(span.subblocks.begin(), span.subblocks.end(),
                           [&](BlockId x) { return view[x].miner == self; });
  if (own == 0) return 0.0;
  double per_block = params.scheme == RewardScheme::Constant
                         ? params.c
                         : params.c / params.k * max_depth(view, span.subblocks);
  return static_cast<double>(own) * per_block;
}

bool ts_prefers(const DagView& view, BlockId s, BlockId b, NodeId self,
                const TailstormParams& params) {
  if (s == b) return false;
  const auto hs = view[s].fields.height;
  const auto hb = view[b].fields.height;
  if (hb != hs) return hb > hs;
  const auto ns = confirming_subblocks(view, s).size();
  const auto nb = confirming_subblocks(view, b).size();
  if (nb != ns) return nb > ns;
  return own_summary_reward(view, b, self, params) > own_summary_reward(view, s, self, params);
}

Tailstorm::Tailstorm(TailstormParams params)
    : params_(params), config_{ProtocolKind::Tailstorm, params.k, params.c, params.scheme} {
  if (params.k < 2) throw std::invalid_argument("tailstorm requires k >= 2");
  if (!(params.c > 0)) throw std::invalid_argument("tailstorm requires c > 0");
}

BlockTemplate Tailstorm::root() const { return BlockTemplate{{}, ProtocolFields{true, 0, 0}}; }

bool Tailstorm::validate(const DagView& view, const Block& b) const {
  if (b.parents.empty()) return false;
  if (b.fields.summary) {
    SubblockSpan span = subblock_span(view, b.parents);
    if (span.summaries.size() != 1) return false;
    const Block& p = view[span.summaries.front()];
    return span.subblocks.size() == params_.k && b.fields.depth == 0 &&
           b.fields.height == p.fields.height + 1;
  }
  const Block& p = view[b.parents.front()];
  return b.pow && b.parents.size() == 1 && b.fields.depth == p.fields.depth + 1 &&
         b.fields.height == p.fields.height;
}

UpdateResult Tailstorm::update(const DagView& view, BlockId tip, BlockId b, NodeId self) const {
  UpdateResult r{tip, {b}, {}};
  const Block& blk = view[b];
  if (blk.fields.summary) {
    if (ts_prefers(view, r.tip, b, self, params_)) r.tip = b;
    return r;
  }
  BlockId p = last_summary_before(view, b);
  if (ts_prefers(view, r.tip, p, self, params_)) r.tip = p;
  std::vector<BlockId> tree = confirming_subblocks(view, r.tip);
  if (tree.size() >= params_.k) {
    SubblockSelection sel = select_subblocks(view, tree, params_.k, self);
    r.append.push_back(BlockTemplate{
        std::move(sel.leaves), ProtocolFields{true, view[r.tip].fields.height + 1, 0}});
  }
  return r;
}

BlockTemplate Tailstorm::extend(const DagView& view, BlockId tip) const {
  BlockId parent = tip;
  std::vector<BlockId> tree = confirming_subblocks(view, tip);
  for (BlockId x : tree) {
    const Block& cand = view[x];
    const Block& cur = view[parent];
    if (parent == tip || cand.fields.depth > cur.fields.depth ||
        (cand.fields.depth == cur.fields.depth && cand.hash < cur.hash)) {
      parent = x;
    }
  }
  const Block& p = view[parent];
  return BlockTemplate{{parent}, ProtocolFields{false, p.fields.height, p.fields.depth + 1}};
}

bool Tailstorm::ranks_above(const DagView& view, BlockId s, BlockId b) const {
  const auto hs = view[s].fields.height;
  const auto hb = view[b].fields.height;
  if (hb != hs) return hb > hs;
  return confirming_subblocks(view, b).size() > confirming_subblocks(view, s).size();
}

std::optional<BlockTemplate> Tailstorm::summary_from(const DagView& view, BlockId summary,
                                                     std::span<const BlockId> candidates,
                                                     NodeId self) const {
  if (candidates.size() < params_.k) return std::nullopt;
  SubblockSelection sel = select_subblocks(view, candidates, params_.k, self);
  return BlockTemplate{std::move(sel.leaves),
                       ProtocolFields{true, view[summary].fields.height + 1, 0}};
}

void Tailstorm::summary_rewards(const DagView& view, BlockId summary,
                                std::vector<Reward>& out) const {
  const Block& s = view[summary];
  if (s.parents.empty()) return;
  SubblockSpan span = subblock_span(view, s.parents);
  const double amount = params_.scheme == RewardScheme::Constant
                            ? params_.c
                            : params_.c / params_.k * max_depth(view, span.subblocks);
  for (BlockId x : span.subblocks) out.push_back({view[x].miner, amount});
}

}  // namespace tailsim
