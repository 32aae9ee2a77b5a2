#include "tailsim/dag.hpp"

#include <algorithm>
#include <ostream>

#include <json.hpp>

namespace tailsim {

DagStore::DagStore(std::size_t num_nodes) : num_nodes_(num_nodes) {
  if (num_nodes == 0) throw StructuralError("DagStore needs at least one node");
}

Block DagStore::candidate(const BlockTemplate& tmpl, NodeId miner, bool pow, double now,
                          std::uint64_t hash) const {
  for (BlockId p : tmpl.parents) {
    if (!contains(p)) {
      throw StructuralError("unknown parent block " + std::to_string(p.value));
    }
  }
  return Block{BlockId{static_cast<std::uint32_t>(blocks_.size())},
               tmpl.parents,
               pow,
               miner,
               hash,
               now,
               tmpl.fields};
}

BlockId DagStore::commit(Block block) {
  const BlockId id{static_cast<std::uint32_t>(blocks_.size())};
  for (BlockId p : block.parents) {
    if (!contains(p)) {
      throw StructuralError("unknown parent block " + std::to_string(p.value));
    }
  }
  block.id = id;
  for (BlockId p : block.parents) children_[p.value].push_back(id);
  blocks_.push_back(std::move(block));
  children_.emplace_back();
  visibility_.resize(visibility_.size() + num_nodes_, 0);
  return id;
}

BlockId DagStore::reify(const BlockTemplate& tmpl, NodeId miner, bool pow, double now,
                        std::uint64_t hash) {
  return commit(candidate(tmpl, miner, pow, now, hash));
}

const Block& DagStore::block(BlockId b) const {
  if (!contains(b)) throw StructuralError("unknown block " + std::to_string(b.value));
  return blocks_[b.value];
}

std::span<const BlockId> DagStore::children(BlockId b) const {
  if (!contains(b)) throw StructuralError("unknown block " + std::to_string(b.value));
  return children_[b.value];
}

void DagStore::set_visible(BlockId b, NodeId node) {
  if (!contains(b) || node >= num_nodes_) throw StructuralError("set_visible out of range");
  visibility_[static_cast<std::size_t>(b.value) * num_nodes_ + node] = 1;
}

void DagStore::dump_jsonl(std::ostream& out) const {
  for (const Block& b : blocks_) {
    nlohmann::json parents = nlohmann::json::array();
    for (BlockId p : b.parents) parents.push_back(p.value);
    nlohmann::json rec{
        {"id", b.id.value},
        {"parents", std::move(parents)},
        {"pow", b.pow},
        {"miner", b.miner == kNoNode ? nlohmann::json(nullptr) : nlohmann::json(b.miner)},
        {"hash_value", b.hash},
        {"summary", b.fields.summary},
        {"height", b.fields.height},
        {"depth", b.fields.depth},
        {"reified_at", b.reified_at},
    };
    out << rec.dump() << '\n';
  }
}

const Block& DagView::block(BlockId b) const {
  if (!contains(b)) {
    throw VisibilityError("block " + std::to_string(b.value) + " not visible in view");
  }
  return store_->block(b);
}

std::vector<BlockId> ancestors(const DagView& view, BlockId b) {
  const Block& start = view.block(b);
  std::vector<std::uint8_t> seen(b.value, 0);
  std::vector<BlockId> stack(start.parents.begin(), start.parents.end());
  std::vector<BlockId> out;
  while (!stack.empty()) {
    BlockId x = stack.back();
    stack.pop_back();
    if (seen[x.value]) continue;
    seen[x.value] = 1;
    out.push_back(x);
    for (BlockId p : view[x].parents) {
      if (!seen[p.value]) stack.push_back(p);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

BlockId last_summary_before(const DagView& view, std::span<const BlockId> parents) {
  if (parents.empty()) throw StructuralError("block has no parents; no summary before it");
  BlockId x = parents.front();
  while (!view[x].fields.summary) {
    const auto& ps = view[x].parents;
    if (ps.empty()) throw StructuralError("subblock chain without summary ancestor");
    x = ps.front();
  }
  return x;
}

BlockId last_summary_before(const DagView& view, BlockId b) {
  return last_summary_before(view, std::span<const BlockId>(view.block(b).parents));
}

SubblockSpan subblock_span(const DagView& view, std::span<const BlockId> parents) {
  SubblockSpan span;
  std::vector<BlockId> stack(parents.begin(), parents.end());
  std::vector<BlockId> seen;
  while (!stack.empty()) {
    BlockId x = stack.back();
    stack.pop_back();
    if (std::find(seen.begin(), seen.end(), x) != seen.end()) continue;
    seen.push_back(x);
    const Block& blk = view[x];
    if (blk.fields.summary) {
      span.summaries.push_back(x);
      continue;
    }
    span.subblocks.push_back(x);
    for (BlockId p : blk.parents) stack.push_back(p);
  }
  std::sort(span.subblocks.begin(), span.subblocks.end());
  std::sort(span.summaries.begin(), span.summaries.end());
  return span;
}

std::vector<BlockId> subblocks_between(const DagView& view, BlockId b, BlockId p) {
  SubblockSpan span = subblock_span(view, view.block(b).parents);
  if (span.summaries.size() != 1 || span.summaries.front() != p) {
    throw StructuralError("summary " + std::to_string(p.value) +
                          " does not bound the subblocks below " + std::to_string(b.value));
  }
  return std::move(span.subblocks);
}

std::vector<BlockId> confirming_subblocks(const DagView& view, BlockId s) {
  std::vector<BlockId> out;
  std::vector<BlockId> stack{s};
  while (!stack.empty()) {
    BlockId x = stack.back();
    stack.pop_back();
    view.for_each_child(x, [&](BlockId c) {
      if (!view[c].fields.summary) {
        out.push_back(c);
        stack.push_back(c);
      }
    });
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<BlockId> owned_confirming_subblocks(const DagView& view, BlockId s, NodeId owner) {
  std::vector<BlockId> out;
  std::vector<BlockId> stack{s};
  while (!stack.empty()) {
    BlockId x = stack.back();
    stack.pop_back();
    view.for_each_child(x, [&](BlockId c) {
      const Block& blk = view[c];
      if (!blk.fields.summary && blk.miner == owner) {
        out.push_back(c);
        stack.push_back(c);
      }
    });
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::uint32_t max_depth(const DagView& view, std::span<const BlockId> blocks) {
  std::uint32_t d = 0;
  for (BlockId b : blocks) d = std::max(d, view[b].fields.depth);
  return d;
}

}  // namespace tailsim
