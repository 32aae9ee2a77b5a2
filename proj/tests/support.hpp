#pragma once

// Hand-built DAGs for unit tests. Blocks are visible to every node unless
// the builder is in private mode.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "tailsim/dag.hpp"

namespace tailsim::testing {

class Builder {
 public:
  explicit Builder(std::size_t nodes = 3) : store_(nodes) {
    genesis_ = add({}, ProtocolFields{true, 0, 0}, kNoNode, false);
  }

  /// When set, new blocks are only visible to this node.
  std::optional<NodeId> private_to;

  BlockId genesis() const { return genesis_; }
  const DagStore& store() const { return store_; }
  DagView view() const { return DagView(store_); }
  const Block& operator[](BlockId b) const { return store_.block(b); }

  BlockId add(std::vector<BlockId> parents, ProtocolFields f, NodeId miner, bool pow,
              std::optional<std::uint64_t> hash = std::nullopt) {
    const BlockId id = store_.reify(BlockTemplate{std::move(parents), f}, miner, pow, 0.0,
                                    hash ? *hash : next_hash_++);
    for (NodeId i = 0; i < store_.num_nodes(); ++i) {
      if (!private_to || *private_to == i) store_.set_visible(id, i);
    }
    return id;
  }

  /// Tailstorm-style subblock: same height, depth + 1.
  BlockId sub(BlockId parent, NodeId miner, std::optional<std::uint64_t> hash = std::nullopt) {
    const Block& p = store_.block(parent);
    return add({parent}, ProtocolFields{false, p.fields.height, p.fields.depth + 1}, miner, true,
               hash);
  }

  /// B_k vote: parent must be a summary, depth stays 0.
  BlockId vote(BlockId summary, NodeId miner, std::optional<std::uint64_t> hash = std::nullopt) {
    const Block& p = store_.block(summary);
    return add({summary}, ProtocolFields{false, p.fields.height, 0}, miner, true, hash);
  }

  /// Summary over the given leaves, one above the summary they hang off.
  BlockId summary(std::vector<BlockId> leaves, NodeId miner = kNoNode) {
    const BlockId base = last_summary_before(view(), leaves);
    const std::uint32_t h = store_.block(base).fields.height + 1;
    return add(std::move(leaves), ProtocolFields{true, h, 0}, miner, false);
  }

  /// Bitcoin block on `parent`.
  BlockId chain(BlockId parent, NodeId miner, std::optional<std::uint64_t> hash = std::nullopt) {
    const Block& p = store_.block(parent);
    return add({parent}, ProtocolFields{true, p.fields.height + 1, 0}, miner, true, hash);
  }

 private:
  DagStore store_;
  BlockId genesis_;
  std::uint64_t next_hash_ = 1000;
};

/// Brute-force ancestor set via repeated relaxation over the parent relation.
inline std::vector<BlockId> brute_ancestors(const DagStore& store, BlockId b) {
  std::vector<bool> reach(store.size(), false);
  for (BlockId p : store.block(b).parents) reach[p.value] = true;
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::uint32_t i = 0; i < store.size(); ++i) {
      if (!reach[i]) continue;
      for (BlockId p : store.block(BlockId{i}).parents) {
        if (!reach[p.value]) reach[p.value] = changed = true;
      }
    }
  }
  std::vector<BlockId> out;
  for (std::uint32_t i = 0; i < store.size(); ++i) {
    if (reach[i]) out.push_back(BlockId{i});
  }
  return out;
}

/// Random subblock tree of `size` blocks on the genesis summary. Miners are
/// drawn from [0, miners).
inline std::vector<BlockId> random_tree(Builder& dag, std::size_t size, NodeId miners,
                                        std::mt19937_64& rng) {
  std::vector<BlockId> tree;
  for (std::size_t i = 0; i < size; ++i) {
    const std::size_t pick = std::uniform_int_distribution<std::size_t>(0, tree.size())(rng);
    const BlockId parent = pick == tree.size() ? dag.genesis() : tree[pick];
    const NodeId miner = std::uniform_int_distribution<NodeId>(0, miners - 1)(rng);
    tree.push_back(dag.sub(parent, miner, rng()));
  }
  return tree;
}

}  // namespace tailsim::testing

namespace tailsim::testing {

/// Whether `sel` is a k-subtree hanging off summary `base`: every selected
/// block's parent is base or also selected.
inline bool is_subtree(const DagView& view, const std::vector<BlockId>& sel, BlockId base) {
  for (BlockId b : sel) {
    for (BlockId p : view[b].parents) {
      if (p != base && std::find(sel.begin(), sel.end(), p) == sel.end()) return false;
    }
  }
  return true;
}

/// Exhaustive optimum of own blocks over all k-subsets of `candidates` that
/// form a subtree under `base`; -1 if none exists.
inline int best_own_count(const DagView& view, const std::vector<BlockId>& candidates,
                          std::uint32_t k, NodeId self, BlockId base) {
  const std::size_t n = candidates.size();
  int best = -1;
  for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
    if (static_cast<std::uint32_t>(__builtin_popcount(mask)) != k) continue;
    std::vector<BlockId> sel;
    int own = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (mask & (1u << i)) {
        sel.push_back(candidates[i]);
        own += view[candidates[i]].miner == self ? 1 : 0;
      }
    }
    if (is_subtree(view, sel, base)) best = std::max(best, own);
  }
  return best;
}

inline int own_count(const DagView& view, const std::vector<BlockId>& sel, NodeId self) {
  int own = 0;
  for (BlockId b : sel) own += view[b].miner == self ? 1 : 0;
  return own;
}

}  // namespace tailsim::testing
