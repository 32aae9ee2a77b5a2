#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace tailsim {

/// Dense block index. Assigned at reification; parents always have smaller ids,
/// so id order is a topological order of the DAG.
struct BlockId {
  std::uint32_t value = 0;

  constexpr auto operator<=>(const BlockId&) const = default;
};

using NodeId = std::uint32_t;

inline constexpr NodeId kNoNode = std::numeric_limits<NodeId>::max();
inline constexpr BlockId kGenesis{0};

struct ProtocolFields {
  bool summary = true;
  std::uint32_t height = 0;
  std::uint32_t depth = 0;

  bool operator==(const ProtocolFields&) const = default;
};

struct BlockTemplate {
  std::vector<BlockId> parents;
  ProtocolFields fields;
};

struct Block {
  BlockId id;
  std::vector<BlockId> parents;
  bool pow = false;
  NodeId miner = kNoNode;
  std::uint64_t hash = 0;
  double reified_at = 0.0;
  ProtocolFields fields;
};

/// Misuse of the DAG API (unknown parent, malformed chain). Indicates a bug,
/// never a protocol-level rejection.
class StructuralError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Query on a block the observer cannot see.
class VisibilityError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Append-only block store with per-node visibility flags.
class DagStore {
 public:
  explicit DagStore(std::size_t num_nodes);

  std::size_t num_nodes() const { return num_nodes_; }
  std::size_t size() const { return blocks_.size(); }

  /// Builds the block a template would become, without appending it. The id is
  /// the one the block receives if committed next.
  Block candidate(const BlockTemplate& tmpl, NodeId miner, bool pow, double now,
                  std::uint64_t hash) const;

  /// Appends a candidate; all parents must exist. Visibility starts false.
  BlockId commit(Block block);

  /// Convenience: candidate + commit.
  BlockId reify(const BlockTemplate& tmpl, NodeId miner, bool pow, double now,
                std::uint64_t hash);

  bool contains(BlockId b) const { return b.value < blocks_.size(); }
  const Block& block(BlockId b) const;
  std::span<const BlockId> children(BlockId b) const;

  bool visible(BlockId b, NodeId node) const {
    return visibility_[static_cast<std::size_t>(b.value) * num_nodes_ + node] != 0;
  }
  void set_visible(BlockId b, NodeId node);

  /// One JSON object per block, in id order.
  void dump_jsonl(std::ostream& out) const;

 private:
  std::size_t num_nodes_;
  std::vector<Block> blocks_;
  std::vector<std::vector<BlockId>> children_;
  std::vector<std::uint8_t> visibility_;
};

/// Visibility-filtered read-only view. `observer == std::nullopt` is the
/// GLOBAL view.
class DagView {
 public:
  explicit DagView(const DagStore& store, std::optional<NodeId> observer = std::nullopt)
      : store_(&store), observer_(observer) {}

  static DagView global(const DagStore& store) { return DagView(store); }

  const DagStore& store() const { return *store_; }
  std::optional<NodeId> observer() const { return observer_; }

  bool contains(BlockId b) const {
    return store_->contains(b) && (!observer_ || store_->visible(b, *observer_));
  }
  /// Throws VisibilityError if b is not visible.
  const Block& block(BlockId b) const;
  /// Unchecked access for hot paths where visibility is already established.
  const Block& operator[](BlockId b) const { return store_->block(b); }

  template <class Fn>
  void for_each_child(BlockId b, Fn&& fn) const {
    for (BlockId c : store_->children(b)) {
      if (!observer_ || store_->visible(c, *observer_)) fn(c);
    }
  }

 private:
  const DagStore* store_;
  std::optional<NodeId> observer_;
};

/// All blocks reachable via parents, excluding b, in ascending id order.
std::vector<BlockId> ancestors(const DagView& view, BlockId b);

/// First summary reached by following first parents from the given parent list.
BlockId last_summary_before(const DagView& view, std::span<const BlockId> parents);
BlockId last_summary_before(const DagView& view, BlockId b);

struct SubblockSpan {
  std::vector<BlockId> subblocks;  // ascending id
  std::vector<BlockId> summaries;  // summaries bounding the span, ascending id
};

/// Non-summary ancestors reachable from `parents` without passing a summary,
/// plus the summaries where the walk stopped.
SubblockSpan subblock_span(const DagView& view, std::span<const BlockId> parents);

/// Non-summary ancestors of b that descend from summary p. Throws
/// StructuralError if p is not the (unique) summary bounding b's subblocks.
std::vector<BlockId> subblocks_between(const DagView& view, BlockId b, BlockId p);

/// Subblocks confirming summary s: non-summary descendants reachable without
/// crossing another summary (R(s)). Ascending id.
std::vector<BlockId> confirming_subblocks(const DagView& view, BlockId s);

/// Largest connected subset of R(s) mined by `owner` (R'(s)). Ascending id.
std::vector<BlockId> owned_confirming_subblocks(const DagView& view, BlockId s, NodeId owner);

/// Maximum depth field over a block set; 0 for the empty set.
std::uint32_t max_depth(const DagView& view, std::span<const BlockId> blocks);

}  // namespace tailsim

template <>
struct std::hash<tailsim::BlockId> {
  std::size_t operator()(tailsim::BlockId b) const noexcept { return b.value; }
};
