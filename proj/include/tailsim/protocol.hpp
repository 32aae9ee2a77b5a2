#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tailsim/dag.hpp"

namespace tailsim {

struct UpdateResult {
  BlockId tip;
  std::vector<BlockId> share;
  std::vector<BlockTemplate> append;
};

struct Reward {
  NodeId miner;
  double amount;
};

enum class ProtocolKind { Bitcoin, Bk, Tailstorm };
enum class RewardScheme { Discount, Constant };

struct ProtocolConfig {
  ProtocolKind kind = ProtocolKind::Bitcoin;
  std::uint32_t k = 1;
  double c = 1.0;
  RewardScheme scheme = RewardScheme::Discount;

  /// "bitcoin", "bk", "tailstorm" or "tsconst".
  std::string name() const;
};

/// Parses a protocol selector. "tsconst" is Tailstorm with constant rewards.
/// Bitcoin forces k = 1. Throws std::invalid_argument on unknown names or bad k.
ProtocolConfig parse_protocol(std::string_view name, std::uint32_t k, double c = 1.0);

/// A consensus protocol: Root/Validate/Update/Extend plus the ranking, progress
/// and reward hooks used by attackers and metrics.
class Protocol {
 public:
  virtual ~Protocol() = default;

  virtual const ProtocolConfig& config() const = 0;
  std::uint32_t k() const { return config().k; }

  virtual BlockTemplate root() const = 0;
  virtual bool validate(const DagView& view, const Block& b) const = 0;
  virtual UpdateResult update(const DagView& view, BlockId tip, BlockId b, NodeId self) const = 0;
  virtual BlockTemplate extend(const DagView& view, BlockId tip) const = 0;

  /// Node-independent part of the preference order: true iff b ranks strictly
  /// above s. Used to compare tips of different nodes.
  virtual bool ranks_above(const DagView& view, BlockId s, BlockId b) const = 0;

  /// PoWs embedded in the chain up to b.
  virtual std::int64_t progress(const Block& b) const = 0;

  /// Whether summaries aggregate PoW subblocks (false for Bitcoin).
  virtual bool has_subblocks() const { return true; }
  /// Whether subblock depth is meaningful (Tailstorm only).
  virtual bool has_depth() const { return false; }

  /// Summary template on `summary` built from a candidate subblock set, as
  /// assembled by `self`; nullopt if there are fewer than k candidates.
  virtual std::optional<BlockTemplate> summary_from(const DagView& view, BlockId summary,
                                                    std::span<const BlockId> candidates,
                                                    NodeId self) const {
    (void)view, (void)summary, (void)candidates, (void)self;
    return std::nullopt;
  }

  /// Rewards minted when `summary` joins the chain (appended to `out`).
  virtual void summary_rewards(const DagView& view, BlockId summary,
                               std::vector<Reward>& out) const = 0;
};

std::unique_ptr<Protocol> make_protocol(const ProtocolConfig& config);

}  // namespace tailsim
