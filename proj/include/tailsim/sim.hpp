#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <queue>
#include <random>
#include <span>
#include <stdexcept>
#include <unordered_map>
#include <variant>
#include <vector>

#include "tailsim/dag.hpp"
#include "tailsim/protocol.hpp"

namespace tailsim {

using Rng = std::mt19937_64;

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// ---------------------------------------------------------------------------
// Network

/// Every message takes the same time.
struct UniformDelay {
  double delay = 0.0;
};

/// Node 0 is the attacker. It receives everything instantly; defenders talk to
/// each other with delay epsilon; attacker messages to defenders take
/// U[0, (n-2)/(n-1) * epsilon/gamma], which makes gamma the attacker's share
/// of defenders won in a block race.
struct AttackerDelay {
  std::size_t n = 0;
  double epsilon = 0.0;
  double gamma = 0.0;
};

class NetworkModel {
 public:
  static NetworkModel uniform(double delay);
  /// Throws ConfigError unless n > 1/(1-gamma) + 1, epsilon > 0, gamma in [0,1).
  static NetworkModel attacker(std::size_t n, double epsilon, double gamma);

  double delay(NodeId src, NodeId dst, Rng& rng) const;

  const std::variant<UniformDelay, AttackerDelay>& model() const { return model_; }
  bool is_attacker_model() const { return std::holds_alternative<AttackerDelay>(model_); }

 private:
  explicit NetworkModel(std::variant<UniformDelay, AttackerDelay> m) : model_(m) {}
  std::variant<UniformDelay, AttackerDelay> model_;
};

// ---------------------------------------------------------------------------
// Mining

/// Samples (delay, miner) pairs: delay ~ Expon(rate), miner ~ Discrete(weights).
class PowSampler {
 public:
  PowSampler(double rate, std::span<const double> weights);

  struct Draw {
    double delay;
    NodeId miner;
  };
  Draw next(Rng& rng);

 private:
  std::exponential_distribution<double> delay_;
  std::discrete_distribution<NodeId> miner_;
};

// ---------------------------------------------------------------------------
// Configuration

struct StopCondition {
  enum class Kind { Blocks, Pows, Seconds };
  Kind kind = Kind::Blocks;
  double value = 0;
};

struct SimConfig {
  ProtocolConfig protocol;
  std::size_t n = 1;
  std::vector<double> hashrates{1.0};
  double pow_rate = 1.0;
  NetworkModel network = NetworkModel::uniform(0.0);
  std::uint64_t seed = 0;
  StopCondition stop;

  /// Throws ConfigError on violated constraints.
  void validate() const;
};

/// Default defender-to-defender delay for attack networks: 1e-6 mining intervals.
inline double default_epsilon(double pow_rate) { return 1e-6 / pow_rate; }

// ---------------------------------------------------------------------------
// Agents

struct NodeContext {
  const DagView& view;
  std::span<const BlockId> tips;
  NodeId self;
  double now;
};

/// Behaviour of one node. Updates run in two phases so that an outside
/// controller can decide between them; agents that decide on their own return
/// false from begin_update.
class Agent {
 public:
  virtual ~Agent() = default;
  virtual BlockTemplate extend(const DagView& view, BlockId tip) = 0;
  /// Returns true if the update waits for an external decision.
  virtual bool begin_update(const NodeContext& ctx, BlockId b) = 0;
  virtual UpdateResult finish_update(const NodeContext& ctx) = 0;
};

class HonestAgent final : public Agent {
 public:
  explicit HonestAgent(const Protocol& protocol) : protocol_(&protocol) {}
  BlockTemplate extend(const DagView& view, BlockId tip) override;
  bool begin_update(const NodeContext& ctx, BlockId b) override;
  UpdateResult finish_update(const NodeContext& ctx) override;

 private:
  const Protocol* protocol_;
  UpdateResult pending_;
};

/// Builds the agent for node 0 once the environment's protocol exists.
using AgentFactory = std::function<std::unique_ptr<Agent>(const Protocol&)>;

// ---------------------------------------------------------------------------
// Engine

struct RunStats {
  std::uint64_t pows = 0;
  std::uint64_t deliveries = 0;  // first-time visibilities
  std::uint64_t events = 0;
  std::uint64_t invalid_appends = 0;
  std::uint64_t reused_appends = 0;  // append requests matching an existing block
  double elapsed = 0.0;
};

/// Discrete-event realization of the virtual environment. Events run in
/// (time, seq) order; appends and self-deliveries cascade within an event.
class Environment {
 public:
  /// `node0` replaces the honest agent of node 0 (the attacker slot).
  explicit Environment(SimConfig config, const AgentFactory& node0 = {});

  Environment(const Environment&) = delete;
  Environment& operator=(const Environment&) = delete;

  /// Runs until an agent waits for a decision (true) or the stop condition
  /// holds (false).
  bool advance();
  /// Completes the pending update after an external decision.
  void resume();
  bool waiting() const { return pending_.has_value(); }
  bool done() const { return done_; }

  /// Runs to completion; agents must not wait for external decisions.
  void run();

  // Manual driving, used for staged scenarios. Only valid before the PoW loop
  // has started (i.e. before the first advance()).
  BlockId inject(NodeId miner, const BlockTemplate& tmpl, bool pow);
  /// Processes all queued deliveries without mining.
  void drain();

  const SimConfig& config() const { return config_; }
  const Protocol& protocol() const { return *protocol_; }
  const DagStore& store() const { return store_; }
  DagStore release_store() { return std::move(store_); }
  DagView view(NodeId node) const { return DagView(store_, node); }
  std::span<const BlockId> tips() const { return tips_; }
  BlockId tip(NodeId node) const { return tips_.at(node); }
  double now() const { return now_; }
  const RunStats& stats() const { return stats_; }
  Agent& agent(NodeId node) { return *agents_.at(node); }

 private:
  enum class EventKind : std::uint8_t { Pow, Delivery };
  struct Event {
    double time;
    std::uint64_t seq;
    EventKind kind;
    BlockId block;
    NodeId node;
    bool operator>(const Event& o) const {
      return time != o.time ? time > o.time : seq > o.seq;
    }
  };

  void push(double time, EventKind kind, BlockId block, NodeId node);
  void schedule_delivery(BlockId b, NodeId node, double at);
  void schedule_pow();
  bool stop_reached() const;
  /// Returns true if the node's agent now waits for a decision.
  bool process_delivery(BlockId b, NodeId node);
  void complete_update(NodeId node);
  void handle_pow(NodeId miner);
  std::optional<BlockId> try_append(const BlockTemplate& tmpl, NodeId node, bool pow);

  SimConfig config_;
  std::unique_ptr<Protocol> protocol_;
  std::vector<std::unique_ptr<Agent>> agents_;
  Rng rng_;
  PowSampler sampler_;
  DagStore store_;
  std::vector<BlockId> tips_;
  std::priority_queue<Event, std::vector<Event>, std::greater<>> queue_;
  std::deque<std::pair<BlockId, NodeId>> immediate_;
  std::vector<double> earliest_;  // earliest scheduled delivery per (block, node)
  std::unordered_map<std::uint64_t, std::vector<BlockId>> parked_;
  // PoW-free blocks by content (parents, summary, height, depth)
  std::map<std::vector<std::uint32_t>, BlockId> by_content_;
  std::optional<NodeId> pending_;
  std::uint64_t seq_ = 0;
  double now_ = 0.0;
  bool started_ = false;
  bool done_ = false;
  RunStats stats_;
};

struct RunResult {
  DagStore store;
  std::vector<BlockId> tips;
  RunStats stats;
};

/// Honest network run to the stop condition.
RunResult run(const SimConfig& config);

}  // namespace tailsim
