#include "tailsim/sim.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace tailsim {

NetworkModel NetworkModel::uniform(double delay) {
  if (!(delay >= 0) || !std::isfinite(delay)) {
    throw ConfigError("network delay must be finite and non-negative");
  }
  return NetworkModel(UniformDelay{delay});
}

NetworkModel NetworkModel::attacker(std::size_t n, double epsilon, double gamma) {
  if (!(gamma >= 0 && gamma < 1)) throw ConfigError("gamma must lie in [0, 1)");
  if (!(epsilon > 0)) throw ConfigError("epsilon must be positive");
  // small slack so that exact boundary values such as n = 21, gamma = 0.95 are rejected
  if (!(static_cast<double>(n) > 1.0 / (1.0 - gamma) + 1.0 + 1e-9)) {
    throw ConfigError(fmt::format("attacker network needs n > 1/(1-gamma)+1, got n={} gamma={}", n,
                                  gamma));
  }
  return NetworkModel(AttackerDelay{n, epsilon, gamma});
}

double NetworkModel::delay(NodeId src, NodeId dst, Rng& rng) const {
  if (const auto* u = std::get_if<UniformDelay>(&model_)) return u->delay;
  const auto& a = std::get<AttackerDelay>(model_);
  if (dst == 0) return 0.0;
  if (src != 0) return a.epsilon;
  // gamma = 0: the attacker always arrives after the defender block.
  if (a.gamma == 0) return 2 * a.epsilon;
  const double n = static_cast<double>(a.n);
  const double hi = (n - 2) / (n - 1) * a.epsilon / a.gamma;
  return std::uniform_real_distribution<double>(0.0, hi)(rng);
}

PowSampler::PowSampler(double rate, std::span<const double> weights)
    : delay_(rate), miner_(weights.begin(), weights.end()) {}

PowSampler::Draw PowSampler::next(Rng& rng) {
  const double d = delay_(rng);
  return {d, miner_(rng)};
}

void SimConfig::validate() const {
  if (n < 1) throw ConfigError("need at least one node");
  if (hashrates.size() != n) {
    throw ConfigError(fmt::format("expected {} hashrates, got {}", n, hashrates.size()));
  }
  double total = 0;
  for (double h : hashrates) {
    if (!(h >= 0) || !std::isfinite(h)) throw ConfigError("hashrates must be non-negative");
    total += h;
  }
  if (!(total > 0)) throw ConfigError("total hashrate must be positive");
  if (!(pow_rate > 0) || !std::isfinite(pow_rate)) throw ConfigError("pow rate must be positive");
  if (const auto* a = std::get_if<AttackerDelay>(&network.model()); a && a->n != n) {
    throw ConfigError("attacker network size does not match node count");
  }
  if (!(stop.value >= 0)) throw ConfigError("stop value must be non-negative");
}

BlockTemplate HonestAgent::extend(const DagView& view, BlockId tip) {
  return protocol_->extend(view, tip);
}

bool HonestAgent::begin_update(const NodeContext& ctx, BlockId b) {
  pending_ = protocol_->update(ctx.view, ctx.tips[ctx.self], b, ctx.self);
  return false;
}

UpdateResult HonestAgent::finish_update(const NodeContext&) { return std::move(pending_); }

namespace {

std::uint64_t park_key(BlockId parent, NodeId node) {
  return (static_cast<std::uint64_t>(parent.value) << 32) | node;
}

}  // namespace

Environment::Environment(SimConfig config, const AgentFactory& node0)
    : config_((config.validate(), std::move(config))),
      protocol_(make_protocol(config_.protocol)),
      rng_(config_.seed),
      sampler_(config_.pow_rate, config_.hashrates),
      store_(config_.n) {
  agents_.reserve(config_.n);
  for (std::size_t i = 0; i < config_.n; ++i) {
    if (i == 0 && node0) {
      agents_.push_back(node0(*protocol_));
    } else {
      agents_.push_back(std::make_unique<HonestAgent>(*protocol_));
    }
  }
  const BlockId root = store_.reify(protocol_->root(), kNoNode, false, 0.0, rng_());
  for (NodeId i = 0; i < config_.n; ++i) store_.set_visible(root, i);
  tips_.assign(config_.n, root);
  earliest_.assign(config_.n, -std::numeric_limits<double>::infinity());
}

void Environment::push(double time, EventKind kind, BlockId block, NodeId node) {
  queue_.push(Event{time, seq_++, kind, block, node});
}

void Environment::schedule_delivery(BlockId b, NodeId node, double at) {
  if (store_.visible(b, node)) return;
  const std::size_t idx = static_cast<std::size_t>(b.value) * config_.n + node;
  if (earliest_.size() <= idx) {
    earliest_.resize(store_.size() * config_.n, std::numeric_limits<double>::infinity());
  }
  if (earliest_[idx] <= at) return;
  earliest_[idx] = at;
  push(at, EventKind::Delivery, b, node);
}

void Environment::schedule_pow() {
  const auto draw = sampler_.next(rng_);
  push(now_ + draw.delay, EventKind::Pow, BlockId{0}, draw.miner);
}

bool Environment::stop_reached() const {
  switch (config_.stop.kind) {
    case StopCondition::Kind::Blocks:
      return static_cast<double>(store_.size()) >= config_.stop.value;
    case StopCondition::Kind::Pows:
      return static_cast<double>(stats_.pows) >= config_.stop.value;
    case StopCondition::Kind::Seconds:
      return false;  // checked against the next event time
  }
  return false;
}

// Blocks without PoW are identified by their content: a node that assembles a
// block someone else already appended obtains that block instead of a copy.
std::optional<BlockId> Environment::try_append(const BlockTemplate& tmpl, NodeId node, bool pow) {
  Block cand = store_.candidate(tmpl, node, pow, now_, rng_());
  if (!protocol_->validate(DagView(store_), cand)) {
    ++stats_.invalid_appends;
    return std::nullopt;
  }
  if (pow) return store_.commit(std::move(cand));
  std::vector<std::uint32_t> key;
  key.reserve(tmpl.parents.size() + 3);
  for (BlockId p : tmpl.parents) key.push_back(p.value);
  key.push_back(tmpl.fields.summary ? 1 : 0);
  key.push_back(tmpl.fields.height);
  key.push_back(tmpl.fields.depth);
  if (auto it = by_content_.find(key); it != by_content_.end()) {
    ++stats_.reused_appends;
    return it->second;
  }
  const BlockId id = store_.commit(std::move(cand));
  by_content_.emplace(std::move(key), id);
  return id;
}

bool Environment::process_delivery(BlockId b, NodeId node) {
  if (store_.visible(b, node)) return false;
  for (BlockId p : store_.block(b).parents) {
    if (!store_.visible(p, node)) {
      parked_[park_key(p, node)].push_back(b);
      return false;
    }
  }
  store_.set_visible(b, node);
  ++stats_.deliveries;
  if (auto it = parked_.find(park_key(b, node)); it != parked_.end()) {
    std::vector<BlockId> waiting = std::move(it->second);
    parked_.erase(it);
    for (BlockId c : waiting) push(now_, EventKind::Delivery, c, node);
  }
  DagView v(store_, node);
  if (agents_[node]->begin_update(NodeContext{v, tips_, node, now_}, b)) {
    pending_ = node;
    return true;
  }
  complete_update(node);
  return false;
}

void Environment::complete_update(NodeId node) {
  DagView v(store_, node);
  UpdateResult r = agents_[node]->finish_update(NodeContext{v, tips_, node, now_});
  if (!store_.visible(r.tip, node)) throw VisibilityError("agent chose an invisible tip");
  tips_[node] = r.tip;
  for (BlockId s : r.share) {
    for (NodeId j = 0; j < config_.n; ++j) {
      if (j == node) continue;
      schedule_delivery(s, j, now_ + config_.network.delay(node, j, rng_));
    }
  }
  for (const BlockTemplate& t : r.append) {
    if (auto id = try_append(t, node, false)) immediate_.emplace_back(*id, node);
  }
}

void Environment::handle_pow(NodeId miner) {
  ++stats_.pows;
  DagView v(store_, miner);
  BlockTemplate tmpl = agents_[miner]->extend(v, tips_[miner]);
  if (auto id = try_append(tmpl, miner, true)) immediate_.emplace_back(*id, miner);
}

bool Environment::advance() {
  if (pending_) throw std::logic_error("advance() called while a decision is pending");
  if (done_) return false;
  if (!started_) {
    started_ = true;
    schedule_pow();
  }
  for (;;) {
    if (!immediate_.empty()) {
      auto [b, node] = immediate_.front();
      immediate_.pop_front();
      if (process_delivery(b, node)) return true;
      continue;
    }
    if (stop_reached() || queue_.empty()) {
      done_ = true;
      stats_.elapsed = now_;
      return false;
    }
    const Event ev = queue_.top();
    if (config_.stop.kind == StopCondition::Kind::Seconds && ev.time > config_.stop.value) {
      now_ = config_.stop.value;
      done_ = true;
      stats_.elapsed = now_;
      return false;
    }
    queue_.pop();
    ++stats_.events;
    now_ = ev.time;
    if (ev.kind == EventKind::Pow) {
      handle_pow(ev.node);
      schedule_pow();
    } else if (process_delivery(ev.block, ev.node)) {
      return true;
    }
  }
}

void Environment::resume() {
  if (!pending_) throw std::logic_error("resume() called without a pending decision");
  const NodeId node = *pending_;
  pending_.reset();
  complete_update(node);
}

void Environment::run() {
  while (advance()) {
    throw std::logic_error("agent waits for a decision in a non-interactive run");
  }
}

BlockId Environment::inject(NodeId miner, const BlockTemplate& tmpl, bool pow) {
  if (started_) throw std::logic_error("inject() is only valid before mining starts");
  if (miner >= config_.n) throw std::out_of_range("miner out of range");
  auto id = try_append(tmpl, miner, pow);
  if (!id) throw StructuralError("injected block is invalid");
  if (pow) ++stats_.pows;
  immediate_.emplace_back(*id, miner);
  return *id;
}

void Environment::drain() {
  if (started_) throw std::logic_error("drain() is only valid before mining starts");
  for (;;) {
    if (pending_) throw std::logic_error("drain() cannot handle pending decisions");
    if (!immediate_.empty()) {
      auto [b, node] = immediate_.front();
      immediate_.pop_front();
      if (process_delivery(b, node)) throw std::logic_error("drain() cannot handle decisions");
      continue;
    }
    if (queue_.empty()) return;
    const Event ev = queue_.top();
    queue_.pop();
    ++stats_.events;
    now_ = ev.time;
    if (process_delivery(ev.block, ev.node)) throw std::logic_error("drain() cannot handle decisions");
  }
}

RunResult run(const SimConfig& config) {
  Environment env(config);
  env.run();
  std::vector<BlockId> tips(env.tips().begin(), env.tips().end());
  RunStats stats = env.stats();
  return RunResult{env.release_store(), std::move(tips), stats};
}

}  // namespace tailsim
