#include "tailsim/attacks.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace tailsim {

namespace {

BlockId parent_summary(const DagView& view, BlockId s) { return last_summary_before(view, s); }

BlockId common_summary(const DagView& view, BlockId x, BlockId y) {
  while (x != y) {
    const auto hx = view[x].fields.height;
    const auto hy = view[y].fields.height;
    if (hx >= hy) x = parent_summary(view, x);
    if (hy >= hx) y = parent_summary(view, y);
  }
  return x;
}

std::int64_t depth_of(const DagView& view, const std::vector<BlockId>& set, const Protocol& p) {
  return p.has_depth() ? max_depth(view, set) : 0;
}

}  // namespace

ObservationDetail observe(const DagView& view, BlockId b_a, std::span<const BlockId> defender_tips,
                          const Protocol& protocol, NodeId attacker) {
  std::vector<BlockId> tips;
  for (BlockId t : defender_tips) {
    if (view.contains(t)) tips.push_back(t);
  }
  std::sort(tips.begin(), tips.end());
  tips.erase(std::unique(tips.begin(), tips.end()), tips.end());

  ObservationDetail out;
  out.b_a = b_a;
  out.b_d = b_a;
  std::uint32_t best_fork = std::numeric_limits<std::uint32_t>::max();
  bool have = false;
  for (BlockId t : tips) {
    const std::uint32_t fork = view[common_summary(view, b_a, t)].fields.height;
    if (!have || protocol.ranks_above(view, out.b_d, t) ||
        (!protocol.ranks_above(view, t, out.b_d) && fork < best_fork)) {
      out.b_d = t;
      best_fork = fork;
      have = true;
    }
  }
  out.b_c = common_summary(view, out.b_a, out.b_d);

  const auto hc = static_cast<std::int64_t>(view[out.b_c].fields.height);
  Observation& o = out.obs;
  o.h_a = view[out.b_a].fields.height - hc;
  o.h_d = view[out.b_d].fields.height - hc;
  if (protocol.has_subblocks()) {
    const auto ra = confirming_subblocks(view, out.b_a);
    const auto ra_excl = owned_confirming_subblocks(view, out.b_a, attacker);
    // The defenders' tree only holds blocks some defender has seen.
    auto rd = confirming_subblocks(view, out.b_d);
    const DagStore& store = view.store();
    std::erase_if(rd, [&](BlockId x) {
      for (NodeId i = 0; i < store.num_nodes(); ++i) {
        if (i != attacker && store.visible(x, i)) return false;
      }
      return true;
    });
    o.s_a = static_cast<std::int64_t>(ra.size());
    o.s_a_excl = static_cast<std::int64_t>(ra_excl.size());
    o.s_d = static_cast<std::int64_t>(rd.size());
    o.d_a = depth_of(view, ra, protocol);
    o.d_a_excl = depth_of(view, ra_excl, protocol);
    o.d_d = depth_of(view, rd, protocol);
  }
  return out;
}

std::string to_string(Withhold w) {
  switch (w) {
    case Withhold::Wait:
      return "wait";
    case Withhold::Match:
      return "match";
    case Withhold::Override:
      return "override";
    case Withhold::Adopt:
      return "adopt";
  }
  return "?";
}

std::string to_string(ExtendMode e) {
  return e == ExtendMode::Inclusive ? "inclusive" : "exclusive";
}

Withhold parse_withhold(std::string_view s) {
  if (s == "wait") return Withhold::Wait;
  if (s == "match") return Withhold::Match;
  if (s == "override") return Withhold::Override;
  if (s == "adopt") return Withhold::Adopt;
  throw std::invalid_argument(fmt::format("unknown withhold action '{}'", s));
}

ExtendMode parse_extend(std::string_view s) {
  if (s == "inclusive") return ExtendMode::Inclusive;
  if (s == "exclusive") return ExtendMode::Exclusive;
  throw std::invalid_argument(fmt::format("unknown extend action '{}'", s));
}

Action policy_honest(const Observation& o) {
  return {o.h_d > o.h_a ? Withhold::Adopt : Withhold::Override, ExtendMode::Inclusive};
}

Action policy_get_ahead(const Observation& o) {
  if (o.h_d > o.h_a) return {Withhold::Adopt, ExtendMode::Inclusive};
  if (o.h_d < o.h_a) return {Withhold::Override, ExtendMode::Inclusive};
  return {Withhold::Wait, ExtendMode::Inclusive};
}

// Heights are relative to b_c, so "h_d equals the height of b_c" reads h_d == 0.
Action policy_minor_delay(const Observation& o) {
  if (o.h_d > o.h_a) return {Withhold::Adopt, ExtendMode::Inclusive};
  if (o.h_d == 0) return {Withhold::Wait, ExtendMode::Inclusive};
  return {Withhold::Override, ExtendMode::Inclusive};
}

Action policy_sm1(const Observation& o) {
  if (o.h_d > o.h_a) return {Withhold::Adopt, ExtendMode::Inclusive};
  if (o.h_a == 1 && o.h_d == 1) return {Withhold::Match, ExtendMode::Inclusive};
  if (o.h_d >= 1 && o.h_d == o.h_a - 1) return {Withhold::Override, ExtendMode::Inclusive};
  return {Withhold::Wait, ExtendMode::Inclusive};
}

Action ThresholdPolicy::operator()(const Observation& o) const {
  const ExtendMode ext = exclusive_min_depth > 0 && o.d_a_excl >= exclusive_min_depth
                             ? ExtendMode::Exclusive
                             : ExtendMode::Inclusive;
  const std::int64_t lead = o.h_a - o.h_d;
  if (-lead >= adopt_deficit) return {Withhold::Adopt, ext};
  if (wait_when_defender_idle && o.h_d == 0) return {Withhold::Wait, ext};
  if (lead >= override_lead_min && lead <= override_lead_max) return {Withhold::Override, ext};
  if (lead == 0 && o.h_d >= 1 && o.h_d <= match_max) return {Withhold::Match, ext};
  return {Withhold::Wait, ext};
}

std::string ThresholdPolicy::describe() const {
  return fmt::format("adopt>={} idle_wait={} override=[{},{}] match<={} excl_depth={}",
                     adopt_deficit, wait_when_defender_idle ? 1 : 0, override_lead_min,
                     override_lead_max, match_max, exclusive_min_depth);
}

ThresholdPolicy as_threshold(NamedPolicy p) {
  constexpr int kInf = 1 << 20;
  switch (p) {
    case NamedPolicy::Honest:
      return {1, false, 0, kInf, 0, 0};
    case NamedPolicy::GetAhead:
      return {1, false, 1, kInf, 0, 0};
    case NamedPolicy::MinorDelay:
      return {1, true, 0, kInf, 0, 0};
    case NamedPolicy::Sm1:
      return {1, true, 1, 1, 1, 0};
  }
  throw std::invalid_argument("unknown policy");
}

Action Policy::operator()(const Observation& o) const {
  if (const auto* t = std::get_if<ThresholdPolicy>(&impl_)) return (*t)(o);
  switch (std::get<NamedPolicy>(impl_)) {
    case NamedPolicy::Honest:
      return policy_honest(o);
    case NamedPolicy::GetAhead:
      return policy_get_ahead(o);
    case NamedPolicy::MinorDelay:
      return policy_minor_delay(o);
    case NamedPolicy::Sm1:
      return policy_sm1(o);
  }
  throw std::logic_error("unknown policy");
}

std::string Policy::name() const {
  if (const auto* t = std::get_if<ThresholdPolicy>(&impl_)) return "threshold(" + t->describe() + ")";
  return to_string(std::get<NamedPolicy>(impl_));
}

NamedPolicy parse_policy(std::string_view name) {
  if (name == "honest") return NamedPolicy::Honest;
  if (name == "getahead") return NamedPolicy::GetAhead;
  if (name == "minordelay") return NamedPolicy::MinorDelay;
  if (name == "sm1") return NamedPolicy::Sm1;
  throw std::invalid_argument(fmt::format("unknown policy '{}'", name));
}

std::string to_string(NamedPolicy p) {
  switch (p) {
    case NamedPolicy::Honest:
      return "honest";
    case NamedPolicy::GetAhead:
      return "getahead";
    case NamedPolicy::MinorDelay:
      return "minordelay";
    case NamedPolicy::Sm1:
      return "sm1";
  }
  return "?";
}

// ---------------------------------------------------------------------------

AttackerAgent::AttackerAgent(const Protocol& protocol, NodeId self, std::optional<Policy> policy)
    : protocol_(&protocol), self_(self), policy_(std::move(policy)) {}

BlockTemplate AttackerAgent::extend(const DagView& view, BlockId tip) {
  return protocol_->extend(view, tip);
}

bool AttackerAgent::begin_update(const NodeContext& ctx, BlockId b) {
  const Block& blk = ctx.view[b];
  pref_ = ctx.tips[self_];
  if (blk.miner == self_) {
    withheld_.insert(b);
    if (blk.fields.summary) pref_ = b;
  }
  defender_tips_.clear();
  for (NodeId i = 0; i < ctx.tips.size(); ++i) {
    if (i != self_) defender_tips_.push_back(ctx.tips[i]);
  }
  last_ = observe(ctx.view, pref_, defender_tips_, *protocol_, self_);
  ++decisions_;
  if (policy_) {
    action_ = (*policy_)(last_.obs);
    return false;
  }
  action_.reset();
  return true;
}

UpdateResult AttackerAgent::finish_update(const NodeContext& ctx) {
  if (!action_) throw std::logic_error("attacker update finished without an action");
  const Action a = *action_;
  action_.reset();
  const DagView& view = ctx.view;
  UpdateResult r;

  switch (a.withhold) {
    case Withhold::Adopt:
      pref_ = last_.b_d;
      break;
    case Withhold::Match:
    case Withhold::Override: {
      const std::int64_t limit =
          protocol_->progress(view[last_.b_d]) + (a.withhold == Withhold::Override ? 1 : 0);
      for (BlockId x : withheld_) {
        if (protocol_->progress(view[x]) <= limit) r.share.push_back(x);
      }
      // Too short to race or override: release everything.
      if (r.share.empty()) r.share.assign(withheld_.begin(), withheld_.end());
      for (BlockId x : r.share) withheld_.erase(x);
      break;
    }
    case Withhold::Wait:
      break;
  }

  if (protocol_->has_subblocks()) {
    const std::vector<BlockId> candidates = a.extend == ExtendMode::Inclusive
                                                ? confirming_subblocks(view, pref_)
                                                : owned_confirming_subblocks(view, pref_, self_);
    if (auto t = protocol_->summary_from(view, pref_, candidates, self_)) {
      r.append.push_back(std::move(*t));
    }
  }
  r.tip = pref_;
  return r;
}

// ---------------------------------------------------------------------------

SimConfig make_attack_config(const AttackScenario& s, std::uint64_t seed) {
  if (!(s.alpha > 0 && s.alpha < 1)) throw ConfigError("alpha must lie in (0, 1)");
  if (s.n < 2) throw ConfigError("attack scenarios need at least one defender");
  SimConfig c;
  c.protocol = s.protocol;
  c.n = s.n;
  c.hashrates.assign(s.n, (1.0 - s.alpha) / static_cast<double>(s.n - 1));
  c.hashrates[0] = s.alpha;
  c.pow_rate = s.pow_rate;
  c.network = NetworkModel::attacker(s.n, s.epsilon.value_or(default_epsilon(s.pow_rate)), s.gamma);
  c.seed = seed;
  c.stop = s.stop;
  return c;
}

AttackOutcome evaluate_outcome(const Environment& env) {
  const DagView global(env.store());
  AttackOutcome out;
  out.tip = winning_chain(global, env.protocol());
  const RewardLedger ledger =
      accumulate_rewards(global, out.tip, env.protocol(), env.config().n);
  out.normalized_reward = normalized_reward(ledger, 0);
  out.orphans = count_orphans(global, out.tip);
  out.simulated_seconds = env.now();
  return out;
}

AttackOutcome run_attack(const AttackScenario& s, const Policy& policy, std::uint64_t seed) {
  Environment env(make_attack_config(s, seed), [&](const Protocol& p) {
    return std::make_unique<AttackerAgent>(p, 0, policy);
  });
  env.run();
  return evaluate_outcome(env);
}

// ---------------------------------------------------------------------------

Observation Episode::reset(const AttackScenario& s, std::uint64_t seed) {
  attacker_ = nullptr;
  env_ = std::make_unique<Environment>(make_attack_config(s, seed), [this](const Protocol& p) {
    auto agent = std::make_unique<AttackerAgent>(p, 0, std::nullopt);
    attacker_ = agent.get();
    return agent;
  });
  tracker_ = std::make_unique<RewardTracker>(env_->protocol(), 0);
  value_ = 0;
  done_ = false;
  if (!env_->advance()) {
    done_ = true;
    value_ = current_value();
    return Observation{};
  }
  return attacker_->last_observation().obs;
}

double Episode::current_value() {
  if (done_) {
    const DagView global(env_->store());
    const BlockId tip = winning_chain(global, env_->protocol());
    // runs too short to make progress end at zero
    if (env_->protocol().progress(global[tip]) <= 0) return 0.0;
    return evaluate_outcome(*env_).normalized_reward;
  }
  return tracker_->normalized(DagView(env_->store()), attacker_->last_observation().b_c);
}

StepResult Episode::step(Action a) {
  if (!env_) throw EpisodeError("step() before reset()");
  if (done_) throw EpisodeError("step() after the episode is done");
  attacker_->set_action(a);
  env_->resume();
  if (!env_->advance()) done_ = true;
  const double v = current_value();
  StepResult r{attacker_->last_observation().obs, v - value_, done_};
  value_ = v;
  return r;
}

const Environment& Episode::env() const {
  if (!env_) throw EpisodeError("no active episode");
  return *env_;
}

// ---------------------------------------------------------------------------

std::uint64_t mix_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b) {
  auto splitmix = [](std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  };
  return splitmix(splitmix(splitmix(base) ^ a) ^ b);
}

namespace {

ThresholdPolicy random_policy(Rng& rng, std::uint32_t k) {
  std::uniform_int_distribution<int> small(0, 3);
  ThresholdPolicy p;
  p.adopt_deficit = 1 + small(rng) % 3;
  p.wait_when_defender_idle = small(rng) % 2 == 0;
  p.override_lead_min = small(rng);
  p.override_lead_max = small(rng) == 3 ? (1 << 20) : p.override_lead_min + small(rng);
  p.match_max = small(rng) % 3;
  p.exclusive_min_depth =
      k > 1 && small(rng) == 0 ? std::uniform_int_distribution<int>(1, static_cast<int>(k))(rng)
                               : 0;
  return p;
}

ThresholdPolicy mutate(ThresholdPolicy p, Rng& rng, std::uint32_t k) {
  std::uniform_int_distribution<int> which(0, 5);
  std::uniform_int_distribution<int> step(0, 1);
  const int d = step(rng) == 0 ? -1 : 1;
  switch (which(rng)) {
    case 0:
      p.adopt_deficit = std::clamp(p.adopt_deficit + d, 1, 4);
      break;
    case 1:
      p.wait_when_defender_idle = !p.wait_when_defender_idle;
      break;
    case 2:
      p.override_lead_min = std::clamp(p.override_lead_min + d, 0, 4);
      p.override_lead_max = std::max(p.override_lead_max, p.override_lead_min);
      break;
    case 3:
      if (p.override_lead_max >= (1 << 20)) {
        p.override_lead_max = p.override_lead_min + 2;
      } else if (d > 0 && p.override_lead_max >= p.override_lead_min + 4) {
        p.override_lead_max = 1 << 20;
      } else {
        p.override_lead_max = std::max(p.override_lead_min, p.override_lead_max + d);
      }
      break;
    case 4:
      p.match_max = std::clamp(p.match_max + d, 0, 3);
      break;
    default:
      p.exclusive_min_depth =
          std::clamp(p.exclusive_min_depth + d, 0, static_cast<int>(std::max<std::uint32_t>(k, 1)));
      break;
  }
  return p;
}

}  // namespace

SearchResult threshold_search(const AttackScenario& s, const SearchBudget& budget,
                              std::uint64_t seed, std::vector<ThresholdPolicy> seeds) {
  if (budget.candidates == 0 || budget.runs == 0) {
    throw std::invalid_argument("search budget must be positive");
  }
  if (seeds.empty()) {
    seeds.push_back(as_threshold(NamedPolicy::Honest));
    if (s.protocol.kind == ProtocolKind::Bitcoin) {
      seeds.push_back(as_threshold(NamedPolicy::Sm1));
    } else {
      seeds.push_back(as_threshold(NamedPolicy::MinorDelay));
    }
    seeds.push_back(as_threshold(NamedPolicy::GetAhead));
  }
  const std::uint32_t k = s.protocol.k;

  SearchResult result;
  auto evaluate = [&](const ThresholdPolicy& p) {
    double sum = 0;
    for (std::size_t r = 0; r < budget.runs; ++r) {
      sum += run_attack(s, Policy(p), mix_seed(seed, r)).normalized_reward;
    }
    ScoredPolicy scored{p, sum / static_cast<double>(budget.runs)};
    result.evaluated.push_back(scored);
    if (result.evaluated.size() == 1 || scored.score > result.best.score) result.best = scored;
  };
  auto seen = [&](const ThresholdPolicy& p) {
    return std::any_of(result.evaluated.begin(), result.evaluated.end(),
                       [&](const ScoredPolicy& e) { return e.policy == p; });
  };

  for (const ThresholdPolicy& p : seeds) {
    if (result.evaluated.size() >= budget.candidates) break;
    if (!seen(p)) evaluate(p);
  }
  Rng rng(mix_seed(seed, 0x5ea4c4));
  std::size_t attempts = 0;
  while (result.evaluated.size() < budget.candidates && attempts < 100 * budget.candidates) {
    ++attempts;
    ThresholdPolicy p = std::uniform_real_distribution<double>(0, 1)(rng) < 0.7
                            ? mutate(result.best.policy, rng, k)
                            : random_policy(rng, k);
    if (!seen(p)) evaluate(p);
  }
  return result;
}

}  // namespace tailsim
