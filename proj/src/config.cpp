#include "tailsim/config.hpp"

#include <fmt/format.h>

#include <ostream>

namespace tailsim {

namespace {

template <class T>
T get_or(const nlohmann::json& j, const char* key, T fallback) {
  return j.contains(key) ? j.at(key).get<T>() : fallback;
}

StopCondition parse_stop(const nlohmann::json& j) {
  StopCondition s;
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "blocks") {
    s.kind = StopCondition::Kind::Blocks;
  } else if (kind == "pows") {
    s.kind = StopCondition::Kind::Pows;
  } else if (kind == "seconds") {
    s.kind = StopCondition::Kind::Seconds;
  } else {
    throw ConfigError(fmt::format("unknown stop kind '{}'", kind));
  }
  s.value = j.at("value").get<double>();
  return s;
}

}  // namespace

RunRequest parse_run_request(const nlohmann::json& j) {
  try {
    RunRequest req;
    SimConfig& c = req.sim;
    c.protocol = parse_protocol(j.at("protocol").get<std::string>(),
                                get_or<std::uint32_t>(j, "k", 1), get_or<double>(j, "c", 1.0));
    c.n = j.at("n").get<std::size_t>();
    c.hashrates = j.contains("kappa") ? j.at("kappa").get<std::vector<double>>()
                                      : std::vector<double>(c.n, 1.0);
    c.pow_rate = get_or<double>(j, "lambda", 1.0);
    c.seed = get_or<std::uint64_t>(j, "seed", 0);
    c.stop = parse_stop(j.at("stop"));
    const nlohmann::json net = j.value("network", nlohmann::json{{"type", "uniform"}});
    const auto type = net.at("type").get<std::string>();
    if (type == "uniform") {
      c.network = NetworkModel::uniform(get_or<double>(net, "delay", 0.0));
    } else if (type == "attacker") {
      c.network = NetworkModel::attacker(
          c.n, get_or<double>(net, "epsilon", default_epsilon(c.pow_rate)), net.at("gamma").get<double>());
    } else {
      throw ConfigError(fmt::format("unknown network type '{}'", type));
    }
    if (j.contains("attacker")) req.attacker = parse_policy(j.at("attacker").at("policy").get<std::string>());
    c.validate();
    return req;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

nlohmann::json execute_run(const RunRequest& req, std::ostream* dag_dump) {
  AgentFactory factory;
  if (req.attacker) {
    const Policy policy(*req.attacker);
    factory = [policy](const Protocol& p) { return std::make_unique<AttackerAgent>(p, 0, policy); };
  }
  Environment env(req.sim, factory);
  env.run();
  const DagView global(env.store());
  const BlockId tip = winning_chain(global, env.protocol());
  const RewardLedger ledger = accumulate_rewards(global, tip, env.protocol(), req.sim.n);
  const OrphanCount orphans = count_orphans(global, tip);
  if (dag_dump) env.store().dump_jsonl(*dag_dump);

  nlohmann::json tips = nlohmann::json::array();
  for (BlockId t : env.tips()) tips.push_back(t.value);
  return {{"protocol", req.sim.protocol.name()},
          {"k", req.sim.protocol.k},
          {"n", req.sim.n},
          {"seed", req.sim.seed},
          {"blocks", env.store().size()},
          {"pows", env.stats().pows},
          {"events", env.stats().events},
          {"deliveries", env.stats().deliveries},
          {"simulated_seconds", env.now()},
          {"tips", tips},
          {"winning_tip", tip.value},
          {"winning_height", global[tip].fields.height},
          {"progress", ledger.progress},
          {"rewards", ledger.per_miner},
          {"orphans", {{"orphaned", orphans.orphaned},
                       {"confirmed", orphans.confirmed},
                       {"pending", orphans.pending},
                       {"rate", orphans.rate()}}}};
}

}  // namespace tailsim
