#pragma once

#include <optional>
#include <string>

#include <json.hpp>

#include "tailsim/attacks.hpp"

namespace tailsim {

/// A simulation request as read from a JSON config file.
struct RunRequest {
  SimConfig sim;
  std::optional<NamedPolicy> attacker;  // node 0 follows this policy when set
};

/// Keys: protocol, k, c, n, kappa[], lambda, network{type, delay | epsilon,
/// gamma}, seed, stop{kind, value}, attacker{policy}. Missing optional keys
/// take defaults; unknown values throw ConfigError.
RunRequest parse_run_request(const nlohmann::json& j);

/// Runs the request and summarizes the final state.
nlohmann::json execute_run(const RunRequest& req, std::ostream* dag_dump = nullptr);

}  // namespace tailsim
