#include "tailsim/protocol.hpp"

#include <stdexcept>

#include "tailsim/bitcoin.hpp"
#include "tailsim/bk.hpp"
#include "tailsim/tailstorm.hpp"

namespace tailsim {

std::string ProtocolConfig::name() const {
  switch (kind) {
    case ProtocolKind::Bitcoin:
      return "bitcoin";
    case ProtocolKind::Bk:
      return "bk";
    case ProtocolKind::Tailstorm:
      return scheme == RewardScheme::Constant ? "tsconst" : "tailstorm";
  }
  return "unknown";
}

ProtocolConfig parse_protocol(std::string_view name, std::uint32_t k, double c) {
  if (name == "bitcoin") return {ProtocolKind::Bitcoin, 1, 1.0, RewardScheme::Constant};
  if (!(c > 0)) throw std::invalid_argument("reward cap c must be positive");
  if (name == "bk") {
    if (k < 1) throw std::invalid_argument("bk requires k >= 1");
    return {ProtocolKind::Bk, k, c, RewardScheme::Constant};
  }
  if (name == "tailstorm" || name == "tsconst") {
    if (k < 2) throw std::invalid_argument("tailstorm requires k >= 2");
    return {ProtocolKind::Tailstorm, k, c,
            name == "tsconst" ? RewardScheme::Constant : RewardScheme::Discount};
  }
  throw std::invalid_argument("unknown protocol '" + std::string(name) + "'");
}

std::unique_ptr<Protocol> make_protocol(const ProtocolConfig& config) {
  switch (config.kind) {
    case ProtocolKind::Bitcoin:
      return std::make_unique<Bitcoin>();
    case ProtocolKind::Bk:
      return std::make_unique<Bk>(config.k, config.c);
    case ProtocolKind::Tailstorm:
      return std::make_unique<Tailstorm>(TailstormParams{config.k, config.c, config.scheme});
  }
  throw std::invalid_argument("unknown protocol kind");
}

}  // namespace tailsim
