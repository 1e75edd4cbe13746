#pragma once

#include <nlohmann/json.hpp>

#include "aura/types.hpp"

namespace aura::sim {

struct NetworkDelivery {
  std::string host;
  std::string payload;
  std::string sender;  // app name
};

// Mock network boundary. The kernel's egress filter decides whether a call
// reaches this point at all; every delivered byte is recorded for the
// soundness checks.
class NetworkLog {
 public:
  void deliver(const std::string& host, const std::string& payload, const std::string& sender) {
    deliveries_.push_back({host, payload, sender});
  }
  const std::vector<NetworkDelivery>& deliveries() const { return deliveries_; }
  std::vector<std::string> payloads_to(const std::string& host) const {
    std::vector<std::string> out;
    for (const auto& d : deliveries_) {
      if (d.host == host) out.push_back(d.payload);
    }
    return out;
  }

 private:
  std::vector<NetworkDelivery> deliveries_;
};

// Per-step permission demand for each structured API.
const std::set<SemanticPermission>& api_permissions(const std::string& api);

// A structured mock application. State changes happen only inside call(),
// which the device invokes strictly after a kernel Decision permits it.
class MockApp {
 public:
  MockApp(std::string name, nlohmann::json initial_state)
      : name_(std::move(name)), state_(std::move(initial_state)) {
    if (state_.is_null()) state_ = nlohmann::json::object();
  }

  const std::string& name() const { return name_; }
  const nlohmann::json& state() const { return state_; }
  nlohmann::json& mutable_state() { return state_; }

  // Returns the structured response payload (JSON text).
  Result<std::string> call(const std::string& api,
                           const std::map<std::string, std::string>& params, NetworkLog& net);

 private:
  std::string name_;
  nlohmann::json state_;
};

// Evaluates a dotted path ("threads.bob.0") against a JSON value; numeric
// tokens index arrays. Returns nullptr when the path does not resolve.
const nlohmann::json* json_at(const nlohmann::json& root, const std::string& dotted_path);

}  // namespace aura::sim
