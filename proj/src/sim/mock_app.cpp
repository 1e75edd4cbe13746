#include "aura/sim/mock_app.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

namespace aura::sim {

using nlohmann::json;

const std::set<SemanticPermission>& api_permissions(const std::string& api) {
  using P = SemanticPermission;
  static const std::map<std::string, std::set<P>> kMap = {
      {"messages.send", {P::SEND_MESSAGE}},
      {"messages.read_latest", {P::READ_CONTACTS}},
      {"contacts.read", {P::READ_CONTACTS}},
      {"notes.read", {P::READ_NOTES}},
      {"notes.write", {P::WRITE_STORAGE}},
      {"calendar.read", {P::READ_CALENDAR}},
      {"booking.search", {P::NETWORK_EGRESS}},
      {"booking.pay", {P::PAYMENT}},
      {"alarm.set", {P::MODIFY_SETTINGS}},
      {"settings.set", {P::MODIFY_SETTINGS}},
      {"pkg.install", {P::INSTALL_PACKAGES}},
      {"calc.eval", {}},
      {"social.read_post", {}},
      {"social.comment", {P::NETWORK_EGRESS}},
      {"http.get", {P::NETWORK_EGRESS}},
      {"http.post", {P::NETWORK_EGRESS}},
      {"chatpay.pay", {P::PAYMENT}},
      {"wallet.pay", {P::PAYMENT}},
  };
  static const std::set<P> kNone;
  auto it = kMap.find(api);
  return it != kMap.end() ? it->second : kNone;
}

namespace {

std::string need(const std::map<std::string, std::string>& params, const std::string& key) {
  auto it = params.find(key);
  return it != params.end() ? it->second : std::string{};
}

// Minimal integer expression evaluator: "a op b" with + - *.
std::optional<long> eval_expr(const std::string& expr) {
  std::string cleaned;
  for (char c : expr) {
    if (!std::isspace(static_cast<unsigned char>(c))) cleaned.push_back(c);
  }
  for (size_t i = 1; i < cleaned.size(); ++i) {
    char op = cleaned[i];
    if (op != '+' && op != '-' && op != '*') continue;
    try {
      long a = std::stol(cleaned.substr(0, i));
      long b = std::stol(cleaned.substr(i + 1));
      if (op == '+') return a + b;
      if (op == '-') return a - b;
      return a * b;
    } catch (const std::exception&) {
      return std::nullopt;
    }
  }
  try {
    return std::stol(cleaned);
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

}  // namespace

const json* json_at(const json& root, const std::string& dotted_path) {
  const json* cur = &root;
  std::istringstream in(dotted_path);
  std::string token;
  while (std::getline(in, token, '.')) {
    if (token.empty()) continue;
    bool numeric = !token.empty() &&
                   std::all_of(token.begin(), token.end(),
                               [](char c) { return c >= '0' && c <= '9'; });
    if (numeric && cur->is_array()) {
      size_t idx = std::stoull(token);
      if (idx >= cur->size()) return nullptr;
      cur = &(*cur)[idx];
    } else if (cur->is_object() && cur->contains(token)) {
      cur = &(*cur)[token];
    } else {
      return nullptr;
    }
  }
  return cur;
}

Result<std::string> MockApp::call(const std::string& api,
                                  const std::map<std::string, std::string>& params,
                                  NetworkLog& net) {
  json out;

  if (api == "messages.send") {
    std::string to = need(params, "to");
    state_["threads"][to].push_back(need(params, "body"));
    out = {{"status", "sent"}, {"to", to}};
  } else if (api == "messages.read_latest") {
    if (!state_.contains("inbox") || state_["inbox"].empty()) {
      out = {{"status", "empty"}};
    } else {
      out = state_["inbox"].back();
    }
  } else if (api == "notes.read") {
    std::string title = need(params, "title");
    if (!state_.contains("memos") || !state_["memos"].contains(title)) {
      return {Errc::kBadInput, "no memo titled " + title};
    }
    out = {{"title", title}, {"body", state_["memos"][title]}};
  } else if (api == "notes.write") {
    state_["memos"][need(params, "title")] = need(params, "body");
    out = {{"status", "saved"}};
  } else if (api == "calendar.read") {
    out = state_.contains("calendar") ? state_["calendar"] : json::array();
  } else if (api == "booking.search") {
    std::string host = need(params, "host");
    std::string query = need(params, "query");
    net.deliver(host, "SEARCH " + query, name_);
    out = {{"item", "TX-204"}, {"price", "42"}, {"summary", "train quote for " + query}};
  } else if (api == "booking.pay") {
    state_["bookings"].push_back({{"item", need(params, "item")},
                                  {"amount", need(params, "amount")}});
    out = {{"status", "booked"}, {"item", need(params, "item")}};
  } else if (api == "alarm.set") {
    state_["alarms"].push_back(need(params, "time"));
    out = {{"status", "alarm-set"}, {"time", need(params, "time")}};
  } else if (api == "settings.set") {
    state_["settings"][need(params, "key")] = need(params, "value");
    out = {{"status", "ok"}};
  } else if (api == "pkg.install") {
    state_["packages"].push_back(need(params, "name"));
    out = {{"status", "installed"}};
  } else if (api == "calc.eval") {
    auto v = eval_expr(need(params, "expr"));
    if (!v) return {Errc::kBadInput, "cannot evaluate " + need(params, "expr")};
    out = {{"result", std::to_string(*v)}};
  } else if (api == "social.read_post") {
    std::string author = need(params, "author");
    const json* found = nullptr;
    if (state_.contains("posts")) {
      for (const auto& p : state_["posts"]) {
        if (p.value("author", "") == author) found = &p;
      }
    }
    if (!found) return {Errc::kBadInput, "no post by " + author};
    out = *found;
  } else if (api == "social.comment") {
    std::string host = need(params, "host");
    size_t idx = 0;
    try {
      idx = std::stoull(need(params, "post_id"));
    } catch (const std::exception&) {
      return {Errc::kBadInput, "bad post_id"};
    }
    if (!state_.contains("posts") || idx >= state_["posts"].size()) {
      return {Errc::kBadInput, "no such post"};
    }
    state_["posts"][idx]["comments"].push_back(need(params, "text"));
    net.deliver(host, "COMMENT " + need(params, "text"), name_);
    out = {{"status", "commented"}};
  } else if (api == "http.get") {
    std::string host = need(params, "host");
    net.deliver(host, "GET " + need(params, "path"), name_);
    out = {{"status", "200"}, {"body", "response from " + host}};
  } else if (api == "http.post") {
    std::string host = need(params, "host");
    net.deliver(host, "POST " + need(params, "path") + " " + need(params, "payload"), name_);
    out = {{"status", "200"}};
  } else if (api == "chatpay.pay" || api == "wallet.pay") {
    state_["payments"].push_back({{"payee", need(params, "payee")},
                                  {"amount", need(params, "amount")}});
    out = {{"status", "paid"}};
  } else {
    return {Errc::kBadInput, "unknown api " + api};
  }

  return out.dump();
}

}  // namespace aura::sim
