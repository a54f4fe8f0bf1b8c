#include "slidelm/curation/chat_client.hpp"

#include <cstdlib>
#include <fstream>
#include <thread>
#include <httplib.h>
#include <nlohmann/json.hpp>

#include "slidelm/error.hpp"
#include "slidelm/util/hash.hpp"

namespace slidelm {

std::string request_json(const ChatRequest& r) {
  nlohmann::json msgs = nlohmann::json::array();
  for (const auto& m : r.messages) msgs.push_back({{"role", m.role}, {"content", m.content}});
  return nlohmann::json{{"model", r.model}, {"messages", msgs}, {"temperature", r.temperature}}.dump();
}

std::string request_hash(const ChatRequest& r) { return sha256_hex(request_json(r)); }

std::string FunctionChatClient::complete(const ChatRequest& request) {
  std::lock_guard lock(mu_);
  ++calls_;
  return fn_(request);
}

std::size_t FunctionChatClient::calls() const {
  std::lock_guard lock(mu_);
  return calls_;
}

std::string ScriptedChatClient::complete(const ChatRequest& request) {
  std::lock_guard lock(mu_);
  requests_.push_back(request);
  if (next_ >= replies_.size()) throw ChatError("scripted client exhausted after " + std::to_string(next_) + " replies");
  return replies_[next_++];
}

std::vector<ChatRequest> ScriptedChatClient::requests() const {
  std::lock_guard lock(mu_);
  return requests_;
}

ReplayChatClient::ReplayChatClient(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw LoadError("cannot open replay file " + path);
  std::size_t line_no = 0;
  for (std::string line; std::getline(f, line);) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      replies_[j.at("request_hash").get<std::string>()] = j.at("reply").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw LoadError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

std::string ReplayChatClient::complete(const ChatRequest& request) {
  const auto it = replies_.find(request_hash(request));
  if (it == replies_.end()) throw ChatError("no recorded reply for request " + request_hash(request));
  return it->second;
}

RecordingChatClient::RecordingChatClient(std::shared_ptr<ChatClient> inner, std::string path)
    : inner_(std::move(inner)), path_(std::move(path)) {}

std::string RecordingChatClient::complete(const ChatRequest& request) {
  std::string reply = inner_->complete(request);
  std::lock_guard lock(mu_);
  std::ofstream f(path_, std::ios::app);
  if (!f) throw ChatError("cannot append to replay file " + path_);
  f << nlohmann::json{{"request_hash", request_hash(request)}, {"reply", reply}}.dump() << '\n';
  return reply;
}

HttpChatClient::HttpChatClient(HttpChatConfig cfg) : cfg_(std::move(cfg)) {
  const auto scheme = cfg_.endpoint.find("://");
  if (scheme == std::string::npos) throw ConfigError("chat.endpoint", "expected an absolute http(s) URL");
  const auto slash = cfg_.endpoint.find('/', scheme + 3);
  scheme_host_port_ = cfg_.endpoint.substr(0, slash);
  path_ = slash == std::string::npos ? "/" : cfg_.endpoint.substr(slash);
}

std::string HttpChatClient::parse_response(const std::string& body) {
  try {
    const auto j = nlohmann::json::parse(body);
    return j.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw ChatError(std::string("malformed chat response: ") + e.what());
  }
}

std::string HttpChatClient::complete(const ChatRequest& request) {
  httplib::Client cli(scheme_host_port_);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(cfg_.timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(cfg_.timeout - secs);
  cli.set_connection_timeout(secs.count(), usecs.count());
  cli.set_read_timeout(secs.count(), usecs.count());
  httplib::Headers headers;
  if (!cfg_.api_key_env.empty()) {
    const char* key = std::getenv(cfg_.api_key_env.c_str());
    if (!key || !*key) throw ChatError("environment variable " + cfg_.api_key_env + " is not set");
    headers.emplace("Authorization", std::string("Bearer ") + key);
  }
  const std::string body = request_json(request);
  auto backoff = cfg_.initial_backoff;
  std::string last_error;
  for (std::size_t attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(backoff);
      backoff = std::min(cfg_.max_backoff, backoff * 2);
    }
    auto res = cli.Post(path_, headers, body, "application/json");
    if (!res) {
      last_error = "request failed: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status == 200) return parse_response(res->body);
    last_error = "HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200);
    if (res->status != 429 && res->status < 500) break;
  }
  throw ChatError(last_error);
}

}  // namespace slidelm
