#pragma once

#include <chrono>
#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <vector>

namespace slidelm {

struct ChatMessage {
  std::string role;  // "system" | "user" | "assistant"
  std::string content;
};

struct ChatRequest {
  std::string model;
  std::vector<ChatMessage> messages;
  double temperature = 0.0;
};

/// Canonical JSON of a request, the body sent to chat-completions endpoints.
std::string request_json(const ChatRequest& r);
/// SHA-256 of request_json; keys replay files.
std::string request_hash(const ChatRequest& r);

/// Transport or protocol failure talking to a chat model.
class ChatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Blocking chat-completion interface. Implementations must be safe to call
/// from several threads at once.
class ChatClient {
 public:
  virtual ~ChatClient() = default;
  /// Returns the assistant reply text; throws ChatError on failure.
  virtual std::string complete(const ChatRequest& request) = 0;
};

/// Wraps a callable; serialises calls so the callable need not be thread-safe.
class FunctionChatClient : public ChatClient {
 public:
  explicit FunctionChatClient(std::function<std::string(const ChatRequest&)> fn) : fn_(std::move(fn)) {}
  std::string complete(const ChatRequest& request) override;
  std::size_t calls() const;

 private:
  std::function<std::string(const ChatRequest&)> fn_;
  mutable std::mutex mu_;
  std::size_t calls_ = 0;
};

/// Returns canned replies in order and records every request. Throws
/// ChatError once the script is exhausted.
class ScriptedChatClient : public ChatClient {
 public:
  explicit ScriptedChatClient(std::vector<std::string> replies) : replies_(std::move(replies)) {}
  std::string complete(const ChatRequest& request) override;
  std::vector<ChatRequest> requests() const;

 private:
  std::vector<std::string> replies_;
  std::vector<ChatRequest> requests_;
  std::size_t next_ = 0;
  mutable std::mutex mu_;
};

/// Serves replies recorded in a JSONL file of {"request_hash", "reply"}
/// objects. Unrecorded requests raise ChatError.
class ReplayChatClient : public ChatClient {
 public:
  /// Throws LoadError on a missing or malformed file.
  explicit ReplayChatClient(const std::string& path);
  std::string complete(const ChatRequest& request) override;

 private:
  std::map<std::string, std::string> replies_;
};

/// Forwards to `inner` and appends each (request_hash, reply) pair to a
/// replay file.
class RecordingChatClient : public ChatClient {
 public:
  RecordingChatClient(std::shared_ptr<ChatClient> inner, std::string path);
  std::string complete(const ChatRequest& request) override;

 private:
  std::shared_ptr<ChatClient> inner_;
  std::string path_;
  std::mutex mu_;
};

struct HttpChatConfig {
  std::string endpoint = "https://api.openai.com/v1/chat/completions";
  std::string api_key_env = "OPENAI_API_KEY";  // empty: send no Authorization header
  std::chrono::milliseconds timeout{60000};
  std::size_t max_retries = 3;
  std::chrono::milliseconds initial_backoff{500};
  std::chrono::milliseconds max_backoff{8000};
};

/// OpenAI-style chat-completions client. Retries network errors, 429 and 5xx
/// with exponential backoff capped at max_backoff; other HTTP errors fail
/// immediately.
class HttpChatClient : public ChatClient {
 public:
  explicit HttpChatClient(HttpChatConfig cfg);
  std::string complete(const ChatRequest& request) override;

  /// Extracts choices[0].message.content; throws ChatError otherwise.
  static std::string parse_response(const std::string& body);

 private:
  HttpChatConfig cfg_;
  std::string scheme_host_port_;
  std::string path_;
};

}  // namespace slidelm
