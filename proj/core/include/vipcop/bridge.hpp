#pragma once

#include <condition_variable>
#include <cstdint>
#include <memory>
#include <mutex>
#include <string>
#include <sys/types.h>
#include <vector>

#include <nlohmann/json.hpp>

#include "vipcop/evaluator.hpp"

namespace vipcop {

inline constexpr int kBridgeProtocol = 1;

// Wire messages of the newline-delimited JSON bridge protocol.
nlohmann::json make_hello();
nlohmann::json make_bye();
nlohmann::json make_predict_request(std::uint64_t id, const Table& train,
                                    const ContextSelection& ctx, const Table& query);
// Decodes a response to request `id`. A {"type":"error"} reply whose message
// is "capacity" becomes CapacityExceeded, any other error or malformed reply
// EvaluatorError. Rows are validated and renormalized per validate_prediction.
Prediction parse_predict_response(const nlohmann::json& response, std::uint64_t id,
                                  std::size_t rows, std::size_t classes);

// One child process speaking the protocol over its stdin/stdout. The command
// runs under /bin/sh. One request in flight at a time.
class BridgeSession {
 public:
  BridgeSession(const std::string& command, double timeout_seconds);
  ~BridgeSession();
  BridgeSession(const BridgeSession&) = delete;
  BridgeSession& operator=(const BridgeSession&) = delete;

  const std::string& bridge_name() const { return name_; }

  // Sends one message and waits for one reply line.
  nlohmann::json round_trip(const nlohmann::json& message);

  // Sends bye and waits for the child; returns its exit status (or -1 if it
  // had to be killed). Idempotent.
  int shutdown();

 private:
  void send_line(const std::string& line);
  std::string read_line();
  void kill_child();

  pid_t pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  double timeout_;
  std::string buffer_;
  std::string name_;
  int exit_status_ = -1;
};

struct BridgeOptions {
  std::string command;
  double timeout_seconds = 120.0;
  std::size_t connections = 1;
};

// Evaluator backed by a pool of bridge sessions, started lazily. A session
// that times out or violates the protocol is discarded.
class BridgeEvaluator final : public Evaluator {
 public:
  explicit BridgeEvaluator(BridgeOptions options);
  ~BridgeEvaluator() override;
  std::string name() const override { return "bridge(" + options_.command + ")"; }

  // Shuts down all idle sessions; returns the exit statuses.
  std::vector<int> shutdown();

 protected:
  Prediction predict(const Table& train, const ContextSelection& ctx,
                     const Table& query) const override;

 private:
  std::unique_ptr<BridgeSession> acquire() const;
  void release(std::unique_ptr<BridgeSession> session) const;

  BridgeOptions options_;
  mutable std::mutex mutex_;
  mutable std::condition_variable available_;
  mutable std::vector<std::unique_ptr<BridgeSession>> idle_;
  mutable std::size_t live_ = 0;
  mutable std::uint64_t next_id_ = 1;
};

}  // namespace vipcop
