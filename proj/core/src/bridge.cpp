#include "vipcop/bridge.hpp"

#include <cerrno>
#include <chrono>
#include <csignal>
#include <cstring>
#include <thread>

#include <fcntl.h>
#include <poll.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include "vipcop/error.hpp"

extern char** environ;

namespace vipcop {

using nlohmann::json;

json make_hello() { return {{"type", "hello"}, {"protocol", kBridgeProtocol}}; }

json make_bye() { return {{"type", "bye"}}; }

json make_predict_request(std::uint64_t id, const Table& train, const ContextSelection& ctx,
                          const Table& query) {
  json context_x = json::array();
  json context_y = json::array();
  for (std::size_t r : ctx.samples) {
    json row = json::array();
    for (std::size_t c : ctx.features) row.push_back(train.at(r, c));
    context_x.push_back(std::move(row));
    context_y.push_back(train.label(r));
  }
  json query_x = json::array();
  for (std::size_t r = 0; r < query.rows(); ++r) {
    json row = json::array();
    for (std::size_t c : ctx.features) row.push_back(query.at(r, c));
    query_x.push_back(std::move(row));
  }
  return {{"type", "predict"},
          {"id", id},
          {"context_x", std::move(context_x)},
          {"context_y", std::move(context_y)},
          {"query_x", std::move(query_x)},
          {"n_classes", train.class_count()}};
}

Prediction parse_predict_response(const json& response, std::uint64_t id, std::size_t rows,
                                  std::size_t classes) {
  if (!response.is_object() || !response.contains("type") || !response["type"].is_string()) {
    throw EvaluatorError("bridge: response without a type field");
  }
  const std::string type = response["type"];
  if (type == "error") {
    const std::string message = response.value("message", std::string("unspecified"));
    if (message == "capacity") throw CapacityExceeded("bridge: capacity");
    throw EvaluatorError("bridge error: " + message);
  }
  if (type != "proba") throw EvaluatorError("bridge: unexpected response type '" + type + "'");
  if (!response.contains("id") || !response["id"].is_number_integer() ||
      response["id"].get<std::int64_t>() < 0 || response["id"].get<std::uint64_t>() != id) {
    throw EvaluatorError("bridge: response id does not match request " + std::to_string(id));
  }
  const auto& proba = response.at("proba");
  if (!proba.is_array() || proba.size() != rows) {
    throw EvaluatorError("bridge: expected " + std::to_string(rows) + " probability rows");
  }
  Prediction pred(rows, classes);
  for (std::size_t r = 0; r < rows; ++r) {
    const auto& row = proba[r];
    if (!row.is_array() || row.size() != classes) {
      throw EvaluatorError("bridge: probability row " + std::to_string(r) + " has wrong width");
    }
    for (std::size_t c = 0; c < classes; ++c) {
      if (!row[c].is_number()) throw EvaluatorError("bridge: non-numeric probability");
      pred.row(r)[c] = row[c].get<double>();
    }
  }
  validate_prediction(pred);
  return pred;
}

namespace {

void ignore_sigpipe() {
  static std::once_flag once;
  std::call_once(once, [] { std::signal(SIGPIPE, SIG_IGN); });
}

}  // namespace

BridgeSession::BridgeSession(const std::string& command, double timeout_seconds)
    : timeout_(timeout_seconds) {
  if (!(timeout_ > 0)) throw ConfigError("bridge: timeout must be positive");
  ignore_sigpipe();
  int in_pipe[2];
  int out_pipe[2];
  if (pipe2(in_pipe, O_CLOEXEC) != 0 || pipe2(out_pipe, O_CLOEXEC) != 0) {
    throw EvaluatorError(std::string("bridge: pipe failed: ") + std::strerror(errno));
  }
  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_adddup2(&actions, in_pipe[0], STDIN_FILENO);
  posix_spawn_file_actions_adddup2(&actions, out_pipe[1], STDOUT_FILENO);
  const std::string script = "exec " + command;
  char* argv[] = {const_cast<char*>("sh"), const_cast<char*>("-c"),
                  const_cast<char*>(script.c_str()), nullptr};
  const int rc = posix_spawn(&pid_, "/bin/sh", &actions, nullptr, argv, environ);
  posix_spawn_file_actions_destroy(&actions);
  close(in_pipe[0]);
  close(out_pipe[1]);
  to_child_ = in_pipe[1];
  from_child_ = out_pipe[0];
  if (rc != 0) {
    close(to_child_);
    close(from_child_);
    pid_ = -1;
    throw EvaluatorError(std::string("bridge: spawn failed: ") + std::strerror(rc));
  }
  try {
    const json reply = round_trip(make_hello());
    if (reply.value("type", "") != "hello" || reply.value("protocol", -1) != kBridgeProtocol) {
      throw EvaluatorError("bridge: bad handshake reply " + reply.dump());
    }
    name_ = reply.value("name", std::string("unnamed"));
  } catch (...) {
    kill_child();
    throw;
  }
}

BridgeSession::~BridgeSession() {
  try {
    shutdown();
  } catch (...) {
    kill_child();
  }
}

void BridgeSession::send_line(const std::string& line) {
  std::string data = line + "\n";
  const char* p = data.data();
  std::size_t left = data.size();
  while (left > 0) {
    const ssize_t w = write(to_child_, p, left);
    if (w < 0) {
      if (errno == EINTR) continue;
      throw EvaluatorError(std::string("bridge: write failed: ") + std::strerror(errno));
    }
    p += w;
    left -= static_cast<std::size_t>(w);
  }
}

std::string BridgeSession::read_line() {
  using clock = std::chrono::steady_clock;
  const auto deadline = clock::now() + std::chrono::duration<double>(timeout_);
  char chunk[65536];
  while (true) {
    const auto nl = buffer_.find('\n');
    if (nl != std::string::npos) {
      std::string line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      return line;
    }
    const auto remaining =
        std::chrono::duration_cast<std::chrono::milliseconds>(deadline - clock::now()).count();
    if (remaining <= 0) throw EvaluatorError("bridge: timeout waiting for response");
    pollfd pfd{from_child_, POLLIN, 0};
    const int ready = poll(&pfd, 1, static_cast<int>(std::min<long long>(remaining, 1 << 30)));
    if (ready < 0) {
      if (errno == EINTR) continue;
      throw EvaluatorError(std::string("bridge: poll failed: ") + std::strerror(errno));
    }
    if (ready == 0) continue;
    const ssize_t r = read(from_child_, chunk, sizeof(chunk));
    if (r < 0) {
      if (errno == EINTR) continue;
      throw EvaluatorError(std::string("bridge: read failed: ") + std::strerror(errno));
    }
    if (r == 0) throw EvaluatorError("bridge: child closed its output");
    buffer_.append(chunk, static_cast<std::size_t>(r));
  }
}

json BridgeSession::round_trip(const json& message) {
  if (pid_ < 0) throw EvaluatorError("bridge: session is closed");
  send_line(message.dump());
  const std::string line = read_line();
  try {
    return json::parse(line);
  } catch (const json::parse_error&) {
    throw EvaluatorError("bridge: malformed JSON response: " + line.substr(0, 200));
  }
}

void BridgeSession::kill_child() {
  if (pid_ > 0) {
    ::kill(pid_, SIGKILL);
    int status = 0;
    waitpid(pid_, &status, 0);
    pid_ = -1;
    exit_status_ = -1;
  }
  if (to_child_ >= 0) close(to_child_);
  if (from_child_ >= 0) close(from_child_);
  to_child_ = from_child_ = -1;
}

int BridgeSession::shutdown() {
  if (pid_ < 0) return exit_status_;
  try {
    send_line(make_bye().dump());
  } catch (const EvaluatorError&) {
  }
  close(to_child_);
  to_child_ = -1;
  using clock = std::chrono::steady_clock;
  const auto deadline = clock::now() + std::chrono::duration<double>(std::min(timeout_, 10.0));
  while (clock::now() < deadline) {
    int status = 0;
    const pid_t done = waitpid(pid_, &status, WNOHANG);
    if (done == pid_) {
      pid_ = -1;
      exit_status_ = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
      close(from_child_);
      from_child_ = -1;
      return exit_status_;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(2));
  }
  kill_child();
  return exit_status_;
}

BridgeEvaluator::BridgeEvaluator(BridgeOptions options) : options_(std::move(options)) {
  if (options_.command.empty()) throw ConfigError("bridge: empty command");
  if (options_.connections < 1) throw ConfigError("bridge: connections must be at least 1");
  if (!(options_.timeout_seconds > 0)) throw ConfigError("bridge: timeout must be positive");
}

BridgeEvaluator::~BridgeEvaluator() { shutdown(); }

std::vector<int> BridgeEvaluator::shutdown() {
  std::vector<std::unique_ptr<BridgeSession>> sessions;
  {
    std::lock_guard lock(mutex_);
    sessions.swap(idle_);
    live_ -= sessions.size();
  }
  std::vector<int> statuses;
  for (auto& s : sessions) statuses.push_back(s->shutdown());
  return statuses;
}

std::unique_ptr<BridgeSession> BridgeEvaluator::acquire() const {
  std::unique_lock lock(mutex_);
  available_.wait(lock, [&] { return !idle_.empty() || live_ < options_.connections; });
  if (!idle_.empty()) {
    auto s = std::move(idle_.back());
    idle_.pop_back();
    return s;
  }
  ++live_;
  lock.unlock();
  try {
    return std::make_unique<BridgeSession>(options_.command, options_.timeout_seconds);
  } catch (...) {
    lock.lock();
    --live_;
    available_.notify_one();
    throw;
  }
}

void BridgeEvaluator::release(std::unique_ptr<BridgeSession> session) const {
  std::lock_guard lock(mutex_);
  if (session) {
    idle_.push_back(std::move(session));
  } else {
    --live_;
  }
  available_.notify_one();
}

Prediction BridgeEvaluator::predict(const Table& train, const ContextSelection& ctx,
                                    const Table& query) const {
  std::uint64_t id = 0;
  {
    std::lock_guard lock(mutex_);
    id = next_id_++;
  }
  const json request = make_predict_request(id, train, ctx, query);
  auto session = acquire();
  json reply;
  try {
    reply = session->round_trip(request);
  } catch (...) {
    session.reset();
    release(nullptr);
    throw;
  }
  release(std::move(session));
  return parse_predict_response(reply, id, query.rows(), train.class_count());
}

}  // namespace vipcop
