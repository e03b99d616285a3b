#pragma once

#include <chrono>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "httplib.h"
#include "json.hpp"
#include "sead/agent.hpp"
#include "sead/arena.hpp"
#include "sead/log.hpp"
#include "sead/trajectory.hpp"
#include "sead/user_model.hpp"

namespace sead {

// External chat backend. One POST per turn:
//   request  {"role": "user"|"agent", "directive": "...",
//             "history": [{"role": "agent", "token": "Greet"}, ...]}
//   response {"token": "<closed-vocabulary name>", "text": "..."}
// "text" is optional and never interpreted.

enum class BackendRole : std::uint8_t { Agent, User };

inline constexpr std::string_view name(BackendRole r) { return r == BackendRole::Agent ? "agent" : "user"; }

struct BackendEndpoint {
  std::string host = "127.0.0.1";
  int port = 0;
  std::string path = "/turn";
  int timeout_ms = 5000;
};

struct HistoryEntry {
  BackendRole role = BackendRole::User;
  std::string token;
};

struct BackendReply {
  std::string token;
  std::string text;
};

/// Connection-level failure: the endpoint could not be reached at all.
class BackendUnavailable : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Anything that is not a well-formed reply: bad JSON, missing token, a
/// token outside the vocabulary, or a read timeout.
class BackendRejected : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::string backend_request_body(BackendRole role, const std::string& directive,
                                        const std::vector<HistoryEntry>& history) {
  nlohmann::ordered_json j;
  j["role"] = name(role);
  j["directive"] = directive;
  j["history"] = nlohmann::ordered_json::array();
  for (const HistoryEntry& h : history) j["history"].push_back({{"role", name(h.role)}, {"token", h.token}});
  return j.dump();
}

inline BackendReply parse_backend_reply(const std::string& body) {
  const nlohmann::json j = nlohmann::json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw BackendRejected("reply is not a JSON object");
  if (!j.contains("token") || !j["token"].is_string()) throw BackendRejected("reply has no string 'token'");
  BackendReply r;
  r.token = j["token"].get<std::string>();
  if (j.contains("text")) {
    if (!j["text"].is_string()) throw BackendRejected("reply 'text' is not a string");
    r.text = j["text"].get<std::string>();
  }
  return r;
}

/// Thin blocking client; one instance per thread.
class ChatBackend {
 public:
  explicit ChatBackend(BackendEndpoint ep) : ep_(std::move(ep)), client_(ep_.host, ep_.port) {
    const auto t = std::chrono::milliseconds(ep_.timeout_ms);
    client_.set_connection_timeout(t);
    client_.set_read_timeout(t);
    client_.set_write_timeout(t);
    client_.set_keep_alive(true);
    client_.set_tcp_nodelay(true);
  }

  BackendReply exchange(BackendRole role, const std::string& directive, const std::vector<HistoryEntry>& history) {
    auto res = client_.Post(ep_.path, backend_request_body(role, directive, history), "application/json");
    if (!res) {
      const httplib::Error err = res.error();
      if (err == httplib::Error::Read) throw BackendRejected("backend read timed out");
      throw BackendUnavailable("backend " + ep_.host + ":" + std::to_string(ep_.port) + " unreachable: " +
                               httplib::to_string(err));
    }
    if (res->status >= 500) throw BackendUnavailable("backend returned HTTP " + std::to_string(res->status));
    if (res->status != 200) throw BackendRejected("backend returned HTTP " + std::to_string(res->status));
    return parse_backend_reply(res->body);
  }

  const BackendEndpoint& endpoint() const noexcept { return ep_; }

 private:
  BackendEndpoint ep_;
  httplib::Client client_;
};

inline constexpr const char* kAgentDirective =
    "You are a service agent. Greet, learn the customer's needs, present the offer, address cost and "
    "identity questions, and close only when the customer is ready. Reply with one action name.";

inline std::string user_directive(const UserProfile& p) {
  return "You are a customer. Initial cooperation,emotion,trust = " + to_string(p.initial) +
         "; traits: " + (p.traits.mask() == 0 ? std::string("none") : traits_to_string(p.traits)) +
         ". Reply with one utterance token.";
}

struct BackendSides {
  bool user = true;
  bool agent = false;
};

/// Like run_dialogue, but the chosen sides speak through the backend. When
/// the user side is external, its tokens decide the outcome (Agree succeeds,
/// Refuse ends the call); the internal model still tracks the levels the
/// agent observes. A rejected reply closes the session as Timeout. Network
/// failures propagate as BackendUnavailable.
template <DialoguePolicy Policy>
Trajectory run_backend_dialogue(const Policy& policy, const UserProfile& profile, Rng& rng, ChatBackend& backend,
                                BackendSides sides = {}, const UserDynamics& dyn = {}) {
  Trajectory traj;
  traj.profile = profile;
  traj.stream = rng.id();
  UserSession session = init_session(profile, dyn);
  Observation obs = open_session(session, dyn, rng);
  StateEstimate est = initial_estimate(obs.levels);
  ContextTracker tracker;
  UserState hidden = session.state;
  std::vector<HistoryEntry> history{{BackendRole::User, std::string(name(obs.token))}};
  const std::string directive = user_directive(profile);

  auto reject = [&](const std::exception& e) {
    log().warn("backend reply rejected, closing session as Timeout: {}", e.what());
    session.outcome = DialogueOutcome::Timeout;
  };

  while (!session.closed()) {
    const ContextFlags flags = tracker.flags(session.turn);
    ActionSample sample = policy.act(TurnContext{est, flags, session.turn, &session}, rng);
    if (sides.agent) {
      try {
        const BackendReply reply = backend.exchange(BackendRole::Agent, kAgentDirective, history);
        sample.action = parse_action(reply.token);
        sample.log_prob = 0.0;
      } catch (const BackendRejected& e) {
        reject(e);
        break;
      } catch (const ParseError& e) {
        reject(e);
        break;
      }
    }
    history.push_back({BackendRole::Agent, std::string(name(sample.action))});
    UserStep step = step_user(session, sample.action, rng, dyn);
    if (sides.user) {
      try {
        const BackendReply reply = backend.exchange(BackendRole::User, directive, history);
        step.token = parse_token(reply.token);
        step.observation.token = step.token;
        if (step.token == UserToken::Agree) session.outcome = DialogueOutcome::Success;
        else if (step.token == UserToken::Refuse) session.outcome = DialogueOutcome::Refusal;
        else if (session.turn >= session.t_max) session.outcome = DialogueOutcome::Timeout;
        else session.outcome = DialogueOutcome::Ongoing;
      } catch (const BackendRejected& e) {
        reject(e);
      } catch (const ParseError& e) {
        reject(e);
      }
    }
    traj.turns.push_back(Turn{obs.token, obs.levels, hidden, est.point, sample.action, sample.log_prob, sample.row,
                              flags.bits(), std::nullopt});
    history.push_back({BackendRole::User, std::string(name(step.token))});
    tracker.observe(sample.action, step.token);
    hidden = session.state;
    obs = step.observation;
    est = update_estimate(est, obs.levels);
  }
  traj.final_token = obs.token;
  traj.final_state = session.state;
  traj.outcome = session.outcome;
  return traj;
}

inline Trajectory run_backend_dialogue(const AnyPolicy& policy, const UserProfile& profile, Rng& rng,
                                       ChatBackend& backend, BackendSides sides = {}, const UserDynamics& dyn = {}) {
  return std::visit([&](const auto& p) { return run_backend_dialogue(p, profile, rng, backend, sides, dyn); },
                    policy);
}

/// In-process HTTP server on 127.0.0.1 for tests and local experiments.
/// The handler maps a parsed request to a raw response body.
class LoopbackStub {
 public:
  using Handler = std::function<std::string(const nlohmann::json& request)>;

  explicit LoopbackStub(Handler handler) : handler_(std::move(handler)) {
    server_.set_tcp_nodelay(true);
    server_.Post("/turn", [this](const httplib::Request& req, httplib::Response& res) {
      const nlohmann::json body = nlohmann::json::parse(req.body, nullptr, false);
      res.set_content(handler_(body), "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    if (port_ <= 0) throw std::runtime_error("loopback stub: cannot bind");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  ~LoopbackStub() {
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }

  LoopbackStub(const LoopbackStub&) = delete;
  LoopbackStub& operator=(const LoopbackStub&) = delete;

  int port() const noexcept { return port_; }
  BackendEndpoint endpoint() const { return {"127.0.0.1", port_, "/turn", 5000}; }

  /// Replies with the same token every turn.
  static Handler constant(std::string token) {
    return [token = std::move(token)](const nlohmann::json&) {
      return nlohmann::json{{"token", token}, {"text", "..."}}.dump();
    };
  }

 private:
  Handler handler_;
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

}  // namespace sead
