#pragma once

// Byte-stream connections between a client and the broker. Each send() call
// carries exactly one encoded MQTT frame; receivers reassemble frames from the
// byte stream regardless of how the transport chunks it.

#include <functional>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "edgebench/bytes.hpp"
#include "edgebench/runtime/executor.hpp"

namespace edgebench {

class Connection {
 public:
  struct Handlers {
    std::function<void(ByteView)> on_data;
    std::function<void()> on_close;
  };

  virtual ~Connection() = default;
  /// Handlers are invoked on executor().
  virtual void start(Handlers h) = 0;
  /// Queues one frame; safe to call only from executor().
  virtual void send(SharedBytes frame) = 0;
  virtual void close() = 0;
  virtual Executor& executor() = 0;
  virtual std::string describe() const = 0;
};

using ConnectionPtr = std::shared_ptr<Connection>;

/// Establishes a client connection. The callback runs on the client's executor
/// with either a connection or a non-empty error.
using Dialer = std::function<void(Executor& client_exec,
                                  std::function<void(ConnectionPtr, std::string error)> done)>;

using AcceptHandler = std::function<void(ConnectionPtr)>;

/// Transforms a frame crossing a simulated connection: return zero frames to
/// drop it, several to duplicate it. Used for fault injection in tests.
using FrameFilter = std::function<std::vector<SharedBytes>(SharedBytes)>;

/// In-memory network for simulated runs. Connections deliver in FIFO order
/// after a modeled loopback latency of `base_latency + bytes / bytes_per_second`.
class SimNetwork {
 public:
  struct LinkModel {
    Nanos base_latency = 30'000;        // 30 us per frame
    double bytes_per_second = 2.0e9;    // loopback copy throughput
  };

  explicit SimNetwork(SimWorld& world) : SimNetwork(world, LinkModel{}) {}
  SimNetwork(SimWorld& world, LinkModel model) : world_(world), model_(model) {}

  void listen(const std::string& endpoint, std::shared_ptr<Executor> server_exec, AcceptHandler on_accept);
  void unlisten(const std::string& endpoint);

  /// Dialer bound to `endpoint`; fails (asynchronously) if nobody listens.
  Dialer dialer(const std::string& endpoint);

  /// Installs a filter on frames sent client->server (`to_server`) or
  /// server->client for connections opened by `client_name` from now on.
  void set_filter(const std::string& client_name, bool to_server, FrameFilter f);

  Nanos latency(std::size_t bytes) const {
    return model_.base_latency + static_cast<Nanos>(static_cast<double>(bytes) / model_.bytes_per_second * 1e9);
  }
  SimWorld& world() { return world_; }

  /// Closes every open connection (both ends observe on_close).
  void drop_all();

 private:
  struct Listener {
    std::shared_ptr<Executor> exec;
    AcceptHandler on_accept;
  };
  SimWorld& world_;
  LinkModel model_;
  std::map<std::string, Listener> listeners_;
  std::map<std::pair<std::string, bool>, FrameFilter> filters_;
  std::vector<std::weak_ptr<Connection>> open_;
};

}  // namespace edgebench
