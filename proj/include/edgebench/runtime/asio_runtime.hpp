#pragma once

// Real-time runtime: event-loop threads, TCP and TLS connections over the
// host network stack. Kept behind this header so only one translation unit
// pulls in the networking headers.

#include <cstdint>
#include <memory>
#include <optional>
#include <string>

#include "edgebench/runtime/transport.hpp"

namespace edgebench {

/// Executor backed by its own event-loop thread and the host monotonic clock.
/// `clock_offset` is added to every reading (used to emulate unsynchronized hosts).
std::shared_ptr<Executor> make_realtime_executor(std::string name, Nanos clock_offset = 0);

/// Stops the loop and joins its thread; pending tasks are discarded. Must not
/// be called from the executor's own thread.
void stop_realtime_executor(Executor& exec);

/// Monotonic host clock in nanoseconds.
Nanos monotonic_now();

struct TlsIdentity {
  std::string cert_pem;
  std::string key_pem;
};

/// Self-signed P-256 certificate for `common_name`, valid for one year.
TlsIdentity generate_self_signed(const std::string& common_name);

struct TlsClientOptions {
  bool enabled = false;
  /// PEM of the trusted CA; when empty the server certificate is not verified.
  std::string ca_pem;
};

class TcpListener {
 public:
  virtual ~TcpListener() = default;
  virtual std::uint16_t port() const = 0;
  virtual void close() = 0;
};

/// Listens on `host:port` (port 0 picks an ephemeral port). Accepted
/// connections run on `exec`, which must be a real-time executor.
std::unique_ptr<TcpListener> listen_tcp(std::shared_ptr<Executor> exec, const std::string& host, std::uint16_t port,
                                        std::optional<TlsIdentity> tls, AcceptHandler on_accept);

Dialer tcp_dialer(std::string host, std::uint16_t port, TlsClientOptions tls = {});

}  // namespace edgebench
