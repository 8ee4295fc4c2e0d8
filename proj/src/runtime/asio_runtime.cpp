#include "edgebench/runtime/asio_runtime.hpp"

#include <openssl/evp.h>
#include <openssl/pem.h>
#include <openssl/x509.h>

#include <array>
#include <boost/asio.hpp>
#include <boost/asio/ssl.hpp>
#include <chrono>
#include <deque>
#include <future>
#include <stdexcept>
#include <thread>

namespace edgebench {

namespace asio = boost::asio;
using tcp = asio::ip::tcp;

Nanos monotonic_now() {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

namespace {

class RealtimeExecutor final : public Executor {
 public:
  RealtimeExecutor(std::string name, Nanos offset)
      : name_(std::move(name)), offset_(offset), guard_(asio::make_work_guard(io_)) {
    thread_ = std::thread([this] { io_.run(); });
  }

  ~RealtimeExecutor() override { stop(); }

  void stop() {
    if (stopped_.exchange(true)) return;
    guard_.reset();
    io_.stop();
    if (thread_.joinable()) {
      if (thread_.get_id() == std::this_thread::get_id()) {
        thread_.detach();
      } else {
        thread_.join();
      }
    }
  }

  Nanos now() const override { return monotonic_now() + offset_; }

  void post(Task t) override { asio::post(io_, std::move(t)); }

  Timer post_at(Nanos when, Task t) override {
    auto flag = std::make_shared<std::atomic<bool>>(false);
    auto timer = std::make_shared<asio::steady_timer>(io_);
    timer->expires_at(std::chrono::steady_clock::time_point(std::chrono::nanoseconds(when - offset_)));
    timer->async_wait([timer, flag, t = std::move(t)](const boost::system::error_code& ec) {
      if (!ec && !flag->load()) t();
    });
    return Timer(flag);
  }

  void busy_for(Nanos d, Task then) override {
    const Nanos until = monotonic_now() + d;
    // Yield while spinning so that other loops sharing the core stay responsive.
    while (monotonic_now() < until) std::this_thread::yield();
    then();
  }

  void charge(Nanos, Task then) override { then(); }
  bool simulated() const override { return false; }
  const std::string& name() const override { return name_; }

  asio::io_context& io() { return io_; }

 private:
  std::string name_;
  Nanos offset_;
  asio::io_context io_;
  asio::executor_work_guard<asio::io_context::executor_type> guard_;
  std::thread thread_;
  std::atomic<bool> stopped_{false};
};

RealtimeExecutor& as_realtime(Executor& e) {
  auto* r = dynamic_cast<RealtimeExecutor*>(&e);
  if (!r) throw std::logic_error("TCP transport requires a real-time executor");
  return *r;
}

template <typename Stream>
class AsioConnection final : public Connection, public std::enable_shared_from_this<AsioConnection<Stream>> {
 public:
  AsioConnection(RealtimeExecutor& exec, Stream stream, std::string label)
      : exec_(exec), stream_(std::move(stream)), label_(std::move(label)) {}

  void start(Handlers h) override {
    handlers_ = std::move(h);
    do_read();
  }

  void send(SharedBytes frame) override {
    if (closed_) return;
    queue_.push_back(std::move(frame));
    if (!writing_) do_write();
  }

  void close() override {
    if (closed_) return;
    closed_ = true;
    boost::system::error_code ec;
    stream_.lowest_layer().shutdown(tcp::socket::shutdown_both, ec);
    stream_.lowest_layer().close(ec);
    auto self = this->shared_from_this();
    asio::post(exec_.io(), [self] { self->finish(); });
  }

  Executor& executor() override { return exec_; }
  std::string describe() const override { return label_; }

  Stream& stream() { return stream_; }

 private:
  void do_read() {
    auto self = this->shared_from_this();
    stream_.async_read_some(asio::buffer(buf_), [self](const boost::system::error_code& ec, std::size_t n) {
      if (ec) {
        self->finish();
        return;
      }
      if (self->handlers_.on_data) self->handlers_.on_data(ByteView(self->buf_.data(), n));
      if (!self->finished_) self->do_read();
    });
  }

  void do_write() {
    writing_ = true;
    auto self = this->shared_from_this();
    const auto& front = *queue_.front();
    asio::async_write(stream_, asio::buffer(front.data(), front.size()),
                      [self](const boost::system::error_code& ec, std::size_t) {
                        if (ec) {
                          self->writing_ = false;
                          self->finish();
                          return;
                        }
                        self->queue_.pop_front();
                        if (!self->queue_.empty() && !self->closed_) {
                          self->do_write();
                        } else {
                          self->writing_ = false;
                        }
                      });
  }

  void finish() {
    if (finished_) return;
    finished_ = true;
    closed_ = true;
    boost::system::error_code ec;
    stream_.lowest_layer().close(ec);
    queue_.clear();
    auto h = std::move(handlers_);
    handlers_ = {};
    if (h.on_close) h.on_close();
  }

  RealtimeExecutor& exec_;
  Stream stream_;
  std::string label_;
  Handlers handlers_;
  std::array<std::uint8_t, 64 * 1024> buf_{};
  std::deque<SharedBytes> queue_;
  bool writing_ = false;
  bool closed_ = false;
  bool finished_ = false;
};

using PlainConnection = AsioConnection<tcp::socket>;
using TlsStream = asio::ssl::stream<tcp::socket>;
using TlsConnection = AsioConnection<TlsStream>;

class AsioListener final : public TcpListener {
 public:
  AsioListener(std::shared_ptr<Executor> exec, const std::string& host, std::uint16_t port,
               std::optional<TlsIdentity> tls, AcceptHandler on_accept)
      : exec_(std::move(exec)),
        rt_(as_realtime(*exec_)),
        acceptor_(rt_.io()),
        on_accept_(std::move(on_accept)),
        state_(std::make_shared<State>()) {
    const auto addr = asio::ip::make_address(host == "localhost" ? "127.0.0.1" : host);
    tcp::endpoint ep(addr, port);
    acceptor_.open(ep.protocol());
    acceptor_.set_option(tcp::acceptor::reuse_address(true));
    acceptor_.bind(ep);
    acceptor_.listen();
    port_ = acceptor_.local_endpoint().port();
    if (tls) {
      ssl_ = std::make_shared<asio::ssl::context>(asio::ssl::context::tls_server);
      ssl_->set_options(asio::ssl::context::default_workarounds | asio::ssl::context::no_sslv2 |
                        asio::ssl::context::no_sslv3);
      ssl_->use_certificate_chain(asio::buffer(tls->cert_pem));
      ssl_->use_private_key(asio::buffer(tls->key_pem), asio::ssl::context::pem);
    }
    accept_next();
  }

  ~AsioListener() override { close(); }

  std::uint16_t port() const override { return port_; }

  void close() override {
    if (state_->closed.exchange(true)) return;
    // The acceptor lives on the executor's thread; close it there.
    auto done = std::make_shared<std::promise<void>>();
    auto fut = done->get_future();
    asio::post(rt_.io(), [this, done] {
      boost::system::error_code ec;
      acceptor_.close(ec);
      done->set_value();
    });
    fut.wait_for(std::chrono::seconds(2));
  }

 private:
  struct State {
    std::atomic<bool> closed{false};
  };

  void accept_next() {
    auto state = state_;
    acceptor_.async_accept([this, state](const boost::system::error_code& ec, tcp::socket sock) {
      if (ec || state->closed) return;
      sock.set_option(tcp::no_delay(true));
      const std::string label = "tcp:" + sock.remote_endpoint().address().to_string() + ":" +
                                std::to_string(sock.remote_endpoint().port());
      if (ssl_) {
        auto conn = std::make_shared<TlsConnection>(rt_, TlsStream(std::move(sock), *ssl_), "tls:" + label);
        handshake(conn);
      } else {
        on_accept_(std::make_shared<PlainConnection>(rt_, std::move(sock), label));
      }
      accept_next();
    });
  }

  void handshake(const std::shared_ptr<TlsConnection>& conn);

  std::shared_ptr<Executor> exec_;
  RealtimeExecutor& rt_;
  tcp::acceptor acceptor_;
  AcceptHandler on_accept_;
  std::shared_ptr<asio::ssl::context> ssl_;
  std::shared_ptr<State> state_;
  std::uint16_t port_ = 0;
};

void AsioListener::handshake(const std::shared_ptr<TlsConnection>& conn) {
  auto on_accept = on_accept_;
  conn->stream().async_handshake(asio::ssl::stream_base::server,
                                 [conn, on_accept](const boost::system::error_code& ec) {
                                   if (ec) {
                                     conn->close();
                                     return;
                                   }
                                   on_accept(conn);
                                 });
}

}  // namespace

std::shared_ptr<Executor> make_realtime_executor(std::string name, Nanos clock_offset) {
  return std::make_shared<RealtimeExecutor>(std::move(name), clock_offset);
}

void stop_realtime_executor(Executor& exec) { as_realtime(exec).stop(); }

std::unique_ptr<TcpListener> listen_tcp(std::shared_ptr<Executor> exec, const std::string& host, std::uint16_t port,
                                        std::optional<TlsIdentity> tls, AcceptHandler on_accept) {
  return std::make_unique<AsioListener>(std::move(exec), host, port, std::move(tls), std::move(on_accept));
}

Dialer tcp_dialer(std::string host, std::uint16_t port, TlsClientOptions tls) {
  std::shared_ptr<asio::ssl::context> ssl;
  if (tls.enabled) {
    ssl = std::make_shared<asio::ssl::context>(asio::ssl::context::tls_client);
    if (tls.ca_pem.empty()) {
      ssl->set_verify_mode(asio::ssl::verify_none);
    } else {
      ssl->add_certificate_authority(asio::buffer(tls.ca_pem));
      ssl->set_verify_mode(asio::ssl::verify_peer);
    }
  }
  return [host = std::move(host), port, ssl](Executor& exec, std::function<void(ConnectionPtr, std::string)> done) {
    auto& rt = as_realtime(exec);
    auto resolver = std::make_shared<tcp::resolver>(rt.io());
    auto sock = std::make_shared<tcp::socket>(rt.io());
    auto fail = [done](const std::string& what, const boost::system::error_code& ec) {
      done(nullptr, what + ": " + ec.message());
    };
    resolver->async_resolve(
        host, std::to_string(port),
        [&rt, resolver, sock, ssl, done, fail, host](const boost::system::error_code& ec,
                                                     tcp::resolver::results_type results) {
          if (ec) return fail("resolve " + host, ec);
          asio::async_connect(*sock, results,
                              [&rt, sock, ssl, done, fail](const boost::system::error_code& ec2, const tcp::endpoint& ep) {
                                if (ec2) return fail("connect", ec2);
                                sock->set_option(tcp::no_delay(true));
                                const std::string label = "tcp:" + ep.address().to_string() + ":" + std::to_string(ep.port());
                                if (!ssl) {
                                  done(std::make_shared<PlainConnection>(rt, std::move(*sock), label), {});
                                  return;
                                }
                                auto conn = std::make_shared<TlsConnection>(rt, TlsStream(std::move(*sock), *ssl),
                                                                            "tls:" + label);
                                conn->stream().async_handshake(asio::ssl::stream_base::client,
                                                               [conn, done, fail](const boost::system::error_code& ec3) {
                                                                 if (ec3) return fail("tls handshake", ec3);
                                                                 done(conn, {});
                                                               });
                              });
        });
  };
}

TlsIdentity generate_self_signed(const std::string& common_name) {
  EVP_PKEY* pkey = EVP_EC_gen("P-256");
  if (!pkey) throw std::runtime_error("key generation failed");
  X509* cert = X509_new();
  X509_set_version(cert, 2);
  ASN1_INTEGER_set(X509_get_serialNumber(cert), 1);
  X509_gmtime_adj(X509_getm_notBefore(cert), 0);
  X509_gmtime_adj(X509_getm_notAfter(cert), 365L * 24 * 3600);
  X509_set_pubkey(cert, pkey);
  X509_NAME* name = X509_get_subject_name(cert);
  X509_NAME_add_entry_by_txt(name, "CN", MBSTRING_ASC, reinterpret_cast<const unsigned char*>(common_name.c_str()), -1,
                             -1, 0);
  X509_set_issuer_name(cert, name);
  if (!X509_sign(cert, pkey, EVP_sha256())) {
    X509_free(cert);
    EVP_PKEY_free(pkey);
    throw std::runtime_error("certificate signing failed");
  }

  auto to_pem = [](auto write) {
    BIO* bio = BIO_new(BIO_s_mem());
    write(bio);
    char* data = nullptr;
    const long n = BIO_get_mem_data(bio, &data);
    std::string out(data, static_cast<std::size_t>(n));
    BIO_free(bio);
    return out;
  };
  TlsIdentity id;
  id.cert_pem = to_pem([&](BIO* b) { PEM_write_bio_X509(b, cert); });
  id.key_pem = to_pem([&](BIO* b) { PEM_write_bio_PrivateKey(b, pkey, nullptr, nullptr, 0, nullptr, nullptr); });
  X509_free(cert);
  EVP_PKEY_free(pkey);
  return id;
}

}  // namespace edgebench
