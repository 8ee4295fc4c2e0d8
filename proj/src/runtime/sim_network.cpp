#include <algorithm>
#include <stdexcept>

#include "edgebench/runtime/transport.hpp"

namespace edgebench {

namespace {

class SimConnection final : public Connection, public std::enable_shared_from_this<SimConnection> {
 public:
  SimConnection(SimNetwork& net, std::shared_ptr<SimExecutor> exec, std::string label)
      : net_(net), exec_(std::move(exec)), label_(std::move(label)) {}

  void pair_with(const std::shared_ptr<SimConnection>& peer) { peer_ = peer; }
  void set_filter(FrameFilter f) { filter_ = std::move(f); }

  void start(Handlers h) override {
    handlers_ = std::move(h);
    started_ = true;
    for (auto& f : early_) handlers_.on_data(*f);
    early_.clear();
    if (remote_closed_) finish();
  }

  void send(SharedBytes frame) override {
    if (closed_) return;
    std::vector<SharedBytes> frames;
    if (filter_) {
      frames = filter_(std::move(frame));
    } else {
      frames.push_back(std::move(frame));
    }
    for (auto& f : frames) {
      const Nanos at = std::max(last_delivery_, net_.world().now() + net_.latency(f->size()));
      last_delivery_ = at;
      net_.world().schedule(at, [peer = peer_, f = std::move(f)] {
        if (auto p = peer.lock()) p->exec_->post([p, f] { p->deliver(f); });
      });
    }
  }

  void close() override {
    if (closed_) return;
    closed_ = true;
    const Nanos at = std::max(last_delivery_, net_.world().now() + net_.latency(0));
    net_.world().schedule(at, [peer = peer_] {
      if (auto p = peer.lock()) p->exec_->post([p] { p->on_remote_close(); });
    });
    auto self = shared_from_this();
    exec_->post([self] { self->finish(); });
  }

  Executor& executor() override { return *exec_; }
  std::string describe() const override { return "sim:" + label_; }

 private:
  void deliver(const SharedBytes& f) {
    if (finished_) return;
    if (!started_) {
      early_.push_back(f);
      return;
    }
    if (handlers_.on_data) handlers_.on_data(*f);
  }

  void on_remote_close() {
    remote_closed_ = true;
    closed_ = true;
    if (started_) finish();
  }

  void finish() {
    if (finished_) return;
    finished_ = true;
    closed_ = true;
    if (handlers_.on_close) handlers_.on_close();
    handlers_ = {};
  }

  SimNetwork& net_;
  std::shared_ptr<SimExecutor> exec_;
  std::string label_;
  std::weak_ptr<SimConnection> peer_;
  FrameFilter filter_;
  Handlers handlers_;
  std::vector<SharedBytes> early_;
  Nanos last_delivery_ = 0;
  bool started_ = false;
  bool closed_ = false;
  bool remote_closed_ = false;
  bool finished_ = false;
};

std::shared_ptr<SimExecutor> as_sim(Executor& e) {
  auto* s = dynamic_cast<SimExecutor*>(&e);
  if (!s) throw std::logic_error("simulated network requires a simulated executor");
  return s->shared_from_this();
}

}  // namespace

void SimNetwork::listen(const std::string& endpoint, std::shared_ptr<Executor> server_exec, AcceptHandler on_accept) {
  as_sim(*server_exec);
  listeners_[endpoint] = Listener{std::move(server_exec), std::move(on_accept)};
}

void SimNetwork::unlisten(const std::string& endpoint) { listeners_.erase(endpoint); }

void SimNetwork::set_filter(const std::string& client_name, bool to_server, FrameFilter f) {
  filters_[{client_name, to_server}] = std::move(f);
}

void SimNetwork::drop_all() {
  for (auto& w : open_) {
    if (auto c = w.lock()) c->close();
  }
  open_.clear();
}

Dialer SimNetwork::dialer(const std::string& endpoint) {
  return [this, endpoint](Executor& client_exec, std::function<void(ConnectionPtr, std::string)> done) {
    auto cexec = as_sim(client_exec);
    const Nanos at = world_.now() + latency(0);
    world_.schedule(at, [this, endpoint, cexec, done = std::move(done)] {
      auto it = listeners_.find(endpoint);
      if (it == listeners_.end()) {
        cexec->post([done] { done(nullptr, "connection refused"); });
        return;
      }
      auto sexec = as_sim(*it->second.exec);
      auto client = std::make_shared<SimConnection>(*this, cexec, cexec->name() + "->" + endpoint);
      auto server = std::make_shared<SimConnection>(*this, sexec, endpoint + "<-" + cexec->name());
      client->pair_with(server);
      server->pair_with(client);
      if (auto f = filters_.find({cexec->name(), true}); f != filters_.end()) client->set_filter(f->second);
      if (auto f = filters_.find({cexec->name(), false}); f != filters_.end()) server->set_filter(f->second);
      open_.erase(std::remove_if(open_.begin(), open_.end(), [](auto& w) { return w.expired(); }), open_.end());
      open_.push_back(client);
      open_.push_back(server);
      auto accept = it->second.on_accept;
      sexec->post([accept, server] { accept(server); });
      cexec->post([done, client] { done(client, {}); });
    });
  };
}

}  // namespace edgebench
