#pragma once
// A broker and any number of clients on one simulated network.
#include <map>
#include <memory>
#include <stdexcept>
#include <string>

#include "edgebench/broker/broker.hpp"
#include "edgebench/client/client.hpp"
#include "edgebench/runtime/transport.hpp"

namespace testrig {

using namespace edgebench;

struct SimRig {
  SimWorld world;
  SimNetwork net{world};
  std::shared_ptr<broker::Broker> brk;

  explicit SimRig(broker::BrokerOptions opts = {}) {
    auto exec = world.make_executor("broker");
    brk = broker::Broker::create(exec, std::move(opts));
    net.listen("broker", exec, brk->acceptor());
  }

  client::ClientOptions options(const std::string& id) const {
    client::ClientOptions o;
    o.client_id = id;
    return o;
  }

  /// Creates a client on its own executor named after the client id.
  std::shared_ptr<client::Client> make(client::ClientOptions o) {
    auto exec = world.make_executor(o.client_id);
    return client::Client::create(exec, net.dialer("broker"), std::move(o));
  }

  client::ClientError connect(const std::shared_ptr<client::Client>& c) {
    bool done = false;
    auto err = client::ClientError::None;
    c->connect([&](client::ClientError e) {
      done = true;
      err = e;
    });
    world.run_until([&] { return done; }, world.now() + 30 * kSeconds);
    if (!done) throw std::runtime_error("connect did not finish");
    return err;
  }

  std::shared_ptr<client::Client> connected(const std::string& id) {
    auto c = make(options(id));
    if (connect(c) != client::ClientError::None) throw std::runtime_error("connect failed");
    return c;
  }

  mqtt::QoS subscribe(const std::shared_ptr<client::Client>& c, const std::string& filter, mqtt::QoS qos,
                      client::MessageSink sink) {
    bool done = false;
    mqtt::QoS granted{};
    c->subscribe(filter, qos, std::move(sink), [&](client::ClientError, mqtt::QoS g) {
      done = true;
      granted = g;
    });
    world.run_until([&] { return done; }, world.now() + 10 * kSeconds);
    if (!done) throw std::runtime_error("subscribe did not finish");
    return granted;
  }

  void settle(Nanos d = 100 * kMillis) { world.run_until(world.now() + d); }
};

}  // namespace testrig
