#include "edgebench/bridge/bridge.hpp"

#include "edgebench/bridge/envelope.hpp"
#include "edgebench/bus/probes.hpp"
#include "json.hpp"

namespace edgebench::bridge {

namespace {
constexpr std::size_t kMaxPendingAcks = 4096;

std::shared_ptr<Executor> executor_of(client::Client& c) {
  // The client's executor is owned elsewhere; wrap it without taking ownership.
  return std::shared_ptr<Executor>(&c.executor(), [](Executor*) {});
}
}  // namespace

std::shared_ptr<Bridge> Bridge::create(std::shared_ptr<bus::LocalBus> bus, std::shared_ptr<client::Client> client,
                                       BridgeConfig cfg, BridgeOptions opts) {
  validate(cfg);
  return std::shared_ptr<Bridge>(new Bridge(std::move(bus), std::move(client), std::move(cfg), std::move(opts)));
}

Bridge::Bridge(std::shared_ptr<bus::LocalBus> bus, std::shared_ptr<client::Client> client, BridgeConfig cfg,
               BridgeOptions opts)
    : exec_(executor_of(*client)),
      bus_(std::move(bus)),
      client_(std::move(client)),
      cfg_(std::move(cfg)),
      opts_(std::move(opts)) {}

void Bridge::start() {
  std::weak_ptr<Bridge> weak = shared_from_this();
  for (std::size_t i = 0; i < cfg_.bus2mqtt.size(); ++i) {
    subs_.push_back(bus_->subscribe(cfg_.bus2mqtt[i].source_topic, opts_.bus_queue_size, exec_,
                                    [weak, i](const bus::MessagePtr& m) {
                                      if (auto self = weak.lock()) self->on_bus(i, m);
                                    }));
  }
  for (std::size_t i = 0; i < cfg_.mqtt2bus.size(); ++i) {
    client_->subscribe(cfg_.mqtt2bus[i].source_topic, cfg_.mqtt2bus[i].qos, [weak, i](const mqtt::Publish& p) {
      if (auto self = weak.lock()) self->on_mqtt(i, p);
    });
  }
  if (opts_.status_sink) exec_->post([weak] {
    if (auto self = weak.lock()) self->arm_status();
  });
}

void Bridge::stop() {
  for (auto& s : subs_) s->unsubscribe();
  subs_.clear();
  exec_->post([self = shared_from_this()] {
    self->stopped_ = true;
    self->status_timer_.cancel();
  });
}

std::uint64_t Bridge::bus_drops() const {
  std::uint64_t n = 0;
  for (auto& s : subs_) n += s->dropped();
  return n;
}

std::string Bridge::status_json() const {
  nlohmann::json j{{"client", cfg_.client_id},
                   {"bus_in", counters_.bus_in.load()},
                   {"mqtt_out", counters_.mqtt_out.load()},
                   {"mqtt_in", counters_.mqtt_in.load()},
                   {"bus_out", counters_.bus_out.load()},
                   {"decode_errors", counters_.decode_errors.load()},
                   {"publish_errors", counters_.publish_errors.load()},
                   {"drops", bus_drops() + client_->stats().buffer_drops.load()},
                   {"reconnects", client_->stats().reconnects.load()},
                   {"connected", client_->connected()}};
  return j.dump();
}

void Bridge::arm_status() {
  if (stopped_) return;
  std::weak_ptr<Bridge> weak = shared_from_this();
  status_timer_ = exec_->post_after(opts_.status_period, [weak] {
    auto self = weak.lock();
    if (!self || self->stopped_) return;
    self->opts_.status_sink(self->status_json());
    self->arm_status();
  });
}

Nanos Bridge::sim_cost(std::size_t bytes) const {
  if (!exec_->simulated()) return 0;
  return opts_.sim_fixed_cost + static_cast<Nanos>(static_cast<double>(bytes) / opts_.sim_bytes_per_second * 1e9);
}

void Bridge::merge_acks(bus::TracingBlock& t) {
  auto it = pending_acks_.find(t.sample_id);
  if (it == pending_acks_.end()) return;
  t.probes.insert(t.probes.end(), it->second.begin(), it->second.end());
  pending_acks_.erase(it);
}

void Bridge::on_bus(std::size_t rule, const bus::MessagePtr& m) {
  ++counters_.bus_in;
  if (opts_.single_sample && busy_) {
    waiting_.emplace_back(rule, m);
    return;
  }
  forward(rule, m);
}

void Bridge::forward(std::size_t rule_idx, const bus::MessagePtr& m) {
  const BridgeRule& rule = cfg_.bus2mqtt[rule_idx];
  const Nanos t_in = exec_->now();
  busy_ = true;
  const std::size_t body = m->payload->size() + m->type_tag.size();
  exec_->charge(sim_cost(body), [self = shared_from_this(), rule_idx, m, t_in] {
    const BridgeRule& rule = self->cfg_.bus2mqtt[rule_idx];
    const auto component = probes::Component::BridgeBusToMqtt;
    const std::uint8_t clock = self->opts_.clock_id;
    std::optional<std::uint64_t> sample;
    Bytes frame;
    if (rule.inject_tracing) {
      bus::TracingBlock t = m->trace ? *m->trace : bus::TracingBlock{m->identity, {}};
      sample = t.sample_id;
      self->merge_acks(t);
      t.probes.push_back({probes::probe_id(component, probes::Edge::In), static_cast<std::uint64_t>(t_in), clock});
      t.probes.push_back(
          {probes::probe_id(component, probes::Edge::Out), static_cast<std::uint64_t>(self->exec_->now()), clock});
      frame = encode_envelope(serialize_message(m->type_tag, *m->payload), t);
    } else {
      frame = *m->payload;
    }
    const bool want_ack = sample && rule.qos != mqtt::QoS::AtMostOnce;
    std::weak_ptr<Bridge> weak = self;
    self->client_->publish(rule.target_topic, std::move(frame), rule.qos,
                           [weak, want_ack, sample, clock](client::ClientError e) {
                             auto self = weak.lock();
                             if (!self) return;
                             if (e != client::ClientError::None) {
                               ++self->counters_.publish_errors;
                             } else {
                               ++self->counters_.mqtt_out;
                               if (want_ack) {
                                 self->pending_acks_[*sample].push_back(
                                     {probes::probe_id(probes::Component::BridgeBusToMqtt, probes::Edge::Ack),
                                      static_cast<std::uint64_t>(self->exec_->now()), clock});
                                 self->ack_order_.push_back(*sample);
                                 while (self->ack_order_.size() > kMaxPendingAcks) {
                                   self->pending_acks_.erase(self->ack_order_.front());
                                   self->ack_order_.pop_front();
                                 }
                               }
                             }
                             self->publish_done();
                           });
  });
  (void)rule;
}

void Bridge::publish_done() {
  busy_ = false;
  if (!opts_.single_sample || waiting_.empty()) return;
  auto [rule, m] = std::move(waiting_.front());
  waiting_.pop_front();
  forward(rule, m);
}

void Bridge::on_mqtt(std::size_t rule_idx, const mqtt::Publish& p) {
  ++counters_.mqtt_in;
  const BridgeRule& rule = cfg_.mqtt2bus[rule_idx];
  const Nanos t_in = exec_->now();
  const std::uint8_t clock = opts_.clock_id;
  const auto component = probes::Component::BridgeMqttToBus;

  std::optional<bus::TracingBlock> trace;
  std::string tag = rule.type_tag;
  SharedBytes value;
  if (rule.inject_tracing) {
    try {
      auto env = decode_envelope(p.payload);
      auto msg = parse_message(env.payload);
      trace = std::move(env.tracing);
      tag = std::move(msg.type_tag);
      value = share(Bytes(msg.value.begin(), msg.value.end()));
    } catch (const EnvelopeError&) {
      ++counters_.decode_errors;
      return;
    }
    if (trace) {
      merge_acks(*trace);
      trace->probes.push_back({probes::probe_id(component, probes::Edge::In), static_cast<std::uint64_t>(t_in), clock});
    }
  } else {
    value = share(p.payload);
  }
  exec_->charge(sim_cost(p.payload.size()), [self = shared_from_this(), rule_idx, trace = std::move(trace),
                                              tag = std::move(tag), value = std::move(value), clock, component]() mutable {
    if (trace)
      trace->probes.push_back(
          {probes::probe_id(component, probes::Edge::Out), static_cast<std::uint64_t>(self->exec_->now()), clock});
    auto m = self->bus_->make(self->cfg_.mqtt2bus[rule_idx].target_topic, std::move(tag), std::move(value),
                              std::move(trace));
    ++self->counters_.bus_out;
    self->bus_->publish(m);
  });
}

}  // namespace edgebench::bridge
