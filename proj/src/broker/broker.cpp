#include "edgebench/broker/broker.hpp"

#include <deque>
#include "json.hpp"

namespace edgebench::broker {

struct Broker::Link {
  std::uint64_t id = 0;
  ConnectionPtr conn;
  Bytes inbuf;
  std::string client_id;
  bool connected = false;
  bool closing = false;
  std::uint64_t generation = 0;
  Nanos last_rx = 0;
  Nanos keepalive = 0;
  Timer keepalive_timer;
};

struct Broker::Channel {
  explicit Channel(ShaperConfig c) : shaper(c) {}
  struct Item {
    Nanos at;
    std::uint64_t link;
    std::function<void(Link&)> fn;
  };
  Shaper shaper;
  std::deque<Item> queue;
  Timer timer;
};

struct Broker::ShapedPair {
  ShapedPair(ShaperConfig up_cfg, ShaperConfig down_cfg) : up(up_cfg), down(down_cfg) {}
  Channel up;    // client -> broker
  Channel down;  // broker -> client
};

namespace {

FrameClass classify(const mqtt::ControlPacket& p) {
  if (auto* pub = std::get_if<mqtt::Publish>(&p))
    return pub->qos == mqtt::QoS::AtMostOnce ? FrameClass::ApplicationQos0 : FrameClass::Application;
  return FrameClass::Control;
}

}  // namespace

std::shared_ptr<Broker> Broker::create(std::shared_ptr<Executor> exec, BrokerOptions opts) {
  return std::shared_ptr<Broker>(new Broker(std::move(exec), std::move(opts)));
}

Broker::Broker(std::shared_ptr<Executor> exec, BrokerOptions opts)
    : exec_(std::move(exec)),
      opts_(std::move(opts)),
      core_(opts_.credentials, opts_.offline_queue_limit, opts_.max_retransmits) {
  for (auto& [id, cfg] : opts_.shapers) {
    (void)id;
    cfg.validate();
  }
}

Broker::~Broker() = default;

AcceptHandler Broker::acceptor() {
  std::weak_ptr<Broker> weak = shared_from_this();
  return [weak](ConnectionPtr c) {
    if (auto self = weak.lock()) self->attach(std::move(c));
  };
}

void Broker::attach(ConnectionPtr c) {
  auto link = std::make_unique<Link>();
  link->id = next_link_++;
  link->conn = c;
  link->last_rx = exec_->now();
  const std::uint64_t id = link->id;
  links_.emplace(id, std::move(link));
  ++stats_.connections;
  std::weak_ptr<Broker> weak = shared_from_this();
  c->start({[weak, id](ByteView data) {
              if (auto self = weak.lock()) self->on_data(id, data);
            },
            [weak, id] {
              if (auto self = weak.lock()) self->on_closed(id);
            }});
}

void Broker::shutdown() {
  std::vector<std::uint64_t> ids;
  for (auto& [id, l] : links_) ids.push_back(id);
  for (auto id : ids) close_link(id);
  for (auto& [k, t] : retransmit_timers_) t.cancel();
  retransmit_timers_.clear();
  for (auto& [k, sp] : shaped_) {
    sp->up.timer.cancel();
    sp->down.timer.cancel();
  }
}

Broker::ShapedPair* Broker::shaped(const std::string& client_id) {
  auto it = shaped_.find(client_id);
  if (it != shaped_.end()) return it->second.get();
  auto cfg = opts_.shapers.find(client_id);
  if (cfg == opts_.shapers.end() || !cfg->second.active()) return nullptr;
  ShaperConfig down = cfg->second;
  down.seed = cfg->second.seed ^ 0x5DEECE66Dull;
  auto [ins, ok] = shaped_.emplace(client_id, std::make_unique<ShapedPair>(cfg->second, down));
  (void)ok;
  return ins->second.get();
}

void Broker::push(Channel& ch, Nanos at, std::uint64_t link_id, std::function<void(Link&)> fn) {
  ch.queue.push_back({at, link_id, std::move(fn)});
  if (!ch.timer.active()) arm_channel(ch);
}

void Broker::arm_channel(Channel& ch) {
  if (ch.queue.empty()) return;
  std::weak_ptr<Broker> weak = shared_from_this();
  Channel* chp = &ch;
  ch.timer = exec_->post_at(ch.queue.front().at, [weak, chp] {
    auto self = weak.lock();
    if (!self) return;
    chp->timer = Timer{};
    const Nanos now = self->exec_->now();
    while (!chp->queue.empty() && chp->queue.front().at <= now) {
      auto item = std::move(chp->queue.front());
      chp->queue.pop_front();
      auto it = self->links_.find(item.link);
      if (it != self->links_.end()) item.fn(*it->second);
    }
    self->arm_channel(*chp);
  });
}

void Broker::on_data(std::uint64_t link_id, ByteView data) {
  auto it = links_.find(link_id);
  if (it == links_.end()) return;
  Link& l = *it->second;
  if (l.closing) return;
  l.last_rx = exec_->now();
  l.inbuf.insert(l.inbuf.end(), data.begin(), data.end());
  std::size_t off = 0;
  while (off < l.inbuf.size()) {
    auto r = mqtt::decode_packet(ByteView(l.inbuf).subspan(off));
    if (r.status == mqtt::DecodeStatus::NeedMoreData) break;
    if (r.status == mqtt::DecodeStatus::Malformed) {
      ++stats_.violations;
      close_link(link_id);
      return;
    }
    off += r.consumed;
    ++stats_.frames_in;
    ShapedPair* sp = l.connected ? shaped(l.client_id) : nullptr;
    if (!sp) {
      process(link_id, std::move(r.packet), r.consumed);
      if (!links_.count(link_id) || links_.at(link_id)->closing) return;
      continue;
    }
    auto at = sp->up.shaper.shape(r.consumed, classify(r.packet), exec_->now());
    if (!at) {
      ++stats_.shaper_drops;
      continue;
    }
    const std::size_t len = r.consumed;
    push(sp->up, *at, link_id,
         [this, pkt = std::move(r.packet), len](Link& target) mutable {
           if (!target.closing) process(target.id, std::move(pkt), len);
         });
  }
  l.inbuf.erase(l.inbuf.begin(), l.inbuf.begin() + static_cast<std::ptrdiff_t>(off));
}

void Broker::process(std::uint64_t link_id, mqtt::ControlPacket pkt, std::size_t frame_len) {
  auto it = links_.find(link_id);
  if (it == links_.end()) return;
  Link& l = *it->second;
  log_packet(l, "in", pkt, frame_len);

  if (auto* c = std::get_if<mqtt::Connect>(&pkt)) {
    if (l.connected) {
      ++stats_.violations;
      close_link(link_id);
      return;
    }
    handle_connect(l, *c);
    return;
  }
  if (!l.connected) {
    ++stats_.violations;
    close_link(link_id);
    return;
  }
  if (auto* s = std::get_if<mqtt::Subscribe>(&pkt)) {
    send_packet(l, core_.subscribe(l.client_id, *s));
    return;
  }
  if (std::holds_alternative<mqtt::Pingreq>(pkt)) {
    send_packet(l, mqtt::Pingresp{});
    return;
  }
  if (std::holds_alternative<mqtt::Disconnect>(pkt)) {
    close_link(link_id);
    return;
  }

  const std::string client = l.client_id;
  auto r = core_.step_qos(client, pkt);
  if (r.violation) {
    ++stats_.violations;
    if (opts_.log) {
      nlohmann::json j{{"ts", exec_->now()}, {"client", client}, {"event", "protocol_violation"}, {"error", r.error}};
      opts_.log(j.dump());
    }
    close_link(link_id);
    return;
  }
  stats_.routed += static_cast<std::uint64_t>(r.routed);
  if (auto* a = std::get_if<mqtt::Puback>(&pkt)) cancel_retransmit(client, a->packet_id);
  if (auto* c = std::get_if<mqtt::Pubcomp>(&pkt)) cancel_retransmit(client, c->packet_id);
  for (auto& resp : r.responses) {
    if (auto* rel = std::get_if<mqtt::Pubrel>(&resp)) arm_retransmit(client, rel->packet_id, opts_.retransmit_initial);
    send_packet(l, resp);
  }
  for (auto& d : r.deliveries) send_to(d.client_id, d.packet);
}

void Broker::handle_connect(Link& l, const mqtt::Connect& c) {
  auto out = core_.handle_connect(c);
  if (!out.accepted) {
    send_packet(l, out.connack);
    l.closing = true;
    // Close once the CONNACK has left the (possibly shaped) link.
    const std::uint64_t id = l.id;
    exec_->post([w = weak_from_this(), id] {
      if (auto self = w.lock()) {
        auto it = self->links_.find(id);
        if (it != self->links_.end()) it->second->conn->close();
      }
    });
    return;
  }
  if (out.took_over) {
    auto old = client_links_.find(c.client_id);
    if (old != client_links_.end() && old->second != l.id) {
      auto ol = links_.find(old->second);
      if (ol != links_.end()) ol->second->connected = false;
      close_link(old->second);
    }
  }
  l.client_id = c.client_id;
  l.connected = true;
  l.generation = out.generation;
  client_links_[c.client_id] = l.id;
  send_packet(l, out.connack);
  for (auto& p : out.resend) {
    if (auto* pub = std::get_if<mqtt::Publish>(&p); pub && pub->packet_id)
      arm_retransmit(l.client_id, *pub->packet_id, opts_.retransmit_initial);
    if (auto* rel = std::get_if<mqtt::Pubrel>(&p)) arm_retransmit(l.client_id, rel->packet_id, opts_.retransmit_initial);
    send_packet(l, p);
  }
  if (c.keep_alive > 0) {
    l.keepalive = static_cast<Nanos>(static_cast<double>(c.keep_alive) * opts_.keepalive_factor * 1e9);
    arm_keepalive(l.id, l.last_rx + l.keepalive);
  }
}

void Broker::arm_keepalive(std::uint64_t link_id, Nanos at) {
  auto it = links_.find(link_id);
  if (it == links_.end()) return;
  it->second->keepalive_timer = exec_->post_at(at, [w = weak_from_this(), link_id] {
    auto self = w.lock();
    if (!self) return;
    auto it = self->links_.find(link_id);
    if (it == self->links_.end()) return;
    Link& l = *it->second;
    const Nanos deadline = l.last_rx + l.keepalive;
    if (self->exec_->now() >= deadline)
      self->close_link(link_id);
    else
      self->arm_keepalive(link_id, deadline);
  });
}

void Broker::send_packet(Link& l, const mqtt::ControlPacket& p) {
  if (l.closing && !std::holds_alternative<mqtt::Connack>(p)) return;
  auto frame = share(mqtt::encode_packet(p));
  log_packet(l, "out", p, frame->size());
  ShapedPair* sp = l.connected ? shaped(l.client_id) : nullptr;
  if (!sp) {
    ++stats_.frames_out;
    l.conn->send(std::move(frame));
    return;
  }
  auto at = sp->down.shaper.shape(frame->size(), classify(p), exec_->now());
  if (!at) {
    ++stats_.shaper_drops;
    return;
  }
  push(sp->down, *at, l.id, [this, frame = std::move(frame)](Link& target) {
    ++stats_.frames_out;
    target.conn->send(frame);
  });
}

void Broker::send_to(const std::string& client_id, const mqtt::ControlPacket& p) {
  auto it = client_links_.find(client_id);
  if (it == client_links_.end()) return;
  auto lt = links_.find(it->second);
  if (lt == links_.end() || !lt->second->connected) return;
  if (auto* pub = std::get_if<mqtt::Publish>(&p); pub && pub->packet_id)
    arm_retransmit(client_id, *pub->packet_id, opts_.retransmit_initial);
  send_packet(*lt->second, p);
}

void Broker::arm_retransmit(const std::string& client_id, std::uint16_t id, Nanos delay) {
  auto key = std::make_pair(client_id, id);
  auto& slot = retransmit_timers_[key];
  slot.cancel();
  slot = exec_->post_after(delay, [w = weak_from_this(), client_id, id, delay] {
    auto self = w.lock();
    if (!self) return;
    auto r = self->core_.retransmit(client_id, id);
    switch (r.action) {
      case RetransmitAction::None:
        self->retransmit_timers_.erase({client_id, id});
        return;
      case RetransmitAction::Exhausted: {
        self->retransmit_timers_.erase({client_id, id});
        auto cl = self->client_links_.find(client_id);
        if (cl != self->client_links_.end()) self->close_link(cl->second);
        return;
      }
      case RetransmitAction::Resend: {
        ++self->stats_.retransmits;
        auto cl = self->client_links_.find(client_id);
        if (cl == self->client_links_.end()) return;
        auto lt = self->links_.find(cl->second);
        if (lt == self->links_.end()) return;
        self->arm_retransmit(client_id, id, delay * 2);
        self->send_packet(*lt->second, *r.packet);
        return;
      }
    }
  });
}

void Broker::cancel_retransmit(const std::string& client_id, std::uint16_t id) {
  auto it = retransmit_timers_.find({client_id, id});
  if (it == retransmit_timers_.end()) return;
  it->second.cancel();
  retransmit_timers_.erase(it);
}

void Broker::close_link(std::uint64_t link_id) {
  auto it = links_.find(link_id);
  if (it == links_.end()) return;
  it->second->closing = true;
  it->second->conn->close();
}

void Broker::on_closed(std::uint64_t link_id) {
  auto it = links_.find(link_id);
  if (it == links_.end()) return;
  Link& l = *it->second;
  l.keepalive_timer.cancel();
  if (!l.client_id.empty()) {
    auto cl = client_links_.find(l.client_id);
    if (cl != client_links_.end() && cl->second == link_id) client_links_.erase(cl);
    core_.disconnected(l.client_id, l.generation);
  }
  links_.erase(it);
}

void Broker::log_packet(const Link& l, const char* dir, const mqtt::ControlPacket& p, std::size_t bytes) {
  if (!opts_.log) return;
  nlohmann::json j{{"ts", exec_->now()}, {"client", l.client_id}, {"dir", dir}, {"type", mqtt::packet_name(p)},
                   {"bytes", bytes}};
  opts_.log(j.dump());
}

}  // namespace edgebench::broker
