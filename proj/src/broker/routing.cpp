#include "edgebench/broker/routing.hpp"

#include <algorithm>

#include "edgebench/mqtt/topic.hpp"

namespace edgebench::broker {

namespace {

constexpr std::size_t kRecentIds = 256;

void remember(std::deque<std::uint16_t>& recent, std::uint16_t id) {
  recent.push_back(id);
  if (recent.size() > kRecentIds) recent.pop_front();
}

bool recently(const std::deque<std::uint16_t>& recent, std::uint16_t id) {
  return std::find(recent.begin(), recent.end(), id) != recent.end();
}

void forget(std::deque<std::uint16_t>& recent, std::uint16_t id) {
  recent.erase(std::remove(recent.begin(), recent.end(), id), recent.end());
}

mqtt::ControlPacket resend_packet(const Inflight& f) {
  if (f.state == OutState::AwaitPubcomp) return mqtt::Pubrel{*f.publish.packet_id};
  mqtt::Publish p = f.publish;
  p.dup = true;
  return p;
}

}  // namespace

RoutingCore::RoutingCore(CredentialStore creds, std::size_t offline_queue_limit, int max_retransmits)
    : creds_(std::move(creds)), offline_queue_limit_(offline_queue_limit), max_retransmits_(max_retransmits) {}

ConnectOutcome RoutingCore::handle_connect(const mqtt::Connect& c) {
  ConnectOutcome out;
  if (c.protocol_level != mqtt::kProtocolLevel) {
    out.connack.return_code = 1;
    return out;
  }
  if (c.client_id.empty() && !c.clean_session) {
    out.connack.return_code = 2;
    return out;
  }
  switch (creds_.check(c.username, c.password)) {
    case AuthResult::Ok:
      break;
    case AuthResult::BadCredentials:
      out.connack.return_code = 4;
      return out;
    case AuthResult::NotAuthorized:
      out.connack.return_code = 5;
      return out;
  }

  auto it = sessions_.find(c.client_id);
  if (it != sessions_.end()) {
    out.took_over = it->second.connected;
    if (c.clean_session || it->second.clean_session) {
      sessions_.erase(it);
      it = sessions_.end();
    }
  }
  if (it == sessions_.end()) {
    it = sessions_.emplace(c.client_id, Session{}).first;
    it->second.client_id = c.client_id;
  } else {
    out.connack.session_present = true;
  }
  Session& s = it->second;
  s.clean_session = c.clean_session;
  s.connected = true;
  s.generation = next_generation_++;
  out.generation = s.generation;
  out.accepted = true;

  for (auto& [id, f] : s.outbound_inflight) {
    (void)id;
    f.retransmits = 0;
    out.resend.push_back(resend_packet(f));
  }
  std::vector<Outgoing> drained;
  drain_pending(s, drained);
  for (auto& o : drained) out.resend.push_back(std::move(o.packet));
  return out;
}

void RoutingCore::disconnected(const std::string& client_id, std::uint64_t generation) {
  auto it = sessions_.find(client_id);
  if (it == sessions_.end() || it->second.generation != generation) return;
  if (it->second.clean_session) {
    sessions_.erase(it);
  } else {
    it->second.connected = false;
  }
}

mqtt::Suback RoutingCore::subscribe(const std::string& client_id, const mqtt::Subscribe& sub) {
  mqtt::Suback ack{sub.packet_id, {}};
  auto it = sessions_.find(client_id);
  for (const auto& e : sub.entries) {
    if (it == sessions_.end() || mqtt::validate_topic(e.filter, mqtt::TopicKind::Filter)) {
      ack.granted.push_back(mqtt::kSubackFailure);
      continue;
    }
    auto& subs = it->second.subscriptions;
    auto existing = std::find_if(subs.begin(), subs.end(), [&](const auto& x) { return x.filter == e.filter; });
    if (existing != subs.end())
      existing->qos = e.qos;
    else
      subs.push_back(e);
    ack.granted.push_back(static_cast<std::uint8_t>(e.qos));
  }
  return ack;
}

std::optional<std::uint16_t> RoutingCore::allocate_id(Session& s) {
  if (s.outbound_inflight.size() >= 65535) return std::nullopt;
  for (;;) {
    std::uint16_t id = s.next_packet_id;
    s.next_packet_id = static_cast<std::uint16_t>(id == 65535 ? 1 : id + 1);
    if (!s.outbound_inflight.count(id)) return id;
  }
}

void RoutingCore::drain_pending(Session& s, std::vector<Outgoing>& out) {
  if (!s.connected) return;
  while (!s.pending.empty()) {
    mqtt::Publish p = std::move(s.pending.front());
    if (p.qos != mqtt::QoS::AtMostOnce) {
      auto id = allocate_id(s);
      if (!id) {
        s.pending.front() = std::move(p);
        return;
      }
      p.packet_id = *id;
      forget(s.recent_outbound, *id);
      s.outbound_inflight[*id] =
          Inflight{p, p.qos == mqtt::QoS::AtLeastOnce ? OutState::AwaitPuback : OutState::AwaitPubrec, 0};
    }
    s.pending.pop_front();
    out.push_back({s.client_id, std::move(p)});
  }
}

void RoutingCore::enqueue(Session& s, mqtt::Publish p, std::vector<Outgoing>& out) {
  if (!s.connected) {
    if (p.qos == mqtt::QoS::AtMostOnce) {
      ++dropped_offline_;
      return;
    }
    if (s.pending.size() >= offline_queue_limit_) {
      s.pending.pop_front();
      ++dropped_offline_;
    }
    s.pending.push_back(std::move(p));
    return;
  }
  // Keep order behind anything already waiting for an id.
  s.pending.push_back(std::move(p));
  drain_pending(s, out);
}

std::vector<Outgoing> RoutingCore::route_publish(const mqtt::Publish& p, const std::string& from) {
  (void)from;
  ++routed_;
  std::vector<Outgoing> out;
  for (auto& [id, s] : sessions_) {
    (void)id;
    std::optional<mqtt::QoS> granted;
    for (const auto& sub : s.subscriptions) {
      if (mqtt::topic_matches(sub.filter, p.topic) && (!granted || sub.qos > *granted)) granted = sub.qos;
    }
    if (!granted) continue;
    mqtt::Publish d;
    d.topic = p.topic;
    d.qos = std::min(p.qos, *granted);
    d.payload = p.payload;
    enqueue(s, std::move(d), out);
  }
  return out;
}

StepResult RoutingCore::step_qos(const std::string& client_id, const mqtt::ControlPacket& pkt) {
  StepResult r;
  auto it = sessions_.find(client_id);
  if (it == sessions_.end()) {
    r.violation = true;
    r.error = "no session";
    return r;
  }
  Session& s = it->second;
  auto violation = [&](std::string msg) {
    r.violation = true;
    r.error = std::move(msg);
    return r;
  };

  if (auto* p = std::get_if<mqtt::Publish>(&pkt)) {
    switch (p->qos) {
      case mqtt::QoS::AtMostOnce:
        r.deliveries = route_publish(*p, client_id);
        r.routed = 1;
        break;
      case mqtt::QoS::AtLeastOnce:
        r.responses.push_back(mqtt::Puback{*p->packet_id});
        r.deliveries = route_publish(*p, client_id);
        r.routed = 1;
        break;
      case mqtt::QoS::ExactlyOnce: {
        const std::uint16_t id = *p->packet_id;
        // A dup=1 copy of an already released message is acknowledged only.
        const bool stale = p->dup && s.released_inbound.count(id);
        if (!stale && !s.inbound_qos2.count(id)) {
          s.released_inbound.erase(id);
          s.inbound_qos2.emplace(id, *p);
        }
        r.responses.push_back(mqtt::Pubrec{id});
        break;
      }
    }
    return r;
  }
  if (auto* rel = std::get_if<mqtt::Pubrel>(&pkt)) {
    auto m = s.inbound_qos2.find(rel->packet_id);
    if (m != s.inbound_qos2.end()) {
      mqtt::Publish msg = std::move(m->second);
      s.inbound_qos2.erase(m);
      s.released_inbound.insert(rel->packet_id);
      r.deliveries = route_publish(msg, client_id);
      r.routed = 1;
    } else if (!s.released_inbound.count(rel->packet_id)) {
      return violation("PUBREL for unknown packet id " + std::to_string(rel->packet_id));
    }
    r.responses.push_back(mqtt::Pubcomp{rel->packet_id});
    return r;
  }

  auto finish = [&](std::uint16_t id) {
    s.outbound_inflight.erase(id);
    remember(s.recent_outbound, id);
    drain_pending(s, r.deliveries);
  };

  if (auto* a = std::get_if<mqtt::Puback>(&pkt)) {
    auto f = s.outbound_inflight.find(a->packet_id);
    if (f != s.outbound_inflight.end() && f->second.state == OutState::AwaitPuback) {
      finish(a->packet_id);
    } else if (!recently(s.recent_outbound, a->packet_id)) {
      return violation("unexpected PUBACK " + std::to_string(a->packet_id));
    }
    return r;
  }
  if (auto* rec = std::get_if<mqtt::Pubrec>(&pkt)) {
    auto f = s.outbound_inflight.find(rec->packet_id);
    if (f != s.outbound_inflight.end() && f->second.state != OutState::AwaitPuback) {
      f->second.state = OutState::AwaitPubcomp;
      f->second.retransmits = 0;
      r.responses.push_back(mqtt::Pubrel{rec->packet_id});
    } else if (recently(s.recent_outbound, rec->packet_id)) {
      r.responses.push_back(mqtt::Pubrel{rec->packet_id});
    } else {
      return violation("unexpected PUBREC " + std::to_string(rec->packet_id));
    }
    return r;
  }
  if (auto* comp = std::get_if<mqtt::Pubcomp>(&pkt)) {
    auto f = s.outbound_inflight.find(comp->packet_id);
    if (f != s.outbound_inflight.end() && f->second.state == OutState::AwaitPubcomp) {
      finish(comp->packet_id);
    } else if (!recently(s.recent_outbound, comp->packet_id)) {
      return violation("unexpected PUBCOMP " + std::to_string(comp->packet_id));
    }
    return r;
  }
  return violation(std::string("unexpected ") + mqtt::packet_name(pkt));
}

RetransmitResult RoutingCore::retransmit(const std::string& client_id, std::uint16_t packet_id) {
  RetransmitResult r;
  auto it = sessions_.find(client_id);
  if (it == sessions_.end() || !it->second.connected) return r;
  auto f = it->second.outbound_inflight.find(packet_id);
  if (f == it->second.outbound_inflight.end()) return r;
  if (f->second.retransmits >= max_retransmits_) {
    r.action = RetransmitAction::Exhausted;
    return r;
  }
  ++f->second.retransmits;
  r.action = RetransmitAction::Resend;
  r.packet = resend_packet(f->second);
  return r;
}

const Session* RoutingCore::session(const std::string& client_id) const {
  auto it = sessions_.find(client_id);
  return it == sessions_.end() ? nullptr : &it->second;
}

}  // namespace edgebench::broker
