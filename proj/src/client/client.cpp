#include "edgebench/client/client.hpp"

#include <algorithm>
#include <stdexcept>

#include "edgebench/mqtt/topic.hpp"
#include "edgebench/runtime/asio_runtime.hpp"

namespace edgebench::client {

const char* to_string(ClientError e) {
  switch (e) {
    case ClientError::None: return "ok";
    case ClientError::AuthFailure: return "auth failure";
    case ClientError::ConnectFailed: return "connect failed";
    case ClientError::BufferOverflow: return "buffer overflow";
    case ClientError::Timeout: return "timeout";
    case ClientError::SubscriptionRefused: return "subscription refused";
    case ClientError::InvalidTopic: return "invalid topic";
    case ClientError::Closed: return "closed";
  }
  return "?";
}

void ClientOptions::validate() const {
  if (outbound_buffer_limit < 1) throw std::invalid_argument("outbound_buffer_limit must be >= 1");
  if (reconnect.backoff_initial <= 0 || reconnect.backoff_initial > reconnect.backoff_max)
    throw std::invalid_argument("need 0 < backoff_initial <= backoff_max");
  if (password && !username) throw std::invalid_argument("password requires a username");
  if (retransmit_initial <= 0) throw std::invalid_argument("retransmit_initial must be > 0");
}

Dialer tcp_dialer_for(const ClientOptions& opts) {
  return tcp_dialer(opts.broker_host, opts.broker_port, TlsClientOptions{opts.tls, opts.tls_ca_pem});
}

std::shared_ptr<Client> Client::create(std::shared_ptr<Executor> exec, Dialer dialer, ClientOptions opts) {
  opts.validate();
  return std::shared_ptr<Client>(new Client(std::move(exec), std::move(dialer), std::move(opts)));
}

Client::Client(std::shared_ptr<Executor> exec, Dialer dialer, ClientOptions opts)
    : exec_(std::move(exec)), dialer_(std::move(dialer)), opts_(std::move(opts)) {}

Client::~Client() = default;

void Client::connect(std::function<void(ClientError)> done) {
  exec_->post([self = shared_from_this(), done = std::move(done)]() mutable {
    if (self->state_ != State::Idle) return;
    self->first_done_ = std::move(done);
    self->start_connect();
  });
}

void Client::on_connection_change(std::function<void(bool)> cb) {
  exec_->post([self = shared_from_this(), cb = std::move(cb)]() mutable { self->on_change_ = std::move(cb); });
}

void Client::start_connect() {
  state_ = State::Connecting;
  const std::uint64_t gen = ++gen_;
  std::weak_ptr<Client> weak = shared_from_this();
  dialer_(*exec_, [weak, gen](ConnectionPtr c, std::string error) {
    auto self = weak.lock();
    if (!self || self->gen_ != gen || self->state_ != State::Connecting) {
      if (c) c->close();
      return;
    }
    self->on_dialed(std::move(c), error);
  });
}

void Client::on_dialed(ConnectionPtr c, const std::string& error) {
  if (!c || !error.empty()) {
    if (opts_.reconnect.enabled) {
      schedule_reconnect();
    } else {
      state_ = State::Idle;
      fail_first(ClientError::ConnectFailed);
    }
    return;
  }
  conn_ = std::move(c);
  inbuf_.clear();
  const std::uint64_t gen = gen_;
  std::weak_ptr<Client> weak = shared_from_this();
  conn_->start({[weak, gen](ByteView d) {
                  if (auto self = weak.lock()) self->on_data(gen, d);
                },
                [weak, gen] {
                  if (auto self = weak.lock()) self->on_closed(gen);
                }});
  mqtt::Connect pkt;
  pkt.client_id = opts_.client_id;
  pkt.username = opts_.username;
  if (opts_.password) pkt.password = Bytes(opts_.password->begin(), opts_.password->end());
  pkt.keep_alive = opts_.keep_alive;
  pkt.clean_session = opts_.clean_session;
  last_rx_ = exec_->now();
  send(pkt);
  connect_timer_ = exec_->post_after(opts_.connect_timeout, [weak, gen] {
    auto self = weak.lock();
    if (self && self->gen_ == gen && self->state_ == State::Connecting && self->conn_) self->conn_->close();
  });
}

void Client::schedule_reconnect() {
  state_ = State::Backoff;
  if (backoff_ <= 0) backoff_ = opts_.reconnect.backoff_initial;
  const Nanos delay = backoff_;
  backoff_ = std::min(backoff_ * 2, opts_.reconnect.backoff_max);
  std::weak_ptr<Client> weak = shared_from_this();
  backoff_timer_ = exec_->post_after(delay, [weak] {
    auto self = weak.lock();
    if (self && self->state_ == State::Backoff) self->start_connect();
  });
}

void Client::on_data(std::uint64_t gen, ByteView data) {
  if (gen != gen_ || !conn_) return;
  last_rx_ = exec_->now();
  inbuf_.insert(inbuf_.end(), data.begin(), data.end());
  std::size_t off = 0;
  while (off < inbuf_.size()) {
    auto r = mqtt::decode_packet(ByteView(inbuf_).subspan(off));
    if (r.status == mqtt::DecodeStatus::NeedMoreData) break;
    if (r.status == mqtt::DecodeStatus::Malformed) {
      conn_->close();
      return;
    }
    off += r.consumed;
    handle(r.packet);
    if (gen != gen_ || !conn_) return;
  }
  inbuf_.erase(inbuf_.begin(), inbuf_.begin() + static_cast<std::ptrdiff_t>(off));
}

void Client::on_closed(std::uint64_t gen) {
  if (gen != gen_) return;
  conn_.reset();
  connect_timer_.cancel();
  keepalive_timer_.cancel();
  for (auto& [id, m] : inflight_) {
    (void)id;
    m.timer.cancel();
  }
  const bool was_connected = state_ == State::Connected;
  if (was_connected) set_connected(false);
  if (state_ == State::Stopped) return;
  if (opts_.reconnect.enabled) {
    schedule_reconnect();
  } else {
    state_ = State::Idle;
    if (!ever_connected_) fail_first(ClientError::ConnectFailed);
  }
}

void Client::set_connected(bool v) {
  connected_flag_ = v;
  if (on_change_) on_change_(v);
}

void Client::fail_first(ClientError e) {
  if (auto f = std::move(first_done_)) {
    first_done_ = nullptr;
    f(e);
  }
}

void Client::send(const mqtt::ControlPacket& p) {
  if (!conn_) return;
  last_tx_ = exec_->now();
  conn_->send(share(mqtt::encode_packet(p)));
}

void Client::handle_connack(const mqtt::Connack& c) {
  connect_timer_.cancel();
  if (c.return_code != 0) {
    state_ = State::Stopped;
    fail_first(c.return_code == 4 || c.return_code == 5 ? ClientError::AuthFailure : ClientError::ConnectFailed);
    if (conn_) conn_->close();
    return;
  }
  state_ = State::Connected;
  if (ever_connected_) ++stats_.reconnects;
  ever_connected_ = true;
  backoff_ = 0;
  if (!c.session_present) {
    inbound_qos2_.clear();
    released_qos2_.clear();
  }
  set_connected(true);

  if (!subs_.empty()) {
    std::vector<std::string> filters;
    for (auto& s : subs_) filters.push_back(s.filter);
    send_subscribe(std::move(filters));
  }

  std::vector<std::uint16_t> ids;
  for (auto& [id, m] : inflight_) ids.push_back(id);
  for (auto id : ids) {
    auto& m = inflight_.at(id);
    if (m.state == OutState::AwaitPubcomp) {
      if (!c.session_present) {
        // The broker already acknowledged receipt; a fresh session cannot complete it.
        finish(id, ClientError::None);
        continue;
      }
      send(mqtt::Pubrel{id});
    } else {
      mqtt::Publish p = m.pub;
      p.dup = true;
      send(p);
    }
    arm_retransmit(id, opts_.retransmit_initial);
  }
  flush_buffer();
  arm_keepalive();
  fail_first(ClientError::None);
}

void Client::send_subscribe(std::vector<std::string> filters) {
  auto id = allocate_id();
  if (!id) return;
  mqtt::Subscribe s{*id, {}};
  PendingSub pending;
  for (auto& f : filters) {
    auto it = std::find_if(subs_.begin(), subs_.end(), [&](const Subscription& x) { return x.filter == f; });
    if (it == subs_.end()) continue;
    s.entries.push_back({f, it->qos});
    pending.filters.push_back(f);
    auto d = unsent_sub_dones_.find(f);
    if (d != unsent_sub_dones_.end()) {
      pending.dones.push_back(std::move(d->second));
      unsent_sub_dones_.erase(d);
    } else {
      pending.dones.push_back(nullptr);
    }
  }
  if (s.entries.empty()) return;
  pending_subs_[*id] = std::move(pending);
  send(s);
}

void Client::handle(const mqtt::ControlPacket& pkt) {
  if (auto* c = std::get_if<mqtt::Connack>(&pkt)) {
    if (state_ == State::Connecting) handle_connack(*c);
    return;
  }
  if (state_ != State::Connected) return;

  if (auto* p = std::get_if<mqtt::Publish>(&pkt)) {
    if (p->dup) ++stats_.dup_received;
    switch (p->qos) {
      case mqtt::QoS::AtMostOnce:
        dispatch(*p);
        break;
      case mqtt::QoS::AtLeastOnce:
        dispatch(*p);
        send(mqtt::Puback{*p->packet_id});
        break;
      case mqtt::QoS::ExactlyOnce:
        if (p->dup && released_qos2_.count(*p->packet_id)) {
          ++stats_.duplicates_suppressed;
        } else if (inbound_qos2_.insert(*p->packet_id).second) {
          released_qos2_.erase(*p->packet_id);
          dispatch(*p);
        } else {
          ++stats_.duplicates_suppressed;
        }
        send(mqtt::Pubrec{*p->packet_id});
        break;
    }
    return;
  }
  if (auto* rel = std::get_if<mqtt::Pubrel>(&pkt)) {
    if (inbound_qos2_.erase(rel->packet_id)) released_qos2_.insert(rel->packet_id);
    send(mqtt::Pubcomp{rel->packet_id});
    return;
  }
  if (auto* a = std::get_if<mqtt::Puback>(&pkt)) {
    auto it = inflight_.find(a->packet_id);
    if (it != inflight_.end() && it->second.state == OutState::AwaitPuback) finish(a->packet_id, ClientError::None);
    return;
  }
  if (auto* r = std::get_if<mqtt::Pubrec>(&pkt)) {
    auto it = inflight_.find(r->packet_id);
    if (it == inflight_.end()) return;
    if (it->second.state == OutState::AwaitPubrec) {
      it->second.state = OutState::AwaitPubcomp;
      it->second.retransmits = 0;
      arm_retransmit(r->packet_id, opts_.retransmit_initial);
    }
    if (it->second.state == OutState::AwaitPubcomp) send(mqtt::Pubrel{r->packet_id});
    return;
  }
  if (auto* c = std::get_if<mqtt::Pubcomp>(&pkt)) {
    auto it = inflight_.find(c->packet_id);
    if (it != inflight_.end() && it->second.state == OutState::AwaitPubcomp) finish(c->packet_id, ClientError::None);
    return;
  }
  if (auto* s = std::get_if<mqtt::Suback>(&pkt)) {
    auto it = pending_subs_.find(s->packet_id);
    if (it == pending_subs_.end()) return;
    PendingSub pending = std::move(it->second);
    pending_subs_.erase(it);
    for (std::size_t i = 0; i < pending.filters.size(); ++i) {
      const std::uint8_t g = i < s->granted.size() ? s->granted[i] : mqtt::kSubackFailure;
      if (g == mqtt::kSubackFailure) {
        subs_.erase(std::remove_if(subs_.begin(), subs_.end(),
                                   [&](const Subscription& x) { return x.filter == pending.filters[i]; }),
                    subs_.end());
        if (pending.dones[i]) pending.dones[i](ClientError::SubscriptionRefused, mqtt::QoS::AtMostOnce);
      } else if (pending.dones[i]) {
        pending.dones[i](ClientError::None, static_cast<mqtt::QoS>(g));
      }
    }
    // Packet id of the SUBSCRIBE is free again; a blocked publish may proceed.
    flush_buffer();
    return;
  }
}

void Client::dispatch(const mqtt::Publish& p) {
  for (auto& s : subs_) {
    if (mqtt::topic_matches(s.filter, p.topic)) {
      ++stats_.delivered;
      if (s.sink) s.sink(p);
    }
  }
}

void Client::subscribe(std::string filter, mqtt::QoS qos, MessageSink sink,
                       std::function<void(ClientError, mqtt::QoS)> done) {
  exec_->post([self = shared_from_this(), filter = std::move(filter), qos, sink = std::move(sink),
                done = std::move(done)]() mutable {
    if (mqtt::validate_topic(filter, mqtt::TopicKind::Filter)) {
      if (done) done(ClientError::InvalidTopic, mqtt::QoS::AtMostOnce);
      return;
    }
    auto it = std::find_if(self->subs_.begin(), self->subs_.end(),
                           [&](const Subscription& x) { return x.filter == filter; });
    if (it != self->subs_.end()) {
      it->qos = qos;
      it->sink = std::move(sink);
    } else {
      self->subs_.push_back({filter, qos, std::move(sink)});
    }
    if (done) self->unsent_sub_dones_[filter] = std::move(done);
    if (self->state_ == State::Connected) self->send_subscribe({filter});
  });
}

void Client::publish(std::string topic, Bytes payload, mqtt::QoS qos, Completion done) {
  exec_->post([self = shared_from_this(), q = Queued{std::move(topic), std::move(payload), qos, std::move(done)}]() mutable {
    if (mqtt::validate_topic(q.topic, mqtt::TopicKind::Name)) {
      if (q.done) q.done(ClientError::InvalidTopic);
      return;
    }
    if (self->state_ == State::Stopped) {
      if (q.done) q.done(ClientError::Closed);
      return;
    }
    ++self->stats_.published;
    if (self->state_ == State::Connected && self->buffer_.empty())
      self->send_publish_now(std::move(q));
    else
      self->buffer(std::move(q));
  });
}

void Client::buffer(Queued q) {
  if (buffer_.size() >= opts_.outbound_buffer_limit) {
    ++stats_.buffer_drops;
    if (!opts_.drop_oldest) {
      if (q.done) q.done(ClientError::BufferOverflow);
      return;
    }
    Queued old = std::move(buffer_.front());
    buffer_.pop_front();
    if (old.done) old.done(ClientError::BufferOverflow);
  }
  buffer_.push_back(std::move(q));
}

void Client::send_publish_now(Queued q) {
  mqtt::Publish p;
  p.topic = std::move(q.topic);
  p.qos = q.qos;
  p.payload = std::move(q.payload);
  if (q.qos == mqtt::QoS::AtMostOnce) {
    send(p);
    ++stats_.completed;
    if (q.done) q.done(ClientError::None);
    return;
  }
  auto id = allocate_id();
  if (!id) {
    q.topic = std::move(p.topic);
    q.payload = std::move(p.payload);
    buffer_.push_front(std::move(q));
    return;
  }
  p.packet_id = *id;
  send(p);
  OutMsg m;
  m.pub = std::move(p);
  m.done = std::move(q.done);
  m.state = q.qos == mqtt::QoS::AtLeastOnce ? OutState::AwaitPuback : OutState::AwaitPubrec;
  inflight_[*id] = std::move(m);
  arm_retransmit(*id, opts_.retransmit_initial);
}

void Client::flush_buffer() {
  while (state_ == State::Connected && !buffer_.empty()) {
    if (buffer_.front().qos != mqtt::QoS::AtMostOnce && inflight_.size() + pending_subs_.size() >= 65535) return;
    Queued q = std::move(buffer_.front());
    buffer_.pop_front();
    send_publish_now(std::move(q));
  }
}

std::optional<std::uint16_t> Client::allocate_id() {
  if (inflight_.size() + pending_subs_.size() >= 65535) return std::nullopt;
  for (;;) {
    const std::uint16_t id = next_id_;
    next_id_ = static_cast<std::uint16_t>(id == 65535 ? 1 : id + 1);
    if (!inflight_.count(id) && !pending_subs_.count(id)) return id;
  }
}

void Client::arm_retransmit(std::uint16_t id, Nanos delay) {
  auto it = inflight_.find(id);
  if (it == inflight_.end()) return;
  it->second.timer.cancel();
  std::weak_ptr<Client> weak = shared_from_this();
  it->second.timer = exec_->post_after(delay, [weak, id, delay] {
    auto self = weak.lock();
    if (!self || self->state_ != State::Connected) return;
    auto it = self->inflight_.find(id);
    if (it == self->inflight_.end()) return;
    OutMsg& m = it->second;
    if (m.retransmits >= self->opts_.max_retransmits) {
      ++self->stats_.timeouts;
      self->finish(id, ClientError::Timeout);
      return;
    }
    ++m.retransmits;
    ++self->stats_.retransmits;
    if (m.state == OutState::AwaitPubcomp) {
      self->send(mqtt::Pubrel{id});
    } else {
      mqtt::Publish p = m.pub;
      p.dup = true;
      self->send(p);
    }
    self->arm_retransmit(id, delay * 2);
  });
}

void Client::finish(std::uint16_t id, ClientError e) {
  auto it = inflight_.find(id);
  if (it == inflight_.end()) return;
  it->second.timer.cancel();
  Completion done = std::move(it->second.done);
  inflight_.erase(it);
  if (e == ClientError::None) ++stats_.completed;
  if (done) done(e);
  flush_buffer();
}

void Client::arm_keepalive() {
  if (opts_.keep_alive == 0) return;
  const Nanos ka = static_cast<Nanos>(opts_.keep_alive) * kSeconds;
  std::weak_ptr<Client> weak = shared_from_this();
  const std::uint64_t gen = gen_;
  keepalive_timer_ = exec_->post_after(ka / 2, [weak, gen, ka] {
    auto self = weak.lock();
    if (!self || self->gen_ != gen || self->state_ != State::Connected || !self->conn_) return;
    const Nanos now = self->exec_->now();
    if (now - self->last_rx_ > ka + ka / 2) {
      self->conn_->close();
      return;
    }
    if (now - self->last_tx_ >= ka / 2) self->send(mqtt::Pingreq{});
    self->arm_keepalive();
  });
}

void Client::disconnect() {
  exec_->post([self = shared_from_this()] {
    const bool was_connected = self->state_ == State::Connected;
    self->state_ = State::Stopped;
    self->backoff_timer_.cancel();
    self->connect_timer_.cancel();
    self->keepalive_timer_.cancel();
    if (self->conn_) {
      if (was_connected) self->send(mqtt::Disconnect{});
      self->conn_->close();
    }
    if (was_connected) self->set_connected(false);
    auto inflight = std::move(self->inflight_);
    self->inflight_.clear();
    for (auto& [id, m] : inflight) {
      (void)id;
      m.timer.cancel();
      if (m.done) m.done(ClientError::Closed);
    }
    auto buffered = std::move(self->buffer_);
    self->buffer_.clear();
    for (auto& q : buffered)
      if (q.done) q.done(ClientError::Closed);
    self->fail_first(ClientError::Closed);
  });
}

void Client::drop_connection() {
  exec_->post([self = shared_from_this()] {
    if (self->conn_) self->conn_->close();
  });
}

}  // namespace edgebench::client
