#include "edgebench/bus/local_bus.hpp"

#include <algorithm>
#include <stdexcept>

namespace edgebench::bus {

Subscription::Subscription(std::weak_ptr<LocalBus> bus, std::string topic, std::size_t queue_size,
                           std::shared_ptr<Executor> exec, Sink sink, Nanos hop)
    : bus_(std::move(bus)),
      topic_(std::move(topic)),
      queue_size_(queue_size),
      exec_(std::move(exec)),
      sink_(std::move(sink)),
      hop_(hop) {}

Subscription::~Subscription() { active_ = false; }

void Subscription::unsubscribe() {
  if (!active_.exchange(false)) return;
  if (auto b = bus_.lock()) b->remove(this);
  std::lock_guard lk(mu_);
  queue_.clear();
}

void Subscription::enqueue(const MessagePtr& m) {
  if (!active_) return;
  bool schedule = false;
  {
    std::lock_guard lk(mu_);
    if (queue_.size() >= queue_size_) {
      queue_.pop_front();
      ++dropped_;
    }
    queue_.push_back(m);
    if (!scheduled_) scheduled_ = schedule = true;
  }
  if (!schedule) return;
  auto task = [w = self_] {
    if (auto s = w.lock()) s->drain();
  };
  if (exec_->simulated() && hop_ > 0)
    exec_->post_after(hop_, std::move(task));
  else
    exec_->post(std::move(task));
}

void Subscription::drain() {
  MessagePtr m;
  bool more = false;
  {
    std::lock_guard lk(mu_);
    if (queue_.empty()) {
      scheduled_ = false;
      return;
    }
    m = std::move(queue_.front());
    queue_.pop_front();
    more = !queue_.empty();
    if (!more) scheduled_ = false;
  }
  if (active_) {
    ++delivered_;
    sink_(m);
  }
  // One message per task, so a slow sink lets other work on the executor interleave.
  if (more) exec_->post([w = self_] {
    if (auto s = w.lock()) s->drain();
  });
}

std::shared_ptr<LocalBus> LocalBus::create(Nanos sim_hop) { return std::shared_ptr<LocalBus>(new LocalBus(sim_hop)); }

MessagePtr LocalBus::make(std::string topic, std::string type_tag, SharedBytes payload,
                          std::optional<TracingBlock> trace) {
  auto m = std::make_shared<BusMessage>();
  m->topic = std::move(topic);
  m->type_tag = std::move(type_tag);
  m->payload = payload ? std::move(payload) : share({});
  m->identity = next_identity_++;
  m->trace = std::move(trace);
  return m;
}

std::size_t LocalBus::publish(const MessagePtr& m) {
  ++published_;
  std::vector<SubscriptionPtr> targets;
  {
    std::lock_guard lk(mu_);
    auto it = subs_.find(m->topic);
    if (it == subs_.end()) return 0;
    for (auto& w : it->second)
      if (auto s = w.lock()) targets.push_back(std::move(s));
  }
  for (auto& s : targets) s->enqueue(m);
  return targets.size();
}

SubscriptionPtr LocalBus::subscribe(const std::string& topic, std::size_t queue_size, std::shared_ptr<Executor> exec,
                                    Sink sink) {
  if (queue_size < 1) throw std::invalid_argument("queue_size must be >= 1");
  SubscriptionPtr s(new Subscription(weak_from_this(), topic, queue_size, std::move(exec), std::move(sink), sim_hop_));
  s->self_ = s;
  std::lock_guard lk(mu_);
  auto& v = subs_[topic];
  v.erase(std::remove_if(v.begin(), v.end(), [](const auto& w) { return w.expired(); }), v.end());
  v.push_back(s);
  return s;
}

void LocalBus::remove(Subscription* s) {
  std::lock_guard lk(mu_);
  auto it = subs_.find(s->topic_);
  if (it == subs_.end()) return;
  auto& v = it->second;
  v.erase(std::remove_if(v.begin(), v.end(),
                         [s](const auto& w) {
                           auto p = w.lock();
                           return !p || p.get() == s;
                         }),
          v.end());
}

}  // namespace edgebench::bus
