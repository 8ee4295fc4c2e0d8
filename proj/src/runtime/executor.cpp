#include "edgebench/runtime/executor.hpp"

#include <algorithm>

namespace edgebench {

std::shared_ptr<SimExecutor> SimWorld::make_executor(std::string name, Nanos clock_offset) {
  return std::make_shared<SimExecutor>(*this, std::move(name), clock_offset);
}

void SimWorld::schedule(Nanos when, Task t) {
  queue_.push(Event{std::max(when, now_), seq_++, std::move(t)});
}

bool SimWorld::step() {
  if (queue_.empty()) return false;
  // priority_queue::top is const; move the task out before popping.
  Event ev = std::move(const_cast<Event&>(queue_.top()));
  queue_.pop();
  now_ = ev.when;
  ++events_run_;
  ev.task();
  return true;
}

void SimWorld::run_until(Nanos t) {
  while (!queue_.empty() && queue_.top().when <= t) step();
  now_ = std::max(now_, t);
}

void SimWorld::run_until_idle(Nanos deadline) {
  while (!queue_.empty() && queue_.top().when <= deadline) step();
}

void SimExecutor::run_at_virtual(Nanos at, Task t) {
  auto self = shared_from_this();
  world_.schedule(at, [self, t = std::move(t)]() mutable {
    if (self->world_.now() < self->busy_until_) {
      self->run_at_virtual(self->busy_until_, std::move(t));
      return;
    }
    t();
  });
}

void SimExecutor::post(Task t) { run_at_virtual(world_.now(), std::move(t)); }

Timer SimExecutor::post_at(Nanos when, Task t) {
  auto flag = std::make_shared<std::atomic<bool>>(false);
  run_at_virtual(when - offset_, [flag, t = std::move(t)] {
    if (!flag->load()) t();
  });
  return Timer(flag);
}

void SimExecutor::busy_for(Nanos d, Task then) {
  busy_until_ = std::max(busy_until_, world_.now()) + std::max<Nanos>(d, 0);
  // Scheduled directly on the world so it is not deferred by its own occupancy.
  world_.schedule(busy_until_, std::move(then));
}

}  // namespace edgebench
