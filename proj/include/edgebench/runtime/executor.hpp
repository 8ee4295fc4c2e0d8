#pragma once

// Serial execution contexts. Every component (broker, client, bridge, pipeline
// stage) runs its callbacks on exactly one Executor, so component state needs
// no locking. Two implementations exist: SimExecutor on a shared virtual clock
// (deterministic, single-threaded) and a real-time executor backed by an
// event-loop thread (see asio_runtime.hpp).

#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <queue>
#include <string>
#include <vector>

#include "edgebench/bytes.hpp"

namespace edgebench {

using Task = std::function<void()>;

inline constexpr Nanos kMillis = 1'000'000;
inline constexpr Nanos kSeconds = 1'000'000'000;

inline double to_ms(Nanos ns) { return static_cast<double>(ns) / 1e6; }
inline Nanos from_ms(double ms) { return static_cast<Nanos>(ms * 1e6 + (ms >= 0 ? 0.5 : -0.5)); }

/// Handle to a scheduled callback; cancel() prevents it from running.
class Timer {
 public:
  Timer() = default;
  explicit Timer(std::shared_ptr<std::atomic<bool>> flag) : cancelled_(std::move(flag)) {}
  void cancel() {
    if (cancelled_) cancelled_->store(true);
  }
  bool active() const { return cancelled_ && !cancelled_->load(); }

 private:
  std::shared_ptr<std::atomic<bool>> cancelled_;
};

class Executor {
 public:
  virtual ~Executor() = default;

  /// Local clock of the host this executor belongs to, in nanoseconds.
  virtual Nanos now() const = 0;
  virtual void post(Task t) = 0;
  /// Runs `t` no earlier than local time `when`.
  virtual Timer post_at(Nanos when, Task t) = 0;
  Timer post_after(Nanos delay, Task t) { return post_at(now() + delay, std::move(t)); }

  /// Occupies this executor for `d` (busy-wait in real time), then runs `then`.
  virtual void busy_for(Nanos d, Task then) = 0;
  /// Accounts for work whose cost is modeled rather than measured. A no-op
  /// delay in real time (the work already took real time), `d` in simulation.
  virtual void charge(Nanos d, Task then) = 0;

  virtual bool simulated() const = 0;
  virtual const std::string& name() const = 0;
};

class SimExecutor;

/// Discrete-event world: one virtual clock and one ordered event queue shared
/// by all SimExecutors. Ties are broken by insertion order, which makes every
/// run with the same inputs replay identically.
class SimWorld {
 public:
  SimWorld() = default;
  SimWorld(const SimWorld&) = delete;
  SimWorld& operator=(const SimWorld&) = delete;

  Nanos now() const { return now_; }

  /// Creates an executor whose local clock reads `virtual time + clock_offset`.
  std::shared_ptr<SimExecutor> make_executor(std::string name, Nanos clock_offset = 0);

  void schedule(Nanos when, Task t);

  /// Runs the next event; returns false when the queue is empty.
  bool step();
  void run_until(Nanos t);
  /// Runs until `done()` holds or the queue drains or virtual time passes `deadline`.
  template <typename Pred>
  bool run_until(Pred done, Nanos deadline) {
    while (!done()) {
      if (queue_.empty() || queue_.top().when > deadline) return done();
      step();
    }
    return true;
  }
  void run_until_idle(Nanos deadline);
  std::size_t pending() const { return queue_.size(); }
  std::uint64_t events_run() const { return events_run_; }

 private:
  struct Event {
    Nanos when;
    std::uint64_t seq;
    Task task;
  };
  struct Later {
    bool operator()(const Event& a, const Event& b) const {
      return a.when != b.when ? a.when > b.when : a.seq > b.seq;
    }
  };

  Nanos now_ = 0;
  std::uint64_t seq_ = 0;
  std::uint64_t events_run_ = 0;
  std::priority_queue<Event, std::vector<Event>, Later> queue_;
};

class SimExecutor final : public Executor, public std::enable_shared_from_this<SimExecutor> {
 public:
  SimExecutor(SimWorld& world, std::string name, Nanos clock_offset)
      : world_(world), name_(std::move(name)), offset_(clock_offset) {}

  Nanos now() const override { return world_.now() + offset_; }
  void post(Task t) override;
  Timer post_at(Nanos when, Task t) override;
  void busy_for(Nanos d, Task then) override;
  void charge(Nanos d, Task then) override { busy_for(d, std::move(then)); }
  bool simulated() const override { return true; }
  const std::string& name() const override { return name_; }

  SimWorld& world() { return world_; }
  Nanos clock_offset() const { return offset_; }

 private:
  // Runs `t` at virtual time `at`, deferred while the executor is occupied.
  void run_at_virtual(Nanos at, Task t);

  SimWorld& world_;
  std::string name_;
  Nanos offset_;
  Nanos busy_until_ = 0;
};

}  // namespace edgebench
