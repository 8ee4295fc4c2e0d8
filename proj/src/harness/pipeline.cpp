#include "edgebench/harness/pipeline.hpp"

#include <stdexcept>

#include "edgebench/bus/probes.hpp"

namespace edgebench::harness {

using probes::Component;
using probes::Edge;

namespace {

// Pipeline queues are deep enough that the stages never drop at the rates we run.
constexpr std::size_t kStageQueue = 1000;

std::optional<bus::TracingBlock> stamped(const bus::MessagePtr& m, Component c, Nanos t_in, Nanos t_out,
                                         std::uint8_t clock) {
  if (!m->trace) return std::nullopt;
  bus::TracingBlock t = *m->trace;
  t.probes.push_back({probes::probe_id(c, Edge::In), static_cast<std::uint64_t>(t_in), clock});
  t.probes.push_back({probes::probe_id(c, Edge::Out), static_cast<std::uint64_t>(t_out), clock});
  return t;
}

}  // namespace

std::shared_ptr<Source> Source::create(std::shared_ptr<bus::LocalBus> bus, std::shared_ptr<Executor> exec,
                                       std::string topic, std::string type_tag, SharedBytes payload, double rate_hz,
                                       std::size_t count, std::uint8_t clock_id) {
  if (!(rate_hz > 0)) throw std::invalid_argument("source rate must be positive");
  auto s = std::shared_ptr<Source>(new Source());
  s->bus_ = std::move(bus);
  s->exec_ = std::move(exec);
  s->topic_ = std::move(topic);
  s->tag_ = std::move(type_tag);
  s->payload_ = std::move(payload);
  s->period_ = static_cast<Nanos>(1e9 / rate_hz);
  s->count_ = count;
  s->clock_ = clock_id;
  return s;
}

void Source::start(Nanos first_at) {
  first_ = first_at;
  if (count_ == 0) return;
  std::weak_ptr<Source> weak = shared_from_this();
  exec_->post_at(first_, [weak] {
    if (auto self = weak.lock()) self->emit(1);
  });
}

void Source::stop() { stopped_ = true; }

void Source::emit(std::size_t i) {
  if (stopped_) return;
  const Nanos t_in = exec_->now();
  bus::TracingBlock t{i, {}};
  t.probes.push_back({probes::probe_id(Component::Source, Edge::In), static_cast<std::uint64_t>(t_in), clock_});
  t.probes.push_back(
      {probes::probe_id(Component::Source, Edge::Out), static_cast<std::uint64_t>(exec_->now()), clock_});
  bus_->publish(bus_->make(topic_, tag_, payload_, std::move(t)));
  ++published_;
  if (i >= count_) return;
  std::weak_ptr<Source> weak = shared_from_this();
  exec_->post_at(first_ + static_cast<Nanos>(i) * period_, [weak, i] {
    if (auto self = weak.lock()) self->emit(i + 1);
  });
}

std::shared_ptr<Converter> Converter::create(std::shared_ptr<bus::LocalBus> bus, std::shared_ptr<Executor> exec,
                                             std::string in_topic, std::string out_topic, std::uint8_t clock_id,
                                             SimCosts costs) {
  auto c = std::shared_ptr<Converter>(new Converter());
  c->bus_ = std::move(bus);
  c->exec_ = std::move(exec);
  c->in_ = std::move(in_topic);
  c->out_ = std::move(out_topic);
  c->clock_ = clock_id;
  c->costs_ = costs;
  return c;
}

void Converter::start() {
  std::weak_ptr<Converter> weak = shared_from_this();
  sub_ = bus_->subscribe(in_, kStageQueue, exec_, [weak](const bus::MessagePtr& m) {
    if (auto self = weak.lock()) self->on_message(m);
  });
}

void Converter::stop() {
  if (sub_) sub_->unsubscribe();
}

void Converter::on_message(const bus::MessagePtr& m) {
  const Nanos t_in = exec_->now();
  if (m->type_tag != kTagCompact) {
    ++errors_;
    return;
  }
  SharedBytes out;
  std::size_t points = 0;
  try {
    auto cloud = scan::expand(scan::parse_compact(*m->payload), calib_);
    points = cloud.points.size();
    out = share(scan::serialize(cloud));
  } catch (const std::exception&) {
    ++errors_;
    return;
  }
  const Nanos cost = exec_->simulated() ? static_cast<Nanos>(points) * costs_.convert_per_point : 0;
  exec_->charge(cost, [self = shared_from_this(), m, t_in, out] {
    auto trace = stamped(m, Component::Converter, t_in, self->exec_->now(), self->clock_);
    self->bus_->publish(self->bus_->make(self->out_, kTagExpanded, out, std::move(trace)));
  });
}

std::shared_ptr<Detector> Detector::create(std::shared_ptr<bus::LocalBus> bus, std::shared_ptr<Executor> exec,
                                           std::string in_topic, std::string out_topic, std::uint8_t clock_id,
                                           scan::DetectConfig cfg, bool loop_through, SimCosts costs) {
  auto d = std::shared_ptr<Detector>(new Detector());
  d->bus_ = std::move(bus);
  d->exec_ = std::move(exec);
  d->in_ = std::move(in_topic);
  d->out_ = std::move(out_topic);
  d->clock_ = clock_id;
  d->cfg_ = cfg;
  d->loop_through_ = loop_through;
  d->costs_ = costs;
  return d;
}

void Detector::start() {
  std::weak_ptr<Detector> weak = shared_from_this();
  sub_ = bus_->subscribe(in_, kStageQueue, exec_, [weak](const bus::MessagePtr& m) {
    if (auto self = weak.lock()) self->on_message(m);
  });
}

void Detector::stop() {
  if (sub_) sub_->unsubscribe();
}

void Detector::on_message(const bus::MessagePtr& m) {
  const Nanos t_in = exec_->now();
  if (loop_through_) {
    auto trace = stamped(m, Component::Detector, t_in, exec_->now(), clock_);
    bus_->publish(bus_->make(out_, m->type_tag, m->payload, std::move(trace)));
    ++processed_;
    return;
  }
  if (m->type_tag != kTagExpanded) {
    ++errors_;
    return;
  }
  scan::ExpandedCloud cloud;
  try {
    cloud = scan::parse_expanded(*m->payload);
  } catch (const std::exception&) {
    ++errors_;
    return;
  }
  auto finish = [self = shared_from_this(), m, t_in](scan::ObjectList objects) {
    auto trace = stamped(m, Component::Detector, t_in, self->exec_->now(), self->clock_);
    self->bus_->publish(self->bus_->make(self->out_, kTagObjects, share(scan::serialize(objects)), std::move(trace)));
    ++self->processed_;
  };
  if (exec_->simulated()) {
    auto objects = scan::cluster(cloud, cfg_);
    const Nanos work = static_cast<Nanos>(cloud.points.size()) * costs_.cluster_per_point;
    exec_->busy_for(std::max(work, from_ms(cfg_.fixed_compute_delay_ms)),
                    [finish, objects = std::move(objects)]() mutable { finish(std::move(objects)); });
  } else {
    finish(scan::detect(cloud, cfg_));
  }
}

std::shared_ptr<Sink> Sink::create(std::shared_ptr<bus::LocalBus> bus, std::shared_ptr<Executor> exec,
                                   std::string topic, std::uint8_t clock_id) {
  auto s = std::shared_ptr<Sink>(new Sink());
  s->bus_ = std::move(bus);
  s->exec_ = std::move(exec);
  s->topic_ = std::move(topic);
  s->clock_ = clock_id;
  return s;
}

void Sink::start() {
  std::weak_ptr<Sink> weak = shared_from_this();
  sub_ = bus_->subscribe(topic_, kStageQueue, exec_, [weak](const bus::MessagePtr& m) {
    if (auto self = weak.lock()) self->on_message(m);
  });
}

void Sink::stop() {
  if (sub_) sub_->unsubscribe();
}

void Sink::on_message(const bus::MessagePtr& m) {
  const Nanos t = exec_->now();
  if (m->trace) {
    bus::TracingBlock tb = *m->trace;
    tb.probes.push_back({probes::probe_id(Component::Sink, Edge::In), static_cast<std::uint64_t>(t), clock_});
    std::lock_guard lk(mu_);
    traces_.push_back(std::move(tb));
  }
  ++received_;
}

std::vector<bus::TracingBlock> Sink::traces() const {
  std::lock_guard lk(mu_);
  return traces_;
}

}  // namespace edgebench::harness
