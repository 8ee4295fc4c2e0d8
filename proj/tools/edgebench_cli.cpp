#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "edgebench/bridge/bridge.hpp"
#include "edgebench/broker/broker_config.hpp"
#include "edgebench/bus/probes.hpp"
#include "edgebench/config_error.hpp"
#include "edgebench/harness/pipeline.hpp"
#include "edgebench/harness/presets.hpp"
#include "edgebench/harness/report_io.hpp"
#include "edgebench/harness/sweep.hpp"
#include "edgebench/runtime/asio_runtime.hpp"
#include "edgebench/scan/scan.hpp"

namespace eb = edgebench;
namespace h = edgebench::harness;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitAborted = 3;

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop = true; }

void wait_for_signal() {
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
}

std::string read_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw eb::ValidationError("cannot read " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::optional<std::uint64_t> env_seed() {
  const char* s = std::getenv("BENCH_SEED");
  if (!s || !*s) return std::nullopt;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(s, &end, 10);
  if (*end != '\0') throw eb::ValidationError(std::string("BENCH_SEED is not an unsigned integer: ") + s);
  return v;
}

int run_broker(const std::string& config_path) {
  auto cfg = eb::broker::load_broker_config(config_path);
  std::shared_ptr<std::ofstream> log;
  if (!cfg.log_file.empty()) {
    log = std::make_shared<std::ofstream>(cfg.log_file, std::ios::app);
    if (!*log) throw eb::ValidationError("cannot open log file " + cfg.log_file);
    cfg.options.log = [log](const std::string& line) { *log << line << '\n'; };
  }
  auto exec = eb::make_realtime_executor("broker");
  auto broker = eb::broker::Broker::create(exec, cfg.options);
  std::vector<std::unique_ptr<eb::TcpListener>> listeners;
  if (cfg.tcp) {
    listeners.push_back(eb::listen_tcp(exec, cfg.tcp->host, cfg.tcp->port, std::nullopt, broker->acceptor()));
    std::cerr << "broker: tcp on " << cfg.tcp->host << ":" << listeners.back()->port() << "\n";
  }
  if (cfg.tls) {
    eb::TlsIdentity id;
    if (cfg.tls->cert_file.empty()) {
      id = eb::generate_self_signed("localhost");
    } else {
      id.cert_pem = read_file(cfg.tls->cert_file);
      id.key_pem = read_file(cfg.tls->key_file);
    }
    listeners.push_back(eb::listen_tcp(exec, cfg.tls->host, cfg.tls->port, id, broker->acceptor()));
    std::cerr << "broker: tls on " << cfg.tls->host << ":" << listeners.back()->port() << "\n";
  }
  wait_for_signal();
  for (auto& l : listeners) l->close();
  exec->post([broker] { broker->shutdown(); });
  std::this_thread::sleep_for(std::chrono::milliseconds(50));
  eb::stop_realtime_executor(*exec);
  return kExitOk;
}

std::shared_ptr<eb::client::Client> endpoint_client(const eb::bridge::BridgeConfig& cfg,
                                                    std::shared_ptr<eb::Executor> exec) {
  eb::client::ClientOptions o;
  o.broker_host = cfg.broker.host;
  o.broker_port = cfg.broker.port;
  o.client_id = cfg.client_id;
  o.username = cfg.broker.user;
  o.password = cfg.broker.pass;
  o.tls = cfg.broker.tls;
  if (!cfg.broker.ca_file.empty()) o.tls_ca_pem = read_file(cfg.broker.ca_file);
  o.validate();
  return eb::client::Client::create(exec, eb::client::tcp_dialer_for(o), o);
}

struct EndpointArgs {
  std::string config;
  double rate_hz = 10;
  std::size_t count = 600;
  double size_ratio = 1.0;
  std::string format = "compact";
  std::string scan_file;
  std::string out_dir = "reports";
  double detector_delay_ms = 43.4;
  bool loop_through = false;
};

void connect_or_throw(eb::client::Client& c) {
  auto p = std::make_shared<std::promise<eb::client::ClientError>>();
  auto f = p->get_future();
  c.connect([p](eb::client::ClientError e) { p->set_value(e); });
  if (f.wait_for(std::chrono::seconds(15)) != std::future_status::ready)
    throw h::ScenarioAborted("broker unreachable");
  const auto e = f.get();
  if (e != eb::client::ClientError::None) throw h::ScenarioAborted(std::string("connect failed: ") + to_string(e));
}

int run_vehicle(const EndpointArgs& a) {
  auto cfg = eb::bridge::load_bridge_config(a.config);
  if (cfg.bus2mqtt.empty() || cfg.mqtt2bus.empty())
    throw eb::ValidationError("vehicle needs one bus2mqtt rule (scan out) and one mqtt2bus rule (results in)");
  if (a.format != "compact" && a.format != "expanded") throw eb::ValidationError("format must be compact or expanded");
  std::uint64_t seed = env_seed().value_or(1);

  auto scan = a.scan_file.empty() ? eb::scan::reference_scan(seed) : eb::scan::load_scan(a.scan_file);
  scan = eb::scan::downsample(scan, a.size_ratio, seed);
  const bool expanded = a.format == "expanded";
  auto payload = eb::share(expanded ? eb::scan::serialize(eb::scan::expand(scan, eb::scan::Calibration::vlp32c()))
                                    : eb::scan::serialize(scan));

  auto app = eb::make_realtime_executor("vehicle-app");
  auto bex = eb::make_realtime_executor("vehicle-bridge");
  auto bus = eb::bus::LocalBus::create();
  auto client = endpoint_client(cfg, bex);
  connect_or_throw(*client);
  eb::bridge::BridgeOptions bo;
  bo.clock_id = eb::probes::kVehicleClock;
  bo.status_sink = [](const std::string& s) { std::cerr << s << "\n"; };
  auto bridge = eb::bridge::Bridge::create(bus, client, cfg, bo);
  bridge->start();
  auto sink = h::Sink::create(bus, app, cfg.mqtt2bus[0].target_topic, eb::probes::kVehicleClock);
  auto source = h::Source::create(bus, app, cfg.bus2mqtt[0].source_topic, expanded ? h::kTagExpanded : h::kTagCompact,
                                  payload, a.rate_hz, a.count, eb::probes::kVehicleClock);
  sink->start();
  std::signal(SIGINT, on_signal);
  std::this_thread::sleep_for(std::chrono::milliseconds(500));
  source->start(app->now());
  const auto deadline = std::chrono::steady_clock::now() +
                        std::chrono::milliseconds(static_cast<long>(a.count / a.rate_hz * 1000) + 10000);
  while (!g_stop && sink->received() < a.count && std::chrono::steady_clock::now() < deadline)
    std::this_thread::sleep_for(std::chrono::milliseconds(10));
  source->stop();
  bridge->stop();
  client->disconnect();
  std::this_thread::sleep_for(std::chrono::milliseconds(50));
  eb::stop_realtime_executor(*app);
  eb::stop_realtime_executor(*bex);

  h::ScenarioConfig sc;
  sc.name = "vehicle-endpoint";
  sc.rate_hz = a.rate_hz;
  sc.sample_count = a.count;
  sc.qos = cfg.bus2mqtt[0].qos;
  sc.tls = cfg.broker.tls;
  sc.format = expanded ? h::Format::Expanded : h::Format::Compact;
  sc.size_ratio = a.size_ratio;
  sc.seed = seed;
  h::RawRun run;
  run.published = source->published();
  run.traces = sink->traces();
  run.payload_bytes = payload->size();
  auto report = h::analyze(sc, run);
  auto files = h::write_report(report, a.out_dir, "vehicle");
  std::cout << h::summary_json(report.samples).dump(2) << "\n";
  std::cerr << "wrote " << files.json << ", " << files.csv << ", " << files.ecdf << "\n";
  return kExitOk;
}

int run_cloud(const EndpointArgs& a) {
  auto cfg = eb::bridge::load_bridge_config(a.config);
  if (cfg.bus2mqtt.empty() || cfg.mqtt2bus.empty())
    throw eb::ValidationError("cloud needs one mqtt2bus rule (scan in) and one bus2mqtt rule (results out)");
  auto app = eb::make_realtime_executor("cloud-app");
  auto bex = eb::make_realtime_executor("cloud-bridge");
  auto bus = eb::bus::LocalBus::create();
  auto client = endpoint_client(cfg, bex);
  connect_or_throw(*client);
  eb::bridge::BridgeOptions bo;
  bo.clock_id = eb::probes::kCloudClock;
  bo.status_sink = [](const std::string& s) { std::cerr << s << "\n"; };
  auto bridge = eb::bridge::Bridge::create(bus, client, cfg, bo);

  const std::string in = cfg.mqtt2bus[0].target_topic, out = cfg.bus2mqtt[0].source_topic;
  eb::scan::DetectConfig dc;
  dc.fixed_compute_delay_ms = a.detector_delay_ms;
  std::shared_ptr<h::Converter> conv;
  std::shared_ptr<h::Detector> det;
  if (a.loop_through) {
    det = h::Detector::create(bus, app, in, out, eb::probes::kCloudClock, dc, true);
  } else if (a.format == "compact") {
    conv = h::Converter::create(bus, app, in, in + "/expanded", eb::probes::kCloudClock);
    det = h::Detector::create(bus, app, in + "/expanded", out, eb::probes::kCloudClock, dc, false);
  } else {
    det = h::Detector::create(bus, app, in, out, eb::probes::kCloudClock, dc, false);
  }
  if (conv) conv->start();
  det->start();
  bridge->start();
  std::cerr << "cloud: processing " << in << " -> " << out << "\n";
  wait_for_signal();
  bridge->stop();
  client->disconnect();
  std::this_thread::sleep_for(std::chrono::milliseconds(50));
  eb::stop_realtime_executor(*app);
  eb::stop_realtime_executor(*bex);
  return kExitOk;
}

std::string stem_for(const h::Preset& p, const h::PresetRun& r) {
  return r.label.empty() ? p.name : p.name + "-" + r.label;
}

int run_bench(const std::string& preset_name, const std::vector<std::string>& overrides, const std::string& out_dir) {
  h::Preset p = h::make_preset(preset_name);
  if (auto s = env_seed()) h::apply_seed(p, *s);
  for (const auto& o : overrides) h::apply_override(p, o);

  nlohmann::json index{{"report_version", h::kReportVersion}, {"preset", p.name}, {"description", p.description}};
  nlohmann::json runs = nlohmann::json::array();
  for (const auto& r : p.runs) {
    const std::string stem = stem_for(p, r);
    std::cerr << "running " << stem << " (" << r.config.sample_count << " samples at " << r.config.rate_hz << " Hz, "
              << (r.config.simulated ? "simulated" : "real") << " time)\n";
    if (!p.sweep_rates.empty()) {
      auto sw = h::sweep_throughput(r.config, p.sweep_rates, p.sweep_windows);
      const auto j = h::sweep_json(r.config, sw);
      std::filesystem::create_directories(out_dir);
      h::write_text((std::filesystem::path(out_dir) / (stem + "_sweep.json")).string(), j.dump(2) + "\n");
      runs.push_back({{"label", r.label}, {"sweep", stem + "_sweep.json"}, {"saturation_hz", j["saturation_hz"]}});
      std::cout << j.dump(2) << "\n";
      continue;
    }
    auto report = h::run_scenario(r.config);
    auto files = h::write_report(report, out_dir, stem);
    const auto summary = h::summary_json(report.samples);
    runs.push_back({{"label", r.label},
                    {"report", std::filesystem::path(files.json).filename().string()},
                    {"mean_total_ms", summary["total"]["mean"]},
                    {"mean_iface_plus_comm_ms", summary["iface_plus_comm"]["mean"]},
                    {"mean_comm_up_ms", summary["comm_up"]["mean"]}});
    std::cout << stem << ": mean total " << summary["total"]["mean"].get<double>() << " ms, median "
              << summary["total"]["median"].get<double>() << " ms, n " << report.samples.size() << ", missing "
              << report.missing << "\n";
  }
  index["runs"] = runs;
  std::filesystem::create_directories(out_dir);
  h::write_text((std::filesystem::path(out_dir) / (p.name + "_index.json")).string(), index.dump(2) + "\n");
  return kExitOk;
}

int run_analyze(const std::string& in, const std::string& out) {
  const auto samples = h::read_samples_csv(in);
  if (samples.empty()) throw eb::ValidationError(in + " holds no samples");
  const std::string text = h::summary_json(samples).dump(2) + "\n";
  if (out.empty())
    std::cout << text;
  else
    h::write_text(out, text);
  return kExitOk;
}

int run_gen_scan(const std::string& preset, const std::string& out, double size_ratio) {
  if (preset != "paper-ref") throw eb::ValidationError("unknown scan preset '" + preset + "'");
  const std::uint64_t seed = env_seed().value_or(1);
  auto scan = eb::scan::downsample(eb::scan::reference_scan(seed), size_ratio, seed);
  eb::scan::save_scan(out, scan);
  std::cout << out << ": " << scan.packets.size() << " packets, " << eb::scan::count_valid_returns(scan)
            << " valid returns, " << eb::scan::serialized_size(scan) << " bytes serialized\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lidar offloading latency benchmark: MQTT broker, bridge endpoints and scenario runner"};
  app.require_subcommand(1);

  std::string config;
  auto* broker = app.add_subcommand("broker", "Run the MQTT broker");
  broker->add_option("--config", config, "Broker YAML config")->required();

  EndpointArgs ep;
  auto* vehicle = app.add_subcommand("vehicle", "Run the vehicle endpoint: scan source, bridge and result sink");
  vehicle->add_option("--config", ep.config, "Bridge YAML config")->required();
  vehicle->add_option("--rate", ep.rate_hz, "Publish rate in Hz")->check(CLI::PositiveNumber);
  vehicle->add_option("--count", ep.count, "Number of samples");
  vehicle->add_option("--size-ratio", ep.size_ratio, "Fraction of scan packets sent")->check(CLI::Range(0.0, 1.0));
  vehicle->add_option("--format", ep.format, "compact or expanded");
  vehicle->add_option("--scan", ep.scan_file, "Scan file (default: generated reference scan)");
  vehicle->add_option("--out-dir", ep.out_dir, "Report directory");

  auto* cloud = app.add_subcommand("cloud", "Run the processing endpoint: bridge, converter and detector");
  cloud->add_option("--config", ep.config, "Bridge YAML config")->required();
  cloud->add_option("--detector-delay-ms", ep.detector_delay_ms, "Detector compute time")->check(CLI::NonNegativeNumber);
  cloud->add_option("--format", ep.format, "Format of incoming scans: compact or expanded");
  cloud->add_flag("--loop-through", ep.loop_through, "Return scans unchanged instead of detecting");

  std::string preset, out_dir = "reports";
  std::vector<std::string> overrides;
  auto* bench = app.add_subcommand("bench", "Run a scenario preset and write reports");
  bench->add_option("--preset", preset, "One of: " + [] {
    std::string s;
    for (const auto& n : h::preset_names()) s += (s.empty() ? "" : ", ") + n;
    return s;
  }())->required();
  bench->add_option("--override", overrides, "key=value applied to every run (repeatable)");
  bench->add_option("--out-dir", out_dir, "Report directory");

  std::string in, out;
  auto* analyze = app.add_subcommand("analyze", "Recompute the summary of a per-sample report CSV");
  analyze->add_option("--in", in, "Report CSV")->required();
  analyze->add_option("--out", out, "Write the summary here instead of stdout");

  std::string scan_preset = "paper-ref", scan_out;
  double scan_ratio = 1.0;
  auto* gen = app.add_subcommand("gen-scan", "Write a synthetic scan file");
  gen->add_option("--preset", scan_preset, "Scan preset (paper-ref)");
  gen->add_option("--out", scan_out, "Output file")->required();
  gen->add_option("--size-ratio", scan_ratio, "Fraction of packets kept")->check(CLI::Range(0.0, 1.0));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*broker) return run_broker(config);
    if (*vehicle) return run_vehicle(ep);
    if (*cloud) return run_cloud(ep);
    if (*bench) return run_bench(preset, overrides, out_dir);
    if (*analyze) return run_analyze(in, out);
    if (*gen) return run_gen_scan(scan_preset, scan_out, scan_ratio);
  } catch (const eb::ParseError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const eb::ValidationError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const h::ScenarioAborted& e) {
    std::cerr << "scenario aborted: " << e.what() << "\n";
    return kExitAborted;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitFailure;
}
