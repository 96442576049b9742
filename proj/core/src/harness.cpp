#include "fedsim/harness.hpp"

#include <stdlib.h>

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "fedsim/error.hpp"
#include "fedsim/process.hpp"
#include "fedsim/rng.hpp"
#include "json.hpp"

namespace fedsim {

using nlohmann::json;

std::string_view to_string(RunMode mode) {
  return mode == RunMode::kTcp ? "tcp" : "in_process";
}

std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

namespace {

[[noreturn]] void invalid(const std::string& field, const std::string& why) {
  fail(ErrorCode::kValidationError, field + ": " + why);
}

void reject_unknown_keys(const json& obj, const std::string& where,
                         std::initializer_list<const char*> known) {
  for (const auto& [key, value] : obj.items()) {
    bool ok = false;
    for (const auto* k : known) ok = ok || key == k;
    if (!ok) invalid(where.empty() ? key : where + "." + key, "unknown key");
  }
}

const json* member(const json& obj, const char* key) {
  auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

std::uint64_t read_uint(const json& obj, const char* key, const std::string& path,
                        std::uint64_t fallback) {
  const auto* v = member(obj, key);
  if (v == nullptr) return fallback;
  if (v->is_number_unsigned()) return v->get<std::uint64_t>();
  if (v->is_number_integer()) invalid(path, "must be non-negative");
  if (v->is_number_float()) {
    const double d = v->get<double>();
    if (d >= 0 && d == std::floor(d) && d < 1.8e19) return static_cast<std::uint64_t>(d);
  }
  invalid(path, "must be a non-negative integer");
}

double read_double(const json& obj, const char* key, const std::string& path,
                   double fallback) {
  const auto* v = member(obj, key);
  if (v == nullptr) return fallback;
  if (!v->is_number()) invalid(path, "must be a number");
  return v->get<double>();
}

std::string read_string(const json& obj, const char* key, const std::string& path,
                        const std::string& fallback) {
  const auto* v = member(obj, key);
  if (v == nullptr) return fallback;
  if (!v->is_string()) invalid(path, "must be a string");
  return v->get<std::string>();
}

const json& object_or_empty(const json& obj, const char* key, const std::string& path) {
  static const json kEmpty = json::object();
  const auto* v = member(obj, key);
  if (v == nullptr) return kEmpty;
  if (!v->is_object()) invalid(path, "must be an object");
  return *v;
}

std::uint32_t to_u32(std::uint64_t v, const std::string& path) {
  if (v > UINT32_MAX) invalid(path, "is too large");
  return static_cast<std::uint32_t>(v);
}

}  // namespace

void validate_config(const ExperimentConfig& cfg) {
  if (cfg.clients.empty()) invalid("clients", "at least one client is required");
  std::set<std::string> ids;
  for (std::size_t i = 0; i < cfg.clients.size(); ++i) {
    const auto& c = cfg.clients[i];
    const auto path = "clients[" + std::to_string(i) + "]";
    if (c.client_id.empty()) invalid(path + ".id", "must be non-empty");
    if (c.client_id.size() > 0xFFFF) invalid(path + ".id", "is too long");
    if (!ids.insert(c.client_id).second) invalid(path + ".id", "duplicate id '" + c.client_id + "'");
    if (c.processor_class.empty()) invalid(path + ".processor_class", "must be non-empty");
    if (!(c.seconds_per_sample > 0.0) || !std::isfinite(c.seconds_per_sample)) {
      invalid(path + ".seconds_per_sample", "must be > 0");
    }
    if (!(c.power_watts > 0.0) || !std::isfinite(c.power_watts)) {
      invalid(path + ".power_watts", "must be > 0");
    }
  }
  if (cfg.clients_per_round < 1 || cfg.clients_per_round > cfg.clients.size()) {
    invalid("clients_per_round", "must be between 1 and the number of clients (" +
                                     std::to_string(cfg.clients.size()) + ")");
  }
  if (cfg.batch_size < 1) invalid("batch_size", "must be >= 1");
  if (!(cfg.learning_rate > 0.0) || !std::isfinite(cfg.learning_rate)) {
    invalid("learning_rate", "must be > 0");
  }
  const auto& d = cfg.dataset;
  if (d.n_features < 1) invalid("dataset.n_features", "must be >= 1");
  if (d.n_classes < 2) invalid("dataset.n_classes", "must be >= 2");
  if (d.n_samples < d.n_classes) invalid("dataset.n_samples", "must be >= n_classes");
  if (d.n_samples < cfg.clients.size()) {
    invalid("dataset.n_samples", "must be >= the number of clients");
  }
  if (!(d.class_separation > 0.0) || !std::isfinite(d.class_separation)) {
    invalid("dataset.class_separation", "must be > 0");
  }
  if (cfg.partition.kind == PartitionScheme::Kind::kLabelSkew &&
      !(cfg.partition.alpha > 0.0 && std::isfinite(cfg.partition.alpha))) {
    invalid("partition.alpha", "must be > 0");
  }
  const auto& s = cfg.strategy;
  if (s.type != "fedavg" && s.type != "deadline") {
    invalid("strategy.type", "must be 'fedavg' or 'deadline', got '" + s.type + "'");
  }
  for (const auto& [cls, tau] : s.tau_seconds_by_class) {
    if (!(tau >= 0.0) || !std::isfinite(tau)) {
      invalid("strategy.tau_seconds_by_class." + cls, "must be a finite value >= 0");
    }
  }
  if (s.type == "deadline") {
    for (const auto& c : cfg.clients) {
      if (!s.tau_seconds_by_class.contains(c.processor_class)) {
        invalid("strategy.tau_seconds_by_class",
                "no tau for processor class '" + c.processor_class + "'");
      }
    }
  }
  if (s.min_successful_clients && *s.min_successful_clients < 1) {
    invalid("strategy.min_successful_clients", "must be >= 1");
  }
}

ExperimentConfig load_config(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::kParseError, e.what());
  }
  if (!root.is_object()) fail(ErrorCode::kParseError, "config must be a JSON object");
  reject_unknown_keys(root, "",
                      {"rounds", "clients", "clients_per_round", "local_epochs",
                       "learning_rate", "batch_size", "dataset", "partition", "strategy",
                       "seeds", "mode"});

  ExperimentConfig cfg;
  cfg.rounds = to_u32(read_uint(root, "rounds", "rounds", cfg.rounds), "rounds");

  const auto* clients = member(root, "clients");
  if (clients == nullptr) invalid("clients", "is required");
  if (!clients->is_array()) invalid("clients", "must be an array");
  for (std::size_t i = 0; i < clients->size(); ++i) {
    const auto& c = (*clients)[i];
    const auto path = "clients[" + std::to_string(i) + "]";
    if (!c.is_object()) invalid(path, "must be an object");
    reject_unknown_keys(c, path, {"id", "processor_class", "seconds_per_sample", "power_watts"});
    ClientProfile p;
    if (member(c, "id") == nullptr) invalid(path + ".id", "is required");
    p.client_id = read_string(c, "id", path + ".id", "");
    p.processor_class = read_string(c, "processor_class", path + ".processor_class", p.processor_class);
    p.seconds_per_sample =
        read_double(c, "seconds_per_sample", path + ".seconds_per_sample", p.seconds_per_sample);
    p.power_watts = read_double(c, "power_watts", path + ".power_watts", p.power_watts);
    p.shard_index = i;
    cfg.clients.push_back(std::move(p));
  }

  cfg.clients_per_round =
      read_uint(root, "clients_per_round", "clients_per_round", cfg.clients.size());
  cfg.local_epochs =
      to_u32(read_uint(root, "local_epochs", "local_epochs", cfg.local_epochs), "local_epochs");
  cfg.learning_rate = read_double(root, "learning_rate", "learning_rate", cfg.learning_rate);
  cfg.batch_size =
      to_u32(read_uint(root, "batch_size", "batch_size", cfg.batch_size), "batch_size");

  const auto& ds = object_or_empty(root, "dataset", "dataset");
  reject_unknown_keys(ds, "dataset",
                      {"n_samples", "n_features", "n_classes", "class_separation", "seed"});
  cfg.dataset.n_samples = read_uint(ds, "n_samples", "dataset.n_samples", cfg.dataset.n_samples);
  cfg.dataset.n_features =
      read_uint(ds, "n_features", "dataset.n_features", cfg.dataset.n_features);
  cfg.dataset.n_classes = read_uint(ds, "n_classes", "dataset.n_classes", cfg.dataset.n_classes);
  cfg.dataset.class_separation = read_double(ds, "class_separation", "dataset.class_separation",
                                             cfg.dataset.class_separation);
  cfg.dataset.seed = read_uint(ds, "seed", "dataset.seed", cfg.dataset.seed);

  const auto& part = object_or_empty(root, "partition", "partition");
  reject_unknown_keys(part, "partition", {"scheme", "alpha"});
  const auto scheme = read_string(part, "scheme", "partition.scheme", "iid");
  if (scheme == "iid") {
    cfg.partition.kind = PartitionScheme::Kind::kIid;
  } else if (scheme == "label_skew") {
    cfg.partition.kind = PartitionScheme::Kind::kLabelSkew;
  } else {
    invalid("partition.scheme", "must be 'iid' or 'label_skew', got '" + scheme + "'");
  }
  cfg.partition.alpha = read_double(part, "alpha", "partition.alpha", cfg.partition.alpha);

  const auto& strat = object_or_empty(root, "strategy", "strategy");
  reject_unknown_keys(strat, "strategy", {"type", "tau_seconds_by_class", "min_successful_clients"});
  cfg.strategy.type = read_string(strat, "type", "strategy.type", cfg.strategy.type);
  const auto& taus = object_or_empty(strat, "tau_seconds_by_class", "strategy.tau_seconds_by_class");
  for (const auto& [cls, v] : taus.items()) {
    if (!v.is_number()) invalid("strategy.tau_seconds_by_class." + cls, "must be a number");
    cfg.strategy.tau_seconds_by_class[cls] = v.get<double>();
  }
  if (member(strat, "min_successful_clients") != nullptr) {
    cfg.strategy.min_successful_clients = read_uint(
        strat, "min_successful_clients", "strategy.min_successful_clients", 0);
  }

  const auto& seeds = object_or_empty(root, "seeds", "seeds");
  reject_unknown_keys(seeds, "seeds", {"model", "sampling"});
  cfg.seeds.model = read_uint(seeds, "model", "seeds.model", cfg.seeds.model);
  cfg.seeds.sampling = read_uint(seeds, "sampling", "seeds.sampling", cfg.seeds.sampling);

  const auto mode = read_string(root, "mode", "mode", "in_process");
  if (mode == "in_process") {
    cfg.mode = RunMode::kInProcess;
  } else if (mode == "tcp") {
    cfg.mode = RunMode::kTcp;
  } else {
    invalid("mode", "must be 'in_process' or 'tcp', got '" + mode + "'");
  }

  validate_config(cfg);
  return cfg;
}

ExperimentConfig load_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIoError, "cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return load_config(ss.str());
}

std::string config_to_json(const ExperimentConfig& cfg) {
  json root = json::object();
  root["rounds"] = cfg.rounds;
  json clients = json::array();
  for (const auto& c : cfg.clients) {
    clients.push_back({{"id", c.client_id},
                       {"processor_class", c.processor_class},
                       {"seconds_per_sample", c.seconds_per_sample},
                       {"power_watts", c.power_watts}});
  }
  root["clients"] = clients;
  root["clients_per_round"] = cfg.clients_per_round;
  root["local_epochs"] = cfg.local_epochs;
  root["learning_rate"] = cfg.learning_rate;
  root["batch_size"] = cfg.batch_size;
  root["dataset"] = {{"n_samples", cfg.dataset.n_samples},
                     {"n_features", cfg.dataset.n_features},
                     {"n_classes", cfg.dataset.n_classes},
                     {"class_separation", cfg.dataset.class_separation},
                     {"seed", cfg.dataset.seed}};
  json part = {{"scheme", cfg.partition.kind == PartitionScheme::Kind::kIid ? "iid" : "label_skew"}};
  if (cfg.partition.kind == PartitionScheme::Kind::kLabelSkew) part["alpha"] = cfg.partition.alpha;
  root["partition"] = part;
  json strat = {{"type", cfg.strategy.type}, {"tau_seconds_by_class", json::object()}};
  for (const auto& [cls, tau] : cfg.strategy.tau_seconds_by_class) {
    strat["tau_seconds_by_class"][cls] = tau;
  }
  if (cfg.strategy.min_successful_clients) {
    strat["min_successful_clients"] = *cfg.strategy.min_successful_clients;
  }
  root["strategy"] = strat;
  root["seeds"] = {{"model", cfg.seeds.model}, {"sampling", cfg.seeds.sampling}};
  root["mode"] = std::string(to_string(cfg.mode));
  return root.dump(2);
}

std::string config_hash(const ExperimentConfig& cfg) {
  // The mode does not change results, so it is excluded from the identity.
  auto copy = cfg;
  copy.mode = RunMode::kInProcess;
  const auto text = config_to_json(copy);
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001B3ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

std::unique_ptr<Strategy> make_strategy(const ExperimentConfig& cfg) {
  FedAvgOptions opt;
  opt.local_epochs = cfg.local_epochs;
  opt.learning_rate = cfg.learning_rate;
  opt.batch_size = cfg.batch_size;
  opt.seed = splitmix64(cfg.seeds.model ^ 0x747261696E696E67ULL);  // "training"
  opt.min_successful_clients = cfg.strategy.min_successful_clients;
  if (cfg.strategy.type == "deadline") {
    return std::make_unique<DeadlineFedAvg>(opt, cfg.strategy.tau_seconds_by_class);
  }
  return std::make_unique<FedAvg>(opt);
}

Parameters initial_parameters(const ExperimentConfig& cfg) {
  return HeadModel::random(cfg.dataset.n_features, cfg.dataset.n_classes, cfg.seeds.model)
      .to_parameters();
}

std::vector<Shard> build_shards(const ExperimentConfig& cfg) {
  const auto data = generate_dataset(cfg.dataset);
  return partition(data, cfg.clients.size(), cfg.partition, splitmix64(cfg.dataset.seed));
}

namespace {

/// In-process stand-in for a killed client: after n fits every call fails.
class CrashingClient : public Client {
 public:
  CrashingClient(std::shared_ptr<Client> inner, std::uint32_t fits_before_crash)
      : inner_(std::move(inner)), remaining_(fits_before_crash) {}

  Parameters get_parameters() override {
    check();
    return inner_->get_parameters();
  }
  FitRes fit(const FitIns& ins) override {
    if (remaining_ == 0) dead_ = true;
    check();
    --remaining_;
    return inner_->fit(ins);
  }
  EvaluateRes evaluate(const EvaluateIns& ins) override {
    check();
    return inner_->evaluate(ins);
  }

 private:
  void check() const {
    if (dead_) fail(ErrorCode::kConnectionClosed, "client crashed");
  }

  std::shared_ptr<Client> inner_;
  std::uint32_t remaining_;
  bool dead_ = false;
};

class TempDir {
 public:
  TempDir() {
    auto pattern = (std::filesystem::temp_directory_path() / "fedsim-XXXXXX").string();
    if (::mkdtemp(pattern.data()) == nullptr) {
      fail(ErrorCode::kIoError, "cannot create a temporary directory");
    }
    path_ = pattern;
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  std::filesystem::path path_;
};

ServerOptions server_options(const ExperimentConfig& cfg, const RunOptions& options) {
  ServerOptions so;
  so.rounds = cfg.rounds;
  so.clients_per_round = cfg.clients_per_round;
  so.min_clients = cfg.clients_per_round;
  so.sampling_seed = cfg.seeds.sampling;
  if (options.log) {
    so.on_failure = [log = options.log](std::uint32_t round, const std::string& id,
                                        const std::string& why) {
      log("round " + std::to_string(round) + ": client '" + id + "' failed: " + why);
    };
  }
  return so;
}

ExperimentResult finish(const ExperimentConfig& cfg, FederationResult fed) {
  ExperimentResult out;
  out.metrics.rows = std::move(fed.rounds);
  out.metrics.config_hash = config_hash(cfg);
  out.metrics.mode = cfg.mode;
  out.final_parameters = std::move(fed.final_parameters);
  return out;
}

ExperimentResult run_in_process(const ExperimentConfig& cfg, const RunOptions& options) {
  auto shards = build_shards(cfg);
  ClientManager manager;
  for (std::size_t i = 0; i < cfg.clients.size(); ++i) {
    auto sim = std::make_shared<SimulatedClient>(cfg.clients[i], std::move(shards[i]),
                                                 cfg.dataset.n_classes);
    auto caps = sim->capabilities();
    std::shared_ptr<Client> client = sim;
    if (auto it = options.crash_after_fits.find(cfg.clients[i].client_id);
        it != options.crash_after_fits.end()) {
      client = std::make_shared<CrashingClient>(client, it->second);
    }
    manager.register_client(
        std::make_shared<LocalClientProxy>(cfg.clients[i].client_id, std::move(caps), client));
  }
  const auto strategy = make_strategy(cfg);
  return finish(cfg, run_federation(manager, *strategy, server_options(cfg, options),
                                    initial_parameters(cfg)));
}

ExperimentResult run_tcp(const ExperimentConfig& cfg, const RunOptions& options) {
  if (options.client_executable.empty()) {
    fail(ErrorCode::kSpawnError, "tcp mode needs the fedsim executable to launch clients");
  }
  TempDir dir;
  const auto shards = build_shards(cfg);
  TcpListener listener(Endpoint{"127.0.0.1", 0});

  std::vector<ChildProcess> children;
  children.reserve(cfg.clients.size());
  for (std::size_t i = 0; i < cfg.clients.size(); ++i) {
    const auto& p = cfg.clients[i];
    const auto shard_path = dir.path() / ("shard-" + std::to_string(i) + ".bin");
    write_shard_file(shard_path, shards[i], cfg.dataset.n_classes);
    std::vector<std::string> argv{options.client_executable.string(),
                                  "client",
                                  "--server",
                                  "127.0.0.1:" + std::to_string(listener.port()),
                                  "--client-id",
                                  p.client_id,
                                  "--shard",
                                  shard_path.string(),
                                  "--processor-class",
                                  p.processor_class,
                                  "--seconds-per-sample",
                                  format_double(p.seconds_per_sample),
                                  "--power-watts",
                                  format_double(p.power_watts)};
    if (auto it = options.crash_after_fits.find(p.client_id);
        it != options.crash_after_fits.end()) {
      argv.push_back("--exit-after-fits");
      argv.push_back(std::to_string(it->second));
    }
    children.emplace_back(argv);
  }

  ClientManager manager;
  const auto n = accept_clients(listener, manager, cfg.clients.size(),
                                options.connect_timeout, options.log);
  if (n < cfg.clients.size()) {
    fail(ErrorCode::kSpawnError, "only " + std::to_string(n) + " of " +
                                     std::to_string(cfg.clients.size()) +
                                     " client processes connected");
  }

  const auto strategy = make_strategy(cfg);
  FederationResult fed;
  try {
    fed = run_federation(manager, *strategy, server_options(cfg, options),
                         initial_parameters(cfg));
  } catch (...) {
    for (const auto& proxy : manager.snapshot()) proxy->disconnect();
    throw;
  }
  for (const auto& proxy : manager.snapshot()) proxy->disconnect();
  for (auto& child : children) {
    if (!child.wait(std::chrono::seconds(10))) child.kill();
  }
  return finish(cfg, std::move(fed));
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg, const RunOptions& options) {
  validate_config(cfg);
  return cfg.mode == RunMode::kTcp ? run_tcp(cfg, options) : run_in_process(cfg, options);
}

std::string format_metrics_csv(const MetricsTable& table) {
  std::string out =
      "round,global_loss,global_accuracy,round_virtual_time_s,round_energy_j,"
      "cum_virtual_time_s,cum_energy_j,participants\n";
  for (const auto& r : table.rows) {
    out += std::to_string(r.round);
    for (double v : {r.global_loss, r.global_accuracy, r.round_virtual_time_s,
                     r.round_energy_j, r.cumulative_virtual_time_s, r.cumulative_energy_j}) {
      out += ',';
      out += format_double(v);
    }
    out += ',';
    for (std::size_t i = 0; i < r.participating_clients.size(); ++i) {
      if (i > 0) out += ';';
      out += r.participating_clients[i];
    }
    out += '\n';
  }
  return out;
}

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    parts.push_back(s.substr(start, pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return parts;
}

double parse_double(const std::string& s) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    fail(ErrorCode::kParseError, "bad number '" + s + "'");
  }
  return v;
}

}  // namespace

std::vector<RoundRecord> parse_metrics_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) ||
      line != "round,global_loss,global_accuracy,round_virtual_time_s,round_energy_j,"
              "cum_virtual_time_s,cum_energy_j,participants") {
    fail(ErrorCode::kParseError, "missing or unexpected CSV header");
  }
  std::vector<RoundRecord> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cols = split(line, ',');
    if (cols.size() != 8) fail(ErrorCode::kParseError, "expected 8 columns: " + line);
    RoundRecord r;
    std::uint32_t round = 0;
    auto [ptr, ec] = std::from_chars(cols[0].data(), cols[0].data() + cols[0].size(), round);
    if (ec != std::errc() || ptr != cols[0].data() + cols[0].size()) {
      fail(ErrorCode::kParseError, "bad round '" + cols[0] + "'");
    }
    r.round = round;
    r.global_loss = parse_double(cols[1]);
    r.global_accuracy = parse_double(cols[2]);
    r.round_virtual_time_s = parse_double(cols[3]);
    r.round_energy_j = parse_double(cols[4]);
    r.cumulative_virtual_time_s = parse_double(cols[5]);
    r.cumulative_energy_j = parse_double(cols[6]);
    if (!cols[7].empty()) r.participating_clients = split(cols[7], ';');
    rows.push_back(std::move(r));
  }
  return rows;
}

void write_metrics(const MetricsTable& table, const std::filesystem::path& path) {
  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::kIoError, "cannot open " + path.string() + " for writing");
    out << format_metrics_csv(table);
    if (!out) fail(ErrorCode::kIoError, "write failed for " + path.string());
  }
  json meta = {{"config_hash", table.config_hash},
               {"mode", std::string(to_string(table.mode))},
               {"accuracy", "federated test accuracy, weighted by client test examples"},
               {"failures", json::object()}};
  for (const auto& r : table.rows) {
    if (!r.failed_clients.empty()) meta["failures"][std::to_string(r.round)] = r.failed_clients;
  }
  const auto meta_path = path.string() + ".meta.json";
  std::ofstream out(meta_path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::kIoError, "cannot open " + meta_path + " for writing");
  out << meta.dump(2) << '\n';
  if (!out) fail(ErrorCode::kIoError, "write failed for " + meta_path);
}

SweepSpec parse_sweep_factor(const std::string& name) {
  SweepSpec spec;
  if (name == "local_epochs" || name == "E") {
    spec.factor = SweepFactor::kLocalEpochs;
  } else if (name == "clients_per_round" || name == "C") {
    spec.factor = SweepFactor::kClientsPerRound;
  } else if (name == "tau") {
    spec.factor = SweepFactor::kTau;
  } else if (name.starts_with("tau:") && name.size() > 4) {
    spec.factor = SweepFactor::kTau;
    spec.tau_class = name.substr(4);
  } else {
    fail(ErrorCode::kValidationError,
         "factor must be local_epochs, clients_per_round, tau or tau:<class>, got '" + name + "'");
  }
  return spec;
}

ExperimentConfig apply_sweep_value(const ExperimentConfig& cfg, const SweepSpec& spec,
                                   double value) {
  auto out = cfg;
  const auto whole = [&](const char* what) {
    if (!(value >= 0.0) || value != std::floor(value) || value > UINT32_MAX) {
      fail(ErrorCode::kValidationError,
           std::string(what) + " sweep value " + format_double(value) + " is not a whole number");
    }
    return static_cast<std::uint32_t>(value);
  };
  switch (spec.factor) {
    case SweepFactor::kLocalEpochs:
      out.local_epochs = whole("local_epochs");
      break;
    case SweepFactor::kClientsPerRound:
      out.clients_per_round = whole("clients_per_round");
      break;
    case SweepFactor::kTau:
      if (!(value >= 0.0) || !std::isfinite(value)) {
        fail(ErrorCode::kValidationError, "tau sweep value must be >= 0");
      }
      out.strategy.type = "deadline";
      for (const auto& c : out.clients) out.strategy.tau_seconds_by_class.try_emplace(c.processor_class, 0.0);
      out.strategy.tau_seconds_by_class[spec.tau_class] = value;
      break;
  }
  validate_config(out);
  return out;
}

std::vector<SweepEntry> sweep(const ExperimentConfig& cfg, const SweepSpec& spec,
                              const std::vector<double>& values, const RunOptions& options) {
  if (values.empty()) fail(ErrorCode::kValidationError, "sweep needs at least one value");
  std::vector<ExperimentConfig> configs;
  configs.reserve(values.size());
  for (double v : values) configs.push_back(apply_sweep_value(cfg, spec, v));

  std::vector<SweepEntry> entries;
  for (std::size_t i = 0; i < values.size(); ++i) {
    SweepEntry e;
    e.value = values[i];
    try {
      e.result = run_experiment(configs[i], options);
    } catch (const std::exception& ex) {
      e.error = ex.what();
      if (options.log) options.log("sweep value " + format_double(values[i]) + " failed: " + e.error);
    }
    entries.push_back(std::move(e));
  }
  return entries;
}

namespace {

std::string factor_name(const SweepSpec& spec) {
  switch (spec.factor) {
    case SweepFactor::kLocalEpochs: return "local_epochs";
    case SweepFactor::kClientsPerRound: return "clients_per_round";
    case SweepFactor::kTau: return "tau:" + spec.tau_class;
  }
  return "";
}

}  // namespace

std::string format_sweep_summary_csv(const SweepSpec& spec,
                                     const std::vector<SweepEntry>& entries) {
  std::string out =
      "factor,value,status,rounds,final_loss,final_accuracy,cum_virtual_time_s,cum_energy_j\n";
  for (const auto& e : entries) {
    out += factor_name(spec) + ',' + format_double(e.value) + ',';
    if (!e.result) {
      out += "failed,,,,,\n";
      continue;
    }
    const auto& rows = e.result->metrics.rows;
    out += "ok," + std::to_string(rows.size());
    if (rows.empty()) {
      out += ",,,0,0\n";
      continue;
    }
    const auto& last = rows.back();
    for (double v : {last.global_loss, last.global_accuracy, last.cumulative_virtual_time_s,
                     last.cumulative_energy_j}) {
      out += ',' + format_double(v);
    }
    out += '\n';
  }
  return out;
}

std::string format_sweep_summary_table(const SweepSpec& spec,
                                       const std::vector<SweepEntry>& entries) {
  std::ostringstream os;
  os << std::left << std::setw(20) << factor_name(spec) << std::right << std::setw(10)
     << "accuracy" << std::setw(12) << "loss" << std::setw(14) << "time (min)" << std::setw(14)
     << "energy (kJ)" << '\n';
  for (const auto& e : entries) {
    os << std::left << std::setw(20) << format_double(e.value) << std::right;
    if (!e.result || e.result->metrics.rows.empty()) {
      os << "  " << (e.result ? "no rounds" : "failed: " + e.error) << '\n';
      continue;
    }
    const auto& last = e.result->metrics.rows.back();
    os << std::fixed << std::setprecision(4) << std::setw(10) << last.global_accuracy
       << std::setw(12) << last.global_loss << std::setprecision(2) << std::setw(14)
       << last.cumulative_virtual_time_s / 60.0 << std::setw(14)
       << last.cumulative_energy_j / 1000.0 << '\n';
    os.unsetf(std::ios::fixed);
  }
  return os.str();
}

}  // namespace fedsim
