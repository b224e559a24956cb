#include "agt/experiment.hpp"

#include "json.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <set>
#include <sstream>

namespace agt {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void check_keys(const json& obj, const std::set<std::string>& allowed, const std::string& section) {
  if (!obj.is_object()) throw InvalidInput("config: '" + section + "' must be an object");
  for (const auto& [key, _] : obj.items()) {
    if (!allowed.count(key)) throw InvalidInput("config: unknown key '" + key + "' in " + section);
  }
}

template <class T>
T get_or(const json& obj, const char* key, T fallback) {
  const auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return fallback;
  try {
    return it->get<T>();
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("config: bad value for '") + key + "': " + e.what());
  }
}

template <class T>
std::optional<T> get_opt(const json& obj, const char* key) {
  const auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  return get_or<T>(obj, key, T{});
}

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

Eigen::VectorXd to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

void ExperimentConfig::validate() const {
  agt.train.validate();
  if (dataset.kind != "halfmoons" && dataset.kind != "csv" && dataset.kind != "idx") {
    throw InvalidInput("config: dataset.kind must be halfmoons, csv or idx");
  }
  const bool regression = dataset.kind == "csv";
  if (regression && loss != LossKind::MeanSquaredError) throw InvalidInput("config: csv regression needs loss mse");
  if (!regression && loss != LossKind::CrossEntropy) throw InvalidInput("config: classification needs cross_entropy");
  for (int h : hidden) {
    if (h < 1) throw InvalidInput("config: hidden widths must be >= 1");
  }
  if (const auto* a = std::get_if<BoundedAdversary>(&adversary)) {
    a->validate();
    if (a->n > agt.train.batch_size || a->m > agt.train.batch_size) throw InvalidInput("config: budgets exceed batch size");
    if (a->m > 0 && a->label_flip && regression) throw InvalidInput("config: label flipping needs class labels");
    if (a->m > 0 && a->nu > 0.0 && !regression) throw InvalidInput("config: a label radius needs regression labels");
  } else {
    const auto& u = std::get<UnboundedAdversary>(adversary);
    u.validate();
    if (u.n > agt.train.batch_size) throw InvalidInput("config: budget exceeds batch size");
    if (!agt.train.clip) throw InvalidInput("config: an unbounded adversary needs training.clip");
  }
  if (!(backdoor_radius >= 0.0)) throw InvalidInput("config: backdoor_radius must be >= 0");
  for (const auto& s : attacks) check_attack_budget(s, adversary);
  if (soundness.trials < 0) throw InvalidInput("config: soundness.trials must be >= 0");
}

ExperimentConfig parse_config(const std::string& json_text, const fs::path& base_dir) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw InvalidInput(std::string("config: ") + e.what());
  }
  check_keys(j, {"name", "seed", "dataset", "network", "training", "adversary", "certify", "attacks", "soundness",
                 "output_dir"},
             "config");
  ExperimentConfig c;
  c.name = get_or<std::string>(j, "name", c.name);
  c.seed = get_or<std::uint64_t>(j, "seed", 0);

  const json ds = j.value("dataset", json::object());
  check_keys(ds, {"kind", "n", "noise", "path", "label_columns", "normalize", "row_limit", "images", "labels", "limit",
                  "pca", "test_fraction", "poisonable_classes"},
             "dataset");
  auto& d = c.dataset;
  d.kind = get_or<std::string>(ds, "kind", d.kind);
  d.n = get_or<int>(ds, "n", d.n);
  d.noise = get_or<double>(ds, "noise", d.noise);
  if (auto p = get_opt<std::string>(ds, "path")) d.path = resolve(base_dir, *p);
  d.label_columns = get_or<std::vector<std::string>>(ds, "label_columns", {});
  d.normalize = get_or<bool>(ds, "normalize", true);
  d.row_limit = get_opt<std::size_t>(ds, "row_limit");
  if (auto p = get_opt<std::string>(ds, "images")) d.images = resolve(base_dir, *p);
  if (auto p = get_opt<std::string>(ds, "labels")) d.labels = resolve(base_dir, *p);
  d.limit = get_opt<std::size_t>(ds, "limit");
  d.pca = get_opt<int>(ds, "pca");
  d.test_fraction = get_or<double>(ds, "test_fraction", d.test_fraction);
  d.poisonable_classes = get_or<std::vector<int>>(ds, "poisonable_classes", {});

  const json net = j.value("network", json::object());
  check_keys(net, {"hidden", "loss"}, "network");
  c.hidden = get_or<std::vector<int>>(net, "hidden", {});
  c.loss = loss_kind_from_string(get_or<std::string>(net, "loss", d.kind == "csv" ? "mse" : "cross_entropy"));

  const json tr = j.value("training", json::object());
  check_keys(tr, {"epochs", "batch_size", "lr", "lr_decay", "clip", "bound_mode", "poisonable_fraction"}, "training");
  auto& t = c.agt.train;
  t.epochs = get_or<int>(tr, "epochs", t.epochs);
  t.batch_size = get_or<int>(tr, "batch_size", t.batch_size);
  t.lr = get_or<double>(tr, "lr", t.lr);
  t.lr_decay = get_or<double>(tr, "lr_decay", t.lr_decay);
  t.clip = get_opt<double>(tr, "clip");
  t.poisonable_fraction = get_opt<double>(tr, "poisonable_fraction");
  t.seed = c.seed;
  c.agt.bound_mode = bound_mode_from_string(get_or<std::string>(tr, "bound_mode", "tightest"));

  const json adv = j.value("adversary", json::object());
  check_keys(adv, {"kind", "n", "epsilon", "m", "nu", "label_flip", "disjoint_sets"}, "adversary");
  const std::string kind = get_or<std::string>(adv, "kind", "bounded");
  if (kind == "bounded") {
    BoundedAdversary a;
    a.n = get_or<int>(adv, "n", 0);
    a.epsilon = get_or<double>(adv, "epsilon", 0.0);
    a.m = get_or<int>(adv, "m", 0);
    a.nu = get_or<double>(adv, "nu", 0.0);
    a.label_flip = get_or<bool>(adv, "label_flip", c.loss == LossKind::CrossEntropy);
    a.disjoint_sets = get_or<bool>(adv, "disjoint_sets", false);
    c.adversary = a;
  } else if (kind == "unbounded") {
    c.adversary = UnboundedAdversary{get_or<int>(adv, "n", 0)};
  } else {
    throw InvalidInput("config: adversary.kind must be bounded or unbounded");
  }

  const json cert = j.value("certify", json::object());
  check_keys(cert, {"backdoor_radius", "safe_classes"}, "certify");
  c.backdoor_radius = get_or<double>(cert, "backdoor_radius", 0.0);
  c.safe_classes = get_or<std::vector<int>>(cert, "safe_classes", {});

  const json atk = j.value("attacks", json::array());
  if (!atk.is_array()) throw InvalidInput("config: attacks must be an array");
  for (std::size_t i = 0; i < atk.size(); ++i) {
    const json& a = atk[i];
    check_keys(a, {"kind", "n", "epsilon", "m", "steps", "step_size", "direction", "target", "class_from", "class_to",
                   "seed"},
               "attacks[" + std::to_string(i) + "]");
    AttackSpec s;
    s.kind = attack_kind_from_string(get_or<std::string>(a, "kind", ""));
    s.n = get_or<int>(a, "n", 0);
    s.epsilon = get_or<double>(a, "epsilon", 0.0);
    s.m = get_or<int>(a, "m", 0);
    s.pgd_steps = get_or<int>(a, "steps", s.pgd_steps);
    s.step_size = get_opt<double>(a, "step_size");
    if (auto v = get_opt<std::vector<double>>(a, "direction")) s.direction = to_vector(*v);
    if (auto v = get_opt<std::vector<double>>(a, "target")) s.target = to_vector(*v);
    s.class_from = get_or<int>(a, "class_from", -1);
    s.class_to = get_or<int>(a, "class_to", -1);
    s.seed = get_or<std::uint64_t>(a, "seed", c.seed + i + 1);
    c.attacks.push_back(s);
  }

  const json snd = j.value("soundness", json::object());
  check_keys(snd, {"trials", "tolerance"}, "soundness");
  c.soundness.trials = get_or<int>(snd, "trials", 10);
  c.soundness.tolerance = get_or<double>(snd, "tolerance", c.soundness.tolerance);

  c.output_dir = get_or<std::string>(j, "output_dir", c.name);
  c.validate();
  return c;
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw InvalidInput("cannot open config " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str(), path.parent_path());
}

fs::path output_root() {
  const char* env = std::getenv("AGT_OUTPUT_ROOT");
  return env && *env ? fs::path(env) : fs::path("results");
}

fs::path resolve_output_dir(const ExperimentConfig& cfg) {
  return cfg.output_dir.is_absolute() ? cfg.output_dir : output_root() / cfg.output_dir;
}

std::pair<Dataset, Dataset> prepare_data(const ExperimentConfig& cfg) {
  const auto& d = cfg.dataset;
  Dataset all;
  if (d.kind == "halfmoons") {
    all = gen_halfmoons(d.n, d.noise, cfg.seed);
  } else if (d.kind == "csv") {
    all = load_csv_regression(d.path.string(), CsvOptions{d.label_columns, d.normalize, d.row_limit});
  } else {
    all = load_idx_images(d.images.string(), d.labels.string());
    if (d.limit && *d.limit < static_cast<std::size_t>(all.size())) {
      std::vector<std::size_t> idx(*d.limit);
      std::iota(idx.begin(), idx.end(), std::size_t{0});
      all = all.subset(idx);
    }
  }
  if (!d.poisonable_classes.empty()) {
    if (all.task != Task::Classification) throw InvalidInput("poisonable_classes needs class labels");
    all.poisonable.resize(static_cast<std::size_t>(all.size()));
    for (std::size_t i = 0; i < all.poisonable.size(); ++i) {
      all.poisonable[i] = std::find(d.poisonable_classes.begin(), d.poisonable_classes.end(), all.classes[i]) !=
                          d.poisonable_classes.end();
    }
  }
  all.validate();
  auto [train, test] = train_test_split(all, d.test_fraction, cfg.seed ^ 0x5EED);
  if (d.pca) {
    // Fit on the training split only and reuse the projection for the test split.
    const Pca p = pca_fit(train.features, *d.pca);
    train = pca_project(train, p);
    test = pca_project(test, p);
  }
  return {std::move(train), std::move(test)};
}

DenseReluNetwork initial_network(const ExperimentConfig& cfg, const Dataset& train) {
  std::vector<int> dims{static_cast<int>(train.input_dim())};
  dims.insert(dims.end(), cfg.hidden.begin(), cfg.hidden.end());
  dims.push_back(train.output_dim());
  return DenseReluNetwork::he_uniform(dims, cfg.loss, cfg.seed);
}

namespace {

std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_metadata(const fs::path& dir, const ExperimentConfig& cfg, const std::string& command,
                    const std::string& started, double seconds) {
  json j;
  j["name"] = cfg.name;
  j["command"] = command;
  j["started_utc"] = started;
  j["finished_utc"] = utc_now();
  j["wall_seconds"] = seconds;
  std::ofstream os(dir / "metadata.json");
  os << j.dump(2) << '\n';
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  const std::string started = utc_now();
  ExperimentResult r;
  r.out_dir = resolve_output_dir(cfg);
  fs::create_directories(r.out_dir);

  auto [train, test] = prepare_data(cfg);
  const DenseReluNetwork init = initial_network(cfg, train);
  r.training = agt_train(init, train, cfg.agt, cfg.adversary);
  save_checkpoint((r.out_dir / "checkpoint.agtc").string(), r.training.box);
  write_history_csv((r.out_dir / "history.csv").string(), r.training.history);
  write_dataset_csv((r.out_dir / "test_set.csv").string(), test);

  const auto certs = certify_dataset(r.training.box, test, cfg.backdoor_radius, cfg.safe_classes, cfg.agt.bound_mode);
  r.certification = summarize(certs, mean_loss(r.training.nominal, test), cfg.backdoor_radius);
  write_certification_csv((r.out_dir / "certification.csv").string(), certs);
  write_certification_json((r.out_dir / "certification.json").string(), r.certification);

  if (!cfg.attacks.empty() && cfg.soundness.trials > 0) {
    SoundnessOptions opts = cfg.soundness;
    opts.loss_probe = &test;
    r.soundness = soundness_harness(init, train, cfg.agt, cfg.adversary, cfg.attacks, opts);
    write_soundness_json((r.out_dir / "soundness.json").string(), *r.soundness);
    r.exit_code = r.soundness->violations == 0 && r.soundness->loss_violations == 0 ? 0 : 1;
  }
  write_metadata(r.out_dir, cfg, "run", started, seconds_since(t0));
  return r;
}

ExperimentResult run_attacks(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.attacks.empty()) throw InvalidInput("config has no attacks");
  const auto t0 = std::chrono::steady_clock::now();
  const std::string started = utc_now();
  ExperimentResult r;
  r.out_dir = resolve_output_dir(cfg);
  fs::create_directories(r.out_dir);
  auto [train, test] = prepare_data(cfg);
  const DenseReluNetwork init = initial_network(cfg, train);
  SoundnessOptions opts = cfg.soundness;
  opts.loss_probe = &test;
  r.soundness = soundness_harness(init, train, cfg.agt, cfg.adversary, cfg.attacks, opts);
  write_soundness_json((r.out_dir / "soundness.json").string(), *r.soundness);
  r.exit_code = r.soundness->violations == 0 && r.soundness->loss_violations == 0 ? 0 : 1;
  write_metadata(r.out_dir, cfg, "attack", started, seconds_since(t0));
  return r;
}

CertificationSummary certify_checkpoint(const fs::path& checkpoint, const fs::path& dataset, const fs::path& out_dir,
                                        double backdoor_radius, const std::vector<int>& safe, BoundMode mode) {
  const ParamBox box = load_checkpoint(checkpoint.string());
  Dataset data = read_dataset_csv(dataset.string());
  if (data.input_dim() != box.nominal().input_dim()) throw InvalidInput("dataset width does not match the checkpoint");
  if (data.task == Task::Classification) data.num_classes = box.nominal().output_dim();
  data.validate();
  fs::create_directories(out_dir);
  const auto certs = certify_dataset(box, data, backdoor_radius, safe, mode);
  const CertificationSummary s = summarize(certs, mean_loss(box.nominal(), data), backdoor_radius);
  write_certification_csv((out_dir / "certification.csv").string(), certs);
  write_certification_json((out_dir / "certification.json").string(), s);
  return s;
}

}  // namespace agt
