#include "agt/checkpoint.hpp"

#include "json.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace agt {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'A', 'G', 'T', 'C'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& os, std::uint32_t v) { os.write(reinterpret_cast<const char*>(&v), sizeof v); }

std::uint32_t get_u32(std::istream& is, const std::string& path) {
  std::uint32_t v = 0;
  if (!is.read(reinterpret_cast<char*>(&v), sizeof v)) throw InvalidInput(path + ": truncated checkpoint header");
  return v;
}

void put_block(std::ostream& os, const Eigen::VectorXd& v, Eigen::Index begin, Eigen::Index count) {
  os.write(reinterpret_cast<const char*>(v.data() + begin), static_cast<std::streamsize>(count * sizeof(double)));
}

void get_block(std::istream& is, Eigen::VectorXd& v, Eigen::Index begin, Eigen::Index count, const std::string& path) {
  if (!is.read(reinterpret_cast<char*>(v.data() + begin), static_cast<std::streamsize>(count * sizeof(double)))) {
    throw InvalidInput(path + ": truncated checkpoint data at byte " + std::to_string(static_cast<long long>(is.gcount())));
  }
}

std::ofstream open_out(const std::string& path, std::ios::openmode mode = std::ios::out) {
  std::ofstream os(path, mode);
  if (!os) throw std::runtime_error("cannot write " + path);
  return os;
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

}  // namespace

void save_checkpoint(const std::string& path, const ParamBox& box) {
  const DenseReluNetwork& net = box.nominal();
  const Eigen::VectorXd theta = net.flat(), lo = box.lo(), hi = box.hi();
  auto os = open_out(path, std::ios::binary);
  os.write(kMagic, 4);
  put_u32(os, kVersion);
  put_u32(os, net.loss() == LossKind::CrossEntropy ? 1u : 0u);
  put_u32(os, static_cast<std::uint32_t>(net.num_layers()));
  for (int w : net.layer_dims()) put_u32(os, static_cast<std::uint32_t>(w));
  for (int k = 0; k < net.num_layers(); ++k) {
    const Eigen::Index wo = net.weight_offset(k), wn = net.weight(k).size();
    const Eigen::Index bo = net.bias_offset(k), bn = net.bias(k).size();
    for (const auto* v : {&theta, &lo, &hi}) put_block(os, *v, wo, wn);
    for (const auto* v : {&theta, &lo, &hi}) put_block(os, *v, bo, bn);
  }
  if (!os) throw std::runtime_error("write failed: " + path);
}

ParamBox load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InvalidInput("cannot open " + path);
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) throw InvalidInput(path + ": not a checkpoint (bad magic)");
  const std::uint32_t version = get_u32(is, path);
  if (version != kVersion) throw InvalidInput(path + ": unsupported checkpoint version " + std::to_string(version));
  const std::uint32_t loss = get_u32(is, path);
  if (loss > 1) throw InvalidInput(path + ": bad loss kind");
  const std::uint32_t layers = get_u32(is, path);
  if (layers == 0 || layers > 1024) throw InvalidInput(path + ": bad layer count");
  std::vector<int> dims;
  for (std::uint32_t i = 0; i <= layers; ++i) {
    const std::uint32_t w = get_u32(is, path);
    if (w == 0 || w > (1u << 24)) throw InvalidInput(path + ": bad layer width");
    dims.push_back(static_cast<int>(w));
  }
  DenseReluNetwork net(dims, loss == 1 ? LossKind::CrossEntropy : LossKind::MeanSquaredError);
  const Eigen::Index d = net.num_params();
  Eigen::VectorXd theta(d), lo(d), hi(d);
  for (int k = 0; k < net.num_layers(); ++k) {
    const Eigen::Index wo = net.weight_offset(k), wn = net.weight(k).size();
    const Eigen::Index bo = net.bias_offset(k), bn = net.bias(k).size();
    for (auto* v : {&theta, &lo, &hi}) get_block(is, *v, wo, wn, path);
    for (auto* v : {&theta, &lo, &hi}) get_block(is, *v, bo, bn, path);
  }
  if (is.peek() != std::char_traits<char>::eof()) throw InvalidInput(path + ": trailing bytes after checkpoint");
  net.set_flat(theta);
  return ParamBox(std::move(net), lo, hi);
}

void write_history_csv(const std::string& path, const std::vector<StepRecord>& history) {
  auto os = open_out(path);
  os << "step,metric,value\n";
  for (const auto& r : history) {
    os << r.step << ",lr," << fmt(r.lr) << '\n';
    os << r.step << ",nominal_loss," << fmt(r.nominal_loss) << '\n';
    os << r.step << ",mean_width," << fmt(r.mean_width) << '\n';
    os << r.step << ",max_width," << fmt(r.max_width) << '\n';
  }
  if (!os) throw std::runtime_error("write failed: " + path);
}

std::vector<StepRecord> read_history_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw InvalidInput("cannot open " + path);
  std::string line;
  if (!std::getline(is, line) || line != "step,metric,value") throw InvalidInput(path + ": bad history header");
  std::vector<StepRecord> out;
  std::size_t row = 1;
  while (std::getline(is, line)) {
    ++row;
    std::istringstream ls(line);
    std::string step_s, metric, value_s;
    if (!std::getline(ls, step_s, ',') || !std::getline(ls, metric, ',') || !std::getline(ls, value_s)) {
      throw InvalidInput(path + ": malformed row " + std::to_string(row));
    }
    const long step = std::stol(step_s);
    const double value = std::stod(value_s);
    if (out.empty() || out.back().step != step) out.push_back(StepRecord{step});
    StepRecord& r = out.back();
    if (metric == "lr") r.lr = value;
    else if (metric == "nominal_loss") r.nominal_loss = value;
    else if (metric == "mean_width") r.mean_width = value;
    else if (metric == "max_width") r.max_width = value;
    else throw InvalidInput(path + ": unknown metric '" + metric + "' at row " + std::to_string(row));
  }
  return out;
}

CertificationSummary summarize(const std::vector<Certificate>& certs, double nominal_loss, double backdoor_radius) {
  CertificationSummary s;
  s.points = certs.size();
  s.nominal_loss = nominal_loss;
  s.backdoor_radius = backdoor_radius;
  if (certs.empty()) return s;
  s.classification = certs.front().label >= 0;
  std::size_t correct = 0, certified = 0;
  for (const auto& c : certs) {
    if (c.label >= 0 && c.nominal_prediction == c.label) ++correct;
    if (c.certified) ++certified;
    s.mean_loss_lo += c.loss.lo;
    s.mean_loss_hi += c.loss.hi;
  }
  const double n = static_cast<double>(certs.size());
  s.nominal_accuracy = static_cast<double>(correct) / n;
  s.certified_accuracy = static_cast<double>(certified) / n;
  s.mean_loss_lo /= n;
  s.mean_loss_hi /= n;
  return s;
}

void write_certification_csv(const std::string& path, const std::vector<Certificate>& certs) {
  auto os = open_out(path);
  const Eigen::Index k = certs.empty() ? 0 : certs.front().logits.size();
  os << "index,nominal_pred,label,reachable_mask";
  for (Eigen::Index j = 0; j < k; ++j) os << ",logit" << j << "_lo,logit" << j << "_hi";
  os << ",loss_lo,loss_hi,verdict\n";
  for (std::size_t i = 0; i < certs.size(); ++i) {
    const auto& c = certs[i];
    os << i << ',' << c.nominal_prediction << ',' << c.label << ',' << c.reachable_mask();
    for (Eigen::Index j = 0; j < k; ++j) os << ',' << fmt(c.logits.lo()[j]) << ',' << fmt(c.logits.hi()[j]);
    os << ',' << fmt(c.loss.lo) << ',' << fmt(c.loss.hi) << ',' << (c.certified ? "certified" : "not-certified") << '\n';
  }
  if (!os) throw std::runtime_error("write failed: " + path);
}

void write_certification_json(const std::string& path, const CertificationSummary& s) {
  nlohmann::ordered_json j;
  j["schema_version"] = 1;
  j["points"] = s.points;
  j["task"] = s.classification ? "classification" : "regression";
  j["nominal_accuracy"] = s.nominal_accuracy;
  j["certified_accuracy"] = s.certified_accuracy;
  j["mean_loss_lo"] = s.mean_loss_lo;
  j["mean_loss_hi"] = s.mean_loss_hi;
  j["nominal_loss"] = s.nominal_loss;
  j["backdoor_radius"] = s.backdoor_radius;
  auto os = open_out(path);
  os << j.dump(2) << '\n';
}

CertificationSummary read_certification_json(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw InvalidInput("cannot open " + path);
  const auto j = nlohmann::json::parse(is);
  CertificationSummary s;
  s.points = j.at("points").get<std::size_t>();
  s.classification = j.at("task").get<std::string>() == "classification";
  s.nominal_accuracy = j.at("nominal_accuracy").get<double>();
  s.certified_accuracy = j.at("certified_accuracy").get<double>();
  s.mean_loss_lo = j.at("mean_loss_lo").get<double>();
  s.mean_loss_hi = j.at("mean_loss_hi").get<double>();
  s.nominal_loss = j.at("nominal_loss").get<double>();
  s.backdoor_radius = j.at("backdoor_radius").get<double>();
  return s;
}

void write_soundness_json(const std::string& path, const SoundnessReport& r) {
  nlohmann::ordered_json j;
  j["schema_version"] = 1;
  j["trials"] = r.trials;
  j["violations"] = r.violations;
  j["loss_violations"] = r.loss_violations;
  j["box_mean_width"] = r.box_mean_width;
  j["step_min_margin"] = r.step_min_margin;
  auto& res = j["results"] = nlohmann::ordered_json::array();
  for (const auto& t : r.results) {
    res.push_back({{"attack", to_string(t.kind)},
                   {"trial", t.trial},
                   {"violations", t.violations},
                   {"min_margin", t.min_margin},
                   {"loss_contained", t.loss_contained}});
  }
  auto os = open_out(path);
  os << j.dump(2) << '\n';
}

SoundnessReport read_soundness_json(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw InvalidInput("cannot open " + path);
  const auto j = nlohmann::json::parse(is);
  SoundnessReport r;
  r.trials = j.at("trials").get<int>();
  r.violations = j.at("violations").get<int>();
  r.loss_violations = j.at("loss_violations").get<int>();
  r.box_mean_width = j.at("box_mean_width").get<double>();
  r.step_min_margin = j.at("step_min_margin").get<std::vector<double>>();
  for (const auto& t : j.at("results")) {
    r.results.push_back(AttackTrialResult{attack_kind_from_string(t.at("attack").get<std::string>()),
                                          t.at("trial").get<int>(), t.at("violations").get<int>(),
                                          t.at("min_margin").get<double>(), t.at("loss_contained").get<bool>()});
  }
  return r;
}

}  // namespace agt
