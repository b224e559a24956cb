#include "agt/data.hpp"

#include "agt/interval.hpp"

#include <zlib.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

namespace agt {

// ---- Dataset ---------------------------------------------------------------

MinMaxScaler MinMaxScaler::fit(const RowMatrix& m) {
  if (m.rows() == 0) throw InvalidInput("cannot fit a scaler on zero rows");
  MinMaxScaler s;
  s.min = m.colwise().minCoeff().transpose();
  s.range = m.colwise().maxCoeff().transpose() - s.min;
  return s;
}

RowMatrix MinMaxScaler::transform(const RowMatrix& m) const {
  if (m.cols() != min.size()) throw InvalidInput("scaler: column count mismatch");
  RowMatrix out(m.rows(), m.cols());
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    if (range[c] > 0.0) {
      out.col(c) = (m.col(c).array() - min[c]) / range[c];
    } else {
      out.col(c).setZero();
    }
  }
  return out;
}

RowMatrix MinMaxScaler::inverse(const RowMatrix& m) const {
  if (m.cols() != min.size()) throw InvalidInput("scaler: column count mismatch");
  RowMatrix out(m.rows(), m.cols());
  for (Eigen::Index c = 0; c < m.cols(); ++c) out.col(c) = m.col(c).array() * range[c] + min[c];
  return out;
}

Target Dataset::target(Eigen::Index i) const {
  if (task == Task::Classification) return Target::of_class(classes[static_cast<std::size_t>(i)]);
  return Target::of_value(targets.row(i).transpose());
}

void Dataset::set_target(Eigen::Index i, const Target& t) {
  if (task == Task::Classification) {
    if (!t.is_class() || t.class_index >= num_classes) throw InvalidInput("set_target: class out of range");
    classes[static_cast<std::size_t>(i)] = t.class_index;
  } else {
    if (t.value.size() != targets.cols()) throw InvalidInput("set_target: label dimension mismatch");
    targets.row(i) = t.value.transpose();
  }
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out;
  out.task = task;
  out.num_classes = num_classes;
  out.feature_scaler = feature_scaler;
  out.target_scaler = target_scaler;
  const auto n = static_cast<Eigen::Index>(indices.size());
  out.features.resize(n, features.cols());
  if (task == Task::Regression) out.targets.resize(n, targets.cols());
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto i = static_cast<Eigen::Index>(indices[static_cast<std::size_t>(r)]);
    if (i >= size()) throw InvalidInput("subset: index out of range");
    out.features.row(r) = features.row(i);
    if (task == Task::Classification) {
      out.classes.push_back(classes[static_cast<std::size_t>(i)]);
    } else {
      out.targets.row(r) = targets.row(i);
    }
    if (!poisonable.empty()) out.poisonable.push_back(poisonable[static_cast<std::size_t>(i)]);
  }
  return out;
}

void Dataset::validate() const {
  if (!features.allFinite()) throw InvalidInput("dataset: non-finite feature");
  if (!poisonable.empty() && poisonable.size() != static_cast<std::size_t>(size())) {
    throw InvalidInput("dataset: poisonable mask length does not match the row count");
  }
  if (task == Task::Classification) {
    if (classes.size() != static_cast<std::size_t>(size())) throw InvalidInput("dataset: label count mismatch");
    if (num_classes < 1) throw InvalidInput("dataset: num_classes must be >= 1");
    for (std::size_t i = 0; i < classes.size(); ++i) {
      if (classes[i] < 0 || classes[i] >= num_classes) {
        throw InvalidInput("dataset: label " + std::to_string(classes[i]) + " out of range at row " +
                           std::to_string(i));
      }
    }
  } else {
    if (targets.rows() != size()) throw InvalidInput("dataset: target row count mismatch");
    if (!targets.allFinite()) throw InvalidInput("dataset: non-finite target");
  }
}

std::pair<Dataset, Dataset> train_test_split(const Dataset& data, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw InvalidInput("test_fraction must lie in (0, 1)");
  const auto n = static_cast<std::size_t>(data.size());
  const auto n_test = static_cast<std::size_t>(std::lround(test_fraction * static_cast<double>(n)));
  if (n_test == 0 || n_test >= n) throw InvalidInput("split leaves an empty part");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const std::span<const std::size_t> all(order);
  return {data.subset(all.subspan(n_test)), data.subset(all.first(n_test))};
}

// ---- Halfmoons -------------------------------------------------------------

Dataset gen_halfmoons(int n, double noise, std::uint64_t seed) {
  if (n < 2) throw InvalidInput("halfmoons: need at least 2 points");
  if (!(noise >= 0.0)) throw InvalidInput("halfmoons: noise must be >= 0");
  const int n_out = n / 2;
  const int n_in = n - n_out;
  RowMatrix pts(n, 2);
  std::vector<int> labels(static_cast<std::size_t>(n));
  auto angle = [](int i, int count) {
    return count == 1 ? 0.0 : std::numbers::pi * static_cast<double>(i) / static_cast<double>(count - 1);
  };
  for (int i = 0; i < n_out; ++i) {
    const double t = angle(i, n_out);
    pts(i, 0) = std::cos(t);
    pts(i, 1) = std::sin(t);
    labels[static_cast<std::size_t>(i)] = 0;
  }
  for (int i = 0; i < n_in; ++i) {
    const double t = angle(i, n_in);
    pts(n_out + i, 0) = 1.0 - std::cos(t);
    pts(n_out + i, 1) = 1.0 - std::sin(t) - 0.5;
    labels[static_cast<std::size_t>(n_out + i)] = 1;
  }
  std::mt19937_64 rng(seed);
  if (noise > 0.0) {
    std::normal_distribution<double> gauss(0.0, noise);
    for (Eigen::Index i = 0; i < pts.size(); ++i) pts.data()[i] += gauss(rng);
  }
  std::vector<std::size_t> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);

  Dataset d;
  d.task = Task::Classification;
  d.num_classes = 2;
  d.features.resize(n, 2);
  for (int r = 0; r < n; ++r) {
    d.features.row(r) = pts.row(static_cast<Eigen::Index>(order[static_cast<std::size_t>(r)]));
    d.classes.push_back(labels[order[static_cast<std::size_t>(r)]]);
  }
  return d;
}

// ---- CSV -------------------------------------------------------------------

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      cells.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  cells.push_back(cur);
  for (auto& s : cells) {
    const auto b = s.find_first_not_of(" \t");
    const auto e = s.find_last_not_of(" \t");
    s = b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  }
  return cells;
}

double parse_cell(const std::string& cell, std::size_t row, std::size_t col, const std::string& path) {
  double v = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  if (!cell.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (cell.empty() || ec != std::errc() || ptr != last || !std::isfinite(v)) {
    throw InvalidInput(path + ": line " + std::to_string(row) + ", column " + std::to_string(col + 1) +
                       ": not a finite number: '" + cell + "'");
  }
  return v;
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

Table read_table(const std::string& path, std::optional<std::size_t> row_limit) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open " + path);
  Table t;
  std::string line;
  if (!std::getline(in, line)) throw InvalidInput(path + ": missing header row");
  t.header = split_csv_line(line);
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    if (row_limit && t.rows.size() >= *row_limit) break;
    const auto cells = split_csv_line(line);
    if (cells.size() != t.header.size()) {
      throw InvalidInput(path + ": line " + std::to_string(row) + " has " + std::to_string(cells.size()) +
                         " columns, header has " + std::to_string(t.header.size()));
    }
    std::vector<double> vals(cells.size());
    for (std::size_t c = 0; c < cells.size(); ++c) vals[c] = parse_cell(cells[c], row, c, path);
    t.rows.push_back(std::move(vals));
  }
  if (t.rows.empty()) throw InvalidInput(path + ": no data rows");
  return t;
}

}  // namespace

Dataset load_csv_regression(const std::string& path, const CsvOptions& opts) {
  if (opts.label_columns.empty()) throw InvalidInput("csv: at least one label column is required");
  const Table t = read_table(path, opts.row_limit);
  std::vector<int> label_idx, feature_idx;
  for (const auto& name : opts.label_columns) {
    const auto it = std::find(t.header.begin(), t.header.end(), name);
    if (it == t.header.end()) throw InvalidInput(path + ": no column named '" + name + "'");
    label_idx.push_back(static_cast<int>(it - t.header.begin()));
  }
  for (int c = 0; c < static_cast<int>(t.header.size()); ++c) {
    if (std::find(label_idx.begin(), label_idx.end(), c) == label_idx.end()) feature_idx.push_back(c);
  }
  if (feature_idx.empty()) throw InvalidInput(path + ": no feature columns");

  Dataset d;
  d.task = Task::Regression;
  const auto n = static_cast<Eigen::Index>(t.rows.size());
  d.features.resize(n, static_cast<Eigen::Index>(feature_idx.size()));
  d.targets.resize(n, static_cast<Eigen::Index>(label_idx.size()));
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto& row = t.rows[static_cast<std::size_t>(r)];
    for (std::size_t c = 0; c < feature_idx.size(); ++c) d.features(r, static_cast<Eigen::Index>(c)) = row[feature_idx[c]];
    for (std::size_t c = 0; c < label_idx.size(); ++c) d.targets(r, static_cast<Eigen::Index>(c)) = row[label_idx[c]];
  }
  if (opts.normalize) {
    d.feature_scaler = MinMaxScaler::fit(d.features);
    d.target_scaler = MinMaxScaler::fit(d.targets);
    d.features = d.feature_scaler->transform(d.features);
    d.targets = d.target_scaler->transform(d.targets);
  }
  return d;
}

// ---- IDX -------------------------------------------------------------------

namespace {

class GzReader {
 public:
  explicit GzReader(const std::string& path) : path_(path), f_(gzopen(path.c_str(), "rb")) {
    if (!f_) throw InvalidInput("cannot open " + path);
  }
  ~GzReader() { gzclose(f_); }
  GzReader(const GzReader&) = delete;
  GzReader& operator=(const GzReader&) = delete;

  void read(void* dst, std::size_t bytes, const char* what) {
    auto* p = static_cast<unsigned char*>(dst);
    std::size_t got = 0;
    while (got < bytes) {
      const unsigned chunk = static_cast<unsigned>(std::min<std::size_t>(bytes - got, 1u << 30));
      const int r = gzread(f_, p + got, chunk);
      if (r <= 0) {
        throw InvalidInput(path_ + ": truncated at offset " + std::to_string(offset_ + got) + " while reading " +
                           what);
      }
      got += static_cast<std::size_t>(r);
    }
    offset_ += bytes;
  }

  std::uint32_t u32(const char* what) {
    unsigned char b[4];
    read(b, 4, what);
    return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) | b[3];
  }

  std::size_t offset() const { return offset_; }
  const std::string& path() const { return path_; }

 private:
  std::string path_;
  gzFile f_;
  std::size_t offset_ = 0;
};

class GzWriter {
 public:
  GzWriter(const std::string& path, bool compress) : path_(path), f_(gzopen(path.c_str(), compress ? "wb9" : "wbT")) {
    if (!f_) throw InvalidInput("cannot write " + path);
  }
  ~GzWriter() {
    if (f_) gzclose(f_);
  }
  GzWriter(const GzWriter&) = delete;
  GzWriter& operator=(const GzWriter&) = delete;

  void write(const void* src, std::size_t bytes) {
    if (bytes && gzwrite(f_, src, static_cast<unsigned>(bytes)) != static_cast<int>(bytes)) {
      throw std::runtime_error("write failed: " + path_);
    }
  }
  void u32(std::uint32_t v) {
    const unsigned char b[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                                static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
    write(b, 4);
  }
  void close() {
    if (gzclose(f_) != Z_OK) {
      f_ = nullptr;
      throw std::runtime_error("close failed: " + path_);
    }
    f_ = nullptr;
  }

 private:
  std::string path_;
  gzFile f_;
};

void expect_magic(GzReader& r, std::uint32_t want) {
  const std::uint32_t magic = r.u32("magic number");
  if (magic != want) {
    std::ostringstream os;
    os << r.path() << ": bad magic 0x" << std::hex << magic << " at offset 0, expected 0x" << want;
    throw InvalidInput(os.str());
  }
}

}  // namespace

Dataset load_idx_images(const std::string& path_images, const std::string& path_labels) {
  GzReader img(path_images);
  expect_magic(img, 0x00000803);
  const std::uint32_t count = img.u32("image count");
  const std::uint32_t rows = img.u32("row count");
  const std::uint32_t cols = img.u32("column count");
  if (rows == 0 || cols == 0) throw InvalidInput(path_images + ": zero image dimension at offset 8");

  GzReader lab(path_labels);
  expect_magic(lab, 0x00000801);
  const std::uint32_t n_labels = lab.u32("label count");
  if (n_labels != count) {
    throw InvalidInput(path_labels + ": " + std::to_string(n_labels) + " labels for " + std::to_string(count) +
                       " images");
  }

  const std::size_t pixels = static_cast<std::size_t>(rows) * cols;
  std::vector<std::uint8_t> buf(pixels * count);
  img.read(buf.data(), buf.size(), "pixel data");
  std::vector<std::uint8_t> labels(count);
  lab.read(labels.data(), labels.size(), "label data");

  Dataset d;
  d.task = Task::Classification;
  d.features.resize(count, static_cast<Eigen::Index>(pixels));
  for (std::size_t i = 0; i < buf.size(); ++i) d.features.data()[i] = static_cast<double>(buf[i]) / 255.0;
  int max_label = 0;
  for (auto l : labels) {
    d.classes.push_back(l);
    max_label = std::max<int>(max_label, l);
  }
  d.num_classes = max_label + 1;
  return d;
}

void write_idx_images(const std::string& path, const std::vector<std::uint8_t>& pixels, std::uint32_t count,
                      std::uint32_t rows, std::uint32_t cols, bool compress) {
  if (pixels.size() != static_cast<std::size_t>(count) * rows * cols) {
    throw InvalidInput("write_idx_images: pixel buffer does not match dimensions");
  }
  GzWriter w(path, compress);
  w.u32(0x00000803);
  w.u32(count);
  w.u32(rows);
  w.u32(cols);
  w.write(pixels.data(), pixels.size());
  w.close();
}

void write_idx_labels(const std::string& path, const std::vector<std::uint8_t>& labels, bool compress) {
  GzWriter w(path, compress);
  w.u32(0x00000801);
  w.u32(static_cast<std::uint32_t>(labels.size()));
  w.write(labels.data(), labels.size());
  w.close();
}

// ---- PCA -------------------------------------------------------------------

RowMatrix Pca::project(const RowMatrix& features) const {
  if (features.cols() != mean.size()) throw InvalidInput("pca: feature dimension mismatch");
  return (features.rowwise() - mean.transpose()) * components.transpose();
}

RowMatrix Pca::reconstruct(const RowMatrix& projected) const {
  if (projected.cols() != components.rows()) throw InvalidInput("pca: component count mismatch");
  return (projected * components).rowwise() + mean.transpose();
}

Pca pca_fit(const RowMatrix& features, int k) {
  const Eigen::Index n = features.rows(), d = features.cols();
  if (k < 1 || k > std::min(n, d)) {
    throw InvalidInput("pca: k = " + std::to_string(k) + " outside [1, min(N, n_in)]");
  }
  Pca p;
  p.mean = features.colwise().mean().transpose();
  const Eigen::MatrixXd centred = features.rowwise() - p.mean.transpose();
  const double denom = n > 1 ? static_cast<double>(n - 1) : 1.0;
  const Eigen::MatrixXd cov = (centred.transpose() * centred) / denom;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  if (es.info() != Eigen::Success) throw std::runtime_error("pca: eigendecomposition failed");
  // Eigenvalues come out ascending.
  p.components.resize(k, d);
  p.explained_variance.resize(k);
  for (int i = 0; i < k; ++i) {
    const Eigen::Index src = d - 1 - i;
    Eigen::VectorXd v = es.eigenvectors().col(src);
    // Sign convention: largest-magnitude entry positive, for reproducible output.
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v[arg] < 0) v = -v;
    p.components.row(i) = v.transpose();
    p.explained_variance[i] = std::max(0.0, es.eigenvalues()[src]);
  }
  return p;
}

Dataset pca_project(const Dataset& data, const Pca& pca) {
  Dataset out = data;
  out.features = pca.project(data.features);
  out.feature_scaler.reset();
  return out;
}

// ---- Plain dataset CSV -----------------------------------------------------

void write_dataset_csv(const std::string& path, const Dataset& data) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  os.precision(17);
  for (Eigen::Index c = 0; c < data.input_dim(); ++c) os << (c ? "," : "") << 'x' << c;
  if (data.task == Task::Classification) {
    os << ",label";
  } else {
    for (Eigen::Index c = 0; c < data.targets.cols(); ++c) os << ",y" << c;
  }
  os << '\n';
  for (Eigen::Index r = 0; r < data.size(); ++r) {
    for (Eigen::Index c = 0; c < data.input_dim(); ++c) os << (c ? "," : "") << data.features(r, c);
    if (data.task == Task::Classification) {
      os << ',' << data.classes[static_cast<std::size_t>(r)];
    } else {
      for (Eigen::Index c = 0; c < data.targets.cols(); ++c) os << ',' << data.targets(r, c);
    }
    os << '\n';
  }
  if (!os) throw std::runtime_error("write failed: " + path);
}

Dataset read_dataset_csv(const std::string& path) {
  const Table t = read_table(path, std::nullopt);
  Dataset d;
  std::vector<int> xs, ys;
  int label_col = -1;
  for (int c = 0; c < static_cast<int>(t.header.size()); ++c) {
    const auto& h = t.header[static_cast<std::size_t>(c)];
    if (h == "label") {
      label_col = c;
    } else if (!h.empty() && h[0] == 'y') {
      ys.push_back(c);
    } else if (!h.empty() && h[0] == 'x') {
      xs.push_back(c);
    } else {
      throw InvalidInput(path + ": unexpected column '" + h + "'");
    }
  }
  if (xs.empty() || (label_col < 0) == ys.empty()) throw InvalidInput(path + ": need x columns and label or y columns");
  const auto n = static_cast<Eigen::Index>(t.rows.size());
  d.features.resize(n, static_cast<Eigen::Index>(xs.size()));
  d.task = label_col >= 0 ? Task::Classification : Task::Regression;
  if (d.task == Task::Regression) d.targets.resize(n, static_cast<Eigen::Index>(ys.size()));
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto& row = t.rows[static_cast<std::size_t>(r)];
    for (std::size_t c = 0; c < xs.size(); ++c) d.features(r, static_cast<Eigen::Index>(c)) = row[xs[c]];
    if (d.task == Task::Classification) {
      const double v = row[static_cast<std::size_t>(label_col)];
      if (v < 0 || v != std::floor(v)) throw InvalidInput(path + ": line " + std::to_string(r + 2) + ": bad class label");
      d.classes.push_back(static_cast<int>(v));
      d.num_classes = std::max(d.num_classes, static_cast<int>(v) + 1);
    } else {
      for (std::size_t c = 0; c < ys.size(); ++c) d.targets(r, static_cast<Eigen::Index>(c)) = row[ys[c]];
    }
  }
  return d;
}

}  // namespace agt
