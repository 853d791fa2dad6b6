#include "dcu/data.hpp"

#include "dcu/errors.hpp"
#include "dcu/format.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>

namespace dcu {

int Dataset::num_classes() const {
  if (labels.empty()) return 0;
  return static_cast<int>(std::set<int>(labels.begin(), labels.end()).size());
}

Eigen::MatrixXd Dataset::encoder_inputs(double bit_scale) const {
  Eigen::MatrixXd out(samples.rows(), input_dim());
  out.leftCols(feature_dim()) = samples;
  if (bit_count() > 0) out.rightCols(bit_count()) = bit_scale * bits;
  return out;
}

Dataset Dataset::subset(const std::vector<int>& indices) const {
  Dataset out;
  out.generator = generator;
  out.seed = seed;
  const auto m = static_cast<Eigen::Index>(indices.size());
  out.samples.resize(m, samples.cols());
  out.bits.resize(m, bits.cols());
  for (Eigen::Index r = 0; r < m; ++r) {
    const int i = indices[static_cast<size_t>(r)];
    if (i < 0 || i >= size()) throw std::out_of_range("dataset subset index out of range");
    out.samples.row(r) = samples.row(i);
    if (bits.cols() > 0) out.bits.row(r) = bits.row(i);
    if (labeled()) out.labels.push_back(labels[static_cast<size_t>(i)]);
  }
  return out;
}

void Dataset::validate() const {
  if (!samples.allFinite()) throw std::invalid_argument("dataset has non-finite samples");
  if (labeled() && static_cast<int>(labels.size()) != size())
    throw std::invalid_argument("dataset label count does not match sample count");
  if (bits.cols() > 0) {
    if (bits.rows() != samples.rows())
      throw std::invalid_argument("dataset bit rows do not match sample count");
    if (!((bits.array() == 0.0) || (bits.array() == 1.0)).all())
      throw std::invalid_argument("bit channels must be 0 or 1");
  }
}

Dataset make_gaussian_mixture(int classes, int per_class, int input_dim, double separation,
                              std::uint64_t seed, int latent_dim) {
  if (classes < 1 || per_class < 1 || input_dim < 1)
    throw std::invalid_argument("gaussian mixture: counts must be positive");
  if (input_dim < classes)
    throw std::invalid_argument("gaussian mixture: input_dim (" + std::to_string(input_dim) +
                                ") < classes (" + std::to_string(classes) +
                                ") leaves no orthogonal class means");
  if (latent_dim == 0) latent_dim = input_dim;
  if (latent_dim < classes || latent_dim > input_dim)
    throw std::invalid_argument("gaussian mixture: latent_dim must lie in [classes, input_dim]");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Dataset ds;
  ds.generator = "gaussian_mixture";
  ds.seed = seed;
  const int n = classes * per_class;
  ds.samples.resize(n, input_dim);
  ds.bits.resize(n, 0);
  ds.labels.reserve(static_cast<size_t>(n));
  for (int c = 0; c < classes; ++c) {
    for (int s = 0; s < per_class; ++s) {
      const int row = c * per_class + s;
      for (int j = 0; j < input_dim; ++j) ds.samples(row, j) = j < latent_dim ? normal(rng) : 0.0;
      ds.samples(row, c) += separation;
      ds.labels.push_back(c);
    }
  }
  return ds;
}

Dataset make_randbits(const Dataset& base, int k_bits, std::uint64_t seed) {
  if (k_bits < 0) throw std::invalid_argument("randbits: k_bits must be >= 0");
  if (k_bits > 30) throw std::invalid_argument("randbits: k_bits > 30 is not supported");
  Dataset out = base;
  if (k_bits == 0) return out;
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::uint64_t> draw(0, (std::uint64_t{1} << k_bits) - 1);
  out.bits.resize(base.size(), k_bits);
  for (int i = 0; i < base.size(); ++i) {
    const std::uint64_t value = draw(rng);
    for (int b = 0; b < k_bits; ++b) out.bits(i, b) = static_cast<double>((value >> b) & 1U);
  }
  out.generator = base.generator + "+randbits" + std::to_string(k_bits);
  return out;
}

std::string to_string(AugmentationKind kind) {
  switch (kind) {
    case AugmentationKind::UniformBall: return "uniform_ball";
    case AugmentationKind::GaussianTruncated: return "gaussian_truncated";
    case AugmentationKind::MaskOneCoordinate: return "mask_one_coordinate";
  }
  return "unknown";
}

AugmentationKind augmentation_kind_from_string(const std::string& name) {
  if (name == "uniform_ball") return AugmentationKind::UniformBall;
  if (name == "gaussian_truncated") return AugmentationKind::GaussianTruncated;
  if (name == "mask_one_coordinate") return AugmentationKind::MaskOneCoordinate;
  throw std::invalid_argument("unknown augmentation kind '" + name +
                              "' (expected uniform_ball|gaussian_truncated|mask_one_coordinate)");
}

void AugmentationSpec::validate() const {
  if (!(radius >= 0.0) || !std::isfinite(radius))
    throw std::invalid_argument("augmentation radius must be finite and >= 0");
}

Eigen::VectorXd augment(const Eigen::VectorXd& sample, const AugmentationSpec& aug,
                        std::mt19937_64& rng) {
  const auto p = sample.size();
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  switch (aug.kind) {
    case AugmentationKind::UniformBall: {
      if (aug.radius == 0.0) return sample;
      Eigen::VectorXd dir(p);
      double norm = 0.0;
      do {
        for (Eigen::Index j = 0; j < p; ++j) dir(j) = normal(rng);
        norm = dir.norm();
      } while (norm == 0.0);
      const double r = aug.radius * std::pow(unit(rng), 1.0 / static_cast<double>(p));
      Eigen::VectorXd out = sample + (r / norm) * dir;
      return out;
    }
    case AugmentationKind::GaussianTruncated: {
      if (aug.radius == 0.0) return sample;
      const double sd = aug.radius / (2.0 * std::sqrt(static_cast<double>(p)));
      Eigen::VectorXd noise(p);
      do {
        for (Eigen::Index j = 0; j < p; ++j) noise(j) = sd * normal(rng);
      } while (noise.norm() > aug.radius);
      return sample + noise;
    }
    case AugmentationKind::MaskOneCoordinate: {
      std::uniform_int_distribution<Eigen::Index> pick(0, p - 1);
      Eigen::VectorXd out = sample;
      out(pick(rng)) = 0.0;
      return out;
    }
  }
  return sample;
}

bool supports_overlap(const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                      const AugmentationSpec& aug) {
  switch (aug.kind) {
    case AugmentationKind::UniformBall:
    case AugmentationKind::GaussianTruncated: {
      // Closed balls: distance exactly 2r counts as overlapping.
      const double reach = 2.0 * aug.radius;
      return (a - b).squaredNorm() <= reach * reach;
    }
    case AugmentationKind::MaskOneCoordinate: {
      std::vector<Eigen::Index> diff;
      for (Eigen::Index j = 0; j < a.size(); ++j)
        if (a(j) != b(j)) {
          diff.push_back(j);
          if (diff.size() > 2) return false;
        }
      if (diff.size() <= 1) return true;
      // mask_j(a) == mask_j'(b) with j != j' needs b_j == 0 and a_j' == 0.
      const auto j = diff[0];
      const auto k = diff[1];
      return (b(j) == 0.0 && a(k) == 0.0) || (a(j) == 0.0 && b(k) == 0.0);
    }
  }
  return false;
}

Eigen::MatrixXd ViewBatch::encoder_inputs(double bit_scale) const {
  Eigen::MatrixXd out(features.rows(), features.cols() + bits.cols());
  out.leftCols(features.cols()) = features;
  if (bits.cols() > 0) out.rightCols(bits.cols()) = bit_scale * bits;
  return out;
}

ViewBatch sample_views(const Dataset& dataset, const AugmentationSpec& aug, int views,
                       std::mt19937_64& rng) {
  aug.validate();
  if (views < 1) throw std::invalid_argument("sample_views: V must be >= 1");
  ViewBatch out;
  out.anchors = dataset.size();
  out.views = views;
  const Eigen::Index rows = static_cast<Eigen::Index>(dataset.size()) * views;
  out.features.resize(rows, dataset.feature_dim());
  out.bits.resize(rows, dataset.bit_count());
  for (int a = 0; a < dataset.size(); ++a) {
    const Eigen::VectorXd anchor = dataset.samples.row(a).transpose();
    for (int v = 0; v < views; ++v) {
      const Eigen::Index r = static_cast<Eigen::Index>(a) * views + v;
      out.features.row(r) = augment(anchor, aug, rng).transpose();
      if (dataset.bit_count() > 0) out.bits.row(r) = dataset.bits.row(a);
    }
  }
  return out;
}

ViewBatch sample_views(const Dataset& dataset, const AugmentationSpec& aug, int views,
                       std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return sample_views(dataset, aug, views, rng);
}

PriorEmbedding PriorEmbedding::subset(const std::vector<int>& indices) const {
  PriorEmbedding out;
  out.source = source;
  out.noise = noise;
  out.vectors.resize(static_cast<Eigen::Index>(indices.size()), vectors.cols());
  for (size_t r = 0; r < indices.size(); ++r) {
    if (indices[r] < 0 || indices[r] >= size()) throw std::out_of_range("prior subset index");
    out.vectors.row(static_cast<Eigen::Index>(r)) = vectors.row(indices[r]);
  }
  return out;
}

PriorEmbedding oracle_prior(const Dataset& dataset, double noise, std::uint64_t seed,
                            bool shuffled) {
  if (!dataset.labeled()) throw std::invalid_argument("oracle prior needs a labeled dataset");
  if (!(noise >= 0.0)) throw std::invalid_argument("oracle prior noise must be >= 0");
  std::mt19937_64 rng(seed);
  std::vector<int> codes = dataset.labels;
  if (shuffled) std::shuffle(codes.begin(), codes.end(), rng);
  const int width = *std::max_element(dataset.labels.begin(), dataset.labels.end()) + 1;
  std::normal_distribution<double> normal(0.0, 1.0);
  PriorEmbedding prior;
  prior.source = shuffled ? PriorSource::Shuffled : PriorSource::Oracle;
  prior.noise = noise;
  prior.vectors = Eigen::MatrixXd::Zero(dataset.size(), width);
  for (int i = 0; i < dataset.size(); ++i) {
    prior.vectors(i, codes[static_cast<size_t>(i)]) = 1.0;
    if (noise > 0.0)
      for (int j = 0; j < width; ++j) prior.vectors(i, j) += noise * normal(rng);
  }
  return prior;
}

PriorEmbedding clean_feature_prior(const Dataset& dataset) {
  PriorEmbedding prior;
  prior.source = PriorSource::CleanFeatures;
  prior.vectors = dataset.samples;
  return prior;
}

void standardize(PriorEmbedding& prior) {
  const Eigen::Index n = prior.vectors.rows();
  if (n == 0) return;
  for (Eigen::Index j = 0; j < prior.vectors.cols(); ++j) {
    auto col = prior.vectors.col(j);
    const double mean = col.mean();
    col.array() -= mean;
    const double sd = std::sqrt(col.squaredNorm() / static_cast<double>(n));
    if (sd > 0.0) col /= sd;
  }
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string strip_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

[[noreturn]] void fail_at(const std::filesystem::path& path, int line, const std::string& what) {
  throw IoError(path.string() + ":" + std::to_string(line) + ": " + what);
}

struct IndexedRows {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;  // ordered by index, index column removed
  std::vector<int> lines;                      // source line of each row
};

IndexedRows read_indexed_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  IndexedRows out;
  std::string line;
  if (!std::getline(in, line)) fail_at(path, 1, "missing header");
  out.header = split_csv(strip_cr(line));
  if (out.header.empty() || out.header[0] != "index")
    fail_at(path, 1, "header must start with 'index'");

  std::vector<std::pair<long long, std::vector<std::string>>> rows;
  std::vector<int> line_of;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    line = strip_cr(line);
    if (line.empty()) continue;
    auto fields = split_csv(line);
    if (fields.size() != out.header.size())
      fail_at(path, lineno, "expected " + std::to_string(out.header.size()) + " fields, got " +
                                std::to_string(fields.size()));
    long long idx = 0;
    try {
      idx = parse_int(fields[0]);
    } catch (const std::invalid_argument& e) {
      fail_at(path, lineno, e.what());
    }
    fields.erase(fields.begin());
    rows.emplace_back(idx, std::move(fields));
    line_of.push_back(lineno);
  }
  const auto n = static_cast<long long>(rows.size());
  std::vector<int> seen(rows.size(), 0);
  for (size_t r = 0; r < rows.size(); ++r) {
    const long long idx = rows[r].first;
    if (idx < 0 || idx >= n)
      fail_at(path, line_of[r], "index " + std::to_string(idx) + " outside 0.." + std::to_string(n - 1));
    if (seen[static_cast<size_t>(idx)])
      fail_at(path, line_of[r], "duplicate index " + std::to_string(idx) + " (first on line " +
                                    std::to_string(seen[static_cast<size_t>(idx)]) + ")");
    seen[static_cast<size_t>(idx)] = line_of[r];
  }
  out.rows.resize(rows.size());
  out.lines.resize(rows.size());
  for (size_t r = 0; r < rows.size(); ++r) {
    const auto idx = static_cast<size_t>(rows[r].first);
    out.rows[idx] = std::move(rows[r].second);
    out.lines[idx] = line_of[r];
  }
  return out;
}

double parse_finite(const std::filesystem::path& path, int line, const std::string& text) {
  double v = 0.0;
  try {
    v = parse_double(text);
  } catch (const std::invalid_argument& e) {
    fail_at(path, line, e.what());
  }
  if (!std::isfinite(v)) fail_at(path, line, "non-finite value '" + text + "'");
  return v;
}

void write_or_throw(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace

PriorEmbedding load_prior(const std::filesystem::path& path) {
  IndexedRows table = read_indexed_csv(path);
  const auto dims = static_cast<Eigen::Index>(table.header.size() - 1);
  PriorEmbedding prior;
  prior.source = PriorSource::File;
  prior.vectors.resize(static_cast<Eigen::Index>(table.rows.size()), dims);
  for (size_t i = 0; i < table.rows.size(); ++i) {
    for (Eigen::Index j = 0; j < dims; ++j)
      prior.vectors(static_cast<Eigen::Index>(i), j) =
          parse_finite(path, table.lines[i], table.rows[i][static_cast<size_t>(j)]);
  }
  return prior;
}

void save_prior(const PriorEmbedding& prior, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "index";
  for (Eigen::Index j = 0; j < prior.vectors.cols(); ++j) out << ",z" << j;
  out << '\n';
  for (Eigen::Index i = 0; i < prior.vectors.rows(); ++i) {
    out << i;
    for (Eigen::Index j = 0; j < prior.vectors.cols(); ++j) out << ',' << format_double(prior.vectors(i, j));
    out << '\n';
  }
  write_or_throw(out, path);
}

Dataset load_dataset(const std::filesystem::path& path) {
  IndexedRows table = read_indexed_csv(path);
  std::vector<size_t> feature_cols, bit_cols;
  std::optional<size_t> label_col;
  for (size_t c = 1; c < table.header.size(); ++c) {
    const std::string& h = table.header[c];
    if (h == "label") {
      label_col = c;
    } else if (h.rfind("bit:", 0) == 0) {
      bit_cols.push_back(c);
    } else {
      feature_cols.push_back(c);
    }
  }
  Dataset ds;
  ds.generator = "file";
  const auto n = static_cast<Eigen::Index>(table.rows.size());
  ds.samples.resize(n, static_cast<Eigen::Index>(feature_cols.size()));
  ds.bits.resize(n, static_cast<Eigen::Index>(bit_cols.size()));
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& row = table.rows[static_cast<size_t>(i)];
    const int line = table.lines[static_cast<size_t>(i)];
    for (size_t j = 0; j < feature_cols.size(); ++j)
      ds.samples(i, static_cast<Eigen::Index>(j)) = parse_finite(path, line, row[feature_cols[j] - 1]);
    for (size_t j = 0; j < bit_cols.size(); ++j) {
      const double b = parse_finite(path, line, row[bit_cols[j] - 1]);
      if (b != 0.0 && b != 1.0) fail_at(path, line, "bit value must be 0 or 1");
      ds.bits(i, static_cast<Eigen::Index>(j)) = b;
    }
    if (label_col) {
      try {
        ds.labels.push_back(static_cast<int>(parse_int(row[*label_col - 1])));
      } catch (const std::invalid_argument& e) {
        fail_at(path, line, e.what());
      }
    }
  }
  return ds;
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "index";
  for (int j = 0; j < dataset.feature_dim(); ++j) out << ",x" << j;
  if (dataset.labeled()) out << ",label";
  for (int j = 0; j < dataset.bit_count(); ++j) out << ",bit:" << j;
  out << '\n';
  for (int i = 0; i < dataset.size(); ++i) {
    out << i;
    for (int j = 0; j < dataset.feature_dim(); ++j) out << ',' << format_double(dataset.samples(i, j));
    if (dataset.labeled()) out << ',' << dataset.labels[static_cast<size_t>(i)];
    for (int j = 0; j < dataset.bit_count(); ++j) out << ',' << static_cast<int>(dataset.bits(i, j));
    out << '\n';
  }
  write_or_throw(out, path);
}

}  // namespace dcu
