#include "dcu/encoder.hpp"

#include "dcu/errors.hpp"
#include "dcu/format.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace dcu {

std::string to_string(Activation act) { return act == Activation::ReLU ? "relu" : "tanh"; }

Activation activation_from_string(const std::string& name) {
  if (name == "relu") return Activation::ReLU;
  if (name == "tanh") return Activation::Tanh;
  throw std::invalid_argument("unknown activation '" + name + "' (expected relu|tanh)");
}

namespace {

DenseLayer glorot(int in, int out, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / (in + out));
  std::uniform_real_distribution<double> u(-limit, limit);
  DenseLayer layer;
  layer.weight.resize(out, in);
  for (int r = 0; r < out; ++r)
    for (int c = 0; c < in; ++c) layer.weight(r, c) = u(rng);
  layer.bias = Eigen::VectorXd::Zero(out);
  return layer;
}

// Backbone and head form one chain with the activation between consecutive layers.
std::vector<const DenseLayer*> chain(const EncoderParams& p) {
  std::vector<const DenseLayer*> out;
  for (const auto& l : p.backbone) out.push_back(&l);
  for (const auto& l : p.head) out.push_back(&l);
  return out;
}

std::vector<DenseLayer*> chain(EncoderParams& p) {
  std::vector<DenseLayer*> out;
  for (auto& l : p.backbone) out.push_back(&l);
  for (auto& l : p.head) out.push_back(&l);
  return out;
}

Eigen::MatrixXd activate(Activation act, const Eigen::MatrixXd& z) {
  if (act == Activation::Tanh) return z.array().tanh().matrix();
  return z.cwiseMax(0.0);
}

Eigen::MatrixXd activation_grad(Activation act, const Eigen::MatrixXd& z) {
  if (act == Activation::Tanh) return (1.0 - z.array().tanh().square()).matrix();
  return (z.array() > 0.0).cast<double>().matrix();
}

Eigen::MatrixXd apply(const DenseLayer& layer, const Eigen::MatrixXd& in) {
  Eigen::MatrixXd out = in * layer.weight.transpose();
  out.rowwise() += layer.bias.transpose();
  return out;
}

}  // namespace

EncoderParams EncoderParams::init(std::vector<int> layer_dims, Activation activation,
                                  std::vector<int> head_dims, std::uint64_t seed, double gain) {
  EncoderParams p;
  p.layer_dims = std::move(layer_dims);
  p.head_dims = std::move(head_dims);
  p.activation = activation;
  if (p.layer_dims.size() < 2) throw std::invalid_argument("encoder needs at least {in, out} dims");
  if (!p.head_dims.empty() && p.head_dims.size() != 2)
    throw std::invalid_argument("projection head must have exactly 2 layers");
  for (int d : p.layer_dims)
    if (d < 1) throw std::invalid_argument("encoder layer dims must be positive");
  for (int d : p.head_dims)
    if (d < 1) throw std::invalid_argument("projection head dims must be positive");
  if (!(gain > 0.0) || !std::isfinite(gain))
    throw std::invalid_argument("encoder init gain must be positive and finite");
  std::mt19937_64 rng(seed);
  for (size_t l = 0; l + 1 < p.layer_dims.size(); ++l)
    p.backbone.push_back(glorot(p.layer_dims[l], p.layer_dims[l + 1], rng));
  if (!p.head_dims.empty()) {
    p.head.push_back(glorot(p.layer_dims.back(), p.head_dims[0], rng));
    p.head.push_back(glorot(p.head_dims[0], p.head_dims[1], rng));
  }
  if (gain != 1.0)
    for (DenseLayer* l : chain(p)) l->weight *= gain;
  return p;
}

size_t EncoderParams::parameter_count() const {
  size_t total = 0;
  for (const DenseLayer* l : chain(*this)) total += static_cast<size_t>(l->weight.size() + l->bias.size());
  return total;
}

Eigen::VectorXd EncoderParams::flatten() const {
  Eigen::VectorXd flat(static_cast<Eigen::Index>(parameter_count()));
  Eigen::Index at = 0;
  for (const DenseLayer* l : chain(*this)) {
    for (Eigen::Index r = 0; r < l->weight.rows(); ++r)
      for (Eigen::Index c = 0; c < l->weight.cols(); ++c) flat(at++) = l->weight(r, c);
    for (Eigen::Index r = 0; r < l->bias.size(); ++r) flat(at++) = l->bias(r);
  }
  return flat;
}

void EncoderParams::assign(const Eigen::VectorXd& flat) {
  if (flat.size() != static_cast<Eigen::Index>(parameter_count()))
    throw std::invalid_argument("assign: parameter vector has wrong length");
  Eigen::Index at = 0;
  for (DenseLayer* l : chain(*this)) {
    for (Eigen::Index r = 0; r < l->weight.rows(); ++r)
      for (Eigen::Index c = 0; c < l->weight.cols(); ++c) l->weight(r, c) = flat(at++);
    for (Eigen::Index r = 0; r < l->bias.size(); ++r) l->bias(r) = flat(at++);
  }
}

void EncoderParams::validate() const {
  if (layer_dims.size() < 2 || backbone.size() + 1 != layer_dims.size())
    throw std::invalid_argument("encoder: layer_dims and backbone layers disagree");
  for (size_t l = 0; l < backbone.size(); ++l)
    if (backbone[l].in_dim() != layer_dims[l] || backbone[l].out_dim() != layer_dims[l + 1] ||
        backbone[l].bias.size() != layer_dims[l + 1])
      throw std::invalid_argument("encoder: backbone layer " + std::to_string(l) + " has wrong shape");
  if (head_dims.empty() != head.empty())
    throw std::invalid_argument("encoder: head_dims and head layers disagree");
  if (!head.empty()) {
    if (head.size() != 2 || head_dims.size() != 2 || head[0].in_dim() != layer_dims.back() ||
        head[0].out_dim() != head_dims[0] || head[1].in_dim() != head_dims[0] ||
        head[1].out_dim() != head_dims[1] || head[0].bias.size() != head_dims[0] ||
        head[1].bias.size() != head_dims[1])
      throw std::invalid_argument("encoder: projection head has wrong shape");
  }
}

void EncoderParams::axpy(double scale, const EncoderParams& g) {
  auto mine = chain(*this);
  auto theirs = chain(g);
  if (mine.size() != theirs.size()) throw std::invalid_argument("axpy: layer count mismatch");
  for (size_t l = 0; l < mine.size(); ++l) {
    mine[l]->weight += scale * theirs[l]->weight;
    mine[l]->bias += scale * theirs[l]->bias;
  }
}

EncoderParams EncoderParams::zeros_like() const {
  EncoderParams z = *this;
  for (DenseLayer* l : chain(z)) {
    l->weight.setZero();
    l->bias.setZero();
  }
  return z;
}

double EncoderParams::squared_norm() const {
  double total = 0.0;
  for (const DenseLayer* l : chain(*this)) total += l->weight.squaredNorm() + l->bias.squaredNorm();
  return total;
}

bool operator==(const EncoderParams& a, const EncoderParams& b) {
  if (a.layer_dims != b.layer_dims || a.head_dims != b.head_dims || a.activation != b.activation)
    return false;
  auto la = chain(a);
  auto lb = chain(b);
  if (la.size() != lb.size()) return false;
  for (size_t l = 0; l < la.size(); ++l)
    if (la[l]->weight != lb[l]->weight || la[l]->bias != lb[l]->bias) return false;
  return true;
}

ForwardCache forward(const EncoderParams& params, const Eigen::MatrixXd& inputs) {
  if (inputs.cols() != params.input_dim())
    throw std::invalid_argument("encoder input has " + std::to_string(inputs.cols()) +
                                " columns, expected " + std::to_string(params.input_dim()));
  ForwardCache cache;
  const auto layers = chain(params);
  Eigen::MatrixXd h = inputs;
  for (size_t l = 0; l < layers.size(); ++l) {
    if (l > 0) h = activate(params.activation, cache.preacts.back());
    cache.inputs.push_back(h);
    cache.preacts.push_back(apply(*layers[l], h));
  }
  const Eigen::MatrixXd& z = cache.preacts.back();
  cache.norms = z.rowwise().norm();
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    if (!std::isfinite(cache.norms(i)))
      throw NumericalError("encoder produced a non-finite output for sample " + std::to_string(i));
    if (cache.norms(i) < 1e-12)
      throw NumericalError("degenerate encoder: output norm below 1e-12 for sample " +
                           std::to_string(i));
  }
  cache.embeddings = cache.norms.cwiseInverse().asDiagonal() * z;
  return cache;
}

Eigen::MatrixXd embed(const EncoderParams& params, const Eigen::MatrixXd& inputs) {
  return forward(params, inputs).embeddings;
}

Eigen::MatrixXd represent(const EncoderParams& params, const Eigen::MatrixXd& inputs) {
  if (params.head.empty()) return embed(params, inputs);
  if (inputs.cols() != params.input_dim())
    throw std::invalid_argument("encoder input has wrong width");
  Eigen::MatrixXd h = inputs;
  for (size_t l = 0; l < params.backbone.size(); ++l) {
    if (l > 0) h = activate(params.activation, h);
    h = apply(params.backbone[l], h);
  }
  return h;
}

EncoderParams backward(const EncoderParams& params, const ForwardCache& cache,
                       const Eigen::MatrixXd& grad_embeddings) {
  const auto layers = chain(params);
  if (cache.preacts.size() != layers.size())
    throw std::invalid_argument("backward: cache does not match parameters");
  if (grad_embeddings.rows() != cache.embeddings.rows() ||
      grad_embeddings.cols() != cache.embeddings.cols())
    throw std::invalid_argument("backward: gradient shape does not match embeddings");

  // d/dz of z/||z|| applied to g: (g - u (u.g)) / ||z||
  const Eigen::MatrixXd& u = cache.embeddings;
  const Eigen::VectorXd radial = (u.array() * grad_embeddings.array()).rowwise().sum();
  Eigen::MatrixXd delta = grad_embeddings - radial.asDiagonal() * u;
  delta = cache.norms.cwiseInverse().asDiagonal() * delta;

  EncoderParams grads = params.zeros_like();
  auto out = chain(grads);
  for (size_t l = layers.size(); l-- > 0;) {
    out[l]->weight = delta.transpose() * cache.inputs[l];
    out[l]->bias = delta.colwise().sum().transpose();
    if (l > 0) {
      const Eigen::MatrixXd back = delta * layers[l]->weight;
      delta = back.cwiseProduct(activation_grad(params.activation, cache.preacts[l - 1]));
    }
  }
  return grads;
}

namespace {
constexpr const char* kCheckpointMagic = "dcu-encoder-checkpoint";
constexpr int kCheckpointVersion = 1;

void write_dims(std::ostream& os, const char* key, const std::vector<int>& dims) {
  os << key << ' ' << dims.size();
  for (int d : dims) os << ' ' << d;
  os << '\n';
}

void write_layer(std::ostream& os, const DenseLayer& layer) {
  os << "dense " << layer.out_dim() << ' ' << layer.in_dim() << '\n';
  for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
    for (Eigen::Index c = 0; c < layer.weight.cols(); ++c)
      os << (c ? " " : "") << format_double(layer.weight(r, c));
    os << '\n';
  }
  os << "bias";
  for (Eigen::Index r = 0; r < layer.bias.size(); ++r) os << ' ' << format_double(layer.bias(r));
  os << '\n';
}

std::string expect_word(std::istream& is, const std::string& word) {
  std::string got;
  if (!(is >> got) || got != word)
    throw IoError("checkpoint: expected '" + word + "', found '" + got + "'");
  return got;
}

std::vector<int> read_dims(std::istream& is, const std::string& key) {
  expect_word(is, key);
  size_t count = 0;
  if (!(is >> count)) throw IoError("checkpoint: bad " + key + " count");
  std::vector<int> dims(count);
  for (auto& d : dims)
    if (!(is >> d)) throw IoError("checkpoint: bad " + key + " entry");
  return dims;
}

double read_double(std::istream& is) {
  std::string tok;
  if (!(is >> tok)) throw IoError("checkpoint: truncated value list");
  try {
    return parse_double(tok);
  } catch (const std::invalid_argument& e) {
    throw IoError(std::string("checkpoint: ") + e.what());
  }
}

DenseLayer read_layer(std::istream& is, int in, int out) {
  expect_word(is, "dense");
  int rows = 0, cols = 0;
  if (!(is >> rows >> cols) || rows != out || cols != in)
    throw IoError("checkpoint: dense layer shape mismatch");
  DenseLayer layer;
  layer.weight.resize(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) layer.weight(r, c) = read_double(is);
  expect_word(is, "bias");
  layer.bias.resize(rows);
  for (int r = 0; r < rows; ++r) layer.bias(r) = read_double(is);
  return layer;
}
}  // namespace

void save_checkpoint(const EncoderParams& params, std::ostream& os) {
  params.validate();
  os << kCheckpointMagic << " v" << kCheckpointVersion << '\n';
  os << "activation " << to_string(params.activation) << '\n';
  write_dims(os, "layer_dims", params.layer_dims);
  write_dims(os, "head_dims", params.head_dims);
  for (const auto& l : params.backbone) write_layer(os, l);
  for (const auto& l : params.head) write_layer(os, l);
}

void save_checkpoint(const EncoderParams& params, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  save_checkpoint(params, out);
  out.flush();
  if (!out) throw IoError("failed writing checkpoint " + path.string());
}

EncoderParams load_checkpoint(std::istream& is) {
  expect_word(is, kCheckpointMagic);
  std::string version;
  is >> version;
  if (version != "v" + std::to_string(kCheckpointVersion))
    throw IoError("checkpoint: unsupported version '" + version + "'");
  expect_word(is, "activation");
  std::string act;
  is >> act;
  EncoderParams p;
  try {
    p.activation = activation_from_string(act);
  } catch (const std::invalid_argument& e) {
    throw IoError(std::string("checkpoint: ") + e.what());
  }
  p.layer_dims = read_dims(is, "layer_dims");
  p.head_dims = read_dims(is, "head_dims");
  if (p.layer_dims.size() < 2) throw IoError("checkpoint: need at least two layer dims");
  if (!p.head_dims.empty() && p.head_dims.size() != 2) throw IoError("checkpoint: bad head dims");
  for (size_t l = 0; l + 1 < p.layer_dims.size(); ++l)
    p.backbone.push_back(read_layer(is, p.layer_dims[l], p.layer_dims[l + 1]));
  if (!p.head_dims.empty()) {
    p.head.push_back(read_layer(is, p.layer_dims.back(), p.head_dims[0]));
    p.head.push_back(read_layer(is, p.head_dims[0], p.head_dims[1]));
  }
  return p;
}

EncoderParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  return load_checkpoint(in);
}

}  // namespace dcu
