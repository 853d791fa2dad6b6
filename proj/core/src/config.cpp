#include "dcu/config.hpp"

#include "dcu/errors.hpp"
#include "dcu/format.hpp"

#include "json.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace dcu {

namespace {

using FlatConfig = std::map<std::string, std::string>;

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b == std::string::npos) continue;
    out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

// Typed access to "section.key" strings; remembers what was consumed so that
// leftovers can be reported as unknown keys.
class Fields {
 public:
  explicit Fields(FlatConfig values) : values_(std::move(values)) {}

  const std::string* raw(const std::string& key) {
    const auto it = values_.find(key);
    if (it == values_.end()) return nullptr;
    used_.insert(key);
    return &it->second;
  }

  std::string text(const std::string& key, std::string fallback) {
    const auto* v = raw(key);
    return v ? *v : fallback;
  }

  double real(const std::string& key, double fallback) {
    const auto* v = raw(key);
    if (!v) return fallback;
    try {
      return parse_double(*v);
    } catch (const std::exception&) {
      throw ConfigError(key + ": expected a number, got '" + *v + "'");
    }
  }

  long long integer(const std::string& key, long long fallback) {
    const auto* v = raw(key);
    if (!v) return fallback;
    try {
      return parse_int(*v);
    } catch (const std::exception&) {
      throw ConfigError(key + ": expected an integer, got '" + *v + "'");
    }
  }

  int small_int(const std::string& key, int fallback) {
    const long long v = integer(key, fallback);
    if (v < -1'000'000'000LL || v > 1'000'000'000LL) throw ConfigError(key + ": out of range");
    return static_cast<int>(v);
  }

  std::uint64_t seed(const std::string& key, std::uint64_t fallback) {
    const long long v = integer(key, static_cast<long long>(fallback));
    if (v < 0) throw ConfigError(key + ": seeds must be non-negative");
    return static_cast<std::uint64_t>(v);
  }

  bool flag(const std::string& key, bool fallback) {
    const auto* v = raw(key);
    if (!v) return fallback;
    if (*v == "true" || *v == "1" || *v == "yes" || *v == "on") return true;
    if (*v == "false" || *v == "0" || *v == "no" || *v == "off") return false;
    throw ConfigError(key + ": expected true or false, got '" + *v + "'");
  }

  std::vector<int> int_list(const std::string& key, std::vector<int> fallback) {
    const auto* v = raw(key);
    if (!v) return fallback;
    std::vector<int> out;
    for (const auto& item : split_list(*v)) {
      try {
        out.push_back(static_cast<int>(parse_int(item)));
      } catch (const std::exception&) {
        throw ConfigError(key + ": expected a list of integers, got '" + *v + "'");
      }
    }
    return out;
  }

  std::vector<double> real_list(const std::string& key, std::vector<double> fallback) {
    const auto* v = raw(key);
    if (!v) return fallback;
    std::vector<double> out;
    for (const auto& item : split_list(*v)) {
      try {
        out.push_back(parse_double(item));
      } catch (const std::exception&) {
        throw ConfigError(key + ": expected a list of numbers, got '" + *v + "'");
      }
    }
    return out;
  }

  template <typename Enum, typename Parse>
  Enum choice(const std::string& key, Enum fallback, Parse parse) {
    const auto* v = raw(key);
    if (!v) return fallback;
    try {
      return parse(*v);
    } catch (const std::exception& e) {
      throw ConfigError(key + ": " + e.what());
    }
  }

  void reject_unknown() const {
    for (const auto& [key, value] : values_)
      if (!used_.count(key)) throw ConfigError(key + ": unknown key");
  }

 private:
  FlatConfig values_;
  std::set<std::string> used_;
};

const std::set<std::string> kSections{"run",    "dataset", "augmentation", "prior",
                                      "kernel", "encoder", "train",        "eval"};

ExperimentConfig resolve(FlatConfig flat) {
  for (const auto& [key, value] : flat) {
    const auto section = key.substr(0, key.find('.'));
    if (!kSections.count(section)) throw ConfigError(section + ": unknown section");
  }
  Fields f(std::move(flat));
  ExperimentConfig c;

  c.run.name = f.text("run.name", c.run.name);
  c.run.threads = f.small_int("run.threads", c.run.threads);
  c.run.wall_clock = f.flag("run.wall_clock", c.run.wall_clock);

  auto& d = c.dataset;
  d.generator = f.text("dataset.generator", d.generator);
  d.classes = f.small_int("dataset.classes", d.classes);
  d.per_class = f.small_int("dataset.per_class", d.per_class);
  d.test_per_class = f.small_int("dataset.test_per_class", d.test_per_class);
  d.input_dim = f.small_int("dataset.input_dim", d.input_dim);
  d.latent_dim = f.small_int("dataset.latent_dim", d.latent_dim);
  d.separation = f.real("dataset.separation", d.separation);
  d.seed = f.seed("dataset.seed", d.seed);
  d.randbits = f.small_int("dataset.randbits", d.randbits);
  d.bit_scale = f.real("dataset.bit_scale", d.bit_scale);
  d.bit_seed = f.seed("dataset.bit_seed", d.bit_seed);
  d.path = f.text("dataset.path", d.path);
  d.test_path = f.text("dataset.test_path", d.test_path);

  auto& a = c.augmentation;
  a.kind = f.choice("augmentation.kind", a.kind, augmentation_kind_from_string);
  a.radius = f.real("augmentation.radius", a.radius);

  auto& p = c.prior;
  p.kind = f.text("prior.kind", p.kind);
  p.noise = f.real("prior.noise", p.noise);
  p.shuffled = f.flag("prior.shuffled", p.shuffled);
  p.seed = f.seed("prior.seed", p.seed);
  p.path = f.text("prior.path", p.path);
  p.standardize = f.flag("prior.standardize", p.standardize);

  auto& k = c.kernel;
  k.kind = f.choice("kernel.kind", k.kind, kernel_kind_from_string);
  k.sigma = f.real("kernel.sigma", k.sigma);
  if (const auto* lam = f.raw("kernel.lambda"); lam && *lam != "auto" && !lam->empty()) {
    try {
      k.lambda = parse_double(*lam);
    } catch (const std::exception&) {
      throw ConfigError("kernel.lambda: expected 'auto' or a number, got '" + *lam + "'");
    }
  }

  auto& e = c.encoder;
  e.hidden = f.int_list("encoder.hidden", e.hidden);
  e.out_dim = f.small_int("encoder.out_dim", e.out_dim);
  e.activation = f.choice("encoder.activation", e.activation, activation_from_string);
  e.head = f.int_list("encoder.head", e.head);
  e.init_seed = f.seed("encoder.init_seed", e.init_seed);
  e.init_gain = f.real("encoder.init_gain", e.init_gain);

  auto& t = c.train;
  t.batch_size = f.small_int("train.batch_size", t.batch_size);
  t.views = f.small_int("train.views", t.views);
  t.temperature = f.real("train.temperature", t.temperature);
  t.learning_rate = f.real("train.learning_rate", t.learning_rate);
  t.schedule = f.choice("train.schedule", t.schedule, schedule_from_string);
  t.momentum = f.real("train.momentum", t.momentum);
  t.epochs = f.small_int("train.epochs", t.epochs);
  t.seed = f.seed("train.seed", t.seed);

  auto& v = c.eval;
  v.probe = f.flag("eval.probe", v.probe);
  v.probe_seed = f.seed("eval.probe_seed", v.probe_seed);
  v.eps = f.real("eval.eps", v.eps);
  v.m = f.small_int("eval.m", v.m);
  v.knn = f.small_int("eval.knn", v.knn);
  v.bound_views = f.small_int("eval.bound_views", v.bound_views);
  v.bound_seed = f.seed("eval.bound_seed", v.bound_seed);
  v.sweep_noise = f.real_list("eval.sweep_noise", v.sweep_noise);
  v.sweep_shuffled = f.flag("eval.sweep_shuffled", v.sweep_shuffled);
  v.grad_check_tolerance = f.real("eval.grad_check_tolerance", v.grad_check_tolerance);
  v.grad_check_step = f.real("eval.grad_check_step", v.grad_check_step);
  v.grad_check_floor = f.real("eval.grad_check_floor", v.grad_check_floor);
  v.flip_gradient_sign = f.flag("eval.flip_gradient_sign", v.flip_gradient_sign);
  v.graph_max_samples = f.small_int("eval.graph_max_samples", v.graph_max_samples);

  f.reject_unknown();
  c.validate();
  return c;
}

void require(bool ok, const std::string& field, const std::string& what) {
  if (!ok) throw ConfigError(field + ": " + what);
}

bool finite_nonneg(double x) { return std::isfinite(x) && x >= 0.0; }

}  // namespace

void ExperimentConfig::validate() const {
  require(run.threads >= 1, "run.threads", "must be >= 1");

  const auto& d = dataset;
  require(d.generator == "gaussian_mixture" || d.generator == "file", "dataset.generator",
          "expected gaussian_mixture or file, got '" + d.generator + "'");
  if (d.generator == "gaussian_mixture") {
    require(d.classes >= 1, "dataset.classes", "must be >= 1");
    require(d.per_class >= 1, "dataset.per_class", "must be >= 1");
    require(d.test_per_class >= 0, "dataset.test_per_class", "must be >= 0");
    require(d.input_dim >= d.classes, "dataset.input_dim", "must be >= dataset.classes");
    require(d.latent_dim == 0 || (d.latent_dim >= d.classes && d.latent_dim <= d.input_dim),
            "dataset.latent_dim", "must be 0 or lie in [dataset.classes, dataset.input_dim]");
    require(finite_nonneg(d.separation), "dataset.separation", "must be finite and >= 0");
  } else {
    require(!d.path.empty(), "dataset.path", "required for the file generator");
  }
  require(d.randbits >= 0 && d.randbits <= 30, "dataset.randbits", "must be in [0, 30]");
  require(finite_nonneg(d.bit_scale), "dataset.bit_scale", "must be finite and >= 0");

  require(finite_nonneg(augmentation.radius), "augmentation.radius", "must be finite and >= 0");

  require(prior.kind == "none" || prior.kind == "oracle" || prior.kind == "clean" ||
              prior.kind == "file",
          "prior.kind", "expected none, oracle, clean or file, got '" + prior.kind + "'");
  require(finite_nonneg(prior.noise), "prior.noise", "must be finite and >= 0");
  if (prior.kind == "file") require(!prior.path.empty(), "prior.path", "required for kind file");

  require(std::isfinite(kernel.sigma) && kernel.sigma > 0.0, "kernel.sigma", "must be positive");
  if (kernel.lambda) require(finite_nonneg(*kernel.lambda), "kernel.lambda", "must be >= 0");

  for (int h : encoder.hidden) require(h >= 1, "encoder.hidden", "widths must be >= 1");
  require(std::isfinite(encoder.init_gain) && encoder.init_gain > 0.0, "encoder.init_gain",
          "must be positive");
  require(encoder.out_dim >= 1, "encoder.out_dim", "must be >= 1");
  require(encoder.head.empty() || encoder.head.size() == 2, "encoder.head",
          "expected two widths or none");
  for (int h : encoder.head) require(h >= 1, "encoder.head", "widths must be >= 1");

  require(train.batch_size >= 2, "train.batch_size", "must be >= 2");
  require(train.views >= 1, "train.views", "must be >= 1");
  require(std::isfinite(train.temperature) && train.temperature > 0.0, "train.temperature",
          "must be positive");
  require(finite_nonneg(train.learning_rate), "train.learning_rate", "must be finite and >= 0");
  require(train.momentum >= 0.0 && train.momentum < 1.0, "train.momentum", "must be in [0, 1)");
  require(train.epochs >= 0, "train.epochs", "must be >= 0");

  require(finite_nonneg(eval.eps), "eval.eps", "must be finite and >= 0");
  require(eval.m >= 1, "eval.m", "must be >= 1");
  require(eval.knn >= 1, "eval.knn", "must be >= 1");
  require(eval.bound_views >= 1, "eval.bound_views", "must be >= 1");
  for (double s : eval.sweep_noise)
    require(finite_nonneg(s), "eval.sweep_noise", "levels must be finite and >= 0");
  require(finite_nonneg(eval.grad_check_tolerance), "eval.grad_check_tolerance", "must be >= 0");
  require(std::isfinite(eval.grad_check_step) && eval.grad_check_step > 0.0,
          "eval.grad_check_step", "must be positive");
  require(std::isfinite(eval.grad_check_floor) && eval.grad_check_floor > 0.0,
          "eval.grad_check_floor", "must be positive");
  require(eval.graph_max_samples >= 2, "eval.graph_max_samples", "must be >= 2");
}

TrainConfig ExperimentConfig::train_config() const {
  TrainConfig t;
  t.batch_size = train.batch_size;
  t.views = train.views;
  t.temperature = train.temperature;
  t.lambda = kernel.lambda;
  t.learning_rate = train.learning_rate;
  t.schedule = train.schedule;
  t.momentum = train.momentum;
  t.epochs = train.epochs;
  t.seed = train.seed;
  if (uses_kernel()) t.kernel = kernel_spec();
  t.augmentation = augmentation;
  t.bit_scale = dataset.bit_scale;
  t.threads = run.threads;
  return t;
}

EncoderParams ExperimentConfig::initial_encoder(int input_dim) const {
  std::vector<int> dims{input_dim};
  dims.insert(dims.end(), encoder.hidden.begin(), encoder.hidden.end());
  dims.push_back(encoder.out_dim);
  return EncoderParams::init(dims, encoder.activation, encoder.head, encoder.init_seed,
                             encoder.init_gain);
}

ProbeOptions ExperimentConfig::probe_options() const {
  ProbeOptions o;
  o.seed = eval.probe_seed;
  return o;
}

std::string ExperimentConfig::to_json() const {
  using nlohmann::ordered_json;
  ordered_json j;
  j["run"] = {{"name", run.name}, {"threads", run.threads}, {"wall_clock", run.wall_clock}};
  j["dataset"] = {{"generator", dataset.generator},
                  {"classes", dataset.classes},
                  {"per_class", dataset.per_class},
                  {"test_per_class", dataset.test_per_class},
                  {"input_dim", dataset.input_dim},
                  {"latent_dim", dataset.latent_dim},
                  {"separation", dataset.separation},
                  {"seed", dataset.seed},
                  {"randbits", dataset.randbits},
                  {"bit_scale", dataset.bit_scale},
                  {"bit_seed", dataset.bit_seed},
                  {"path", dataset.path},
                  {"test_path", dataset.test_path}};
  j["augmentation"] = {{"kind", to_string(augmentation.kind)}, {"radius", augmentation.radius}};
  j["prior"] = {{"kind", prior.kind},   {"noise", prior.noise}, {"shuffled", prior.shuffled},
                {"seed", prior.seed},   {"path", prior.path},   {"standardize", prior.standardize}};
  j["kernel"] = {{"kind", to_string(kernel.kind)}, {"sigma", kernel.sigma}};
  if (kernel.lambda)
    j["kernel"]["lambda"] = *kernel.lambda;
  else
    j["kernel"]["lambda"] = "auto";
  j["encoder"] = {{"hidden", encoder.hidden},
                  {"out_dim", encoder.out_dim},
                  {"activation", to_string(encoder.activation)},
                  {"head", encoder.head},
                  {"init_seed", encoder.init_seed},
                  {"init_gain", encoder.init_gain}};
  j["train"] = {{"batch_size", train.batch_size},
                {"views", train.views},
                {"temperature", train.temperature},
                {"learning_rate", train.learning_rate},
                {"schedule", to_string(train.schedule)},
                {"momentum", train.momentum},
                {"epochs", train.epochs},
                {"seed", train.seed}};
  j["eval"] = {{"probe", eval.probe},
               {"probe_seed", eval.probe_seed},
               {"eps", eval.eps},
               {"m", eval.m},
               {"knn", eval.knn},
               {"bound_views", eval.bound_views},
               {"bound_seed", eval.bound_seed},
               {"sweep_noise", eval.sweep_noise},
               {"sweep_shuffled", eval.sweep_shuffled},
               {"grad_check_tolerance", eval.grad_check_tolerance},
               {"grad_check_step", eval.grad_check_step},
               {"grad_check_floor", eval.grad_check_floor},
               {"flip_gradient_sign", eval.flip_gradient_sign},
               {"graph_max_samples", eval.graph_max_samples}};
  return j.dump(2) + "\n";
}

std::string ExperimentConfig::run_id() const {
  // FNV-1a, 64 bit.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : to_json()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

ExperimentConfig parse_ini_config(const std::string& text) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  FlatConfig flat;
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty())
      throw ConfigError(section + ": key outside any section");
    for (const auto& [key, value] : body) flat[section + "." + key] = value.data();
  }
  return resolve(std::move(flat));
}

ExperimentConfig parse_json_config(const std::string& text) {
  using nlohmann::json;
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (!root.is_object()) throw ConfigError("config: top level must be an object of sections");
  auto scalar = [](const std::string& key, const json& v) -> std::string {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    if (v.is_number_integer() || v.is_number_unsigned()) return v.dump();
    if (v.is_number_float()) return format_double(v.get<double>());
    if (v.is_null()) return "";
    throw ConfigError(key + ": unsupported value type");
  };
  FlatConfig flat;
  for (const auto& [section, body] : root.items()) {
    if (!body.is_object()) throw ConfigError(section + ": expected a section object");
    for (const auto& [key, value] : body.items()) {
      const std::string name = section + "." + key;
      if (value.is_array()) {
        std::string joined;
        for (const auto& item : value) {
          if (!joined.empty()) joined += ',';
          joined += scalar(name, item);
        }
        flat[name] = joined;
      } else {
        flat[name] = scalar(name, value);
      }
    }
  }
  return resolve(std::move(flat));
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return path.extension() == ".json" ? parse_json_config(text.str())
                                     : parse_ini_config(text.str());
}

ProbeSplit build_split(const ExperimentConfig& config) {
  const auto& d = config.dataset;
  ProbeSplit split;
  if (d.generator == "file") {
    split.train = load_dataset(d.path);
    split.test = d.test_path.empty() ? split.train : load_dataset(d.test_path);
  } else {
    split.train = make_gaussian_mixture(d.classes, d.per_class, d.input_dim, d.separation, d.seed,
                                        d.latent_dim);
    // The test split uses an independent stream; class means are seed-free.
    if (d.test_per_class > 0)
      split.test = make_gaussian_mixture(d.classes, d.test_per_class, d.input_dim, d.separation,
                                         d.seed + 0x5bd1e995ULL, d.latent_dim);
  }
  if (d.randbits > 0) {
    split.train = make_randbits(split.train, d.randbits, d.bit_seed);
    if (split.test.size() > 0) split.test = make_randbits(split.test, d.randbits, d.bit_seed + 1);
  }
  return split;
}

std::optional<PriorEmbedding> build_prior(const ExperimentConfig& config, const Dataset& train) {
  const auto& p = config.prior;
  std::optional<PriorEmbedding> prior;
  if (p.kind == "none") return prior;
  if (p.kind == "oracle") {
    if (!train.labeled()) throw ConfigError("prior.kind: oracle priors need a labeled dataset");
    prior = oracle_prior(train, p.noise, p.seed, p.shuffled);
  } else if (p.kind == "clean") {
    prior = clean_feature_prior(train);
  } else {
    prior = load_prior(p.path);
    if (prior->size() != train.size())
      throw ConfigError("prior.path: " + std::to_string(prior->size()) + " rows but the dataset has " +
                        std::to_string(train.size()) + " samples");
  }
  if (p.standardize) standardize(*prior);
  return prior;
}

}  // namespace dcu
