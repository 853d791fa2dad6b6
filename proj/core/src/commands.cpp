#include "dcu/commands.hpp"

#include "dcu/config.hpp"
#include "dcu/errors.hpp"
#include "dcu/eval.hpp"
#include "dcu/format.hpp"
#include "dcu/graphs.hpp"
#include "dcu/metrics.hpp"

#include "json.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <ostream>

namespace dcu {

namespace {

using nlohmann::ordered_json;
namespace fs = std::filesystem;

constexpr int kSchemaVersion = 1;

int guarded(std::ostream& err, const std::function<int()>& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const IoError& e) {
    err << "i/o error: " << e.what() << '\n';
    return kExitIo;
  } catch (const fs::filesystem_error& e) {
    err << "i/o error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::invalid_argument& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitNumerical;
  }
}

ExperimentConfig load(const CommandOptions& o) {
  ExperimentConfig c = load_config(o.config);
  if (o.threads) c.run.threads = *o.threads;
  if (o.eps) c.eval.eps = *o.eps;
  if (o.m) c.eval.m = *o.m;
  c.validate();
  return c;
}

void prepare_out_dir(const CommandOptions& o, const ExperimentConfig& c) {
  std::error_code ec;
  fs::create_directories(o.out_dir, ec);
  if (ec) throw IoError("cannot create " + o.out_dir.string() + ": " + ec.message());
  std::ofstream out(o.out_dir / "resolved_config.json");
  if (!out) throw IoError("cannot write " + (o.out_dir / "resolved_config.json").string());
  out << c.to_json();
}

void write_json(const fs::path& path, const ordered_json& j) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

void write_edges(const fs::path& path, const Graph& g) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  g.write_edge_list(out);
}

ordered_json number_or_null(double v) {
  return std::isfinite(v) ? ordered_json(v) : ordered_json(nullptr);
}

ordered_json diameter_json(const Diameter& d) {
  return d.is_infinite() ? ordered_json(nullptr) : ordered_json(*d.hops);
}

std::vector<int> labels_or_zero(const Dataset& ds) {
  return ds.labeled() ? ds.labels : std::vector<int>(static_cast<size_t>(ds.size()), 0);
}

ordered_json graph_json(const Graph& g, std::span<const int> labels) {
  const GraphReport r = class_connectivity(g, labels);
  ordered_json classes = ordered_json::array();
  for (const auto& [y, ok] : r.per_class_connected)
    classes.push_back({{"class", y}, {"connected", ok}, {"components", r.component_counts.at(y)}});
  return {{"edges", g.edge_count()},
          {"all_classes_connected", r.all_connected()},
          {"max_intra_class_diameter", diameter_json(r.max_intra_class_diameter)},
          {"classes", classes}};
}

void require_cap(const ExperimentConfig& c, const Dataset& ds) {
  if (ds.size() > c.eval.graph_max_samples)
    throw ConfigError("eval.graph_max_samples: the training split has " +
                      std::to_string(ds.size()) + " samples, above the cap of " +
                      std::to_string(c.eval.graph_max_samples));
}

EncoderParams load_encoder(const CommandOptions& o, const Dataset& train) {
  if (!o.checkpoint) throw ConfigError("--checkpoint: required for this command");
  EncoderParams p = load_checkpoint(*o.checkpoint);
  if (p.input_dim() != train.input_dim())
    throw ConfigError("--checkpoint: encoder input width " + std::to_string(p.input_dim()) +
                      " does not match the dataset's " + std::to_string(train.input_dim()));
  return p;
}

ordered_json probe_json(const ProbeResult& r) {
  ordered_json per_class = ordered_json::object();
  for (const auto& [y, acc] : r.per_class_accuracy) per_class[std::to_string(y)] = acc;
  ordered_json confusion = ordered_json::array();
  for (Eigen::Index i = 0; i < r.confusion.rows(); ++i) {
    ordered_json row = ordered_json::array();
    for (Eigen::Index j = 0; j < r.confusion.cols(); ++j) row.push_back(r.confusion(i, j));
    confusion.push_back(row);
  }
  return {{"schema_version", kSchemaVersion},
          {"accuracy", r.accuracy},
          {"chosen_penalty", r.chosen_penalty},
          {"cv_accuracy", r.cv_accuracy},
          {"per_class_accuracy", per_class},
          {"classes", r.classes},
          {"confusion", confusion}};
}

ProbeResult run_probe(const ExperimentConfig& c, const EncoderParams& params,
                      const ProbeSplit& split) {
  if (!split.train.labeled() || split.test.size() == 0 || !split.test.labeled())
    throw ConfigError("dataset: the probe needs labeled train and test splits");
  const Eigen::MatrixXd train_x = represent(params, split.train.encoder_inputs(c.dataset.bit_scale));
  const Eigen::MatrixXd test_x = represent(params, split.test.encoder_inputs(c.dataset.bit_scale));
  return linear_probe(train_x, split.train.labels, test_x, split.test.labels, c.probe_options());
}

}  // namespace

int cmd_train(const CommandOptions& o, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const ExperimentConfig c = load(o);
    prepare_out_dir(o, c);
    const ProbeSplit split = build_split(c);
    const auto prior = build_prior(c, split.train);
    const TrainConfig tc = c.train_config();
    MetricsWriter metrics(o.out_dir / "metrics.csv", c.run_id(), c.run.wall_clock);
    const TrainResult result =
        train(split.train, prior ? &*prior : nullptr, tc, c.initial_encoder(split.train.input_dim()),
              [&](const EpochMetrics& m) {
                metrics.write(m.epoch, "loss", m.loss);
                if (std::isfinite(m.alignment)) {
                  metrics.write(m.epoch, "alignment", m.alignment);
                  metrics.write(m.epoch, "weak_alignment", m.weak_alignment);
                }
                metrics.write(m.epoch, "grad_norm", m.grad_norm);
                metrics.write(m.epoch, "learning_rate", m.learning_rate);
                metrics.flush();
                out << "epoch " << m.epoch << " loss " << format_double(m.loss) << '\n';
              });
    save_checkpoint(result.params, o.out_dir / "checkpoint.txt");
    if (result.aborted) {
      err << "numerical abort: " << result.abort_reason << " (last good checkpoint saved)\n";
      return static_cast<int>(kExitNumerical);
    }
    if (c.eval.probe && split.train.labeled() && split.test.size() > 0) {
      const ProbeResult probe = run_probe(c, result.params, split);
      write_json(o.out_dir / "probe.json", probe_json(probe));
      out << "probe accuracy " << format_double(probe.accuracy) << '\n';
    }
    return static_cast<int>(kExitOk);
  });
}

int cmd_grad_check(const CommandOptions& o, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const ExperimentConfig c = load(o);
    const ProbeSplit split = build_split(c);
    const auto prior = build_prior(c, split.train);
    GradCheckOptions opts;
    opts.step = c.eval.grad_check_step;
    opts.tolerance = c.eval.grad_check_tolerance;
    opts.floor = c.eval.grad_check_floor;
    opts.flip_sign = c.eval.flip_gradient_sign;
    const GradCheckReport r =
        finite_difference_check(c.initial_encoder(split.train.input_dim()), split.train,
                                prior ? &*prior : nullptr, c.train_config(), opts);
    out << "max_relative_error " << format_double(r.max_relative_error) << " parameter "
        << r.worst_parameter << " of " << r.parameters_checked << " tolerance "
        << format_double(r.tolerance) << (r.passed ? " pass" : " FAIL") << '\n';
    return static_cast<int>(r.passed ? kExitOk : kExitNumerical);
  });
}

int cmd_graph_analyze(const CommandOptions& o, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const ExperimentConfig c = load(o);
    prepare_out_dir(o, c);
    const Dataset train = build_split(c).train;
    require_cap(c, train);
    const auto labels = labels_or_zero(train);

    const Graph ga = augmentation_graph(train, c.augmentation);
    write_edges(o.out_dir / "augmentation_edges.txt", ga);
    ordered_json report = {{"schema_version", kSchemaVersion},
                           {"n", train.size()},
                           {"eps", c.eval.eps},
                           {"m", c.eval.m},
                           {"augmentation", graph_json(ga, labels)}};
    out << "augmentation graph: " << ga.edge_count() << " edges, all classes connected: "
        << (report["augmentation"]["all_classes_connected"].get<bool>() ? "yes" : "no") << '\n';

    if (const auto prior = build_prior(c, train)) {
      const KernelMatrix k = build_kernel_matrix(prior->vectors, c.kernel_spec(), c.run.threads);
      const Graph gk = epsilon_kernel_graph(k, c.eval.eps);
      const Graph gu = union_graph(ga, gk);
      write_edges(o.out_dir / "kernel_edges.txt", gk);
      write_edges(o.out_dir / "union_edges.txt", gu);
      report["kernel"] = graph_json(gk, labels);
      report["union"] = graph_json(gu, labels);
      try {
        report["epsilon_star"] = epsilon_star(k, labels, c.eval.m);
      } catch (const std::invalid_argument& e) {
        report["epsilon_star"] = nullptr;
        report["epsilon_star_note"] = e.what();
      }
      const int knn = std::min(c.eval.knn, train.size() - 1);
      report["knn"] = knn;
      report["kernel_quality"] = kernel_quality(k, labels, knn);
      out << "union graph: " << gu.edge_count() << " edges, all classes connected: "
          << (report["union"]["all_classes_connected"].get<bool>() ? "yes" : "no") << '\n';
      if (!report["epsilon_star"].is_null())
        out << "epsilon_star " << format_double(report["epsilon_star"].get<double>()) << '\n';
      out << "kernel_quality " << format_double(report["kernel_quality"].get<double>()) << '\n';
    }
    write_json(o.out_dir / "graph_report.json", report);
    return static_cast<int>(kExitOk);
  });
}

int cmd_bounds(const CommandOptions& o, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const ExperimentConfig c = load(o);
    prepare_out_dir(o, c);
    const Dataset train = build_split(c).train;
    require_cap(c, train);
    if (!train.labeled()) throw ConfigError("dataset: bounds need labels");
    const EncoderParams params = load_encoder(o, train);

    const int n = train.size();
    const int views = c.eval.bound_views;
    const ViewBatch vb = sample_views(train, c.augmentation, views, c.eval.bound_seed);
    const EmbeddingBatch batch =
        EmbeddingBatch::from_rows(embed(params, vb.encoder_inputs(c.dataset.bit_scale)), n, views);

    BoundInputs in;
    in.centroids = view_average_centroids(batch).mu;
    in.labels = train.labels;
    if (views >= 2) in.weak_alignment = weak_alignment_epsilon(batch);
    const Graph ga = augmentation_graph(train, c.augmentation);
    in.augmentation_diameter = intra_class_diameter(ga, train.labels);
    double lambda = 0.0;
    if (const auto prior = build_prior(c, train)) {
      const KernelMatrix k = build_kernel_matrix(prior->vectors, c.kernel_spec(), c.run.threads);
      lambda = c.kernel.lambda.value_or(default_lambda(n));
      in.kernel_centroids = kernel_centroids(batch, centroid_weights(k, lambda)).mu;
      in.union_diameter =
          intra_class_diameter(union_graph(ga, epsilon_kernel_graph(k, c.eval.eps)), train.labels);
      in.beta = beta_n(k, lambda);
      in.eps = c.eval.eps;
    }
    const BoundReport r = verify_bounds(in);

    ordered_json checks = ordered_json::array();
    bool chain_ok = true;
    for (const BoundCheck& b : r.checks) {
      checks.push_back({{"name", b.name},
                        {"lhs", b.lhs},
                        {"rhs", b.rhs},
                        {"slack", number_or_null(b.slack)},
                        {"passed", b.passed},
                        {"vacuous", b.vacuous},
                        {"asymptotic", b.asymptotic},
                        {"note", b.note}});
      if (b.name.rfind("chain.", 0) == 0 && !b.passed) chain_ok = false;
      out << std::left << std::setw(30) << b.name << (b.passed ? "pass" : "FAIL") << "  slack "
          << (b.vacuous ? std::string("vacuous") : format_double(b.slack))
          << (b.asymptotic ? "  (asymptotic)" : "") << '\n';
    }
    ordered_json report = {
        {"schema_version", kSchemaVersion},
        {"inputs",
         {{"n", r.n},
          {"views", views},
          {"temperature", 1.0},
          {"eps_prime", r.eps_prime ? ordered_json(*r.eps_prime) : ordered_json(nullptr)},
          {"augmentation_diameter", diameter_json(r.augmentation_diameter)},
          {"union_diameter", r.union_diameter ? diameter_json(*r.union_diameter) : nullptr},
          {"beta_n", r.beta ? ordered_json(*r.beta) : ordered_json(nullptr)},
          {"lambda", lambda},
          {"eps", r.eps}}},
        {"population_loss", r.population_loss},
        {"empirical_loss", number_or_null(r.empirical_loss)},
        {"supervised_loss", r.supervised_loss},
        {"kernel_loss", r.kernel_loss ? ordered_json(*r.kernel_loss) : ordered_json(nullptr)},
        {"var_term", r.terms.var_term},
        {"mean_distance_term", r.terms.mean_dist_term},
        {"worst_class", r.terms.worst_class},
        {"checks", checks}};
    write_json(o.out_dir / "bounds.json", report);
    return static_cast<int>(chain_ok ? kExitOk : kExitNumerical);
  });
}

int cmd_probe(const CommandOptions& o, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const ExperimentConfig c = load(o);
    prepare_out_dir(o, c);
    const ProbeSplit split = build_split(c);
    const EncoderParams params = load_encoder(o, split.train);
    const ProbeResult r = run_probe(c, params, split);
    write_json(o.out_dir / "probe.json", probe_json(r));
    out << "probe accuracy " << format_double(r.accuracy) << " penalty "
        << format_double(r.chosen_penalty) << '\n';
    return static_cast<int>(kExitOk);
  });
}

int cmd_sweep(const CommandOptions& o, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const ExperimentConfig c = load(o);
    prepare_out_dir(o, c);
    SweepSetup s;
    s.split = build_split(c);
    if (!s.split.train.labeled() || s.split.test.size() == 0)
      throw ConfigError("dataset: the sweep needs labeled train and test splits");
    s.train = c.train_config();
    s.train.kernel = c.kernel_spec();
    s.init = c.initial_encoder(s.split.train.input_dim());
    s.probe = c.probe_options();
    for (double noise : c.eval.sweep_noise) s.levels.push_back({noise, false});
    if (c.eval.sweep_shuffled) s.levels.push_back({0.0, true});
    if (s.levels.size() < 5)
      throw ConfigError("eval.sweep_noise: the sweep needs at least 5 levels");
    s.prior_seed = c.prior.seed;
    s.knn = c.eval.knn;
    s.m = c.eval.m;

    MetricsWriter metrics(o.out_dir / "metrics.csv", c.run_id(), c.run.wall_clock);
    long step = 0;
    const SweepReport r = quality_accuracy_sweep(s, [&](const SweepRow& row) {
      metrics.write(step, "prior_noise", row.level.noise);
      metrics.write(step, "prior_shuffled", row.level.shuffled ? 1.0 : 0.0);
      metrics.write(step, "kernel_quality", row.kernel_quality);
      metrics.write(step, "epsilon_star", row.epsilon_star);
      metrics.write(step, "probe_accuracy", row.accuracy);
      metrics.flush();
      ++step;
      out << "noise " << format_double(row.level.noise) << (row.level.shuffled ? " shuffled" : "")
          << " quality " << format_double(row.kernel_quality) << " eps* "
          << format_double(row.epsilon_star) << " accuracy " << format_double(row.accuracy)
          << '\n';
    });

    ordered_json rows = ordered_json::array();
    for (const SweepRow& row : r.rows)
      rows.push_back({{"noise", row.level.noise},
                      {"shuffled", row.level.shuffled},
                      {"kernel_quality", row.kernel_quality},
                      {"epsilon_star", row.epsilon_star},
                      {"accuracy", row.accuracy}});
    auto opt = [](const std::optional<double>& v) {
      return v ? ordered_json(*v) : ordered_json(nullptr);
    };
    write_json(o.out_dir / "sweep.json", {{"schema_version", kSchemaVersion},
                                          {"rows", rows},
                                          {"pearson_quality_accuracy", opt(r.pearson_quality_accuracy)},
                                          {"spearman_eps_accuracy", opt(r.spearman_eps_accuracy)}});
    out << "pearson(quality, accuracy) "
        << (r.pearson_quality_accuracy ? format_double(*r.pearson_quality_accuracy) : "undefined")
        << '\n'
        << "spearman(eps*, accuracy) "
        << (r.spearman_eps_accuracy ? format_double(*r.spearman_eps_accuracy) : "undefined")
        << '\n';
    return static_cast<int>(kExitOk);
  });
}

}  // namespace dcu
