#include "dcu/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <limits>
#include <stdexcept>
#include <tuple>

namespace dcu {

SimplexReport simplex_check(const Eigen::MatrixXd& mu, double tolerance) {
  SimplexReport r;
  r.n = static_cast<int>(mu.rows());
  r.dim = static_cast<int>(mu.cols());
  r.tolerance = tolerance;
  r.in_regime = r.n >= 2 && r.n <= r.dim + 1;
  if (r.n < 2) return r;
  r.expected_sq_distance = 2.0 * r.n / (r.n - 1);
  for (int i = 0; i < r.n; ++i)
    r.worst_norm_deviation = std::max(r.worst_norm_deviation, std::abs(mu.row(i).norm() - 1.0));
  r.sum_norm = mu.colwise().sum().norm();
  for (int i = 0; i < r.n; ++i)
    for (int j = i + 1; j < r.n; ++j)
      r.worst_pair_deviation =
          std::max(r.worst_pair_deviation,
                   std::abs((mu.row(i) - mu.row(j)).squaredNorm() - r.expected_sq_distance));
  return r;
}

namespace {

void project_to_ball(Eigen::MatrixXd& mu) {
  for (Eigen::Index i = 0; i < mu.rows(); ++i) {
    const double norm = mu.row(i).norm();
    if (norm > 1.0) mu.row(i) /= norm;
  }
}

}  // namespace

FreeCentroidResult optimize_free_centroids(const FreeCentroidOptions& o) {
  if (o.n < 2 || o.dim < 1) throw std::invalid_argument("free centroids: need n >= 2 and d >= 1");
  if (!(o.learning_rate > 0.0) || o.steps < 0)
    throw std::invalid_argument("free centroids: invalid step settings");
  std::mt19937_64 rng(o.seed);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd mu(o.n, o.dim);
  for (Eigen::Index i = 0; i < mu.rows(); ++i)
    for (Eigen::Index j = 0; j < mu.cols(); ++j) mu(i, j) = 0.3 * normal(rng);
  project_to_ball(mu);
  for (int s = 0; s < o.steps; ++s) {
    const LossReport r = decoupled_uniformity_loss(Centroids::free(mu), o.temperature);
    mu -= o.learning_rate * r.grad_mu;
    project_to_ball(mu);
  }
  FreeCentroidResult out;
  out.loss = decoupled_uniformity_loss(Centroids::free(mu), o.temperature).value;
  out.mu = std::move(mu);
  return out;
}

// ---------------------------------------------------------------- bounds

bool BoundReport::passed() const {
  return std::all_of(checks.begin(), checks.end(),
                     [](const BoundCheck& c) { return c.asymptotic || c.passed; });
}

const BoundCheck* BoundReport::find(const std::string& name) const {
  for (const auto& c : checks)
    if (c.name == name) return &c;
  return nullptr;
}

namespace {

BoundCheck make_check(std::string name, double lhs, double rhs, bool vacuous = false,
                      bool asymptotic = false, std::string note = {}) {
  BoundCheck c;
  c.name = std::move(name);
  c.lhs = lhs;
  c.rhs = rhs;
  c.vacuous = vacuous;
  c.asymptotic = asymptotic;
  c.note = std::move(note);
  c.slack = vacuous ? std::numeric_limits<double>::infinity() : rhs - lhs;
  c.passed = vacuous || c.slack >= -kBoundSlackTolerance;
  return c;
}

}  // namespace

BoundReport verify_bounds(const BoundInputs& in) {
  const int n = static_cast<int>(in.centroids.rows());
  if (n < 1) throw std::invalid_argument("bounds: no centroids");
  if (static_cast<int>(in.labels.size()) != n)
    throw std::invalid_argument("bounds: label count does not match centroid count");

  BoundReport r;
  r.n = n;
  const Centroids mu = Centroids::free(in.centroids);
  const auto mass = class_balanced_mass(in.labels);
  r.population_loss = population_uniformity_loss(in.centroids, mass, 1.0);
  r.empirical_loss = n >= 2 ? decoupled_uniformity_loss(mu, 1.0).value
                            : std::numeric_limits<double>::quiet_NaN();
  r.supervised_loss = supervised_decoupled_loss(mu, in.labels, 1.0);
  r.terms = variance_bound_terms(mu, in.labels);

  const double pop = r.population_loss;
  const double sup = r.supervised_loss;
  r.checks.push_back(make_check("chain.unif_le_sup", pop, sup));
  r.checks.push_back(make_check("chain.sup_le_unif_plus_var", sup, pop + r.terms.var_term));
  r.checks.push_back(make_check("chain.var_le_mean_distance", pop + r.terms.var_term,
                                pop + r.terms.mean_dist_term));

  r.eps_prime = in.weak_alignment;
  r.augmentation_diameter = in.augmentation_diameter;
  if (in.weak_alignment) {
    const bool infinite = in.augmentation_diameter.is_infinite();
    const double slack_term =
        infinite ? 0.0 : 8.0 * *in.augmentation_diameter.hops * *in.weak_alignment;
    r.checks.push_back(make_check("augmentation.lower", pop, sup));
    r.checks.push_back(make_check("augmentation.upper", sup, pop + slack_term, infinite, false,
                                  infinite ? "a class is disconnected in the augmentation graph"
                                           : "empirical eps' and diameter"));
  }

  r.union_diameter = in.union_diameter;
  r.beta = in.beta;
  r.eps = in.eps;
  if (in.kernel_centroids && in.union_diameter) {
    if (in.kernel_centroids->rows() != n)
      throw std::invalid_argument("bounds: kernel centroid count does not match");
    const double kernel = population_uniformity_loss(*in.kernel_centroids, mass, 1.0);
    r.kernel_loss = kernel;
    const bool infinite = in.union_diameter->is_infinite();
    const double eps_prime = in.weak_alignment.value_or(0.0);
    const double beta = in.beta.value_or(0.0);
    const double slack_term =
        infinite ? 0.0 : 4.0 * *in.union_diameter->hops * (2.0 * eps_prime + beta * in.eps);
    const char* note = "up to an unquantified O(n^-1/4) term";
    r.checks.push_back(make_check("kernel.lower", kernel, sup, false, true, note));
    r.checks.push_back(make_check("kernel.upper", sup, kernel + slack_term, infinite, true,
                                  infinite ? "a class is disconnected in the union graph" : note));
  }
  return r;
}

// ---------------------------------------------------------------- estimators

namespace {

Eigen::MatrixXd sample_sphere_law(int n, double concentration, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  Eigen::MatrixXd out(n, 3);
  for (int i = 0; i < n; ++i) {
    Eigen::Vector3d v(concentration + normal(rng), normal(rng), normal(rng));
    double norm = v.norm();
    while (norm < 1e-12) {
      v = Eigen::Vector3d(concentration + normal(rng), normal(rng), normal(rng));
      norm = v.norm();
    }
    out.row(i) = v.transpose() / norm;
  }
  return out;
}

double estimator_value(const Eigen::MatrixXd& mu, double t) {
  const Eigen::MatrixXd d2 = pairwise_sq_distances(mu);
  const auto n = mu.rows();
  double sum = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      if (i != j) sum += std::exp(-t * d2(i, j));
  return std::log(sum / static_cast<double>(n * (n - 1)));
}

}  // namespace

double sphere_uniformity_closed_form(double temperature) {
  // cos of the angle between two uniform points on S^2 is uniform on [-1, 1].
  return std::log(-std::expm1(-4.0 * temperature) / (4.0 * temperature));
}

std::pair<double, double> sphere_population_loss(double temperature, double concentration,
                                                 long pairs, std::uint64_t seed) {
  if (pairs < 2) throw std::invalid_argument("oracle needs at least 2 pairs");
  std::mt19937_64 rng(seed);
  double mean = 0.0, m2 = 0.0;
  constexpr int kChunk = 4096;
  long done = 0;
  while (done < pairs) {
    const int chunk = static_cast<int>(std::min<long>(kChunk, pairs - done));
    const Eigen::MatrixXd a = sample_sphere_law(chunk, concentration, rng);
    const Eigen::MatrixXd b = sample_sphere_law(chunk, concentration, rng);
    for (int i = 0; i < chunk; ++i) {
      const double h = std::exp(-temperature * (a.row(i) - b.row(i)).squaredNorm());
      ++done;
      const double delta = h - mean;
      mean += delta / static_cast<double>(done);
      m2 += delta * (h - mean);
    }
  }
  const double sd = std::sqrt(m2 / static_cast<double>(pairs - 1));
  return {std::log(mean), sd / (mean * std::sqrt(static_cast<double>(pairs)))};
}

BiasCurve estimator_bias_curve(std::span<const int> sizes, int repetitions, double temperature,
                               double concentration, long oracle_pairs, std::uint64_t seed) {
  if (sizes.size() < 2) throw std::invalid_argument("bias curve: need at least 2 sizes");
  if (repetitions < 1) throw std::invalid_argument("bias curve: repetitions must be >= 1");
  BiasCurve curve;
  std::tie(curve.oracle, curve.oracle_stderr) =
      sphere_population_loss(temperature, concentration, oracle_pairs, seed ^ 0x9e3779b97f4a7c15ULL);
  std::mt19937_64 rng(seed);
  std::vector<double> xs, ys;
  for (int n : sizes) {
    if (n < 2) throw std::invalid_argument("bias curve: sizes must be >= 2");
    double err = 0.0;
    for (int r = 0; r < repetitions; ++r)
      err += std::abs(estimator_value(sample_sphere_law(n, concentration, rng), temperature) -
                      curve.oracle);
    curve.points.push_back({n, err / repetitions});
    xs.push_back(n);
    ys.push_back(err / repetitions);
  }
  curve.slope = loglog_slope(xs, ys);
  return curve;
}

bool ConvergenceTable::non_increasing_up_to_one_inversion() const {
  int inversions = 0;
  for (size_t i = 1; i < points.size(); ++i)
    if (points[i].mean_error > points[i - 1].mean_error) ++inversions;
  return inversions <= 1;
}

ConvergenceTable estimator_convergence(const AtomInstance& inst, std::span<const int> sizes,
                                       const LambdaRule& lambda, int repetitions,
                                       std::uint64_t seed) {
  if (sizes.size() < 3) throw std::invalid_argument("estimator convergence: grid needs >= 3 sizes");
  if (inst.classes < 1 || inst.atoms_per_class < 1 || inst.dim < 1 || repetitions < 1)
    throw std::invalid_argument("estimator convergence: invalid instance");

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  const int atoms = inst.classes * inst.atoms_per_class;
  Eigen::MatrixXd atom(atoms, inst.dim);
  for (int a = 0; a < atoms; ++a) {
    for (int j = 0; j < inst.dim; ++j) atom(a, j) = normal(rng);
    atom.row(a).normalize();
  }
  Eigen::MatrixXd class_mean = Eigen::MatrixXd::Zero(inst.classes, inst.dim);
  for (int a = 0; a < atoms; ++a) class_mean.row(a / inst.atoms_per_class) += atom.row(a);
  class_mean /= inst.atoms_per_class;

  std::uniform_int_distribution<int> pick_class(0, inst.classes - 1);
  std::uniform_int_distribution<int> pick_atom(0, inst.atoms_per_class - 1);
  ConvergenceTable table;
  std::vector<double> xs, ys;
  for (int n : sizes) {
    if (n < 2) throw std::invalid_argument("estimator convergence: sizes must be >= 2");
    const double lam = lambda(n);
    double total = 0.0;
    for (int r = 0; r < repetitions; ++r) {
      std::vector<int> y(static_cast<size_t>(n));
      Eigen::MatrixXd f(n, inst.dim);
      for (int i = 0; i < n; ++i) {
        y[static_cast<size_t>(i)] = pick_class(rng);
        f.row(i) = atom.row(y[static_cast<size_t>(i)] * inst.atoms_per_class + pick_atom(rng));
      }
      Eigen::MatrixXd k(n, n);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          k(i, j) = y[static_cast<size_t>(i)] == y[static_cast<size_t>(j)] ? 1.0 : 0.0;
      const CentroidWeights w = centroid_weights(KernelMatrix(std::move(k)), lam);
      const Eigen::MatrixXd mu_hat = w.weights * f;
      double err = 0.0;
      for (int i = 0; i < n; ++i)
        err += (mu_hat.row(i) - class_mean.row(y[static_cast<size_t>(i)])).norm();
      total += err / n;
    }
    table.points.push_back({n, lam, total / repetitions});
    xs.push_back(n);
    ys.push_back(total / repetitions);
  }
  table.slope = loglog_slope(xs, ys);
  return table;
}

// ---------------------------------------------------------------- statistics

double loglog_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("slope: need >= 2 points");
  std::vector<double> lx, ly;
  for (size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0 && y[i] > 0.0)) throw std::invalid_argument("slope: values must be positive");
    lx.push_back(std::log(x[i]));
    ly.push_back(std::log(y[i]));
  }
  const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / lx.size();
  const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / ly.size();
  double sxy = 0.0, sxx = 0.0;
  for (size_t i = 0; i < lx.size(); ++i) {
    sxy += (lx[i] - mx) * (ly[i] - my);
    sxx += (lx[i] - mx) * (lx[i] - mx);
  }
  if (sxx == 0.0) throw std::invalid_argument("slope: x values are all equal");
  return sxy / sxx;
}

std::optional<double> pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("pearson: column lengths differ");
  if (x.size() < 2) return std::nullopt;
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx <= 0.0 || syy <= 0.0) return std::nullopt;
  return sxy / std::sqrt(sxx * syy);
}

namespace {

// Average ranks, ties share the mean of their positions.
std::vector<double> ranks(std::span<const double> v) {
  std::vector<size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return v[a] < v[b]; });
  std::vector<double> out(v.size());
  for (size_t i = 0; i < order.size();) {
    size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (size_t k = i; k <= j; ++k) out[order[k]] = rank;
    i = j + 1;
  }
  return out;
}

}  // namespace

std::optional<double> spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("spearman: column lengths differ");
  const auto rx = ranks(x);
  const auto ry = ranks(y);
  return pearson(rx, ry);
}

// ---------------------------------------------------------------- experiments

ExperimentResult train_and_probe(const ProbeSplit& split, const PriorEmbedding* prior,
                                 const TrainConfig& config, const EncoderParams& init,
                                 const ProbeOptions& probe) {
  if (!split.train.labeled() || !split.test.labeled())
    throw std::invalid_argument("probe needs labeled train and test splits");
  ExperimentResult out;
  out.training = train(split.train, prior, config, init);
  const Eigen::MatrixXd train_x =
      represent(out.training.params, split.train.encoder_inputs(config.bit_scale));
  const Eigen::MatrixXd test_x =
      represent(out.training.params, split.test.encoder_inputs(config.bit_scale));
  out.probe = linear_probe(train_x, split.train.labels, test_x, split.test.labels, probe);
  return out;
}

SweepReport quality_accuracy_sweep(const SweepSetup& setup, const SweepCallback& on_row) {
  if (setup.levels.size() < 5) throw std::invalid_argument("sweep: need at least 5 prior levels");
  if (!setup.train.kernel) throw std::invalid_argument("sweep: the training config needs a kernel");
  SweepReport report;
  std::vector<double> quality, eps, acc;
  for (const SweepLevel& level : setup.levels) {
    const PriorEmbedding prior =
        oracle_prior(setup.split.train, level.noise, setup.prior_seed, level.shuffled);
    const KernelMatrix k =
        build_kernel_matrix(prior.vectors, *setup.train.kernel, setup.train.threads);
    SweepRow row;
    row.level = level;
    row.kernel_quality = kernel_quality(k, setup.split.train.labels, setup.knn);
    row.epsilon_star = epsilon_star(k, setup.split.train.labels, setup.m);
    row.accuracy = train_and_probe(setup.split, &prior, setup.train, setup.init, setup.probe)
                       .probe.accuracy;
    quality.push_back(row.kernel_quality);
    eps.push_back(row.epsilon_star);
    acc.push_back(row.accuracy);
    report.rows.push_back(row);
    if (on_row) on_row(row);
  }
  report.pearson_quality_accuracy = pearson(quality, acc);
  report.spearman_eps_accuracy = spearman(eps, acc);
  return report;
}

}  // namespace dcu
