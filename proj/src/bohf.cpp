#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "retihemo/bohf.hpp"
#include "retihemo/error.hpp"
#include "retihemo/io.hpp"
#include "retihemo/parallel.hpp"
#include "retihemo/random.hpp"

namespace retihemo {

using nlohmann::json;

namespace {

double softplus(double t) { return std::max(t, 0.0) + std::log1p(std::exp(-std::abs(t))); }

double sigmoid(double t) {
  if (t >= 0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

// Index of the nearest row of `centroids`; ties go to the lowest index.
int nearest(const Eigen::MatrixXd& centroids, const Eigen::RowVectorXd& point, double* dist = nullptr) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Eigen::Index c = 0; c < centroids.rows(); ++c) {
    const double d = (centroids.row(c) - point).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(c);
    }
  }
  if (dist) *dist = best_d;
  return best;
}

KMeansResult lloyd(const Eigen::MatrixXd& points, int k, int max_iterations, std::mt19937_64& rng) {
  const Eigen::Index n = points.rows();
  KMeansResult res;
  res.centroids.resize(k, points.cols());

  // k-means++ seeding
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  res.centroids.row(0) = points.row(static_cast<Eigen::Index>(uniform_index(rng, n)));
  for (int c = 1; c < k; ++c) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], (points.row(i) - res.centroids.row(c - 1)).squaredNorm());
      total += d2[i];
    }
    Eigen::Index pick = n - 1;
    if (total > 0.0) {
      double target = uniform01(rng) * total;
      for (Eigen::Index i = 0; i < n; ++i) {
        target -= d2[i];
        if (target < 0.0) {
          pick = i;
          break;
        }
      }
    } else {
      pick = static_cast<Eigen::Index>(uniform_index(rng, n));
    }
    res.centroids.row(c) = points.row(pick);
  }

  res.assignment.assign(n, -1);
  std::vector<double> dist(n);
  for (int it = 0; it < max_iterations; ++it) {
    bool changed = false;
    double inertia = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const int a = nearest(res.centroids, points.row(i), &dist[i]);
      changed = changed || a != res.assignment[i];
      res.assignment[i] = a;
      inertia += dist[i];
    }
    res.inertia = inertia;
    res.inertia_history.push_back(inertia);
    if (!changed) break;

    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, points.cols());
    std::vector<int> counts(k, 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.row(res.assignment[i]) += points.row(i);
      ++counts[res.assignment[i]];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[c] > 0) {
        res.centroids.row(c) = sums.row(c) / counts[c];
        continue;
      }
      // Empty cluster: reseat on the point farthest from its centroid.
      const auto far = std::max_element(dist.begin(), dist.end()) - dist.begin();
      res.centroids.row(c) = points.row(far);
      dist[far] = 0.0;
    }
  }
  return res;
}

Eigen::MatrixXd stack_elements(std::span<const FeatureSet> sets, int label) {
  std::size_t n = 0;
  for (const auto& s : sets)
    if (label == 0 || s.label == label) n += s.elements.size();
  Eigen::MatrixXd m(static_cast<Eigen::Index>(n), kHemoDims);
  Eigen::Index row = 0;
  for (const auto& s : sets) {
    if (label != 0 && s.label != label) continue;
    for (const auto& e : s.elements) {
      for (int d = 0; d < kHemoDims; ++d) m(row, d) = e.values[d];
      ++row;
    }
  }
  return m;
}

json matrix_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(round_sig(m(r, c)));
    rows.push_back(row);
  }
  return rows;
}

json vector_json(const Eigen::VectorXd& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(round_sig(v[i]));
  return arr;
}

Eigen::VectorXd vector_from(const json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

Eigen::MatrixXd matrix_from(const json& j) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(j.size()), j.empty() ? 0 : static_cast<Eigen::Index>(j[0].size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = j[r][c].get<double>();
  return m;
}

struct EncodedSet {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
};

EncodedSet encode_all(std::span<const FeatureSet> sets, const Codebook& codebook) {
  EncodedSet out;
  out.X.resize(static_cast<Eigen::Index>(sets.size()), codebook.size());
  out.y.resize(static_cast<Eigen::Index>(sets.size()));
  for (std::size_t i = 0; i < sets.size(); ++i) {
    out.X.row(static_cast<Eigen::Index>(i)) = encode(sets[i], codebook).transpose();
    out.y[static_cast<Eigen::Index>(i)] = sets[i].label;
  }
  return out;
}

void require_both_labels(std::span<const FeatureSet> sets, ErrorCode code) {
  bool neg = false, pos = false;
  for (const auto& s : sets) {
    if (s.label != -1 && s.label != 1) throw Error(ErrorCode::InvalidArgument, "labels must be -1 or +1");
    neg = neg || s.label == -1;
    pos = pos || s.label == 1;
  }
  if (!neg || !pos) throw Error(code, "both classes are required");
}

}  // namespace

Standardizer Standardizer::fit(const Eigen::MatrixXd& rows) {
  if (rows.rows() == 0) throw Error(ErrorCode::InsufficientData, "cannot standardise an empty set");
  Standardizer s;
  s.mean = rows.colwise().mean().transpose();
  s.scale.resize(rows.cols());
  for (Eigen::Index c = 0; c < rows.cols(); ++c) {
    const double var = rows.rows() > 1
                           ? (rows.col(c).array() - s.mean[c]).square().sum() / static_cast<double>(rows.rows() - 1)
                           : 0.0;
    const double sd = std::sqrt(var);
    s.scale[c] = sd > 1e-12 * std::max(1.0, std::abs(s.mean[c])) ? sd : 1.0;
  }
  return s;
}

Eigen::MatrixXd Standardizer::apply(const Eigen::MatrixXd& rows) const {
  return (rows.rowwise() - mean.transpose()).array().rowwise() / scale.transpose().array();
}

Eigen::VectorXd Standardizer::apply(const Eigen::VectorXd& row) const {
  return (row - mean).cwiseQuotient(scale);
}

KMeansResult kmeans(const Eigen::MatrixXd& points, int k, const KMeansOptions& options) {
  if (k < 1) throw Error(ErrorCode::InvalidArgument, "k must be positive");
  if (points.rows() < k) throw Error(ErrorCode::InsufficientData, "fewer points than clusters");
  std::mt19937_64 rng(options.seed);
  KMeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (int r = 0; r < std::max(1, options.restarts); ++r) {
    KMeansResult run = lloyd(points, k, std::max(1, options.max_iterations), rng);
    if (run.inertia < best.inertia) best = std::move(run);
  }
  return best;
}

Codebook build_codebook(std::span<const FeatureSet> training, int k, const KMeansOptions& options) {
  require_both_labels(training, ErrorCode::InsufficientData);
  Codebook cb;
  cb.k = k;
  const Eigen::MatrixXd all = stack_elements(training, 0);
  cb.standardizer = Standardizer::fit(all);
  cb.codes.resize(2 * k, kHemoDims);
  int block = 0;
  for (int label : {-1, 1}) {
    const Eigen::MatrixXd pts = cb.standardizer.apply(stack_elements(training, label));
    if (pts.rows() < k) throw Error(ErrorCode::InsufficientData, "class has fewer elements than k");
    KMeansOptions opts = options;
    opts.seed = derive_seed(options.seed, static_cast<std::uint64_t>(label + 2));
    cb.codes.middleRows(block * k, k) = kmeans(pts, k, opts).centroids;
    ++block;
  }
  return cb;
}

Eigen::VectorXd encode(const FeatureSet& set, const Codebook& codebook) {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(codebook.size());
  Eigen::VectorXd raw(kHemoDims);
  for (const auto& e : set.elements) {
    for (int d = 0; d < kHemoDims; ++d) raw[d] = e.values[d];
    const Eigen::VectorXd z = codebook.standardizer.apply(raw);
    x[nearest(codebook.codes, z.transpose())] += 1.0;
  }
  return x;
}

double logreg_objective(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double lambda,
                        const Eigen::VectorXd& beta, double intercept) {
  const Eigen::VectorXd margin = (X * beta).array() + intercept;
  double loss = lambda * beta.squaredNorm();
  for (Eigen::Index i = 0; i < X.rows(); ++i) loss += softplus(-y[i] * margin[i]);
  return loss;
}

Eigen::VectorXd logreg_gradient(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double lambda,
                                const Eigen::VectorXd& beta, double intercept) {
  const Eigen::Index d = X.cols();
  const Eigen::VectorXd margin = (X * beta).array() + intercept;
  Eigen::VectorXd w(X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) w[i] = -y[i] * sigmoid(-y[i] * margin[i]);
  Eigen::VectorXd g(d + 1);
  g.head(d) = 2.0 * lambda * beta + X.transpose() * w;
  g[d] = w.sum();
  return g;
}

LogRegModel train_logreg(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double lambda,
                         const LogRegOptions& options, const Eigen::VectorXd* init_beta,
                         double init_intercept) {
  if (!(lambda >= 0.0)) throw Error(ErrorCode::InvalidRegularization, "lambda must be non-negative");
  if (X.rows() != y.size()) throw Error(ErrorCode::InvalidArgument, "design matrix and labels differ in size");
  bool neg = false, pos = false;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    neg = neg || y[i] < 0;
    pos = pos || y[i] > 0;
  }
  if (!neg || !pos) throw Error(ErrorCode::InsufficientData, "both labels are required");

  const Eigen::Index d = X.cols();
  Eigen::VectorXd z = Eigen::VectorXd::Zero(d + 1);
  if (init_beta) z.head(d) = *init_beta;
  z[d] = init_intercept;

  Eigen::MatrixXd Xa(X.rows(), d + 1);
  Xa << X, Eigen::VectorXd::Ones(X.rows());
  auto objective = [&](const Eigen::VectorXd& v) { return logreg_objective(X, y, lambda, v.head(d), v[d]); };

  double f = objective(z);
  for (int it = 0; it < options.max_iterations; ++it) {
    const Eigen::VectorXd g = logreg_gradient(X, y, lambda, z.head(d), z[d]);
    if (g.norm() <= options.gradient_tolerance) break;
    const Eigen::VectorXd margin = Xa * z;
    Eigen::VectorXd curvature(X.rows());
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      const double p = sigmoid(margin[i]);
      curvature[i] = p * (1.0 - p);
    }
    Eigen::MatrixXd H = Xa.transpose() * curvature.asDiagonal() * Xa;
    H.diagonal().head(d).array() += 2.0 * lambda;
    H.diagonal().array() += 1e-12 * (1.0 + H.diagonal().cwiseAbs().maxCoeff());
    const Eigen::VectorXd step = H.ldlt().solve(-g);

    // Backtracking (Armijo) line search.
    double t = 1.0;
    const double slope = g.dot(step);
    Eigen::VectorXd candidate = z + step;
    double fc = objective(candidate);
    while (fc > f + 1e-4 * t * slope && t > 1e-12) {
      t *= 0.5;
      candidate = z + t * step;
      fc = objective(candidate);
    }
    if (!(fc <= f)) break;
    z = candidate;
    f = fc;
  }

  LogRegModel model;
  model.beta = z.head(d);
  model.intercept = z[d];
  model.lambda = lambda;
  return model;
}

double BohfModel::score(const FeatureSet& set) const {
  return logreg.decision(encoded.apply(encode(set, codebook)));
}

BohfModel train_bohf(std::span<const FeatureSet> training, int k, double lambda, const KMeansOptions& kmeans) {
  BohfModel model;
  model.codebook = build_codebook(training, k, kmeans);
  const EncodedSet enc = encode_all(training, model.codebook);
  model.encoded = Standardizer::fit(enc.X);
  model.logreg = train_logreg(model.encoded.apply(enc.X), enc.y, lambda);
  return model;
}

json to_json(const BohfModel& model) {
  return {{"format", "retihemo-bohf-model"},
          {"version", 1},
          {"k", model.codebook.k},
          {"feature_mean", vector_json(model.codebook.standardizer.mean)},
          {"feature_scale", vector_json(model.codebook.standardizer.scale)},
          {"codes", matrix_json(model.codebook.codes)},
          {"encoded_mean", vector_json(model.encoded.mean)},
          {"encoded_scale", vector_json(model.encoded.scale)},
          {"beta", vector_json(model.logreg.beta)},
          {"intercept", round_sig(model.logreg.intercept)},
          {"lambda", round_sig(model.logreg.lambda)}};
}

BohfModel bohf_model_from_json(const json& j) {
  try {
    if (j.value("format", "") != "retihemo-bohf-model") throw Error(ErrorCode::ParseError, "not a BoHF model");
    BohfModel m;
    m.codebook.k = j.at("k").get<int>();
    m.codebook.standardizer.mean = vector_from(j.at("feature_mean"));
    m.codebook.standardizer.scale = vector_from(j.at("feature_scale"));
    m.codebook.codes = matrix_from(j.at("codes"));
    m.encoded.mean = vector_from(j.at("encoded_mean"));
    m.encoded.scale = vector_from(j.at("encoded_scale"));
    m.logreg.beta = vector_from(j.at("beta"));
    m.logreg.intercept = j.at("intercept").get<double>();
    m.logreg.lambda = j.at("lambda").get<double>();
    if (m.codebook.codes.rows() != 2 * m.codebook.k || m.logreg.beta.size() != 2 * m.codebook.k)
      throw Error(ErrorCode::ParseError, "inconsistent BoHF model dimensions");
    return m;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("BoHF model: ") + e.what());
  }
}

double auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw Error(ErrorCode::InvalidArgument, "scores and labels differ in size");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  std::vector<double> rank(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double mid = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) rank[order[t]] = mid;
    i = j + 1;
  }
  double pos = 0, neg = 0, rank_sum = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] > 0) {
      ++pos;
      rank_sum += rank[i];
    } else {
      ++neg;
    }
  }
  if (pos == 0 || neg == 0) throw Error(ErrorCode::InsufficientData, "AUC needs both classes");
  return (rank_sum - pos * (pos + 1) / 2.0) / (pos * neg);
}

std::uint64_t fold_seed(std::uint64_t global_seed, std::size_t fold) {
  return derive_seed(global_seed, 0x10000ULL + fold);
}

FoldResult fit_fold(std::span<const FeatureSet> training, const LoocvOptions& options, std::uint64_t seed) {
  require_both_labels(training, ErrorCode::FoldError);
  if (options.k_grid.empty() || options.lambda_grid.empty())
    throw Error(ErrorCode::InvalidArgument, "empty hyperparameter grid");

  // Stratified validation split.
  std::mt19937_64 rng(seed);
  std::vector<FeatureSet> inner, validation;
  for (int label : {-1, 1}) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < training.size(); ++i)
      if (training[i].label == label) idx.push_back(i);
    shuffle(idx, rng);
    std::size_t n_val = static_cast<std::size_t>(std::lround(options.validation_fraction * idx.size()));
    n_val = idx.size() < 2 ? 0 : std::clamp<std::size_t>(n_val, 1, idx.size() - 1);
    std::sort(idx.begin(), idx.begin() + n_val);
    std::sort(idx.begin() + n_val, idx.end());
    for (std::size_t i = 0; i < idx.size(); ++i) (i < n_val ? validation : inner).push_back(training[idx[i]]);
  }
  if (validation.empty()) throw Error(ErrorCode::FoldError, "training set too small for a validation split");

  KMeansOptions km;
  km.restarts = options.kmeans_restarts;
  km.max_iterations = options.kmeans_max_iterations;

  struct Candidate {
    int k = 0;
    double lambda = 0;
    double accuracy = -1;
    double log_loss = std::numeric_limits<double>::infinity();
  } best;
  for (int k : options.k_grid) {
    km.seed = derive_seed(seed, static_cast<std::uint64_t>(k));
    Codebook cb;
    try {
      cb = build_codebook(inner, k, km);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::InsufficientData) continue;
      throw;
    }
    const EncodedSet tr = encode_all(inner, cb);
    const EncodedSet va = encode_all(validation, cb);
    const Standardizer st = Standardizer::fit(tr.X);
    const Eigen::MatrixXd Xtr = st.apply(tr.X);
    const Eigen::MatrixXd Xva = st.apply(va.X);
    for (double lambda : options.lambda_grid) {
      const LogRegModel m = train_logreg(Xtr, tr.y, lambda);
      int correct = 0;
      double loss = 0.0;
      for (Eigen::Index i = 0; i < Xva.rows(); ++i) {
        const double f = m.decision(Xva.row(i).transpose());
        correct += (f > 0 ? 1 : -1) == static_cast<int>(va.y[i]);
        loss += softplus(-va.y[i] * f);
      }
      const double acc = static_cast<double>(correct) / static_cast<double>(Xva.rows());
      loss /= static_cast<double>(Xva.rows());
      if (acc > best.accuracy || (acc == best.accuracy && loss < best.log_loss)) best = {k, lambda, acc, loss};
    }
  }
  if (best.k == 0) throw Error(ErrorCode::FoldError, "no k in the grid is feasible for this fold");

  FoldResult out;
  out.k = best.k;
  out.lambda = best.lambda;
  out.validation_accuracy = best.accuracy;
  km.seed = derive_seed(seed, 0xF17ULL);
  out.model = train_bohf(training, best.k, best.lambda, km);
  return out;
}

LoocvResult loocv_evaluate(std::span<const FeatureSet> subjects, const LoocvOptions& options) {
  int neg = 0, pos = 0;
  for (const auto& s : subjects) {
    neg += s.label == -1;
    pos += s.label == 1;
  }
  if (neg < 2 || pos < 2) throw Error(ErrorCode::FoldError, "at least two subjects per class are required");

  const std::size_t n = subjects.size();
  LoocvResult result;
  result.folds.resize(n);
  parallel_for(n, options.jobs, [&](std::size_t i) {
    std::vector<FeatureSet> training;
    training.reserve(n - 1);
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) training.push_back(subjects[j]);
    FoldResult fold = fit_fold(training, options, fold_seed(options.seed, i));
    fold.subject_id = subjects[i].subject_id;
    fold.label = subjects[i].label;
    fold.score = fold.model.score(subjects[i]);
    result.folds[i] = std::move(fold);
  });

  std::vector<double> scores;
  std::vector<int> labels;
  int correct = 0;
  for (const auto& f : result.folds) {
    scores.push_back(f.score);
    labels.push_back(f.label);
    correct += (f.score > 0 ? 1 : -1) == f.label;
  }
  result.auc = auc(scores, labels);
  result.accuracy = static_cast<double>(correct) / static_cast<double>(n);
  return result;
}

json to_json(const LoocvResult& result, const LoocvOptions& options) {
  json folds = json::array();
  for (const auto& f : result.folds) {
    folds.push_back({{"subject", f.subject_id},
                     {"label", f.label},
                     {"score", round_sig(f.score)},
                     {"k", f.k},
                     {"lambda", round_sig(f.lambda)},
                     {"validation_accuracy", round_sig(f.validation_accuracy)}});
  }
  json lambdas = json::array();
  for (double l : options.lambda_grid) lambdas.push_back(round_sig(l));
  return {{"auc", round_sig(result.auc)},
          {"accuracy", round_sig(result.accuracy)},
          {"n_subjects", result.folds.size()},
          {"seed", options.seed},
          {"k_grid", options.k_grid},
          {"lambda_grid", lambdas},
          {"validation_fraction", round_sig(options.validation_fraction)},
          {"kmeans_restarts", options.kmeans_restarts},
          {"folds", folds}};
}

}  // namespace retihemo
