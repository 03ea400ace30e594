#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "retihemo/hemo.hpp"
#include "retihemo/vasc_graph.hpp"

namespace retihemo {

inline constexpr int kHemoDims = 6;
/// [Q, P, v, R, Re, WSS] in the units of the solution table.
using HemoVector = std::array<double, kHemoDims>;

HemoVector hemo_vector(const PixelState& s);

struct FeatureElement {
  GraphElementKind kind = GraphElementKind::Segment;
  HemoVector values{};
  double radius_cm = 0.0;  // mean radius for segments, node radius for points
};

struct FeatureSet {
  std::string subject_id;
  int label = 0;  // -1 or +1
  std::vector<FeatureElement> elements;
};

/// One element per segment (pixel mean), per bifurcation and per terminal.
FeatureSet summarize(const HemodynamicSolution& solution);
/// As above, first checking that every graph pixel has a solution value.
FeatureSet summarize(const HemodynamicSolution& solution, const CenterlineGraph& graph);

/// Per-dimension z-scoring with training statistics. Constant dimensions get
/// a unit scale.
struct Standardizer {
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;

  static Standardizer fit(const Eigen::MatrixXd& rows);
  Eigen::MatrixXd apply(const Eigen::MatrixXd& rows) const;
  Eigen::VectorXd apply(const Eigen::VectorXd& row) const;
};

struct KMeansOptions {
  int restarts = 50;
  int max_iterations = 300;
  std::uint64_t seed = 0;
};

struct KMeansResult {
  Eigen::MatrixXd centroids;  // k x p
  std::vector<int> assignment;
  double inertia = 0.0;
  std::vector<double> inertia_history;  // of the retained restart
};

/// Lloyd iterations from k-means++ seeds; best of `restarts` by inertia.
KMeansResult kmeans(const Eigen::MatrixXd& points, int k, const KMeansOptions& options);

struct Codebook {
  int k = 0;
  Standardizer standardizer;  // on the 6-dim hemodynamic vectors
  Eigen::MatrixXd codes;      // 2k x 6: rows [0, k) from label -1, [k, 2k) from +1

  int size() const { return static_cast<int>(codes.rows()); }
};

Codebook build_codebook(std::span<const FeatureSet> training, int k, const KMeansOptions& options);

/// Histogram of nearest codewords (ties -> lowest index).
Eigen::VectorXd encode(const FeatureSet& set, const Codebook& codebook);

struct LogRegModel {
  Eigen::VectorXd beta;
  double intercept = 0.0;
  double lambda = 0.0;

  double decision(const Eigen::VectorXd& x) const { return beta.dot(x) + intercept; }
};

struct LogRegOptions {
  double gradient_tolerance = 1e-8;
  int max_iterations = 200;
};

/// lambda * |beta|^2 + sum log(1 + exp(-y (beta.x + b))); intercept unpenalised.
double logreg_objective(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double lambda,
                        const Eigen::VectorXd& beta, double intercept);
/// Gradient w.r.t. (beta, intercept), intercept last.
Eigen::VectorXd logreg_gradient(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double lambda,
                                const Eigen::VectorXd& beta, double intercept);

/// Damped Newton from (`init_beta`, `init_intercept`); zero when omitted.
LogRegModel train_logreg(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double lambda,
                         const LogRegOptions& options = {}, const Eigen::VectorXd* init_beta = nullptr,
                         double init_intercept = 0.0);

/// Full classifier: codebook, standardisation of the encoded histogram and
/// logistic model.
struct BohfModel {
  Codebook codebook;
  Standardizer encoded;
  LogRegModel logreg;

  double score(const FeatureSet& set) const;
};

nlohmann::json to_json(const BohfModel& model);
BohfModel bohf_model_from_json(const nlohmann::json& j);

/// Trains a model with fixed (k, lambda) on `training`.
BohfModel train_bohf(std::span<const FeatureSet> training, int k, double lambda, const KMeansOptions& kmeans);

/// Rank-based (Mann-Whitney) area under the ROC curve, ties by midrank.
double auc(std::span<const double> scores, std::span<const int> labels);

struct LoocvOptions {
  std::vector<int> k_grid{2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15};
  std::vector<double> lambda_grid{1e-3, 1e-2, 1e-1, 1e0, 1e1, 1e2, 1e3, 1e4, 1e5};
  double validation_fraction = 0.25;
  std::uint64_t seed = 0;
  int kmeans_restarts = 50;
  int kmeans_max_iterations = 300;
  int jobs = 1;
};

struct FoldResult {
  std::string subject_id;
  int label = 0;
  double score = 0.0;
  int k = 0;
  double lambda = 0.0;
  double validation_accuracy = 0.0;
  BohfModel model;
};

struct LoocvResult {
  double auc = 0.0;
  double accuracy = 0.0;
  std::vector<FoldResult> folds;
};

/// Model selection on a stratified validation split, then refit on the whole
/// training set. Deterministic for a given `fold_seed`.
FoldResult fit_fold(std::span<const FeatureSet> training, const LoocvOptions& options, std::uint64_t fold_seed);

std::uint64_t fold_seed(std::uint64_t global_seed, std::size_t fold);

LoocvResult loocv_evaluate(std::span<const FeatureSet> subjects, const LoocvOptions& options);

/// Metrics report written by the CLI.
nlohmann::json to_json(const LoocvResult& result, const LoocvOptions& options);

}  // namespace retihemo
