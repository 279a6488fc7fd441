#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <json.hpp>

#include "semloop/corpus.hpp"

namespace semloop {

/// Probabilities over the corpus class set.
class ClassDistribution {
 public:
  ClassDistribution() = default;
  explicit ClassDistribution(std::vector<double> probabilities);

  std::size_t size() const { return p_.size(); }
  double operator[](std::size_t c) const { return p_[c]; }
  std::span<const double> values() const { return p_; }

  /// Most probable class; exact ties go to the smallest index.
  ClassId argmax() const;

 private:
  std::vector<double> p_;
};

/// Contract for the base learner the interaction loop trains and explains.
class ProbabilisticClassifier {
 public:
  virtual ~ProbabilisticClassifier() = default;

  virtual std::size_t num_classes() const = 0;
  virtual std::size_t num_features() const = 0;
  virtual ClassDistribution predict_proba(const BagOfWords& x) const = 0;

  ClassId predict(const BagOfWords& x) const { return predict_proba(x).argmax(); }
};

enum class Penalty { l2, l1 };
enum class FeatureScaling { counts, l2_normalized };

struct LearnerParams {
  double regularization = 1e-3;
  Penalty penalty = Penalty::l2;
  FeatureScaling scaling = FeatureScaling::l2_normalized;
  std::size_t max_epochs = 300;
  double tolerance = 1e-6;  // relative objective change
};

struct TrainSet {
  std::vector<BagOfWords> rows;
  std::vector<ClassId> labels;
  std::size_t num_features = 0;
  std::size_t num_classes = 0;

  void add(BagOfWords row, ClassId label) {
    rows.push_back(std::move(row));
    labels.push_back(label);
  }
  std::size_t size() const { return rows.size(); }
  void validate() const;
};

/// Scaled sparse feature row for one bag of words.
std::vector<std::pair<WordId, double>> scale_features(const BagOfWords& x, FeatureScaling scaling);

/// Design matrix (rows x features) under the given scaling.
Eigen::SparseMatrix<double, Eigen::RowMajor> design_matrix(const TrainSet& train,
                                                           FeatureScaling scaling);

/// Mean cross-entropy of a softmax model plus the smooth penalty term
/// (L2 only; the L1 term is handled by the proximal step). Fills the
/// gradients when non-null.
double softmax_objective(const Eigen::SparseMatrix<double, Eigen::RowMajor>& X,
                         std::span<const ClassId> labels, const Eigen::MatrixXd& weights,
                         const Eigen::VectorXd& bias, double l2, Eigen::MatrixXd* grad_weights,
                         Eigen::VectorXd* grad_bias);

struct FitTrace {
  std::vector<double> objective;  // full objective after each epoch
  bool converged = false;
};

/// Multinomial logistic regression. weights are classes x features.
class SoftmaxRegression final : public ProbabilisticClassifier {
 public:
  SoftmaxRegression(Eigen::MatrixXd weights, Eigen::VectorXd bias, FeatureScaling scaling);

  std::size_t num_classes() const override { return static_cast<std::size_t>(weights_.rows()); }
  std::size_t num_features() const override { return static_cast<std::size_t>(weights_.cols()); }
  ClassDistribution predict_proba(const BagOfWords& x) const override;

  const Eigen::MatrixXd& weights() const { return weights_; }
  const Eigen::VectorXd& bias() const { return bias_; }
  FeatureScaling scaling() const { return scaling_; }

  nlohmann::json to_json(const std::vector<std::string>& classes, std::uint64_t vocabulary_hash) const;
  static SoftmaxRegression from_json(const nlohmann::json& j);

 private:
  Eigen::MatrixXd weights_;
  Eigen::VectorXd bias_;
  FeatureScaling scaling_;
};

struct LinearFit {
  Eigen::MatrixXd weights;  // classes x features
  Eigen::VectorXd bias;
};

/// Full-batch (proximal) gradient descent with backtracking line search
/// from a zero start; deterministic.
LinearFit fit_softmax_matrix(const Eigen::SparseMatrix<double, Eigen::RowMajor>& X,
                             std::span<const ClassId> labels, std::size_t num_classes,
                             const LearnerParams& params, FitTrace* trace = nullptr);

SoftmaxRegression fit_softmax(const TrainSet& train, const LearnerParams& params,
                              FitTrace* trace = nullptr);

/// Row-wise argmax predictions of a linear fit (ties to the smaller class).
std::vector<ClassId> predict_rows(const LinearFit& fit,
                                  const Eigen::SparseMatrix<double, Eigen::RowMajor>& X);

/// Softmax of a score vector (max-shifted).
std::vector<double> softmax(std::span<const double> scores);

}  // namespace semloop
