#include "semloop/learner.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "semloop/error.hpp"

namespace semloop {

ClassDistribution::ClassDistribution(std::vector<double> probabilities) : p_(std::move(probabilities)) {
  double total = 0.0;
  for (double v : p_) {
    if (!(v >= 0.0)) throw Error(ErrorCode::InvalidArgument, "negative or NaN class probability");
    total += v;
  }
  if (p_.empty() || std::abs(total - 1.0) > 1e-9)
    throw Error(ErrorCode::InvalidArgument, "class probabilities do not sum to one");
}

ClassId ClassDistribution::argmax() const {
  std::size_t best = 0;
  for (std::size_t c = 1; c < p_.size(); ++c) {
    if (p_[c] > p_[best]) best = c;
  }
  return static_cast<ClassId>(best);
}

std::vector<double> softmax(std::span<const double> scores) {
  const double top = *std::max_element(scores.begin(), scores.end());
  std::vector<double> out(scores.size());
  double total = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    out[i] = std::exp(scores[i] - top);
    total += out[i];
  }
  for (double& v : out) v /= total;
  return out;
}

void TrainSet::validate() const {
  if (rows.size() != labels.size()) throw Error(ErrorCode::LengthMismatch, "rows and labels differ");
  std::set<ClassId> present;
  for (ClassId y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= num_classes)
      throw Error(ErrorCode::InvalidArgument, "label outside the class set");
    present.insert(y);
  }
  if (present.size() < 2)
    throw Error(ErrorCode::SingleClassTrainSet, "training set spans fewer than 2 classes");
  for (const auto& row : rows) {
    for (const auto& [w, c] : row) {
      if (w < 0 || static_cast<std::size_t>(w) >= num_features)
        throw Error(ErrorCode::DimensionMismatch, "feature id outside the vocabulary");
    }
  }
}

std::vector<std::pair<WordId, double>> scale_features(const BagOfWords& x, FeatureScaling scaling) {
  std::vector<std::pair<WordId, double>> out;
  out.reserve(x.size());
  double norm = 0.0;
  for (const auto& [w, c] : x) {
    out.emplace_back(w, static_cast<double>(c));
    norm += static_cast<double>(c) * c;
  }
  if (scaling == FeatureScaling::l2_normalized && norm > 0.0) {
    norm = std::sqrt(norm);
    for (auto& e : out) e.second /= norm;
  }
  return out;
}

Eigen::SparseMatrix<double, Eigen::RowMajor> design_matrix(const TrainSet& train,
                                                           FeatureScaling scaling) {
  std::vector<Eigen::Triplet<double>> triplets;
  for (std::size_t i = 0; i < train.rows.size(); ++i) {
    for (const auto& [w, v] : scale_features(train.rows[i], scaling))
      triplets.emplace_back(static_cast<int>(i), w, v);
  }
  Eigen::SparseMatrix<double, Eigen::RowMajor> X(static_cast<Eigen::Index>(train.rows.size()),
                                                 static_cast<Eigen::Index>(train.num_features));
  X.setFromTriplets(triplets.begin(), triplets.end());
  return X;
}

double softmax_objective(const Eigen::SparseMatrix<double, Eigen::RowMajor>& X,
                         std::span<const ClassId> labels, const Eigen::MatrixXd& weights,
                         const Eigen::VectorXd& bias, double l2, Eigen::MatrixXd* grad_weights,
                         Eigen::VectorXd* grad_bias) {
  const auto n = X.rows();
  Eigen::MatrixXd scores = X * weights.transpose();  // n x C
  scores.rowwise() += bias.transpose();
  double loss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double top = scores.row(i).maxCoeff();
    auto row = scores.row(i).array() - top;
    const double lse = std::log(row.exp().sum());
    loss += lse - row(labels[static_cast<std::size_t>(i)]);
    if (grad_weights) scores.row(i) = (row - lse).exp().matrix();  // probabilities
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  loss *= inv_n;
  loss += 0.5 * l2 * weights.squaredNorm();
  if (grad_weights) {
    for (Eigen::Index i = 0; i < n; ++i) scores(i, labels[static_cast<std::size_t>(i)]) -= 1.0;
    scores *= inv_n;
    *grad_weights = (X.transpose() * scores).transpose();
    *grad_weights += l2 * weights;
    if (grad_bias) *grad_bias = scores.colwise().sum().transpose();
  }
  return loss;
}

SoftmaxRegression::SoftmaxRegression(Eigen::MatrixXd weights, Eigen::VectorXd bias,
                                     FeatureScaling scaling)
    : weights_(std::move(weights)), bias_(std::move(bias)), scaling_(scaling) {
  if (bias_.size() != weights_.rows())
    throw Error(ErrorCode::DimensionMismatch, "bias length differs from class count");
}

ClassDistribution SoftmaxRegression::predict_proba(const BagOfWords& x) const {
  std::vector<double> scores(bias_.data(), bias_.data() + bias_.size());
  for (const auto& [w, v] : scale_features(x, scaling_)) {
    if (w < 0 || w >= weights_.cols())
      throw Error(ErrorCode::DimensionMismatch, "feature id outside the model vocabulary");
    for (std::size_t c = 0; c < scores.size(); ++c)
      scores[c] += weights_(static_cast<Eigen::Index>(c), w) * v;
  }
  return ClassDistribution(softmax(scores));
}

namespace {

const char* scaling_name(FeatureScaling s) {
  return s == FeatureScaling::counts ? "counts" : "l2_normalized";
}

}  // namespace

nlohmann::json SoftmaxRegression::to_json(const std::vector<std::string>& classes,
                                          std::uint64_t vocabulary_hash) const {
  nlohmann::ordered_json j;
  j["format"] = "semloop.softmax";
  j["version"] = 1;
  j["classes"] = classes;
  j["vocabulary_hash"] = vocabulary_hash;
  j["scaling"] = scaling_name(scaling_);
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index c = 0; c < weights_.rows(); ++c) {
    std::vector<double> row(static_cast<std::size_t>(weights_.cols()));
    for (Eigen::Index w = 0; w < weights_.cols(); ++w) row[static_cast<std::size_t>(w)] = weights_(c, w);
    rows.push_back(std::move(row));
  }
  j["weights"] = std::move(rows);
  j["bias"] = std::vector<double>(bias_.data(), bias_.data() + bias_.size());
  return j;
}

SoftmaxRegression SoftmaxRegression::from_json(const nlohmann::json& j) {
  try {
    if (j.at("format") != "semloop.softmax")
      throw Error(ErrorCode::SchemaError, "not a softmax model file");
    const auto rows = j.at("weights").get<std::vector<std::vector<double>>>();
    const auto bias = j.at("bias").get<std::vector<double>>();
    const std::size_t cols = rows.empty() ? 0 : rows.front().size();
    Eigen::MatrixXd W(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols));
    for (std::size_t c = 0; c < rows.size(); ++c) {
      if (rows[c].size() != cols) throw Error(ErrorCode::SchemaError, "ragged weight matrix");
      for (std::size_t w = 0; w < cols; ++w)
        W(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(w)) = rows[c][w];
    }
    Eigen::VectorXd b = Eigen::Map<const Eigen::VectorXd>(bias.data(), static_cast<Eigen::Index>(bias.size()));
    const auto scaling = j.at("scaling") == "counts" ? FeatureScaling::counts : FeatureScaling::l2_normalized;
    return SoftmaxRegression(std::move(W), std::move(b), scaling);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::SchemaError, e.what());
  }
}

SoftmaxRegression fit_softmax(const TrainSet& train, const LearnerParams& params, FitTrace* trace) {
  train.validate();
  auto fit = fit_softmax_matrix(design_matrix(train, params.scaling), train.labels,
                                train.num_classes, params, trace);
  return SoftmaxRegression(std::move(fit.weights), std::move(fit.bias), params.scaling);
}

std::vector<ClassId> predict_rows(const LinearFit& fit,
                                  const Eigen::SparseMatrix<double, Eigen::RowMajor>& X) {
  Eigen::MatrixXd scores = X * fit.weights.transpose();
  scores.rowwise() += fit.bias.transpose();
  std::vector<ClassId> out(static_cast<std::size_t>(X.rows()));
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < scores.cols(); ++c)
      if (scores(i, c) > scores(i, best)) best = c;
    out[static_cast<std::size_t>(i)] = static_cast<ClassId>(best);
  }
  return out;
}

LinearFit fit_softmax_matrix(const Eigen::SparseMatrix<double, Eigen::RowMajor>& X,
                             std::span<const ClassId> labels, std::size_t num_classes,
                             const LearnerParams& params, FitTrace* trace) {
  if (static_cast<std::size_t>(X.rows()) != labels.size())
    throw Error(ErrorCode::LengthMismatch, "design matrix rows differ from label count");
  if (std::set<ClassId>(labels.begin(), labels.end()).size() < 2)
    throw Error(ErrorCode::SingleClassTrainSet, "training set spans fewer than 2 classes");
  const auto C = static_cast<Eigen::Index>(num_classes);
  const auto V = X.cols();
  const bool l1 = params.penalty == Penalty::l1;
  const double l2 = l1 ? 0.0 : params.regularization;
  const double l1_strength = l1 ? params.regularization : 0.0;

  Eigen::MatrixXd W = Eigen::MatrixXd::Zero(C, V);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(C);
  Eigen::MatrixXd gW;
  Eigen::VectorXd gb;
  auto full = [&](double smooth, const Eigen::MatrixXd& w) {
    return smooth + l1_strength * w.cwiseAbs().sum();
  };

  double smooth = softmax_objective(X, labels, W, b, l2, &gW, &gb);
  double objective = full(smooth, W);
  double step = 1.0;
  if (trace) *trace = FitTrace{};

  for (std::size_t epoch = 0; epoch < params.max_epochs; ++epoch) {
    step = std::min(step * 2.0, 1e6);
    Eigen::MatrixXd W_next;
    Eigen::VectorXd b_next;
    double smooth_next = 0.0;
    bool accepted = false;
    while (step > 1e-16) {
      W_next = W - step * gW;
      b_next = b - step * gb;
      if (l1) {
        const double thr = step * l1_strength;
        W_next = W_next.unaryExpr([thr](double v) {
          return v > thr ? v - thr : (v < -thr ? v + thr : 0.0);
        });
      }
      smooth_next = softmax_objective(X, labels, W_next, b_next, l2, nullptr, nullptr);
      // Sufficient decrease for the (proximal) gradient step.
      const Eigen::MatrixXd dW = W_next - W;
      const Eigen::VectorXd db = b_next - b;
      const double bound = smooth + (gW.cwiseProduct(dW)).sum() + gb.dot(db) +
                           (dW.squaredNorm() + db.squaredNorm()) / (2.0 * step);
      if (smooth_next <= bound) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      if (trace) trace->converged = true;
      break;
    }
    W = std::move(W_next);
    b = std::move(b_next);
    const double next_objective = full(smooth_next, W);
    const double change = objective - next_objective;
    objective = next_objective;
    if (trace) trace->objective.push_back(objective);
    smooth = softmax_objective(X, labels, W, b, l2, &gW, &gb);
    if (std::abs(change) <= params.tolerance * std::max(1.0, std::abs(objective))) {
      if (trace) trace->converged = true;
      break;
    }
  }
  return LinearFit{std::move(W), std::move(b)};
}

}  // namespace semloop
