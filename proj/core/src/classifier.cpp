#include "udm/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "udm/errors.hpp"

namespace udm {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr double kProbFloor = 1e-12;

double stable_sigmoid(double t) {
  if (t >= 0) {
    return 1.0 / (1.0 + std::exp(-t));
  }
  const double e = std::exp(t);
  return e / (1.0 + e);
}

// log(1 + exp(t)) without overflow.
double softplus(double t) {
  if (t > 0) return t + std::log1p(std::exp(-t));
  return std::log1p(std::exp(t));
}

// Stacks the train set into columns with labels +1 / 0.
void flatten(const TrainSet& ts, MatrixXd& x, VectorXd& y) {
  if (ts.positives.empty()) raise(errc::empty_class, "no positive examples");
  if (ts.negatives.empty()) raise(errc::empty_class, "no negative examples");
  const Eigen::Index dim = ts.positives.front().size();
  if (dim < 1) raise(errc::degenerate_dimension, "zero-dimensional inputs");
  const Eigen::Index n =
      static_cast<Eigen::Index>(ts.positives.size() + ts.negatives.size());
  x.resize(dim, n);
  y.resize(n);
  Eigen::Index col = 0;
  for (const auto& v : ts.positives) {
    if (v.size() != dim) {
      raise(errc::degenerate_dimension, "train set dimensions disagree");
    }
    x.col(col) = v;
    y[col++] = 1.0;
  }
  for (const auto& v : ts.negatives) {
    if (v.size() != dim) {
      raise(errc::degenerate_dimension, "train set dimensions disagree");
    }
    x.col(col) = v;
    y[col++] = 0.0;
  }
}

double loss_on(const MatrixXd& x, const VectorXd& y, const VectorXd& w, double b,
               double l2) {
  const VectorXd scores = (x.transpose() * w).array() + b;
  double acc = 0;
  for (Eigen::Index i = 0; i < scores.size(); ++i) {
    // -y log p - (1-y) log(1-p) = softplus(s) - y s
    acc += softplus(scores[i]) - y[i] * scores[i];
  }
  return acc / static_cast<double>(scores.size()) + 0.5 * l2 * w.squaredNorm();
}

void gradient_on(const MatrixXd& x, const VectorXd& y, const VectorXd& w,
                 double b, double l2, VectorXd& grad_w, double& grad_b) {
  const VectorXd scores = (x.transpose() * w).array() + b;
  VectorXd p(scores.size());
  for (Eigen::Index i = 0; i < scores.size(); ++i) p[i] = stable_sigmoid(scores[i]);
  const VectorXd delta = (p - y) / static_cast<double>(scores.size());
  grad_w = x * delta + l2 * w;
  grad_b = delta.sum();
}

}  // namespace

std::string InputKind::to_string() const {
  switch (kind) {
    case latent: return "latent";
    case raw: return "raw";
    case raw_slice: return "raw_slice:" + category;
  }
  return "latent";
}

InputKind InputKind::parse(const std::string& text) {
  InputKind k;
  if (text == "latent") {
    k.kind = latent;
  } else if (text == "raw") {
    k.kind = raw;
  } else if (text.rfind("raw_slice:", 0) == 0) {
    k.kind = raw_slice;
    k.category = text.substr(10);
  } else {
    raise(errc::invalid_config, "unknown input kind '" + text + "'");
  }
  return k;
}

double logistic_loss(const TrainSet& ts, const VectorXd& w, double b, double l2) {
  MatrixXd x;
  VectorXd y;
  flatten(ts, x, y);
  if (w.size() != x.rows()) {
    raise(errc::dimension_mismatch, "weight length does not match inputs");
  }
  return loss_on(x, y, w, b, l2);
}

void logistic_loss_gradient(const TrainSet& ts, const VectorXd& w, double b,
                            double l2, VectorXd& grad_w, double& grad_b) {
  MatrixXd x;
  VectorXd y;
  flatten(ts, x, y);
  if (w.size() != x.rows()) {
    raise(errc::dimension_mismatch, "weight length does not match inputs");
  }
  gradient_on(x, y, w, b, l2, grad_w, grad_b);
}

ConceptClassifier train_concept(const TrainSet& ts, double l2, int epochs,
                                double lr, std::uint64_t /*seed*/) {
  if (l2 < 0) raise(errc::invalid_config, "l2 must be >= 0");
  if (epochs < 1) raise(errc::invalid_config, "epochs must be >= 1");
  if (!(lr > 0)) raise(errc::invalid_config, "learning rate must be > 0");
  MatrixXd x;
  VectorXd y;
  flatten(ts, x, y);

  VectorXd w = VectorXd::Zero(x.rows());
  double b = 0;
  VectorXd best_w = w;
  double best_b = b;
  double best_loss = loss_on(x, y, w, b, l2);

  VectorXd grad_w(x.rows());
  double grad_b = 0;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    gradient_on(x, y, w, b, l2, grad_w, grad_b);
    w -= lr * grad_w;
    b -= lr * grad_b;
    const double current = loss_on(x, y, w, b, l2);
    if (current <= best_loss) {
      best_loss = current;
      best_w = w;
      best_b = b;
    }
  }

  ConceptClassifier clf;
  clf.w = std::move(best_w);
  clf.b = best_b;
  clf.l2 = l2;
  return clf;
}

double predict_proba(const ConceptClassifier& clf, const VectorXd& x) {
  if (x.size() != clf.w.size()) {
    raise(errc::dimension_mismatch,
          "input length " + std::to_string(x.size()) + " vs classifier " +
              std::to_string(clf.w.size()));
  }
  const double p = stable_sigmoid(clf.w.dot(x) + clf.b);
  return std::clamp(p, kProbFloor, 1.0 - kProbFloor);
}

bool predict(const ConceptClassifier& clf, const VectorXd& x, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) {
    raise(errc::invalid_config, "threshold must lie in (0, 1)");
  }
  return predict_proba(clf, x) > threshold;
}

void save_classifiers(const std::vector<ConceptClassifier>& classifiers,
                      const std::filesystem::path& path) {
  nlohmann::json j;
  j["version"] = "udm-clf-v1";
  nlohmann::json concepts = nlohmann::json::object();
  for (const auto& clf : classifiers) {
    concepts[clf.concept_token] = {
        {"w", std::vector<double>(clf.w.data(), clf.w.data() + clf.w.size())},
        {"b", clf.b},
        {"input_kind", clf.input_kind.to_string()},
        {"l2", clf.l2},
    };
  }
  j["concepts"] = concepts;
  std::ofstream out(path, std::ios::binary);
  if (!out) raise(errc::io_error, "cannot write classifier bundle " + path.string());
  out << j.dump(2) << "\n";
  if (!out) raise(errc::io_error, "write failed for " + path.string());
}

std::vector<ConceptClassifier> load_classifiers(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) raise(errc::io_error, "cannot open classifier bundle " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    raise(errc::invalid_config, "classifier parse error: " + std::string(e.what()));
  }
  if (j.value("version", "") != "udm-clf-v1") {
    raise(errc::invalid_config, "unsupported classifier bundle version");
  }
  std::vector<ConceptClassifier> result;
  for (const auto& [token, spec] : j.at("concepts").items()) {
    ConceptClassifier clf;
    clf.concept_token = token;
    const auto w = spec.at("w").get<std::vector<double>>();
    clf.w = Eigen::Map<const VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
    clf.b = spec.at("b").get<double>();
    clf.input_kind = InputKind::parse(spec.at("input_kind").get<std::string>());
    clf.l2 = spec.at("l2").get<double>();
    result.push_back(std::move(clf));
  }
  return result;
}

}  // namespace udm
