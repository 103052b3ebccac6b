#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace udm {

/// What a classifier consumes: latent embeddings, full raw feature vectors,
/// or one category's slice of the raw vector.
struct InputKind {
  enum Kind { latent, raw, raw_slice } kind = latent;
  std::string category;  // set iff kind == raw_slice

  std::string to_string() const;
  static InputKind parse(const std::string& text);
};

/// Binary logistic-regression classifier for one concept.
struct ConceptClassifier {
  std::string concept_token;
  Eigen::VectorXd w;
  double b = 0;
  InputKind input_kind;
  double l2 = 0;
};

struct TrainSet {
  std::vector<Eigen::VectorXd> positives;
  std::vector<Eigen::VectorXd> negatives;
};

/// Mean logistic loss + l2/2 * ||w||^2 over the train set.
double logistic_loss(const TrainSet& ts, const Eigen::VectorXd& w, double b,
                     double l2);

/// Analytic gradient of logistic_loss at (w, b).
void logistic_loss_gradient(const TrainSet& ts, const Eigen::VectorXd& w,
                            double b, double l2, Eigen::VectorXd& grad_w,
                            double& grad_b);

/// Full-batch gradient descent from zero weights, fixed learning rate.
/// Returns the best iterate seen, so the final loss never exceeds the
/// initial one. The seed parameter is unused with zero initialization and
/// kept for interface symmetry with the other trainers.
ConceptClassifier train_concept(const TrainSet& ts, double l2, int epochs,
                                double lr, std::uint64_t seed);

/// sigma(w.x + b), clamped into (0, 1) so downstream math never sees 0/1/NaN.
double predict_proba(const ConceptClassifier& clf, const Eigen::VectorXd& x);

/// predict_proba(x) > threshold, strict.
bool predict(const ConceptClassifier& clf, const Eigen::VectorXd& x,
             double threshold = 0.5);

/// Bundle serialization, format "udm-clf-v1": concept -> {w, b, input_kind, l2}.
void save_classifiers(const std::vector<ConceptClassifier>& classifiers,
                      const std::filesystem::path& path);
std::vector<ConceptClassifier> load_classifiers(const std::filesystem::path& path);

}  // namespace udm
