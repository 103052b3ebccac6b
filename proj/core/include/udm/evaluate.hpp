#pragma once

#include <Eigen/Dense>

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "udm/classifier.hpp"
#include "udm/dataset.hpp"
#include "udm/negatives.hpp"
#include "udm/rng.hpp"
#include "udm/vae.hpp"

namespace udm {

struct EvalProtocol {
  int k = 4;       // folds
  int trials = 10; // trials per (concept, fold)
  int pos_lo = 3, pos_hi = 4;  // positives sampled per trial
  int neg_lo = 4, neg_hi = 6;  // negatives sampled per trial
  double threshold = 0.5;
  std::uint64_t seed = 0;

  void validate() const;
};

enum class Method { udm, category_free_lr, predefined_category };

std::string method_name(Method method);
Method parse_method(const std::string& name);

/// One test-fold image with its ground-truth label for some concept.
struct LabeledVector {
  std::string instance_id;
  std::string object_id;
  Eigen::VectorXd x;
  bool positive = false;
};

/// tp/fp/fn for one evaluation trial.
struct TrialCounts {
  std::string concept_token;
  std::string category;  // empty unless tagged
  int fold = 0;
  int trial = 0;
  long tp = 0, fp = 0, fn = 0;
};

struct ConceptResult {
  std::string concept_token;
  std::string category;             // reporting tag, may be empty
  std::vector<double> per_fold_f1;  // trial-averaged, indexed by fold
  std::vector<bool> fold_evaluated;
  double mean_f1 = 0;               // over evaluated folds
  long support = 0;                 // positive images in the full table
};

struct SkippedConcept {
  std::string concept_token;
  std::string category;
  int fold = 0;
  std::string reason;
};

/// Which instances played which role in a fold; filled during a run so the
/// leakage audit can compare them against the held-out set afterwards.
struct AuditRecord {
  int fold = 0;
  std::string role;  // vae_train | standardization | pvdm_train | classifier_train | test
  std::set<std::string> instance_ids;
};

struct AuditViolation {
  int fold = 0;
  std::string role;
  std::string instance_id;
};

struct EvaluationReport {
  Method method = Method::udm;
  int folds = 0;
  std::vector<ConceptResult> concept_results;  // sorted (concept, category)
  std::vector<SkippedConcept> skipped;
  std::vector<TrialCounts> trial_counts;
  double macro_f1 = 0, micro_f1 = 0;
  double min_f1 = 0, mean_f1 = 0, max_f1 = 0;

  /// Mean predicted probability per (concept row, object column), taken on
  /// each object's images in the fold where that object was held out.
  std::vector<std::string> matrix_objects;  // sorted
  std::map<std::string, std::map<std::string, double>> probability_matrix;

  std::vector<AuditRecord> audit_roles;
  std::vector<AuditViolation> audit_violations;

  nlohmann::json config_echo;
};

/// 2tp / (2tp + fp + fn); 0 when the denominator is 0.
double f1(long tp, long fp, long fn);

/// Runs the trial protocol for one trained classifier against a test fold.
/// Per trial, positive/negative sample counts are drawn uniformly from the
/// protocol ranges and instances are sampled without replacement. Raises
/// insufficient_test_instances when the fold cannot cover the low end of
/// either range. Appends per-trial counts to `counts` when given.
std::vector<double> evaluate_concept(const ConceptClassifier& clf,
                                     const std::vector<LabeledVector>& test_fold,
                                     const EvalProtocol& protocol, Rng& rng,
                                     std::vector<TrialCounts>* counts = nullptr);

/// Everything the cross-validated runs need besides the data itself.
struct RunOptions {
  EvalProtocol protocol;
  VaeConfig vae;              // udm only; input_dim filled from the table
  PvdmConfig pvdm;            // semantic strategy only
  NegativeStrategy negatives = NegativeStrategy::all_nonpositive;
  double negative_ratio = 1.5;
  PositiveAggregate aggregate = PositiveAggregate::max;
  double clf_l2 = 1e-3;
  int clf_epochs = 500;
  double clf_lr = 0.1;
  int jobs = 1;

  /// Optional concept -> categories tags (reporting only for udm / lr;
  /// defines the classifier pairs for predefined_category).
  std::vector<std::pair<std::string, std::string>> concept_categories;

  /// Ablation hook: when set, fold i draws its *labeled* data (classifier
  /// train sets, PV-DM corpus, negative pools) from these objects only.
  /// Unsupervised VAE pre-training still sees every training-fold instance;
  /// it consumes no labels, so scarcity of annotations does not shrink it.
  std::optional<std::vector<std::set<std::string>>> labeled_object_restriction;
};

struct PipelineInputs {
  const FeatureTable& features;
  const DescriptionCorpus& corpus;
  const ConceptVocabulary& vocab;
};

EvaluationReport run_udm(const PipelineInputs& in, const RunOptions& opt);
EvaluationReport run_category_free_lr(const PipelineInputs& in,
                                      const RunOptions& opt);
EvaluationReport run_predefined_category(const PipelineInputs& in,
                                         const RunOptions& opt);

struct AblationReport {
  Method method = Method::udm;
  std::vector<double> fractions;
  std::vector<double> macro_f1;
  std::vector<double> micro_f1;
  std::vector<int> evaluated_concepts;
  std::vector<int> skipped_entries;
  std::vector<EvaluationReport> reports;  // one per fraction
};

/// Reruns `method` with each training fraction: per fold, training objects
/// are a seeded-shuffle prefix of ceil(fraction * n), so subsets are nested
/// across fractions and fraction 1.0 reproduces the full run exactly.
AblationReport ablate(Method method, const std::vector<double>& fractions,
                      const PipelineInputs& in, const RunOptions& opt);

/// Writes summary.csv, per_concept.csv, probability_matrix.csv,
/// confusion.csv, skipped.csv, audit.csv (and category_summary.csv when
/// category tags exist) into out_dir. Deterministic bytes: concepts sorted,
/// floats fixed to 4 decimals.
void emit_report(const EvaluationReport& report,
                 const std::filesystem::path& out_dir);

/// Writes ablation.csv (one column per fraction, one row of mean F1) plus
/// ablation_detail.csv.
void emit_ablation(const AblationReport& report,
                   const std::filesystem::path& out_dir);

}  // namespace udm
