#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "udm/dataset.hpp"

namespace udm {

struct PvdmConfig {
  int dim = 50;
  int window = 5;
  int negative_samples = 5;
  int epochs = 100;
  double learning_rate = 0.025;  // linear decay to 1e-4 of itself
  std::uint64_t seed = 0;

  void validate() const;
};

/// Distributed-memory paragraph vectors: one vector per object document
/// (the concatenation of that object's descriptions) plus word vectors.
struct ParagraphVectors {
  PvdmConfig config;
  std::map<std::string, Eigen::VectorXd> doc_vectors;   // object_id -> vec
  std::map<std::string, Eigen::VectorXd> word_vectors;  // token -> vec
  std::vector<double> epoch_loss;  // mean logistic loss per epoch
};

/// Trains PV-DM with negative sampling (noise tokens from the unigram^0.75
/// distribution; the center word is predicted from the average of the doc
/// vector and the context word vectors). Deterministic given seed.
/// Raises corpus_too_small with fewer than two documents.
ParagraphVectors train_pvdm(const DescriptionCorpus& corpus, const PvdmConfig& cfg);

/// a.b / (|a| |b|); raises zero_vector on a zero-norm input.
double cosine(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

enum class NegativeStrategy { all_nonpositive, semantic_distant };

/// How "similarity to the positive class" is aggregated when ranking
/// candidates: against the nearest positive document or their centroid.
enum class PositiveAggregate { max, centroid };

struct NegativeSet {
  std::string concept_token;
  NegativeStrategy strategy = NegativeStrategy::all_nonpositive;
  std::set<std::string> object_ids;
};

/// Every object that is not a positive example of the concept.
NegativeSet negatives_all(const std::string& concept_token,
                          const ConceptVocabulary& vocab,
                          const std::set<std::string>& objects);

/// The ceil(ratio * |positives|) objects (minimum 1, clamped to what is
/// available) whose doc vectors are least similar to the positive class.
/// Ties break on object_id so selection is deterministic.
NegativeSet negatives_semantic(const std::string& concept_token,
                               const ConceptVocabulary& vocab,
                               const ParagraphVectors& pv, double ratio,
                               PositiveAggregate aggregate = PositiveAggregate::max);

/// Doc-vector CSV export (`object_id,v0,...`) for inspection.
void write_doc_vectors(const ParagraphVectors& pv,
                       const std::filesystem::path& path);

}  // namespace udm
