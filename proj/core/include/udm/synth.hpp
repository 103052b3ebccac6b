#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace udm {

/// One concept's generating cluster: a mean vector over its category's
/// feature slice and an isotropic spread within that slice.
struct SynthConcept {
  std::string token;
  std::string category;
  std::vector<double> mean;   // length = category slice width
  double cov_scale = 1.0;
};

struct SynthConfig {
  int n_objects = 72;
  int images_per_object = 4;
  int dim = 120;
  std::vector<SynthConcept> concepts;
  double annotation_noise = 0.0;   // probability a description token is wrong
  int descriptions_per_object = 3;
  std::uint64_t seed = 0;
  double background_noise = 1.0;   // sigma of dims outside every slice
  int slice_width = 0;             // 0 = split dim evenly across categories

  /// Per-category unit multipliers (category order), modelling feature
  /// families that arrive in different numeric ranges. Empty = all 1.
  std::vector<double> category_scales;

  /// Caps how many objects the *last* concept is assigned to, to plant a
  /// deliberately sparse concept. 0 disables.
  int rare_last_concept_positives = 0;

  void validate() const;

  /// Convenience builder: `concepts_per_category` clusters per category with
  /// orthogonal-ish means of norm `separation` inside each category slice.
  /// slice_width 0 splits dim evenly; a smaller width leaves the remaining
  /// dimensions as pure background noise.
  static SynthConfig basic(int n_objects, int images_per_object, int dim,
                           int n_categories, int concepts_per_category,
                           double separation, double cov_scale,
                           double annotation_noise, int descriptions_per_object,
                           std::uint64_t seed, int slice_width = 0);
};

struct SynthOutput {
  std::filesystem::path features_csv;
  std::filesystem::path descriptions_tsv;
  std::filesystem::path category_manifest_json;
  std::filesystem::path concept_categories_tsv;
};

/// Ground truth kept alongside generated files so tests can check label
/// recoverability.
struct SynthTruth {
  // object_id -> its true concept tokens (one per category)
  std::vector<std::pair<std::string, std::vector<std::string>>> object_concepts;
  long corrupted_tokens = 0;
  long total_tokens = 0;
};

/// Writes features CSV, descriptions TSV, category manifest and the
/// concept -> category map into out_dir. Byte-deterministic given config.
SynthOutput generate(const SynthConfig& cfg, const std::filesystem::path& out_dir,
                     SynthTruth* truth = nullptr);

}  // namespace udm
