#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace udm {

/// One image of one object: a feature row from the features CSV.
struct Instance {
  std::string instance_id;
  std::string object_id;
  Eigen::VectorXd x;
};

/// Half-open index range [begin, end) into the feature dimensions.
struct CategorySlice {
  int begin = 0;
  int end = 0;
  int width() const { return end - begin; }
};

struct FeatureTable {
  std::vector<Instance> instances;
  std::optional<std::map<std::string, CategorySlice>> category_slices;

  int dim() const {
    return instances.empty() ? 0 : static_cast<int>(instances.front().x.size());
  }
  /// Distinct object ids, sorted.
  std::set<std::string> object_ids() const;
};

/// Parses the features CSV (`instance_id,object_id,f0,...`). Row order is
/// preserved. Raises malformed_row, dimension_mismatch, duplicate_instance_id.
FeatureTable load_features(const std::filesystem::path& path);

/// Writes a table back in the same CSV format. Floats use shortest
/// round-trip formatting, so load(write(t)) reproduces t numerically.
void write_features(const FeatureTable& table, const std::filesystem::path& path);

/// Loads a category manifest (JSON map name -> [start, end)) and attaches
/// it to the table after validating the ranges against the table dimension.
void load_category_manifest(FeatureTable& table, const std::filesystem::path& path);

struct DescriptionEntry {
  std::string object_id;
  std::string language;
  std::string raw;
  std::vector<std::string> tokens;
};

struct DescriptionCorpus {
  std::vector<DescriptionEntry> entries;

  /// Distinct object ids in first-appearance order.
  std::vector<std::string> object_order() const;
};

/// Parses the descriptions TSV (`object_id<TAB>description`, one per line).
/// Raises malformed_line, invalid_utf8.
DescriptionCorpus load_descriptions(const std::filesystem::path& path,
                                    std::string_view language);

struct Concept {
  std::string token;
  std::int64_t count = 0;                 // total corpus frequency
  std::set<std::string> positive_objects; // objects with >=1 description using it
};

struct ConceptVocabulary {
  std::vector<Concept> concepts;  // sorted by token

  const Concept* find(std::string_view token) const;
  bool contains(std::string_view token) const { return find(token) != nullptr; }
};

/// Keeps every token with total frequency >= min_count that is not a
/// stopword; records which objects it describes.
ConceptVocabulary build_vocabulary(const DescriptionCorpus& corpus, int min_count,
                                   const std::set<std::string>& stopwords);

struct FoldAssignment {
  int k = 0;
  std::map<std::string, int> assignment;  // object_id -> fold in [0, k)

  int fold_of(const std::string& object_id) const {
    return assignment.at(object_id);
  }
};

/// Splits objects into k folds of near-equal size (difference at most one
/// object). Pure function of (objects, k, seed). All images of an object
/// land in the same fold by construction.
FoldAssignment split_folds(const std::set<std::string>& objects, int k,
                           std::uint64_t seed);

/// Loads the optional concept -> category tag file (TSV, one pair per line).
/// A concept may map to several categories.
std::vector<std::pair<std::string, std::string>> load_concept_categories(
    const std::filesystem::path& path);

}  // namespace udm
