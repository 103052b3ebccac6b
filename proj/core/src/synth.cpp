#include "udm/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>

#include <nlohmann/json.hpp>

#include "udm/dataset.hpp"
#include "udm/errors.hpp"
#include "udm/rng.hpp"

namespace udm {

namespace {

std::vector<std::string> category_order(const std::vector<SynthConcept>& concepts) {
  std::vector<std::string> order;
  for (const auto& entry : concepts) {
    if (std::find(order.begin(), order.end(), entry.category) == order.end()) {
      order.push_back(entry.category);
    }
  }
  return order;
}

std::string object_name(int index, int width) {
  std::string digits = std::to_string(index);
  while (static_cast<int>(digits.size()) < width) digits.insert(digits.begin(), '0');
  return "obj" + digits;
}

}  // namespace

void SynthConfig::validate() const {
  if (n_objects < 8) {
    raise(errc::invalid_config, "need at least 8 objects for 4-fold splits");
  }
  if (images_per_object < 1) raise(errc::invalid_config, "images_per_object must be >= 1");
  if (descriptions_per_object < 1) {
    raise(errc::invalid_config, "descriptions_per_object must be >= 1");
  }
  if (!(annotation_noise >= 0.0 && annotation_noise < 0.5)) {
    raise(errc::invalid_config, "annotation_noise must lie in [0, 0.5)");
  }
  if (concepts.empty()) raise(errc::invalid_config, "concept list is empty");
  if (!(background_noise >= 0.0)) {
    raise(errc::invalid_config, "background_noise must be >= 0");
  }
  const auto categories = category_order(concepts);
  const int width = slice_width > 0
                        ? slice_width
                        : dim / static_cast<int>(categories.size());
  if (width < 1 || width * static_cast<int>(categories.size()) > dim) {
    raise(errc::invalid_config, "category slices do not fit into dim");
  }
  for (const auto& entry : concepts) {
    if (static_cast<int>(entry.mean.size()) != width) {
      raise(errc::invalid_config,
            "concept '" + entry.token + "' mean length " +
                std::to_string(entry.mean.size()) + " != slice width " +
                std::to_string(width));
    }
    if (!(entry.cov_scale > 0)) {
      raise(errc::invalid_config, "cov_scale must be > 0 for '" + entry.token + "'");
    }
  }
  if (rare_last_concept_positives < 0) {
    raise(errc::invalid_config, "rare_last_concept_positives must be >= 0");
  }
  if (!category_scales.empty()) {
    if (category_scales.size() != categories.size()) {
      raise(errc::invalid_config, "category_scales must match category count");
    }
    for (const double scale : category_scales) {
      if (!(scale > 0)) raise(errc::invalid_config, "category scales must be > 0");
    }
  }
}

SynthConfig SynthConfig::basic(int n_objects, int images_per_object, int dim,
                               int n_categories, int concepts_per_category,
                               double separation, double cov_scale,
                               double annotation_noise, int descriptions_per_object,
                               std::uint64_t seed, int slice_width) {
  if (n_categories < 1 || concepts_per_category < 1) {
    raise(errc::invalid_config, "need at least one category and concept");
  }
  SynthConfig cfg;
  cfg.n_objects = n_objects;
  cfg.images_per_object = images_per_object;
  cfg.dim = dim;
  cfg.annotation_noise = annotation_noise;
  cfg.descriptions_per_object = descriptions_per_object;
  cfg.seed = seed;
  cfg.slice_width = slice_width;

  static const char* kNames[] = {"color", "shape", "object"};
  const int width = slice_width > 0 ? slice_width : dim / n_categories;
  // Dense random cluster centers of norm `separation` inside each slice.
  // Random directions in width >= 4 dims are near-orthogonal, so pairwise
  // center distances stay close to separation * sqrt(2).
  Rng rng(Rng::mix(seed, "synth-means"));
  for (int c = 0; c < n_categories; ++c) {
    const std::string category =
        c < 3 ? kNames[c] : "cat" + std::to_string(c);
    for (int j = 0; j < concepts_per_category; ++j) {
      SynthConcept entry;
      entry.token = category + std::to_string(j);
      entry.category = category;
      entry.cov_scale = cov_scale;
      entry.mean.assign(static_cast<std::size_t>(width), 0.0);
      double norm = 0;
      for (auto& value : entry.mean) {
        value = rng.normal();
        norm += value * value;
      }
      norm = std::sqrt(norm);
      for (auto& value : entry.mean) value *= separation / norm;
      cfg.concepts.push_back(std::move(entry));
    }
  }
  return cfg;
}

SynthOutput generate(const SynthConfig& cfg, const std::filesystem::path& out_dir,
                     SynthTruth* truth) {
  cfg.validate();
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (!std::filesystem::is_directory(out_dir)) {
    raise(errc::io_error, "cannot create output directory " + out_dir.string());
  }

  const auto categories = category_order(cfg.concepts);
  const int n_categories = static_cast<int>(categories.size());
  const int width =
      cfg.slice_width > 0 ? cfg.slice_width : cfg.dim / n_categories;

  // Concept indices per category, in config order.
  std::map<std::string, std::vector<int>> concepts_by_category;
  for (int i = 0; i < static_cast<int>(cfg.concepts.size()); ++i) {
    concepts_by_category[cfg.concepts[static_cast<std::size_t>(i)].category]
        .push_back(i);
  }

  Rng rng(cfg.seed);
  const int name_width =
      std::max(2, static_cast<int>(std::to_string(cfg.n_objects - 1).size()));

  // Assign one concept per category to every object: round-robin over a
  // shuffled object order so assignments are balanced.
  std::vector<std::vector<int>> assignment(
      static_cast<std::size_t>(cfg.n_objects),
      std::vector<int>(static_cast<std::size_t>(n_categories), -1));
  for (int c = 0; c < n_categories; ++c) {
    const auto& pool = concepts_by_category[categories[static_cast<std::size_t>(c)]];
    std::vector<int> order(static_cast<std::size_t>(cfg.n_objects));
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
    for (int rank = 0; rank < cfg.n_objects; ++rank) {
      assignment[static_cast<std::size_t>(order[static_cast<std::size_t>(rank)])]
                [static_cast<std::size_t>(c)] =
          pool[static_cast<std::size_t>(rank) % pool.size()];
    }
  }

  // Optionally starve the last concept of positives.
  if (cfg.rare_last_concept_positives > 0) {
    const int rare = static_cast<int>(cfg.concepts.size()) - 1;
    const auto& rare_category = cfg.concepts[static_cast<std::size_t>(rare)].category;
    const int cat_idx = static_cast<int>(
        std::find(categories.begin(), categories.end(), rare_category) -
        categories.begin());
    const auto& pool = concepts_by_category[rare_category];
    if (pool.size() < 2) {
      raise(errc::invalid_config,
            "rare concept needs a sibling concept in its category");
    }
    int kept = 0;
    int fallback = 0;
    for (int obj = 0; obj < cfg.n_objects; ++obj) {
      auto& slot = assignment[static_cast<std::size_t>(obj)]
                             [static_cast<std::size_t>(cat_idx)];
      if (slot != rare) continue;
      if (kept < cfg.rare_last_concept_positives) {
        ++kept;
        continue;
      }
      // Reassign the overflow among the other concepts of the category.
      int substitute = pool[static_cast<std::size_t>(fallback) % pool.size()];
      if (substitute == rare) {
        ++fallback;
        substitute = pool[static_cast<std::size_t>(fallback) % pool.size()];
      }
      slot = substitute;
      ++fallback;
    }
  }

  // Features.
  FeatureTable table;
  for (int obj = 0; obj < cfg.n_objects; ++obj) {
    const std::string object_id = object_name(obj, name_width);
    for (int img = 0; img < cfg.images_per_object; ++img) {
      Instance inst;
      inst.object_id = object_id;
      inst.instance_id = object_id + "_im" + std::to_string(img);
      inst.x.resize(cfg.dim);
      for (int dimension = 0; dimension < cfg.dim; ++dimension) {
        const int slice = dimension / width;
        if (slice < n_categories && dimension < width * n_categories) {
          const int concept_idx =
              assignment[static_cast<std::size_t>(obj)][static_cast<std::size_t>(slice)];
          const auto& entry = cfg.concepts[static_cast<std::size_t>(concept_idx)];
          const double unit =
              cfg.category_scales.empty()
                  ? 1.0
                  : cfg.category_scales[static_cast<std::size_t>(slice)];
          inst.x[dimension] =
              unit *
              (entry.mean[static_cast<std::size_t>(dimension - slice * width)] +
               entry.cov_scale * rng.normal());
        } else {
          inst.x[dimension] = cfg.background_noise * rng.normal();
        }
      }
      table.instances.push_back(std::move(inst));
    }
  }

  // Descriptions with optional token corruption.
  long corrupted = 0;
  long total_tokens = 0;
  std::string descriptions;
  for (int obj = 0; obj < cfg.n_objects; ++obj) {
    const std::string object_id = object_name(obj, name_width);
    for (int d = 0; d < cfg.descriptions_per_object; ++d) {
      descriptions += object_id;
      descriptions += '\t';
      for (int c = 0; c < n_categories; ++c) {
        const int concept_idx =
            assignment[static_cast<std::size_t>(obj)][static_cast<std::size_t>(c)];
        std::string token = cfg.concepts[static_cast<std::size_t>(concept_idx)].token;
        ++total_tokens;
        if (cfg.annotation_noise > 0 && rng.uniform() < cfg.annotation_noise &&
            cfg.concepts.size() > 1) {
          // Swap in a uniformly random *other* token.
          auto wrong = static_cast<std::size_t>(rng.uniform_int(
              0, static_cast<std::int64_t>(cfg.concepts.size()) - 2));
          if (wrong >= static_cast<std::size_t>(concept_idx)) ++wrong;
          token = cfg.concepts[wrong].token;
          ++corrupted;
        }
        if (c > 0) descriptions += ' ';
        descriptions += token;
      }
      descriptions += '\n';
    }
  }

  SynthOutput out;
  out.features_csv = out_dir / "features.csv";
  out.descriptions_tsv = out_dir / "descriptions.tsv";
  out.category_manifest_json = out_dir / "categories.json";
  out.concept_categories_tsv = out_dir / "concept_categories.tsv";

  write_features(table, out.features_csv);

  {
    std::ofstream f(out.descriptions_tsv, std::ios::binary);
    if (!f) raise(errc::io_error, "cannot write " + out.descriptions_tsv.string());
    f << descriptions;
  }
  {
    nlohmann::json manifest = nlohmann::json::object();
    for (int c = 0; c < n_categories; ++c) {
      manifest[categories[static_cast<std::size_t>(c)]] = {c * width,
                                                           (c + 1) * width};
    }
    std::ofstream f(out.category_manifest_json, std::ios::binary);
    if (!f) raise(errc::io_error, "cannot write " + out.category_manifest_json.string());
    f << manifest.dump(2) << "\n";
  }
  {
    std::ofstream f(out.concept_categories_tsv, std::ios::binary);
    if (!f) raise(errc::io_error, "cannot write " + out.concept_categories_tsv.string());
    for (const auto& entry : cfg.concepts) {
      f << entry.token << '\t' << entry.category << '\n';
    }
  }

  if (truth != nullptr) {
    truth->object_concepts.clear();
    for (int obj = 0; obj < cfg.n_objects; ++obj) {
      std::vector<std::string> tokens;
      for (int c = 0; c < n_categories; ++c) {
        tokens.push_back(
            cfg.concepts[static_cast<std::size_t>(
                             assignment[static_cast<std::size_t>(obj)]
                                       [static_cast<std::size_t>(c)])]
                .token);
      }
      truth->object_concepts.emplace_back(object_name(obj, name_width),
                                          std::move(tokens));
    }
    truth->corrupted_tokens = corrupted;
    truth->total_tokens = total_tokens;
  }
  return out;
}

}  // namespace udm
