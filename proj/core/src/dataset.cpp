#include "udm/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "udm/errors.hpp"
#include "udm/rng.hpp"
#include "udm/text.hpp"

namespace udm {

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string::npos) {
      cells.push_back(line.substr(start));
      break;
    }
    cells.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return cells;
}

void chomp(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

bool parse_double(const std::string& cell, double& out) {
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  while (first < last && (*first == ' ' || *first == '\t')) ++first;
  while (last > first && (last[-1] == ' ' || last[-1] == '\t')) --last;
  if (first == last) return false;
  const auto result = std::from_chars(first, last, out);
  return result.ec == std::errc() && result.ptr == last;
}

std::string format_double(double value) {
  char buffer[40];
  const auto result =
      std::to_chars(buffer, buffer + sizeof(buffer), value,
                    std::chars_format::general, 17);
  return std::string(buffer, result.ptr);
}

}  // namespace

std::set<std::string> FeatureTable::object_ids() const {
  std::set<std::string> ids;
  for (const auto& inst : instances) ids.insert(inst.object_id);
  return ids;
}

FeatureTable load_features(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) raise(errc::io_error, "cannot open features file " + path.string());

  std::string line;
  if (!std::getline(in, line)) {
    raise(errc::malformed_row, "features file is empty: " + path.string());
  }
  chomp(line);
  const auto header = split(line, ',');
  if (header.size() < 3 || header[0] != "instance_id" ||
      header[1] != "object_id") {
    raise(errc::malformed_row,
          "expected header instance_id,object_id,f0,... in " + path.string());
  }
  const int header_dim = static_cast<int>(header.size()) - 2;

  FeatureTable table;
  std::unordered_set<std::string> seen_ids;
  int dim = header_dim;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    chomp(line);
    if (line.empty()) continue;
    const auto cells = split(line, ',');
    if (cells.size() < 3) {
      raise(errc::malformed_row,
            "line " + std::to_string(line_no) + ": expected at least 3 columns");
    }
    const int row_dim = static_cast<int>(cells.size()) - 2;
    if (row_dim != dim) {
      raise(errc::dimension_mismatch,
            "line " + std::to_string(line_no) + ": row has " +
                std::to_string(row_dim) + " features, expected " +
                std::to_string(dim));
    }
    Instance inst;
    inst.instance_id = cells[0];
    inst.object_id = cells[1];
    if (inst.instance_id.empty() || inst.object_id.empty()) {
      raise(errc::malformed_row,
            "line " + std::to_string(line_no) + ": empty instance or object id");
    }
    if (!seen_ids.insert(inst.instance_id).second) {
      raise(errc::duplicate_instance_id,
            "instance_id '" + inst.instance_id + "' appears twice");
    }
    inst.x.resize(row_dim);
    for (int j = 0; j < row_dim; ++j) {
      double value = 0;
      if (!parse_double(cells[static_cast<std::size_t>(j) + 2], value)) {
        raise(errc::malformed_row,
              "line " + std::to_string(line_no) + ": non-numeric feature '" +
                  cells[static_cast<std::size_t>(j) + 2] + "'");
      }
      inst.x[j] = value;
    }
    table.instances.push_back(std::move(inst));
  }
  return table;
}

void write_features(const FeatureTable& table, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) raise(errc::io_error, "cannot write features file " + path.string());
  const int dim = table.dim();
  out << "instance_id,object_id";
  for (int j = 0; j < dim; ++j) out << ",f" << j;
  out << "\n";
  for (const auto& inst : table.instances) {
    out << inst.instance_id << "," << inst.object_id;
    for (int j = 0; j < inst.x.size(); ++j) out << "," << format_double(inst.x[j]);
    out << "\n";
  }
  if (!out) raise(errc::io_error, "write failed for " + path.string());
}

void load_category_manifest(FeatureTable& table, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) raise(errc::io_error, "cannot open manifest " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    raise(errc::invalid_config, "manifest parse error: " + std::string(e.what()));
  }
  if (!j.is_object()) raise(errc::invalid_config, "manifest must be a JSON object");

  const int dim = table.dim();
  std::map<std::string, CategorySlice> slices;
  for (const auto& [name, range] : j.items()) {
    if (!range.is_array() || range.size() != 2 || !range[0].is_number_integer() ||
        !range[1].is_number_integer()) {
      raise(errc::invalid_config, "category '" + name + "' must map to [start, end)");
    }
    CategorySlice slice{range[0].get<int>(), range[1].get<int>()};
    if (slice.begin < 0 || slice.begin >= slice.end || slice.end > dim) {
      raise(errc::invalid_config,
            "category '" + name + "' range [" + std::to_string(slice.begin) +
                ", " + std::to_string(slice.end) + ") out of bounds for dim " +
                std::to_string(dim));
    }
    slices.emplace(name, slice);
  }
  // Overlap check over the sorted starts.
  int prev_end = -1;
  std::string prev_name;
  std::vector<std::pair<int, std::string>> by_start;
  for (const auto& [name, slice] : slices) by_start.emplace_back(slice.begin, name);
  std::sort(by_start.begin(), by_start.end());
  for (const auto& [start, name] : by_start) {
    if (start < prev_end) {
      raise(errc::invalid_config,
            "categories '" + prev_name + "' and '" + name + "' overlap");
    }
    prev_end = slices.at(name).end;
    prev_name = name;
  }
  table.category_slices = std::move(slices);
}

std::vector<std::string> DescriptionCorpus::object_order() const {
  std::vector<std::string> order;
  std::unordered_set<std::string> seen;
  for (const auto& entry : entries) {
    if (seen.insert(entry.object_id).second) order.push_back(entry.object_id);
  }
  return order;
}

DescriptionCorpus load_descriptions(const std::filesystem::path& path,
                                    std::string_view language) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(errc::io_error, "cannot open descriptions file " + path.string());
  DescriptionCorpus corpus;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    chomp(line);
    if (line.empty()) continue;
    if (!valid_utf8(line)) {
      raise(errc::invalid_utf8, "line " + std::to_string(line_no) +
                                    " is not valid UTF-8");
    }
    const std::size_t tab = line.find('\t');
    if (tab == std::string::npos || tab == 0) {
      raise(errc::malformed_line,
            "line " + std::to_string(line_no) +
                ": expected object_id<TAB>description");
    }
    DescriptionEntry entry;
    entry.object_id = line.substr(0, tab);
    entry.language = std::string(language);
    entry.raw = line.substr(tab + 1);
    entry.tokens = tokenize(entry.raw, language);
    corpus.entries.push_back(std::move(entry));
  }
  return corpus;
}

const Concept* ConceptVocabulary::find(std::string_view token) const {
  const auto it = std::lower_bound(
      concepts.begin(), concepts.end(), token,
      [](const Concept& c, std::string_view t) { return c.token < t; });
  if (it == concepts.end() || it->token != token) return nullptr;
  return &*it;
}

ConceptVocabulary build_vocabulary(const DescriptionCorpus& corpus, int min_count,
                                   const std::set<std::string>& stopwords) {
  if (min_count < 1) raise(errc::invalid_config, "min_count must be >= 1");
  std::map<std::string, Concept> by_token;
  for (const auto& entry : corpus.entries) {
    for (const auto& token : entry.tokens) {
      auto& item = by_token[token];
      item.token = token;
      item.count += 1;
      item.positive_objects.insert(entry.object_id);
    }
  }
  ConceptVocabulary vocab;
  for (auto& [token, item] : by_token) {
    if (item.count >= min_count && stopwords.count(token) == 0) {
      vocab.concepts.push_back(std::move(item));
    }
  }
  return vocab;  // std::map iteration keeps tokens sorted
}

FoldAssignment split_folds(const std::set<std::string>& objects, int k,
                           std::uint64_t seed) {
  if (k < 2) raise(errc::invalid_config, "fold count must be >= 2");
  if (static_cast<int>(objects.size()) < k) {
    raise(errc::too_few_objects,
          std::to_string(objects.size()) + " objects cannot fill " +
              std::to_string(k) + " folds");
  }
  std::vector<std::string> order(objects.begin(), objects.end());
  Rng rng(seed);
  rng.shuffle(order);
  FoldAssignment folds;
  folds.k = k;
  for (std::size_t i = 0; i < order.size(); ++i) {
    folds.assignment.emplace(order[i], static_cast<int>(i % static_cast<std::size_t>(k)));
  }
  return folds;
}

std::vector<std::pair<std::string, std::string>> load_concept_categories(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) raise(errc::io_error, "cannot open concept-category map " + path.string());
  std::vector<std::pair<std::string, std::string>> pairs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    chomp(line);
    if (line.empty()) continue;
    const std::size_t tab = line.find('\t');
    if (tab == std::string::npos || tab == 0 || tab + 1 >= line.size()) {
      raise(errc::malformed_line,
            "line " + std::to_string(line_no) + ": expected concept<TAB>category");
    }
    pairs.emplace_back(line.substr(0, tab), line.substr(tab + 1));
  }
  return pairs;
}

}  // namespace udm
