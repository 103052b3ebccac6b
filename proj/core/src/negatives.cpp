#include "udm/negatives.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <unordered_map>

#include "udm/errors.hpp"
#include "udm/rng.hpp"

namespace udm {

namespace {

using Eigen::VectorXd;

double stable_sigmoid(double t) {
  if (t >= 0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

double softplus(double t) {
  if (t > 0) return t + std::log1p(std::exp(-t));
  return std::log1p(std::exp(t));
}

struct Document {
  std::string object_id;
  std::vector<int> tokens;  // vocabulary indices
};

// Cumulative unigram^0.75 table for negative sampling.
class NoiseSampler {
 public:
  explicit NoiseSampler(const std::vector<double>& counts) {
    cumulative_.reserve(counts.size());
    double acc = 0;
    for (const double c : counts) {
      acc += std::pow(c, 0.75);
      cumulative_.push_back(acc);
    }
    total_ = acc;
  }

  int draw(Rng& rng) const {
    const double u = rng.uniform() * total_;
    const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
    const auto idx = std::distance(cumulative_.begin(), it);
    return static_cast<int>(std::min<std::ptrdiff_t>(
        idx, static_cast<std::ptrdiff_t>(cumulative_.size()) - 1));
  }

 private:
  std::vector<double> cumulative_;
  double total_ = 0;
};

}  // namespace

void PvdmConfig::validate() const {
  if (dim < 1) raise(errc::invalid_config, "pvdm dim must be >= 1");
  if (window < 1) raise(errc::invalid_config, "pvdm window must be >= 1");
  if (negative_samples < 0) {
    raise(errc::invalid_config, "pvdm negative_samples must be >= 0");
  }
  if (epochs < 1) raise(errc::invalid_config, "pvdm epochs must be >= 1");
  if (!(learning_rate > 0)) raise(errc::invalid_config, "pvdm learning rate must be > 0");
}

ParagraphVectors train_pvdm(const DescriptionCorpus& corpus, const PvdmConfig& cfg) {
  cfg.validate();

  // One document per object: the concatenation of its descriptions in
  // corpus order. Vocabulary indices follow first appearance.
  std::vector<std::string> token_list;
  std::unordered_map<std::string, int> token_index;
  std::vector<double> token_count;
  std::vector<Document> docs;
  std::unordered_map<std::string, std::size_t> doc_index;
  for (const auto& entry : corpus.entries) {
    auto [it, inserted] = doc_index.try_emplace(entry.object_id, docs.size());
    if (inserted) docs.push_back({entry.object_id, {}});
    auto& doc = docs[it->second];
    for (const auto& token : entry.tokens) {
      auto [tok_it, tok_new] = token_index.try_emplace(
          token, static_cast<int>(token_list.size()));
      if (tok_new) {
        token_list.push_back(token);
        token_count.push_back(0);
      }
      token_count[static_cast<std::size_t>(tok_it->second)] += 1;
      doc.tokens.push_back(tok_it->second);
    }
  }
  if (docs.size() < 2) {
    raise(errc::corpus_too_small,
          "need at least 2 object documents, got " + std::to_string(docs.size()));
  }

  const int m = cfg.dim;
  const int n_words = static_cast<int>(token_list.size());
  Rng rng(cfg.seed);

  // word2vec-style init: small uniform inputs, zero outputs.
  const auto init_vec = [&](VectorXd& v) {
    v.resize(m);
    for (int i = 0; i < m; ++i) v[i] = rng.uniform(-0.5 / m, 0.5 / m);
  };
  std::vector<VectorXd> doc_vecs(docs.size());
  for (auto& v : doc_vecs) init_vec(v);
  std::vector<VectorXd> word_in(static_cast<std::size_t>(n_words));
  for (auto& v : word_in) init_vec(v);
  std::vector<VectorXd> word_out(static_cast<std::size_t>(n_words),
                                 VectorXd::Zero(m));

  NoiseSampler noise(token_count);

  long long total_positions = 0;
  for (const auto& doc : docs) total_positions += static_cast<long long>(doc.tokens.size());
  total_positions *= cfg.epochs;
  if (total_positions == 0) {
    raise(errc::corpus_too_small, "documents contain no tokens");
  }

  ParagraphVectors pv;
  pv.config = cfg;
  pv.epoch_loss.reserve(static_cast<std::size_t>(cfg.epochs));

  long long processed = 0;
  VectorXd hidden(m), grad_hidden(m);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double epoch_loss = 0;
    long long epoch_targets = 0;
    for (std::size_t di = 0; di < docs.size(); ++di) {
      const auto& tokens = docs[di].tokens;
      const int len = static_cast<int>(tokens.size());
      for (int t = 0; t < len; ++t) {
        const double lr =
            std::max(cfg.learning_rate *
                         (1.0 - static_cast<double>(processed) /
                                    static_cast<double>(total_positions)),
                     cfg.learning_rate * 1e-4);
        ++processed;

        // Input: average of the doc vector and the context word vectors.
        hidden = doc_vecs[di];
        int contributors = 1;
        const int lo = std::max(0, t - cfg.window);
        const int hi = std::min(len - 1, t + cfg.window);
        for (int c = lo; c <= hi; ++c) {
          if (c == t) continue;
          hidden += word_in[static_cast<std::size_t>(tokens[static_cast<std::size_t>(c)])];
          ++contributors;
        }
        hidden /= static_cast<double>(contributors);

        const int target = tokens[static_cast<std::size_t>(t)];
        grad_hidden.setZero();
        // Positive target plus neg_k noise draws.
        for (int s = 0; s <= cfg.negative_samples; ++s) {
          int word = target;
          double label = 1.0;
          if (s > 0) {
            if (n_words < 2) break;  // no distinct noise token exists
            do {
              word = noise.draw(rng);
            } while (word == target);
            label = 0.0;
          }
          auto& out = word_out[static_cast<std::size_t>(word)];
          const double score = hidden.dot(out);
          const double p = stable_sigmoid(score);
          epoch_loss += label > 0.5 ? softplus(-score) : softplus(score);
          ++epoch_targets;
          const double g = (p - label) * lr;
          grad_hidden += g * out;
          out -= g * hidden;
        }

        // The averaged input distributes its gradient evenly.
        grad_hidden /= static_cast<double>(contributors);
        doc_vecs[di] -= grad_hidden;
        for (int c = lo; c <= hi; ++c) {
          if (c == t) continue;
          word_in[static_cast<std::size_t>(tokens[static_cast<std::size_t>(c)])] -= grad_hidden;
        }
      }
    }
    pv.epoch_loss.push_back(epoch_targets > 0
                                ? epoch_loss / static_cast<double>(epoch_targets)
                                : 0.0);
  }

  for (std::size_t di = 0; di < docs.size(); ++di) {
    pv.doc_vectors.emplace(docs[di].object_id, doc_vecs[di]);
  }
  for (int wi = 0; wi < n_words; ++wi) {
    pv.word_vectors.emplace(token_list[static_cast<std::size_t>(wi)],
                            word_in[static_cast<std::size_t>(wi)]);
  }
  return pv;
}

double cosine(const VectorXd& a, const VectorXd& b) {
  if (a.size() != b.size()) {
    raise(errc::dimension_mismatch, "cosine of vectors with different lengths");
  }
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) {
    raise(errc::zero_vector, "cosine undefined for zero-norm vector");
  }
  return a.dot(b) / (na * nb);
}

NegativeSet negatives_all(const std::string& concept_token,
                          const ConceptVocabulary& vocab,
                          const std::set<std::string>& objects) {
  const Concept* entry = vocab.find(concept_token);
  if (entry == nullptr) {
    raise(errc::invalid_config, "concept '" + concept_token + "' not in vocabulary");
  }
  NegativeSet negatives;
  negatives.concept_token = concept_token;
  negatives.strategy = NegativeStrategy::all_nonpositive;
  for (const auto& object : objects) {
    if (entry->positive_objects.count(object) == 0) {
      negatives.object_ids.insert(object);
    }
  }
  if (negatives.object_ids.empty()) {
    raise(errc::no_negatives_available,
          "every object is a positive example of '" + concept_token + "'");
  }
  return negatives;
}

NegativeSet negatives_semantic(const std::string& concept_token,
                               const ConceptVocabulary& vocab,
                               const ParagraphVectors& pv, double ratio,
                               PositiveAggregate aggregate) {
  if (!(ratio > 0)) raise(errc::invalid_config, "negative ratio must be > 0");
  const Concept* entry = vocab.find(concept_token);
  if (entry == nullptr) {
    raise(errc::invalid_config, "concept '" + concept_token + "' not in vocabulary");
  }

  std::vector<const VectorXd*> positive_vecs;
  for (const auto& object : entry->positive_objects) {
    const auto it = pv.doc_vectors.find(object);
    if (it != pv.doc_vectors.end()) positive_vecs.push_back(&it->second);
  }

  std::vector<std::pair<double, std::string>> ranked;  // (similarity, object)
  VectorXd centroid;
  if (aggregate == PositiveAggregate::centroid && !positive_vecs.empty()) {
    centroid = VectorXd::Zero(positive_vecs.front()->size());
    for (const auto* v : positive_vecs) centroid += *v;
    centroid /= static_cast<double>(positive_vecs.size());
  }
  for (const auto& [object, vec] : pv.doc_vectors) {
    if (entry->positive_objects.count(object) != 0) continue;
    double similarity = -1.0;
    if (!positive_vecs.empty()) {
      if (aggregate == PositiveAggregate::max) {
        similarity = -2.0;
        for (const auto* p : positive_vecs) {
          similarity = std::max(similarity, cosine(vec, *p));
        }
      } else {
        similarity = cosine(vec, centroid);
      }
    }
    ranked.emplace_back(similarity, object);
  }
  if (ranked.empty()) {
    raise(errc::no_negatives_available,
          "no non-positive object has a doc vector for '" + concept_token + "'");
  }

  // Most distant first; ties broken lexicographically.
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first < b.first;
    return a.second < b.second;
  });
  const std::size_t positives = entry->positive_objects.size();
  std::size_t take = static_cast<std::size_t>(
      std::ceil(ratio * static_cast<double>(positives)));
  take = std::max<std::size_t>(take, 1);
  take = std::min(take, ranked.size());

  NegativeSet negatives;
  negatives.concept_token = concept_token;
  negatives.strategy = NegativeStrategy::semantic_distant;
  for (std::size_t i = 0; i < take; ++i) {
    negatives.object_ids.insert(ranked[i].second);
  }
  return negatives;
}

void write_doc_vectors(const ParagraphVectors& pv,
                       const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) raise(errc::io_error, "cannot write doc vectors to " + path.string());
  out << "object_id";
  for (int i = 0; i < pv.config.dim; ++i) out << ",v" << i;
  out << "\n";
  out.precision(17);
  for (const auto& [object, vec] : pv.doc_vectors) {
    out << object;
    for (Eigen::Index i = 0; i < vec.size(); ++i) out << "," << vec[i];
    out << "\n";
  }
  if (!out) raise(errc::io_error, "write failed for " + path.string());
}

}  // namespace udm
