#include "udm/evaluate.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <mutex>
#include <numeric>
#include <thread>
#include <tuple>

#include "udm/errors.hpp"
#include "udm/log.hpp"

namespace udm {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

std::string fmt4(double value) {
  char buffer[32];
  std::snprintf(buffer, sizeof(buffer), "%.4f", value);
  return buffer;
}

void run_parallel(int jobs, int n, const std::function<void(int)>& fn) {
  jobs = std::clamp(jobs, 1, n);
  if (jobs <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(jobs));
  for (int t = 0; t < jobs; ++t) {
    pool.emplace_back([&]() {
      while (true) {
        const int i = next.fetch_add(1);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& worker : pool) worker.join();
  if (first_error) std::rethrow_exception(first_error);
}

/// One classifier to train and score: a concept, plus a category when the
/// method trains per (concept, category) pair.
struct EvalUnit {
  std::string concept_token;
  std::string category;  // reporting tag, or the slice for predefined
  bool pair_mode = false;

  std::string key() const {
    return pair_mode ? concept_token + "@" + category : concept_token;
  }
};

struct FoldPartition {
  std::vector<int> train_instances;    // every training-fold instance
  std::vector<int> labeled_instances;  // restricted to labeled objects
  std::vector<int> test_instances;
  std::set<std::string> train_objects;
  std::set<std::string> labeled_objects;
};

struct FoldOutcome {
  std::map<std::string, double> unit_f1;  // unit key -> trial-averaged F1
  std::vector<TrialCounts> counts;
  std::vector<SkippedConcept> skipped;
  std::map<std::string, std::map<std::string, double>> unit_object_proba;
  std::vector<AuditRecord> audit;
};

std::set<std::string> instance_ids(const FeatureTable& table,
                                   const std::vector<int>& indices) {
  std::set<std::string> ids;
  for (const int i : indices) {
    ids.insert(table.instances[static_cast<std::size_t>(i)].instance_id);
  }
  return ids;
}

nlohmann::json protocol_echo(const EvalProtocol& p) {
  return {
      {"k", p.k},           {"trials", p.trials},
      {"pos_lo", p.pos_lo}, {"pos_hi", p.pos_hi},
      {"neg_lo", p.neg_lo}, {"neg_hi", p.neg_hi},
      {"threshold", p.threshold},
      {"seed", p.seed},
  };
}

}  // namespace

void EvalProtocol::validate() const {
  if (k < 2) raise(errc::invalid_config, "fold count must be >= 2");
  if (trials < 1) raise(errc::invalid_config, "trials must be >= 1");
  if (pos_lo < 1 || pos_hi < pos_lo) {
    raise(errc::invalid_config, "positive trial range is invalid");
  }
  if (neg_lo < 1 || neg_hi < neg_lo) {
    raise(errc::invalid_config, "negative trial range is invalid");
  }
  if (!(threshold > 0.0 && threshold < 1.0)) {
    raise(errc::invalid_config, "threshold must lie in (0, 1)");
  }
}

std::string method_name(Method method) {
  switch (method) {
    case Method::udm: return "udm";
    case Method::category_free_lr: return "category_free_lr";
    case Method::predefined_category: return "predefined_category";
  }
  return "udm";
}

Method parse_method(const std::string& name) {
  if (name == "udm") return Method::udm;
  if (name == "category_free_lr") return Method::category_free_lr;
  if (name == "predefined_category") return Method::predefined_category;
  raise(errc::invalid_config, "unknown method '" + name + "'");
}

double f1(long tp, long fp, long fn) {
  const long denom = 2 * tp + fp + fn;
  if (denom == 0) return 0.0;
  return 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
}

std::vector<double> evaluate_concept(const ConceptClassifier& clf,
                                     const std::vector<LabeledVector>& test_fold,
                                     const EvalProtocol& protocol, Rng& rng,
                                     std::vector<TrialCounts>* counts) {
  std::vector<int> positives, negatives;
  for (int i = 0; i < static_cast<int>(test_fold.size()); ++i) {
    (test_fold[static_cast<std::size_t>(i)].positive ? positives : negatives)
        .push_back(i);
  }
  if (static_cast<int>(positives.size()) < protocol.pos_lo ||
      static_cast<int>(negatives.size()) < protocol.neg_lo) {
    raise(errc::insufficient_test_instances,
          "test fold has " + std::to_string(positives.size()) + " positives / " +
              std::to_string(negatives.size()) + " negatives for '" +
              clf.concept_token + "'");
  }

  // Partial Fisher-Yates on a scratch copy: the first `take` entries are a
  // uniform sample without replacement.
  const auto sample = [&rng](std::vector<int> pool, int take) {
    for (int i = 0; i < take; ++i) {
      const auto j = static_cast<std::size_t>(
          rng.uniform_int(i, static_cast<std::int64_t>(pool.size()) - 1));
      std::swap(pool[static_cast<std::size_t>(i)], pool[j]);
    }
    pool.resize(static_cast<std::size_t>(take));
    return pool;
  };

  std::vector<double> trial_f1;
  trial_f1.reserve(static_cast<std::size_t>(protocol.trials));
  for (int trial = 0; trial < protocol.trials; ++trial) {
    const int want_pos =
        static_cast<int>(rng.uniform_int(protocol.pos_lo, protocol.pos_hi));
    const int want_neg =
        static_cast<int>(rng.uniform_int(protocol.neg_lo, protocol.neg_hi));
    const int n_pos = std::min<int>(want_pos, static_cast<int>(positives.size()));
    const int n_neg = std::min<int>(want_neg, static_cast<int>(negatives.size()));

    long tp = 0, fp = 0, fn = 0;
    for (const int idx : sample(positives, n_pos)) {
      const auto& item = test_fold[static_cast<std::size_t>(idx)];
      if (predict(clf, item.x, protocol.threshold)) {
        ++tp;
      } else {
        ++fn;
      }
    }
    for (const int idx : sample(negatives, n_neg)) {
      const auto& item = test_fold[static_cast<std::size_t>(idx)];
      if (predict(clf, item.x, protocol.threshold)) ++fp;
    }
    trial_f1.push_back(f1(tp, fp, fn));
    if (counts != nullptr) {
      TrialCounts entry;
      entry.concept_token = clf.concept_token;
      entry.trial = trial;
      entry.tp = tp;
      entry.fp = fp;
      entry.fn = fn;
      counts->push_back(std::move(entry));
    }
  }
  return trial_f1;
}

namespace {

EvaluationReport run_pipeline(Method method, const PipelineInputs& in,
                              const RunOptions& opt) {
  const EvalProtocol& protocol = opt.protocol;
  protocol.validate();
  const FeatureTable& table = in.features;
  if (table.instances.empty()) {
    raise(errc::empty_training_set, "feature table is empty");
  }
  const int dim = table.dim();

  // Reporting tags: concept -> sorted unique categories joined with '|'.
  std::map<std::string, std::string> tags;
  {
    std::map<std::string, std::set<std::string>> raw_tags;
    for (const auto& [concept_token, category] : opt.concept_categories) {
      raw_tags[concept_token].insert(category);
    }
    for (const auto& [concept_token, cats] : raw_tags) {
      std::string joined;
      for (const auto& c : cats) {
        if (!joined.empty()) joined += '|';
        joined += c;
      }
      tags.emplace(concept_token, std::move(joined));
    }
  }

  std::vector<EvalUnit> units;
  if (method == Method::predefined_category) {
    if (!table.category_slices.has_value()) {
      raise(errc::missing_category_manifest,
            "predefined_category needs a category manifest");
    }
    if (opt.concept_categories.empty()) {
      raise(errc::invalid_config,
            "predefined_category needs a concept-category map");
    }
    std::set<std::pair<std::string, std::string>> seen;
    for (const auto& [concept_token, category] : opt.concept_categories) {
      if (table.category_slices->count(category) == 0) {
        raise(errc::unknown_category,
              "category '" + category + "' is not in the manifest");
      }
      if (!in.vocab.contains(concept_token)) {
        log_info("skipping mapped concept '", concept_token,
                 "' absent from the vocabulary");
        continue;
      }
      if (seen.emplace(concept_token, category).second) {
        units.push_back({concept_token, category, true});
      }
    }
  } else {
    for (const auto& concept_token : in.vocab.concepts) {
      const auto tag = tags.find(concept_token.token);
      units.push_back(
          {concept_token.token, tag == tags.end() ? "" : tag->second, false});
    }
  }
  std::sort(units.begin(), units.end(), [](const EvalUnit& a, const EvalUnit& b) {
    if (a.concept_token != b.concept_token) return a.concept_token < b.concept_token;
    return a.category < b.category;
  });

  const auto objects = table.object_ids();
  const FoldAssignment folds =
      split_folds(objects, protocol.k, Rng::mix(protocol.seed, "folds"));

  if (opt.labeled_object_restriction.has_value() &&
      static_cast<int>(opt.labeled_object_restriction->size()) != protocol.k) {
    raise(errc::invalid_config, "labeled restriction must cover every fold");
  }

  std::vector<FoldPartition> partitions(static_cast<std::size_t>(protocol.k));
  for (int idx = 0; idx < static_cast<int>(table.instances.size()); ++idx) {
    const auto& inst = table.instances[static_cast<std::size_t>(idx)];
    const int fold = folds.fold_of(inst.object_id);
    for (int f = 0; f < protocol.k; ++f) {
      auto& part = partitions[static_cast<std::size_t>(f)];
      if (f == fold) {
        part.test_instances.push_back(idx);
        continue;
      }
      part.train_instances.push_back(idx);
      part.train_objects.insert(inst.object_id);
      if (opt.labeled_object_restriction.has_value() &&
          opt.labeled_object_restriction->at(static_cast<std::size_t>(f))
                  .count(inst.object_id) == 0) {
        continue;
      }
      part.labeled_instances.push_back(idx);
      part.labeled_objects.insert(inst.object_id);
    }
  }

  std::vector<FoldOutcome> outcomes(static_cast<std::size_t>(protocol.k));
  run_parallel(opt.jobs, protocol.k, [&](int f) {
    const auto& part = partitions[static_cast<std::size_t>(f)];
    auto& out = outcomes[static_cast<std::size_t>(f)];
    out.audit.push_back({f, "test", instance_ids(table, part.test_instances)});
    if (part.train_instances.empty()) {
      raise(errc::empty_training_set,
            "fold " + std::to_string(f) + " has no training instances");
    }

    // Per-instance input vectors for this fold's model space.
    std::vector<VectorXd> vec(table.instances.size());
    if (method == Method::udm) {
      MatrixXd x_train(dim, static_cast<Eigen::Index>(part.train_instances.size()));
      for (std::size_t j = 0; j < part.train_instances.size(); ++j) {
        x_train.col(static_cast<Eigen::Index>(j)) =
            table.instances[static_cast<std::size_t>(part.train_instances[j])].x;
      }
      VaeConfig vae_cfg = opt.vae;
      vae_cfg.input_dim = dim;
      vae_cfg.seed = Rng::mix(protocol.seed, "vae", static_cast<std::uint64_t>(f));
      const auto trained = train_vae(x_train, vae_cfg);
      const auto train_ids = instance_ids(table, part.train_instances);
      out.audit.push_back({f, "vae_train", train_ids});
      out.audit.push_back({f, "standardization", train_ids});
      for (const auto& indices : {part.train_instances, part.test_instances}) {
        for (const int idx : indices) {
          vec[static_cast<std::size_t>(idx)] =
              embed(trained.model, table.instances[static_cast<std::size_t>(idx)].x);
        }
      }
    } else {
      for (const auto& indices : {part.train_instances, part.test_instances}) {
        for (const int idx : indices) {
          vec[static_cast<std::size_t>(idx)] =
              table.instances[static_cast<std::size_t>(idx)].x;
        }
      }
    }

    ParagraphVectors pv;
    if (opt.negatives == NegativeStrategy::semantic_distant) {
      DescriptionCorpus train_corpus;
      for (const auto& entry : in.corpus.entries) {
        if (part.labeled_objects.count(entry.object_id) != 0) {
          train_corpus.entries.push_back(entry);
        }
      }
      PvdmConfig pvdm_cfg = opt.pvdm;
      pvdm_cfg.seed = Rng::mix(protocol.seed, "pvdm", static_cast<std::uint64_t>(f));
      pv = train_pvdm(train_corpus, pvdm_cfg);
      out.audit.push_back({f, "pvdm_train", instance_ids(table, part.labeled_instances)});
    }

    AuditRecord classifier_audit{f, "classifier_train", {}};
    for (const auto& unit : units) {
      const Concept* vocab_entry = in.vocab.find(unit.concept_token);
      const auto& positive_objects = vocab_entry->positive_objects;

      const auto slice_of = [&](const VectorXd& full) -> VectorXd {
        if (!unit.pair_mode) return full;
        const auto& slice = table.category_slices->at(unit.category);
        return full.segment(slice.begin, slice.width());
      };

      std::vector<int> train_pos, train_neg;
      for (const int idx : part.labeled_instances) {
        if (positive_objects.count(
                table.instances[static_cast<std::size_t>(idx)].object_id) != 0) {
          train_pos.push_back(idx);
        }
      }
      if (train_pos.empty()) {
        const bool starved_by_restriction =
            opt.labeled_object_restriction.has_value() &&
            std::any_of(positive_objects.begin(), positive_objects.end(),
                        [&](const std::string& object) {
                          return part.train_objects.count(object) != 0;
                        });
        out.skipped.push_back({unit.concept_token, unit.category, f,
                               starved_by_restriction ? "FractionTooSmall"
                                                      : "NoTrainingPositives"});
        continue;
      }

      std::set<std::string> negative_objects;
      try {
        if (opt.negatives == NegativeStrategy::all_nonpositive) {
          negative_objects =
              negatives_all(unit.concept_token, in.vocab, part.labeled_objects).object_ids;
        } else {
          negative_objects = negatives_semantic(unit.concept_token, in.vocab, pv,
                                                opt.negative_ratio, opt.aggregate)
                                 .object_ids;
        }
      } catch (const Error& e) {
        if (e.code() != errc::no_negatives_available) throw;
        out.skipped.push_back({unit.concept_token, unit.category, f, "NoNegativesAvailable"});
        continue;
      }
      for (const int idx : part.labeled_instances) {
        if (negative_objects.count(
                table.instances[static_cast<std::size_t>(idx)].object_id) != 0) {
          train_neg.push_back(idx);
        }
      }
      if (train_neg.empty()) {
        out.skipped.push_back({unit.concept_token, unit.category, f, "NoTrainingNegatives"});
        continue;
      }

      TrainSet ts;
      ts.positives.reserve(train_pos.size());
      ts.negatives.reserve(train_neg.size());
      for (const int idx : train_pos) {
        ts.positives.push_back(slice_of(vec[static_cast<std::size_t>(idx)]));
      }
      for (const int idx : train_neg) {
        ts.negatives.push_back(slice_of(vec[static_cast<std::size_t>(idx)]));
      }

      ConceptClassifier clf = train_concept(
          ts, opt.clf_l2, opt.clf_epochs, opt.clf_lr,
          Rng::mix(protocol.seed, "clf:" + unit.key(), static_cast<std::uint64_t>(f)));
      clf.concept_token = unit.concept_token;
      if (method == Method::udm) {
        clf.input_kind = {InputKind::latent, ""};
      } else if (method == Method::category_free_lr) {
        clf.input_kind = {InputKind::raw, ""};
      } else {
        clf.input_kind = {InputKind::raw_slice, unit.category};
      }
      for (const int idx : train_pos) {
        classifier_audit.instance_ids.insert(
            table.instances[static_cast<std::size_t>(idx)].instance_id);
      }
      for (const int idx : train_neg) {
        classifier_audit.instance_ids.insert(
            table.instances[static_cast<std::size_t>(idx)].instance_id);
      }

      std::vector<LabeledVector> test_fold;
      test_fold.reserve(part.test_instances.size());
      for (const int idx : part.test_instances) {
        const auto& inst = table.instances[static_cast<std::size_t>(idx)];
        test_fold.push_back({inst.instance_id, inst.object_id,
                             slice_of(vec[static_cast<std::size_t>(idx)]),
                             positive_objects.count(inst.object_id) != 0});
      }

      Rng eval_rng(
          Rng::mix(protocol.seed, "eval:" + unit.key(), static_cast<std::uint64_t>(f)));
      std::vector<TrialCounts> unit_counts;
      std::vector<double> trial_f1;
      try {
        trial_f1 = evaluate_concept(clf, test_fold, protocol, eval_rng, &unit_counts);
      } catch (const Error& e) {
        if (e.code() != errc::insufficient_test_instances) throw;
        out.skipped.push_back(
            {unit.concept_token, unit.category, f, "InsufficientTestInstances"});
        continue;
      }
      for (auto& entry : unit_counts) {
        entry.category = unit.category;
        entry.fold = f;
      }
      out.counts.insert(out.counts.end(), unit_counts.begin(), unit_counts.end());
      out.unit_f1[unit.key()] =
          std::accumulate(trial_f1.begin(), trial_f1.end(), 0.0) /
          static_cast<double>(trial_f1.size());

      // Fig-6-style probabilities: each object's mean score in the fold
      // where it was held out.
      auto& per_object = out.unit_object_proba[unit.key()];
      std::map<std::string, std::pair<double, int>> acc;
      for (const auto& item : test_fold) {
        auto& slot = acc[item.object_id];
        slot.first += predict_proba(clf, item.x);
        slot.second += 1;
      }
      for (const auto& [object, sum_count] : acc) {
        per_object[object] = sum_count.first / sum_count.second;
      }
    }
    out.audit.push_back(std::move(classifier_audit));
  });

  // Deterministic reduction over folds.
  EvaluationReport report;
  report.method = method;
  report.folds = protocol.k;
  report.matrix_objects.assign(objects.begin(), objects.end());

  std::map<std::string, long> support;
  for (const auto& unit : units) {
    if (support.count(unit.concept_token) != 0) continue;
    const Concept* vocab_entry = in.vocab.find(unit.concept_token);
    long count = 0;
    for (const auto& inst : table.instances) {
      if (vocab_entry->positive_objects.count(inst.object_id) != 0) ++count;
    }
    support[unit.concept_token] = count;
  }

  long pooled_tp = 0, pooled_fp = 0, pooled_fn = 0;
  for (const auto& unit : units) {
    ConceptResult result;
    result.concept_token = unit.concept_token;
    result.category = unit.category;
    result.per_fold_f1.assign(static_cast<std::size_t>(protocol.k), 0.0);
    result.fold_evaluated.assign(static_cast<std::size_t>(protocol.k), false);
    result.support = support[unit.concept_token];
    int evaluated = 0;
    double sum = 0;
    for (int f = 0; f < protocol.k; ++f) {
      const auto& out = outcomes[static_cast<std::size_t>(f)];
      const auto it = out.unit_f1.find(unit.key());
      if (it == out.unit_f1.end()) continue;
      result.per_fold_f1[static_cast<std::size_t>(f)] = it->second;
      result.fold_evaluated[static_cast<std::size_t>(f)] = true;
      sum += it->second;
      ++evaluated;
    }
    if (evaluated == 0) continue;  // lives only in the skipped list
    result.mean_f1 = sum / evaluated;
    report.concept_results.push_back(std::move(result));

    auto& row = report.probability_matrix[unit.key()];
    for (int f = 0; f < protocol.k; ++f) {
      const auto& out = outcomes[static_cast<std::size_t>(f)];
      const auto it = out.unit_object_proba.find(unit.key());
      if (it == out.unit_object_proba.end()) continue;
      for (const auto& [object, proba] : it->second) row[object] = proba;
    }
  }
  for (int f = 0; f < protocol.k; ++f) {
    auto& out = outcomes[static_cast<std::size_t>(f)];
    report.trial_counts.insert(report.trial_counts.end(), out.counts.begin(),
                               out.counts.end());
    report.skipped.insert(report.skipped.end(), out.skipped.begin(),
                          out.skipped.end());
    report.audit_roles.insert(report.audit_roles.end(), out.audit.begin(),
                              out.audit.end());
  }
  std::sort(report.skipped.begin(), report.skipped.end(),
            [](const SkippedConcept& a, const SkippedConcept& b) {
              return std::tie(a.concept_token, a.category, a.fold) <
                     std::tie(b.concept_token, b.category, b.fold);
            });
  std::sort(report.audit_roles.begin(), report.audit_roles.end(),
            [](const AuditRecord& a, const AuditRecord& b) {
              return std::tie(a.fold, a.role) < std::tie(b.fold, b.role);
            });

  for (const auto& entry : report.trial_counts) {
    pooled_tp += entry.tp;
    pooled_fp += entry.fp;
    pooled_fn += entry.fn;
  }
  report.micro_f1 = f1(pooled_tp, pooled_fp, pooled_fn);
  if (!report.concept_results.empty()) {
    double sum = 0, lo = 1.0, hi = 0.0;
    for (const auto& result : report.concept_results) {
      sum += result.mean_f1;
      lo = std::min(lo, result.mean_f1);
      hi = std::max(hi, result.mean_f1);
    }
    report.macro_f1 = sum / static_cast<double>(report.concept_results.size());
    report.mean_f1 = report.macro_f1;
    report.min_f1 = lo;
    report.max_f1 = hi;
  }

  // Leakage audit: no training-role instance may sit in its fold's test set.
  std::map<int, const std::set<std::string>*> test_sets;
  for (const auto& record : report.audit_roles) {
    if (record.role == "test") test_sets[record.fold] = &record.instance_ids;
  }
  for (const auto& record : report.audit_roles) {
    if (record.role == "test") continue;
    const auto* test = test_sets.at(record.fold);
    for (const auto& id : record.instance_ids) {
      if (test->count(id) != 0) {
        report.audit_violations.push_back({record.fold, record.role, id});
      }
    }
  }

  report.config_echo = {
      {"method", method_name(method)},
      {"protocol", protocol_echo(protocol)},
      {"negatives", opt.negatives == NegativeStrategy::all_nonpositive
                        ? "all_nonpositive"
                        : "semantic_distant"},
      {"negative_ratio", opt.negative_ratio},
      {"aggregate",
       opt.aggregate == PositiveAggregate::max ? "max" : "centroid"},
      {"classifier",
       {{"l2", opt.clf_l2}, {"epochs", opt.clf_epochs}, {"lr", opt.clf_lr}}},
      {"jobs", opt.jobs},
  };
  if (method == Method::udm) {
    report.config_echo["vae"] = {
        {"hidden_dim", opt.vae.hidden_dim},
        {"latent_dim", opt.vae.latent_dim},
        {"learning_rate", opt.vae.learning_rate},
        {"batch_size", opt.vae.batch_size},
        {"epochs", opt.vae.epochs},
        {"standardize", opt.vae.standardize},
        {"embedding", opt.vae.embedding == EmbeddingKind::mu_only
                          ? "mu_only"
                          : "mu_and_var"},
        {"second_moment", opt.vae.second_moment == SecondMomentKind::stddev
                              ? "stddev"
                              : "var"},
    };
  }
  if (opt.negatives == NegativeStrategy::semantic_distant) {
    report.config_echo["pvdm"] = {
        {"dim", opt.pvdm.dim},
        {"window", opt.pvdm.window},
        {"negative_samples", opt.pvdm.negative_samples},
        {"epochs", opt.pvdm.epochs},
        {"learning_rate", opt.pvdm.learning_rate},
    };
  }
  return report;
}

}  // namespace

EvaluationReport run_udm(const PipelineInputs& in, const RunOptions& opt) {
  return run_pipeline(Method::udm, in, opt);
}

EvaluationReport run_category_free_lr(const PipelineInputs& in,
                                      const RunOptions& opt) {
  return run_pipeline(Method::category_free_lr, in, opt);
}

EvaluationReport run_predefined_category(const PipelineInputs& in,
                                         const RunOptions& opt) {
  return run_pipeline(Method::predefined_category, in, opt);
}

AblationReport ablate(Method method, const std::vector<double>& fractions,
                      const PipelineInputs& in, const RunOptions& opt) {
  for (const double fraction : fractions) {
    if (!(fraction > 0.0 && fraction <= 1.0)) {
      raise(errc::invalid_config,
            "fraction " + std::to_string(fraction) + " outside (0, 1]");
    }
  }
  const EvalProtocol& protocol = opt.protocol;
  protocol.validate();

  const auto objects = in.features.object_ids();
  const FoldAssignment folds =
      split_folds(objects, protocol.k, Rng::mix(protocol.seed, "folds"));

  // A fixed shuffle per fold; fractions take nested prefixes of it so the
  // subsets grow monotonically and 1.0 keeps everything.
  std::vector<std::vector<std::string>> shuffled(
      static_cast<std::size_t>(protocol.k));
  for (int f = 0; f < protocol.k; ++f) {
    auto& order = shuffled[static_cast<std::size_t>(f)];
    for (const auto& object : objects) {
      if (folds.fold_of(object) != f) order.push_back(object);
    }
    Rng rng(Rng::mix(protocol.seed, "ablate", static_cast<std::uint64_t>(f)));
    rng.shuffle(order);
  }

  AblationReport ablation;
  ablation.method = method;
  for (const double fraction : fractions) {
    RunOptions run_opt = opt;
    std::vector<std::set<std::string>> restriction(
        static_cast<std::size_t>(protocol.k));
    for (int f = 0; f < protocol.k; ++f) {
      const auto& order = shuffled[static_cast<std::size_t>(f)];
      const auto keep = static_cast<std::size_t>(
          std::ceil(fraction * static_cast<double>(order.size())));
      for (std::size_t i = 0; i < std::min(keep, order.size()); ++i) {
        restriction[static_cast<std::size_t>(f)].insert(order[i]);
      }
    }
    run_opt.labeled_object_restriction = std::move(restriction);
    EvaluationReport report = run_pipeline(method, in, run_opt);
    ablation.fractions.push_back(fraction);
    ablation.macro_f1.push_back(report.macro_f1);
    ablation.micro_f1.push_back(report.micro_f1);
    ablation.evaluated_concepts.push_back(
        static_cast<int>(report.concept_results.size()));
    ablation.skipped_entries.push_back(static_cast<int>(report.skipped.size()));
    report.config_echo["training_fraction"] = fraction;
    ablation.reports.push_back(std::move(report));
  }
  return ablation;
}

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) raise(errc::io_error, "cannot write " + path.string());
  return out;
}

}  // namespace

void emit_report(const EvaluationReport& report,
                 const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (!std::filesystem::is_directory(out_dir)) {
    raise(errc::io_error, "cannot create report directory " + out_dir.string());
  }

  {
    auto out = open_out(out_dir / "summary.csv");
    out << "metric,value\n";
    out << "method," << method_name(report.method) << "\n";
    out << "concepts_evaluated," << report.concept_results.size() << "\n";
    out << "skip_entries," << report.skipped.size() << "\n";
    out << "min_f1," << fmt4(report.min_f1) << "\n";
    out << "mean_f1," << fmt4(report.mean_f1) << "\n";
    out << "max_f1," << fmt4(report.max_f1) << "\n";
    out << "macro_f1," << fmt4(report.macro_f1) << "\n";
    out << "micro_f1," << fmt4(report.micro_f1) << "\n";
  }

  {
    auto out = open_out(out_dir / "per_concept.csv");
    out << "concept,category,support";
    for (int f = 0; f < report.folds; ++f) out << ",fold_" << f;
    out << ",mean_f1\n";
    for (const auto& result : report.concept_results) {
      out << result.concept_token << "," << result.category << "," << result.support;
      for (int f = 0; f < report.folds; ++f) {
        out << ",";
        if (result.fold_evaluated[static_cast<std::size_t>(f)]) {
          out << fmt4(result.per_fold_f1[static_cast<std::size_t>(f)]);
        }
      }
      out << "," << fmt4(result.mean_f1) << "\n";
    }
  }

  {
    auto out = open_out(out_dir / "probability_matrix.csv");
    out << "concept";
    for (const auto& object : report.matrix_objects) out << "," << object;
    out << "\n";
    for (const auto& [key, row] : report.probability_matrix) {
      out << key;
      for (const auto& object : report.matrix_objects) {
        out << ",";
        const auto it = row.find(object);
        if (it != row.end()) out << fmt4(it->second);
      }
      out << "\n";
    }
  }

  {
    auto out = open_out(out_dir / "confusion.csv");
    out << "concept,category,fold,trial,tp,fp,fn\n";
    for (const auto& entry : report.trial_counts) {
      out << entry.concept_token << "," << entry.category << "," << entry.fold << ","
          << entry.trial << "," << entry.tp << "," << entry.fp << ","
          << entry.fn << "\n";
    }
  }

  {
    auto out = open_out(out_dir / "skipped.csv");
    out << "concept,category,fold,reason\n";
    for (const auto& entry : report.skipped) {
      out << entry.concept_token << "," << entry.category << "," << entry.fold << ","
          << entry.reason << "\n";
    }
  }

  {
    auto out = open_out(out_dir / "audit.csv");
    out << "fold,role,instances,test_overlap\n";
    std::map<std::pair<int, std::string>, long> violation_count;
    for (const auto& violation : report.audit_violations) {
      ++violation_count[{violation.fold, violation.role}];
    }
    for (const auto& record : report.audit_roles) {
      long overlaps = 0;
      const auto it = violation_count.find({record.fold, record.role});
      if (it != violation_count.end()) overlaps = it->second;
      out << record.fold << "," << record.role << "," << record.instance_ids.size()
          << "," << overlaps << "\n";
    }
  }

  bool any_category = false;
  for (const auto& result : report.concept_results) {
    if (!result.category.empty()) any_category = true;
  }
  if (any_category) {
    std::map<std::string, std::pair<double, int>> by_category;
    for (const auto& result : report.concept_results) {
      if (result.category.empty()) continue;
      auto& slot = by_category[result.category];
      slot.first += result.mean_f1;
      slot.second += 1;
    }
    auto out = open_out(out_dir / "category_summary.csv");
    out << "category,mean_f1,concepts\n";
    for (const auto& [category, slot] : by_category) {
      out << category << "," << fmt4(slot.first / slot.second) << ","
          << slot.second << "\n";
    }
  }
}

void emit_ablation(const AblationReport& report,
                   const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (!std::filesystem::is_directory(out_dir)) {
    raise(errc::io_error, "cannot create report directory " + out_dir.string());
  }
  {
    auto out = open_out(out_dir / "ablation.csv");
    for (std::size_t i = 0; i < report.fractions.size(); ++i) {
      if (i > 0) out << ",";
      out << fmt4(report.fractions[i]);
    }
    out << "\n";
    for (std::size_t i = 0; i < report.macro_f1.size(); ++i) {
      if (i > 0) out << ",";
      out << fmt4(report.macro_f1[i]);
    }
    out << "\n";
  }
  {
    auto out = open_out(out_dir / "ablation_detail.csv");
    out << "fraction,macro_f1,micro_f1,concepts_evaluated,skip_entries\n";
    for (std::size_t i = 0; i < report.fractions.size(); ++i) {
      out << fmt4(report.fractions[i]) << "," << fmt4(report.macro_f1[i]) << ","
          << fmt4(report.micro_f1[i]) << "," << report.evaluated_concepts[i]
          << "," << report.skipped_entries[i] << "\n";
    }
  }
  for (std::size_t i = 0; i < report.reports.size(); ++i) {
    emit_report(report.reports[i],
                out_dir / ("fraction_" + fmt4(report.fractions[i])));
  }
}

}  // namespace udm
