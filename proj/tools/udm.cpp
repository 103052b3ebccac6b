// Command-line front end: synth, train-vae, embed, train-concepts,
// evaluate, ablate. Every command is deterministic given --seed.
// Exit codes: 0 success, 1 internal failure, 2 user/config error.

#include <CLI11.hpp>

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "udm/classifier.hpp"
#include "udm/dataset.hpp"
#include "udm/errors.hpp"
#include "udm/evaluate.hpp"
#include "udm/log.hpp"
#include "udm/negatives.hpp"
#include "udm/synth.hpp"
#include "udm/text.hpp"
#include "udm/vae.hpp"

namespace {

namespace fs = std::filesystem;

// JSON file support for --config. Command-line flags win over file values,
// which is CLI11's normal config precedence.
class JsonConfig : public CLI::Config {
 public:
  std::string to_config(const CLI::App* app, bool default_also, bool,
                        std::string) const override {
    nlohmann::json j = nlohmann::json::object();
    for (const CLI::Option* opt : app->get_options({})) {
      if (!opt->get_configurable() || opt->get_lnames().empty()) continue;
      const std::string name = opt->get_lnames()[0];
      if (opt->count() == 1) {
        j[name] = opt->results().at(0);
      } else if (opt->count() > 1) {
        j[name] = opt->results();
      } else if (default_also && !opt->get_default_str().empty()) {
        j[name] = opt->get_default_str();
      }
    }
    return j.dump(2);
  }

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    nlohmann::json j;
    try {
      input >> j;
    } catch (const nlohmann::json::exception& e) {
      throw CLI::FileError(std::string("config parse error: ") + e.what());
    }
    return collect(j, "", {});
  }

 private:
  std::vector<CLI::ConfigItem> collect(const nlohmann::json& j,
                                       const std::string& name,
                                       std::vector<std::string> parents) const {
    std::vector<CLI::ConfigItem> items;
    if (j.is_object()) {
      if (!name.empty()) parents.push_back(name);
      for (const auto& [key, value] : j.items()) {
        auto sub = collect(value, key, parents);
        items.insert(items.end(), sub.begin(), sub.end());
      }
    } else if (!name.empty()) {
      CLI::ConfigItem item;
      item.name = name;
      item.parents = std::move(parents);
      if (j.is_array()) {
        for (const auto& element : j) {
          item.inputs.push_back(element.is_string()
                                    ? element.get<std::string>()
                                    : element.dump());
        }
      } else if (j.is_string()) {
        item.inputs = {j.get<std::string>()};
      } else if (j.is_boolean()) {
        item.inputs = {j.get<bool>() ? "true" : "false"};
      } else {
        item.inputs = {j.dump()};
      }
      items.push_back(std::move(item));
    }
    return items;
  }
};

std::vector<double> parse_fraction_list(const std::string& text) {
  std::vector<double> fractions;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t comma = text.find(',', start);
    const std::string cell =
        text.substr(start, comma == std::string::npos ? comma : comma - start);
    double value = 0;
    const auto result =
        std::from_chars(cell.data(), cell.data() + cell.size(), value);
    if (result.ec != std::errc() || result.ptr != cell.data() + cell.size()) {
      udm::raise(udm::errc::invalid_config, "bad fraction '" + cell + "'");
    }
    fractions.push_back(value);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  if (fractions.empty()) {
    udm::raise(udm::errc::invalid_config, "empty fraction list");
  }
  return fractions;
}

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> values;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t comma = text.find(',', start);
    const std::string cell =
        text.substr(start, comma == std::string::npos ? comma : comma - start);
    int value = 0;
    const auto result =
        std::from_chars(cell.data(), cell.data() + cell.size(), value);
    if (result.ec != std::errc() || result.ptr != cell.data() + cell.size()) {
      udm::raise(udm::errc::invalid_config, "bad integer '" + cell + "'");
    }
    values.push_back(value);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  if (values.empty()) udm::raise(udm::errc::invalid_config, "empty list");
  return values;
}

std::string format_double(double value) {
  char buffer[40];
  const auto result = std::to_chars(buffer, buffer + sizeof(buffer), value,
                                    std::chars_format::general, 17);
  return std::string(buffer, result.ptr);
}

// ---------------------------------------------------------------------------
// Flag bundles shared by evaluate / ablate / train-concepts.

struct VocabFlags {
  std::string language = "en";
  int min_count = 2;
  std::string stopwords_path;

  std::set<std::string> stopwords() const {
    if (!stopwords_path.empty()) {
      return udm::load_stopwords(stopwords_path);
    }
    return udm::builtin_stopwords(language);
  }

  void attach(CLI::App* cmd) {
    cmd->add_option("--language", language,
                    "Language tag for descriptions (en|es|hi|...)")
        ->capture_default_str();
    cmd->add_option("--min-count", min_count,
                    "Minimum corpus frequency for a concept")
        ->capture_default_str();
    cmd->add_option("--stopwords", stopwords_path,
                    "Stopword file, one token per line (overrides built-ins)");
  }
};

struct NegativeFlags {
  std::string strategy = "all";
  double ratio = 1.5;
  std::string aggregate = "max";
  int pv_dim = 50;
  int pv_window = 5;
  int pv_negatives = 5;
  int pv_epochs = 100;
  double pv_lr = 0.025;

  udm::NegativeStrategy parsed_strategy() const {
    if (strategy == "all") return udm::NegativeStrategy::all_nonpositive;
    if (strategy == "semantic") return udm::NegativeStrategy::semantic_distant;
    udm::raise(udm::errc::invalid_config,
               "strategy must be 'all' or 'semantic', got '" + strategy + "'");
  }

  udm::PositiveAggregate parsed_aggregate() const {
    if (aggregate == "max") return udm::PositiveAggregate::max;
    if (aggregate == "centroid") return udm::PositiveAggregate::centroid;
    udm::raise(udm::errc::invalid_config,
               "aggregate must be 'max' or 'centroid', got '" + aggregate + "'");
  }

  udm::PvdmConfig pvdm() const {
    udm::PvdmConfig cfg;
    cfg.dim = pv_dim;
    cfg.window = pv_window;
    cfg.negative_samples = pv_negatives;
    cfg.epochs = pv_epochs;
    cfg.learning_rate = pv_lr;
    return cfg;
  }

  void attach(CLI::App* cmd) {
    cmd->add_option("--strategy", strategy,
                    "Negative sampling: all (non-positives) or semantic "
                    "(most distant paragraph vectors)")
        ->capture_default_str();
    cmd->add_option("--ratio", ratio, "Negative:positive object ratio "
                                      "(semantic strategy)")
        ->capture_default_str();
    cmd->add_option("--aggregate", aggregate,
                    "Similarity to the positive class: max or centroid")
        ->capture_default_str();
    cmd->add_option("--pv-dim", pv_dim, "Paragraph vector dimension")
        ->capture_default_str();
    cmd->add_option("--pv-window", pv_window, "PV-DM context window")
        ->capture_default_str();
    cmd->add_option("--pv-negatives", pv_negatives,
                    "Noise samples per position")
        ->capture_default_str();
    cmd->add_option("--pv-epochs", pv_epochs, "PV-DM epochs")
        ->capture_default_str();
    cmd->add_option("--pv-lr", pv_lr, "PV-DM initial learning rate")
        ->capture_default_str();
  }
};

struct ClassifierFlags {
  double l2 = 1e-3;
  int epochs = 500;
  double lr = 0.1;

  void attach(CLI::App* cmd) {
    cmd->add_option("--l2", l2, "L2 penalty for concept classifiers")
        ->capture_default_str();
    cmd->add_option("--clf-epochs", epochs, "Gradient-descent epochs per concept")
        ->capture_default_str();
    cmd->add_option("--clf-lr", lr, "Classifier learning rate")
        ->capture_default_str();
  }
};

struct VaeFlags {
  int hidden_dim = 500;
  std::string latent_dims = "50";
  double lr = 1e-3;
  int batch_size = 32;
  int epochs = 300;
  bool no_standardize = false;
  std::string embedding = "mu_and_var";
  std::string second_moment = "var";

  udm::VaeConfig config(int latent_dim) const {
    udm::VaeConfig cfg;
    cfg.hidden_dim = hidden_dim;
    cfg.latent_dim = latent_dim;
    cfg.learning_rate = lr;
    cfg.batch_size = batch_size;
    cfg.epochs = epochs;
    cfg.standardize = !no_standardize;
    if (embedding == "mu_only") {
      cfg.embedding = udm::EmbeddingKind::mu_only;
    } else if (embedding == "mu_and_var") {
      cfg.embedding = udm::EmbeddingKind::mu_and_var;
    } else {
      udm::raise(udm::errc::invalid_config,
                 "embedding must be mu_and_var or mu_only");
    }
    if (second_moment == "stddev") {
      cfg.second_moment = udm::SecondMomentKind::stddev;
    } else if (second_moment == "var") {
      cfg.second_moment = udm::SecondMomentKind::variance;
    } else {
      udm::raise(udm::errc::invalid_config, "second-moment must be var or stddev");
    }
    return cfg;
  }

  void attach(CLI::App* cmd) {
    cmd->add_option("--hidden-dim", hidden_dim, "Encoder/decoder hidden width")
        ->capture_default_str();
    cmd->add_option("--latent-dim", latent_dims,
                    "Latent dimension, or a comma list to sweep (evaluate only)")
        ->capture_default_str();
    cmd->add_option("--vae-lr", lr, "VAE Adam learning rate")->capture_default_str();
    cmd->add_option("--batch-size", batch_size, "Minibatch size")
        ->capture_default_str();
    cmd->add_option("--epochs", epochs, "Training epochs")->capture_default_str();
    cmd->add_flag("--no-standardize", no_standardize,
                  "Skip per-dimension feature standardization");
    cmd->add_option("--embedding", embedding, "mu_and_var (default) or mu_only")
        ->capture_default_str();
    cmd->add_option("--second-moment", second_moment,
                    "Second embedding half: var (default) or stddev")
        ->capture_default_str();
  }
};

// ---------------------------------------------------------------------------

struct SynthArgs {
  std::string out;
  int objects = 72;
  int images_per_object = 4;
  int dim = 120;
  int categories = 3;
  int concepts_per_category = 4;
  double separation = 6.0;
  double cluster_scale = 1.0;
  double noise = 0.1;
  int descriptions_per_object = 3;
  int slice_width = 0;
  double background_noise = 1.0;
  double category_scale_spread = 1.0;
  int rare_concept_positives = 0;
  std::uint64_t seed = 0;
};

int cmd_synth(const SynthArgs& args) {
  udm::SynthConfig cfg = udm::SynthConfig::basic(
      args.objects, args.images_per_object, args.dim, args.categories,
      args.concepts_per_category, args.separation, args.cluster_scale,
      args.noise, args.descriptions_per_object, args.seed, args.slice_width);
  cfg.background_noise = args.background_noise;
  if (args.category_scale_spread != 1.0) {
    double unit = 1.0;
    for (int c = 0; c < args.categories; ++c) {
      cfg.category_scales.push_back(unit);
      unit *= args.category_scale_spread;
    }
  }
  cfg.rare_last_concept_positives = args.rare_concept_positives;
  const udm::SynthOutput out = udm::generate(cfg, args.out);
  std::cout << "features: " << out.features_csv.string() << "\n"
            << "descriptions: " << out.descriptions_tsv.string() << "\n"
            << "manifest: " << out.category_manifest_json.string() << "\n"
            << "concept_categories: " << out.concept_categories_tsv.string()
            << "\n";
  return 0;
}

struct TrainVaeArgs {
  std::string features;
  std::string out;
  VaeFlags vae;
  std::uint64_t seed = 0;
};

int cmd_train_vae(const TrainVaeArgs& args) {
  const udm::FeatureTable table = udm::load_features(args.features);
  if (table.instances.empty()) {
    udm::raise(udm::errc::empty_training_set, "no instances in " + args.features);
  }
  const auto dims = parse_int_list(args.vae.latent_dims);
  if (dims.size() != 1) {
    udm::raise(udm::errc::invalid_config,
               "train-vae takes a single --latent-dim value");
  }
  udm::VaeConfig cfg = args.vae.config(dims[0]);
  cfg.input_dim = table.dim();
  cfg.seed = args.seed;

  Eigen::MatrixXd x(table.dim(), static_cast<Eigen::Index>(table.instances.size()));
  for (std::size_t i = 0; i < table.instances.size(); ++i) {
    x.col(static_cast<Eigen::Index>(i)) = table.instances[i].x;
  }
  const udm::VaeTrainResult result = udm::train_vae(x, cfg);
  udm::save_vae(result.model, args.out);
  std::printf("first epoch loss: %.6f\n", result.epoch_loss.front());
  std::printf("last epoch loss: %.6f\n", result.epoch_loss.back());
  std::cout << "model: " << args.out << "\n";
  return 0;
}

struct EmbedArgs {
  std::string features;
  std::string model;
  std::string out;
};

int cmd_embed(const EmbedArgs& args) {
  const udm::FeatureTable table = udm::load_features(args.features);
  const udm::VaeModel model = udm::load_vae(args.model);
  std::ofstream out(args.out, std::ios::binary);
  if (!out) udm::raise(udm::errc::io_error, "cannot write " + args.out);
  out << "instance_id,object_id";
  for (int j = 0; j < model.embedding_dim(); ++j) out << ",z" << j;
  out << "\n";
  for (const auto& inst : table.instances) {
    const Eigen::VectorXd z = udm::embed(model, inst.x);
    out << inst.instance_id << "," << inst.object_id;
    for (Eigen::Index j = 0; j < z.size(); ++j) out << "," << format_double(z[j]);
    out << "\n";
  }
  std::cout << "embeddings: " << args.out << " (" << table.instances.size()
            << " rows, dim " << model.embedding_dim() << ")\n";
  return 0;
}

struct TrainConceptsArgs {
  std::string features;
  std::string descriptions;
  std::string model;
  std::string out;
  VocabFlags vocab;
  NegativeFlags negatives;
  ClassifierFlags clf;
  std::uint64_t seed = 0;
};

int cmd_train_concepts(const TrainConceptsArgs& args) {
  const udm::FeatureTable table = udm::load_features(args.features);
  const udm::DescriptionCorpus corpus =
      udm::load_descriptions(args.descriptions, args.vocab.language);
  const udm::ConceptVocabulary vocab =
      udm::build_vocabulary(corpus, args.vocab.min_count, args.vocab.stopwords());
  const udm::VaeModel model = udm::load_vae(args.model);
  const auto objects = table.object_ids();

  std::map<std::string, Eigen::VectorXd> embeddings;
  std::map<std::string, std::vector<const Eigen::VectorXd*>> by_object;
  for (const auto& inst : table.instances) {
    auto [it, _] = embeddings.emplace(inst.instance_id, udm::embed(model, inst.x));
    by_object[inst.object_id].push_back(&it->second);
  }

  udm::ParagraphVectors pv;
  const auto strategy = args.negatives.parsed_strategy();
  if (strategy == udm::NegativeStrategy::semantic_distant) {
    udm::PvdmConfig cfg = args.negatives.pvdm();
    cfg.seed = udm::Rng::mix(args.seed, "pvdm");
    pv = udm::train_pvdm(corpus, cfg);
  }

  std::vector<udm::ConceptClassifier> classifiers;
  std::size_t skipped = 0;
  for (const auto& entry : vocab.concepts) {
    udm::TrainSet ts;
    for (const auto& object : entry.positive_objects) {
      const auto it = by_object.find(object);
      if (it == by_object.end()) continue;
      for (const auto* z : it->second) ts.positives.push_back(*z);
    }
    std::set<std::string> negative_objects;
    try {
      if (strategy == udm::NegativeStrategy::all_nonpositive) {
        negative_objects =
            udm::negatives_all(entry.token, vocab, objects).object_ids;
      } else {
        negative_objects =
            udm::negatives_semantic(entry.token, vocab, pv,
                                    args.negatives.ratio,
                                    args.negatives.parsed_aggregate())
                .object_ids;
      }
    } catch (const udm::Error& e) {
      if (e.code() != udm::errc::no_negatives_available) throw;
      ++skipped;
      continue;
    }
    for (const auto& object : negative_objects) {
      const auto it = by_object.find(object);
      if (it == by_object.end()) continue;
      for (const auto* z : it->second) ts.negatives.push_back(*z);
    }
    if (ts.positives.empty() || ts.negatives.empty()) {
      ++skipped;
      continue;
    }
    udm::ConceptClassifier clf = udm::train_concept(
        ts, args.clf.l2, args.clf.epochs, args.clf.lr,
        udm::Rng::mix(args.seed, "clf:" + entry.token));
    clf.concept_token = entry.token;
    clf.input_kind = {udm::InputKind::latent, ""};
    classifiers.push_back(std::move(clf));
  }
  udm::save_classifiers(classifiers, args.out);
  std::cout << "classifiers: " << args.out << " (" << classifiers.size()
            << " concepts, " << skipped << " skipped)\n";
  return 0;
}

struct EvaluateArgs {
  std::string features;
  std::string descriptions;
  std::string method = "udm";
  std::string out;
  std::string manifest;
  std::string concept_categories;
  VocabFlags vocab;
  VaeFlags vae;
  NegativeFlags negatives;
  ClassifierFlags clf;
  int folds = 4;
  int trials = 10;
  int pos_low = 3, pos_high = 4;
  int neg_low = 4, neg_high = 6;
  double threshold = 0.5;
  std::uint64_t seed = 0;
  int jobs = 1;
  std::string fractions;  // ablate only
};

udm::RunOptions build_options(const EvaluateArgs& args, int latent_dim) {
  udm::RunOptions opt;
  opt.protocol.k = args.folds;
  opt.protocol.trials = args.trials;
  opt.protocol.pos_lo = args.pos_low;
  opt.protocol.pos_hi = args.pos_high;
  opt.protocol.neg_lo = args.neg_low;
  opt.protocol.neg_hi = args.neg_high;
  opt.protocol.threshold = args.threshold;
  opt.protocol.seed = args.seed;
  opt.vae = args.vae.config(latent_dim);
  opt.pvdm = args.negatives.pvdm();
  opt.negatives = args.negatives.parsed_strategy();
  opt.negative_ratio = args.negatives.ratio;
  opt.aggregate = args.negatives.parsed_aggregate();
  opt.clf_l2 = args.clf.l2;
  opt.clf_epochs = args.clf.epochs;
  opt.clf_lr = args.clf.lr;
  opt.jobs = args.jobs;
  return opt;
}

struct LoadedInputs {
  udm::FeatureTable table;
  udm::DescriptionCorpus corpus;
  udm::ConceptVocabulary vocab;
  std::vector<std::pair<std::string, std::string>> concept_categories;
};

LoadedInputs load_inputs(const EvaluateArgs& args) {
  LoadedInputs in;
  in.table = udm::load_features(args.features);
  if (!args.manifest.empty()) {
    udm::load_category_manifest(in.table, args.manifest);
  }
  in.corpus = udm::load_descriptions(args.descriptions, args.vocab.language);
  in.vocab = udm::build_vocabulary(in.corpus, args.vocab.min_count,
                                   args.vocab.stopwords());
  if (!args.concept_categories.empty()) {
    in.concept_categories = udm::load_concept_categories(args.concept_categories);
  }
  return in;
}

void print_report_line(const udm::EvaluationReport& report, int latent_dim) {
  std::printf(
      "method=%s%s macro_f1=%.4f micro_f1=%.4f min=%.4f mean=%.4f max=%.4f "
      "concepts=%zu skips=%zu\n",
      udm::method_name(report.method).c_str(),
      latent_dim > 0 ? (" dim=" + std::to_string(latent_dim)).c_str() : "",
      report.macro_f1, report.micro_f1, report.min_f1, report.mean_f1,
      report.max_f1, report.concept_results.size(), report.skipped.size());
}

int cmd_evaluate(const EvaluateArgs& args) {
  const udm::Method method = udm::parse_method(args.method);
  const auto dims = parse_int_list(args.vae.latent_dims);
  if (dims.size() > 1 && method != udm::Method::udm) {
    udm::raise(udm::errc::invalid_config,
               "a --latent-dim sweep only applies to --method udm");
  }
  const LoadedInputs loaded = load_inputs(args);
  const udm::PipelineInputs in{loaded.table, loaded.corpus, loaded.vocab};

  if (dims.size() == 1) {
    udm::RunOptions opt = build_options(args, dims[0]);
    opt.concept_categories = loaded.concept_categories;
    udm::EvaluationReport report;
    switch (method) {
      case udm::Method::udm: report = udm::run_udm(in, opt); break;
      case udm::Method::category_free_lr:
        report = udm::run_category_free_lr(in, opt);
        break;
      case udm::Method::predefined_category:
        report = udm::run_predefined_category(in, opt);
        break;
    }
    udm::emit_report(report, args.out);
    print_report_line(report, method == udm::Method::udm ? dims[0] : 0);
    std::cout << "report: " << args.out << "\n";
    return 0;
  }

  // Latent-dimension sweep: one report directory per dim plus a combined
  // distribution summary.
  fs::create_directories(args.out);
  std::ofstream summary(fs::path(args.out) / "dim_summary.csv",
                        std::ios::binary);
  if (!summary) {
    udm::raise(udm::errc::io_error, "cannot write dim_summary.csv in " + args.out);
  }
  summary << "latent_dim,min_f1,mean_f1,max_f1,macro_f1,micro_f1\n";
  for (const int dim : dims) {
    udm::RunOptions opt = build_options(args, dim);
    opt.concept_categories = loaded.concept_categories;
    const udm::EvaluationReport report = udm::run_udm(in, opt);
    const fs::path dir = fs::path(args.out) / ("dim" + std::to_string(dim));
    udm::emit_report(report, dir);
    print_report_line(report, dim);
    char line[160];
    std::snprintf(line, sizeof(line), "%d,%.4f,%.4f,%.4f,%.4f,%.4f\n", dim,
                  report.min_f1, report.mean_f1, report.max_f1, report.macro_f1,
                  report.micro_f1);
    summary << line;
  }
  std::cout << "report: " << args.out << "\n";
  return 0;
}

int cmd_ablate(const EvaluateArgs& args) {
  const udm::Method method = udm::parse_method(args.method);
  const auto dims = parse_int_list(args.vae.latent_dims);
  if (dims.size() != 1) {
    udm::raise(udm::errc::invalid_config, "ablate takes a single --latent-dim");
  }
  const std::vector<double> fractions = parse_fraction_list(args.fractions);
  const LoadedInputs loaded = load_inputs(args);
  const udm::PipelineInputs in{loaded.table, loaded.corpus, loaded.vocab};
  udm::RunOptions opt = build_options(args, dims[0]);
  opt.concept_categories = loaded.concept_categories;

  const udm::AblationReport report = udm::ablate(method, fractions, in, opt);
  udm::emit_ablation(report, args.out);
  for (std::size_t i = 0; i < report.fractions.size(); ++i) {
    std::printf("fraction %.4f: macro_f1=%.4f micro_f1=%.4f concepts=%d\n",
                report.fractions[i], report.macro_f1[i], report.micro_f1[i],
                report.evaluated_concepts[i]);
  }
  std::cout << "report: " << args.out << "\n";
  return 0;
}

void attach_eval_flags(CLI::App* cmd, EvaluateArgs& args, bool with_fractions) {
  cmd->add_option("--features", args.features, "Features CSV")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_option("--descriptions", args.descriptions, "Descriptions TSV")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_option("--method", args.method,
                  "udm | category_free_lr | predefined_category")
      ->capture_default_str();
  cmd->add_option("--out", args.out, "Report output directory")->required();
  cmd->add_option("--manifest", args.manifest,
                  "Category manifest JSON (required for predefined_category)")
      ->check(CLI::ExistingFile);
  cmd->add_option("--concept-categories", args.concept_categories,
                  "Concept<TAB>category map for tagging / predefined baseline")
      ->check(CLI::ExistingFile);
  args.vocab.attach(cmd);
  args.vae.attach(cmd);
  args.negatives.attach(cmd);
  args.clf.attach(cmd);
  cmd->add_option("--folds", args.folds, "Cross-validation folds")
      ->capture_default_str();
  cmd->add_option("--trials", args.trials, "Trials per concept and fold")
      ->capture_default_str();
  cmd->add_option("--pos-low", args.pos_low, "Positive samples per trial, low")
      ->capture_default_str();
  cmd->add_option("--pos-high", args.pos_high, "Positive samples per trial, high")
      ->capture_default_str();
  cmd->add_option("--neg-low", args.neg_low, "Negative samples per trial, low")
      ->capture_default_str();
  cmd->add_option("--neg-high", args.neg_high, "Negative samples per trial, high")
      ->capture_default_str();
  cmd->add_option("--threshold", args.threshold, "Positive decision threshold")
      ->capture_default_str();
  cmd->add_option("--seed", args.seed, "Master seed")->capture_default_str();
  cmd->add_option("--jobs", args.jobs, "Concurrent folds (1 = reference order)")
      ->capture_default_str();
  if (with_fractions) {
    cmd->add_option("--fractions", args.fractions,
                    "Comma list of training fractions, e.g. 0.1,0.2,0.3")
        ->required();
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Grounded concept learning: VAE embeddings with per-concept "
               "classifiers, baselines, and a cross-validated F1 harness"};
  app.require_subcommand(1);

  const auto configure = [](CLI::App* cmd) {
    cmd->config_formatter(std::make_shared<JsonConfig>());
    cmd->set_config("--config", "", "JSON config file; flags take precedence");
  };

  SynthArgs synth_args;
  CLI::App* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
  configure(synth);
  synth->add_option("--out", synth_args.out, "Output directory")->required();
  synth->add_option("--objects", synth_args.objects, "Number of objects")
      ->capture_default_str();
  synth->add_option("--images-per-object", synth_args.images_per_object,
                    "Images per object")
      ->capture_default_str();
  synth->add_option("--dim", synth_args.dim, "Feature dimension")
      ->capture_default_str();
  synth->add_option("--categories", synth_args.categories, "Category count")
      ->capture_default_str();
  synth->add_option("--concepts-per-category", synth_args.concepts_per_category,
                    "Concepts per category")
      ->capture_default_str();
  synth->add_option("--separation", synth_args.separation,
                    "Cluster center magnitude")
      ->capture_default_str();
  synth->add_option("--cluster-scale", synth_args.cluster_scale,
                    "Cluster standard deviation")
      ->capture_default_str();
  synth->add_option("--noise", synth_args.noise,
                    "Annotation noise: probability a description token is wrong")
      ->capture_default_str();
  synth->add_option("--descriptions-per-object",
                    synth_args.descriptions_per_object, "Descriptions per object")
      ->capture_default_str();
  synth->add_option("--slice-width", synth_args.slice_width,
                    "Signal dims per category (0 = even split of --dim)")
      ->capture_default_str();
  synth->add_option("--background-noise", synth_args.background_noise,
                    "Sigma of dimensions outside every category slice")
      ->capture_default_str();
  synth->add_option("--category-scale-spread", synth_args.category_scale_spread,
                    "Category c features are scaled by spread^c (mixed units)")
      ->capture_default_str();
  synth->add_option("--rare-concept-positives", synth_args.rare_concept_positives,
                    "Cap positives of the last concept (0 = off)")
      ->capture_default_str();
  synth->add_option("--seed", synth_args.seed, "Generator seed")
      ->capture_default_str();

  TrainVaeArgs train_vae_args;
  CLI::App* train_vae = app.add_subcommand("train-vae", "Pre-train the VAE");
  configure(train_vae);
  train_vae->add_option("--features", train_vae_args.features, "Features CSV")
      ->required()
      ->check(CLI::ExistingFile);
  train_vae->add_option("--out", train_vae_args.out, "Model JSON path")->required();
  train_vae_args.vae.attach(train_vae);
  train_vae->add_option("--seed", train_vae_args.seed, "Training seed")
      ->capture_default_str();

  EmbedArgs embed_args;
  CLI::App* embed = app.add_subcommand("embed", "Embed features with a model");
  configure(embed);
  embed->add_option("--features", embed_args.features, "Features CSV")
      ->required()
      ->check(CLI::ExistingFile);
  embed->add_option("--model", embed_args.model, "Model JSON")
      ->required()
      ->check(CLI::ExistingFile);
  embed->add_option("--out", embed_args.out, "Embedding CSV path")->required();

  TrainConceptsArgs train_concepts_args;
  CLI::App* train_concepts = app.add_subcommand(
      "train-concepts", "Train per-concept classifiers on embeddings");
  configure(train_concepts);
  train_concepts
      ->add_option("--features", train_concepts_args.features, "Features CSV")
      ->required()
      ->check(CLI::ExistingFile);
  train_concepts
      ->add_option("--descriptions", train_concepts_args.descriptions,
                   "Descriptions TSV")
      ->required()
      ->check(CLI::ExistingFile);
  train_concepts->add_option("--model", train_concepts_args.model, "Model JSON")
      ->required()
      ->check(CLI::ExistingFile);
  train_concepts->add_option("--out", train_concepts_args.out,
                             "Classifier bundle JSON path")
      ->required();
  train_concepts_args.vocab.attach(train_concepts);
  train_concepts_args.negatives.attach(train_concepts);
  train_concepts_args.clf.attach(train_concepts);
  train_concepts->add_option("--seed", train_concepts_args.seed, "Seed")
      ->capture_default_str();

  EvaluateArgs evaluate_args;
  CLI::App* evaluate =
      app.add_subcommand("evaluate", "Cross-validated per-concept F1");
  configure(evaluate);
  attach_eval_flags(evaluate, evaluate_args, false);

  EvaluateArgs ablate_args;
  CLI::App* ablate_cmd =
      app.add_subcommand("ablate", "Evaluate at reduced training fractions");
  configure(ablate_cmd);
  attach_eval_flags(ablate_cmd, ablate_args, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (synth->parsed()) return cmd_synth(synth_args);
    if (train_vae->parsed()) return cmd_train_vae(train_vae_args);
    if (embed->parsed()) return cmd_embed(embed_args);
    if (train_concepts->parsed()) return cmd_train_concepts(train_concepts_args);
    if (evaluate->parsed()) return cmd_evaluate(evaluate_args);
    if (ablate_cmd->parsed()) return cmd_ablate(ablate_args);
  } catch (const udm::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.is_user_error() ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
