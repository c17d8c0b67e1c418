// slideq: score slide decks against a reference corpus.
//
// PDFs are not read directly. Rasterize them first, one directory per deck,
// for example:
//   pdftoppm -r 100 -png talk.pdf corpus/talk/slide

#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "slideq/corpus.hpp"
#include "slideq/csv.hpp"
#include "slideq/embedding.hpp"
#include "slideq/error.hpp"
#include "slideq/model_io.hpp"
#include "slideq/pipeline.hpp"
#include "slideq/stats.hpp"

namespace fs = std::filesystem;
using namespace slideq;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitModel = 4;

// Failures while loading or matching a model file map to the model exit code.
struct ModelFailure {
  Error error;
};

// Reads a flat JSON object whose keys are long flag names without dashes.
// Flat JSON object of flag defaults for the selected subcommand. CLI11 only
// reads config files on the root app, so keys are routed to the subcommand.
class JsonConfig : public CLI::Config {
 public:
  explicit JsonConfig(const CLI::App* root) : root_(root) {}

  std::string to_config(const CLI::App*, bool, bool, std::string) const override {
    throw CLI::ConfigError("writing JSON config is not supported");
  }

  std::vector<CLI::ConfigItem> from_config(std::istream& in) const override {
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw CLI::ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw CLI::ConfigError("config must be a JSON object");
    std::vector<CLI::ConfigItem> items;
    for (const auto& [key, value] : doc.items()) {
      CLI::ConfigItem item;
      item.name = key;
      const auto selected = root_->get_subcommands();
      if (!selected.empty()) item.parents = {selected.front()->get_name()};
      const auto add = [&](const nlohmann::json& v) {
        item.inputs.push_back(v.is_string() ? v.get<std::string>() : v.dump());
      };
      if (value.is_array()) {
        for (const auto& v : value) add(v);
      } else if (value.is_object() || value.is_null()) {
        throw CLI::ConfigError("config key '" + key + "' must be a scalar or array");
      } else {
        add(value);
      }
      items.push_back(std::move(item));
    }
    return items;
  }

 private:
  const CLI::App* root_;
};

struct ProviderOptions {
  std::string kind = "stub";
  std::string path;
  int dim = kDefaultEmbeddingDim;
  CLI::Option* dim_opt = nullptr;

  void attach(CLI::App* app) {
    app->add_option("--provider", kind, "Embedding source")
        ->check(CLI::IsMember({"runtime-model", "precomputed-file", "stub"}));
    app->add_option("--provider-path", path,
                    "ONNX encoder (runtime-model) or key,v0.. CSV (precomputed-file)");
    dim_opt = app->add_option("--dim", dim, "Embedding dimension")->check(CLI::PositiveNumber);
  }

  ProviderConfig config() const {
    ProviderConfig cfg;
    cfg.kind = parse_provider_kind(kind);
    cfg.path = path;
    cfg.dim = dim;
    return cfg;
  }
};

void add_config(CLI::App* app) {
  app->allow_config_extras(CLI::config_extras_mode::error);
  app->fallthrough();
  app->footer("--config FILE reads defaults for these flags from a JSON object.");
}

// Writes to a file, or stdout for "-".
template <typename Fn>
void with_output(const std::string& out, Fn&& fn) {
  if (out == "-") {
    fn(std::cout);
    std::cout.flush();
    return;
  }
  std::ofstream file(out, std::ios::binary | std::ios::trunc);
  if (!file) throw Error(ErrorCode::IoError, "cannot write " + out);
  fn(file);
  if (!file.flush()) throw Error(ErrorCode::IoError, "write failed for " + out);
}

QualityModel load_model_stage(const std::string& path) {
  try {
    return load_model(path);
  } catch (const Error& e) {
    throw ModelFailure{e};
  }
}

void check_provider_stage(const QualityModel& model, const EmbeddingProvider& provider) {
  try {
    check_provider(model, provider);
  } catch (const Error& e) {
    throw ModelFailure{e};
  }
}

CorpusManifest scan(const std::string& root, const std::string& manifest) {
  CorpusManifest m = scan_corpus(root);
  if (!manifest.empty()) apply_deck_overrides(m, manifest);
  return m;
}

int report_failures(const std::vector<SlideFailure>& failures) {
  for (const auto& f : failures) {
    std::cerr << "error: " << f.key << ": " << to_string(f.code) << ": " << f.message << "\n";
  }
  return failures.empty() ? kExitOk : kExitData;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Slide quality scoring against a reference corpus"};
  app.require_subcommand(1);
  app.set_config("--config", "", "JSON file with default values for the subcommand's flags");
  app.config_formatter(std::make_shared<JsonConfig>(&app));
  app.allow_config_extras(CLI::config_extras_mode::error);

  // fit
  std::string fit_corpus, fit_out, fit_manifest;
  ProviderOptions fit_provider;
  ForestParams fit_params;
  int fit_components = kDefaultPcaComponents;
  auto* fit = app.add_subcommand("fit", "Fit a quality model on a reference corpus");
  add_config(fit);
  fit->add_option("--corpus", fit_corpus, "Directory of reference slide images")->required();
  fit->add_option("--out", fit_out, "Model file to write")->required();
  fit->add_option("--manifest", fit_manifest, "Optional key,deck CSV overriding deck ids");
  fit_provider.attach(fit);
  fit->add_option("--components", fit_components, "PCA components")->check(CLI::PositiveNumber);
  fit->add_option("--trees", fit_params.trees, "Isolation trees")->check(CLI::PositiveNumber);
  fit->add_option("--psi", fit_params.subsample, "Subsample size per tree")->check(CLI::Range(2, 1 << 30));
  fit->add_option("--contamination", fit_params.contamination, "Expected outlier fraction")
      ->check(CLI::Range(0.0, 0.5));
  fit->add_option("--seed", fit_params.seed, "Random seed");

  // score
  std::string score_deck_dir, score_model, score_out, score_manifest, score_scorer = "forest";
  ProviderOptions score_provider;
  auto* score = app.add_subcommand("score", "Score a deck with a fitted model");
  add_config(score);
  score->add_option("--deck", score_deck_dir, "Directory of slide images")->required();
  score->add_option("--model", score_model, "Model file from 'fit'")->required();
  score->add_option("--out", score_out, "Per-slide CSV ('-' for stdout)")->required();
  score->add_option("--manifest", score_manifest, "Optional key,deck CSV overriding deck ids");
  score->add_option("--scorer", score_scorer, "Anomaly scorer")
      ->check(CLI::IsMember({"forest", "centroid"}));
  score_provider.attach(score);

  // metrics
  std::string metrics_deck, metrics_out = "-";
  auto* metrics = app.add_subcommand("metrics", "Compute the seven layout metrics per slide");
  add_config(metrics);
  metrics->add_option("--deck", metrics_deck, "Directory of slide images")->required();
  metrics->add_option("--out", metrics_out, "CSV output ('-' for stdout)");

  // stats
  std::string stats_scores, stats_mode = "correlate", stats_method = "spearman", stats_out = "-";
  std::vector<std::string> stats_ratings;
  auto* statscmd = app.add_subcommand("stats", "Correlation and rater reliability reports");
  add_config(statscmd);
  statscmd->add_option("--mode", stats_mode, "Report kind")
      ->check(CLI::IsMember({"correlate", "reliability"}));
  statscmd->add_option("--scores", stats_scores, "deck,score CSV (correlate mode)");
  statscmd->add_option("--ratings", stats_ratings, "deck,rater.. CSV, one per scale")
      ->required()
      ->expected(1, -1);
  statscmd->add_option("--method", stats_method, "Correlation method")
      ->check(CLI::IsMember({"spearman", "pearson"}));
  statscmd->add_option("--out", stats_out, "CSV output ('-' for stdout)");

  // project2d
  std::string proj_corpus, proj_model, proj_out = "-";
  ProviderOptions proj_provider;
  auto* proj = app.add_subcommand("project2d", "First two PCA coordinates plus metrics per slide");
  add_config(proj);
  proj->add_option("--corpus", proj_corpus, "Directory of slide images")->required();
  proj->add_option("--model", proj_model, "Model file from 'fit'")->required();
  proj->add_option("--out", proj_out, "CSV output ('-' for stdout)");
  proj_provider.attach(proj);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (fit->parsed()) {
      const CorpusManifest corpus = scan(fit_corpus, fit_manifest);
      fit_params.validate();
      if (static_cast<int>(corpus.count()) < fit_params.subsample) {
        throw Error(ErrorCode::InsufficientData,
                    std::to_string(corpus.count()) + " slides but --psi is " +
                        std::to_string(fit_params.subsample));
      }
      const auto provider = make_provider(fit_provider.config());
      const FeatureTable features = require_all(extract_features(corpus.entries, provider.get()));
      const QualityModel model =
          fit_quality_model(features, provider->fingerprint(), fit_params, fit_components);
      save_model(model, fit_out);
      std::cout << "slides=" << features.keys.size() << " k=" << model.pca.k()
                << " psi=" << model.params.subsample << " trees=" << model.params.trees
                << " flag_threshold=" << format_double(model.forest.flag_threshold()) << "\n";
    } else if (score->parsed()) {
      const QualityModel model = load_model_stage(score_model);
      if (score_provider.dim_opt->count() == 0) score_provider.dim = model.fingerprint.dim;
      const auto provider = make_provider(score_provider.config());
      check_provider_stage(model, *provider);
      const CorpusManifest deck = scan(score_deck_dir, score_manifest);
      const FeatureTable features = require_all(extract_features(deck.entries, provider.get()));
      const AnomalyReport report = score_features(model, features, parse_scorer(score_scorer));
      with_output(score_out, [&](std::ostream& o) { write_score_csv(o, report, features); });
      std::ostream& summary = score_out == "-" ? std::cerr : std::cout;
      const auto deck_ids = deck.decks();
      if (deck_ids.size() > 1) {
        std::map<std::string, std::pair<double, int>> per_deck;
        for (std::size_t i = 0; i < deck.entries.size(); ++i) {
          auto& acc = per_deck[deck.entries[i].deck];
          acc.first += report.slides[i].anomaly;
          acc.second += 1;
        }
        for (const auto& [id, acc] : per_deck) {
          summary << "deck " << id << " slides=" << acc.second
                  << " mean=" << format_double(acc.first / acc.second) << "\n";
        }
      }
      summary << "deck_mean=" << format_double(report.deck_score)
              << " slides=" << report.slides.size() << " scorer=" << score_scorer << "\n";
    } else if (metrics->parsed()) {
      CorpusManifest deck;
      try {
        deck = scan_corpus(metrics_deck);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::EmptyCorpus) throw;
        throw Error(ErrorCode::EmptyDeck, "no images under " + metrics_deck);
      }
      const FeatureResult result = extract_features(deck.entries, nullptr);
      with_output(metrics_out, [&](std::ostream& o) { write_metrics_csv(o, result.table); });
      return report_failures(result.failures);
    } else if (statscmd->parsed()) {
      if (stats_mode == "correlate") {
        if (stats_scores.empty()) {
          std::cerr << "error: --scores is required in correlate mode\n";
          return kExitUsage;
        }
        const DeckScores scores = read_deck_scores(stats_scores);
        std::vector<ScaleCorrelation> rows;
        for (const auto& path : stats_ratings) {
          const stats::RatingsMatrix ratings = read_ratings(path);
          const Eigen::VectorXd mean = aligned_mean_ratings(scores, ratings);
          rows.push_back({fs::path(path).stem().string(),
                          stats::correlate_scores(scores.scores, mean,
                                                  stats::parse_method(stats_method))});
        }
        with_output(stats_out, [&](std::ostream& o) { write_correlation_csv(o, rows); });
      } else {
        std::vector<ScaleReliability> rows;
        for (const auto& path : stats_ratings) {
          const stats::RatingsMatrix ratings = read_ratings(path);
          rows.push_back({fs::path(path).stem().string(), ratings.n_subjects(), ratings.n_raters(),
                          stats::reliability(ratings)});
        }
        with_output(stats_out, [&](std::ostream& o) { write_reliability_csv(o, rows); });
      }
    } else if (proj->parsed()) {
      const QualityModel model = load_model_stage(proj_model);
      if (proj_provider.dim_opt->count() == 0) proj_provider.dim = model.fingerprint.dim;
      const auto provider = make_provider(proj_provider.config());
      check_provider_stage(model, *provider);
      const CorpusManifest corpus = scan_corpus(proj_corpus);
      const FeatureTable features = require_all(extract_features(corpus.entries, provider.get()));
      with_output(proj_out, [&](std::ostream& o) { write_project2d_csv(o, model, features); });
    }
  } catch (const ModelFailure& f) {
    std::cerr << "error: " << f.error.what() << "\n";
    return kExitModel;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    switch (e.code()) {
      case ErrorCode::InvalidArgument:
        return kExitUsage;
      case ErrorCode::ModelLoadError:
      case ErrorCode::ModelVersionMismatch:
      case ErrorCode::ChecksumMismatch:
        return kExitModel;
      default:
        return kExitData;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitOk;
}
