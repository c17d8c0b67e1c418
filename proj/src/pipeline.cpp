#include "slideq/pipeline.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <set>

#include "slideq/csv.hpp"
#include "slideq/latent.hpp"
#include "slideq/parallel.hpp"

namespace fs = std::filesystem;

namespace slideq {
namespace {

// Error::what() starts with "<Code>: "; drop it when re-wrapping.
std::string bare_message(const Error& e) {
  const std::string what = e.what();
  const std::string prefix = std::string(to_string(e.code())) + ": ";
  return what.rfind(prefix, 0) == 0 ? what.substr(prefix.size()) : what;
}

struct SlideOutput {
  MetricVector metrics;
  Eigen::VectorXd embedding;
};

SlideOutput process(const SlideImage& img, const std::string& key,
                    const EmbeddingProvider* provider) {
  SlideOutput out;
  out.metrics = compute_metrics(img);
  if (provider) out.embedding = provider->embed(img, key).values;
  return out;
}

FeatureTable assemble(std::vector<std::string> keys, std::vector<SlideOutput>& outs,
                      const EmbeddingProvider* provider) {
  FeatureTable t;
  t.keys = std::move(keys);
  const auto n = static_cast<Eigen::Index>(outs.size());
  t.embeddings.resize(n, provider ? provider->dim() : 0);
  t.metrics.reserve(outs.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    SlideOutput& o = outs[static_cast<std::size_t>(i)];
    t.metrics.push_back(o.metrics);
    if (provider) {
      if (o.embedding.size() != t.embeddings.cols()) {
        throw Error(ErrorCode::DimensionMismatch,
                    t.keys[static_cast<std::size_t>(i)] + ": embedding has dim " +
                        std::to_string(o.embedding.size()));
      }
      t.embeddings.row(i) = o.embedding.transpose();
    }
  }
  return t;
}

void write_metric_fields(std::vector<std::string>& row, const MetricVector& m) {
  const auto v = m.as_vector();
  for (int j = 0; j < kMetricCount; ++j) row.push_back(format_double(v(j)));
}

std::vector<std::string> header_with_metrics(std::vector<std::string> head) {
  for (auto name : MetricVector::names) head.emplace_back(name);
  return head;
}

std::string optional_double(const std::optional<double>& v) {
  return v ? format_double(*v) : std::string();
}

}  // namespace

std::string to_string(Scorer s) { return s == Scorer::Forest ? "forest" : "centroid"; }

Scorer parse_scorer(const std::string& text) {
  if (text == "forest") return Scorer::Forest;
  if (text == "centroid") return Scorer::Centroid;
  throw Error(ErrorCode::InvalidArgument, "unknown scorer '" + text + "'");
}

FeatureResult extract_features(const std::vector<CorpusEntry>& entries,
                               const EmbeddingProvider* provider, unsigned workers) {
  std::vector<std::optional<SlideOutput>> outs(entries.size());
  std::vector<std::optional<SlideFailure>> fails(entries.size());
  parallel_for(
      entries.size(),
      [&](std::size_t i) {
        const CorpusEntry& e = entries[i];
        try {
          outs[i] = process(read_image_file(e.path), e.key, provider);
        } catch (const Error& err) {
          fails[i] = SlideFailure{e.key, err.code(), bare_message(err)};
        }
      },
      workers);

  FeatureResult result;
  std::vector<std::string> keys;
  std::vector<SlideOutput> ok;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (fails[i]) {
      result.failures.push_back(std::move(*fails[i]));
    } else {
      keys.push_back(entries[i].key);
      ok.push_back(std::move(*outs[i]));
    }
  }
  result.table = assemble(std::move(keys), ok, provider);
  return result;
}

FeatureTable extract_features(const std::vector<SlideImage>& images,
                              const std::vector<std::string>& keys,
                              const EmbeddingProvider* provider, unsigned workers) {
  if (images.size() != keys.size()) {
    throw Error(ErrorCode::LengthMismatch, "one key per image required");
  }
  std::vector<SlideOutput> outs(images.size());
  parallel_for(
      images.size(),
      [&](std::size_t i) {
        try {
          outs[i] = process(images[i], keys[i], provider);
        } catch (const Error& err) {
          throw Error(err.code(), keys[i] + ": " + bare_message(err));
        }
      },
      workers);
  return assemble(keys, outs, provider);
}

FeatureTable require_all(FeatureResult result) {
  if (!result.failures.empty()) {
    const SlideFailure& f = result.failures.front();
    std::string msg = f.key + ": " + f.message;
    if (result.failures.size() > 1) {
      msg += " (and " + std::to_string(result.failures.size() - 1) + " more)";
    }
    throw Error(f.code, msg);
  }
  return std::move(result.table);
}

DescriptorMatrix descriptors(const QualityModel& model, const FeatureTable& features) {
  const Eigen::MatrixXd coords = model.pca.project_rows(features.embeddings);
  const auto n = coords.rows();
  DescriptorMatrix raw(n, coords.cols() + kMetricCount);
  for (Eigen::Index i = 0; i < n; ++i) {
    raw.row(i) = fuse(coords.row(i).transpose(), features.metrics[static_cast<std::size_t>(i)])
                     .transpose();
  }
  return model.scaler.apply_rows(raw);
}

QualityModel fit_quality_model(const FeatureTable& features, const ProviderFingerprint& fp,
                               const ForestParams& params, int components) {
  params.validate();
  const auto n = static_cast<Eigen::Index>(features.keys.size());
  if (n < params.subsample) {
    throw Error(ErrorCode::InsufficientData, std::to_string(n) + " slides but subsample is " +
                                                 std::to_string(params.subsample));
  }
  QualityModel model;
  model.pca = pca_fit(features.embeddings, components);
  const Eigen::MatrixXd coords = model.pca.project_rows(features.embeddings);
  DescriptorMatrix raw(n, coords.cols() + kMetricCount);
  for (Eigen::Index i = 0; i < n; ++i) {
    raw.row(i) = fuse(coords.row(i).transpose(), features.metrics[static_cast<std::size_t>(i)])
                     .transpose();
  }
  model.scaler = scaler_fit(raw);
  const DescriptorMatrix z = model.scaler.apply_rows(raw);
  model.forest = IsolationForest::fit(z, params);
  model.centroid = CentroidModel::fit(z);
  model.fingerprint = fp;
  model.params = params;
  model.created = utc_timestamp();
  model.check_consistent();
  return model;
}

void check_provider(const QualityModel& model, const EmbeddingProvider& provider) {
  if (provider.dim() != model.fingerprint.dim) {
    throw Error(ErrorCode::DimensionMismatch,
                "provider produces dim " + std::to_string(provider.dim()) +
                    " but the model was fitted on dim " + std::to_string(model.fingerprint.dim));
  }
}

AnomalyReport score_features(const QualityModel& model, const FeatureTable& features,
                             Scorer scorer) {
  if (features.keys.empty()) throw Error(ErrorCode::EmptyDeck, "deck has no slides");
  const DescriptorMatrix z = descriptors(model, features);
  return scorer == Scorer::Forest ? score_deck(model.forest, z, features.keys)
                                  : score_deck(model.centroid, z, features.keys);
}

void write_score_csv(std::ostream& out, const AnomalyReport& report, const FeatureTable& features) {
  CsvWriter w(out);
  w.row(header_with_metrics({"key", "anomaly", "flagged"}));
  for (std::size_t i = 0; i < report.slides.size(); ++i) {
    const SlideScore& s = report.slides[i];
    std::vector<std::string> row{s.key, format_double(s.anomaly),
                                 s.flagged ? (*s.flagged ? "1" : "0") : ""};
    write_metric_fields(row, features.metrics[i]);
    w.row(row);
  }
}

void write_metrics_csv(std::ostream& out, const FeatureTable& features) {
  CsvWriter w(out);
  w.row(header_with_metrics({"key"}));
  for (std::size_t i = 0; i < features.keys.size(); ++i) {
    std::vector<std::string> row{features.keys[i]};
    write_metric_fields(row, features.metrics[i]);
    w.row(row);
  }
}

void write_project2d_csv(std::ostream& out, const QualityModel& model,
                         const FeatureTable& features) {
  const auto xy = project2d(model.pca, features.embeddings);
  CsvWriter w(out);
  w.row(header_with_metrics({"key", "pc1", "pc2"}));
  for (std::size_t i = 0; i < features.keys.size(); ++i) {
    std::vector<std::string> row{features.keys[i], format_double(xy[i].first),
                                 format_double(xy[i].second)};
    write_metric_fields(row, features.metrics[i]);
    w.row(row);
  }
}

DeckScores read_deck_scores(const fs::path& csv) {
  std::ifstream in(csv, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + csv.string());
  CsvReader reader(in, csv.string());
  if (reader.header().size() != 2 || reader.header()[0] != "deck") {
    throw Error(ErrorCode::ParseError, csv.string() + ": header must be 'deck,<score>'");
  }
  DeckScores out;
  std::vector<double> values;
  std::set<std::string> seen;
  std::vector<std::string> fields;
  while (reader.next(fields)) {
    if (fields.size() != 2) throw Error(ErrorCode::ParseError, reader.where() + ": expected 2 fields");
    if (!seen.insert(fields[0]).second) {
      throw Error(ErrorCode::ParseError, reader.where() + ": duplicate deck '" + fields[0] + "'");
    }
    out.decks.push_back(fields[0]);
    values.push_back(parse_double(fields[1], reader.where()));
  }
  if (values.empty()) throw Error(ErrorCode::ParseError, csv.string() + ": no rows");
  out.scores = Eigen::Map<Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
  return out;
}

stats::RatingsMatrix read_ratings(const fs::path& csv) {
  std::ifstream in(csv, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + csv.string());
  CsvReader reader(in, csv.string());
  const auto& header = reader.header();
  if (header.size() < 3 || header[0] != "deck") {
    throw Error(ErrorCode::ParseError,
                csv.string() + ": header must be 'deck,<rater>,<rater>,...'");
  }
  const std::vector<std::string> raters(header.begin() + 1, header.end());
  std::vector<std::string> decks;
  std::vector<double> cells;
  std::set<std::string> seen;
  std::vector<std::string> fields;
  while (reader.next(fields)) {
    if (fields.size() != header.size()) {
      throw Error(ErrorCode::ParseError, reader.where() + ": expected " +
                                             std::to_string(header.size()) + " fields");
    }
    if (!seen.insert(fields[0]).second) {
      throw Error(ErrorCode::ParseError, reader.where() + ": duplicate deck '" + fields[0] + "'");
    }
    decks.push_back(fields[0]);
    for (std::size_t j = 1; j < fields.size(); ++j) {
      cells.push_back(parse_double(fields[j], reader.where()));
    }
  }
  const auto n = static_cast<Eigen::Index>(decks.size());
  const auto m = static_cast<Eigen::Index>(raters.size());
  if (n < 2) throw Error(ErrorCode::ParseError, csv.string() + ": need at least 2 decks");
  using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Eigen::MatrixXd values = Eigen::Map<RowMajor>(cells.data(), n, m);
  return stats::RatingsMatrix(std::move(values), std::move(decks), raters);
}

Eigen::VectorXd aligned_mean_ratings(const DeckScores& scores,
                                     const stats::RatingsMatrix& ratings) {
  std::map<std::string, Eigen::Index> row_of;
  for (std::size_t i = 0; i < ratings.subjects.size(); ++i) {
    row_of[ratings.subjects[i]] = static_cast<Eigen::Index>(i);
  }
  if (row_of.size() != scores.decks.size()) {
    throw Error(ErrorCode::LabelMismatch, "score and rating files list different decks");
  }
  const Eigen::VectorXd means = ratings.subject_means();
  Eigen::VectorXd out(static_cast<Eigen::Index>(scores.decks.size()));
  for (std::size_t i = 0; i < scores.decks.size(); ++i) {
    const auto hit = row_of.find(scores.decks[i]);
    if (hit == row_of.end()) {
      throw Error(ErrorCode::LabelMismatch, "deck '" + scores.decks[i] + "' has no ratings");
    }
    out(static_cast<Eigen::Index>(i)) = means(hit->second);
  }
  return out;
}

void write_correlation_csv(std::ostream& out, const std::vector<ScaleCorrelation>& rows) {
  CsvWriter w(out);
  w.row({"scale", "method", "n", "coefficient", "p_value", "ci_low", "ci_high"});
  for (const auto& r : rows) {
    w.row({r.scale, stats::to_string(r.result.method), std::to_string(r.result.n),
           format_double(r.result.coefficient), format_double(r.result.p_value),
           optional_double(r.result.ci_low), optional_double(r.result.ci_high)});
  }
}

void write_reliability_csv(std::ostream& out, const std::vector<ScaleReliability>& rows) {
  CsvWriter w(out);
  w.row({"scale", "n_subjects", "n_raters", "cronbach_alpha", "icc_2k", "kendall_w"});
  for (const auto& r : rows) {
    w.row({r.scale, std::to_string(r.n_subjects), std::to_string(r.n_raters),
           format_double(r.values.cronbach_alpha), format_double(r.values.icc_2k),
           format_double(r.values.kendall_w)});
  }
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace slideq
