#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "slideq/corpus.hpp"
#include "slideq/embedding.hpp"
#include "slideq/error.hpp"
#include "slideq/isolation_forest.hpp"
#include "slideq/metrics.hpp"
#include "slideq/model_io.hpp"
#include "slideq/stats.hpp"

namespace slideq {

enum class Scorer { Forest, Centroid };

std::string to_string(Scorer s);
Scorer parse_scorer(const std::string& text);

/// Metrics and (optionally) the embedding of each slide, in input order.
struct FeatureTable {
  std::vector<std::string> keys;
  std::vector<MetricVector> metrics;
  Eigen::MatrixXd embeddings;  // n x d; 0 columns when no provider was used
};

struct SlideFailure {
  std::string key;
  ErrorCode code;
  std::string message;
};

struct FeatureResult {
  FeatureTable table;                 // successful slides only
  std::vector<SlideFailure> failures; // in input order
};

/// Decode -> metrics -> embed for every entry on a worker pool. Failures
/// are collected per slide rather than thrown.
FeatureResult extract_features(const std::vector<CorpusEntry>& entries,
                               const EmbeddingProvider* provider, unsigned workers = 0);

/// Same, for images already in memory.
FeatureTable extract_features(const std::vector<SlideImage>& images,
                              const std::vector<std::string>& keys,
                              const EmbeddingProvider* provider, unsigned workers = 0);

/// Throws the first failure, prefixed with its slide key.
FeatureTable require_all(FeatureResult result);

/// Scaled, fused descriptors (n x (k + 7)) of a feature table under `model`.
DescriptorMatrix descriptors(const QualityModel& model, const FeatureTable& features);

/// Fits PCA(k), the scaler, the forest and the centroid on one feature table.
QualityModel fit_quality_model(const FeatureTable& features, const ProviderFingerprint& fp,
                               const ForestParams& params, int components = kDefaultPcaComponents);

/// Throws DimensionMismatch when the provider cannot produce the embeddings
/// the model was fitted on.
void check_provider(const QualityModel& model, const EmbeddingProvider& provider);

AnomalyReport score_features(const QualityModel& model, const FeatureTable& features, Scorer scorer);

/// Writes `key,anomaly,flagged,<seven metrics>`; `flagged` is 1/0 for the
/// forest and empty for the centroid scorer.
void write_score_csv(std::ostream& out, const AnomalyReport& report, const FeatureTable& features);
/// Writes `key,<seven metrics>`.
void write_metrics_csv(std::ostream& out, const FeatureTable& features);
/// Writes `key,pc1,pc2,<seven metrics>`.
void write_project2d_csv(std::ostream& out, const QualityModel& model, const FeatureTable& features);

/// `deck,score` file, one row per deck.
struct DeckScores {
  std::vector<std::string> decks;
  Eigen::VectorXd scores;
};

DeckScores read_deck_scores(const std::filesystem::path& csv);
/// `deck,<rater>,...` file; subjects are decks.
stats::RatingsMatrix read_ratings(const std::filesystem::path& csv);

/// Aligns ratings to the score file's deck order; the two label sets must
/// be identical (LabelMismatch otherwise).
Eigen::VectorXd aligned_mean_ratings(const DeckScores& scores, const stats::RatingsMatrix& ratings);

/// One row per scale: `scale,method,n,coefficient,p_value,ci_low,ci_high`.
struct ScaleCorrelation {
  std::string scale;
  stats::CorrelationResult result;
};
void write_correlation_csv(std::ostream& out, const std::vector<ScaleCorrelation>& rows);

/// One row per scale: `scale,n_subjects,n_raters,cronbach_alpha,icc_2k,kendall_w`.
struct ScaleReliability {
  std::string scale;
  Eigen::Index n_subjects = 0;
  Eigen::Index n_raters = 0;
  stats::Reliability values;
};
void write_reliability_csv(std::ostream& out, const std::vector<ScaleReliability>& rows);

/// Current UTC time as YYYY-MM-DDTHH:MM:SSZ.
std::string utc_timestamp();

}  // namespace slideq
