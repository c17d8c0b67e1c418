#pragma once

#include <filesystem>
#include <string>

#include "slideq/embedding.hpp"
#include "slideq/isolation_forest.hpp"
#include "slideq/latent.hpp"

namespace slideq {

inline constexpr int kModelFormatVersion = 1;

/// Everything needed to score a slide: the latent projection, descriptor
/// scaling, both scorers and the encoder they expect.
struct QualityModel {
  int format_version = kModelFormatVersion;
  PcaModelD pca;
  ZScalerD scaler;
  IsolationForest forest;
  CentroidModel centroid;
  ProviderFingerprint fingerprint;
  ForestParams params;
  std::string created;  // ISO 8601, UTC

  Eigen::Index descriptor_dim() const noexcept { return scaler.m(); }
  /// Throws ParseError unless pca.k + 7 == scaler.m == forest dim == centroid length.
  void check_consistent() const;
};

/// JSON document {format_version, payload, checksum}; the checksum is
/// "fnv1a64:<hex>" of the compact payload text. Written atomically through
/// a temporary file.
void save_model(const QualityModel& model, const std::filesystem::path& path);
std::string serialize_model(const QualityModel& model);

/// Version is checked before the checksum, so files from another format
/// version report ModelVersionMismatch even if their layout differs.
QualityModel load_model(const std::filesystem::path& path);
QualityModel deserialize_model(const std::string& text);

}  // namespace slideq
