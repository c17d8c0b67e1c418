#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "slideq/image.hpp"

namespace slideq {

inline constexpr int kDefaultEmbeddingDim = 512;
inline constexpr int kThumbnailSize = 224;

/// Unit-norm image embedding; its dimensionality is `values.size()`.
struct Embedding {
  Eigen::VectorXd values;

  Eigen::Index dim() const noexcept { return values.size(); }
};

enum class ProviderKind { RuntimeModel, PrecomputedFile, Stub };

std::string_view to_string(ProviderKind kind) noexcept;
ProviderKind parse_provider_kind(std::string_view text);

struct ProviderConfig {
  ProviderKind kind = ProviderKind::Stub;
  std::filesystem::path path;  // model file or precomputed CSV
  int dim = kDefaultEmbeddingDim;
  // ONNX Runtime shared library; empty means $SLIDEQ_ONNXRUNTIME_LIB, then
  // the default loader search path.
  std::string runtime_library;
};

/// Identifies the encoder a model was fitted with.
struct ProviderFingerprint {
  std::string kind;
  int dim = 0;
  std::string model_hash;

  friend bool operator==(const ProviderFingerprint&, const ProviderFingerprint&) = default;
};

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;

  /// `key` is the corpus-relative slide path; only the precomputed provider
  /// uses it.
  virtual Embedding embed(const SlideImage& img, std::string_view key) const = 0;
  virtual ProviderFingerprint fingerprint() const = 0;
  virtual int dim() const noexcept = 0;
};

std::unique_ptr<EmbeddingProvider> make_provider(const ProviderConfig& cfg);

/// One-shot convenience; builds a provider for every call.
Embedding embed(const SlideImage& img, const ProviderConfig& cfg, std::string_view key = {});

/// 224x224 squash resize used by every encoder.
SlideImage make_thumbnail(const SlideImage& img);

/// Interleaved 8-bit RGB bytes of an image (round to nearest).
std::vector<std::uint8_t> rgb8_bytes(const SlideImage& img);

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes,
                      std::uint64_t seed = 0xcbf29ce484222325ULL) noexcept;
std::string hex64(std::uint64_t v);
std::string hash_file(const std::filesystem::path& path);

/// SplitMix64 (Steele, Lea & Flood): state += 0x9e3779b97f4a7c15, then the
/// standard xor-shift-multiply finalizer. Used for stub embeddings.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

  std::uint64_t next() noexcept {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform in (0,1): top 53 bits, offset by half a step.
  double uniform_open() noexcept {
    return (static_cast<double>(next() >> 11) + 0.5) * 0x1.0p-53;
  }

 private:
  std::uint64_t state_;
};

/// Deterministic pseudo-embedding: SplitMix64 seeded with the FNV-1a hash of
/// the thumbnail's RGB bytes, `dim` Box-Muller normals, then L2-normalized.
Embedding stub_embed(const SlideImage& img, int dim);

/// Scales to unit L2 norm; throws InvalidEmbedding for zero or non-finite input.
Eigen::VectorXd l2_normalized(const Eigen::VectorXd& v);

/// Reads `key,v0,...,v{dim-1}` rows; each vector is L2-normalized on load.
std::map<std::string, Embedding, std::less<>> load_precomputed(
    const std::filesystem::path& file);

/// Sidecar manifest that ships next to an ONNX image encoder.
struct EncoderManifest {
  std::string input_name;
  std::string output_name;  // empty: first graph output
  std::array<double, 3> mean{};
  std::array<double, 3> std{};
  int dim = 0;
  int image_size = kThumbnailSize;
  std::string checkpoint;
};

/// `clip.onnx` -> `clip.json`.
std::filesystem::path sidecar_manifest_path(const std::filesystem::path& model);
EncoderManifest load_encoder_manifest(const std::filesystem::path& manifest);

/// NCHW float tensor for one thumbnail, (v - mean[c]) / std[c].
std::vector<float> encoder_input_tensor(const SlideImage& img, const EncoderManifest& m);

}  // namespace slideq
