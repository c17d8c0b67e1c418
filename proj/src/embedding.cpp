#include "slideq/embedding.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <sstream>

#include "json.hpp"

#include "onnx_runtime.hpp"
#include "slideq/csv.hpp"
#include "slideq/error.hpp"

namespace slideq {
namespace {

class StubProvider final : public EmbeddingProvider {
 public:
  explicit StubProvider(int dim) : dim_(dim) {
    if (dim < 8) throw Error(ErrorCode::InvalidArgument, "stub embeddings need dim >= 8");
  }
  Embedding embed(const SlideImage& img, std::string_view) const override {
    return stub_embed(img, dim_);
  }
  ProviderFingerprint fingerprint() const override { return {"stub", dim_, "stub"}; }
  int dim() const noexcept override { return dim_; }

 private:
  int dim_;
};

class PrecomputedProvider final : public EmbeddingProvider {
 public:
  PrecomputedProvider(const std::filesystem::path& file, int dim)
      : table_(load_precomputed(file)), dim_(dim), hash_(hash_file(file)) {
    if (!table_.empty() && table_.begin()->second.dim() != dim) {
      throw Error(ErrorCode::DimensionMismatch,
                  "precomputed file has dim " + std::to_string(table_.begin()->second.dim()) +
                      ", configured " + std::to_string(dim));
    }
  }
  Embedding embed(const SlideImage&, std::string_view key) const override {
    const auto it = table_.find(key);
    if (it == table_.end()) {
      throw Error(ErrorCode::EmbeddingLookupMiss, "no precomputed embedding for '" +
                                                      std::string(key) + "'");
    }
    return it->second;
  }
  ProviderFingerprint fingerprint() const override {
    return {"precomputed-file", dim_, hash_};
  }
  int dim() const noexcept override { return dim_; }

 private:
  std::map<std::string, Embedding, std::less<>> table_;
  int dim_;
  std::string hash_;
};

class RuntimeModelProvider final : public EmbeddingProvider {
 public:
  RuntimeModelProvider(const std::filesystem::path& model, int dim, const std::string& library)
      : manifest_(load_encoder_manifest(sidecar_manifest_path(model))),
        dim_(dim),
        hash_(hash_file(model)),
        session_(model, manifest_.input_name, manifest_.output_name, library) {
    if (manifest_.dim != dim) {
      throw Error(ErrorCode::DimensionMismatch,
                  "encoder manifest declares dim " + std::to_string(manifest_.dim) +
                      ", configured " + std::to_string(dim));
    }
  }
  Embedding embed(const SlideImage& img, std::string_view) const override {
    std::vector<float> input = encoder_input_tensor(img, manifest_);
    const std::int64_t side = manifest_.image_size;
    const std::vector<float> out = session_.run(input, {1, 3, side, side});
    if (static_cast<int>(out.size()) != dim_) {
      throw Error(ErrorCode::DimensionMismatch, "encoder produced " +
                                                    std::to_string(out.size()) +
                                                    " values, expected " + std::to_string(dim_));
    }
    Eigen::VectorXd v(dim_);
    for (int i = 0; i < dim_; ++i) v(i) = out[static_cast<std::size_t>(i)];
    return {l2_normalized(v)};
  }
  ProviderFingerprint fingerprint() const override { return {"runtime-model", dim_, hash_}; }
  int dim() const noexcept override { return dim_; }

 private:
  EncoderManifest manifest_;
  int dim_;
  std::string hash_;
  detail::OnnxSession session_;
};

std::array<double, 3> read_triplet(const nlohmann::json& j, const char* field) {
  if (!j.contains(field) || !j[field].is_array() || j[field].size() != 3) {
    throw Error(ErrorCode::ModelLoadError, std::string("manifest field '") + field +
                                               "' must be an array of 3 numbers");
  }
  return {j[field][0].get<double>(), j[field][1].get<double>(), j[field][2].get<double>()};
}

}  // namespace

std::string_view to_string(ProviderKind kind) noexcept {
  switch (kind) {
    case ProviderKind::RuntimeModel: return "runtime-model";
    case ProviderKind::PrecomputedFile: return "precomputed-file";
    case ProviderKind::Stub: return "stub";
  }
  return "stub";
}

ProviderKind parse_provider_kind(std::string_view text) {
  if (text == "runtime-model") return ProviderKind::RuntimeModel;
  if (text == "precomputed-file") return ProviderKind::PrecomputedFile;
  if (text == "stub") return ProviderKind::Stub;
  throw Error(ErrorCode::InvalidArgument, "unknown provider kind '" + std::string(text) + "'");
}

std::unique_ptr<EmbeddingProvider> make_provider(const ProviderConfig& cfg) {
  switch (cfg.kind) {
    case ProviderKind::Stub:
      return std::make_unique<StubProvider>(cfg.dim);
    case ProviderKind::PrecomputedFile:
      if (cfg.path.empty()) {
        throw Error(ErrorCode::InvalidArgument, "precomputed-file provider needs a path");
      }
      return std::make_unique<PrecomputedProvider>(cfg.path, cfg.dim);
    case ProviderKind::RuntimeModel:
      if (cfg.path.empty()) {
        throw Error(ErrorCode::ModelLoadError, "runtime-model provider needs a model path");
      }
      return std::make_unique<RuntimeModelProvider>(cfg.path, cfg.dim, cfg.runtime_library);
  }
  throw Error(ErrorCode::InvalidArgument, "unknown provider kind");
}

Embedding embed(const SlideImage& img, const ProviderConfig& cfg, std::string_view key) {
  return make_provider(cfg)->embed(img, key);
}

SlideImage make_thumbnail(const SlideImage& img) {
  return resize_bilinear(img, kThumbnailSize, kThumbnailSize);
}

std::vector<std::uint8_t> rgb8_bytes(const SlideImage& img) {
  std::vector<std::uint8_t> out;
  out.reserve(static_cast<std::size_t>(img.pixel_count()) * 3);
  auto q = [](double v) { return static_cast<std::uint8_t>(std::lround(v * 255.0)); };
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      out.push_back(q(img.red()(y, x)));
      out.push_back(q(img.green()(y, x)));
      out.push_back(q(img.blue()(y, x)));
    }
  }
  return out;
}

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes, std::uint64_t seed) noexcept {
  std::uint64_t h = seed;
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string hash_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                        std::istreambuf_iterator<char>());
  return "fnv1a64:" + hex64(fnv1a64(bytes));
}

Eigen::VectorXd l2_normalized(const Eigen::VectorXd& v) {
  const double norm = v.norm();
  if (!std::isfinite(norm) || norm <= 0.0) {
    throw Error(ErrorCode::InvalidEmbedding, "embedding has zero or non-finite norm");
  }
  return v / norm;
}

Embedding stub_embed(const SlideImage& img, int dim) {
  if (dim < 8) throw Error(ErrorCode::InvalidArgument, "stub embeddings need dim >= 8");
  const auto bytes = rgb8_bytes(make_thumbnail(img));
  SplitMix64 rng(fnv1a64(bytes));
  Eigen::VectorXd v(dim);
  for (int i = 0; i < dim; i += 2) {
    const double u1 = rng.uniform_open();
    const double u2 = rng.uniform_open();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    v(i) = radius * std::cos(2.0 * M_PI * u2);
    if (i + 1 < dim) v(i + 1) = radius * std::sin(2.0 * M_PI * u2);
  }
  return {l2_normalized(v)};
}

std::map<std::string, Embedding, std::less<>> load_precomputed(
    const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + file.string());
  CsvReader reader(in, file.string());
  const auto header = reader.header();
  if (header.size() < 2 || header[0] != "key") {
    throw Error(ErrorCode::ParseError, file.string() + ": header must be key,v0,...");
  }
  for (std::size_t i = 1; i < header.size(); ++i) {
    if (header[i] != "v" + std::to_string(i - 1)) {
      throw Error(ErrorCode::ParseError,
                  file.string() + ": unexpected header column '" + header[i] + "'");
    }
  }
  const auto dim = static_cast<Eigen::Index>(header.size() - 1);
  std::map<std::string, Embedding, std::less<>> table;
  std::vector<std::string> row;
  while (reader.next(row)) {
    if (static_cast<Eigen::Index>(row.size()) - 1 != dim) {
      throw Error(ErrorCode::DimensionMismatch,
                  reader.where() + ": row has " + std::to_string(row.size() - 1) +
                      " values, header declares " + std::to_string(dim));
    }
    Eigen::VectorXd v(dim);
    for (Eigen::Index i = 0; i < dim; ++i) {
      v(i) = parse_double(row[static_cast<std::size_t>(i + 1)], reader.where());
    }
    Embedding e;
    try {
      e.values = l2_normalized(v);
    } catch (const Error&) {
      throw Error(ErrorCode::ParseError, reader.where() + ": zero or non-finite vector");
    }
    if (!table.emplace(row[0], std::move(e)).second) {
      throw Error(ErrorCode::ParseError, reader.where() + ": duplicate key '" + row[0] + "'");
    }
  }
  return table;
}

std::filesystem::path sidecar_manifest_path(const std::filesystem::path& model) {
  auto p = model;
  p.replace_extension(".json");
  return p;
}

EncoderManifest load_encoder_manifest(const std::filesystem::path& manifest) {
  std::ifstream in(manifest);
  if (!in) {
    throw Error(ErrorCode::ModelLoadError, "missing encoder manifest " + manifest.string());
  }
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
    EncoderManifest m;
    m.input_name = j.value("input_name", std::string{});
    m.output_name = j.value("output_name", std::string{});
    m.mean = read_triplet(j, "mean");
    m.std = read_triplet(j, "std");
    m.dim = j.at("dim").get<int>();
    m.image_size = j.value("image_size", kThumbnailSize);
    m.checkpoint = j.value("checkpoint", std::string{});
    for (double s : m.std) {
      if (!(s > 0.0)) throw Error(ErrorCode::ModelLoadError, "manifest std must be > 0");
    }
    if (m.dim < 1 || m.image_size < 1) {
      throw Error(ErrorCode::ModelLoadError, "manifest dim and image_size must be positive");
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ModelLoadError, manifest.string() + ": " + e.what());
  }
}

std::vector<float> encoder_input_tensor(const SlideImage& img, const EncoderManifest& m) {
  const SlideImage thumb = resize_bilinear(img, m.image_size, m.image_size);
  const std::size_t plane = static_cast<std::size_t>(m.image_size) * m.image_size;
  std::vector<float> out(3 * plane);
  const Plane<double>* channels[3] = {&thumb.red(), &thumb.green(), &thumb.blue()};
  for (std::size_t c = 0; c < 3; ++c) {
    const Plane<double>& p = *channels[c];
    for (Eigen::Index i = 0; i < p.size(); ++i) {
      out[c * plane + static_cast<std::size_t>(i)] =
          static_cast<float>((p(i) - m.mean[c]) / m.std[c]);
    }
  }
  return out;
}

}  // namespace slideq
