#include <gtest/gtest.h>

#include <fstream>
#include <set>

#include "json.hpp"
#include "slideq/embedding.hpp"
#include "slideq/error.hpp"
#include "synthetic.hpp"

using namespace slideq;
namespace fs = std::filesystem;

namespace {

template <typename Fn>
ErrorCode code_of(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected slideq::Error";
  return ErrorCode::IoError;
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream(p, std::ios::binary) << text;
}

std::string precomputed_csv(int dim, const std::vector<std::pair<std::string, std::vector<double>>>& rows) {
  std::string s = "key";
  for (int i = 0; i < dim; ++i) s += ",v" + std::to_string(i);
  s += "\n";
  for (const auto& [key, values] : rows) {
    s += key;
    for (double v : values) s += "," + std::to_string(v);
    s += "\n";
  }
  return s;
}

bool have_runtime() { return std::string(SLIDEQ_TEST_ORT_LIB).size() > 0 && fs::exists(SLIDEQ_TEST_ORT_LIB); }

}  // namespace

TEST(Hashing, Fnv1aKnownVectors) {
  EXPECT_EQ(fnv1a64({}), 0xcbf29ce484222325ULL);
  const std::string a = "a";
  EXPECT_EQ(fnv1a64({reinterpret_cast<const std::uint8_t*>(a.data()), 1}), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(hex64(0xabcULL), "0000000000000abc");
}

TEST(Hashing, SplitMix64ReferenceSequence) {
  // First outputs for seed 1234567 from the reference C implementation.
  SplitMix64 rng(1234567);
  EXPECT_EQ(rng.next(), 6457827717110365317ULL);
  EXPECT_EQ(rng.next(), 3203168211198807973ULL);
  EXPECT_EQ(rng.next(), 9817491932198370423ULL);
}

TEST(Stub, UnitNormAndDeterministic) {
  const SlideImage img = synth::tidy_slide(3);
  const Embedding a = stub_embed(img, 512);
  const Embedding b = stub_embed(img, 512);
  EXPECT_EQ(a.dim(), 512);
  EXPECT_NEAR(a.values.norm(), 1.0, 1e-12);
  EXPECT_EQ(a.values, b.values);
  ProviderConfig cfg;
  EXPECT_EQ(embed(img, cfg).values, a.values);
}

TEST(Stub, OnePixelChangesGiveDistinctVectors) {
  const SlideImage base(224, 224, {0.5, 0.5, 0.5});
  std::set<std::vector<double>> seen;
  seen.insert({stub_embed(base, 16).values.data(), stub_embed(base, 16).values.data() + 16});
  for (int i = 0; i < 100; ++i) {
    SlideImage img = base;
    img.set(i % 224, (i * 37) % 224, {(i % 7) / 7.0, 0.1, 0.9});
    const Eigen::VectorXd v = stub_embed(img, 16).values;
    seen.insert({v.data(), v.data() + 16});
  }
  EXPECT_EQ(seen.size(), 101u);
}

TEST(Stub, DimensionValidation) {
  EXPECT_EQ(code_of([] { stub_embed(SlideImage(4, 4), 4); }), ErrorCode::InvalidArgument);
  EXPECT_EQ(stub_embed(SlideImage(4, 4), 9).dim(), 9);
}

TEST(Thumbnail, SquashTo224) {
  const SlideImage t = make_thumbnail(SlideImage(640, 360));
  EXPECT_EQ(t.width(), 224);
  EXPECT_EQ(t.height(), 224);
}

TEST(L2, NormalizesAndRejectsZero) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(8);
  v(0) = 3;
  v(1) = 4;
  const Eigen::VectorXd n = l2_normalized(v);
  EXPECT_DOUBLE_EQ(n(0), 0.6);
  EXPECT_DOUBLE_EQ(n(1), 0.8);
  EXPECT_EQ(code_of([] { l2_normalized(Eigen::VectorXd::Zero(8)); }), ErrorCode::InvalidEmbedding);
}

TEST(Precomputed, LoadsAndNormalizes) {
  synth::TempDir dir("pre");
  std::vector<double> a(8, 0.0), b(8, 1.0), c(8, 0.0);
  a[0] = 3;
  a[1] = 4;
  c[7] = -2;
  write_text(dir / "e.csv", precomputed_csv(8, {{"deck/a.png", a}, {"deck/b.png", b}, {"c.png", c}}));
  const auto table = load_precomputed(dir / "e.csv");
  ASSERT_EQ(table.size(), 3u);
  EXPECT_DOUBLE_EQ(table.at("deck/a.png").values(0), 0.6);
  EXPECT_DOUBLE_EQ(table.at("deck/a.png").values(1), 0.8);
  EXPECT_DOUBLE_EQ(table.at("c.png").values(7), -1.0);

  ProviderConfig cfg;
  cfg.kind = ProviderKind::PrecomputedFile;
  cfg.path = dir / "e.csv";
  cfg.dim = 8;
  const auto provider = make_provider(cfg);
  EXPECT_EQ(provider->embed(SlideImage(2, 2), "deck/b.png").values, table.at("deck/b.png").values);
  EXPECT_EQ(code_of([&] { provider->embed(SlideImage(2, 2), "nope.png"); }),
            ErrorCode::EmbeddingLookupMiss);
  EXPECT_EQ(provider->fingerprint().kind, "precomputed-file");
  EXPECT_EQ(provider->fingerprint().model_hash, hash_file(dir / "e.csv"));

  cfg.dim = 16;
  EXPECT_EQ(code_of([&] { make_provider(cfg); }), ErrorCode::DimensionMismatch);
}

TEST(Precomputed, Errors) {
  synth::TempDir dir("pre_err");
  write_text(dir / "mixed.csv", "key,v0,v1,v2\na,1,2,3\nb,1,2\n");
  EXPECT_EQ(code_of([&] { load_precomputed(dir / "mixed.csv"); }), ErrorCode::DimensionMismatch);
  write_text(dir / "bad.csv", "key,v0,v1\na,1,zz\n");
  EXPECT_EQ(code_of([&] { load_precomputed(dir / "bad.csv"); }), ErrorCode::ParseError);
  write_text(dir / "dup.csv", "key,v0,v1\na,1,2\na,3,4\n");
  EXPECT_EQ(code_of([&] { load_precomputed(dir / "dup.csv"); }), ErrorCode::ParseError);
  write_text(dir / "zero.csv", "key,v0,v1\na,0,0\n");
  EXPECT_EQ(code_of([&] { load_precomputed(dir / "zero.csv"); }), ErrorCode::ParseError);
  write_text(dir / "hdr.csv", "name,v0\na,1\n");
  EXPECT_EQ(code_of([&] { load_precomputed(dir / "hdr.csv"); }), ErrorCode::ParseError);
}

TEST(ProviderKindNames, RoundTrip) {
  for (auto k : {ProviderKind::RuntimeModel, ProviderKind::PrecomputedFile, ProviderKind::Stub}) {
    EXPECT_EQ(parse_provider_kind(to_string(k)), k);
  }
  EXPECT_EQ(code_of([] { parse_provider_kind("clip"); }), ErrorCode::InvalidArgument);
}

TEST(EncoderManifest, SidecarAndFields) {
  EXPECT_EQ(sidecar_manifest_path("models/clip.onnx"), fs::path("models/clip.json"));
  const EncoderManifest m = load_encoder_manifest(SLIDEQ_TEST_FIXTURES "/tiny_encoder.json");
  EXPECT_EQ(m.input_name, "pixel_values");
  EXPECT_EQ(m.dim, 16);
  EXPECT_EQ(m.image_size, 224);
  EXPECT_DOUBLE_EQ(m.mean[0], 0.48145466);
  synth::TempDir dir("manifest");
  write_text(dir / "m.json", R"({"input_name": "x", "mean": [0.5, 0.5], "std": [1, 1, 1], "dim": 4})");
  EXPECT_EQ(code_of([&] { load_encoder_manifest(dir / "m.json"); }), ErrorCode::ModelLoadError);
  EXPECT_EQ(code_of([&] { load_encoder_manifest(dir / "none.json"); }), ErrorCode::ModelLoadError);
}

TEST(EncoderManifest, InputTensorLayout) {
  EncoderManifest m;
  m.mean = {0.5, 0.25, 0.0};
  m.std = {0.5, 0.25, 1.0};
  m.image_size = 4;
  const std::vector<float> t = encoder_input_tensor(SlideImage(8, 8, {1.0, 0.5, 0.25}), m);
  ASSERT_EQ(t.size(), 48u);
  EXPECT_FLOAT_EQ(t[0], 1.0f);
  EXPECT_FLOAT_EQ(t[16], 1.0f);
  EXPECT_FLOAT_EQ(t[32], 0.25f);
}

TEST(RuntimeModel, MissingModelFails) {
  ProviderConfig cfg;
  cfg.kind = ProviderKind::RuntimeModel;
  cfg.path = "/nonexistent/model.onnx";
  cfg.dim = 16;
  EXPECT_EQ(code_of([&] { make_provider(cfg); }), ErrorCode::ModelLoadError);
}

TEST(RuntimeModel, TinyEncoderMatchesDirectComputation) {
  if (!have_runtime()) GTEST_SKIP() << "ONNX Runtime library not found";
  ProviderConfig cfg;
  cfg.kind = ProviderKind::RuntimeModel;
  cfg.path = SLIDEQ_TEST_FIXTURES "/tiny_encoder.onnx";
  cfg.dim = 16;
  cfg.runtime_library = SLIDEQ_TEST_ORT_LIB;
  const auto provider = make_provider(cfg);
  EXPECT_EQ(provider->dim(), 16);
  EXPECT_EQ(provider->fingerprint().kind, "runtime-model");

  std::ifstream wf(SLIDEQ_TEST_FIXTURES "/tiny_encoder_weights.json");
  const auto weights = nlohmann::json::parse(wf);
  const EncoderManifest m = load_encoder_manifest(SLIDEQ_TEST_FIXTURES "/tiny_encoder.json");

  for (std::uint64_t seed : {1, 2, 3}) {
    const SlideImage img = synth::clutter(synth::tidy_slide(seed), seed);
    const SlideImage thumb = make_thumbnail(img);
    const Plane<double>* ch[3] = {&thumb.red(), &thumb.green(), &thumb.blue()};
    Eigen::VectorXd pooled(3);
    for (int c = 0; c < 3; ++c) pooled(c) = ((*ch[c] - m.mean[c]) / m.std[c]).mean();
    Eigen::VectorXd expected(16);
    for (int j = 0; j < 16; ++j) {
      double s = weights["b"][j].get<double>();
      for (int c = 0; c < 3; ++c) s += pooled(c) * weights["W"][c][j].get<double>();
      expected(j) = s;
    }
    expected.normalize();
    const Embedding e = provider->embed(img, "");
    ASSERT_EQ(e.dim(), 16);
    EXPECT_NEAR(e.values.norm(), 1.0, 1e-6);
    // The runtime pools 224 * 224 values in float32.
    EXPECT_LE((e.values - expected).cwiseAbs().maxCoeff(), 1e-4);
    EXPECT_EQ(provider->embed(img, "").values, e.values);
  }

  cfg.dim = 32;
  EXPECT_EQ(code_of([&] { make_provider(cfg); }), ErrorCode::DimensionMismatch);
}
