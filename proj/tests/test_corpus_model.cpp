#include <gtest/gtest.h>

#include <fstream>
#include <random>
#include <sstream>

#include "slideq/corpus.hpp"
#include "slideq/error.hpp"
#include "slideq/model_io.hpp"
#include "slideq/pipeline.hpp"
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

void touch_png(const fs::path& p) {
  fs::create_directories(p.parent_path());
  write_png_file(SlideImage(4, 3), p);
}

FeatureTable random_features(int n, int d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> u;
  FeatureTable t;
  t.embeddings.resize(n, d);
  for (int i = 0; i < n; ++i) {
    t.keys.push_back("s" + std::to_string(i));
    for (int j = 0; j < d; ++j) t.embeddings(i, j) = g(rng);
    t.embeddings.row(i).normalize();
    t.metrics.push_back({u(rng), u(rng), u(rng), u(rng), u(rng), u(rng), u(rng)});
  }
  return t;
}

QualityModel small_model() {
  ForestParams p;
  p.trees = 25;
  p.subsample = 64;
  return fit_quality_model(random_features(120, 24, 1), {"stub", 24, "stub"}, p, 6);
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST(ScanCorpus, DecksFromTopLevelDirectories) {
  synth::TempDir dir("scan");
  for (const char* f : {"A/1.png", "A/2.PNG", "A/sub/3.jpg", "B/1.png", "B/2.jpeg", "root.png"}) {
    touch_png(dir / f);
  }
  std::ofstream(dir / "A" / "notes.txt") << "x";
  const CorpusManifest m = scan_corpus(dir.path());
  ASSERT_EQ(m.count(), 6u);
  EXPECT_EQ(m.decks(), (std::vector<std::string>{"A", "B", "_root"}));
  std::vector<std::string> keys;
  for (const auto& e : m.entries) keys.push_back(e.key);
  EXPECT_EQ(keys, (std::vector<std::string>{"A/1.png", "A/2.PNG", "A/sub/3.jpg", "B/1.png",
                                            "B/2.jpeg", "root.png"}));
  EXPECT_EQ(m.deck_entries("A").size(), 3u);
  EXPECT_EQ(m.entries[2].deck, "A");
}

TEST(ScanCorpus, FiveEntriesTwoDecks) {
  synth::TempDir dir("scan5");
  for (const char* f : {"A/x.png", "A/y.png", "A/z.png", "B/x.png", "B/y.png"}) touch_png(dir / f);
  const CorpusManifest m = scan_corpus(dir.path());
  EXPECT_EQ(m.count(), 5u);
  EXPECT_EQ(m.decks().size(), 2u);
  EXPECT_NE(m.entries[0].key, m.entries[3].key);
}

TEST(ScanCorpus, Errors) {
  synth::TempDir dir("scan_err");
  EXPECT_EQ(code_of([&] { scan_corpus(dir.path()); }), ErrorCode::EmptyCorpus);
  EXPECT_EQ(code_of([&] { scan_corpus(dir / "missing"); }), ErrorCode::UnreadableDirectory);
}

TEST(ScanCorpus, ManifestOverride) {
  synth::TempDir dir("scan_ovr");
  for (const char* f : {"A/1.png", "A/2.png", "B/1.png"}) touch_png(dir / f);
  CorpusManifest m = scan_corpus(dir.path());
  std::ofstream(dir / "map.csv") << "key,deck\nA/2.png,talk2\n";
  apply_deck_overrides(m, dir / "map.csv");
  EXPECT_EQ(m.entries[1].deck, "talk2");
  EXPECT_EQ(m.entries[0].deck, "A");
  std::ofstream(dir / "bad.csv") << "key,deck\nC/9.png,x\n";
  EXPECT_EQ(code_of([&] { apply_deck_overrides(m, dir / "bad.csv"); }), ErrorCode::LabelMismatch);
}

TEST(ModelIo, RoundTripScoresIdentically) {
  synth::TempDir dir("model");
  const QualityModel m = small_model();
  save_model(m, dir / "m.json");
  const QualityModel back = load_model(dir / "m.json");
  EXPECT_EQ(back.pca.components, m.pca.components);
  EXPECT_EQ(back.scaler.std, m.scaler.std);
  EXPECT_EQ(back.fingerprint, m.fingerprint);
  EXPECT_EQ(back.forest.flag_threshold(), m.forest.flag_threshold());
  const FeatureTable probes = random_features(10, 24, 2);
  const AnomalyReport a = score_features(m, probes, Scorer::Forest);
  const AnomalyReport b = score_features(back, probes, Scorer::Forest);
  const AnomalyReport ca = score_features(m, probes, Scorer::Centroid);
  const AnomalyReport cb = score_features(back, probes, Scorer::Centroid);
  for (std::size_t i = 0; i < 10; ++i) {
    EXPECT_LE(std::abs(a.slides[i].anomaly - b.slides[i].anomaly), 1e-12);
    EXPECT_LE(std::abs(ca.slides[i].anomaly - cb.slides[i].anomaly), 1e-12);
  }
  // Saving the loaded model reproduces the file byte for byte.
  save_model(back, dir / "m2.json");
  EXPECT_EQ(read_text(dir / "m.json"), read_text(dir / "m2.json"));
}

TEST(ModelIo, VersionChecksumAndTruncation) {
  synth::TempDir dir("model_bad");
  const std::string text = serialize_model(small_model());

  std::string v99 = text;
  v99.replace(v99.find("\"format_version\":1"), 18, "\"format_version\":99");
  EXPECT_EQ(code_of([&] { deserialize_model(v99); }), ErrorCode::ModelVersionMismatch);

  std::string tampered = text;
  const auto pos = tampered.find("\"flag_threshold\":") + 17;
  tampered[pos] = tampered[pos] == '0' ? '1' : '0';
  EXPECT_EQ(code_of([&] { deserialize_model(tampered); }), ErrorCode::ChecksumMismatch);

  for (std::size_t cut : {std::size_t{0}, std::size_t{10}, text.size() / 2, text.size() - 3}) {
    const ErrorCode c = code_of([&] { deserialize_model(text.substr(0, cut)); });
    EXPECT_TRUE(c == ErrorCode::ParseError || c == ErrorCode::ChecksumMismatch) << cut;
  }
  EXPECT_EQ(code_of([&] { load_model(dir / "absent.json"); }), ErrorCode::IoError);
}

TEST(ModelIo, EveryByteFlipIsRejectedOrHarmless) {
  const QualityModel m = small_model();
  const std::string text = serialize_model(m);
  std::mt19937_64 rng(17);
  const FeatureTable probes = random_features(3, 24, 5);
  const AnomalyReport ref = score_features(m, probes, Scorer::Forest);
  for (int trial = 0; trial < 200; ++trial) {
    std::string bad = text;
    const auto at = static_cast<std::size_t>(rng() % bad.size());
    bad[at] = static_cast<char>(bad[at] ^ (1 + rng() % 127));
    try {
      const QualityModel loaded = deserialize_model(bad);
      // Only whitespace-level edits can survive; the model must be unchanged.
      const AnomalyReport r = score_features(loaded, probes, Scorer::Forest);
      for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(r.slides[i].anomaly, ref.slides[i].anomaly);
    } catch (const Error& e) {
      EXPECT_TRUE(e.code() == ErrorCode::ParseError || e.code() == ErrorCode::ChecksumMismatch ||
                  e.code() == ErrorCode::ModelVersionMismatch)
          << e.what();
    }
  }
}

TEST(ModelIo, ConsistencyCheck) {
  QualityModel m = small_model();
  EXPECT_EQ(m.descriptor_dim(), 6 + 7);
  m.centroid.centroid.resize(5);
  EXPECT_EQ(code_of([&] { serialize_model(m); }), ErrorCode::ParseError);
}
