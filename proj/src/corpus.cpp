#include "slideq/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <system_error>

#include "slideq/csv.hpp"
#include "slideq/error.hpp"

namespace fs = std::filesystem;

namespace slideq {
namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

}  // namespace

std::set<std::string> default_image_extensions() { return {".png", ".jpg", ".jpeg"}; }

std::vector<std::string> CorpusManifest::decks() const {
  std::set<std::string> ids;
  for (const auto& e : entries) ids.insert(e.deck);
  return {ids.begin(), ids.end()};
}

std::vector<CorpusEntry> CorpusManifest::deck_entries(const std::string& deck) const {
  std::vector<CorpusEntry> out;
  std::copy_if(entries.begin(), entries.end(), std::back_inserter(out),
               [&](const CorpusEntry& e) { return e.deck == deck; });
  return out;
}

CorpusManifest scan_corpus(const fs::path& root, const std::set<std::string>& extensions) {
  std::error_code ec;
  if (!fs::is_directory(root, ec)) {
    throw Error(ErrorCode::UnreadableDirectory, "not a readable directory: " + root.string());
  }
  std::set<std::string> wanted;
  for (const auto& e : extensions) wanted.insert(lower(e));

  CorpusManifest manifest;
  manifest.root = root;
  fs::recursive_directory_iterator it(root, fs::directory_options::follow_directory_symlink, ec);
  if (ec) throw Error(ErrorCode::UnreadableDirectory, root.string() + ": " + ec.message());
  for (const fs::recursive_directory_iterator end; it != end; it.increment(ec)) {
    if (ec) throw Error(ErrorCode::UnreadableDirectory, root.string() + ": " + ec.message());
    if (!it->is_regular_file(ec)) continue;
    if (!wanted.count(lower(it->path().extension().string()))) continue;
    const fs::path rel = it->path().lexically_relative(root);
    CorpusEntry entry;
    entry.key = rel.generic_string();
    entry.deck = std::distance(rel.begin(), rel.end()) > 1 ? rel.begin()->string() : kRootDeck;
    entry.path = it->path();
    manifest.entries.push_back(std::move(entry));
  }
  if (ec) throw Error(ErrorCode::UnreadableDirectory, root.string() + ": " + ec.message());
  if (manifest.entries.empty()) {
    throw Error(ErrorCode::EmptyCorpus, "no images under " + root.string());
  }
  std::sort(manifest.entries.begin(), manifest.entries.end(),
            [](const CorpusEntry& a, const CorpusEntry& b) { return a.key < b.key; });
  return manifest;
}

void apply_deck_overrides(CorpusManifest& manifest, const fs::path& csv) {
  std::ifstream in(csv, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + csv.string());
  CsvReader reader(in, csv.string());
  if (reader.header().size() != 2 || reader.header()[0] != "key" || reader.header()[1] != "deck") {
    throw Error(ErrorCode::ParseError, csv.string() + ": header must be 'key,deck'");
  }
  std::map<std::string, CorpusEntry*> by_key;
  for (auto& e : manifest.entries) by_key[e.key] = &e;
  std::vector<std::string> fields;
  while (reader.next(fields)) {
    if (fields.size() != 2 || fields[1].empty()) {
      throw Error(ErrorCode::ParseError, reader.where() + ": expected 'key,deck'");
    }
    const auto hit = by_key.find(fields[0]);
    if (hit == by_key.end()) {
      throw Error(ErrorCode::LabelMismatch, reader.where() + ": unknown key '" + fields[0] + "'");
    }
    hit->second->deck = fields[1];
  }
}

}  // namespace slideq
