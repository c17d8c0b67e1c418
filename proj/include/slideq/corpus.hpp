#pragma once

#include <filesystem>
#include <set>
#include <string>
#include <vector>

namespace slideq {

inline constexpr const char* kRootDeck = "_root";

struct CorpusEntry {
  std::string key;   // path relative to the corpus root, '/' separated
  std::string deck;
  std::filesystem::path path;
};

/// Image files under a root directory grouped into decks.
struct CorpusManifest {
  std::filesystem::path root;
  std::vector<CorpusEntry> entries;  // sorted by key

  std::size_t count() const noexcept { return entries.size(); }
  /// Distinct deck ids in sorted order.
  std::vector<std::string> decks() const;
  /// Entries belonging to `deck`, in key order.
  std::vector<CorpusEntry> deck_entries(const std::string& deck) const;
};

std::set<std::string> default_image_extensions();

/// Recursive scan. The deck id is the first path component below `root`;
/// files directly in `root` form deck "_root". Extensions match
/// case-insensitively. Files are not decoded here.
CorpusManifest scan_corpus(const std::filesystem::path& root,
                           const std::set<std::string>& extensions = default_image_extensions());

/// Reassigns decks from a `key,deck` CSV. Keys absent from the file keep
/// their directory deck; keys not in the manifest are a LabelMismatch.
void apply_deck_overrides(CorpusManifest& manifest, const std::filesystem::path& csv);

}  // namespace slideq
