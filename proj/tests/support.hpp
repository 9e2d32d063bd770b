#pragma once

// Fixtures shared by the test binaries: the bundled toy corpus, small cached
// models, segment builders and scratch directories.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "tilevae/corpus.hpp"
#include "tilevae/error.hpp"
#include "tilevae/model.hpp"
#include "tilevae/rng.hpp"

namespace tilevae::testing {

std::filesystem::path source_dir();

/// Every bundled level, named "<game>/<stem>", with the bundled game specs.
struct BundledLevels {
  std::vector<GameSpec> games;
  std::vector<LevelGrid> levels;
  std::vector<std::string> texts;  // raw file contents, aligned with levels
};
const BundledLevels& bundled_levels();

/// Two-game corpus over every bundled level at the default stride.
const Corpus& toy_corpus();

/// Small, quickly trained model (hidden 32, latent 4) on toy_corpus().
const ModelParams& small_model(Variant variant = Variant::reconstruct);
TrainConfig small_config();

/// 16 strings of unified glyphs, row 0 on top.
Segment segment_from_rows(const std::vector<std::string>& rows);
Segment filled_segment(TileId id);
/// Solid bottom row, empty elsewhere.
Segment flat_ground();
Segment random_segment(Rng& rng, const TileAlphabet& alphabet = TileAlphabet::unified());

/// Code of the library error thrown by `f`, or nullopt if it returns.
template <class F>
std::optional<ErrorCode> code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return std::nullopt;
}

/// Lays out a service data directory: corpora/toy.json plus models/toy-rec,
/// toy-next and toy-cond (small models with corpus sidecars).
void populate_data_dir(const std::filesystem::path& dir);

/// FNV-1a of a byte string, hex encoded.
std::string digest(std::string_view bytes);

/// Fresh empty directory under the system temp dir, removed on destruction.
class ScratchDir {
 public:
  explicit ScratchDir(const std::string& tag);
  ~ScratchDir();
  ScratchDir(const ScratchDir&) = delete;
  ScratchDir& operator=(const ScratchDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace tilevae::testing
