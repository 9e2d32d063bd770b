#pragma once

// Level ingestion: per-game text maps into a shared tile alphabet, fixed-size
// segment extraction, and the one-hot / text conversions the model uses.

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace tilevae {

using TileId = std::uint8_t;

inline constexpr int kSegmentSize = 16;
inline constexpr int kSegmentCells = kSegmentSize * kSegmentSize;
inline constexpr int kDefaultStride = 8;

struct TileInfo {
  int id = 0;
  std::string name;
  bool solid = false;
  bool hazard = false;
  bool enemy = false;
  bool climbable = false;
  char glyph = '?';  // unified rendering glyph
};

class TileAlphabet {
 public:
  /// Validates contiguous ids, unique names and a single non-solid "empty".
  explicit TileAlphabet(std::vector<TileInfo> entries);

  /// The ten semantic tiles shared by every bundled game.
  static TileAlphabet unified();

  std::size_t size() const { return entries_.size(); }
  const std::vector<TileInfo>& entries() const { return entries_; }
  const TileInfo& operator[](TileId id) const { return entries_[id]; }

  std::optional<TileId> find(std::string_view name) const;
  TileId id_of(std::string_view name) const;  // throws BadConfig
  TileId empty_id() const { return empty_id_; }

  bool is_solid(TileId id) const { return entries_[id].solid; }
  bool is_hazard(TileId id) const { return entries_[id].hazard; }
  bool is_enemy(TileId id) const { return entries_[id].enemy; }
  bool is_climbable(TileId id) const { return entries_[id].climbable; }

  /// FNV-1a over names and flags; stored in checkpoints.
  std::uint64_t fingerprint() const;

  friend bool operator==(const TileAlphabet& a, const TileAlphabet& b) {
    return a.fingerprint() == b.fingerprint();
  }

 private:
  std::vector<TileInfo> entries_;
  TileId empty_id_ = 0;
};

enum class Progression { horizontal, vertical };
enum class HeightPolicy { pad_top_empty, reject };

std::string_view to_string(Progression p);
Progression parse_progression(std::string_view s);

struct GameSpec {
  std::string name;
  Progression progression = Progression::horizontal;
  HeightPolicy height_policy = HeightPolicy::pad_top_empty;
  std::map<char, std::string> char_map;

  /// Parses the key/value game config:
  ///
  ///     name = smb
  ///     progression = horizontal
  ///     height_policy = pad_top_empty
  ///     [tiles]
  ///     X = solid
  ///
  /// Lines starting with '#' or ';' are comments outside [tiles]; inside it
  /// every "c = name" line is an entry, so '#' can itself be a tile char.
  static GameSpec parse(std::string_view text, const TileAlphabet& alphabet);
  static GameSpec load(const std::filesystem::path& path, const TileAlphabet& alphabet);
};

/// Rendering table id -> char. Ids without a glyph render as '?'.
class GlyphTable {
 public:
  static constexpr char kFallback = '?';

  static GlyphTable for_game(const GameSpec& spec, const TileAlphabet& alphabet);
  static GlyphTable unified(const TileAlphabet& alphabet);

  char glyph(TileId id) const;

 private:
  std::map<TileId, char> glyphs_;
};

struct LevelGrid {
  int rows = 0;
  int cols = 0;
  std::vector<TileId> cells;  // row-major, row 0 at the top
  std::string game;
  std::string name;
  Progression progression = Progression::horizontal;

  TileId at(int r, int c) const { return cells[static_cast<std::size_t>(r) * cols + c]; }
  TileId& at(int r, int c) { return cells[static_cast<std::size_t>(r) * cols + c]; }
};

struct Segment {
  std::array<TileId, kSegmentCells> cells{};
  std::string game;
  std::string level;
  std::optional<int> source_offset;
  std::string id;

  TileId at(int r, int c) const { return cells[r * kSegmentSize + c]; }
  TileId& at(int r, int c) { return cells[r * kSegmentSize + c]; }

  bool same_cells(const Segment& o) const { return cells == o.cells; }
};

struct LabelVector {
  std::vector<double> game_onehot;
  std::array<double, 3> density_tercile{};
  double has_hazard = 0.0;
  double has_enemy = 0.0;

  /// [game one-hot..., tercile x3, hazard, enemy]
  std::vector<double> flat() const;
  static LabelVector from_flat(std::span<const double> v, std::size_t n_games);
  static std::size_t width(std::size_t n_games) { return n_games + 5; }
};

struct Corpus {
  TileAlphabet alphabet = TileAlphabet::unified();
  std::vector<GameSpec> games;
  std::vector<Segment> segments;
  std::map<std::string, std::vector<std::string>> by_game;
  std::map<std::string, LabelVector> labels;

  const Segment* find(std::string_view id) const;
  std::vector<std::string> game_names() const;
  const GameSpec* game(std::string_view name) const;
  std::vector<const Segment*> segments_of(std::string_view game) const;
};

LevelGrid parse_level(std::string_view text, const GameSpec& spec, const TileAlphabet& alphabet);

/// Windows of 16 along the progression axis. For vertical levels offsets are
/// counted from the bottom row, so offset + 16 is always the next segment in
/// play order.
std::vector<Segment> extract_segments(const LevelGrid& grid, int stride = kDefaultStride);

/// Pools segments from all levels and derives labels. `games` supplies the
/// specs kept with the corpus for rendering; only games with levels are used.
Corpus build_corpus(const std::vector<LevelGrid>& levels, const std::vector<GameSpec>& games,
                    const TileAlphabet& alphabet, int stride = kDefaultStride);

std::string segment_id(const Segment& seg);

std::vector<double> encode_one_hot(const Segment& seg, const TileAlphabet& alphabet);

/// Argmax per cell block of `alphabet_size` probabilities; lowest id wins ties.
Segment decode_argmax(std::span<const double> probs, std::size_t alphabet_size,
                      double tolerance = 1e-5);

std::string render_text(const Segment& seg, const GlyphTable& glyphs);
std::string render_text(const LevelGrid& grid, const GlyphTable& glyphs);

/// Corpus persistence as a JSON document.
void save_corpus(const Corpus& corpus, const std::filesystem::path& path);
Corpus load_corpus(const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace tilevae
