#include "tilevae/corpus.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "json.hpp"
#include "tilevae/error.hpp"

namespace tilevae {

using nlohmann::json;

namespace {

constexpr std::uint64_t kFnvOffset = 1469598103934665603ULL;
constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

void fnv_mix(std::uint64_t& h, std::string_view bytes) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= kFnvPrime;
  }
  // field separator so ("ab","c") and ("a","bc") differ
  h ^= 0xff;
  h *= kFnvPrime;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    start = end + 1;
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  return lines;
}

std::string_view to_string(HeightPolicy p) {
  return p == HeightPolicy::pad_top_empty ? "pad_top_empty" : "reject";
}

HeightPolicy parse_height_policy(std::string_view s) {
  if (s == "pad_top_empty") return HeightPolicy::pad_top_empty;
  if (s == "reject") return HeightPolicy::reject;
  fail(ErrorCode::BadConfig, "unknown height_policy '" + std::string(s) + "'");
}

}  // namespace

// ---------------------------------------------------------------------------
// TileAlphabet

TileAlphabet::TileAlphabet(std::vector<TileInfo> entries) : entries_(std::move(entries)) {
  if (entries_.empty() || entries_.size() > 255)
    fail(ErrorCode::BadConfig, "alphabet must have 1..255 entries");
  std::set<std::string> names;
  int empties = 0;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& e = entries_[i];
    if (e.id != static_cast<int>(i)) fail(ErrorCode::BadConfig, "alphabet ids must be 0..size-1 in order");
    if (!names.insert(e.name).second) fail(ErrorCode::BadConfig, "duplicate alphabet name '" + e.name + "'");
    if (e.name == "empty") {
      if (e.solid || e.hazard) fail(ErrorCode::BadConfig, "'empty' must be neither solid nor hazard");
      empty_id_ = static_cast<TileId>(i);
      ++empties;
    }
  }
  if (empties != 1) fail(ErrorCode::BadConfig, "alphabet needs exactly one 'empty' entry");
}

TileAlphabet TileAlphabet::unified() {
  // id, name, solid, hazard, enemy, climbable, glyph
  return TileAlphabet({
      {0, "empty", false, false, false, false, '-'},
      {1, "solid", true, false, false, false, 'X'},
      {2, "breakable", true, false, false, false, 'S'},
      {3, "pipe", true, false, false, false, '['},
      {4, "platform", true, false, false, false, 'T'},
      {5, "hazard", false, true, false, false, 'H'},
      {6, "enemy", false, false, true, false, 'E'},
      {7, "collectable", false, false, false, false, 'o'},
      {8, "climbable", false, false, false, true, '|'},
      {9, "door", false, false, false, false, 'D'},
  });
}

std::optional<TileId> TileAlphabet::find(std::string_view name) const {
  for (const auto& e : entries_)
    if (e.name == name) return static_cast<TileId>(e.id);
  return std::nullopt;
}

TileId TileAlphabet::id_of(std::string_view name) const {
  if (auto id = find(name)) return *id;
  fail(ErrorCode::BadConfig, "alphabet has no entry '" + std::string(name) + "'");
}

std::uint64_t TileAlphabet::fingerprint() const {
  std::uint64_t h = kFnvOffset;
  for (const auto& e : entries_) {
    fnv_mix(h, e.name);
    const char flags[4] = {char('0' + e.solid), char('0' + e.hazard), char('0' + e.enemy),
                           char('0' + e.climbable)};
    fnv_mix(h, std::string_view(flags, 4));
  }
  return h;
}

// ---------------------------------------------------------------------------
// GameSpec / GlyphTable

std::string_view to_string(Progression p) {
  return p == Progression::horizontal ? "horizontal" : "vertical";
}

Progression parse_progression(std::string_view s) {
  if (s == "horizontal") return Progression::horizontal;
  if (s == "vertical") return Progression::vertical;
  fail(ErrorCode::BadConfig, "unknown progression '" + std::string(s) + "'");
}

GameSpec GameSpec::parse(std::string_view text, const TileAlphabet& alphabet) {
  GameSpec spec;
  bool in_tiles = false;
  bool have_name = false;
  int lineno = 0;
  for (std::string_view raw : split_lines(text)) {
    ++lineno;
    std::string_view line = raw;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (trim(line).empty()) continue;
    if (in_tiles && line.size() >= 3) {
      const std::string_view rest = trim(line.substr(1));
      if (!rest.empty() && rest.front() == '=') {
        const char c = line.front();
        const std::string target(trim(rest.substr(1)));
        alphabet.id_of(target);
        if (!spec.char_map.emplace(c, target).second)
          fail(ErrorCode::BadConfig, "duplicate tile char '" + std::string(1, c) + "'");
        continue;
      }
    }
    const std::string_view t = trim(line);
    if (t.front() == '#' || t.front() == ';') continue;
    if (t == "[tiles]") {
      in_tiles = true;
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string_view::npos || in_tiles)
      fail(ErrorCode::BadConfig, "game config line " + std::to_string(lineno) + ": expected key = value");
    const std::string_view key = trim(t.substr(0, eq));
    const std::string_view value = trim(t.substr(eq + 1));
    if (key == "name") {
      spec.name = std::string(value);
      have_name = !value.empty();
    } else if (key == "progression") {
      spec.progression = parse_progression(value);
    } else if (key == "height_policy") {
      spec.height_policy = parse_height_policy(value);
    } else {
      fail(ErrorCode::BadConfig, "unknown game config key '" + std::string(key) + "'");
    }
  }
  if (!have_name) fail(ErrorCode::BadConfig, "game config needs a name");
  if (spec.char_map.empty()) fail(ErrorCode::BadConfig, "game config has no [tiles] entries");
  return spec;
}

GameSpec GameSpec::load(const std::filesystem::path& path, const TileAlphabet& alphabet) {
  return parse(read_text_file(path), alphabet);
}

GlyphTable GlyphTable::for_game(const GameSpec& spec, const TileAlphabet& alphabet) {
  GlyphTable t;
  // first char per name (map order) is the rendering glyph
  for (const auto& [c, name] : spec.char_map) t.glyphs_.try_emplace(alphabet.id_of(name), c);
  return t;
}

GlyphTable GlyphTable::unified(const TileAlphabet& alphabet) {
  GlyphTable t;
  for (const auto& e : alphabet.entries()) t.glyphs_.emplace(static_cast<TileId>(e.id), e.glyph);
  return t;
}

char GlyphTable::glyph(TileId id) const {
  auto it = glyphs_.find(id);
  return it == glyphs_.end() ? kFallback : it->second;
}

// ---------------------------------------------------------------------------
// Labels / Corpus lookups

std::vector<double> LabelVector::flat() const {
  std::vector<double> v(game_onehot);
  v.insert(v.end(), density_tercile.begin(), density_tercile.end());
  v.push_back(has_hazard);
  v.push_back(has_enemy);
  return v;
}

LabelVector LabelVector::from_flat(std::span<const double> v, std::size_t n_games) {
  if (v.size() != width(n_games)) fail(ErrorCode::BadShape, "label vector has wrong width");
  LabelVector l;
  l.game_onehot.assign(v.begin(), v.begin() + static_cast<long>(n_games));
  for (int k = 0; k < 3; ++k) l.density_tercile[k] = v[n_games + k];
  l.has_hazard = v[n_games + 3];
  l.has_enemy = v[n_games + 4];
  return l;
}

const Segment* Corpus::find(std::string_view id) const {
  for (const auto& s : segments)
    if (s.id == id) return &s;
  return nullptr;
}

std::vector<std::string> Corpus::game_names() const {
  std::vector<std::string> names;
  for (const auto& g : games) names.push_back(g.name);
  return names;
}

const GameSpec* Corpus::game(std::string_view name) const {
  for (const auto& g : games)
    if (g.name == name) return &g;
  return nullptr;
}

std::vector<const Segment*> Corpus::segments_of(std::string_view game) const {
  std::vector<const Segment*> out;
  for (const auto& s : segments)
    if (s.game == game) out.push_back(&s);
  return out;
}

// ---------------------------------------------------------------------------
// Parsing and segmentation

LevelGrid parse_level(std::string_view text, const GameSpec& spec, const TileAlphabet& alphabet) {
  const auto lines = split_lines(text);
  if (lines.empty()) fail(ErrorCode::TooSmall, "level text is empty");
  const std::size_t width = lines.front().size();
  for (std::size_t r = 0; r < lines.size(); ++r) {
    if (lines[r].size() != width)
      fail(ErrorCode::RaggedRows, "line " + std::to_string(r + 1) + " has length " +
                                      std::to_string(lines[r].size()) + ", expected " +
                                      std::to_string(width));
  }
  if (width == 0) fail(ErrorCode::TooSmall, "level has zero-width rows");

  std::map<char, TileId> lookup;
  for (const auto& [c, name] : spec.char_map) lookup.emplace(c, alphabet.id_of(name));

  LevelGrid grid;
  grid.game = spec.name;
  grid.progression = spec.progression;
  grid.rows = static_cast<int>(lines.size());
  grid.cols = static_cast<int>(width);
  grid.cells.reserve(lines.size() * width);
  for (std::size_t r = 0; r < lines.size(); ++r) {
    for (std::size_t c = 0; c < width; ++c) {
      auto it = lookup.find(lines[r][c]);
      if (it == lookup.end())
        fail(ErrorCode::UnknownChar, "unknown tile char '" + std::string(1, lines[r][c]) +
                                         "' at line " + std::to_string(r + 1) + ", col " +
                                         std::to_string(c + 1));
      grid.cells.push_back(it->second);
    }
  }

  // The cross axis must be exactly one segment wide.
  const bool horizontal = spec.progression == Progression::horizontal;
  const int cross = horizontal ? grid.rows : grid.cols;
  if (cross != kSegmentSize) {
    const bool can_pad = spec.height_policy == HeightPolicy::pad_top_empty && horizontal &&
                         cross < kSegmentSize;
    if (!can_pad)
      fail(ErrorCode::HeightPolicyViolation,
           "level " + std::string(horizontal ? "height " : "width ") + std::to_string(cross) +
               " does not match segment size " + std::to_string(kSegmentSize));
    const int pad = kSegmentSize - grid.rows;
    grid.cells.insert(grid.cells.begin(), static_cast<std::size_t>(pad) * grid.cols,
                      alphabet.empty_id());
    grid.rows = kSegmentSize;
  }
  return grid;
}

std::string segment_id(const Segment& seg) {
  std::uint64_t h = kFnvOffset;
  fnv_mix(h, seg.game);
  fnv_mix(h, seg.level);
  fnv_mix(h, seg.source_offset ? std::to_string(*seg.source_offset) : std::string("-"));
  fnv_mix(h, std::string_view(reinterpret_cast<const char*>(seg.cells.data()), seg.cells.size()));
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::vector<Segment> extract_segments(const LevelGrid& grid, int stride) {
  if (stride < 1) fail(ErrorCode::BadConfig, "stride must be >= 1");
  const bool horizontal = grid.progression == Progression::horizontal;
  const int cross = horizontal ? grid.rows : grid.cols;
  const int extent = horizontal ? grid.cols : grid.rows;
  if (cross != kSegmentSize)
    fail(ErrorCode::HeightPolicyViolation, "grid cross extent must be 16 before segmentation");
  if (extent < kSegmentSize)
    fail(ErrorCode::TooSmall, "level extent " + std::to_string(extent) + " is shorter than a segment");

  std::vector<Segment> out;
  for (int offset = 0; offset + kSegmentSize <= extent; offset += stride) {
    Segment s;
    s.game = grid.game;
    s.level = grid.name;
    s.source_offset = offset;
    // vertical offsets count up from the bottom row
    const int row0 = horizontal ? 0 : grid.rows - offset - kSegmentSize;
    const int col0 = horizontal ? offset : 0;
    for (int r = 0; r < kSegmentSize; ++r)
      for (int c = 0; c < kSegmentSize; ++c) s.at(r, c) = grid.at(row0 + r, col0 + c);
    s.id = segment_id(s);
    out.push_back(std::move(s));
  }
  return out;
}

Corpus build_corpus(const std::vector<LevelGrid>& levels, const std::vector<GameSpec>& games,
                    const TileAlphabet& alphabet, int stride) {
  Corpus corpus;
  corpus.alphabet = alphabet;
  for (const auto& grid : levels) {
    for (TileId id : grid.cells)
      if (id >= alphabet.size()) fail(ErrorCode::BadShape, "grid cell outside alphabet");
    if (!corpus.game(grid.game)) {
      auto it = std::find_if(games.begin(), games.end(),
                             [&](const GameSpec& g) { return g.name == grid.game; });
      if (it != games.end()) {
        corpus.games.push_back(*it);
      } else {
        GameSpec placeholder;
        placeholder.name = grid.game;
        placeholder.progression = grid.progression;
        corpus.games.push_back(std::move(placeholder));
      }
    }
    for (auto& s : extract_segments(grid, stride)) corpus.segments.push_back(std::move(s));
  }
  if (corpus.segments.empty()) fail(ErrorCode::EmptyCorpus, "no segments extracted");

  std::set<std::string> seen;
  for (const auto& s : corpus.segments) {
    if (!seen.insert(s.id).second)
      fail(ErrorCode::BadConfig, "duplicate segment id " + s.id + " (same level ingested twice?)");
    corpus.by_game[s.game].push_back(s.id);
  }

  // Density terciles are ranks in the pooled distribution; ties by id.
  const std::size_t n = corpus.segments.size();
  std::vector<double> dens(n);
  for (std::size_t i = 0; i < n; ++i) {
    int solid = 0;
    for (TileId t : corpus.segments[i].cells) solid += alphabet.is_solid(t);
    dens[i] = solid / static_cast<double>(kSegmentCells);
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (dens[a] != dens[b]) return dens[a] < dens[b];
    return corpus.segments[a].id < corpus.segments[b].id;
  });
  std::vector<int> tercile(n);
  for (std::size_t rank = 0; rank < n; ++rank) tercile[order[rank]] = static_cast<int>(rank * 3 / n);

  const auto names = corpus.game_names();
  for (std::size_t i = 0; i < n; ++i) {
    const auto& s = corpus.segments[i];
    LabelVector l;
    l.game_onehot.assign(names.size(), 0.0);
    l.game_onehot[std::find(names.begin(), names.end(), s.game) - names.begin()] = 1.0;
    l.density_tercile[tercile[i]] = 1.0;
    for (TileId t : s.cells) {
      if (alphabet.is_hazard(t)) l.has_hazard = 1.0;
      if (alphabet.is_enemy(t)) l.has_enemy = 1.0;
    }
    corpus.labels.emplace(s.id, std::move(l));
  }
  return corpus;
}

// ---------------------------------------------------------------------------
// Encodings

std::vector<double> encode_one_hot(const Segment& seg, const TileAlphabet& alphabet) {
  const std::size_t a = alphabet.size();
  std::vector<double> v(kSegmentCells * a, 0.0);
  for (std::size_t cell = 0; cell < kSegmentCells; ++cell) v[cell * a + seg.cells[cell]] = 1.0;
  return v;
}

Segment decode_argmax(std::span<const double> probs, std::size_t alphabet_size, double tolerance) {
  if (alphabet_size == 0 || probs.size() != kSegmentCells * alphabet_size)
    fail(ErrorCode::BadShape, "expected " + std::to_string(kSegmentCells) + " blocks of " +
                                  std::to_string(alphabet_size) + " probabilities");
  Segment s;
  s.game = "generated";
  for (std::size_t cell = 0; cell < kSegmentCells; ++cell) {
    const auto block = probs.subspan(cell * alphabet_size, alphabet_size);
    double sum = 0.0;
    std::size_t best = 0;
    for (std::size_t k = 0; k < alphabet_size; ++k) {
      if (!(block[k] >= 0.0)) fail(ErrorCode::NotNormalized, "negative or NaN probability");
      sum += block[k];
      if (block[k] > block[best]) best = k;
    }
    if (std::abs(sum - 1.0) > tolerance)
      fail(ErrorCode::NotNormalized, "cell " + std::to_string(cell) + " block sums to " + std::to_string(sum));
    s.cells[cell] = static_cast<TileId>(best);
  }
  s.id = segment_id(s);
  return s;
}

std::string render_text(const Segment& seg, const GlyphTable& glyphs) {
  std::string out;
  out.reserve(kSegmentCells + kSegmentSize);
  for (int r = 0; r < kSegmentSize; ++r) {
    for (int c = 0; c < kSegmentSize; ++c) out.push_back(glyphs.glyph(seg.at(r, c)));
    out.push_back('\n');
  }
  return out;
}

std::string render_text(const LevelGrid& grid, const GlyphTable& glyphs) {
  std::string out;
  out.reserve(static_cast<std::size_t>(grid.rows) * (grid.cols + 1));
  for (int r = 0; r < grid.rows; ++r) {
    for (int c = 0; c < grid.cols; ++c) out.push_back(glyphs.glyph(grid.at(r, c)));
    out.push_back('\n');
  }
  return out;
}

// ---------------------------------------------------------------------------
// Persistence

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::Io, "cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) fail(ErrorCode::Io, "write failed for " + path.string());
}

namespace {

json alphabet_to_json(const TileAlphabet& a) {
  json arr = json::array();
  for (const auto& e : a.entries())
    arr.push_back({{"id", e.id},
                   {"name", e.name},
                   {"solid", e.solid},
                   {"hazard", e.hazard},
                   {"enemy", e.enemy},
                   {"climbable", e.climbable},
                   {"glyph", std::string(1, e.glyph)}});
  return arr;
}

TileAlphabet alphabet_from_json(const json& arr) {
  std::vector<TileInfo> entries;
  for (const auto& e : arr) {
    TileInfo t;
    t.id = e.at("id").get<int>();
    t.name = e.at("name").get<std::string>();
    t.solid = e.at("solid").get<bool>();
    t.hazard = e.at("hazard").get<bool>();
    t.enemy = e.at("enemy").get<bool>();
    t.climbable = e.at("climbable").get<bool>();
    const auto g = e.value("glyph", std::string("?"));
    t.glyph = g.empty() ? '?' : g.front();
    entries.push_back(std::move(t));
  }
  return TileAlphabet(std::move(entries));
}

}  // namespace

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  json doc;
  doc["format_version"] = 1;
  doc["alphabet"] = alphabet_to_json(corpus.alphabet);
  json games = json::array();
  for (const auto& g : corpus.games) {
    json cm = json::object();
    for (const auto& [c, name] : g.char_map) cm[std::string(1, c)] = name;
    games.push_back({{"name", g.name},
                     {"progression", to_string(g.progression)},
                     {"height_policy", to_string(g.height_policy)},
                     {"char_map", cm}});
  }
  doc["games"] = games;
  json segs = json::array();
  for (const auto& s : corpus.segments) {
    json j = {{"id", s.id}, {"game", s.game}, {"level", s.level}};
    j["source_offset"] = s.source_offset ? json(*s.source_offset) : json(nullptr);
    j["cells"] = std::vector<int>(s.cells.begin(), s.cells.end());
    j["label"] = corpus.labels.at(s.id).flat();
    segs.push_back(std::move(j));
  }
  doc["segments"] = segs;
  write_text_file(path, doc.dump(1));
}

Corpus load_corpus(const std::filesystem::path& path) {
  json doc;
  try {
    doc = json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    fail(ErrorCode::CorruptFile, "corpus " + path.string() + ": " + e.what());
  }
  try {
    if (doc.at("format_version").get<int>() != 1)
      fail(ErrorCode::VersionMismatch, "unsupported corpus format_version");
    Corpus c;
    c.alphabet = alphabet_from_json(doc.at("alphabet"));
    for (const auto& g : doc.at("games")) {
      GameSpec spec;
      spec.name = g.at("name").get<std::string>();
      spec.progression = parse_progression(g.at("progression").get<std::string>());
      spec.height_policy = parse_height_policy(g.at("height_policy").get<std::string>());
      for (const auto& [k, v] : g.at("char_map").items()) spec.char_map.emplace(k.front(), v.get<std::string>());
      c.games.push_back(std::move(spec));
    }
    const std::size_t n_games = c.games.size();
    for (const auto& j : doc.at("segments")) {
      Segment s;
      s.id = j.at("id").get<std::string>();
      s.game = j.at("game").get<std::string>();
      s.level = j.at("level").get<std::string>();
      if (!j.at("source_offset").is_null()) s.source_offset = j.at("source_offset").get<int>();
      const auto cells = j.at("cells").get<std::vector<int>>();
      if (cells.size() != kSegmentCells) fail(ErrorCode::CorruptFile, "segment " + s.id + " has wrong cell count");
      for (std::size_t k = 0; k < cells.size(); ++k) {
        if (cells[k] < 0 || static_cast<std::size_t>(cells[k]) >= c.alphabet.size())
          fail(ErrorCode::CorruptFile, "segment " + s.id + " has an out-of-alphabet cell");
        s.cells[k] = static_cast<TileId>(cells[k]);
      }
      const auto label = j.at("label").get<std::vector<double>>();
      c.labels.emplace(s.id, LabelVector::from_flat(label, n_games));
      c.by_game[s.game].push_back(s.id);
      c.segments.push_back(std::move(s));
    }
    if (c.segments.empty()) fail(ErrorCode::EmptyCorpus, "corpus file has no segments");
    return c;
  } catch (const json::exception& e) {
    fail(ErrorCode::CorruptFile, "corpus " + path.string() + ": " + e.what());
  }
}

}  // namespace tilevae
