#include "support.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <mutex>

#include "tilevae/error.hpp"

namespace tilevae::testing {

namespace fs = std::filesystem;

fs::path source_dir() { return TILEVAE_SOURCE_DIR; }

const BundledLevels& bundled_levels() {
  static const BundledLevels bundle = [] {
    BundledLevels b;
    const TileAlphabet alphabet = TileAlphabet::unified();
    const fs::path data = source_dir() / "data";
    std::vector<fs::path> cfgs;
    for (const auto& e : fs::directory_iterator(data / "games"))
      if (e.path().extension() == ".cfg") cfgs.push_back(e.path());
    std::sort(cfgs.begin(), cfgs.end());
    for (const auto& c : cfgs) b.games.push_back(GameSpec::load(c, alphabet));
    for (const auto& g : b.games) {
      std::vector<fs::path> files;
      for (const auto& e : fs::directory_iterator(data / "levels" / g.name))
        if (e.path().extension() == ".txt") files.push_back(e.path());
      std::sort(files.begin(), files.end());
      for (const auto& f : files) {
        b.texts.push_back(read_text_file(f));
        LevelGrid grid = parse_level(b.texts.back(), g, alphabet);
        grid.name = g.name + "/" + f.stem().string();
        b.levels.push_back(std::move(grid));
      }
    }
    return b;
  }();
  return bundle;
}

const Corpus& toy_corpus() {
  static const Corpus corpus = [] {
    const auto& b = bundled_levels();
    return build_corpus(b.levels, b.games, TileAlphabet::unified(), kDefaultStride);
  }();
  return corpus;
}

TrainConfig small_config() {
  TrainConfig c;
  c.epochs = 4;
  c.batch_size = 32;
  c.learning_rate = 3e-3;
  c.hidden = 32;
  c.latent = 4;
  c.seed = 11;
  return c;
}

const ModelParams& small_model(Variant variant) {
  static std::mutex mutex;
  static std::map<Variant, ModelParams> cache;
  std::lock_guard lock(mutex);
  auto it = cache.find(variant);
  if (it == cache.end()) it = cache.emplace(variant, train(toy_corpus(), variant, small_config()).params).first;
  return it->second;
}

Segment segment_from_rows(const std::vector<std::string>& rows) {
  if (rows.size() != kSegmentSize) fail(ErrorCode::BadShape, "need 16 rows");
  const TileAlphabet alphabet = TileAlphabet::unified();
  Segment s;
  for (int r = 0; r < kSegmentSize; ++r) {
    if (rows[r].size() != kSegmentSize) fail(ErrorCode::BadShape, "need 16 columns");
    for (int c = 0; c < kSegmentSize; ++c) {
      const auto it = std::find_if(alphabet.entries().begin(), alphabet.entries().end(),
                                   [&](const TileInfo& t) { return t.glyph == rows[r][c]; });
      if (it == alphabet.entries().end()) fail(ErrorCode::UnknownChar, std::string(1, rows[r][c]));
      s.at(r, c) = static_cast<TileId>(it->id);
    }
  }
  s.game = "test";
  s.id = segment_id(s);
  return s;
}

Segment filled_segment(TileId id) {
  Segment s;
  s.cells.fill(id);
  s.game = "test";
  s.id = segment_id(s);
  return s;
}

Segment flat_ground() {
  Segment s = filled_segment(TileAlphabet::unified().id_of("empty"));
  for (int c = 0; c < kSegmentSize; ++c) s.at(kSegmentSize - 1, c) = TileAlphabet::unified().id_of("solid");
  s.id = segment_id(s);
  return s;
}

Segment random_segment(Rng& rng, const TileAlphabet& alphabet) {
  Segment s;
  for (auto& c : s.cells) c = static_cast<TileId>(rng.index(alphabet.size()));
  s.game = "test";
  s.id = segment_id(s);
  return s;
}

std::string digest(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void populate_data_dir(const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "corpora");
  std::filesystem::create_directories(dir / "models");
  save_corpus(toy_corpus(), dir / "corpora" / "toy.json");
  const std::pair<const char*, Variant> models[] = {
      {"toy-rec", Variant::reconstruct}, {"toy-next", Variant::next_segment}, {"toy-cond", Variant::label_conditional}};
  for (const auto& [id, variant] : models) {
    save_checkpoint(small_model(variant), dir / "models" / (std::string(id) + ".ckpt"));
    write_text_file(dir / "models" / (std::string(id) + ".json"), "{\"corpus_id\": \"toy\"}\n");
  }
}

ScratchDir::ScratchDir(const std::string& tag) {
  static int counter = 0;
  Rng rng(std::random_device{}());
  path_ = fs::temp_directory_path() /
          ("tilevae-" + tag + "-" + std::to_string(++counter) + "-" + std::to_string(rng.next_u64() % 1000000));
  fs::remove_all(path_);
  fs::create_directories(path_);
}

ScratchDir::~ScratchDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

}  // namespace tilevae::testing
