#include "tilevae/operations.hpp"

#include "tilevae/error.hpp"

namespace tilevae::ops {

const TileAlphabet& ModelContext::alphabet() const {
  static const TileAlphabet unified = TileAlphabet::unified();
  return corpus ? corpus->alphabet : unified;
}

const Corpus& ModelContext::require_corpus() const {
  if (!corpus) fail(ErrorCode::UnknownCorpus, "this operation needs the model's training corpus");
  return *corpus;
}

namespace {

const Json& require(const Json& req, const char* key) {
  if (!req.is_object() || !req.contains(key)) fail(ErrorCode::BadConfig, std::string("missing field '") + key + "'");
  return req[key];
}

long long get_int(const Json& req, const char* key) {
  const Json& v = require(req, key);
  if (!v.is_number_integer()) fail(ErrorCode::BadConfig, std::string("field '") + key + "' must be an integer");
  return v.get<long long>();
}

std::uint64_t get_seed(const Json& req) {
  if (!req.contains("seed")) return 0;
  const Json& v = req["seed"];
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
    fail(ErrorCode::BadConfig, "seed must be a non-negative integer");
  return v.get<std::uint64_t>();
}

std::string get_string(const Json& req, const char* key, std::string fallback) {
  if (!req.contains(key)) return fallback;
  if (!req[key].is_string()) fail(ErrorCode::BadConfig, std::string("field '") + key + "' must be a string");
  return req[key].get<std::string>();
}

void require_unconditional(const ModelContext& ctx, std::string_view what) {
  if (ctx.params().variant == Variant::label_conditional)
    fail(ErrorCode::BadConfig, std::string(what) + " needs an unconditional model; use condition for label-steered decoding");
}

Json with_seed(Json doc, std::uint64_t seed) {
  doc["seed"] = seed;
  return doc;
}

Json decoded_doc(const ModelContext& ctx, Segment seg, std::span<const double> z) {
  seg.game = "generated";
  seg.id = segment_id(seg);
  Json doc = segment_doc(seg, ctx.alphabet());
  doc["latent"] = std::vector<double>(z.begin(), z.end());
  return doc;
}

PlayabilityConfig playability_of(const Json& req) {
  return playability_from_json(req.is_object() ? req.value("playability", Json()) : Json());
}

}  // namespace

Segment resolve_segment(const ModelContext& ctx, const Json& ref) {
  std::string id;
  if (ref.is_string()) id = ref.get<std::string>();
  else if (ref.is_object() && ref.contains("id") && !ref.contains("cells") && !ref.contains("rows"))
    id = ref["id"].get<std::string>();
  if (id.empty()) return segment_from_json(ref, ctx.alphabet());
  const Segment* seg = ctx.lookup ? ctx.lookup(id) : (ctx.corpus ? ctx.corpus->find(id) : nullptr);
  if (!seg) fail(ErrorCode::NotFound, "no segment with id '" + id + "'");
  return *seg;
}

Json generate(const ModelContext& ctx, const Json& req, const ModelContext* next) {
  require_unconditional(ctx, "generate");
  const long long n = get_int(req, "n_segments");
  if (n < 0) fail(ErrorCode::OutOfRange, "n_segments must be >= 0");
  const std::uint64_t seed = get_seed(req);
  Rng rng(seed);
  const Level level = generate_level(ctx.params(), ctx.alphabet(), static_cast<int>(n), rng,
                                     next ? next->model.get() : nullptr, playability_of(req));
  return with_seed(level_doc(level), seed);
}

Json continue_level(const ModelContext& ctx, const Json& req) {
  require_unconditional(ctx, "continue");
  const Segment seed_segment = resolve_segment(ctx, require(req, "seed_segment"));
  const long long n_more = get_int(req, "n_more");
  if (n_more < 0) fail(ErrorCode::OutOfRange, "n_more must be >= 0");
  const ContinueMode mode = parse_continue_mode(get_string(req, "mode", "deterministic"));
  const std::uint64_t seed = get_seed(req);
  Rng rng(seed);
  const Level level = tilevae::continue_level(ctx.params(), ctx.alphabet(), seed_segment, static_cast<int>(n_more),
                                              rng, mode, playability_of(req));
  Json doc = with_seed(level_doc(level), seed);
  doc["mode"] = mode == ContinueMode::deterministic ? "deterministic" : "sampled";
  return doc;
}

Json interpolate(const ModelContext& ctx, const Json& req) {
  require_unconditional(ctx, "interpolate");
  const Segment a = resolve_segment(ctx, require(req, "segment_a"));
  const Segment b = resolve_segment(ctx, require(req, "segment_b"));
  Json out = Json::array();
  if (req.contains("t")) {
    const auto za = embed(ctx.params(), a), zb = embed(ctx.params(), b);
    const std::vector<double> ts = req["t"].is_array() ? vector_from_json(req["t"], "t")
                                                       : std::vector<double>{req["t"].is_number() ? req["t"].get<double>() : NAN};
    for (double t : ts) {
      const auto z = tilevae::interpolate(za.values, zb.values, t);
      out.push_back(decoded_doc(ctx, decode_segment(ctx.params(), z.values), z.values));
    }
    return out;
  }
  const long long steps = req.contains("steps") ? get_int(req, "steps") : 4;
  if (steps < 1) fail(ErrorCode::OutOfRange, "steps must be >= 1");
  const auto za = embed(ctx.params(), a), zb = embed(ctx.params(), b);
  for (const auto& seg : interpolation_chain(ctx.params(), a, b, static_cast<int>(steps))) {
    const std::size_t i = out.size();
    const double t = static_cast<double>(i) / static_cast<double>(steps);
    const auto z = tilevae::interpolate(za.values, zb.values, t);
    Json doc = decoded_doc(ctx, seg, z.values);
    doc["t"] = t;
    out.push_back(std::move(doc));
  }
  return out;
}

Json search(const ModelContext& ctx, const Json& req) {
  require_unconditional(ctx, "search");
  const Segment input = resolve_segment(ctx, require(req, "input_segment"));
  const MetricKind kind = metric_from_json(require(req, "metric"));
  const Condition cond = parse_condition(get_string(req, "condition", "similar"));
  const ESConfig es = es_config_from_json(req.value("es_config", Json()));
  // distance references are filled in from the input by the search objective
  MetricSpec metric;
  metric.kind = kind;
  if (kind == MetricKind::histogram_distance) metric.reference_segment = input;
  if (kind == MetricKind::latent_distance) metric.reference_latent = embed(ctx.params(), input).values;
  const Segment found = search_level(ctx.params(), ctx.alphabet(), input, metric, cond, es);
  const auto z = embed(ctx.params(), found);
  Json doc = decoded_doc(ctx, found, z.values);
  doc["metric"] = std::string(to_string(kind));
  doc["condition"] = cond == Condition::similar ? "similar" : "dissimilar";
  doc["input_value"] = kind == MetricKind::histogram_distance || kind == MetricKind::latent_distance
                           ? 0.0
                           : evaluate(metric, input, ctx.alphabet(), &ctx.params());
  doc["value"] = evaluate(metric, found, ctx.alphabet(), &ctx.params());
  return with_seed(std::move(doc), es.seed);
}

Json condition(const ModelContext& ctx, const Json& req) {
  if (ctx.params().variant != Variant::label_conditional)
    fail(ErrorCode::BadConfig, "condition needs a label_conditional model");
  const Json& lv = require(req, "label_vector");
  std::vector<double> label;
  if (lv.is_array()) {
    label = vector_from_json(lv, "label_vector");
  } else if (lv.is_object()) {
    const auto games = ctx.require_corpus().game_names();
    LabelVector v;
    v.game_onehot.assign(games.size(), 0.0);
    const std::string game = get_string(lv, "game", "");
    const auto it = std::find(games.begin(), games.end(), game);
    if (it == games.end()) fail(ErrorCode::UnknownGame, "unknown game '" + game + "'");
    v.game_onehot[static_cast<std::size_t>(it - games.begin())] = 1.0;
    const long long tercile = lv.contains("density_tercile") ? get_int(lv, "density_tercile") : 1;
    if (tercile < 0 || tercile > 2) fail(ErrorCode::OutOfRange, "density_tercile must be 0, 1 or 2");
    v.density_tercile[static_cast<std::size_t>(tercile)] = 1.0;
    v.has_hazard = lv.value("has_hazard", false) ? 1.0 : 0.0;
    v.has_enemy = lv.value("has_enemy", false) ? 1.0 : 0.0;
    label = v.flat();
  } else {
    fail(ErrorCode::BadShape, "label_vector must be an array or an object");
  }
  if (label.size() != ctx.params().dims.label)
    fail(ErrorCode::BadShape, "label_vector has " + std::to_string(label.size()) + " entries, model expects " +
                                  std::to_string(ctx.params().dims.label));
  const std::uint64_t seed = get_seed(req);
  Rng rng(seed);
  const auto z = sample_prior(ctx.params().dims.latent, rng);
  Json doc = decoded_doc(ctx, decode_segment(ctx.params(), z.values, label), z.values);
  doc["label_vector"] = label;
  return with_seed(std::move(doc), seed);
}

Json blend_canvas(const ModelContext& ctx, const Json& req) {
  require_unconditional(ctx, "blend canvas");
  const BlendWeights weights = weights_from_json(require(req, "weights"));
  const auto attrs = attribute_vectors(ctx.params(), ctx.require_corpus());
  const auto z = combine(weights, attrs);
  Json doc;
  doc["latent"] = z.values;
  doc["segment"] = decoded_doc(ctx, decode_segment(ctx.params(), z.values), z.values);
  if (attrs.size() >= 2) {
    const auto props = game_proportions(z.values, attrs);
    Json p = Json::object();
    for (std::size_t g = 0; g < attrs.size(); ++g) p[attrs[g].game] = props[g];
    doc["proportions"] = std::move(p);
  }
  return doc;
}

Json blend_progression(const ModelContext& ctx, const Json& req) {
  require_unconditional(ctx, "blend progression");
  const BlendSchedule schedule = schedule_from_json(require(req, "schedule"));
  const long long n = get_int(req, "n_segments");
  if (n < 1) fail(ErrorCode::OutOfRange, "n_segments must be >= 1");
  const ESConfig es = es_config_from_json(req.value("es_config", Json()));
  const std::uint64_t seed = get_seed(req);
  BlendOptions opts;
  opts.direction = parse_progression(get_string(req, "direction", "horizontal"));
  opts.playability = playability_of(req);
  if (req.contains("proportion_weight")) opts.proportion_weight = req["proportion_weight"].get<double>();
  if (req.contains("playability_weight")) opts.playability_weight = req["playability_weight"].get<double>();
  const auto attrs = attribute_vectors(ctx.params(), ctx.require_corpus());
  Rng rng(seed);
  const BlendReport rep = tilevae::blend_progression(ctx.params(), ctx.alphabet(), attrs, schedule,
                                                     static_cast<int>(n), es, rng, opts);
  Json doc = with_seed(level_doc(rep.level), seed);
  doc["phase_of_segment"] = rep.phase_of_segment;
  Json props = Json::array();
  int playable_count = 0;
  for (std::size_t i = 0; i < rep.proportions.size(); ++i) {
    Json p = Json::object();
    for (std::size_t g = 0; g < attrs.size(); ++g) p[attrs[g].game] = rep.proportions[i][g];
    props.push_back(std::move(p));
    playable_count += rep.segment_playable[i];
  }
  doc["proportions"] = std::move(props);
  doc["segment_playable"] = rep.segment_playable;
  doc["playability_rate"] = static_cast<double>(playable_count) / static_cast<double>(n);
  return doc;
}

Json decode_latent(const ModelContext& ctx, const Json& req) {
  const auto z = vector_from_json(require(req, "z"), "z");
  std::vector<double> label;
  if (req.contains("label_vector")) label = vector_from_json(req["label_vector"], "label_vector");
  return decoded_doc(ctx, decode_segment(ctx.params(), z, label), z);
}

Json projection(const ModelContext& ctx, const Json& config) {
  const ProjectionConfig cfg = projection_config_from_json(config);
  return projection_doc(tsne_project(ctx.params(), ctx.require_corpus(), cfg));
}

Json training_metadata(const std::string& corpus_id, const TrainConfig& config, const TrainResult& result) {
  const ModelDims& d = result.params.dims;
  Json meta = {{"corpus_id", corpus_id},
               {"train_config", train_config_json(config)},
               {"dims",
                {{"input", d.input}, {"hidden", d.hidden}, {"latent", d.latent}, {"label", d.label}, {"channels", d.channels}}}};
  if (!result.report.epochs.empty()) {
    const auto& last = result.report.epochs.back();
    meta["final"] = {{"total", last.loss.total}, {"tile_accuracy", last.tile_accuracy}};
  }
  return meta;
}

std::string render_level(const Json& level, const TileAlphabet& alphabet) {
  const Level lv = level_from_json(level, alphabet);
  if (lv.segments.empty()) return {};
  return render_text(lv.grid(), GlyphTable::unified(alphabet));
}

}  // namespace tilevae::ops
