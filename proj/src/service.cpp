#include "tilevae/service.hpp"

#include <sys/socket.h>

#include <cstdlib>
#include <algorithm>
#include <random>

#include "httplib.h"
#include "tilevae/error.hpp"

namespace tilevae {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Config

ServiceConfig ServiceConfig::parse(std::string_view text, const fs::path& base) {
  const Json doc = parse_json(text);
  if (!doc.is_object()) fail(ErrorCode::BadConfig, "service config must be an object");
  ServiceConfig c;
  auto path_of = [&](const std::string& p) { return fs::path(p).is_absolute() || base.empty() ? fs::path(p) : base / p; };
  for (const auto& [key, value] : doc.items()) {
    try {
      if (key == "host") c.host = value.get<std::string>();
      else if (key == "port") c.port = value.get<int>();
      else if (key == "data_dir") c.data_dir = path_of(value.get<std::string>());
      else if (key == "corpora")
        for (const auto& p : value) c.corpora.push_back(path_of(p.get<std::string>()));
      else fail(ErrorCode::BadConfig, "unknown service config key '" + key + "'");
    } catch (const Json::exception&) {
      fail(ErrorCode::BadConfig, "bad value for service config key '" + key + "'");
    }
  }
  if (c.port < 0 || c.port > 65535) fail(ErrorCode::BadConfig, "port must lie in [0, 65535]");
  return c;
}

ServiceConfig ServiceConfig::resolve(const std::optional<fs::path>& path) {
  std::optional<fs::path> file = path;
  if (!file) {
    if (const char* env = std::getenv("TILEVAE_CONFIG"); env && *env) file = env;
  }
  ServiceConfig c = file ? parse(read_text_file(*file), file->parent_path()) : ServiceConfig{};
  if (const char* env = std::getenv("TILEVAE_HOST"); env && *env) c.host = env;
  if (const char* env = std::getenv("TILEVAE_PORT"); env && *env) {
    char* end = nullptr;
    const long port = std::strtol(env, &end, 10);
    if (*end != '\0' || port < 0 || port > 65535) fail(ErrorCode::BadConfig, "TILEVAE_PORT is not a port number");
    c.port = static_cast<int>(port);
  }
  if (const char* env = std::getenv("TILEVAE_DATA_DIR"); env && *env) c.data_dir = env;
  return c;
}

// ---------------------------------------------------------------------------
// Registry

std::string_view to_string(ModelStatus s) {
  switch (s) {
    case ModelStatus::ready: return "ready";
    case ModelStatus::training: return "training";
    case ModelStatus::failed: return "failed";
  }
  return "?";
}

Json ModelEntry::to_json() const {
  Json doc = metadata;
  doc["id"] = id;
  doc["variant"] = std::string(to_string(variant));
  doc["status"] = std::string(to_string(status));
  return doc;
}

ModelRegistry::ModelRegistry(fs::path models_dir) : dir_(std::move(models_dir)) {}

void ModelRegistry::rescan() {
  std::map<std::string, ModelEntry, std::less<>> found;
  std::error_code ec;
  if (fs::is_directory(dir_, ec)) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir_))
      if (e.is_regular_file() && e.path().extension() == ".ckpt") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& file : files) {
      ModelEntry entry;
      entry.id = file.stem().string();
      entry.checkpoint = file;
      const fs::path sidecar = fs::path(file).replace_extension(".json");
      try {
        if (fs::exists(sidecar)) entry.metadata = parse_json(read_text_file(sidecar));
        const ModelParams params = load_checkpoint(file);
        entry.variant = params.variant;
        entry.status = ModelStatus::ready;
      } catch (const std::exception& e) {
        entry.status = ModelStatus::failed;
        entry.metadata["message"] = e.what();
      }
      found.emplace(entry.id, std::move(entry));
    }
  }
  std::lock_guard lock(mutex_);
  for (auto& [id, entry] : entries_)
    if (entry.status == ModelStatus::training) found.emplace(id, entry);
  entries_ = std::move(found);
  cache_.clear();
}

std::vector<ModelEntry> ModelRegistry::list() const {
  std::lock_guard lock(mutex_);
  std::vector<ModelEntry> out;
  for (const auto& [id, e] : entries_) out.push_back(e);
  return out;
}

std::optional<ModelEntry> ModelRegistry::get(std::string_view id) const {
  std::lock_guard lock(mutex_);
  auto it = entries_.find(id);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

std::shared_ptr<const ModelParams> ModelRegistry::load(std::string_view id) const {
  std::lock_guard lock(mutex_);
  auto it = entries_.find(id);
  if (it == entries_.end()) fail(ErrorCode::NotFound, "no model '" + std::string(id) + "'");
  if (it->second.status != ModelStatus::ready)
    fail(ErrorCode::NotFound, "model '" + std::string(id) + "' is " + std::string(to_string(it->second.status)));
  if (auto c = cache_.find(id); c != cache_.end()) return c->second;
  auto params = std::make_shared<const ModelParams>(load_checkpoint(it->second.checkpoint));
  cache_.emplace(std::string(id), params);
  return params;
}

ModelEntry ModelRegistry::publish(const std::string& id, const ModelParams& params, Json metadata) {
  fs::create_directories(dir_);
  ModelEntry entry;
  entry.id = id;
  entry.checkpoint = dir_ / (id + ".ckpt");
  entry.variant = params.variant;
  entry.status = ModelStatus::ready;
  entry.metadata = std::move(metadata);
  const fs::path tmp = dir_ / (id + ".ckpt.tmp");
  save_checkpoint(params, tmp);
  write_text_file(dir_ / (id + ".json"), to_text(entry.metadata));
  fs::rename(tmp, entry.checkpoint);
  put(entry);
  return entry;
}

void ModelRegistry::put(ModelEntry entry) {
  std::lock_guard lock(mutex_);
  cache_.erase(entry.id);
  entries_.insert_or_assign(entry.id, std::move(entry));
}

void ModelRegistry::erase(std::string_view id) {
  std::lock_guard lock(mutex_);
  if (auto it = entries_.find(id); it != entries_.end()) entries_.erase(it);
  if (auto it = cache_.find(id); it != cache_.end()) cache_.erase(it);
}

std::string ModelRegistry::unique_id(const std::string& stem) const {
  std::lock_guard lock(mutex_);
  std::string id = stem;
  for (int k = 2; entries_.count(id) || fs::exists(dir_ / (id + ".ckpt")); ++k) id = stem + "-" + std::to_string(k);
  return id;
}

// ---------------------------------------------------------------------------
// Service

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::NotFound:
    case ErrorCode::UnknownCorpus:
    case ErrorCode::UnknownGame: return 404;
    case ErrorCode::JobConflict: return 409;
    case ErrorCode::BadConfig: return 400;
    case ErrorCode::NonFinite:
    case ErrorCode::Io:
    case ErrorCode::CorruptFile:
    case ErrorCode::VersionMismatch:
    case ErrorCode::PortInUse: return 500;
    default: return 422;
  }
}

namespace {

void send(httplib::Response& res, int status, const Json& doc) {
  res.status = status;
  res.set_content(to_text(doc), "application/json");
}

template <class Fn>
httplib::Server::Handler guarded(Fn fn) {
  return [fn](const httplib::Request& req, httplib::Response& res) {
    try {
      send(res, 200, fn(req));
    } catch (const Error& e) {
      send(res, http_status(e.code()), error_doc(e.code(), e.what()));
    } catch (const Json::exception& e) {
      send(res, 400, error_doc(ErrorCode::BadConfig, e.what()));
    } catch (const std::exception& e) {
      send(res, 500, error_doc(ErrorCode::Io, e.what()));
    }
  };
}

Json body_of(const httplib::Request& req) {
  const Json doc = parse_json(req.body.empty() ? std::string_view("{}") : std::string_view(req.body));
  if (!doc.is_object()) fail(ErrorCode::BadConfig, "request body must be a JSON object");
  return doc;
}

std::string model_id_of(const Json& body) {
  if (!body.contains("model_id") || !body["model_id"].is_string())
    fail(ErrorCode::BadConfig, "missing field 'model_id'");
  return body["model_id"].get<std::string>();
}

}  // namespace

Service::Service(ServiceConfig config)
    : config_(std::move(config)), server_(std::make_unique<httplib::Server>()), registry_(config_.data_dir / "models") {
  load_corpora();
  registry_.rescan();
  routes();
}

Service::~Service() {
  stop();
  wait_for_jobs();
}

void Service::load_corpora() {
  std::vector<fs::path> files = config_.corpora;
  const fs::path dir = config_.data_dir / "corpora";
  std::error_code ec;
  if (fs::is_directory(dir, ec)) {
    std::vector<fs::path> found;
    for (const auto& e : fs::directory_iterator(dir))
      if (e.is_regular_file() && e.path().extension() == ".json") found.push_back(e.path());
    std::sort(found.begin(), found.end());
    files.insert(files.end(), found.begin(), found.end());
  }
  for (const auto& f : files) {
    const std::string id = f.stem().string();
    if (corpora_.count(id)) fail(ErrorCode::BadConfig, "duplicate corpus id '" + id + "'");
    corpora_.emplace(id, std::make_shared<const Corpus>(load_corpus(f)));
  }
}

const Segment* Service::find_segment(std::string_view id) const {
  for (const auto& [cid, corpus] : corpora_)
    if (const Segment* s = corpus->find(id)) return s;
  return nullptr;
}

ops::ModelContext Service::context(std::string_view model_id) const {
  ops::ModelContext ctx;
  ctx.model = registry_.load(model_id);
  const auto entry = registry_.get(model_id);
  if (entry && entry->metadata.contains("corpus_id") && entry->metadata["corpus_id"].is_string()) {
    auto it = corpora_.find(entry->metadata["corpus_id"].get<std::string>());
    if (it != corpora_.end()) ctx.corpus = it->second;
  }
  ctx.lookup = [this](std::string_view id) { return find_segment(id); };
  return ctx;
}

void Service::routes() {
  auto& s = *server_;
  s.set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
  });
  s.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
    if (res.body.empty()) send(res, res.status, error_doc(ErrorCode::NotFound, "no route for " + req.method + " " + req.path));
  });

  s.Get("/healthz", guarded([](const httplib::Request&) { return Json{{"status", "ok"}}; }));

  s.Get("/corpora", guarded([this](const httplib::Request&) {
    Json out = Json::array();
    for (const auto& [id, corpus] : corpora_) {
      Json games = Json::array();
      for (const auto& g : corpus->game_names())
        games.push_back({{"name", g}, {"segments", corpus->segments_of(g).size()}});
      out.push_back({{"id", id}, {"segments", corpus->segments.size()}, {"games", games}});
    }
    return out;
  }));

  s.Get(R"(/corpora/([^/]+)/segments)", guarded([this](const httplib::Request& req) {
    const std::string id = req.matches[1];
    auto it = corpora_.find(id);
    if (it == corpora_.end()) fail(ErrorCode::NotFound, "no corpus '" + id + "'");
    const std::string game = req.has_param("game") ? req.get_param_value("game") : "";
    if (!game.empty() && !it->second->game(game)) fail(ErrorCode::UnknownGame, "no game '" + game + "' in corpus");
    Json out = Json::array();
    for (const auto& seg : it->second->segments)
      if (game.empty() || seg.game == game) out.push_back(segment_doc(seg, it->second->alphabet));
    return out;
  }));

  s.Get(R"(/segments/([^/]+))", guarded([this](const httplib::Request& req) {
    const std::string id = req.matches[1];
    for (const auto& [cid, corpus] : corpora_) {
      if (const Segment* seg = corpus->find(id)) {
        Json doc = segment_doc(*seg, corpus->alphabet);
        doc["corpus_id"] = cid;
        return doc;
      }
    }
    fail(ErrorCode::NotFound, "no segment '" + id + "'");
  }));

  s.Post("/models/train", guarded([this](const httplib::Request& req) { return submit_training(body_of(req)); }));
  s.Get(R"(/jobs/([^/]+))", guarded([this](const httplib::Request& req) { return job_json(req.matches[1]); }));
  s.Get("/models", guarded([this](const httplib::Request&) {
    Json out = Json::array();
    for (const auto& e : registry_.list()) out.push_back(e.to_json());
    return out;
  }));
  s.Get(R"(/models/([^/]+))", guarded([this](const httplib::Request& req) {
    const auto e = registry_.get(std::string(req.matches[1]));
    if (!e) fail(ErrorCode::NotFound, "no model '" + std::string(req.matches[1]) + "'");
    return e->to_json();
  }));

  auto model_op = [this](auto op) {
    return guarded([this, op](const httplib::Request& req) {
      Json body = body_of(req);
      const auto ctx = context(model_id_of(body));
      return op(ctx, body);
    });
  };
  // server-chosen seed, echoed in the response
  auto seeded = [](Json& body) {
    if (!body.contains("seed")) body["seed"] = std::random_device{}() & 0x7fffffff;
  };

  s.Post("/generate", guarded([this, seeded](const httplib::Request& req) {
    Json body = body_of(req);
    seeded(body);
    const auto ctx = context(model_id_of(body));
    if (body.contains("next_model_id")) {
      const auto next = context(body["next_model_id"].get<std::string>());
      return ops::generate(ctx, body, &next);
    }
    return ops::generate(ctx, body);
  }));
  s.Post("/continue", guarded([this, seeded](const httplib::Request& req) {
    Json body = body_of(req);
    seeded(body);
    return ops::continue_level(context(model_id_of(body)), body);
  }));
  s.Post("/interpolate", model_op([](const ops::ModelContext& c, const Json& b) { return ops::interpolate(c, b); }));
  s.Post("/search", guarded([this](const httplib::Request& req) {
    Json body = body_of(req);
    if (!body.contains("es_config")) body["es_config"] = Json::object();
    if (!body["es_config"].is_object()) fail(ErrorCode::BadConfig, "es_config must be an object");
    if (!body["es_config"].contains("seed")) body["es_config"]["seed"] = std::random_device{}() & 0x7fffffff;
    return ops::search(context(model_id_of(body)), body);
  }));
  s.Post("/condition", guarded([this, seeded](const httplib::Request& req) {
    Json body = body_of(req);
    seeded(body);
    return ops::condition(context(model_id_of(body)), body);
  }));
  s.Post("/blend/canvas", model_op([](const ops::ModelContext& c, const Json& b) { return ops::blend_canvas(c, b); }));
  s.Post("/blend/progression", guarded([this, seeded](const httplib::Request& req) {
    Json body = body_of(req);
    seeded(body);
    return ops::blend_progression(context(model_id_of(body)), body);
  }));
  s.Post("/latent/decode", model_op([](const ops::ModelContext& c, const Json& b) { return ops::decode_latent(c, b); }));

  s.Get("/visualize/projection", guarded([this](const httplib::Request& req) {
    if (!req.has_param("model_id")) fail(ErrorCode::BadConfig, "missing query parameter 'model_id'");
    const Json cfg = req.has_param("config") ? parse_json(req.get_param_value("config")) : Json();
    return ops::projection(context(req.get_param_value("model_id")), cfg);
  }));
}

Json Service::submit_training(const Json& req) {
  if (!req.contains("corpus_id") || !req["corpus_id"].is_string()) fail(ErrorCode::BadConfig, "missing field 'corpus_id'");
  const std::string corpus_id = req["corpus_id"].get<std::string>();
  const Variant variant = parse_variant(req.value("variant", std::string("reconstruct")));
  const TrainConfig cfg = train_config_from_json(req.value("config", Json()));

  std::lock_guard lock(jobs_mutex_);
  if (active_ && (active_->status == "queued" || active_->status == "running"))
    fail(ErrorCode::JobConflict, "training job " + active_->id + " is still running");
  auto it = corpora_.find(corpus_id);
  if (it == corpora_.end()) fail(ErrorCode::UnknownCorpus, "no corpus '" + corpus_id + "'");

  std::string model_id;
  if (req.contains("model_id")) {
    model_id = req["model_id"].get<std::string>();
    if (model_id.empty() || model_id.find_first_of("/\\.") != std::string::npos)
      fail(ErrorCode::BadConfig, "model_id must be a plain name");
    if (registry_.get(model_id)) fail(ErrorCode::JobConflict, "model '" + model_id + "' already exists");
  } else {
    model_id = registry_.unique_id(corpus_id + "-" + std::string(to_string(variant)) + "-s" + std::to_string(cfg.seed));
  }
  if (job_thread_.joinable()) job_thread_.join();

  auto job = std::make_shared<Job>();
  job->id = "job-" + std::to_string(next_job_++);
  job->corpus_id = corpus_id;
  job->variant = variant;
  job->config = cfg;
  job->model_id = model_id;
  jobs_[job->id] = job;
  active_ = job;

  ModelEntry pending;
  pending.id = model_id;
  pending.variant = variant;
  pending.status = ModelStatus::training;
  pending.metadata = {{"corpus_id", corpus_id}, {"job_id", job->id}};
  registry_.put(pending);

  job_thread_ = std::thread([this, job, corpus = it->second] { run_job(job, corpus); });
  return {{"job_id", job->id}, {"model_id", model_id}};
}

void Service::run_job(std::shared_ptr<Job> job, std::shared_ptr<const Corpus> corpus) {
  {
    std::lock_guard lock(jobs_mutex_);
    job->status = "running";
  }
  try {
    auto result = train(*corpus, job->variant, job->config, [&](int epoch, const EpochStats& s) {
      std::lock_guard lock(jobs_mutex_);
      job->epochs.push_back({{"epoch", epoch},
                             {"total", s.loss.total},
                             {"recon", s.loss.recon},
                             {"kl", s.loss.kl},
                             {"tile_accuracy", s.tile_accuracy}});
    });
    registry_.publish(job->model_id, result.params, ops::training_metadata(job->corpus_id, job->config, result));
    std::lock_guard lock(jobs_mutex_);
    job->status = "succeeded";
  } catch (const std::exception& e) {
    registry_.erase(job->model_id);
    std::lock_guard lock(jobs_mutex_);
    job->status = "failed";
    const auto* err = dynamic_cast<const Error*>(&e);
    job->message = err ? std::string(to_string(err->code())) + ": " + e.what() : e.what();
  }
}

Json Service::job_json(const std::string& id) const {
  std::lock_guard lock(jobs_mutex_);
  auto it = jobs_.find(id);
  if (it == jobs_.end()) fail(ErrorCode::NotFound, "no job '" + id + "'");
  const Job& j = *it->second;
  Json doc = {{"job_id", j.id},
              {"corpus_id", j.corpus_id},
              {"variant", std::string(to_string(j.variant))},
              {"config", train_config_json(j.config)},
              {"model_id", j.model_id},
              {"status", j.status},
              {"epochs", j.epochs}};
  if (!j.message.empty()) doc["message"] = j.message;
  return doc;
}

void Service::wait_for_jobs() {
  if (job_thread_.joinable()) job_thread_.join();
}

void Service::bind() {
  if (config_.port == 0) {
    port_ = server_->bind_to_any_port(config_.host);
    if (port_ < 0) fail(ErrorCode::PortInUse, "could not bind " + config_.host);
  } else {
    if (!server_->bind_to_port(config_.host, config_.port))
      fail(ErrorCode::PortInUse, "port " + std::to_string(config_.port) + " is not available");
    port_ = config_.port;
  }
}

void Service::start() {
  bind();
  server_thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
}

void Service::run() {
  bind();
  server_->listen_after_bind();
}

void Service::stop() {
  if (server_) server_->stop();
  if (server_thread_.joinable()) server_thread_.join();
}

}  // namespace tilevae
