#pragma once

// HTTP facade: corpora, a model registry backed by the data directory, one
// background training job at a time, and every operation as an endpoint.

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "tilevae/operations.hpp"

namespace httplib {
class Server;
}

namespace tilevae {

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  std::filesystem::path data_dir = "data";
  std::vector<std::filesystem::path> corpora;  // in addition to data_dir/corpora/*.json

  /// {"host", "port", "data_dir", "corpora"}; relative paths resolve against
  /// the config file's directory.
  static ServiceConfig parse(std::string_view text, const std::filesystem::path& base = {});

  /// Config file from `path` or TILEVAE_CONFIG, then TILEVAE_HOST,
  /// TILEVAE_PORT and TILEVAE_DATA_DIR overrides.
  static ServiceConfig resolve(const std::optional<std::filesystem::path>& path);
};

enum class ModelStatus { ready, training, failed };

std::string_view to_string(ModelStatus s);

struct ModelEntry {
  std::string id;
  std::filesystem::path checkpoint;
  Variant variant = Variant::reconstruct;
  ModelStatus status = ModelStatus::ready;
  Json metadata = Json::object();  // corpus_id, train_config, dims, final stats

  Json to_json() const;
};

/// Scans data_dir/models/*.ckpt with optional <id>.json metadata sidecars.
class ModelRegistry {
 public:
  explicit ModelRegistry(std::filesystem::path models_dir);

  void rescan();
  std::vector<ModelEntry> list() const;
  std::optional<ModelEntry> get(std::string_view id) const;

  /// Loaded parameters of a ready model; NotFound otherwise.
  std::shared_ptr<const ModelParams> load(std::string_view id) const;

  /// Writes checkpoint and sidecar, then registers the model as ready.
  ModelEntry publish(const std::string& id, const ModelParams& params, Json metadata);
  void put(ModelEntry entry);
  void erase(std::string_view id);
  std::string unique_id(const std::string& stem) const;
  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
  mutable std::mutex mutex_;
  std::map<std::string, ModelEntry, std::less<>> entries_;
  mutable std::map<std::string, std::shared_ptr<const ModelParams>, std::less<>> cache_;
};

class Service {
 public:
  explicit Service(ServiceConfig config);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Binds (PortInUse on failure) and serves on a background thread.
  void start();
  /// Binds and serves on the calling thread until stop().
  void run();
  void stop();
  int port() const { return port_; }

  /// Blocks until the active training job (if any) finishes.
  void wait_for_jobs();

 private:
  struct Job {
    std::string id;
    std::string corpus_id;
    Variant variant = Variant::reconstruct;
    TrainConfig config;
    std::string model_id;
    std::string status = "queued";  // queued, running, succeeded, failed
    std::string message;
    Json epochs = Json::array();
  };

  void load_corpora();
  void routes();
  void bind();
  ops::ModelContext context(std::string_view model_id) const;
  const Segment* find_segment(std::string_view id) const;
  Json submit_training(const Json& req);
  Json job_json(const std::string& id) const;
  void run_job(std::shared_ptr<Job> job, std::shared_ptr<const Corpus> corpus);

  ServiceConfig config_;
  std::unique_ptr<httplib::Server> server_;
  std::map<std::string, std::shared_ptr<const Corpus>, std::less<>> corpora_;
  ModelRegistry registry_;
  mutable std::mutex jobs_mutex_;
  std::map<std::string, std::shared_ptr<Job>, std::less<>> jobs_;
  std::shared_ptr<Job> active_;
  std::thread job_thread_;
  std::thread server_thread_;
  int next_job_ = 1;
  int port_ = 0;
};

/// HTTP status for an error code.
int http_status(ErrorCode code);

}  // namespace tilevae
