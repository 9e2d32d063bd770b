#include <chrono>
#include <thread>

#include "doctest.h"
#include "httplib.h"
#include "support.hpp"
#include "tilevae/operations.hpp"
#include "tilevae/service.hpp"

using namespace tilevae;
using namespace tilevae::testing;

namespace {

struct Reply {
  int status = 0;
  Json body;
  std::string text;
};

class Harness {
 public:
  explicit Harness(const std::filesystem::path& data_dir) {
    ServiceConfig cfg;
    cfg.port = 0;
    cfg.data_dir = data_dir;
    service_ = std::make_unique<Service>(cfg);
    service_->start();
    client_ = std::make_unique<httplib::Client>("127.0.0.1", service_->port());
    client_->set_read_timeout(600, 0);
  }

  Reply get(const std::string& path) { return wrap(client_->Get(path)); }
  Reply post(const std::string& path, const Json& body) {
    return wrap(client_->Post(path, body.dump(), "application/json"));
  }

  Json wait_job(const std::string& id) {
    for (;;) {
      Reply r = get("/jobs/" + id);
      REQUIRE(r.status == 200);
      const auto status = r.body["status"].get<std::string>();
      if (status == "succeeded" || status == "failed") return r.body;
      std::this_thread::sleep_for(std::chrono::milliseconds(20));
    }
  }

  Service& service() { return *service_; }

 private:
  static Reply wrap(const httplib::Result& res) {
    REQUIRE(res);
    Reply r;
    r.status = res->status;
    r.text = res->body;
    r.body = Json::parse(res->body);
    return r;
  }

  std::unique_ptr<Service> service_;
  std::unique_ptr<httplib::Client> client_;
};

struct DataDir {
  ScratchDir dir{"service"};
  DataDir() { populate_data_dir(dir.path()); }
};

DataDir& shared_data() {
  static DataDir d;
  return d;
}

Json corpus_segment_id(std::size_t i) { return toy_corpus().segments.at(i).id; }

}  // namespace

TEST_CASE("service config parsing and environment overrides") {
  const auto c = ServiceConfig::parse(R"({"port": 9001, "data_dir": "d", "corpora": ["a.json"]})", "/base");
  CHECK(c.port == 9001);
  CHECK(c.data_dir == std::filesystem::path("/base/d"));
  CHECK(c.corpora.at(0) == std::filesystem::path("/base/a.json"));
  CHECK(code_of([] { ServiceConfig::parse(R"({"prot": 1})"); }) == ErrorCode::BadConfig);
  CHECK(code_of([] { ServiceConfig::parse(R"({"port": 70000})"); }) == ErrorCode::BadConfig);
  CHECK(code_of([] { ServiceConfig::parse(R"({"port": "x"})"); }) == ErrorCode::BadConfig);

  ScratchDir tmp("svc-config");
  write_text_file(tmp / "svc.json", R"({"port": 7000, "data_dir": "store"})");
  ::setenv("TILEVAE_CONFIG", (tmp / "svc.json").c_str(), 1);
  ::setenv("TILEVAE_PORT", "7100", 1);
  const auto r = ServiceConfig::resolve(std::nullopt);
  CHECK(r.port == 7100);
  CHECK(r.data_dir == tmp / "store");
  ::setenv("TILEVAE_PORT", "seventy", 1);
  CHECK(code_of([] { ServiceConfig::resolve(std::nullopt); }) == ErrorCode::BadConfig);
  ::unsetenv("TILEVAE_PORT");
  ::unsetenv("TILEVAE_CONFIG");
}

TEST_CASE("error codes map onto HTTP statuses") {
  CHECK(http_status(ErrorCode::NotFound) == 404);
  CHECK(http_status(ErrorCode::UnknownCorpus) == 404);
  CHECK(http_status(ErrorCode::JobConflict) == 409);
  CHECK(http_status(ErrorCode::OutOfRange) == 422);
  CHECK(http_status(ErrorCode::BadConfig) == 400);
  CHECK(http_status(ErrorCode::Io) == 500);
}

TEST_CASE("health, corpora, segments and models") {
  Harness h(shared_data().dir.path());
  auto r = h.get("/healthz");
  CHECK(r.status == 200);
  CHECK(r.body == Json{{"status", "ok"}});

  r = h.get("/corpora");
  REQUIRE(r.body.size() == 1);
  CHECK(r.body[0]["id"] == "toy");
  CHECK(r.body[0]["segments"] == toy_corpus().segments.size());

  r = h.get("/corpora/toy/segments?game=smb");
  CHECK(r.status == 200);
  CHECK(r.body.size() == toy_corpus().segments_of("smb").size());
  for (const auto& s : r.body) CHECK(s["game"] == "smb");
  CHECK(h.get("/corpora/toy/segments?game=zelda").status == 404);
  CHECK(h.get("/corpora/nothing/segments").status == 404);

  const Segment& first = toy_corpus().segments.front();
  r = h.get("/segments/" + first.id);
  CHECK(r.status == 200);
  CHECK(segment_from_json(r.body, toy_corpus().alphabet).cells == first.cells);
  CHECK(h.get("/segments/nope").status == 404);

  r = h.get("/models");
  REQUIRE(r.body.size() == 3);
  CHECK(r.body[1]["id"] == "toy-next");
  CHECK(r.body[1]["variant"] == "next_segment");
  CHECK(r.body[1]["status"] == "ready");
  r = h.get("/models/unknown");
  CHECK(r.status == 404);
  CHECK(r.body["code"] == "NotFound");
  CHECK(r.body.contains("message"));
  r = h.get("/no/such/route");
  CHECK(r.status == 404);
  CHECK(r.body["code"] == "NotFound");
}

TEST_CASE("inference endpoints") {
  Harness h(shared_data().dir.path());
  const Json a = corpus_segment_id(0), b = corpus_segment_id(150);

  auto r = h.post("/generate", {{"model_id", "toy-rec"}, {"n_segments", 3}, {"seed", 7}});
  REQUIRE(r.status == 200);
  CHECK(r.body["segments"].size() == 3);
  CHECK(r.body["seed"] == 7);
  CHECK(h.post("/generate", {{"model_id", "toy-rec"}, {"n_segments", 3}, {"seed", 7}}).text == r.text);
  r = h.post("/generate", {{"model_id", "toy-rec"}, {"n_segments", 2}});
  CHECK(r.body["seed"].is_number_unsigned());  // server-chosen, echoed
  r = h.post("/generate", {{"model_id", "toy-rec"}, {"n_segments", 3}, {"seed", 1}, {"next_model_id", "toy-next"}});
  CHECK(r.status == 200);
  CHECK(h.post("/generate", {{"model_id", "toy-cond"}, {"n_segments", 1}}).status == 400);
  CHECK(h.post("/generate", {{"model_id", "ghost"}, {"n_segments", 1}}).status == 404);
  CHECK(h.post("/generate", {{"n_segments", 1}}).status == 400);

  r = h.post("/continue", {{"model_id", "toy-next"}, {"seed_segment", cells_json(flat_ground())}, {"n_more", 2}, {"seed", 3}});
  REQUIRE(r.status == 200);
  CHECK(r.body["segments"].size() == 3);
  CHECK(segment_from_json(r.body["segments"][0], TileAlphabet::unified()).cells == flat_ground().cells);

  r = h.post("/interpolate", {{"model_id", "toy-rec"}, {"segment_a", a}, {"segment_b", b}, {"steps", 4}});
  REQUIRE(r.status == 200);
  CHECK(r.body.size() == 5);
  CHECK(r.body[4]["t"] == 1.0);
  r = h.post("/interpolate", {{"model_id", "toy-rec"}, {"segment_a", a}, {"segment_b", b}, {"t", 1.5}});
  CHECK(r.status == 422);
  CHECK(r.body["code"] == "OutOfRange");
  r = h.post("/interpolate", {{"model_id", "toy-rec"}, {"segment_a", a}, {"segment_b", b}, {"t", {0.0, 0.5}}});
  CHECK(r.body.size() == 2);
  CHECK(h.post("/interpolate", {{"model_id", "toy-rec"}, {"segment_a", "missing"}, {"segment_b", b}}).status == 404);

  const Json es = {{"population", 8}, {"parents", 2}, {"generations", 3}, {"seed", 5}};
  r = h.post("/search", {{"model_id", "toy-rec"}, {"input_segment", a}, {"metric", "density"}, {"condition", "similar"},
                         {"es_config", es}});
  REQUIRE(r.status == 200);
  CHECK(r.body["metric"] == "density");
  CHECK(r.body["seed"] == 5);
  r = h.post("/search", {{"model_id", "toy-rec"}, {"input_segment", a}, {"metric", "histogram_distance"},
                         {"condition", "dissimilar"}, {"es_config", es}});
  CHECK(r.status == 200);
  CHECK(h.post("/search", {{"model_id", "toy-rec"}, {"input_segment", a}, {"metric", "fun"}}).status == 400);

  r = h.post("/condition", {{"model_id", "toy-cond"}, {"label_vector", {{"game", "smb"}, {"density_tercile", 2}}}, {"seed", 4}});
  REQUIRE(r.status == 200);
  CHECK(r.body["rows"].size() == 16);
  CHECK(h.post("/condition", {{"model_id", "toy-cond"}, {"label_vector", {{"game", "zelda"}}}}).status == 404);
  CHECK(h.post("/condition", {{"model_id", "toy-rec"}, {"label_vector", Json::array()}}).status == 400);

  r = h.post("/blend/canvas", {{"model_id", "toy-rec"}, {"weights", {{"smb", 1.0}, {"kid_icarus", 1.0}}}});
  REQUIRE(r.status == 200);
  CHECK(r.body["latent"].size() == small_config().latent);
  CHECK(r.body["proportions"].size() == 2);
  CHECK(h.post("/blend/canvas", {{"model_id", "toy-rec"}, {"weights", {{"smb", 0.0}}}}).status == 422);
  CHECK(h.post("/blend/canvas", {{"model_id", "toy-rec"}, {"weights", {{"zelda", 1.0}}}}).status == 422);

  const Json schedule = Json::parse(R"([{"fraction": 0.5, "weights": {"smb": 1}}, {"fraction": 0.5, "weights": {"kid_icarus": 1}}])");
  r = h.post("/blend/progression", {{"model_id", "toy-rec"}, {"schedule", schedule}, {"n_segments", 4}, {"es_config", es}, {"seed", 2}});
  REQUIRE(r.status == 200);
  CHECK(r.body["phase_of_segment"] == Json{0, 0, 1, 1});
  CHECK(r.body["proportions"].size() == 4);
  r = h.post("/blend/progression", {{"model_id", "toy-rec"}, {"schedule", Json::array()}, {"n_segments", 4}});
  CHECK(r.status == 422);
  CHECK(r.body["code"] == "BadSchedule");

  r = h.post("/latent/decode", {{"model_id", "toy-rec"}, {"z", {0.0, 0.5, -0.5, 1.0}}});
  REQUIRE(r.status == 200);
  CHECK(r.body["latent"] == Json{0.0, 0.5, -0.5, 1.0});
  CHECK(h.post("/latent/decode", {{"model_id", "toy-rec"}, {"z", {0.0}}}).status == 422);

  r = h.get("/visualize/projection?model_id=toy-rec&config=" +
            httplib::detail::encode_url(R"({"iterations": 300, "seed": 2})"));
  REQUIRE(r.status == 200);
  CHECK(r.body.size() == toy_corpus().segments.size());
  CHECK(r.body[0].contains("segment_id"));
  CHECK(h.get("/visualize/projection").status == 400);
  CHECK(h.get("/visualize/projection?model_id=toy-rec&config=%7B%22bogus%22%3A1%7D").status == 400);
}

TEST_CASE("responses match the shared operations byte for byte") {
  Harness h(shared_data().dir.path());
  ops::ModelContext ctx;
  ctx.model = std::make_shared<const ModelParams>(small_model());
  const Json req = {{"n_segments", 2}, {"seed", 11}};
  Json body = req;
  body["model_id"] = "toy-rec";
  CHECK(h.post("/generate", body).text == to_text(ops::generate(ctx, req)));
}

TEST_CASE("training jobs: conflict, success, failure, rescan") {
  ScratchDir data("service-train");
  populate_data_dir(data.path());
  Harness h(data.path());
  const Json before = h.get("/models").body;

  Json cfg = train_config_json(small_config());
  cfg["epochs"] = 6;
  auto r = h.post("/models/train", {{"corpus_id", "toy"}, {"variant", "reconstruct"}, {"config", cfg}, {"model_id", "fresh"}});
  REQUIRE(r.status == 200);
  const std::string job = r.body["job_id"];
  r = h.post("/models/train", {{"corpus_id", "toy"}, {"config", cfg}});
  CHECK(r.status == 409);
  CHECK(r.body["code"] == "JobConflict");

  const Json done = h.wait_job(job);
  CHECK(done["status"] == "succeeded");
  CHECK(done["epochs"].size() == 6);
  r = h.get("/models/fresh");
  CHECK(r.body["status"] == "ready");
  CHECK(r.body["corpus_id"] == "toy");
  CHECK(std::filesystem::exists(data / "models/fresh.ckpt"));
  CHECK(h.post("/generate", {{"model_id", "fresh"}, {"n_segments", 1}, {"seed", 1}}).status == 200);
  CHECK(h.post("/models/train", {{"corpus_id", "toy"}, {"config", cfg}, {"model_id", "fresh"}}).status == 409);

  const Json with_fresh = h.get("/models").body;
  cfg["learning_rate"] = 1e300;
  r = h.post("/models/train", {{"corpus_id", "toy"}, {"config", cfg}, {"model_id", "doomed"}});
  REQUIRE(r.status == 200);
  const Json failed = h.wait_job(r.body["job_id"]);
  CHECK(failed["status"] == "failed");
  CHECK(failed["message"].get<std::string>().rfind("NonFinite", 0) == 0);
  CHECK(h.get("/models").body == with_fresh);
  CHECK(h.get("/models/doomed").status == 404);
  CHECK_FALSE(std::filesystem::exists(data / "models/doomed.ckpt"));
  CHECK(with_fresh.size() == before.size() + 1);

  CHECK(h.post("/models/train", {{"corpus_id", "elsewhere"}}).status == 404);
  CHECK(h.post("/models/train", {{"corpus_id", "toy"}, {"config", {{"epochs", 0}}}}).status == 400);
  CHECK(h.post("/models/train", {{"corpus_id", "toy"}, {"variant", "mystery"}}).status == 400);
  CHECK(h.get("/jobs/job-99").status == 404);

  // a fresh process over the same directory sees the same registry
  Harness again(data.path());
  CHECK(again.get("/models").text == h.get("/models").text);
}

TEST_CASE("binding an occupied port is PortInUse") {
  ScratchDir data("service-port");
  Harness h(data.path());
  ServiceConfig cfg;
  cfg.port = h.service().port();
  cfg.data_dir = data.path();
  Service clash(cfg);
  CHECK(code_of([&] { clash.start(); }) == ErrorCode::PortInUse);
}
