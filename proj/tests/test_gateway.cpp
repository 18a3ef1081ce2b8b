#include <doctest.h>

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <thread>
#include <vector>

#include "sdoh/httplib_config.hpp"
#include <nlohmann/json.hpp>

#include "sdoh/corpus.hpp"
#include "sdoh/gateway.hpp"
#include "sdoh/pipeline.hpp"
#include "sdoh/prompting.hpp"
#include "sdoh/sha256.hpp"

using namespace sdoh;
using namespace sdoh::gateway;

namespace {

std::filesystem::path fresh_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

prompting::PromptRequest make_request(const std::string& text) {
  prompting::PromptRequest request;
  request.rendered_text = text;
  request.note_id = "n1";
  return request;
}

// Minimal chat-completions fake. The handler hook decides the reply.
class FakeServer {
 public:
  explicit FakeServer(httplib::Server::Handler handler) {
    server_.Post("/v1/chat/completions", std::move(handler));
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeServer() {
    server_.stop();
    thread_.join();
  }
  std::string endpoint() const {
    return "http://127.0.0.1:" + std::to_string(port_) + "/v1/chat/completions";
  }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

std::string completion_body(const std::string& text) {
  return nlohmann::json{{"choices", {{{"message", {{"content", text}}}}}}}.dump();
}

BackendConfig live_config(const std::string& endpoint, const std::string& store) {
  BackendConfig config;
  config.kind = BackendKind::Http;
  config.endpoint = endpoint;
  config.model = "test-model";
  config.store_path = store;
  config.allow_external_transmission = true;
  config.timeout_ms = 2000;
  config.max_retries = 2;
  config.max_concurrent = 2;
  return config;
}

}  // namespace

TEST_CASE("sha256 matches the FIPS vectors") {
  CHECK(sha256_hex("") ==
        "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(sha256_hex("abc") ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(sha256_hex("abcdbcdecdefdefgefghfghighijhijkijkljklmklmnlmnomnopnopq") ==
        "248d6a61d20638b8e5c026930c3e6039a33ce45964ff2167f6ecedd419db06c1");
  CHECK(sha256_hex("The quick brown fox jumps over the lazy dog") ==
        "d7a8fbb307d7809469ca9abcb0082e4f8d5651e46d3cdb762d02d0bf37c9e592");
}

TEST_CASE("request hashes separate prompts, samples and models") {
  const std::string base = request_hash("m", 0, "prompt");
  CHECK(base == request_hash("m", 0, "prompt"));
  CHECK(base != request_hash("m", 1, "prompt"));
  CHECK(base != request_hash("m", 0, "prompt!"));
  CHECK(base != request_hash("m2", 0, "prompt"));
}

TEST_CASE("replay store records and looks up responses") {
  const auto dir = fresh_dir("sdoh_store_test");
  ReplayStore store(dir, ReplayStore::OpenMode::CreateIfMissing);
  CHECK(store.size() == 0);
  CHECK_FALSE(store.lookup("deadbeef").has_value());

  Exchange exchange;
  exchange.hash = request_hash("m", 0, "p");
  exchange.response = "hello\nworld";
  exchange.model = "m";
  CHECK(store.record(exchange));
  CHECK_FALSE(store.record(exchange));  // idempotent
  CHECK(store.size() == 1);
  CHECK(store.lookup(exchange.hash) == "hello\nworld");

  // a second handle over the same directory sees the entry
  ReplayStore reopened(dir);
  CHECK(reopened.size() == 1);
  CHECK(reopened.lookup(exchange.hash) == "hello\nworld");
}

TEST_CASE("record_run over an empty batch leaves the store unchanged") {
  const auto dir = fresh_dir("sdoh_store_empty");
  ReplayStore store(dir, ReplayStore::OpenMode::CreateIfMissing);
  store.record_run({});
  CHECK(store.size() == 0);
}

TEST_CASE("opening a missing store fails") {
  CHECK_THROWS_AS(ReplayStore(std::filesystem::temp_directory_path() / "nope_missing"),
                  BackendError);
}

TEST_CASE("replay backend returns stored responses byte-exactly") {
  const auto dir = fresh_dir("sdoh_replay_test");
  {
    ReplayStore store(dir, ReplayStore::OpenMode::CreateIfMissing);
    Exchange exchange;
    exchange.hash = request_hash("test-model", 0, "the prompt");
    exchange.response = "[]\n";
    store.record(exchange);
  }
  BackendConfig config;
  config.kind = BackendKind::Replay;
  config.model = "test-model";
  config.store_path = dir.string();
  const auto backend = make_backend(config);
  CHECK(backend->complete(make_request("the prompt"), 0) == "[]\n");

  try {
    backend->complete(make_request("another prompt"), 0);
    FAIL("expected ReplayMiss");
  } catch (const BackendError& e) {
    CHECK(e.kind() == BackendError::Kind::ReplayMiss);
    const std::string what = e.what();
    CHECK(what.find(request_hash("test-model", 0, "another prompt")) != std::string::npos);
    CHECK(what.find(dir.string()) != std::string::npos);
  }
}

TEST_CASE("live backend requires the transmission opt-in") {
  BackendConfig config;
  config.kind = BackendKind::Http;
  config.endpoint = "http://localhost:1/v1/chat/completions";
  config.model = "m";
  config.allow_external_transmission = false;
  CHECK_THROWS_AS(make_backend(config), ConfigError);
}

TEST_CASE("live completion extracts text and records the exchange") {
  std::atomic<int> hits{0};
  FakeServer server([&](const httplib::Request& req, httplib::Response& res) {
    ++hits;
    const auto body = nlohmann::json::parse(req.body);
    CHECK(body.at("model") == "test-model");
    CHECK(body.at("messages").back().at("content") == "the prompt");
    res.set_content(completion_body("[{\"sdoh\": \"Drug\"}]"), "application/json");
  });
  const auto dir = fresh_dir("sdoh_live_store");
  const auto backend = make_backend(live_config(server.endpoint(), dir.string()));
  const std::string text = backend->complete(make_request("the prompt"), 0);
  CHECK(text == "[{\"sdoh\": \"Drug\"}]");
  CHECK(hits == 1);

  ReplayStore store(dir);
  CHECK(store.size() == 1);
  CHECK(store.lookup(request_hash("test-model", 0, "the prompt")) == text);
}

TEST_CASE("system message carries the guideline attachment") {
  FakeServer server([&](const httplib::Request& req, httplib::Response& res) {
    const auto body = nlohmann::json::parse(req.body);
    REQUIRE(body.at("messages").size() == 2);
    CHECK(body.at("messages")[0].at("role") == "system");
    CHECK(body.at("messages")[0].at("content") == "the guidelines");
    res.set_content(completion_body("[]"), "application/json");
  });
  BackendConfig config = live_config(server.endpoint(), "");
  config.system_message = "the guidelines";
  const auto backend = make_backend(config);
  CHECK(backend->complete(make_request("p"), 0) == "[]");
}

TEST_CASE("rate limiting is retried and does not duplicate the recording") {
  std::atomic<int> hits{0};
  FakeServer server([&](const httplib::Request&, httplib::Response& res) {
    if (++hits == 1) {
      res.status = 429;
      return;
    }
    res.set_content(completion_body("ok"), "application/json");
  });
  const auto dir = fresh_dir("sdoh_retry_store");
  const auto backend = make_backend(live_config(server.endpoint(), dir.string()));
  CHECK(backend->complete(make_request("p"), 0) == "ok");
  CHECK(hits == 2);
  ReplayStore store(dir);
  CHECK(store.size() == 1);
}

TEST_CASE("persistent 429 surfaces as RateLimited after retries") {
  std::atomic<int> hits{0};
  FakeServer server([&](const httplib::Request&, httplib::Response& res) {
    ++hits;
    res.status = 429;
  });
  const auto backend = make_backend(live_config(server.endpoint(), ""));
  try {
    backend->complete(make_request("p"), 0);
    FAIL("expected RateLimited");
  } catch (const BackendError& e) {
    CHECK(e.kind() == BackendError::Kind::RateLimited);
  }
  CHECK(hits == 3);  // initial try plus two retries
}

TEST_CASE("auth failures are not retried") {
  std::atomic<int> hits{0};
  FakeServer server([&](const httplib::Request&, httplib::Response& res) {
    ++hits;
    res.status = 401;
  });
  const auto backend = make_backend(live_config(server.endpoint(), ""));
  try {
    backend->complete(make_request("p"), 0);
    FAIL("expected AuthFailure");
  } catch (const BackendError& e) {
    CHECK(e.kind() == BackendError::Kind::AuthFailure);
  }
  CHECK(hits == 1);
}

TEST_CASE("bearer token comes from the configured environment variable") {
  setenv("SDOH_TEST_TOKEN", "sekrit", 1);
  FakeServer server([&](const httplib::Request& req, httplib::Response& res) {
    CHECK(req.get_header_value("Authorization") == "Bearer sekrit");
    res.set_content(completion_body("ok"), "application/json");
  });
  BackendConfig config = live_config(server.endpoint(), "");
  config.auth_env = "SDOH_TEST_TOKEN";
  const auto backend = make_backend(config);
  CHECK(backend->complete(make_request("p"), 0) == "ok");
  unsetenv("SDOH_TEST_TOKEN");
}

TEST_CASE("in-flight requests never exceed the configured bound") {
  std::atomic<int> in_flight{0};
  std::atomic<int> peak{0};
  FakeServer server([&](const httplib::Request&, httplib::Response& res) {
    const int now = ++in_flight;
    int expected = peak.load();
    while (now > expected && !peak.compare_exchange_weak(expected, now)) {
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(25));
    --in_flight;
    res.set_content(completion_body("ok"), "application/json");
  });
  const auto backend = make_backend(live_config(server.endpoint(), ""));

  std::vector<std::thread> workers;
  for (int i = 0; i < 8; ++i) {
    workers.emplace_back([&, i] {
      CHECK(backend->complete(make_request("p" + std::to_string(i)), 0) == "ok");
    });
  }
  for (auto& worker : workers) worker.join();
  CHECK(peak.load() <= 2);
  CHECK(peak.load() >= 1);
}

TEST_CASE("a per-sdoh run with k=3 records 15 exchanges for one note") {
  FakeServer server([&](const httplib::Request&, httplib::Response& res) {
    res.set_content(completion_body("[]"), "application/json");
  });
  const auto dir = fresh_dir("sdoh_count_store");
  const auto backend = make_backend(live_config(server.endpoint(), dir.string()));

  prompting::PromptTemplate tmpl;
  tmpl.mode = prompting::PromptMode::PerSdohType;
  tmpl.body = "Extract {sdoh} events from: {note}";
  NoteDocument note;
  note.id = "n1";
  note.text = "Nothing to see here.";

  pipeline::ConsistencyConfig config;
  config.k = 3;
  config.threshold = 2;
  const auto result = pipeline::run_note(note, tmpl, {}, *backend, config);
  CHECK(result.log.completions == 15);
  ReplayStore store(dir);
  CHECK(store.size() == 15);
}

TEST_CASE("a recorded live run replays to identical pipeline output") {
  // deterministic fake model: always the same annotation for the note
  const std::string annotation =
      "[{\"sdoh\": \"Tobacco\", \"trigger\": (3, 9, \"smokes\"), "
      "\"status\": (3, 9, \"smokes\", \"current\")}]";
  FakeServer server([&](const httplib::Request& req, httplib::Response& res) {
    const auto body = nlohmann::json::parse(req.body);
    const std::string prompt = body.at("messages").back().at("content");
    const bool tobacco = prompt.find("Tobacco") != std::string::npos;
    res.set_content(completion_body(tobacco ? annotation : "[]"), "application/json");
  });

  prompting::PromptTemplate tmpl;
  tmpl.mode = prompting::PromptMode::PerSdohType;
  tmpl.body = "Extract {sdoh} events from: {note}";
  NoteDocument note;
  note.id = "n1";
  note.text = "He smokes daily.";
  pipeline::ConsistencyConfig config;

  const auto dir = fresh_dir("sdoh_record_replay");
  BackendConfig live = live_config(server.endpoint(), dir.string());
  const auto live_backend = make_backend(live);
  const auto live_result = pipeline::run_note(note, tmpl, {}, *live_backend, config);
  REQUIRE(live_result.events.size() == 1);

  BackendConfig replay;
  replay.kind = BackendKind::Replay;
  replay.model = live.model;
  replay.store_path = dir.string();
  const auto replay_backend = make_backend(replay);
  const auto replay_result = pipeline::run_note(note, tmpl, {}, *replay_backend, config);
  CHECK(replay_result.events == live_result.events);
}
