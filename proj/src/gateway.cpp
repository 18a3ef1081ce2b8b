#include "sdoh/gateway.hpp"

#include <chrono>
#include <condition_variable>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "sdoh/sha256.hpp"

#include "sdoh/httplib_config.hpp"

namespace sdoh::gateway {

namespace {

using nlohmann::json;

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw BackendError(BackendError::Kind::IoFailure, "cannot read " + path.string());
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::filesystem::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw BackendError(BackendError::Kind::IoFailure, "cannot write " + path.string());
  }
  out << content;
}

std::string now_iso8601() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Bounds concurrent live requests; C++20 counting_semaphore has a compile
// time max, so use a small monitor instead.
class Gate {
 public:
  explicit Gate(int limit) : limit_(limit > 0 ? limit : 1) {}

  void acquire() {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return in_flight_ < limit_; });
    ++in_flight_;
  }

  void release() {
    {
      std::lock_guard lock(mu_);
      --in_flight_;
    }
    cv_.notify_one();
  }

 private:
  int limit_;
  int in_flight_ = 0;
  std::mutex mu_;
  std::condition_variable cv_;
};

struct GateSlot {
  explicit GateSlot(Gate& gate) : gate_(gate) { gate_.acquire(); }
  ~GateSlot() { gate_.release(); }
  Gate& gate_;
};

}  // namespace

std::string request_hash(std::string_view model, int sample_index,
                         std::string_view prompt) {
  std::string payload;
  payload.reserve(model.size() + prompt.size() + 8);
  payload += model;
  payload += '\x1f';
  payload += std::to_string(sample_index);
  payload += '\x1f';
  payload += prompt;
  return sha256_hex(payload);
}

ReplayStore::ReplayStore(std::filesystem::path dir, OpenMode mode)
    : dir_(std::move(dir)) {
  if (mode == OpenMode::MustExist) {
    if (!std::filesystem::is_directory(dir_)) {
      throw BackendError(BackendError::Kind::IoFailure,
                         "replay store not found: " + dir_.string());
    }
    load_index();
    return;
  }
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec) {
    throw BackendError(BackendError::Kind::IoFailure, "cannot create replay store " +
                                                          dir_.string() + ": " +
                                                          ec.message());
  }
  if (std::filesystem::exists(dir_ / "index.json")) load_index();
}

void ReplayStore::load_index() {
  const auto index_path = dir_ / "index.json";
  if (!std::filesystem::exists(index_path)) {
    throw BackendError(BackendError::Kind::IoFailure,
                       "replay store has no index: " + index_path.string());
  }
  json j;
  try {
    j = json::parse(read_file(index_path));
  } catch (const json::exception& e) {
    throw BackendError(BackendError::Kind::IoFailure,
                       "bad replay index " + index_path.string() + ": " + e.what());
  }
  for (const json& entry : j.value("entries", json::array())) {
    Exchange ex;
    ex.hash = entry.at("hash").get<std::string>();
    ex.model = entry.value("model", "");
    ex.sample_index = entry.value("sample_index", 0);
    ex.note_id = entry.value("note_id", "");
    ex.latency_ms = entry.value("latency_ms", 0L);
    ex.timestamp = entry.value("timestamp", "");
    files_[ex.hash] = entry.at("file").get<std::string>();
    meta_[ex.hash] = std::move(ex);
  }
}

void ReplayStore::write_index() const {
  json entries = json::array();
  for (const auto& [hash, file] : files_) {
    const Exchange& ex = meta_.at(hash);
    entries.push_back({{"hash", hash},
                       {"file", file},
                       {"model", ex.model},
                       {"sample_index", ex.sample_index},
                       {"note_id", ex.note_id},
                       {"latency_ms", ex.latency_ms},
                       {"timestamp", ex.timestamp}});
  }
  const json j = {{"version", 1}, {"entries", entries}};
  write_file(dir_ / "index.json", j.dump(2) + "\n");
}

std::optional<std::string> ReplayStore::lookup(const std::string& hash) const {
  const auto it = files_.find(hash);
  if (it == files_.end()) return std::nullopt;
  return read_file(dir_ / it->second);
}

bool ReplayStore::contains(const std::string& hash) const {
  return files_.count(hash) > 0;
}

bool ReplayStore::record(const Exchange& exchange) {
  std::lock_guard lock(write_mu_);
  if (files_.count(exchange.hash)) return false;  // append-only, idempotent
  const std::string file = exchange.hash + ".txt";
  write_file(dir_ / file, exchange.response);
  files_[exchange.hash] = file;
  meta_[exchange.hash] = exchange;
  write_index();
  return true;
}

void ReplayStore::record_run(std::span<const Exchange> exchanges) {
  for (const Exchange& exchange : exchanges) {
    record(exchange);
  }
}

std::size_t ReplayStore::size() const { return files_.size(); }

namespace {

class ReplayBackend : public CompletionBackend {
 public:
  explicit ReplayBackend(const BackendConfig& config)
      : config_(config), store_(config.store_path) {}

  std::string complete(const prompting::PromptRequest& request,
                       int sample_index) override {
    const std::string hash =
        request_hash(config_.model, sample_index, request.rendered_text);
    auto response = store_.lookup(hash);
    if (!response) {
      throw BackendError(BackendError::Kind::ReplayMiss,
                         "ReplayMiss: hash " + hash + " (note " + request.note_id +
                             ", sample " + std::to_string(sample_index) +
                             ") not in store " + store_.dir().string());
    }
    return std::move(*response);
  }

  std::string_view model() const override { return config_.model; }

 private:
  BackendConfig config_;
  ReplayStore store_;
};

class HttpBackend : public CompletionBackend {
 public:
  explicit HttpBackend(const BackendConfig& config)
      : config_(config), gate_(config.max_concurrent) {
    if (!config_.allow_external_transmission) {
      throw ConfigError(
          "live backend sends note text to an external service; pass "
          "--allow-external-transmission (or set it in the manifest) to proceed");
    }
    if (config_.endpoint.empty() || config_.model.empty()) {
      throw ConfigError("live backend requires an endpoint and a model name");
    }
    split_endpoint();
    if (!config_.store_path.empty()) {
      store_.emplace(config_.store_path, ReplayStore::OpenMode::CreateIfMissing);
    }
  }

  std::string complete(const prompting::PromptRequest& request,
                       int sample_index) override {
    const std::string hash =
        request_hash(config_.model, sample_index, request.rendered_text);

    json body = {{"model", config_.model}};
    json messages = json::array();
    if (!config_.system_message.empty()) {
      messages.push_back({{"role", "system"}, {"content", config_.system_message}});
    }
    messages.push_back({{"role", "user"}, {"content", request.rendered_text}});
    body["messages"] = std::move(messages);
    if (config_.temperature) body["temperature"] = *config_.temperature;
    const std::string payload = body.dump();

    const char* token = std::getenv(config_.auth_env.c_str());
    httplib::Headers headers;
    if (token && *token) headers.emplace("Authorization", std::string("Bearer ") + token);

    const auto started = std::chrono::steady_clock::now();
    std::string text = post_with_retries(payload, headers);
    const auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
                             std::chrono::steady_clock::now() - started)
                             .count();

    if (store_) {
      store_->record({hash, text, config_.model, sample_index, request.note_id,
                      static_cast<long>(elapsed), now_iso8601()});
    }
    return text;
  }

  std::string_view model() const override { return config_.model; }

 private:
  void split_endpoint() {
    const std::string& url = config_.endpoint;
    const std::size_t scheme = url.find("://");
    if (scheme == std::string::npos) {
      throw ConfigError("endpoint must be an http(s) URL: " + url);
    }
    const std::size_t path = url.find('/', scheme + 3);
    base_ = path == std::string::npos ? url : url.substr(0, path);
    path_ = path == std::string::npos ? "/" : url.substr(path);
#ifndef SDOH_HTTPLIB_OPENSSL
    if (base_.rfind("https", 0) == 0) {
      throw ConfigError("this build lacks TLS support; use an http endpoint");
    }
#endif
  }

  std::string post_with_retries(const std::string& payload,
                                const httplib::Headers& headers) {
    GateSlot slot(gate_);
    int backoff_ms = 100;
    std::string last_error = "no attempt made";
    for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
      if (attempt > 0) {
        std::this_thread::sleep_for(std::chrono::milliseconds(backoff_ms));
        backoff_ms = std::min(backoff_ms * 2, 10000);
      }
      httplib::Client client(base_);
      const time_t seconds = config_.timeout_ms / 1000;
      const time_t usec = (config_.timeout_ms % 1000) * 1000;
      client.set_connection_timeout(seconds, usec);
      client.set_read_timeout(seconds, usec);
      client.set_write_timeout(seconds, usec);

      httplib::Result result = client.Post(path_, headers, payload, "application/json");
      if (!result) {
        last_error = httplib::to_string(result.error());
        continue;  // connection failure or timeout, retry
      }
      if (result->status == 401 || result->status == 403) {
        throw BackendError(BackendError::Kind::AuthFailure,
                           "authentication failed (" + std::to_string(result->status) +
                               "); check $" + config_.auth_env);
      }
      if (result->status == 429 || result->status >= 500) {
        last_error = "HTTP " + std::to_string(result->status);
        continue;
      }
      if (result->status != 200) {
        throw BackendError(BackendError::Kind::IoFailure,
                           "HTTP " + std::to_string(result->status) + ": " + result->body);
      }
      return extract_text(result->body);
    }
    const auto kind = last_error.find("429") != std::string::npos
                          ? BackendError::Kind::RateLimited
                          : BackendError::Kind::Timeout;
    throw BackendError(kind, "request failed after " +
                                 std::to_string(config_.max_retries + 1) +
                                 " attempts: " + last_error);
  }

  static std::string extract_text(const std::string& body) {
    json j = json::parse(body, nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded()) {
      throw BackendError(BackendError::Kind::IoFailure,
                         "provider returned non-JSON body");
    }
    // chat-completions shape first, then the bare completions shape
    if (j.contains("choices") && j["choices"].is_array() && !j["choices"].empty()) {
      const json& choice = j["choices"][0];
      if (choice.contains("message") && choice["message"].contains("content")) {
        return choice["message"]["content"].get<std::string>();
      }
      if (choice.contains("text")) return choice["text"].get<std::string>();
    }
    throw BackendError(BackendError::Kind::IoFailure,
                       "provider response has no completion text");
  }

  BackendConfig config_;
  std::string base_;
  std::string path_;
  Gate gate_;
  std::optional<ReplayStore> store_;
};

}  // namespace

std::unique_ptr<CompletionBackend> make_backend(const BackendConfig& config) {
  if (config.kind == BackendKind::Replay) {
    if (config.store_path.empty()) {
      throw ConfigError("replay backend requires a store path");
    }
    return std::make_unique<ReplayBackend>(config);
  }
  return std::make_unique<HttpBackend>(config);
}

}  // namespace sdoh::gateway
