#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "sdoh/errors.hpp"
#include "sdoh/prompting.hpp"

// Completion backends. The live backend speaks the chat-completions HTTP
// shape and records every exchange; the replay backend serves previously
// recorded responses so whole runs are reproducible offline.
namespace sdoh::gateway {

enum class BackendKind { Http, Replay };

struct BackendConfig {
  BackendKind kind = BackendKind::Replay;
  std::string endpoint;  // e.g. http://host:port/v1/chat/completions
  std::string model;
  std::string auth_env = "SDOH_API_TOKEN";
  int timeout_ms = 60000;
  int max_retries = 3;
  int max_concurrent = 4;
  std::string store_path;  // replay source; recording sink for live runs
  // Clinical text leaves the machine on live runs; refuse unless the
  // operator explicitly opted in.
  bool allow_external_transmission = false;
  std::optional<double> temperature;  // pass-through; provider default if unset
  std::string system_message;         // optional guideline attachment
};

// Key for one completion: which prompt, which sample of the k.
std::string request_hash(std::string_view model, int sample_index,
                         std::string_view prompt);

struct Exchange {
  std::string hash;
  std::string response;
  std::string model;
  int sample_index = 0;
  std::string note_id;
  long latency_ms = 0;
  std::string timestamp;
};

// Directory of content-addressed response files plus an index manifest.
// Append-only: re-recording an existing hash is a no-op. Reads are lock-free
// after open; writes are serialized.
class ReplayStore {
 public:
  enum class OpenMode { MustExist, CreateIfMissing };

  explicit ReplayStore(std::filesystem::path dir, OpenMode mode = OpenMode::MustExist);

  std::optional<std::string> lookup(const std::string& hash) const;
  bool contains(const std::string& hash) const;
  // Returns true when a new entry was written.
  bool record(const Exchange& exchange);
  void record_run(std::span<const Exchange> exchanges);
  std::size_t size() const;
  const std::filesystem::path& dir() const { return dir_; }

 private:
  void load_index();
  void write_index() const;

  std::filesystem::path dir_;
  std::map<std::string, std::string> files_;  // hash -> file name
  std::map<std::string, Exchange> meta_;
  mutable std::mutex write_mu_;
};

class CompletionBackend {
 public:
  virtual ~CompletionBackend() = default;
  virtual std::string complete(const prompting::PromptRequest& request,
                               int sample_index) = 0;
  virtual std::string_view model() const = 0;
};

std::unique_ptr<CompletionBackend> make_backend(const BackendConfig& config);

}  // namespace sdoh::gateway
