#include "sdoh/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "sdoh/sha256.hpp"

namespace sdoh::corpus {

using nlohmann::json;

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << content;
}

std::vector<NoteDocument> load_corpus_dir(const std::filesystem::path& dir, Split split,
                                          const brat::RoleMap& role_map,
                                          bool require_ann) {
  if (!std::filesystem::is_directory(dir)) {
    throw DataError("corpus directory not found: " + dir.string());
  }
  std::vector<std::filesystem::path> txt_files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".txt") {
      txt_files.push_back(entry.path());
    }
  }
  std::sort(txt_files.begin(), txt_files.end());

  std::vector<NoteDocument> notes;
  notes.reserve(txt_files.size());
  for (const auto& txt : txt_files) {
    NoteDocument note;
    note.id = txt.stem().string();
    note.text = read_file(txt);
    note.split = split;
    const std::filesystem::path ann = txt.parent_path() / (note.id + ".ann");
    if (std::filesystem::exists(ann)) {
      const brat::Document doc = brat::parse_brat(read_file(ann), note.text, note.id);
      note.gold = brat::brat_to_events(doc, note.text, role_map);
    } else if (require_ann) {
      throw DataError("missing annotation file " + ann.string());
    }
    notes.push_back(std::move(note));
  }
  return notes;
}

void write_ann(const std::filesystem::path& path, std::span<const SdohEvent> events,
               std::string_view note_text, const brat::RoleMap& role_map) {
  const brat::Document doc = brat::events_to_brat(events, note_text, role_map);
  write_file(path, brat::serialize_brat(doc));
}

namespace {

std::filesystem::path resolve(const std::filesystem::path& base,
                              const std::string& value) {
  if (value.empty()) return {};
  const std::filesystem::path p(value);
  return p.is_absolute() ? p : base / p;
}

}  // namespace

json RunManifest::to_json() const {
  return {
      {"version", 1},
      {"corpus",
       {{"train", train_dir.string()},
        {"dev", dev_dir.string()},
        {"test", test_dir.string()},
        {"target_split", target_split}}},
      {"template",
       {{"all_at_once", all_at_once_template.string()},
        {"per_sdoh", per_sdoh_template.string()},
        {"rules", rules_file.string()},
        {"guidelines", guidelines_file.string()},
        {"guidelines_mode", guidelines_mode}}},
      {"role_map", role_map_file.string()},
      {"few_shot",
       {{"n", few_shot.n},
        {"seed", few_shot.seed},
        {"allowlist", few_shot.allowlist},
        {"source", few_shot_source}}},
      {"mode", std::string(prompting::to_string(mode))},
      {"consistency",
       {{"k", consistency.k},
        {"threshold", consistency.threshold},
        {"vote_mode",
         consistency.vote_mode == pipeline::VoteMode::PerEvent ? "per-event"
                                                               : "whole-response"},
        {"non_specific_filter", consistency.non_specific_filter},
        {"stoplist", consistency.non_specific_stoplist}}},
      {"backend",
       {{"kind", backend.kind == gateway::BackendKind::Replay ? "replay" : "http"},
        {"endpoint", backend.endpoint},
        {"model", backend.model},
        {"auth_env", backend.auth_env},
        {"timeout_ms", backend.timeout_ms},
        {"max_retries", backend.max_retries},
        {"max_concurrent", backend.max_concurrent},
        {"store", backend.store_path},
        {"allow_external_transmission", backend.allow_external_transmission},
        {"temperature",
         backend.temperature ? json(*backend.temperature) : json(nullptr)}}},
      {"output_dir", output_dir.string()},
  };
}

std::string RunManifest::hash() const { return sha256_hex(to_json().dump()); }

void RunManifest::validate() const {
  consistency.validate();
  if (few_shot_source != "train") {
    throw ConfigError("few-shot examples must come from the train split, not \"" +
                      few_shot_source + "\" (test-split leakage)");
  }
  if (!test_dir.empty() && !train_dir.empty() &&
      std::filesystem::weakly_canonical(train_dir) ==
          std::filesystem::weakly_canonical(test_dir)) {
    throw ConfigError("train and test corpus paths are identical; refusing to "
                      "draw few-shot examples from the test split");
  }
  if (target_split != "train" && target_split != "dev" && target_split != "test") {
    throw ConfigError("unknown target split " + target_split);
  }
  if (guidelines_mode != "none" && guidelines_mode != "inline" &&
      guidelines_mode != "attachment") {
    throw ConfigError("unknown guidelines mode " + guidelines_mode);
  }
}

prompting::PromptTemplate RunManifest::load_prompt_template() const {
  const std::filesystem::path body = mode == prompting::PromptMode::PerSdohType
                                         ? per_sdoh_template
                                         : all_at_once_template;
  if (body.empty()) {
    throw ConfigError("manifest does not name a template for mode " +
                      std::string(prompting::to_string(mode)));
  }
  prompting::PromptTemplate tmpl = prompting::load_template(body, mode);
  if (!rules_file.empty()) tmpl.rules_text = read_file(rules_file);
  if (!guidelines_file.empty() && guidelines_mode != "none") {
    tmpl.guidelines_text = read_file(guidelines_file);
    tmpl.guidelines = guidelines_mode == "inline"
                          ? prompting::GuidelinesMode::Inline
                          : prompting::GuidelinesMode::Attachment;
  }
  return tmpl;
}

brat::RoleMap RunManifest::load_role_map() const {
  return role_map_file.empty() ? brat::RoleMap::defaults()
                               : brat::RoleMap::load(role_map_file);
}

RunManifest load_manifest(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw ConfigError("bad manifest " + path.string() + ": " + e.what());
  }
  if (j.value("version", 0) != 1) {
    throw ConfigError("manifest " + path.string() + " must declare \"version\": 1");
  }
  const std::filesystem::path base = path.parent_path();
  RunManifest m;

  const json corpus = j.value("corpus", json::object());
  m.train_dir = resolve(base, corpus.value("train", ""));
  m.dev_dir = resolve(base, corpus.value("dev", ""));
  m.test_dir = resolve(base, corpus.value("test", ""));
  m.target_split = corpus.value("target_split", "test");

  const json tmpl = j.value("template", json::object());
  m.all_at_once_template = resolve(base, tmpl.value("all_at_once", ""));
  m.per_sdoh_template = resolve(base, tmpl.value("per_sdoh", ""));
  m.rules_file = resolve(base, tmpl.value("rules", ""));
  m.guidelines_file = resolve(base, tmpl.value("guidelines", ""));
  m.guidelines_mode = tmpl.value("guidelines_mode", "none");
  m.role_map_file = resolve(base, j.value("role_map", ""));

  const json few_shot = j.value("few_shot", json::object());
  m.few_shot.n = few_shot.value("n", 0u);
  m.few_shot.seed = few_shot.value("seed", 0ull);
  m.few_shot.allowlist = few_shot.value("allowlist", std::vector<std::string>{});
  m.few_shot_source = few_shot.value("source", "train");

  if (const auto mode = prompting::prompt_mode_from(j.value("mode", "per-sdoh"))) {
    m.mode = *mode;
  } else {
    throw ConfigError("unknown mode " + j.value("mode", ""));
  }

  const json consistency = j.value("consistency", json::object());
  m.consistency.k = consistency.value("k", 3);
  // default threshold is ceil(k/2): 2 when k=3
  m.consistency.threshold = consistency.value("threshold", (m.consistency.k + 1) / 2);
  const std::string vote = consistency.value("vote_mode", "per-event");
  if (vote == "per-event") {
    m.consistency.vote_mode = pipeline::VoteMode::PerEvent;
  } else if (vote == "whole-response") {
    m.consistency.vote_mode = pipeline::VoteMode::WholeResponse;
  } else {
    throw ConfigError("unknown vote mode " + vote);
  }
  m.consistency.non_specific_filter = consistency.value("non_specific_filter", false);
  if (consistency.contains("stoplist")) {
    m.consistency.non_specific_stoplist =
        consistency.at("stoplist").get<std::vector<std::string>>();
  }

  const json backend = j.value("backend", json::object());
  const std::string kind = backend.value("kind", "replay");
  if (kind == "replay") {
    m.backend.kind = gateway::BackendKind::Replay;
  } else if (kind == "http") {
    m.backend.kind = gateway::BackendKind::Http;
  } else {
    throw ConfigError("unknown backend kind " + kind);
  }
  m.backend.endpoint = backend.value("endpoint", "");
  m.backend.model = backend.value("model", "");
  m.backend.auth_env = backend.value("auth_env", "SDOH_API_TOKEN");
  m.backend.timeout_ms = backend.value("timeout_ms", 60000);
  m.backend.max_retries = backend.value("max_retries", 3);
  m.backend.max_concurrent = backend.value("max_concurrent", 4);
  m.backend.store_path = resolve(base, backend.value("store", "")).string();
  m.backend.allow_external_transmission =
      backend.value("allow_external_transmission", false);
  if (backend.contains("temperature") && !backend.at("temperature").is_null()) {
    m.backend.temperature = backend.at("temperature").get<double>();
  }

  m.output_dir = resolve(base, j.value("output_dir", "out"));
  m.validate();
  return m;
}

}  // namespace sdoh::corpus
