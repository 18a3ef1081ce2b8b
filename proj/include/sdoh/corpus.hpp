#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sdoh/brat.hpp"
#include "sdoh/event_model.hpp"
#include "sdoh/gateway.hpp"
#include "sdoh/pipeline.hpp"
#include "sdoh/prompting.hpp"

// Corpus layout on disk: a directory of paired <id>.txt / <id>.ann files,
// usually under train/ dev/ test/ subfolders.
namespace sdoh::corpus {

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

// Notes sorted by id. A missing .ann means no gold annotation. When
// require_ann is set, .txt files without a companion .ann are an error.
std::vector<NoteDocument> load_corpus_dir(const std::filesystem::path& dir, Split split,
                                          const brat::RoleMap& role_map,
                                          bool require_ann = false);

void write_ann(const std::filesystem::path& path, std::span<const SdohEvent> events,
               std::string_view note_text, const brat::RoleMap& role_map);

// Everything one extraction run needs; loaded from a versioned JSON file.
// Relative paths resolve against the manifest's directory.
struct RunManifest {
  std::filesystem::path train_dir;
  std::filesystem::path dev_dir;
  std::filesystem::path test_dir;
  std::string target_split = "test";

  std::filesystem::path all_at_once_template;
  std::filesystem::path per_sdoh_template;
  std::filesystem::path rules_file;
  std::filesystem::path guidelines_file;
  std::string guidelines_mode = "none";  // none | inline | attachment
  std::filesystem::path role_map_file;

  prompting::FewShotConfig few_shot;
  std::string few_shot_source = "train";

  prompting::PromptMode mode = prompting::PromptMode::PerSdohType;
  pipeline::ConsistencyConfig consistency;
  gateway::BackendConfig backend;
  std::filesystem::path output_dir = "out";

  // Provenance hash over the effective configuration; embedded in outputs.
  std::string hash() const;
  nlohmann::json to_json() const;
  void validate() const;

  prompting::PromptTemplate load_prompt_template() const;
  brat::RoleMap load_role_map() const;
};

RunManifest load_manifest(const std::filesystem::path& path);

}  // namespace sdoh::corpus
