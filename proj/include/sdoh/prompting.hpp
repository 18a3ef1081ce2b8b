#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sdoh/event_model.hpp"

namespace sdoh::prompting {

enum class PromptMode { AllAtOnce, PerSdohType };

std::string_view to_string(PromptMode mode);
std::optional<PromptMode> prompt_mode_from(std::string_view name);

enum class GuidelinesMode { None, Inline, Attachment };

// Template bodies are plain text with named slots:
//   {guidelines_ref} {schema_block} {rules_block} {examples_block} {note} {sdoh}
// AllAtOnce bodies must not contain {sdoh}; PerSdohType bodies must.
struct PromptTemplate {
  PromptMode mode = PromptMode::AllAtOnce;
  std::string body;
  std::string rules_text;       // constraint lines appended via {rules_block}
  std::string guidelines_text;  // full guideline document, when available
  GuidelinesMode guidelines = GuidelinesMode::None;
};

PromptTemplate load_template(const std::filesystem::path& body_file, PromptMode mode);

// The response schema block substituted for {schema_block}.
extern const std::string_view kSchemaBlock;

struct FewShotConfig {
  std::size_t n = 0;
  std::uint64_t seed = 0;
  // When non-empty, selection is exactly these note ids, in order.
  std::vector<std::string> allowlist;
};

struct FewShotSelection {
  std::vector<NoteDocument> notes;
  // Notes admitted without any gold event because the corpus could not
  // supply enough annotated ones.
  std::size_t zero_event_admitted = 0;
};

// Deterministic given (seed, corpus). Only train-split corpora are accepted;
// anything else is a leakage error.
FewShotSelection select_few_shot(const FewShotConfig& config,
                                 std::span<const NoteDocument> corpus);

struct PromptRequest {
  std::string rendered_text;
  PromptMode mode = PromptMode::AllAtOnce;
  std::optional<SdohType> sdoh;
  std::string note_id;
};

// Pure; byte-deterministic for fixed inputs. In PerSdohType mode the
// examples' rendered annotations are filtered to the requested category.
PromptRequest build_prompt(const PromptTemplate& tmpl,
                           std::span<const NoteDocument> examples,
                           const NoteDocument& note, std::optional<SdohType> sdoh);

}  // namespace sdoh::prompting
