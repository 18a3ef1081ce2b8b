#include "sdoh/prompting.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <sstream>

#include "sdoh/codec.hpp"
#include "sdoh/errors.hpp"

namespace sdoh::prompting {

const std::string_view kSchemaBlock =
    "[{\n"
    "  \"sdoh\": \"[Employment|LivingStatus|Alcohol|Tobacco|Drug]\",\n"
    "  \"trigger\": (start_index, end_index, \"text\"),\n"
    "  \"status\": (start_index, end_index, \"text\", \"value\") or null,\n"
    "  \"duration\": (start_index, end_index, \"text\") or null,\n"
    "  \"history\": (start_index, end_index, \"text\") or null,\n"
    "  \"type\": (start_index, end_index, \"text\", \"value\") or null,\n"
    "  \"amount\": (start_index, end_index, \"text\") or null,\n"
    "  \"frequency\": (start_index, end_index, \"text\") or null,\n"
    "  \"method\": (start_index, end_index, \"text\") or null\n"
    "}]";

std::string_view to_string(PromptMode mode) {
  return mode == PromptMode::AllAtOnce ? "all" : "per-sdoh";
}

std::optional<PromptMode> prompt_mode_from(std::string_view name) {
  if (name == "all" || name == "all-at-once") return PromptMode::AllAtOnce;
  if (name == "per-sdoh" || name == "per-sdoh-type") return PromptMode::PerSdohType;
  return std::nullopt;
}

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void replace_all(std::string& text, std::string_view slot, std::string_view value) {
  std::size_t pos = 0;
  while ((pos = text.find(slot, pos)) != std::string::npos) {
    text.replace(pos, slot.size(), value);
    pos += value.size();
  }
}

std::string examples_block(std::span<const NoteDocument> examples,
                           std::optional<SdohType> sdoh) {
  if (examples.empty()) return "";
  std::string out = "Here are some examples:\n\n";
  for (const NoteDocument& example : examples) {
    std::vector<SdohEvent> events;
    for (const SdohEvent& event : example.gold) {
      if (!sdoh || event.sdoh == *sdoh) events.push_back(event);
    }
    out += "Notes: " + example.text + "\n\nAnnotations:\n" +
           codec::render_events(events) + "\n\n";
  }
  return out;
}

}  // namespace

PromptTemplate load_template(const std::filesystem::path& body_file, PromptMode mode) {
  PromptTemplate tmpl;
  tmpl.mode = mode;
  tmpl.body = read_file(body_file);
  const bool has_sdoh_slot = tmpl.body.find("{sdoh}") != std::string::npos;
  if (mode == PromptMode::PerSdohType && !has_sdoh_slot) {
    throw ConfigError("TemplateSlotMissing: per-sdoh template needs {sdoh} in " +
                      body_file.string());
  }
  if (mode == PromptMode::AllAtOnce && has_sdoh_slot) {
    throw ConfigError("all-at-once template must not contain {sdoh}: " +
                      body_file.string());
  }
  if (tmpl.body.find("{note}") == std::string::npos) {
    throw ConfigError("TemplateSlotMissing: {note} in " + body_file.string());
  }
  return tmpl;
}

FewShotSelection select_few_shot(const FewShotConfig& config,
                                 std::span<const NoteDocument> corpus) {
  for (const NoteDocument& note : corpus) {
    if (note.split != Split::Train) {
      throw ConfigError("few-shot example source must be the train split; note " +
                        note.id + " is " + std::string(to_string(note.split)));
    }
  }

  FewShotSelection selection;
  if (!config.allowlist.empty()) {
    for (const std::string& id : config.allowlist) {
      const auto it = std::find_if(corpus.begin(), corpus.end(),
                                   [&](const NoteDocument& n) { return n.id == id; });
      if (it == corpus.end()) {
        throw ConfigError("few-shot allowlist names unknown note " + id);
      }
      if (it->gold.empty()) ++selection.zero_event_admitted;
      selection.notes.push_back(*it);
    }
    return selection;
  }

  if (config.n > corpus.size()) {
    throw DataError("InsufficientCorpus: need " + std::to_string(config.n) +
                    " few-shot examples, corpus has " + std::to_string(corpus.size()));
  }
  if (config.n == 0) return selection;

  // Hand-rolled Fisher-Yates over mt19937_64 so the selection is identical
  // across platforms (std::shuffle is not).
  auto shuffled = [](std::vector<std::size_t> idx, std::mt19937_64& rng) {
    for (std::size_t i = idx.size(); i > 1; --i) {
      std::swap(idx[i - 1], idx[rng() % i]);
    }
    return idx;
  };

  std::vector<std::size_t> annotated;
  std::vector<std::size_t> unannotated;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    (corpus[i].gold.empty() ? unannotated : annotated).push_back(i);
  }

  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order = shuffled(std::move(annotated), rng);
  if (order.size() < config.n) {
    const std::vector<std::size_t> rest = shuffled(std::move(unannotated), rng);
    selection.zero_event_admitted = config.n - order.size();
    order.insert(order.end(), rest.begin(), rest.end());
  }
  for (std::size_t i = 0; i < config.n; ++i) {
    selection.notes.push_back(corpus[order[i]]);
  }
  return selection;
}

PromptRequest build_prompt(const PromptTemplate& tmpl,
                           std::span<const NoteDocument> examples,
                           const NoteDocument& note, std::optional<SdohType> sdoh) {
  if (tmpl.mode == PromptMode::PerSdohType && !sdoh) {
    throw ConfigError("per-sdoh prompt requires a target SDOH type");
  }
  if (tmpl.mode == PromptMode::AllAtOnce && sdoh) {
    throw ConfigError("all-at-once prompt must not name an SDOH type");
  }
  if (tmpl.body.find("{note}") == std::string::npos) {
    throw ConfigError("TemplateSlotMissing: {note}");
  }

  std::string text = tmpl.body;
  const std::string guidelines_ref =
      tmpl.guidelines == GuidelinesMode::Inline && !tmpl.guidelines_text.empty()
          ? "--- ANNOTATION GUIDELINES ---\n" + tmpl.guidelines_text +
                "\n--- END OF GUIDELINES ---\n\n"
          : "";
  replace_all(text, "{guidelines_ref}", guidelines_ref);
  replace_all(text, "{schema_block}", kSchemaBlock);
  replace_all(text, "{rules_block}", tmpl.rules_text);
  replace_all(text, "{examples_block}", examples_block(examples, sdoh));
  if (sdoh) replace_all(text, "{sdoh}", to_string(*sdoh));
  replace_all(text, "{note}", note.text);

  PromptRequest request;
  request.rendered_text = std::move(text);
  request.mode = tmpl.mode;
  request.sdoh = sdoh;
  request.note_id = note.id;
  return request;
}

}  // namespace sdoh::prompting
