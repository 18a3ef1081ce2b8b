#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "generators.hpp"
#include "sdoh/corpus.hpp"
#include "sdoh/errors.hpp"
#include "sdoh/prompting.hpp"

using namespace sdoh;
using namespace sdoh::prompting;

#ifndef SDOH_SOURCE_ROOT
#define SDOH_SOURCE_ROOT "."
#endif

namespace {

const std::filesystem::path kRoot(SDOH_SOURCE_ROOT);

PromptTemplate all_at_once_template() {
  PromptTemplate tmpl =
      load_template(kRoot / "configs/templates/all_at_once.txt", PromptMode::AllAtOnce);
  tmpl.rules_text = corpus::read_file(kRoot / "configs/rules.txt");
  return tmpl;
}

PromptTemplate per_sdoh_template() {
  PromptTemplate tmpl =
      load_template(kRoot / "configs/templates/per_sdoh.txt", PromptMode::PerSdohType);
  tmpl.rules_text = corpus::read_file(kRoot / "configs/rules.txt");
  return tmpl;
}

std::vector<NoteDocument> synthetic_corpus(std::size_t n, std::size_t annotated,
                                           Split split = Split::Train) {
  std::vector<NoteDocument> corpus;
  testgen::Rng rng(404);
  for (std::size_t i = 0; i < n; ++i) {
    NoteDocument note;
    note.id = "note" + std::to_string(i);
    note.text = testgen::random_note(rng);
    note.split = split;
    if (i < annotated) {
      note.gold.push_back(testgen::random_valid_event(note.text, rng));
    }
    corpus.push_back(std::move(note));
  }
  return corpus;
}

NoteDocument target_note() {
  NoteDocument note;
  note.id = "target";
  note.text = "He smokes daily and works nights.";
  return note;
}

}  // namespace

TEST_CASE("template slot validation") {
  const auto dir = std::filesystem::temp_directory_path();
  {
    std::ofstream out(dir / "no_note.txt");
    out << "prompt without the note slot";
  }
  CHECK_THROWS_AS(load_template(dir / "no_note.txt", PromptMode::AllAtOnce),
                  ConfigError);
  {
    std::ofstream out(dir / "no_sdoh.txt");
    out << "annotate {note}";
  }
  CHECK_THROWS_AS(load_template(dir / "no_sdoh.txt", PromptMode::PerSdohType),
                  ConfigError);
  {
    std::ofstream out(dir / "stray_sdoh.txt");
    out << "annotate {sdoh} in {note}";
  }
  CHECK_THROWS_AS(load_template(dir / "stray_sdoh.txt", PromptMode::AllAtOnce),
                  ConfigError);
  CHECK_NOTHROW(load_template(dir / "stray_sdoh.txt", PromptMode::PerSdohType));
}

TEST_CASE("select_few_shot basics") {
  const auto corpus = synthetic_corpus(20, 20);

  FewShotConfig config;
  config.n = 0;
  CHECK(select_few_shot(config, corpus).notes.empty());

  config.n = 5;
  config.seed = 42;
  const auto first = select_few_shot(config, corpus);
  const auto second = select_few_shot(config, corpus);
  REQUIRE(first.notes.size() == 5);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(first.notes[i].id == second.notes[i].id);
  }
  CHECK(first.zero_event_admitted == 0);

  config.seed = 43;  // a different seed reorders the selection
  const auto third = select_few_shot(config, corpus);
  bool any_difference = false;
  for (std::size_t i = 0; i < 5; ++i) {
    any_difference = any_difference || third.notes[i].id != first.notes[i].id;
  }
  CHECK(any_difference);
}

TEST_CASE("selection of 50 from a 60-note corpus is reproducible") {
  const auto corpus = synthetic_corpus(60, 60);
  FewShotConfig config;
  config.n = 50;
  config.seed = 7;
  const auto a = select_few_shot(config, corpus);
  const auto b = select_few_shot(config, corpus);
  REQUIRE(a.notes.size() == 50);
  for (std::size_t i = 0; i < 50; ++i) {
    CHECK(a.notes[i].id == b.notes[i].id);
  }
}

TEST_CASE("annotated notes are preferred; zero-event notes are flagged") {
  const auto corpus = synthetic_corpus(10, 4);
  FewShotConfig config;
  config.seed = 9;

  config.n = 4;
  const auto only_annotated = select_few_shot(config, corpus);
  for (const NoteDocument& note : only_annotated.notes) {
    CHECK_FALSE(note.gold.empty());
  }
  CHECK(only_annotated.zero_event_admitted == 0);

  config.n = 7;
  const auto mixed = select_few_shot(config, corpus);
  CHECK(mixed.notes.size() == 7);
  CHECK(mixed.zero_event_admitted == 3);
}

TEST_CASE("insufficient corpus and leakage are refused") {
  const auto corpus = synthetic_corpus(3, 3);
  FewShotConfig config;
  config.n = 5;
  CHECK_THROWS_AS(select_few_shot(config, corpus), DataError);

  const auto test_split = synthetic_corpus(5, 5, Split::Test);
  config.n = 2;
  CHECK_THROWS_AS(select_few_shot(config, test_split), ConfigError);
}

TEST_CASE("allowlist overrides sampling") {
  const auto corpus = synthetic_corpus(6, 6);
  FewShotConfig config;
  config.allowlist = {"note3", "note0"};
  const auto selection = select_few_shot(config, corpus);
  REQUIRE(selection.notes.size() == 2);
  CHECK(selection.notes[0].id == "note3");
  CHECK(selection.notes[1].id == "note0");

  config.allowlist = {"missing"};
  CHECK_THROWS_AS(select_few_shot(config, corpus), ConfigError);
}

TEST_CASE("prompt building is byte-deterministic") {
  const auto corpus = synthetic_corpus(4, 4);
  const PromptTemplate tmpl = per_sdoh_template();
  const NoteDocument note = target_note();
  const auto a = build_prompt(tmpl, corpus, note, SdohType::Tobacco);
  const auto b = build_prompt(tmpl, corpus, note, SdohType::Tobacco);
  CHECK(a.rendered_text == b.rendered_text);
  CHECK(a.note_id == "target");
  CHECK(a.sdoh == SdohType::Tobacco);
}

TEST_CASE("zero-shot prompt has no examples heading and keeps the note") {
  const PromptTemplate tmpl = all_at_once_template();
  const NoteDocument note = target_note();
  const auto request = build_prompt(tmpl, {}, note, std::nullopt);
  CHECK(request.rendered_text.find("Here are some examples:") == std::string::npos);
  CHECK(request.rendered_text.find(note.text) != std::string::npos);
  for (const char* slot : {"{guidelines_ref}", "{schema_block}", "{rules_block}",
                           "{examples_block}", "{note}"}) {
    CHECK(request.rendered_text.find(slot) == std::string::npos);
  }
  CHECK(request.rendered_text.find("Output a list of events formatted in JSON format") !=
        std::string::npos);
}

TEST_CASE("per-sdoh prompt substitutes the category everywhere") {
  const PromptTemplate tmpl = per_sdoh_template();
  const auto request = build_prompt(tmpl, {}, target_note(), SdohType::Drug);
  CHECK(request.rendered_text.find("of type Drug in the notes") != std::string::npos);
  CHECK(request.rendered_text.find(
            "Extract all of the Drug events in the text. Do not extract any other "
            "SDOH type. Do not miss any of the Drug events.") != std::string::npos);
  CHECK(request.rendered_text.find("{sdoh}") == std::string::npos);
}

TEST_CASE("per-sdoh examples are filtered to the requested category") {
  std::vector<NoteDocument> examples;
  NoteDocument example;
  example.id = "ex";
  example.text = "He smokes and drinks.";
  example.split = Split::Train;
  SdohEvent tobacco;
  tobacco.sdoh = SdohType::Tobacco;
  tobacco.trigger = {3, 9, "smokes"};
  tobacco.status = StatusArg{{3, 9, "smokes"}, "current"};
  SdohEvent alcohol;
  alcohol.sdoh = SdohType::Alcohol;
  alcohol.trigger = {14, 20, "drinks"};
  alcohol.status = StatusArg{{14, 20, "drinks"}, "current"};
  example.gold = {tobacco, alcohol};
  examples.push_back(example);

  const PromptTemplate tmpl = per_sdoh_template();
  const auto request = build_prompt(tmpl, examples, target_note(), SdohType::Tobacco);
  CHECK(request.rendered_text.find("\"sdoh\": \"Tobacco\"") != std::string::npos);
  CHECK(request.rendered_text.find("\"sdoh\": \"Alcohol\"") == std::string::npos);

  // an example with no event of the requested category renders an empty list
  const auto drug = build_prompt(tmpl, examples, target_note(), SdohType::Drug);
  CHECK(drug.rendered_text.find("Annotations:\n[]") != std::string::npos);
}

TEST_CASE("examples follow the notes/annotations block layout") {
  const auto corpus = synthetic_corpus(2, 2);
  const PromptTemplate tmpl = all_at_once_template();
  const auto request = build_prompt(tmpl, corpus, target_note(), std::nullopt);
  const std::string& text = request.rendered_text;
  const std::size_t heading = text.find("Here are some examples:");
  REQUIRE(heading != std::string::npos);
  const std::size_t first_note = text.find("Notes: ", heading);
  const std::size_t first_ann = text.find("Annotations:\n", heading);
  CHECK(first_note < first_ann);
  CHECK(text.find("Here are the notes to annotate:") > first_ann);
}

TEST_CASE("mode and sdoh argument must be consistent") {
  const auto note = target_note();
  CHECK_THROWS_AS(build_prompt(per_sdoh_template(), {}, note, std::nullopt),
                  ConfigError);
  CHECK_THROWS_AS(build_prompt(all_at_once_template(), {}, note, SdohType::Drug),
                  ConfigError);
}

TEST_CASE("inline guidelines are prepended with delimiters") {
  PromptTemplate tmpl = all_at_once_template();
  tmpl.guidelines_text = "Annotate generously.";
  tmpl.guidelines = GuidelinesMode::Inline;
  const auto request = build_prompt(tmpl, {}, target_note(), std::nullopt);
  CHECK(request.rendered_text.rfind("--- ANNOTATION GUIDELINES ---\n", 0) == 0);
  CHECK(request.rendered_text.find("Annotate generously.") != std::string::npos);
  CHECK(request.rendered_text.find("--- END OF GUIDELINES ---") != std::string::npos);

  // attachment mode leaves the prompt untouched
  tmpl.guidelines = GuidelinesMode::Attachment;
  const auto attached = build_prompt(tmpl, {}, target_note(), std::nullopt);
  CHECK(attached.rendered_text.find("ANNOTATION GUIDELINES") == std::string::npos);
}
