// Regenerates the checked-in test fixtures: the synthetic corpora, the replay
// stores, and the prompt golden files. Run from anywhere:
//
//   sdoh_fixturegen --root <repo root>
//
// Stores are derived from the fixture manifests so their request hashes match
// what `sdoh extract` computes for the same configuration.
#include <cassert>
#include <cstring>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "sdoh/brat.hpp"
#include "sdoh/codec.hpp"
#include "sdoh/corpus.hpp"
#include "sdoh/gateway.hpp"
#include "sdoh/prompting.hpp"
#include "sdoh/utf8.hpp"

using namespace sdoh;
namespace fs = std::filesystem;

namespace {

struct ArgSpec {
  const char* text = nullptr;
  const char* value = nullptr;
};

struct EventSpec {
  SdohType type;
  const char* trigger;
  ArgSpec status;
  ArgSpec type_arg;
  const char* duration = nullptr;
  const char* history = nullptr;
  const char* frequency = nullptr;
  const char* amount = nullptr;
  const char* method = nullptr;
};

struct NoteSpec {
  const char* id;
  const char* text;
  std::vector<EventSpec> events;
};

Span locate(const std::string& text, const char* needle) {
  const std::size_t byte = text.find(needle);
  if (byte == std::string::npos) {
    throw std::runtime_error(std::string("fixture text lacks \"") + needle + "\"");
  }
  const std::size_t cp = utf8::cp_index(text, byte);
  return {cp, cp + utf8::length(needle), needle};
}

SdohEvent build_event(const std::string& text, const EventSpec& spec) {
  SdohEvent event;
  event.sdoh = spec.type;
  event.trigger = locate(text, spec.trigger);
  event.status = StatusArg{locate(text, spec.status.text), spec.status.value};
  if (spec.type_arg.text) {
    event.type = TypeArg{locate(text, spec.type_arg.text),
                         spec.type_arg.value
                             ? std::optional<std::string>(spec.type_arg.value)
                             : std::nullopt};
  }
  if (spec.duration) event.duration = locate(text, spec.duration);
  if (spec.history) event.history = locate(text, spec.history);
  if (spec.frequency) event.frequency = locate(text, spec.frequency);
  if (spec.amount) event.amount = locate(text, spec.amount);
  if (spec.method) event.method = locate(text, spec.method);

  const ValidationResult violations = validate_event(event, text);
  if (!violations.empty()) {
    throw std::runtime_error("fixture event for trigger \"" + std::string(spec.trigger) +
                             "\" is invalid");
  }
  return event;
}

std::vector<NoteSpec> train_notes() {
  return {
      {"t01",
       "SOCIAL HISTORY: The patient smokes one pack per day and has done so for 20 "
       "years. He works as an electrician.",
       {{SdohType::Tobacco, "smokes", {"smokes", "current"}, {}, "for 20 years",
         nullptr, "per day", "one pack"},
        {SdohType::Employment, "works", {"works", "employed"}, {"electrician"}}}},
      {"t02",
       "She drinks a glass of wine with dinner most nights. Denies tobacco use.",
       {{SdohType::Alcohol, "drinks", {"drinks", "current"}, {"wine"}, nullptr,
         nullptr, "most nights", "a glass"},
        {SdohType::Tobacco, "tobacco use", {"Denies", "none"}}}},
      {"t03",
       "Patient lives alone in a small apartment. Retired teacher, stopped working "
       "in 2010.",
       {{SdohType::LivingStatus, "lives", {"lives", "current"}, {"alone", "alone"}},
        {SdohType::Employment, "working", {"Retired", "retired"}, {"teacher"}, nullptr,
         "in 2010"}}},
      {"t04",
       "He reports heavy alcohol use in the past, quit drinking 5 years ago. No "
       "illicit drug use.",
       {{SdohType::Alcohol, "alcohol use", {"quit", "past"}, {}, nullptr,
         "5 years ago"},
        {SdohType::Drug, "drug use", {"No", "none"}}}},
      {"t05",
       "Smoked two packs daily for thirty years; quit in 1995. Currently uses "
       "chewing tobacco.",
       {{SdohType::Tobacco, "Smoked", {"quit", "past"}, {}, "for thirty years",
         "in 1995", "daily", "two packs"},
        {SdohType::Tobacco, "chewing tobacco", {"Currently", "current"}, {}, nullptr,
         nullptr, nullptr, nullptr, "chewing"}}},
      {"t06",
       "Patient is employed as a nurse at the county hospital. Lives with her "
       "husband and two children.",
       {{SdohType::Employment, "employed", {"employed", "employed"}, {"nurse"}},
        {SdohType::LivingStatus, "Lives", {"Lives", "current"},
         {"with her husband", "with_family"}}}},
      {"t07",
       "He used heroin intravenously until 2019 and has been clean since.",
       {{SdohType::Drug, "used heroin", {"used", "past"}, {"heroin"}, nullptr,
         "until 2019", nullptr, nullptr, "intravenously"}}},
      {"t08",
       "Lifelong nonsmoker. Drinks socially, about two drinks per month.",
       {{SdohType::Tobacco, "nonsmoker", {"nonsmoker", "none"}},
        {SdohType::Alcohol, "Drinks", {"Drinks", "current"}, {}, nullptr, nullptr,
         "per month", "two drinks"}}},
      {"t09",
       "The patient is currently unemployed after losing his construction job in "
       "March.",
       {{SdohType::Employment, "job", {"unemployed", "unemployed"}, {"construction"},
         nullptr, "in March"}}},
      {"t10",
       "Elle vit seule pr\xc3\xa8s du caf\xc3\xa9 depuis 2018. No alcohol, tobacco, "
       "or drugs.",
       {{SdohType::LivingStatus, "vit", {"vit", "current"}, {"seule", "alone"},
         "depuis 2018"},
        {SdohType::Alcohol, "alcohol", {"No", "none"}}}},
      {"t11",
       "Retired carpenter; worked for 40 years. Smokes cigarettes, half a pack "
       "daily.",
       {{SdohType::Employment, "worked", {"Retired", "retired"}, {"carpenter"},
         "for 40 years"},
        {SdohType::Tobacco, "Smokes", {"Smokes", "current"}, {"cigarettes"}, nullptr,
         nullptr, "daily", "half a pack"}}},
      {"t12",
       "Patient lives with roommates downtown and denies any current drug or "
       "alcohol use.",
       {{SdohType::LivingStatus, "lives", {"lives", "current"},
         {"with roommates", "with_others"}},
        {SdohType::Drug, "drug", {"denies", "none"}},
        {SdohType::Alcohol, "alcohol use", {"denies", "none"}}}},
  };
}

std::vector<NoteSpec> test_notes() {
  return {
      {"e01",
       "SOCIAL HISTORY: He smokes two packs per day and drinks beer on weekends. "
       "Works as a welder at the shipyard.",
       {{SdohType::Tobacco, "smokes", {"smokes", "current"}, {}, nullptr, nullptr,
         "per day", "two packs"},
        {SdohType::Alcohol, "drinks", {"drinks", "current"}, {"beer"}, nullptr,
         nullptr, "on weekends"},
        {SdohType::Employment, "Works", {"Works", "employed"}, {"welder"}}}},
      {"e02",
       "Patient lives alone since her divorce in 2015. Denies tobacco and illicit "
       "drug use.",
       {{SdohType::LivingStatus, "lives", {"lives", "current"}, {"alone", "alone"}},
        {SdohType::Tobacco, "tobacco", {"Denies", "none"}},
        {SdohType::Drug, "drug use", {"Denies", "none"}}}},
      {"e03",
       "Drank heavily for a decade, quit alcohol in 2020. Uses marijuana twice a "
       "week.",
       {{SdohType::Alcohol, "alcohol", {"quit", "past"}, {}, "for a decade",
         "in 2020"},
        {SdohType::Drug, "marijuana", {"Uses", "current"}, {"marijuana"}, nullptr,
         nullptr, "twice a week"}}},
      {"e04",
       "Vive seul \xc3\xa0 l'h\xc3\xb4pital de r\xc3\xa9"
       "adaptation depuis mai. Ancien fumeur, a arr\xc3\xaat\xc3\xa9 il y a 10 ans.",
       {{SdohType::LivingStatus, "Vive", {"Vive", "current"}, {"seul", "alone"},
         "depuis mai"},
        {SdohType::Tobacco, "fumeur", {"arr\xc3\xaat\xc3\xa9", "past"}, {}, nullptr,
         "il y a 10 ans"}}},
      {"e05",
       "She is a homemaker and lives with her extended family. Quit smoking "
       "cigarettes five years ago.",
       {{SdohType::Employment, "homemaker", {"homemaker", "homemaker"}},
        {SdohType::LivingStatus, "lives", {"lives", "current"},
         {"with her extended family", "with_family"}},
        {SdohType::Tobacco, "smoking", {"Quit", "past"}, {"cigarettes"}, nullptr,
         "five years ago"}}},
  };
}

void write_corpus(const fs::path& dir, const std::vector<NoteSpec>& specs,
                  const brat::RoleMap& role_map) {
  fs::create_directories(dir);
  for (const NoteSpec& spec : specs) {
    const std::string text(spec.text);
    std::vector<SdohEvent> events;
    for (const EventSpec& event_spec : spec.events) {
      events.push_back(build_event(text, event_spec));
    }
    corpus::write_file(dir / (std::string(spec.id) + ".txt"), text);
    corpus::write_ann(dir / (std::string(spec.id) + ".ann"), events, text, role_map);
  }
}

std::vector<SdohEvent> filter_type(const std::vector<SdohEvent>& events, SdohType type) {
  std::vector<SdohEvent> out;
  for (const SdohEvent& event : events) {
    if (event.sdoh == type) out.push_back(event);
  }
  return out;
}

// The third sample drops the optional span arguments and adds a spurious
// Tobacco event, so majority voting has real work to do: 2-of-3 keeps the
// arguments and excludes the 1-of-3 event.
std::vector<SdohEvent> third_sample(const std::vector<SdohEvent>& events, SdohType type,
                                    const std::string& note_text) {
  std::vector<SdohEvent> out;
  for (SdohEvent event : events) {
    event.duration.reset();
    event.history.reset();
    event.frequency.reset();
    event.amount.reset();
    event.method.reset();
    out.push_back(std::move(event));
  }
  if (type == SdohType::Tobacco) {
    const std::size_t space = note_text.find(' ');
    const std::size_t end_cp =
        utf8::cp_index(note_text, space == std::string::npos ? note_text.size() : space);
    SdohEvent spurious;
    spurious.sdoh = SdohType::Tobacco;
    spurious.trigger = {0, end_cp, std::string(utf8::slice(note_text, 0, end_cp))};
    spurious.status = StatusArg{spurious.trigger, "current"};
    out.push_back(std::move(spurious));
  }
  return out;
}

void wipe(const fs::path& dir) {
  std::error_code ec;
  fs::remove_all(dir, ec);
}

void generate_e2e_store(const fs::path& fixtures) {
  const corpus::RunManifest manifest =
      corpus::load_manifest(fixtures / "manifest_e2e.json");
  const brat::RoleMap role_map = manifest.load_role_map();
  const prompting::PromptTemplate tmpl = manifest.load_prompt_template();
  const auto train = corpus::load_corpus_dir(manifest.train_dir, Split::Train, role_map);
  const auto examples = prompting::select_few_shot(manifest.few_shot, train);
  const auto notes = corpus::load_corpus_dir(manifest.test_dir, Split::Test, role_map);

  wipe(manifest.backend.store_path);
  gateway::ReplayStore store(manifest.backend.store_path,
                             gateway::ReplayStore::OpenMode::CreateIfMissing);
  for (const NoteDocument& note : notes) {
    for (SdohType sdoh : kAllSdohTypes) {
      const auto request = prompting::build_prompt(tmpl, examples.notes, note, sdoh);
      const std::vector<SdohEvent> gold = filter_type(note.gold, sdoh);
      const std::string full = codec::render_events(gold);
      const std::string variant =
          codec::render_events(third_sample(gold, sdoh, note.text));
      for (int i = 0; i < manifest.consistency.k; ++i) {
        gateway::Exchange exchange;
        exchange.hash =
            gateway::request_hash(manifest.backend.model, i, request.rendered_text);
        exchange.response = i < 2 ? full : variant;
        exchange.model = manifest.backend.model;
        exchange.sample_index = i;
        exchange.note_id = note.id;
        exchange.timestamp = "2025-01-01T00:00:00Z";
        store.record(exchange);
      }
    }
  }
  std::cout << "e2e store: " << store.size() << " exchanges\n";
}

void generate_sweep_stores(const fs::path& fixtures) {
  const corpus::RunManifest manifest =
      corpus::load_manifest(fixtures / "manifest_sweep.json");
  const brat::RoleMap role_map = manifest.load_role_map();
  const prompting::PromptTemplate tmpl = manifest.load_prompt_template();
  const auto train = corpus::load_corpus_dir(manifest.train_dir, Split::Train, role_map);
  const auto notes = corpus::load_corpus_dir(manifest.test_dir, Split::Test, role_map);

  for (const int n : {0, 10}) {
    prompting::FewShotConfig few_shot = manifest.few_shot;
    few_shot.n = static_cast<std::size_t>(n);
    const auto examples = prompting::select_few_shot(few_shot, train);

    const fs::path store_dir =
        fs::path(manifest.backend.store_path) / ("n" + std::to_string(n));
    wipe(store_dir);
    gateway::ReplayStore store(store_dir, gateway::ReplayStore::OpenMode::CreateIfMissing);
    for (const NoteDocument& note : notes) {
      const auto request =
          prompting::build_prompt(tmpl, examples.notes, note, std::nullopt);
      std::vector<SdohEvent> events = note.gold;
      if (n == 0 && note.id == "e01") {
        // the zero-shot run misses the Employment event on one note
        std::erase_if(events,
                      [](const SdohEvent& e) { return e.sdoh == SdohType::Employment; });
      }
      gateway::Exchange exchange;
      exchange.hash =
          gateway::request_hash(manifest.backend.model, 0, request.rendered_text);
      exchange.response = codec::render_events(events);
      exchange.model = manifest.backend.model;
      exchange.sample_index = 0;
      exchange.note_id = note.id;
      exchange.timestamp = "2025-01-01T00:00:00Z";
      store.record(exchange);
    }
    std::cout << "sweep store n" << n << ": " << store.size() << " exchanges\n";
  }
}

void generate_goldens(const fs::path& fixtures) {
  const corpus::RunManifest sweep = corpus::load_manifest(fixtures / "manifest_sweep.json");
  const corpus::RunManifest e2e = corpus::load_manifest(fixtures / "manifest_e2e.json");
  const brat::RoleMap role_map = sweep.load_role_map();
  const auto train = corpus::load_corpus_dir(sweep.train_dir, Split::Train, role_map);
  const auto notes = corpus::load_corpus_dir(sweep.test_dir, Split::Test, role_map);
  const NoteDocument& note = notes.front();  // e01

  fs::create_directories(fixtures / "golden");

  {
    corpus::RunManifest zero_shot = sweep;
    zero_shot.few_shot.n = 0;
    const auto tmpl = zero_shot.load_prompt_template();
    const auto request = prompting::build_prompt(tmpl, {}, note, std::nullopt);
    corpus::write_file(fixtures / "golden" / "prompt_all_n0.txt",
                       request.rendered_text);
  }
  {
    const auto tmpl = e2e.load_prompt_template();
    const auto examples = prompting::select_few_shot(e2e.few_shot, train);
    const auto request =
        prompting::build_prompt(tmpl, examples.notes, note, SdohType::Drug);
    corpus::write_file(fixtures / "golden" / "prompt_per_sdoh_drug_n2.txt",
                       request.rendered_text);
  }
  std::cout << "golden prompts written\n";
}

}  // namespace

int main(int argc, char** argv) {
  fs::path root = fs::current_path();
  for (int i = 1; i < argc; ++i) {
    if (std::string(argv[i]) == "--root" && i + 1 < argc) root = argv[++i];
  }
  const fs::path fixtures = root / "tests" / "fixtures";

  try {
    const brat::RoleMap role_map = brat::RoleMap::defaults();
    write_corpus(fixtures / "corpus" / "train", train_notes(), role_map);
    write_corpus(fixtures / "corpus" / "test", test_notes(), role_map);
    std::cout << "corpus written\n";
    generate_e2e_store(fixtures);
    generate_sweep_stores(fixtures);
    generate_goldens(fixtures);
  } catch (const std::exception& e) {
    std::cerr << "fixturegen failed: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
