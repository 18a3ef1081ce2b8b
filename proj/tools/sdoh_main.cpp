// Command-line front end: extract / score / sweep / convert.
#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "sdoh/brat.hpp"
#include "sdoh/codec.hpp"
#include "sdoh/corpus.hpp"
#include "sdoh/errors.hpp"
#include "sdoh/gateway.hpp"
#include "sdoh/pipeline.hpp"
#include "sdoh/prompting.hpp"
#include "sdoh/scorer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitData = 2;
constexpr int kExitBackend = 3;

struct ExtractOptions {
  std::string manifest_path;
  std::optional<std::string> mode;
  std::optional<int> n_shot;
  std::optional<unsigned long long> seed;
  std::optional<int> k;
  std::optional<int> threshold;
  std::optional<std::string> backend;
  std::optional<std::string> store;
  std::optional<std::string> out;
  std::optional<std::string> split;
  bool allow_external = false;
  bool serial = false;
};

void apply_overrides(sdoh::corpus::RunManifest& manifest, const ExtractOptions& opt) {
  if (opt.mode) {
    const auto mode = sdoh::prompting::prompt_mode_from(*opt.mode);
    if (!mode) throw sdoh::ConfigError("unknown mode " + *opt.mode);
    manifest.mode = *mode;
  }
  if (opt.n_shot) manifest.few_shot.n = static_cast<std::size_t>(*opt.n_shot);
  if (opt.seed) manifest.few_shot.seed = *opt.seed;
  if (opt.k) {
    manifest.consistency.k = *opt.k;
    if (!opt.threshold) manifest.consistency.threshold = (*opt.k + 1) / 2;
  }
  if (opt.threshold) manifest.consistency.threshold = *opt.threshold;
  if (opt.backend) {
    if (*opt.backend == "replay") {
      manifest.backend.kind = sdoh::gateway::BackendKind::Replay;
    } else if (*opt.backend == "http") {
      manifest.backend.kind = sdoh::gateway::BackendKind::Http;
    } else {
      throw sdoh::ConfigError("unknown backend " + *opt.backend);
    }
  }
  if (opt.store) manifest.backend.store_path = *opt.store;
  if (opt.out) manifest.output_dir = *opt.out;
  if (opt.split) manifest.target_split = *opt.split;
  if (opt.allow_external) manifest.backend.allow_external_transmission = true;
}

fs::path target_dir(const sdoh::corpus::RunManifest& manifest) {
  if (manifest.target_split == "train") return manifest.train_dir;
  if (manifest.target_split == "dev") return manifest.dev_dir;
  return manifest.test_dir;
}

// Run directories are never overwritten; a numeric suffix disambiguates.
fs::path fresh_run_dir(const fs::path& base, const std::string& run_id) {
  fs::path dir = base / ("run-" + run_id);
  for (int suffix = 2; fs::exists(dir); ++suffix) {
    dir = base / ("run-" + run_id + "-" + std::to_string(suffix));
  }
  return dir;
}

struct ExtractOutcome {
  fs::path run_dir;
  sdoh::scorer::ScoreReport report;  // filled by sweep only
  int exit_code = kExitOk;
};

ExtractOutcome run_extract(sdoh::corpus::RunManifest manifest, bool serial,
                           bool quiet = false) {
  manifest.validate();
  const sdoh::brat::RoleMap role_map = manifest.load_role_map();
  const sdoh::prompting::PromptTemplate tmpl = manifest.load_prompt_template();

  const auto train =
      sdoh::corpus::load_corpus_dir(manifest.train_dir, sdoh::Split::Train, role_map);
  const sdoh::prompting::FewShotSelection examples =
      sdoh::prompting::select_few_shot(manifest.few_shot, train);

  const auto split = sdoh::split_from(manifest.target_split).value_or(sdoh::Split::Test);
  const auto notes =
      sdoh::corpus::load_corpus_dir(target_dir(manifest), split, role_map);

  // Guideline attachment rides along as a system message on live backends.
  sdoh::gateway::BackendConfig backend_config = manifest.backend;
  if (tmpl.guidelines == sdoh::prompting::GuidelinesMode::Attachment) {
    backend_config.system_message = tmpl.guidelines_text;
  }
  const auto backend = sdoh::gateway::make_backend(backend_config);

  const sdoh::pipeline::CorpusRunResult run =
      serial ? sdoh::pipeline::run_corpus_serial(notes, tmpl, examples.notes, *backend,
                                                 manifest.consistency)
             : sdoh::pipeline::run_corpus(notes, tmpl, examples.notes, *backend,
                                          manifest.consistency);

  const std::string run_id = manifest.hash().substr(0, 12);
  const fs::path run_dir = fresh_run_dir(manifest.output_dir, run_id);
  fs::create_directories(run_dir);

  json note_logs = json::array();
  int completions = 0;
  for (const sdoh::pipeline::NoteResult& result : run.results) {
    const auto it = std::find_if(notes.begin(), notes.end(),
                                 [&](const auto& n) { return n.id == result.note_id; });
    sdoh::corpus::write_ann(run_dir / (result.note_id + ".ann"), result.events,
                            it->text, role_map);
    note_logs.push_back(result.log.to_json());
    completions += result.log.completions;
  }

  json failures = json::array();
  for (const auto& failure : run.failures) {
    failures.push_back({{"note_id", failure.note_id},
                        {"error", failure.message},
                        {"exit_category", failure.exit_category}});
  }
  const json run_log = {{"manifest_hash", manifest.hash()},
                        {"config", manifest.to_json()},
                        {"completions", completions},
                        {"notes", note_logs},
                        {"failures", failures},
                        {"few_shot_zero_event_admitted", examples.zero_event_admitted}};
  sdoh::corpus::write_file(run_dir / "run_log.json", run_log.dump(2) + "\n");

  if (!quiet) {
    std::cout << "wrote " << run.results.size() << " annotation files to "
              << run_dir.string() << " (" << completions << " completions)\n";
    for (const auto& failure : run.failures) {
      std::cout << "failed: " << failure.note_id << ": " << failure.message << "\n";
    }
  }
  ExtractOutcome outcome;
  outcome.run_dir = run_dir;
  for (const auto& failure : run.failures) {
    outcome.exit_code = std::max(outcome.exit_code, failure.exit_category);
  }
  return outcome;
}

struct ScoreOptions {
  std::string pred_dir;
  std::string gold_dir;
  std::string json_path;
  std::string role_map_path;
  std::string missing_policy = "score";
  bool errors = false;
  bool serial = false;
};

struct LoadedScoreInput {
  std::vector<sdoh::scorer::ScoredDoc> docs;
  std::vector<std::string> missing_pred;
  std::vector<std::string> missing_gold;
  std::vector<std::string> parse_failures;
};

LoadedScoreInput load_score_input(const ScoreOptions& opt,
                                  const sdoh::brat::RoleMap& role_map) {
  LoadedScoreInput input;
  const fs::path gold_dir(opt.gold_dir);
  const fs::path pred_dir(opt.pred_dir);
  if (!fs::is_directory(gold_dir)) {
    throw sdoh::DataError("gold directory not found: " + gold_dir.string());
  }
  if (!fs::is_directory(pred_dir)) {
    throw sdoh::DataError("prediction directory not found: " + pred_dir.string());
  }

  std::vector<fs::path> txt_files;
  for (const auto& entry : fs::directory_iterator(gold_dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".txt") {
      txt_files.push_back(entry.path());
    }
  }
  std::sort(txt_files.begin(), txt_files.end());

  std::set<std::string> gold_ids;
  for (const fs::path& txt : txt_files) {
    const std::string id = txt.stem().string();
    gold_ids.insert(id);
    const std::string text = sdoh::corpus::read_file(txt);

    sdoh::scorer::ScoredDoc doc;
    doc.id = id;

    const fs::path gold_ann = gold_dir / (id + ".ann");
    bool gold_ok = true;
    if (fs::exists(gold_ann)) {
      try {
        const auto parsed =
            sdoh::brat::parse_brat(sdoh::corpus::read_file(gold_ann), text, id);
        doc.gold = sdoh::brat::brat_to_events(parsed, text, role_map);
      } catch (const sdoh::DataError& e) {
        input.parse_failures.push_back(gold_ann.string() + ": " + e.what());
        gold_ok = false;
      }
    } else {
      input.missing_gold.push_back(id);
      if (opt.missing_policy == "skip") continue;
    }

    const fs::path pred_ann = pred_dir / (id + ".ann");
    bool pred_ok = true;
    if (fs::exists(pred_ann)) {
      try {
        const auto parsed =
            sdoh::brat::parse_brat(sdoh::corpus::read_file(pred_ann), text, id);
        doc.pred = sdoh::brat::brat_to_events(parsed, text, role_map);
      } catch (const sdoh::DataError& e) {
        input.parse_failures.push_back(pred_ann.string() + ": " + e.what());
        pred_ok = false;
      }
    } else {
      input.missing_pred.push_back(id);
      if (opt.missing_policy == "skip") continue;
    }

    if (gold_ok && pred_ok) input.docs.push_back(std::move(doc));
  }

  for (const auto& entry : fs::directory_iterator(pred_dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".ann" &&
        !gold_ids.count(entry.path().stem().string())) {
      input.parse_failures.push_back(entry.path().string() +
                                     ": no matching note in gold directory");
    }
  }
  return input;
}

int cmd_score(const ScoreOptions& opt) {
  const sdoh::brat::RoleMap role_map = opt.role_map_path.empty()
                                           ? sdoh::brat::RoleMap::defaults()
                                           : sdoh::brat::RoleMap::load(opt.role_map_path);
  const LoadedScoreInput input = load_score_input(opt, role_map);

  const sdoh::scorer::ScoreReport report =
      opt.serial ? sdoh::scorer::score_corpus_serial(input.docs)
                 : sdoh::scorer::score_corpus(input.docs);
  std::cout << report.to_table();

  for (const std::string& id : input.missing_pred) {
    std::cout << "missing prediction for " << id
              << (opt.missing_policy == "skip" ? " (skipped)" : " (scored as misses)")
              << "\n";
  }
  for (const std::string& id : input.missing_gold) {
    std::cout << "missing gold annotation for " << id
              << (opt.missing_policy == "skip" ? " (skipped)"
                                               : " (predictions scored as spurious)")
              << "\n";
  }
  for (const std::string& failure : input.parse_failures) {
    std::cout << "error: " << failure << "\n";
  }

  json out = report.to_json();
  if (opt.errors) {
    const sdoh::scorer::ErrorReport errors = sdoh::scorer::error_report(
        input.docs, sdoh::pipeline::ConsistencyConfig::default_non_specific_stoplist());
    std::cout << errors.to_table();
    out["errors"] = errors.to_json();
  }
  if (!opt.json_path.empty()) {
    sdoh::corpus::write_file(opt.json_path, out.dump(2) + "\n");
  }
  return input.parse_failures.empty() ? kExitOk : kExitData;
}

int cmd_sweep(const ExtractOptions& base_options, const std::vector<int>& n_values,
              const std::string& json_path) {
  sdoh::corpus::RunManifest manifest = sdoh::corpus::load_manifest(base_options.manifest_path);
  apply_overrides(manifest, base_options);

  struct Row {
    int n;
    sdoh::scorer::Prf prf;
    sdoh::scorer::ScoreReport report;
  };
  std::vector<Row> rows;

  for (const int n : n_values) {
    sdoh::corpus::RunManifest step = manifest;
    step.few_shot.n = static_cast<std::size_t>(n);
    // A per-n store subdirectory (store/n0, store/n10, ...) wins when present.
    const fs::path store(manifest.backend.store_path);
    const fs::path per_n = store / ("n" + std::to_string(n));
    if (!manifest.backend.store_path.empty() && fs::is_directory(per_n)) {
      step.backend.store_path = per_n.string();
    }
    step.output_dir = manifest.output_dir / ("sweep-n" + std::to_string(n));

    const ExtractOutcome outcome = run_extract(step, base_options.serial, /*quiet=*/true);
    if (outcome.exit_code != kExitOk) return outcome.exit_code;

    ScoreOptions score;
    score.pred_dir = outcome.run_dir.string();
    score.gold_dir = target_dir(step).string();
    const sdoh::brat::RoleMap role_map = step.load_role_map();
    const LoadedScoreInput input = load_score_input(score, role_map);
    if (!input.parse_failures.empty()) {
      for (const auto& failure : input.parse_failures) {
        std::cerr << "error: " << failure << "\n";
      }
      return kExitData;
    }
    Row row;
    row.n = n;
    row.report = sdoh::scorer::score_corpus(input.docs);
    row.prf = row.report.micro();
    rows.push_back(std::move(row));
  }

  char line[128];
  std::snprintf(line, sizeof(line), "%-8s %10s %10s %10s\n", "n-shot", "Precision",
                "Recall", "Micro-F1");
  std::cout << line;
  json json_rows = json::array();
  for (const Row& row : rows) {
    std::snprintf(line, sizeof(line), "%-8d %10.3f %10.3f %10.3f\n", row.n,
                  row.prf.precision, row.prf.recall, row.prf.f1);
    std::cout << line;
    json entry = row.report.to_json();
    entry["n"] = row.n;
    json_rows.push_back(std::move(entry));
  }
  if (!json_path.empty()) {
    sdoh::corpus::write_file(json_path, json_rows.dump(2) + "\n");
  }
  return kExitOk;
}

int cmd_convert(const std::string& input_path, const std::string& to,
                const std::string& text_path, const std::string& out_path,
                const std::string& role_map_path) {
  const sdoh::brat::RoleMap role_map = role_map_path.empty()
                                           ? sdoh::brat::RoleMap::defaults()
                                           : sdoh::brat::RoleMap::load(role_map_path);
  fs::path text_file(text_path);
  if (text_file.empty()) {
    text_file = fs::path(input_path).replace_extension(".txt");
  }
  const std::string note_text = sdoh::corpus::read_file(text_file);
  const std::string input = sdoh::corpus::read_file(input_path);

  std::string output;
  if (to == "response-json") {
    const auto doc = sdoh::brat::parse_brat(input, note_text, fs::path(input_path).stem().string());
    const auto events = sdoh::brat::brat_to_events(doc, note_text, role_map);
    output = sdoh::codec::render_events(events) + "\n";
  } else if (to == "brat") {
    const bool blank = input.find_first_not_of(" \t\r\n") == std::string::npos;
    std::vector<sdoh::SdohEvent> events;
    if (!blank) {
      const sdoh::codec::ResponseParseReport report = sdoh::codec::parse_response(input);
      if (report.unparseable) {
        throw sdoh::DataError(input_path + ": no annotation list found");
      }
      if (!report.discarded.empty()) {
        std::string message = input_path + ": conversion would lose fragments:";
        for (const auto& discarded : report.discarded) {
          message += "\n  [" + discarded.reason + "] " + discarded.fragment;
        }
        throw sdoh::DataError(message);
      }
      events = report.events;
    }
    output = sdoh::brat::serialize_brat(
        sdoh::brat::events_to_brat(events, note_text, role_map));
  } else {
    throw sdoh::ConfigError("unknown conversion target " + to);
  }

  if (out_path.empty()) {
    std::cout << output;
  } else {
    sdoh::corpus::write_file(out_path, output);
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SDOH event extraction and evaluation toolkit"};
  app.require_subcommand(1);

  ExtractOptions extract_options;
  ScoreOptions score_options;
  std::vector<int> sweep_n;
  std::string sweep_json;
  std::string convert_input;
  std::string convert_to;
  std::string convert_text;
  std::string convert_out;
  std::string convert_role_map;

  auto add_extract_flags = [&](CLI::App* cmd) {
    cmd->add_option("--manifest", extract_options.manifest_path, "run manifest (JSON)")
        ->required();
    cmd->add_option("--mode", extract_options.mode, "all | per-sdoh");
    cmd->add_option("--n-shot", extract_options.n_shot, "few-shot example count");
    cmd->add_option("--seed", extract_options.seed, "few-shot sampling seed");
    cmd->add_option("--k", extract_options.k, "samples per prompt");
    cmd->add_option("--threshold", extract_options.threshold, "vote inclusion threshold");
    cmd->add_option("--backend", extract_options.backend, "http | replay");
    cmd->add_option("--store", extract_options.store, "replay/recording store path");
    cmd->add_option("--out", extract_options.out, "output directory");
    cmd->add_option("--split", extract_options.split, "target split (train|dev|test)");
    cmd->add_flag("--allow-external-transmission", extract_options.allow_external,
                  "permit live requests that send note text to the endpoint");
    cmd->add_flag("--serial", extract_options.serial,
                  "single-threaded reference pipeline");
  };

  CLI::App* extract = app.add_subcommand("extract", "run the extraction pipeline");
  add_extract_flags(extract);

  CLI::App* score = app.add_subcommand("score", "score predictions against gold");
  score->add_option("--pred", score_options.pred_dir, "directory of predicted .ann")
      ->required();
  score->add_option("--gold", score_options.gold_dir, "directory of gold .txt/.ann")
      ->required();
  score->add_option("--json", score_options.json_path, "write the report as JSON");
  score->add_option("--role-map", score_options.role_map_path, "role map JSON");
  score->add_option("--missing-policy", score_options.missing_policy,
                    "score | skip notes with a missing counterpart file")
      ->check(CLI::IsMember({"score", "skip"}));
  score->add_flag("--errors", score_options.errors, "emit the error-category report");
  score->add_flag("--serial", score_options.serial, "single-threaded scorer");

  CLI::App* sweep = app.add_subcommand("sweep", "run a few-shot ablation");
  add_extract_flags(sweep);
  sweep->add_option("--n-values", sweep_n, "n-shot values, e.g. --n-values 0 10")
      ->required();
  sweep->add_option("--json", sweep_json, "write rows as JSON");

  CLI::App* convert = app.add_subcommand("convert", "convert between formats");
  convert->add_option("--input", convert_input, "input file (.ann or response text)")
      ->required();
  convert->add_option("--to", convert_to, "brat | response-json")->required();
  convert->add_option("--text", convert_text, "companion note text file");
  convert->add_option("--out", convert_out, "output file (stdout when omitted)");
  convert->add_option("--role-map", convert_role_map, "role map JSON");

  CLI11_PARSE(app, argc, argv);

  try {
    if (extract->parsed()) {
      sdoh::corpus::RunManifest manifest =
          sdoh::corpus::load_manifest(extract_options.manifest_path);
      apply_overrides(manifest, extract_options);
      return run_extract(manifest, extract_options.serial).exit_code;
    }
    if (score->parsed()) return cmd_score(score_options);
    if (sweep->parsed()) return cmd_sweep(extract_options, sweep_n, sweep_json);
    if (convert->parsed()) {
      return cmd_convert(convert_input, convert_to, convert_text, convert_out,
                         convert_role_map);
    }
  } catch (const sdoh::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const sdoh::BackendError& e) {
    std::cerr << "backend error: " << e.what() << "\n";
    return kExitBackend;
  } catch (const sdoh::Error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitOk;
}
