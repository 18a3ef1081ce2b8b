#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "sdoh/brat.hpp"
#include "sdoh/corpus.hpp"

using namespace sdoh;
namespace fs = std::filesystem;

#ifndef SDOH_CLI_BIN
#define SDOH_CLI_BIN "sdoh"
#endif
#ifndef SDOH_SOURCE_ROOT
#define SDOH_SOURCE_ROOT "."
#endif

namespace {

const fs::path kRoot(SDOH_SOURCE_ROOT);
const fs::path kFixtures = kRoot / "tests" / "fixtures";

struct RunResult {
  int exit_code;
  std::string output;
};

RunResult run_cli(const std::string& args) {
  const fs::path out_file =
      fs::temp_directory_path() / ("sdoh_cli_out_" + std::to_string(::getpid()) + ".txt");
  const std::string command =
      std::string(SDOH_CLI_BIN) + " " + args + " > " + out_file.string() + " 2>&1";
  const int status = std::system(command.c_str());
  RunResult result;
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  result.output = corpus::read_file(out_file);
  fs::remove(out_file);
  return result;
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// The worked example from the response-format documentation: a social
// history note and its three annotations.
const char* kExampleNote =
    "SOCIAL HISTORY:  Patient lives alone in [**Hospital1 **].  She has a daughter "
    "who lives five minutes away.  The patient does all of her own cooking and "
    "cleaning.  She has no history of alcohol abuse.  She quit smoking 30 years "
    "ago. She is a widow.";

const char* kExampleAnnotations =
    "[\n"
    "  {\n"
    "    \"sdoh\": \"LivingStatus\",\n"
    "    \"trigger\": (25, 30, \"lives\"),\n"
    "    \"status\": (25, 30, \"lives\", \"current\"),\n"
    "    \"type\": (31, 56, \"alone in [**Hospital1 **]\", \"with_others\")},\n"
    "  {\n"
    "    \"sdoh\": \"Tobacco\",\n"
    "    \"trigger\": (210, 217, \"smoking\"),\n"
    "    \"status\": (205, 209, \"quit\", \"past\"),\n"
    "    \"history\": (218, 230, \"30 years ago\")},\n"
    "  {\n"
    "    \"sdoh\": \"Alcohol\",\n"
    "    \"trigger\": (185, 198, \"alcohol abuse\"),\n"
    "    \"status\": (171, 181, \"no history\", \"none\")}\n"
    "]";

}  // namespace

TEST_CASE("convert: annotations block becomes a three-event standoff file") {
  const fs::path dir = fresh_dir("sdoh_cli_convert");
  corpus::write_file(dir / "note.txt", kExampleNote);
  corpus::write_file(dir / "note.json", kExampleAnnotations);

  const RunResult result =
      run_cli("convert --input " + (dir / "note.json").string() + " --to brat --text " +
              (dir / "note.txt").string() + " --out " + (dir / "note.ann").string());
  CHECK(result.exit_code == 0);

  const brat::Document doc = brat::parse_brat(corpus::read_file(dir / "note.ann"),
                                              kExampleNote, "note");
  CHECK(doc.events.size() == 3);
  CHECK(doc.entities.size() == 8);
  REQUIRE(doc.attributes.size() == 4);  // two status values + living type + status
  bool has_living_type = false;
  for (const auto& attr : doc.attributes) {
    has_living_type |= attr.name == "TypeLivingVal" && attr.value == "with_others";
  }
  CHECK(has_living_type);
}

TEST_CASE("convert: round trip through both formats is lossless") {
  const fs::path dir = fresh_dir("sdoh_cli_roundtrip");
  const fs::path src_txt = kFixtures / "corpus" / "test" / "e01.txt";
  const fs::path src_ann = kFixtures / "corpus" / "test" / "e01.ann";

  const RunResult to_json = run_cli("convert --input " + src_ann.string() +
                                    " --to response-json --text " + src_txt.string() +
                                    " --out " + (dir / "e01.json").string());
  REQUIRE(to_json.exit_code == 0);

  const RunResult back = run_cli("convert --input " + (dir / "e01.json").string() +
                                 " --to brat --text " + src_txt.string() + " --out " +
                                 (dir / "e01.ann").string());
  REQUIRE(back.exit_code == 0);

  const std::string note = corpus::read_file(src_txt);
  const brat::Document original =
      brat::parse_brat(corpus::read_file(src_ann), note, "e01");
  const brat::Document round =
      brat::parse_brat(corpus::read_file(dir / "e01.ann"), note, "e01");
  CHECK(brat::record_set_equal(original, round));
}

TEST_CASE("convert: empty inputs give empty outputs") {
  const fs::path dir = fresh_dir("sdoh_cli_empty");
  corpus::write_file(dir / "note.txt", "some text");
  corpus::write_file(dir / "empty.json", "");
  const RunResult to_ann = run_cli("convert --input " + (dir / "empty.json").string() +
                                   " --to brat --text " + (dir / "note.txt").string() +
                                   " --out " + (dir / "empty.ann").string());
  CHECK(to_ann.exit_code == 0);
  CHECK(corpus::read_file(dir / "empty.ann") == "");

  const RunResult to_json = run_cli("convert --input " + (dir / "empty.ann").string() +
                                    " --to response-json --text " +
                                    (dir / "note.txt").string());
  CHECK(to_json.exit_code == 0);
  CHECK(to_json.output == "[]\n");
}

TEST_CASE("convert: parse errors exit with the data code") {
  const fs::path dir = fresh_dir("sdoh_cli_badconv");
  corpus::write_file(dir / "note.txt", "some text");
  corpus::write_file(dir / "bad.json", "no annotations here, sorry");
  const RunResult result = run_cli("convert --input " + (dir / "bad.json").string() +
                                   " --to brat --text " + (dir / "note.txt").string());
  CHECK(result.exit_code == 2);
}

TEST_CASE("score: directory against itself is perfect") {
  const fs::path gold = kFixtures / "handcount" / "gold";
  const RunResult result =
      run_cli("score --pred " + gold.string() + " --gold " + gold.string());
  CHECK(result.exit_code == 0);
  CHECK(result.output.find("Overall") != std::string::npos);
  CHECK(result.output.find("0.") == std::string::npos);  // no imperfect figures
  CHECK(result.output.find("1.000") != std::string::npos);
}

TEST_CASE("score: hand-counted fixture reproduces the frozen figures") {
  const fs::path dir = fresh_dir("sdoh_cli_score");
  const RunResult result = run_cli(
      "score --pred " + (kFixtures / "handcount" / "pred").string() + " --gold " +
      (kFixtures / "handcount" / "gold").string() + " --json " +
      (dir / "score.json").string() + " --errors");
  REQUIRE(result.exit_code == 0);

  const auto json = nlohmann::json::parse(corpus::read_file(dir / "score.json"));
  CHECK(json.at("overall").at("tp") == 8);
  CHECK(json.at("overall").at("fp") == 2);
  CHECK(json.at("overall").at("fn") == 3);
  CHECK(std::abs(json.at("overall").at("precision").get<double>() - 0.800) < 1e-3);
  CHECK(std::abs(json.at("overall").at("recall").get<double>() - 0.727) < 1e-3);
  CHECK(std::abs(json.at("overall").at("f1").get<double>() - 0.762) < 1e-3);

  // --errors appends the category report: h1 is missing gold's frequency
  CHECK(result.output.find("missing values in an extracted event") != std::string::npos);
  CHECK(json.at("errors").is_array());
}

TEST_CASE("score: empty prediction directory recalls nothing") {
  const fs::path dir = fresh_dir("sdoh_cli_empty_pred");
  const RunResult result = run_cli("score --pred " + dir.string() + " --gold " +
                                   (kFixtures / "handcount" / "gold").string());
  CHECK(result.exit_code == 0);
  CHECK(result.output.find("missing prediction for h1") != std::string::npos);
  // recall of the overall row is zero
  const auto pos = result.output.find("Overall");
  REQUIRE(pos != std::string::npos);
  std::istringstream row(result.output.substr(pos));
  std::string label;
  double precision = -1;
  double recall = -1;
  double f1 = -1;
  row >> label >> precision >> recall >> f1;
  CHECK(recall == 0.0);
  CHECK(f1 == 0.0);
}

TEST_CASE("extract: replay fixture is deterministic and complete") {
  const fs::path out = fresh_dir("sdoh_cli_extract");
  const std::string manifest = (kFixtures / "manifest_e2e.json").string();
  const RunResult result =
      run_cli("extract --manifest " + manifest + " --out " + out.string());
  REQUIRE(result.exit_code == 0);

  // one run directory with five annotation files and the run log
  std::vector<fs::path> run_dirs;
  for (const auto& entry : fs::directory_iterator(out)) run_dirs.push_back(entry);
  REQUIRE(run_dirs.size() == 1);
  int ann_files = 0;
  for (const auto& entry : fs::directory_iterator(run_dirs[0])) {
    ann_files += entry.path().extension() == ".ann";
  }
  CHECK(ann_files == 5);

  const auto log =
      nlohmann::json::parse(corpus::read_file(run_dirs[0] / "run_log.json"));
  CHECK(log.at("completions") == 75);  // 5 notes x 5 categories x 3 samples
  CHECK(log.at("failures").empty());
  CHECK(log.at("manifest_hash").get<std::string>().size() == 64);
}

TEST_CASE("extract: single-note corpus logs 15 completions") {
  const fs::path dir = fresh_dir("sdoh_cli_one_note");
  const fs::path corpus_dir = dir / "one";
  fs::create_directories(corpus_dir);
  fs::copy_file(kFixtures / "corpus" / "test" / "e01.txt", corpus_dir / "e01.txt");
  fs::copy_file(kFixtures / "corpus" / "test" / "e01.ann", corpus_dir / "e01.ann");

  // same configuration, test split pointed at the one-note directory
  auto manifest = nlohmann::json::parse(
      corpus::read_file(kFixtures / "manifest_e2e.json"));
  manifest["corpus"]["train"] = (kFixtures / "corpus" / "train").string();
  manifest["corpus"]["test"] = corpus_dir.string();
  manifest["backend"]["store"] = (kFixtures / "stores" / "e2e").string();
  manifest["template"]["all_at_once"] =
      (kRoot / "configs" / "templates" / "all_at_once.txt").string();
  manifest["template"]["per_sdoh"] =
      (kRoot / "configs" / "templates" / "per_sdoh.txt").string();
  manifest["template"]["rules"] = (kRoot / "configs" / "rules.txt").string();
  corpus::write_file(dir / "manifest.json", manifest.dump(2));

  const RunResult result = run_cli("extract --manifest " + (dir / "manifest.json").string() +
                                   " --out " + (dir / "out").string());
  REQUIRE(result.exit_code == 0);
  fs::path run_dir;
  for (const auto& entry : fs::directory_iterator(dir / "out")) run_dir = entry;
  const auto log = nlohmann::json::parse(corpus::read_file(run_dir / "run_log.json"));
  CHECK(log.at("completions") == 15);
  CHECK(log.at("notes").size() == 1);
}

TEST_CASE("extract: few-shot from the test split is refused as leakage") {
  const fs::path dir = fresh_dir("sdoh_cli_leakage");
  auto manifest =
      nlohmann::json::parse(corpus::read_file(kFixtures / "manifest_e2e.json"));
  manifest["few_shot"]["source"] = "test";
  corpus::write_file(dir / "manifest.json", manifest.dump(2));
  const RunResult result =
      run_cli("extract --manifest " + (dir / "manifest.json").string());
  CHECK(result.exit_code == 1);
  CHECK(result.output.find("leakage") != std::string::npos);
}

TEST_CASE("exit codes distinguish config, data and backend problems") {
  CHECK(run_cli("extract --manifest /nonexistent/manifest.json").exit_code == 2);

  const fs::path dir = fresh_dir("sdoh_cli_codes");
  auto manifest =
      nlohmann::json::parse(corpus::read_file(kFixtures / "manifest_e2e.json"));
  manifest["corpus"]["train"] = (kFixtures / "corpus" / "train").string();
  manifest["corpus"]["test"] = (kFixtures / "corpus" / "test").string();
  manifest["template"]["all_at_once"] =
      (kRoot / "configs" / "templates" / "all_at_once.txt").string();
  manifest["template"]["per_sdoh"] =
      (kRoot / "configs" / "templates" / "per_sdoh.txt").string();
  manifest["template"]["rules"] = (kRoot / "configs" / "rules.txt").string();

  auto bad_backend = manifest;
  bad_backend["backend"]["store"] = "/nonexistent/store";
  corpus::write_file(dir / "bad_backend.json", bad_backend.dump(2));
  CHECK(run_cli("extract --manifest " + (dir / "bad_backend.json").string() +
                " --out " + (dir / "out1").string())
            .exit_code == 3);

  auto bad_corpus = manifest;
  bad_corpus["backend"]["store"] = (kFixtures / "stores" / "e2e").string();
  bad_corpus["corpus"]["test"] = "/nonexistent/corpus";
  corpus::write_file(dir / "bad_corpus.json", bad_corpus.dump(2));
  CHECK(run_cli("extract --manifest " + (dir / "bad_corpus.json").string() + " --out " +
                (dir / "out2").string())
            .exit_code == 2);

  auto bad_mode = manifest;
  corpus::write_file(dir / "bad_mode.json", bad_mode.dump(2));
  CHECK(run_cli("extract --manifest " + (dir / "bad_mode.json").string() +
                " --mode sideways")
            .exit_code == 1);
}

TEST_CASE("live extraction without the opt-in flag is refused") {
  const fs::path dir = fresh_dir("sdoh_cli_phi");
  auto manifest =
      nlohmann::json::parse(corpus::read_file(kFixtures / "manifest_e2e.json"));
  manifest["corpus"]["train"] = (kFixtures / "corpus" / "train").string();
  manifest["corpus"]["test"] = (kFixtures / "corpus" / "test").string();
  manifest["template"]["all_at_once"] =
      (kRoot / "configs" / "templates" / "all_at_once.txt").string();
  manifest["template"]["per_sdoh"] =
      (kRoot / "configs" / "templates" / "per_sdoh.txt").string();
  manifest["template"]["rules"] = (kRoot / "configs" / "rules.txt").string();
  manifest["backend"]["kind"] = "http";
  manifest["backend"]["endpoint"] = "http://127.0.0.1:1/v1/chat/completions";
  manifest["backend"]["model"] = "m";
  corpus::write_file(dir / "manifest.json", manifest.dump(2));
  const RunResult result = run_cli("extract --manifest " +
                                   (dir / "manifest.json").string() + " --out " +
                                   (dir / "out").string());
  CHECK(result.exit_code == 1);
  CHECK(result.output.find("allow-external-transmission") != std::string::npos);
}

TEST_CASE("sweep: a single n value emits a single row") {
  const fs::path dir = fresh_dir("sdoh_cli_sweep_single");
  const RunResult result = run_cli(
      "sweep --manifest " + (kFixtures / "manifest_sweep.json").string() +
      " --n-values 0 --json " + (dir / "rows.json").string() + " --out " +
      (dir / "out").string());
  REQUIRE(result.exit_code == 0);
  const auto rows = nlohmann::json::parse(corpus::read_file(dir / "rows.json"));
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].at("n") == 0);
  CHECK(result.output.find("n-shot") != std::string::npos);
}
