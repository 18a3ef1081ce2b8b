#pragma once

#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "sdoh/event_model.hpp"
#include "sdoh/gateway.hpp"
#include "sdoh/prompting.hpp"

// Orchestration of the k-sample self-consistency loop: prompt k times, parse
// and realign each sample, vote per event and per argument, then filter out
// events that fail the validity rules.
namespace sdoh::pipeline {

enum class VoteMode { PerEvent, WholeResponse };

struct ConsistencyConfig {
  int k = 3;
  int threshold = 2;  // minimum votes for inclusion; default ceil(k/2)
  VoteMode vote_mode = VoteMode::PerEvent;
  // Optional stop-list filter for vague span values; off by default because
  // gold data itself contains such values.
  bool non_specific_filter = false;
  std::vector<std::string> non_specific_stoplist = default_non_specific_stoplist();

  static std::vector<std::string> default_non_specific_stoplist();
  void validate() const;  // 1 <= threshold <= k
};

// Per-key vote bookkeeping across the k samples of one prompt family.
class VoteLedger {
 public:
  struct VariantTally {
    int count = 0;
    int first_sample = 0;
  };
  struct KeyTally {
    std::vector<int> containing_samples;
    Span trigger;  // from the lowest containing sample
    std::map<ArgKind, std::map<ArgVariant, VariantTally>> args;
  };

  // Events with a duplicate key within one sample are counted once (first
  // occurrence wins).
  void add_sample(std::span<const SdohEvent> events);

  int sample_count() const { return sample_count_; }
  const std::map<EventKey, KeyTally>& tallies() const { return tallies_; }
  const std::vector<std::vector<SdohEvent>>& samples() const { return samples_; }

 private:
  int sample_count_ = 0;
  std::map<EventKey, KeyTally> tallies_;
  std::vector<std::vector<SdohEvent>> samples_;
};

struct CompileResult {
  std::vector<SdohEvent> events;
  // Run-log notes, e.g. a required argument kept below the variant threshold.
  std::vector<std::string> flags;
};

// Emits events whose vote count reaches the threshold. Each argument kind is
// kept when its most frequent (span, value) variant reaches the threshold
// over the samples containing the event; ties break to the lowest sample
// index. Required arguments (status; type on LivingStatus) whose presence is
// majority-backed keep the plurality variant even when no variant reaches
// the threshold, so value disagreement does not doom an event.
CompileResult compile_majority(const VoteLedger& ledger, const ConsistencyConfig& config);

struct RealignOutcome {
  SdohEvent event;
  bool trigger_irreparable = false;
  std::vector<ArgKind> irreparable_args;
  int corrections = 0;
};

// Fixes span offsets whose text does not line up with the note: the nearest
// occurrence of the span text wins. Spans whose text does not occur at all
// are marked irreparable and left untouched.
RealignOutcome realign_spans(const SdohEvent& event, std::string_view note_text);

struct DropReport {
  struct Dropped {
    SdohEvent event;
    std::vector<std::string> reasons;
  };
  struct StrippedArg {
    EventKey key;
    ArgKind kind;
    std::string reason;
  };
  std::vector<SdohEvent> kept;
  std::vector<Dropped> dropped;
  std::vector<StrippedArg> stripped;
};

// Validity filter: irreparable optional arguments are stripped; events with
// an irreparable trigger or failing validation after stripping are dropped.
// Every kept event passes validate_event.
DropReport drop_invalid(std::span<const SdohEvent> events, std::string_view note_text);

struct NoteRunLog {
  std::string note_id;
  int completions = 0;
  int unparseable_samples = 0;
  int repairs = 0;
  int discarded_fragments = 0;
  int off_type_events = 0;
  nlohmann::json votes = nlohmann::json::array();
  nlohmann::json dropped = nlohmann::json::array();
  nlohmann::json stripped = nlohmann::json::array();
  std::vector<std::string> flags;

  nlohmann::json to_json() const;
};

struct NoteResult {
  std::string note_id;
  std::vector<SdohEvent> events;  // sorted by trigger position
  NoteRunLog log;
};

// Runs the full loop for one note. PerSdohType templates issue k completions
// per SDOH category and vote within each category; AllAtOnce issues k
// completions total.
NoteResult run_note(const NoteDocument& note, const prompting::PromptTemplate& tmpl,
                    std::span<const NoteDocument> examples,
                    gateway::CompletionBackend& backend, const ConsistencyConfig& config);

struct NoteFailure {
  std::string note_id;
  std::string message;
  int exit_category = 2;  // 1 config, 2 data, 3 backend

  auto operator<=>(const NoteFailure&) const = default;
};

struct CorpusRunResult {
  std::vector<NoteResult> results;  // in corpus order; failed notes omitted
  std::vector<NoteFailure> failures;
};

// Parallel over notes (OpenMP); one failed note does not abort the corpus.
CorpusRunResult run_corpus(std::span<const NoteDocument> notes,
                           const prompting::PromptTemplate& tmpl,
                           std::span<const NoteDocument> examples,
                           gateway::CompletionBackend& backend,
                           const ConsistencyConfig& config);

// Single-threaded reference with identical output, kept for testing and for
// the benchmark comparison.
CorpusRunResult run_corpus_serial(std::span<const NoteDocument> notes,
                                  const prompting::PromptTemplate& tmpl,
                                  std::span<const NoteDocument> examples,
                                  gateway::CompletionBackend& backend,
                                  const ConsistencyConfig& config);

}  // namespace sdoh::pipeline
