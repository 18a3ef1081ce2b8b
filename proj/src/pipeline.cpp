#include "sdoh/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <tuple>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "sdoh/codec.hpp"
#include "sdoh/utf8.hpp"

namespace sdoh::pipeline {

std::vector<std::string> ConsistencyConfig::default_non_specific_stoplist() {
  return {"often", "rarely", "occasionally", "in the past", "a lot", "long time ago"};
}

void ConsistencyConfig::validate() const {
  if (k < 1) throw ConfigError("k must be at least 1");
  if (threshold < 1 || threshold > k) {
    throw ConfigError("threshold must be in [1, k]; got " + std::to_string(threshold) +
                      " with k=" + std::to_string(k));
  }
}

void VoteLedger::add_sample(std::span<const SdohEvent> events) {
  const int sample_index = sample_count_++;
  samples_.emplace_back(events.begin(), events.end());

  std::set<EventKey> seen;
  for (const SdohEvent& event : events) {
    const EventKey key = equivalence_key(event);
    if (!seen.insert(key).second) continue;
    KeyTally& tally = tallies_[key];
    if (tally.containing_samples.empty()) tally.trigger = event.trigger;
    tally.containing_samples.push_back(sample_index);
    for (ArgKind kind : kAllArgKinds) {
      if (kind == ArgKind::Trigger) continue;
      if (const auto variant = arg_variant(event, kind)) {
        VariantTally& vt = tally.args[kind][*variant];
        if (vt.count == 0) vt.first_sample = sample_index;
        ++vt.count;
      }
    }
  }
}

namespace {

std::string key_label(const EventKey& key) {
  return std::string(to_string(key.sdoh)) + "@" + std::to_string(key.start) + "-" +
         std::to_string(key.end);
}

CompileResult compile_whole_response(const VoteLedger& ledger) {
  // Plurality over normalized whole responses; ties go to the lowest sample.
  auto normalized = [](std::vector<SdohEvent> events) {
    std::sort(events.begin(), events.end(), [](const SdohEvent& a, const SdohEvent& b) {
      return equivalence_key(a) < equivalence_key(b);
    });
    return events;
  };
  std::map<std::string, std::pair<int, int>> counts;  // rendering -> (count, first)
  std::map<std::string, std::vector<SdohEvent>> payload;
  for (std::size_t i = 0; i < ledger.samples().size(); ++i) {
    std::vector<SdohEvent> events = normalized(ledger.samples()[i]);
    const std::string fingerprint = codec::render_events(events);
    auto [it, inserted] = counts.try_emplace(fingerprint, 0, static_cast<int>(i));
    ++it->second.first;
    if (inserted) payload[fingerprint] = std::move(events);
  }
  const std::string* best = nullptr;
  std::pair<int, int> best_rank{0, 0};
  for (const auto& [fingerprint, rank] : counts) {
    if (!best || rank.first > best_rank.first ||
        (rank.first == best_rank.first && rank.second < best_rank.second)) {
      best = &fingerprint;
      best_rank = rank;
    }
  }
  CompileResult result;
  if (best) result.events = payload[*best];
  return result;
}

}  // namespace

CompileResult compile_majority(const VoteLedger& ledger, const ConsistencyConfig& config) {
  config.validate();
  if (config.vote_mode == VoteMode::WholeResponse) {
    return compile_whole_response(ledger);
  }

  CompileResult result;
  for (const auto& [key, tally] : ledger.tallies()) {
    const int votes = static_cast<int>(tally.containing_samples.size());
    if (votes < config.threshold) continue;

    SdohEvent event;
    event.sdoh = key.sdoh;
    event.trigger = tally.trigger;

    for (const auto& [kind, variants] : tally.args) {
      int present_in = 0;
      for (const auto& [variant, vt] : variants) present_in += vt.count;
      // Attribute presence itself is majority-voted.
      if (present_in < config.threshold) continue;

      const std::pair<const ArgVariant, VoteLedger::VariantTally>* best = nullptr;
      for (const auto& entry : variants) {
        if (!best || entry.second.count > best->second.count ||
            (entry.second.count == best->second.count &&
             entry.second.first_sample < best->second.first_sample)) {
          best = &entry;
        }
      }
      if (best->second.count >= config.threshold) {
        set_arg(event, kind, best->first);
      } else if (argument_required(key.sdoh, kind)) {
        // Values disagree across samples; keep the plurality value rather
        // than dooming a majority-backed event.
        set_arg(event, kind, best->first);
        result.flags.push_back(key_label(key) + ": kept " +
                               std::string(to_string(kind)) +
                               " by plurality below threshold");
      }
    }
    result.events.push_back(std::move(event));
  }
  return result;
}

namespace {

// All code-point offsets at which needle occurs in haystack. Byte-level
// search is safe: a valid UTF-8 needle can only match at sequence starts.
std::vector<std::size_t> occurrences_cp(std::string_view haystack,
                                         std::string_view needle) {
  std::vector<std::size_t> out;
  if (needle.empty()) return out;
  std::size_t byte = haystack.find(needle);
  while (byte != std::string_view::npos) {
    out.push_back(utf8::cp_index(haystack, byte));
    byte = haystack.find(needle, byte + 1);
  }
  return out;
}

// Realigns one span in place; returns false when the text cannot be found.
bool realign_one(Span& span, std::string_view note_text, std::size_t note_len,
                 int& corrections) {
  if (!span.text.empty() && span.start < span.end && span.end <= note_len &&
      utf8::slice(note_text, span.start, span.end) == span.text) {
    return true;  // already aligned
  }
  if (span.text.empty()) return false;
  const std::vector<std::size_t> starts = occurrences_cp(note_text, span.text);
  if (starts.empty()) return false;
  const auto distance = [&](std::size_t s) {
    return s > span.start ? s - span.start : span.start - s;
  };
  std::size_t best = starts.front();
  for (const std::size_t s : starts) {
    if (distance(s) < distance(best)) best = s;  // ties keep the earlier one
  }
  span.start = best;
  span.end = best + utf8::length(span.text);
  ++corrections;
  return true;
}

}  // namespace

RealignOutcome realign_spans(const SdohEvent& event, std::string_view note_text) {
  RealignOutcome outcome;
  outcome.event = event;
  const std::size_t note_len = utf8::length(note_text);

  if (!realign_one(outcome.event.trigger, note_text, note_len, outcome.corrections)) {
    outcome.trigger_irreparable = true;
  }
  for (ArgKind kind : kAllArgKinds) {
    if (kind == ArgKind::Trigger) continue;
    const Span* span = arg_span(outcome.event, kind);
    if (!span) continue;
    auto variant = arg_variant(outcome.event, kind);
    Span fixed = *span;
    if (realign_one(fixed, note_text, note_len, outcome.corrections)) {
      variant->span = fixed;
      set_arg(outcome.event, kind, *variant);
    } else {
      outcome.irreparable_args.push_back(kind);
    }
  }
  return outcome;
}

DropReport drop_invalid(std::span<const SdohEvent> events, std::string_view note_text) {
  DropReport report;
  for (const SdohEvent& original : events) {
    RealignOutcome aligned = realign_spans(original, note_text);
    if (aligned.trigger_irreparable) {
      report.dropped.push_back({original, {"IrreparableTrigger"}});
      continue;
    }
    SdohEvent event = std::move(aligned.event);
    const EventKey key = equivalence_key(event);
    for (ArgKind kind : aligned.irreparable_args) {
      clear_arg(event, kind);
      report.stripped.push_back({key, kind, "IrreparableSpan"});
    }

    const ValidationResult violations = validate_event(event, note_text);
    if (violations.empty()) {
      report.kept.push_back(std::move(event));
      continue;
    }
    // Forbidden or stray-valued optional arguments are stripped rather than
    // dooming the event; required-argument and value violations drop it.
    SdohEvent stripped = event;
    bool fatal = false;
    std::vector<std::string> reasons;
    for (const Violation& v : violations) {
      reasons.push_back(std::string(to_string(v.kind)) + ":" +
                        std::string(to_string(v.arg)));
      switch (v.kind) {
        case ViolationKind::ForbiddenArgument:
          clear_arg(stripped, v.arg);
          report.stripped.push_back({key, v.arg, std::string(to_string(v.kind))});
          break;
        case ViolationKind::InvalidTypeValue:
          if (stripped.sdoh != SdohType::LivingStatus) {
            // A stray value on a span-only type argument: drop the value.
            if (stripped.type) stripped.type->value.reset();
            report.stripped.push_back({key, v.arg, std::string(to_string(v.kind))});
          } else {
            fatal = true;
          }
          break;
        case ViolationKind::SpanOutOfBounds:
        case ViolationKind::SpanTextMismatch:
          // Realignment could not have left a repairable span here.
          if (v.arg == ArgKind::Trigger) {
            fatal = true;
          } else {
            clear_arg(stripped, v.arg);
            report.stripped.push_back({key, v.arg, std::string(to_string(v.kind))});
          }
          break;
        default:
          fatal = true;
      }
    }
    if (!fatal) {
      const ValidationResult rest = validate_event(stripped, note_text);
      if (rest.empty()) {
        report.kept.push_back(std::move(stripped));
        continue;
      }
      for (const Violation& v : rest) {
        reasons.push_back(std::string(to_string(v.kind)) + ":" +
                          std::string(to_string(v.arg)));
      }
    }
    std::sort(reasons.begin(), reasons.end());
    reasons.erase(std::unique(reasons.begin(), reasons.end()), reasons.end());
    report.dropped.push_back({original, std::move(reasons)});
  }
  return report;
}

nlohmann::json NoteRunLog::to_json() const {
  return {{"note_id", note_id},
          {"completions", completions},
          {"unparseable_samples", unparseable_samples},
          {"repairs", repairs},
          {"discarded_fragments", discarded_fragments},
          {"off_type_events", off_type_events},
          {"votes", votes},
          {"dropped", dropped},
          {"stripped", stripped},
          {"flags", flags}};
}

namespace {

nlohmann::json key_json(const EventKey& key) {
  return {{"sdoh", std::string(to_string(key.sdoh))},
          {"start", key.start},
          {"end", key.end}};
}

struct FamilyOutcome {
  std::vector<SdohEvent> events;
  std::vector<std::string> flags;
};

// One prompt family: k completions, parse, realign, vote, compile.
FamilyOutcome run_family(const NoteDocument& note, const prompting::PromptTemplate& tmpl,
                         std::span<const NoteDocument> examples,
                         gateway::CompletionBackend& backend,
                         const ConsistencyConfig& config,
                         std::optional<SdohType> sdoh, NoteRunLog& log) {
  const prompting::PromptRequest request =
      prompting::build_prompt(tmpl, examples, note, sdoh);

  VoteLedger ledger;
  for (int i = 0; i < config.k; ++i) {
    const std::string raw = backend.complete(request, i);
    ++log.completions;
    codec::ResponseParseReport parsed = codec::parse_response(raw);
    log.repairs += parsed.repairs;
    log.discarded_fragments += static_cast<int>(parsed.discarded.size());
    if (parsed.unparseable) {
      ++log.unparseable_samples;  // counts as a vote of absence
      ledger.add_sample({});
      continue;
    }
    std::vector<SdohEvent> events;
    events.reserve(parsed.events.size());
    for (SdohEvent& event : parsed.events) {
      if (sdoh && event.sdoh != *sdoh) {
        ++log.off_type_events;  // the prompt forbade other categories
        continue;
      }
      // Position noise would split votes for the same event, so realign
      // before voting.
      events.push_back(realign_spans(event, note.text).event);
    }
    ledger.add_sample(events);
  }

  CompileResult compiled = compile_majority(ledger, config);
  for (const auto& [key, tally] : ledger.tallies()) {
    nlohmann::json entry = key_json(key);
    entry["votes"] = tally.containing_samples.size();
    entry["emitted"] =
        static_cast<int>(tally.containing_samples.size()) >= config.threshold &&
        config.vote_mode == VoteMode::PerEvent;
    log.votes.push_back(std::move(entry));
  }
  return {std::move(compiled.events), std::move(compiled.flags)};
}

}  // namespace

NoteResult run_note(const NoteDocument& note, const prompting::PromptTemplate& tmpl,
                    std::span<const NoteDocument> examples,
                    gateway::CompletionBackend& backend, const ConsistencyConfig& config) {
  config.validate();
  NoteResult result;
  result.note_id = note.id;
  result.log.note_id = note.id;

  std::vector<SdohEvent> voted;
  if (tmpl.mode == prompting::PromptMode::PerSdohType) {
    for (SdohType sdoh : kAllSdohTypes) {
      FamilyOutcome outcome =
          run_family(note, tmpl, examples, backend, config, sdoh, result.log);
      voted.insert(voted.end(), outcome.events.begin(), outcome.events.end());
      result.log.flags.insert(result.log.flags.end(), outcome.flags.begin(),
                              outcome.flags.end());
    }
  } else {
    FamilyOutcome outcome =
        run_family(note, tmpl, examples, backend, config, std::nullopt, result.log);
    voted = std::move(outcome.events);
    result.log.flags = std::move(outcome.flags);
  }

  if (config.non_specific_filter) {
    for (SdohEvent& event : voted) {
      for (ArgKind kind :
           {ArgKind::Duration, ArgKind::History, ArgKind::Frequency, ArgKind::Amount}) {
        const Span* span = arg_span(event, kind);
        if (!span) continue;
        const std::string lowered = to_lower(span->text);
        for (const std::string& stop : config.non_specific_stoplist) {
          if (lowered == stop) {
            result.log.stripped.push_back({{"key", key_json(equivalence_key(event))},
                                           {"kind", std::string(to_string(kind))},
                                           {"reason", "NonSpecificValue"}});
            clear_arg(event, kind);
            break;
          }
        }
      }
    }
  }

  DropReport post = drop_invalid(voted, note.text);
  for (const auto& dropped : post.dropped) {
    result.log.dropped.push_back({{"key", key_json(equivalence_key(dropped.event))},
                                  {"reasons", dropped.reasons}});
  }
  for (const auto& stripped : post.stripped) {
    result.log.stripped.push_back({{"key", key_json(stripped.key)},
                                   {"kind", std::string(to_string(stripped.kind))},
                                   {"reason", stripped.reason}});
  }

  result.events = std::move(post.kept);
  std::sort(result.events.begin(), result.events.end(),
            [](const SdohEvent& a, const SdohEvent& b) {
              return std::tuple(a.trigger.start, a.trigger.end, a.sdoh) <
                     std::tuple(b.trigger.start, b.trigger.end, b.sdoh);
            });
  return result;
}

namespace {

CorpusRunResult run_corpus_impl(std::span<const NoteDocument> notes,
                                const prompting::PromptTemplate& tmpl,
                                std::span<const NoteDocument> examples,
                                gateway::CompletionBackend& backend,
                                const ConsistencyConfig& config, bool parallel) {
  std::vector<NoteResult> results(notes.size());
  std::vector<int> ok(notes.size(), 0);
  std::vector<NoteFailure> failures;

  const std::int64_t count = static_cast<std::int64_t>(notes.size());
#pragma omp parallel for schedule(dynamic) if (parallel)
  for (std::int64_t i = 0; i < count; ++i) {
    NoteFailure failure;
    failure.note_id = notes[i].id;
    try {
      results[i] = run_note(notes[i], tmpl, examples, backend, config);
      ok[i] = 1;
    } catch (const ConfigError& e) {
      failure.message = e.what();
      failure.exit_category = 1;
    } catch (const BackendError& e) {
      failure.message = e.what();
      failure.exit_category = 3;
    } catch (const std::exception& e) {
      failure.message = e.what();
      failure.exit_category = 2;
    }
    if (!ok[i]) {
#pragma omp critical
      failures.push_back(std::move(failure));
    }
  }

  CorpusRunResult out;
  for (std::size_t i = 0; i < notes.size(); ++i) {
    if (ok[i]) out.results.push_back(std::move(results[i]));
  }
  std::sort(failures.begin(), failures.end());
  out.failures = std::move(failures);
  return out;
}

}  // namespace

CorpusRunResult run_corpus(std::span<const NoteDocument> notes,
                           const prompting::PromptTemplate& tmpl,
                           std::span<const NoteDocument> examples,
                           gateway::CompletionBackend& backend,
                           const ConsistencyConfig& config) {
  return run_corpus_impl(notes, tmpl, examples, backend, config, true);
}

CorpusRunResult run_corpus_serial(std::span<const NoteDocument> notes,
                                  const prompting::PromptTemplate& tmpl,
                                  std::span<const NoteDocument> examples,
                                  gateway::CompletionBackend& backend,
                                  const ConsistencyConfig& config) {
  return run_corpus_impl(notes, tmpl, examples, backend, config, false);
}

}  // namespace sdoh::pipeline
