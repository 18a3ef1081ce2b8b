#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sdoh/event_model.hpp"

// Shared-task style evaluation. Events are aligned one-to-one within a note
// (same category, overlapping trigger). Span arguments score on character
// overlap; valued arguments (status, living-status type) additionally need
// exact value equality. Counts are kept per (category, argument kind) cell
// and micro-aggregated.
namespace sdoh::scorer {

struct CellKey {
  SdohType sdoh = SdohType::Alcohol;
  ArgKind kind = ArgKind::Trigger;

  auto operator<=>(const CellKey&) const = default;
};

struct Counts {
  long tp = 0;
  long fp = 0;
  long fn = 0;

  Counts& operator+=(const Counts& other);
  bool operator==(const Counts&) const = default;
};

struct MatchCounts {
  std::map<CellKey, Counts> cells;

  MatchCounts& operator+=(const MatchCounts& other);
  Counts total() const;
  Counts total_for(SdohType type) const;
  bool operator==(const MatchCounts&) const = default;
};

struct Alignment {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;  // (pred idx, gold idx)
  std::vector<std::size_t> unmatched_pred;
  std::vector<std::size_t> unmatched_gold;
};

// Overlap length of two spans in characters; 0 when disjoint.
std::size_t overlap(const Span& a, const Span& b);

// Greedy one-to-one matching by descending trigger overlap, ties broken by
// earliest gold start. Only same-category pairs with positive overlap are
// eligible.
Alignment align_events(std::span<const SdohEvent> pred, std::span<const SdohEvent> gold);

MatchCounts score_document(std::span<const SdohEvent> pred,
                           std::span<const SdohEvent> gold);

// Audit matcher: enumerates every one-to-one pairing and maximizes
// (matched pairs, total overlap). Exponential; intended for small notes.
MatchCounts score_document_optimal(std::span<const SdohEvent> pred,
                                   std::span<const SdohEvent> gold);

struct Prf {
  double precision = 0;
  double recall = 0;
  double f1 = 0;
};

// Zero-denominator convention: empty-vs-empty is vacuously perfect, empty
// against nonempty scores zero.
Prf prf(const Counts& counts);

struct ScoreReport {
  MatchCounts totals;
  std::size_t documents = 0;

  Prf micro() const { return prf(totals.total()); }
  Prf per_type(SdohType type) const { return prf(totals.total_for(type)); }
  std::string to_table() const;  // overall row plus one row per category
  nlohmann::json to_json() const;
};

ScoreReport aggregate(std::span<const MatchCounts> per_document);

struct ScoredDoc {
  std::string id;
  std::vector<SdohEvent> pred;
  std::vector<SdohEvent> gold;
};

// Per-document scoring is embarrassingly parallel and the fold is
// associative, so the corpus scorer has an OpenMP variant and a serial
// reference with identical results.
ScoreReport score_corpus(std::span<const ScoredDoc> docs);
ScoreReport score_corpus_serial(std::span<const ScoredDoc> docs);

// Mechanically detectable error categories for the review report.
enum class ErrorCategory {
  OneOfMany,             // several gold events of a type, not all predicted
  MissingValues,         // matched event lacking an argument the gold has
  MissingDrugMethodType, // method/type absent on a matched Drug event
  NonSpecific,           // vague span value ("often", "in the past", ...)
  Other,
};

std::string_view to_string(ErrorCategory category);

struct ErrorItem {
  std::string note_id;
  ErrorCategory category = ErrorCategory::Other;
  bool false_positive = false;  // otherwise a false negative
  SdohType sdoh = SdohType::Alcohol;
  ArgKind kind = ArgKind::Trigger;
  std::string detail;
};

struct ErrorReport {
  std::vector<ErrorItem> items;
  std::map<ErrorCategory, std::size_t> counts() const;
  std::string to_table() const;
  nlohmann::json to_json() const;
};

ErrorReport error_report(std::span<const ScoredDoc> docs,
                         const std::vector<std::string>& non_specific_stoplist);

}  // namespace sdoh::scorer
