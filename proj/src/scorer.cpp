#include "sdoh/scorer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <tuple>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace sdoh::scorer {

Counts& Counts::operator+=(const Counts& other) {
  tp += other.tp;
  fp += other.fp;
  fn += other.fn;
  return *this;
}

MatchCounts& MatchCounts::operator+=(const MatchCounts& other) {
  for (const auto& [key, counts] : other.cells) {
    cells[key] += counts;
  }
  return *this;
}

Counts MatchCounts::total() const {
  Counts out;
  for (const auto& [key, counts] : cells) out += counts;
  return out;
}

Counts MatchCounts::total_for(SdohType type) const {
  Counts out;
  for (const auto& [key, counts] : cells) {
    if (key.sdoh == type) out += counts;
  }
  return out;
}

std::size_t overlap(const Span& a, const Span& b) {
  const std::size_t lo = std::max(a.start, b.start);
  const std::size_t hi = std::min(a.end, b.end);
  return hi > lo ? hi - lo : 0;
}

Alignment align_events(std::span<const SdohEvent> pred, std::span<const SdohEvent> gold) {
  struct Candidate {
    std::size_t ov;
    std::size_t p;
    std::size_t g;
  };
  std::vector<Candidate> candidates;
  for (std::size_t p = 0; p < pred.size(); ++p) {
    for (std::size_t g = 0; g < gold.size(); ++g) {
      if (pred[p].sdoh != gold[g].sdoh) continue;
      const std::size_t ov = overlap(pred[p].trigger, gold[g].trigger);
      if (ov > 0) candidates.push_back({ov, p, g});
    }
  }
  std::sort(candidates.begin(), candidates.end(),
            [&](const Candidate& a, const Candidate& b) {
              if (a.ov != b.ov) return a.ov > b.ov;
              const auto& ga = gold[a.g].trigger;
              const auto& gb = gold[b.g].trigger;
              if (ga.start != gb.start) return ga.start < gb.start;
              if (ga.end != gb.end) return ga.end < gb.end;
              const auto& pa = pred[a.p].trigger;
              const auto& pb = pred[b.p].trigger;
              if (pa.start != pb.start) return pa.start < pb.start;
              if (pa.end != pb.end) return pa.end < pb.end;
              return std::tie(a.g, a.p) < std::tie(b.g, b.p);
            });

  Alignment alignment;
  std::vector<bool> pred_taken(pred.size(), false);
  std::vector<bool> gold_taken(gold.size(), false);
  for (const Candidate& c : candidates) {
    if (pred_taken[c.p] || gold_taken[c.g]) continue;
    pred_taken[c.p] = true;
    gold_taken[c.g] = true;
    alignment.pairs.emplace_back(c.p, c.g);
  }
  for (std::size_t p = 0; p < pred.size(); ++p) {
    if (!pred_taken[p]) alignment.unmatched_pred.push_back(p);
  }
  for (std::size_t g = 0; g < gold.size(); ++g) {
    if (!gold_taken[g]) alignment.unmatched_gold.push_back(g);
  }
  return alignment;
}

namespace {

bool value_gated(SdohType type, ArgKind kind) {
  return kind == ArgKind::Status ||
         (kind == ArgKind::Type && type == SdohType::LivingStatus);
}

bool values_match(const ArgVariant& pred, const ArgVariant& gold) {
  const std::string pv = to_lower(pred.value.value_or(""));
  const std::string gv = to_lower(gold.value.value_or(""));
  return pv == gv;
}

void score_pair(const SdohEvent& pred, const SdohEvent& gold, MatchCounts& out) {
  out.cells[{pred.sdoh, ArgKind::Trigger}].tp += 1;
  for (ArgKind kind : kAllArgKinds) {
    if (kind == ArgKind::Trigger) continue;
    const auto pv = arg_variant(pred, kind);
    const auto gv = arg_variant(gold, kind);
    Counts& cell = out.cells[{pred.sdoh, kind}];
    if (pv && gv) {
      bool hit = overlap(pv->span, gv->span) > 0;
      if (hit && value_gated(pred.sdoh, kind)) hit = values_match(*pv, *gv);
      if (hit) {
        cell.tp += 1;
      } else {
        // Present on both sides but wrong: the prediction is spurious and
        // the gold argument is missed.
        cell.fp += 1;
        cell.fn += 1;
      }
    } else if (pv) {
      cell.fp += 1;
    } else if (gv) {
      cell.fn += 1;
    }
  }
}

void score_unmatched(const SdohEvent& event, bool as_pred, MatchCounts& out) {
  for (ArgKind kind : kAllArgKinds) {
    if (!arg_span(event, kind)) continue;
    Counts& cell = out.cells[{event.sdoh, kind}];
    (as_pred ? cell.fp : cell.fn) += 1;
  }
}

}  // namespace

MatchCounts score_document(std::span<const SdohEvent> pred,
                           std::span<const SdohEvent> gold) {
  const Alignment alignment = align_events(pred, gold);
  MatchCounts out;
  for (const auto& [p, g] : alignment.pairs) {
    score_pair(pred[p], gold[g], out);
  }
  for (const std::size_t p : alignment.unmatched_pred) {
    score_unmatched(pred[p], /*as_pred=*/true, out);
  }
  for (const std::size_t g : alignment.unmatched_gold) {
    score_unmatched(gold[g], /*as_pred=*/false, out);
  }
  return out;
}

namespace {

// Enumerates injective pred->gold assignments within one category.
void enumerate_assignments(const std::vector<std::size_t>& preds,
                           const std::vector<std::size_t>& golds,
                           std::span<const SdohEvent> pred_events,
                           std::span<const SdohEvent> gold_events, std::size_t at,
                           std::vector<bool>& gold_used,
                           std::vector<std::pair<std::size_t, std::size_t>>& current,
                           std::size_t& best_card, std::size_t& best_overlap,
                           std::vector<std::pair<std::size_t, std::size_t>>& best) {
  if (at == preds.size()) {
    std::size_t total = 0;
    for (const auto& [p, g] : current) {
      total += overlap(pred_events[p].trigger, gold_events[g].trigger);
    }
    if (current.size() > best_card ||
        (current.size() == best_card && total > best_overlap)) {
      best_card = current.size();
      best_overlap = total;
      best = current;
    }
    return;
  }
  const std::size_t p = preds[at];
  // leave this prediction unmatched
  enumerate_assignments(preds, golds, pred_events, gold_events, at + 1, gold_used,
                        current, best_card, best_overlap, best);
  for (std::size_t gi = 0; gi < golds.size(); ++gi) {
    if (gold_used[gi]) continue;
    const std::size_t g = golds[gi];
    if (overlap(pred_events[p].trigger, gold_events[g].trigger) == 0) continue;
    gold_used[gi] = true;
    current.emplace_back(p, g);
    enumerate_assignments(preds, golds, pred_events, gold_events, at + 1, gold_used,
                          current, best_card, best_overlap, best);
    current.pop_back();
    gold_used[gi] = false;
  }
}

}  // namespace

MatchCounts score_document_optimal(std::span<const SdohEvent> pred,
                                   std::span<const SdohEvent> gold) {
  MatchCounts out;
  std::vector<bool> pred_matched(pred.size(), false);
  std::vector<bool> gold_matched(gold.size(), false);

  for (SdohType type : kAllSdohTypes) {
    std::vector<std::size_t> preds;
    std::vector<std::size_t> golds;
    for (std::size_t p = 0; p < pred.size(); ++p) {
      if (pred[p].sdoh == type) preds.push_back(p);
    }
    for (std::size_t g = 0; g < gold.size(); ++g) {
      if (gold[g].sdoh == type) golds.push_back(g);
    }
    if (preds.empty() || golds.empty()) continue;

    std::vector<bool> gold_used(golds.size(), false);
    std::vector<std::pair<std::size_t, std::size_t>> current;
    std::vector<std::pair<std::size_t, std::size_t>> best;
    std::size_t best_card = 0;
    std::size_t best_overlap = 0;
    enumerate_assignments(preds, golds, pred, gold, 0, gold_used, current, best_card,
                          best_overlap, best);
    for (const auto& [p, g] : best) {
      pred_matched[p] = true;
      gold_matched[g] = true;
      score_pair(pred[p], gold[g], out);
    }
  }
  for (std::size_t p = 0; p < pred.size(); ++p) {
    if (!pred_matched[p]) score_unmatched(pred[p], true, out);
  }
  for (std::size_t g = 0; g < gold.size(); ++g) {
    if (!gold_matched[g]) score_unmatched(gold[g], false, out);
  }
  return out;
}

Prf prf(const Counts& counts) {
  Prf out;
  if (counts.tp + counts.fp + counts.fn == 0) {
    out.precision = out.recall = out.f1 = 1.0;  // vacuously perfect
    return out;
  }
  out.precision =
      counts.tp + counts.fp > 0 ? double(counts.tp) / double(counts.tp + counts.fp) : 0.0;
  out.recall =
      counts.tp + counts.fn > 0 ? double(counts.tp) / double(counts.tp + counts.fn) : 0.0;
  out.f1 = out.precision + out.recall > 0
               ? 2.0 * out.precision * out.recall / (out.precision + out.recall)
               : 0.0;
  return out;
}

ScoreReport aggregate(std::span<const MatchCounts> per_document) {
  ScoreReport report;
  report.documents = per_document.size();
  for (const MatchCounts& counts : per_document) {
    report.totals += counts;
  }
  return report;
}

std::string ScoreReport::to_table() const {
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof(line), "%-16s %10s %10s %10s %8s %8s %8s\n", "",
                "Precision", "Recall", "Micro-F1", "TP", "FP", "FN");
  out << line;
  const auto row = [&](const std::string& label, const Counts& counts) {
    const Prf p = prf(counts);
    std::snprintf(line, sizeof(line), "%-16s %10.3f %10.3f %10.3f %8ld %8ld %8ld\n",
                  label.c_str(), p.precision, p.recall, p.f1, counts.tp, counts.fp,
                  counts.fn);
    out << line;
  };
  row("Overall", totals.total());
  for (SdohType type : kAllSdohTypes) {
    row("  " + std::string(to_string(type)), totals.total_for(type));
  }
  return out.str();
}

nlohmann::json ScoreReport::to_json() const {
  const auto block = [](const Counts& counts) {
    const Prf p = prf(counts);
    return nlohmann::json{{"precision", p.precision}, {"recall", p.recall},
                          {"f1", p.f1},               {"tp", counts.tp},
                          {"fp", counts.fp},          {"fn", counts.fn}};
  };
  nlohmann::json per_type;
  for (SdohType type : kAllSdohTypes) {
    per_type[std::string(to_string(type))] = block(totals.total_for(type));
  }
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& [key, counts] : totals.cells) {
    nlohmann::json cell = block(counts);
    cell["sdoh"] = std::string(to_string(key.sdoh));
    cell["argument"] = std::string(to_string(key.kind));
    cells.push_back(std::move(cell));
  }
  return {{"documents", documents},
          {"overall", block(totals.total())},
          {"per_type", per_type},
          {"cells", cells}};
}

ScoreReport score_corpus(std::span<const ScoredDoc> docs) {
  ScoreReport report;
  report.documents = docs.size();
  const std::int64_t count = static_cast<std::int64_t>(docs.size());
  // The fold is associative and commutative, so thread-local partial counts
  // merge to exactly the serial result.
#pragma omp parallel
  {
    MatchCounts local;
#pragma omp for schedule(static) nowait
    for (std::int64_t i = 0; i < count; ++i) {
      local += score_document(docs[i].pred, docs[i].gold);
    }
#pragma omp critical
    report.totals += local;
  }
  return report;
}

ScoreReport score_corpus_serial(std::span<const ScoredDoc> docs) {
  ScoreReport report;
  report.documents = docs.size();
  for (const ScoredDoc& doc : docs) {
    report.totals += score_document(doc.pred, doc.gold);
  }
  return report;
}

std::string_view to_string(ErrorCategory category) {
  switch (category) {
    case ErrorCategory::OneOfMany:
      return "one event of many with the same SDOH type";
    case ErrorCategory::MissingValues:
      return "missing values in an extracted event";
    case ErrorCategory::MissingDrugMethodType:
      return "missing method / type for drug event";
    case ErrorCategory::NonSpecific:
      return "non-specific type, frequency, history, duration, amount";
    case ErrorCategory::Other:
      return "other";
  }
  return "other";
}

std::map<ErrorCategory, std::size_t> ErrorReport::counts() const {
  std::map<ErrorCategory, std::size_t> out;
  for (const ErrorItem& item : items) ++out[item.category];
  return out;
}

std::string ErrorReport::to_table() const {
  std::ostringstream out;
  out << "Errors: " << items.size() << "\n";
  for (const auto& [category, n] : counts()) {
    out << "  " << to_string(category) << ": " << n << "\n";
  }
  for (const ErrorItem& item : items) {
    out << "  [" << (item.false_positive ? "FP" : "FN") << "] " << item.note_id << " "
        << to_string(item.sdoh) << "/" << to_string(item.kind) << " ("
        << to_string(item.category) << ") " << item.detail << "\n";
  }
  return out.str();
}

nlohmann::json ErrorReport::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const ErrorItem& item : items) {
    arr.push_back({{"note_id", item.note_id},
                   {"category", std::string(to_string(item.category))},
                   {"side", item.false_positive ? "fp" : "fn"},
                   {"sdoh", std::string(to_string(item.sdoh))},
                   {"argument", std::string(to_string(item.kind))},
                   {"detail", item.detail}});
  }
  return arr;
}

ErrorReport error_report(std::span<const ScoredDoc> docs,
                         const std::vector<std::string>& non_specific_stoplist) {
  ErrorReport report;
  const auto non_specific = [&](std::string_view text) {
    const std::string lowered = to_lower(text);
    return std::find(non_specific_stoplist.begin(), non_specific_stoplist.end(),
                     lowered) != non_specific_stoplist.end();
  };

  for (const ScoredDoc& doc : docs) {
    const Alignment alignment = align_events(doc.pred, doc.gold);

    std::map<SdohType, std::size_t> gold_count;
    std::map<SdohType, std::size_t> matched_count;
    for (const SdohEvent& g : doc.gold) ++gold_count[g.sdoh];
    for (const auto& [p, g] : alignment.pairs) ++matched_count[doc.gold[g].sdoh];

    for (const std::size_t g : alignment.unmatched_gold) {
      const SdohEvent& event = doc.gold[g];
      ErrorItem item;
      item.note_id = doc.id;
      item.sdoh = event.sdoh;
      item.kind = ArgKind::Trigger;
      item.detail = event.trigger.text;
      const bool one_of_many =
          gold_count[event.sdoh] >= 2 && matched_count[event.sdoh] >= 1;
      item.category = one_of_many ? ErrorCategory::OneOfMany : ErrorCategory::Other;
      report.items.push_back(std::move(item));
    }

    for (const auto& [p, g] : alignment.pairs) {
      const SdohEvent& pred = doc.pred[p];
      const SdohEvent& gold = doc.gold[g];
      for (ArgKind kind : kAllArgKinds) {
        if (kind == ArgKind::Trigger) continue;
        const auto pv = arg_variant(pred, kind);
        const auto gv = arg_variant(gold, kind);
        if (gv && !pv) {
          ErrorItem item;
          item.note_id = doc.id;
          item.sdoh = gold.sdoh;
          item.kind = kind;
          item.detail = gv->span.text;
          item.category = gold.sdoh == SdohType::Drug &&
                                  (kind == ArgKind::Method || kind == ArgKind::Type)
                              ? ErrorCategory::MissingDrugMethodType
                              : ErrorCategory::MissingValues;
          report.items.push_back(std::move(item));
        } else if (pv) {
          const bool scored_fp =
              !gv || overlap(pv->span, gv->span) == 0 ||
              (value_gated(pred.sdoh, kind) && !values_match(*pv, *gv));
          if (scored_fp) {
            ErrorItem item;
            item.note_id = doc.id;
            item.sdoh = pred.sdoh;
            item.kind = kind;
            item.detail = pv->span.text;
            item.false_positive = true;
            item.category = non_specific(pv->span.text) ? ErrorCategory::NonSpecific
                                                        : ErrorCategory::Other;
            report.items.push_back(std::move(item));
          }
        }
      }
    }

    for (const std::size_t p : alignment.unmatched_pred) {
      const SdohEvent& event = doc.pred[p];
      ErrorItem item;
      item.note_id = doc.id;
      item.sdoh = event.sdoh;
      item.kind = ArgKind::Trigger;
      item.false_positive = true;
      item.detail = event.trigger.text;
      item.category = ErrorCategory::Other;
      report.items.push_back(std::move(item));
    }
  }
  return report;
}

}  // namespace sdoh::scorer
