// Benchmark: OpenMP corpus kernels against their serial reference
// implementations, on a generated synthetic corpus. Results are verified
// equal before timings are reported.
#include <chrono>
#include <cstdio>
#include <cstring>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "sdoh/event_model.hpp"
#include "sdoh/pipeline.hpp"
#include "sdoh/scorer.hpp"

using namespace sdoh;

namespace {

struct SynthNote {
  std::string text;
  std::vector<SdohEvent> gold;
  std::vector<SdohEvent> pred;
};

// Notes built from fixed sentence stock so spans are valid by construction.
SynthNote make_note(std::mt19937_64& rng) {
  static const struct {
    const char* sentence;
    SdohType type;
    const char* trigger;
    const char* status_text;
    const char* status_value;
  } stock[] = {
      {"Patient drinks two beers nightly. ", SdohType::Alcohol, "drinks", "drinks",
       "current"},
      {"He quit smoking a decade ago. ", SdohType::Tobacco, "smoking", "quit", "past"},
      {"Denies any drug use at this time. ", SdohType::Drug, "drug use", "Denies",
       "none"},
      {"She works as a teacher downtown. ", SdohType::Employment, "works", "works",
       "employed"},
      {"Currently lives alone near the clinic. ", SdohType::LivingStatus, "lives",
       "lives", "current"},
  };

  SynthNote note;
  const int sentences = 3 + static_cast<int>(rng() % 5);
  for (int s = 0; s < sentences; ++s) {
    const auto& entry = stock[rng() % std::size(stock)];
    const std::size_t base = note.text.size();  // ASCII stock: bytes == code points
    note.text += entry.sentence;

    SdohEvent event;
    event.sdoh = entry.type;
    const std::string sentence(entry.sentence);
    const std::size_t trig_at = base + sentence.find(entry.trigger);
    event.trigger = {trig_at, trig_at + std::strlen(entry.trigger), entry.trigger};
    const std::size_t status_at = base + sentence.find(entry.status_text);
    event.status = StatusArg{
        {status_at, status_at + std::strlen(entry.status_text), entry.status_text},
        entry.status_value};
    if (entry.type == SdohType::LivingStatus) {
      const std::size_t type_at = base + sentence.find("alone");
      event.type = TypeArg{{type_at, type_at + 5, "alone"}, "alone"};
    }
    note.gold.push_back(event);

    if (rng() % 10 != 0) {  // drop 10% of events from predictions
      SdohEvent pred = event;
      if (rng() % 4 == 0 && pred.trigger.start >= 2) {
        pred.trigger.start -= 2;  // shifted span for the realign path
        pred.trigger.end -= 2;
      }
      note.pred.push_back(pred);
    }
  }
  return note;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

int main(int argc, char** argv) {
  std::size_t docs = 20000;
  int rounds = 3;
  for (int i = 1; i < argc; ++i) {
    if (std::string(argv[i]) == "--quick") {
      docs = 500;
      rounds = 1;
    } else if (std::string(argv[i]) == "--docs" && i + 1 < argc) {
      docs = std::stoul(argv[++i]);
    }
  }

#ifdef _OPENMP
  std::printf("OpenMP enabled, max threads: %d\n", omp_get_max_threads());
#else
  std::printf("OpenMP not available; parallel variants run serially\n");
#endif

  std::mt19937_64 rng(20240817);
  std::vector<SynthNote> notes;
  notes.reserve(docs);
  std::vector<scorer::ScoredDoc> scored;
  scored.reserve(docs);
  for (std::size_t i = 0; i < docs; ++i) {
    notes.push_back(make_note(rng));
    scored.push_back({"n" + std::to_string(i), notes.back().pred, notes.back().gold});
  }
  std::printf("synthetic corpus: %zu documents\n\n", docs);

  // corpus scoring
  double serial_best = 1e9;
  double parallel_best = 1e9;
  scorer::ScoreReport serial_report;
  scorer::ScoreReport parallel_report;
  for (int r = 0; r < rounds; ++r) {
    auto t0 = std::chrono::steady_clock::now();
    serial_report = scorer::score_corpus_serial(scored);
    serial_best = std::min(serial_best, seconds_since(t0));

    t0 = std::chrono::steady_clock::now();
    parallel_report = scorer::score_corpus(scored);
    parallel_best = std::min(parallel_best, seconds_since(t0));
  }
  if (!(serial_report.totals == parallel_report.totals)) {
    std::fprintf(stderr, "FATAL: scorer variants disagree\n");
    return 1;
  }
  std::printf("score_corpus        serial %8.3fs   openmp %8.3fs   speedup %.2fx\n",
              serial_best, parallel_best, serial_best / parallel_best);

  // post-processing (realign + validity filter) over all predictions
  double post_serial = 1e9;
  double post_parallel = 1e9;
  std::size_t kept_serial = 0;
  std::size_t kept_parallel = 0;
  for (int r = 0; r < rounds; ++r) {
    auto t0 = std::chrono::steady_clock::now();
    std::size_t kept = 0;
    for (const SynthNote& note : notes) {
      kept += pipeline::drop_invalid(note.pred, note.text).kept.size();
    }
    post_serial = std::min(post_serial, seconds_since(t0));
    kept_serial = kept;

    t0 = std::chrono::steady_clock::now();
    kept = 0;
    const auto count = static_cast<std::int64_t>(notes.size());
#pragma omp parallel for schedule(dynamic) reduction(+ : kept)
    for (std::int64_t i = 0; i < count; ++i) {
      kept += pipeline::drop_invalid(notes[i].pred, notes[i].text).kept.size();
    }
    post_parallel = std::min(post_parallel, seconds_since(t0));
    kept_parallel = kept;
  }
  if (kept_serial != kept_parallel) {
    std::fprintf(stderr, "FATAL: post-processing variants disagree\n");
    return 1;
  }
  std::printf("post_processing     serial %8.3fs   openmp %8.3fs   speedup %.2fx\n",
              post_serial, post_parallel, post_serial / post_parallel);

  const auto micro = serial_report.micro();
  std::printf("\ncorpus micro-F1 %.3f over %zu documents (%zu kept events)\n", micro.f1,
              serial_report.documents, kept_serial);
  return 0;
}
