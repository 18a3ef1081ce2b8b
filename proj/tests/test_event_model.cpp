#include <doctest.h>

#include <random>

#include "generators.hpp"
#include "sdoh/event_model.hpp"

using namespace sdoh;

namespace {

// "She has no history of alcohol abuse." with the usual spans
const std::string kAlcoholNote = "She has no history of alcohol abuse.";

SdohEvent alcohol_none_event() {
  SdohEvent event;
  event.sdoh = SdohType::Alcohol;
  event.trigger = {22, 35, "alcohol abuse"};
  event.status = StatusArg{{8, 18, "no history"}, "none"};
  return event;
}

}  // namespace

TEST_CASE("alcohol event with status none validates") {
  CHECK(validate_event(alcohol_none_event(), kAlcoholNote).empty());
}

TEST_CASE("living status without a type is flagged") {
  const std::string note = "Patient lives alone.";
  SdohEvent event;
  event.sdoh = SdohType::LivingStatus;
  event.trigger = {8, 13, "lives"};
  event.status = StatusArg{{8, 13, "lives"}, "current"};
  const auto violations = validate_event(event, note);
  REQUIRE(violations.size() == 1);
  CHECK(violations[0].kind == ViolationKind::MissingLivingType);

  // a type span without a label value is still missing the type
  event.type = TypeArg{{14, 19, "alone"}, std::nullopt};
  const auto still = validate_event(event, note);
  REQUIRE(still.size() == 1);
  CHECK(still[0].kind == ViolationKind::MissingLivingType);

  event.type->value = "alone";
  CHECK(validate_event(event, note).empty());
}

TEST_CASE("status unknown is an invalid value") {
  const std::string note = "He quit smoking.";
  SdohEvent event;
  event.sdoh = SdohType::Tobacco;
  event.trigger = {8, 15, "smoking"};
  event.status = StatusArg{{3, 7, "quit"}, "unknown"};
  const auto violations = validate_event(event, note);
  REQUIRE(violations.size() == 1);
  CHECK(violations[0] == Violation{ViolationKind::InvalidStatusValue, ArgKind::Status});
}

TEST_CASE("status values are category specific and case-insensitive") {
  const std::string note = "He quit smoking.";
  SdohEvent event;
  event.sdoh = SdohType::Tobacco;
  event.trigger = {8, 15, "smoking"};
  event.status = StatusArg{{3, 7, "quit"}, "Past"};
  CHECK(validate_event(event, note).empty());

  event.status->value = "employed";  // employment vocabulary on a substance
  CHECK(validate_event(event, note) ==
        ValidationResult{{ViolationKind::InvalidStatusValue, ArgKind::Status}});

  SdohEvent job;
  job.sdoh = SdohType::Employment;
  job.trigger = {8, 15, "smoking"};  // span content is irrelevant here
  job.status = StatusArg{{3, 7, "quit"}, "homemaker"};
  CHECK(validate_event(job, note).empty());
}

TEST_CASE("missing or empty status is flagged") {
  SdohEvent event = alcohol_none_event();
  event.status.reset();
  CHECK(validate_event(event, kAlcoholNote) ==
        ValidationResult{{ViolationKind::MissingStatus, ArgKind::Status}});

  event = alcohol_none_event();
  event.status->value = "";
  CHECK(validate_event(event, kAlcoholNote) ==
        ValidationResult{{ViolationKind::MissingStatus, ArgKind::Status}});
}

TEST_CASE("forbidden argument grid: five optional spans by five categories") {
  // frequency and amount are substance-only; method is drug/tobacco-only
  const std::string note = "word another thing";
  const Span span{0, 4, "word"};
  for (SdohType type : kAllSdohTypes) {
    for (ArgKind kind : {ArgKind::Duration, ArgKind::History, ArgKind::Frequency,
                         ArgKind::Amount, ArgKind::Method}) {
      SdohEvent event;
      event.sdoh = type;
      event.trigger = {5, 12, "another"};
      event.status = StatusArg{{5, 12, "another"},
                               std::string(status_values(type).front())};
      if (type == SdohType::LivingStatus) {
        event.type = TypeArg{{13, 18, "thing"}, "alone"};
      }
      set_arg(event, kind, ArgVariant{span, std::nullopt});

      const bool substance = type == SdohType::Alcohol || type == SdohType::Drug ||
                             type == SdohType::Tobacco;
      bool expect_forbidden = false;
      if (kind == ArgKind::Frequency || kind == ArgKind::Amount) {
        expect_forbidden = !substance;
      }
      if (kind == ArgKind::Method) {
        expect_forbidden = !(type == SdohType::Drug || type == SdohType::Tobacco);
      }

      const auto violations = validate_event(event, note);
      const bool fired =
          std::find(violations.begin(), violations.end(),
                    Violation{ViolationKind::ForbiddenArgument, kind}) !=
          violations.end();
      CAPTURE(to_string(type));
      CAPTURE(to_string(kind));
      CHECK(fired == expect_forbidden);
      // and ForbiddenArgument never fires for any other argument
      for (const Violation& v : violations) {
        if (v.kind == ViolationKind::ForbiddenArgument) CHECK(v.arg == kind);
      }
    }
  }
}

TEST_CASE("span bounds and text mismatch violations") {
  SdohEvent event = alcohol_none_event();
  event.trigger = {22, 99, "alcohol abuse"};
  CHECK(validate_event(event, kAlcoholNote) ==
        ValidationResult{{ViolationKind::SpanOutOfBounds, ArgKind::Trigger}});

  event = alcohol_none_event();
  event.trigger.text = "alcohol abuze";
  CHECK(validate_event(event, kAlcoholNote) ==
        ValidationResult{{ViolationKind::SpanTextMismatch, ArgKind::Trigger}});

  event = alcohol_none_event();
  event.trigger = {10, 10, ""};
  CHECK(validate_event(event, kAlcoholNote) ==
        ValidationResult{{ViolationKind::SpanOutOfBounds, ArgKind::Trigger}});
}

TEST_CASE("offsets count code points, not bytes") {
  const std::string note = "caf\xc3\xa9 bar";  // café bar
  SdohEvent event;
  event.sdoh = SdohType::Alcohol;
  event.trigger = {5, 8, "bar"};  // byte offset would be 6
  event.status = StatusArg{{0, 4, "caf\xc3\xa9"}, "current"};
  CHECK(validate_event(event, note).empty());
}

TEST_CASE("stray type value outside LivingStatus is invalid") {
  SdohEvent event = alcohol_none_event();
  event.type = TypeArg{{8, 18, "no history"}, "alone"};
  CHECK(validate_event(event, kAlcoholNote) ==
        ValidationResult{{ViolationKind::InvalidTypeValue, ArgKind::Type}});

  event.type->value.reset();  // span-only type is fine on substances
  CHECK(validate_event(event, kAlcoholNote).empty());
}

TEST_CASE("living type value outside the vocabulary is invalid") {
  const std::string note = "Patient lives alone.";
  SdohEvent event;
  event.sdoh = SdohType::LivingStatus;
  event.trigger = {8, 13, "lives"};
  event.status = StatusArg{{8, 13, "lives"}, "current"};
  event.type = TypeArg{{14, 19, "alone"}, "with_friends"};
  CHECK(validate_event(event, note) ==
        ValidationResult{{ViolationKind::InvalidTypeValue, ArgKind::Type}});
}

TEST_CASE("validate_event is pure") {
  testgen::Rng rng(77);
  for (int i = 0; i < 50; ++i) {
    const std::string note = testgen::random_note(rng);
    SdohEvent event = testgen::random_valid_event(note, rng);
    if (i % 2 == 0) event.status->value = "bogus";
    CHECK(validate_event(event, note) == validate_event(event, note));
  }
}

TEST_CASE("equivalence keys") {
  const SdohEvent a = alcohol_none_event();
  SdohEvent b = a;
  CHECK(equivalence_key(a) == equivalence_key(b));

  b.status = StatusArg{{0, 3, "She"}, "none"};  // different status span
  CHECK(equivalence_key(a) == equivalence_key(b));

  SdohEvent c = a;
  c.sdoh = SdohType::Drug;
  CHECK(equivalence_key(a) != equivalence_key(c));

  SdohEvent d = a;
  d.trigger.start += 1;
  CHECK(equivalence_key(a) != equivalence_key(d));
}

TEST_CASE("argument accessors round trip") {
  SdohEvent event = alcohol_none_event();
  event.amount = Span{0, 3, "She"};
  for (ArgKind kind : kAllArgKinds) {
    const auto variant = arg_variant(event, kind);
    if (!variant) continue;
    SdohEvent copy = event;
    clear_arg(copy, kind);
    if (kind != ArgKind::Trigger) CHECK(arg_span(copy, kind) == nullptr);
    set_arg(copy, kind, *variant);
    CHECK(copy == event);
  }
}
