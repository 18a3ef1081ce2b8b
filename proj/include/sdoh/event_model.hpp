#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace sdoh {

// The five SDOH event categories of the SHAC schema.
enum class SdohType { Alcohol, Drug, Tobacco, Employment, LivingStatus };

inline constexpr std::array<SdohType, 5> kAllSdohTypes = {
    SdohType::Alcohol, SdohType::Drug, SdohType::Tobacco,
    SdohType::Employment, SdohType::LivingStatus,
};

std::string_view to_string(SdohType type);
std::optional<SdohType> sdoh_type_from(std::string_view name);  // case-insensitive

// Event slots, in the order the response schema lists them.
enum class ArgKind { Trigger, Status, Duration, History, Type, Amount, Frequency, Method };

inline constexpr std::array<ArgKind, 8> kAllArgKinds = {
    ArgKind::Trigger, ArgKind::Status, ArgKind::Duration, ArgKind::History,
    ArgKind::Type,    ArgKind::Amount, ArgKind::Frequency, ArgKind::Method,
};

std::string_view to_string(ArgKind kind);
std::optional<ArgKind> arg_kind_from(std::string_view name);  // case-insensitive

// A character interval plus its surface text. Offsets count Unicode code
// points into the note body; start is inclusive, end exclusive.
struct Span {
  std::size_t start = 0;
  std::size_t end = 0;
  std::string text;

  auto operator<=>(const Span&) const = default;
};

struct StatusArg {
  Span span;
  std::string value;

  auto operator<=>(const StatusArg&) const = default;
};

// Type argument. Only LivingStatus events carry a label value; for the other
// categories the span alone is the annotation.
struct TypeArg {
  Span span;
  std::optional<std::string> value;

  auto operator<=>(const TypeArg&) const = default;
};

struct SdohEvent {
  SdohType sdoh = SdohType::Alcohol;
  Span trigger;
  std::optional<StatusArg> status;
  std::optional<TypeArg> type;
  std::optional<Span> duration;
  std::optional<Span> history;
  std::optional<Span> frequency;
  std::optional<Span> amount;
  std::optional<Span> method;

  bool operator==(const SdohEvent&) const = default;
};

// One argument occurrence, uniform across kinds; the value is set only for
// valued arguments (status, living-status type).
struct ArgVariant {
  Span span;
  std::optional<std::string> value;

  auto operator<=>(const ArgVariant&) const = default;
};

const Span* arg_span(const SdohEvent& event, ArgKind kind);
std::optional<ArgVariant> arg_variant(const SdohEvent& event, ArgKind kind);
void set_arg(SdohEvent& event, ArgKind kind, const ArgVariant& variant);
void clear_arg(SdohEvent& event, ArgKind kind);

enum class Split { Train, Dev, Test, Unspecified };

std::string_view to_string(Split split);
std::optional<Split> split_from(std::string_view name);

struct NoteDocument {
  std::string id;
  std::string text;
  std::vector<SdohEvent> gold;
  Split split = Split::Unspecified;
};

// Validity rules (required arguments, admissible values, span integrity).
enum class ViolationKind {
  MissingStatus,
  MissingLivingType,
  InvalidStatusValue,
  InvalidTypeValue,
  ForbiddenArgument,
  SpanOutOfBounds,
  SpanTextMismatch,
};

std::string_view to_string(ViolationKind kind);

struct Violation {
  ViolationKind kind;
  ArgKind arg = ArgKind::Trigger;

  auto operator<=>(const Violation&) const = default;
};

// Empty result means the event is valid. Pure: same inputs, same violations,
// listed in a fixed order (span checks, forbidden arguments, status, type).
using ValidationResult = std::vector<Violation>;

ValidationResult validate_event(const SdohEvent& event, std::string_view note_text);

inline bool is_valid(const ValidationResult& r) { return r.empty(); }

// True when the argument kind may appear on events of this category.
// Frequency and amount are substance-only; method is drug/tobacco-only.
bool argument_allowed(SdohType type, ArgKind kind);

// True when the kind must be present for the event to be valid.
bool argument_required(SdohType type, ArgKind kind);

// Admissible status values for the category (lowercase canonical forms).
const std::vector<std::string>& status_values(SdohType type);

// Admissible LivingStatus type values.
const std::vector<std::string>& living_type_values();

std::string to_lower(std::string_view s);

// Identity used by voting and alignment bookkeeping: category plus exact
// trigger offsets. Argument content is deliberately excluded.
struct EventKey {
  SdohType sdoh = SdohType::Alcohol;
  std::size_t start = 0;
  std::size_t end = 0;

  auto operator<=>(const EventKey&) const = default;
};

EventKey equivalence_key(const SdohEvent& event);

}  // namespace sdoh
