#include "sdoh/event_model.hpp"

#include <algorithm>
#include <cctype>

#include "sdoh/utf8.hpp"

namespace sdoh {

namespace {

bool iequals(std::string_view a, std::string_view b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(a[i])) !=
        std::tolower(static_cast<unsigned char>(b[i]))) {
      return false;
    }
  }
  return true;
}

}  // namespace

std::string to_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string_view to_string(SdohType type) {
  switch (type) {
    case SdohType::Alcohol: return "Alcohol";
    case SdohType::Drug: return "Drug";
    case SdohType::Tobacco: return "Tobacco";
    case SdohType::Employment: return "Employment";
    case SdohType::LivingStatus: return "LivingStatus";
  }
  return "Alcohol";
}

std::optional<SdohType> sdoh_type_from(std::string_view name) {
  for (SdohType t : kAllSdohTypes) {
    if (iequals(name, to_string(t))) return t;
  }
  return std::nullopt;
}

std::string_view to_string(ArgKind kind) {
  switch (kind) {
    case ArgKind::Trigger: return "trigger";
    case ArgKind::Status: return "status";
    case ArgKind::Duration: return "duration";
    case ArgKind::History: return "history";
    case ArgKind::Type: return "type";
    case ArgKind::Amount: return "amount";
    case ArgKind::Frequency: return "frequency";
    case ArgKind::Method: return "method";
  }
  return "trigger";
}

std::optional<ArgKind> arg_kind_from(std::string_view name) {
  for (ArgKind k : kAllArgKinds) {
    if (iequals(name, to_string(k))) return k;
  }
  return std::nullopt;
}

std::string_view to_string(Split split) {
  switch (split) {
    case Split::Train: return "train";
    case Split::Dev: return "dev";
    case Split::Test: return "test";
    case Split::Unspecified: return "unspecified";
  }
  return "unspecified";
}

std::optional<Split> split_from(std::string_view name) {
  if (iequals(name, "train")) return Split::Train;
  if (iequals(name, "dev")) return Split::Dev;
  if (iequals(name, "test")) return Split::Test;
  return std::nullopt;
}

const Span* arg_span(const SdohEvent& event, ArgKind kind) {
  switch (kind) {
    case ArgKind::Trigger: return &event.trigger;
    case ArgKind::Status: return event.status ? &event.status->span : nullptr;
    case ArgKind::Type: return event.type ? &event.type->span : nullptr;
    case ArgKind::Duration: return event.duration ? &*event.duration : nullptr;
    case ArgKind::History: return event.history ? &*event.history : nullptr;
    case ArgKind::Frequency: return event.frequency ? &*event.frequency : nullptr;
    case ArgKind::Amount: return event.amount ? &*event.amount : nullptr;
    case ArgKind::Method: return event.method ? &*event.method : nullptr;
  }
  return nullptr;
}

std::optional<ArgVariant> arg_variant(const SdohEvent& event, ArgKind kind) {
  const Span* span = arg_span(event, kind);
  if (!span) return std::nullopt;
  ArgVariant v{*span, std::nullopt};
  if (kind == ArgKind::Status && event.status) v.value = event.status->value;
  if (kind == ArgKind::Type && event.type) v.value = event.type->value;
  return v;
}

void set_arg(SdohEvent& event, ArgKind kind, const ArgVariant& variant) {
  switch (kind) {
    case ArgKind::Trigger:
      event.trigger = variant.span;
      break;
    case ArgKind::Status:
      event.status = StatusArg{variant.span, variant.value.value_or("")};
      break;
    case ArgKind::Type:
      event.type = TypeArg{variant.span, variant.value};
      break;
    case ArgKind::Duration:
      event.duration = variant.span;
      break;
    case ArgKind::History:
      event.history = variant.span;
      break;
    case ArgKind::Frequency:
      event.frequency = variant.span;
      break;
    case ArgKind::Amount:
      event.amount = variant.span;
      break;
    case ArgKind::Method:
      event.method = variant.span;
      break;
  }
}

void clear_arg(SdohEvent& event, ArgKind kind) {
  switch (kind) {
    case ArgKind::Trigger: break;  // trigger is not optional
    case ArgKind::Status: event.status.reset(); break;
    case ArgKind::Type: event.type.reset(); break;
    case ArgKind::Duration: event.duration.reset(); break;
    case ArgKind::History: event.history.reset(); break;
    case ArgKind::Frequency: event.frequency.reset(); break;
    case ArgKind::Amount: event.amount.reset(); break;
    case ArgKind::Method: event.method.reset(); break;
  }
}

std::string_view to_string(ViolationKind kind) {
  switch (kind) {
    case ViolationKind::MissingStatus: return "MissingStatus";
    case ViolationKind::MissingLivingType: return "MissingLivingType";
    case ViolationKind::InvalidStatusValue: return "InvalidStatusValue";
    case ViolationKind::InvalidTypeValue: return "InvalidTypeValue";
    case ViolationKind::ForbiddenArgument: return "ForbiddenArgument";
    case ViolationKind::SpanOutOfBounds: return "SpanOutOfBounds";
    case ViolationKind::SpanTextMismatch: return "SpanTextMismatch";
  }
  return "SpanOutOfBounds";
}

bool argument_allowed(SdohType type, ArgKind kind) {
  const bool substance = type == SdohType::Alcohol || type == SdohType::Drug ||
                         type == SdohType::Tobacco;
  switch (kind) {
    case ArgKind::Trigger:
    case ArgKind::Status:
    case ArgKind::Duration:
    case ArgKind::History:
    case ArgKind::Type:
      return true;
    case ArgKind::Frequency:
    case ArgKind::Amount:
      return substance;
    case ArgKind::Method:
      return type == SdohType::Drug || type == SdohType::Tobacco;
  }
  return false;
}

bool argument_required(SdohType type, ArgKind kind) {
  if (kind == ArgKind::Trigger || kind == ArgKind::Status) return true;
  return kind == ArgKind::Type && type == SdohType::LivingStatus;
}

const std::vector<std::string>& status_values(SdohType type) {
  static const std::vector<std::string> employment = {
      "employed", "unemployed", "retired", "student", "homemaker"};
  static const std::vector<std::string> temporal = {"current", "past", "none"};
  return type == SdohType::Employment ? employment : temporal;
}

const std::vector<std::string>& living_type_values() {
  static const std::vector<std::string> values = {"alone", "with_family",
                                                  "with_others", "homeless"};
  return values;
}

namespace {

bool value_in(const std::vector<std::string>& values, std::string_view v) {
  const std::string lowered = to_lower(v);
  return std::find(values.begin(), values.end(), lowered) != values.end();
}

void check_span(const Span& span, ArgKind kind, std::string_view note_text,
                std::size_t note_len, ValidationResult& out) {
  if (span.start >= span.end || span.end > note_len) {
    out.push_back({ViolationKind::SpanOutOfBounds, kind});
    return;
  }
  if (utf8::slice(note_text, span.start, span.end) != span.text) {
    out.push_back({ViolationKind::SpanTextMismatch, kind});
  }
}

}  // namespace

ValidationResult validate_event(const SdohEvent& event, std::string_view note_text) {
  ValidationResult out;
  const std::size_t note_len = utf8::length(note_text);

  for (ArgKind kind : kAllArgKinds) {
    if (const Span* span = arg_span(event, kind)) {
      check_span(*span, kind, note_text, note_len, out);
    }
  }

  for (ArgKind kind : {ArgKind::Frequency, ArgKind::Amount, ArgKind::Method}) {
    if (arg_span(event, kind) && !argument_allowed(event.sdoh, kind)) {
      out.push_back({ViolationKind::ForbiddenArgument, kind});
    }
  }

  if (!event.status || event.status->value.empty()) {
    out.push_back({ViolationKind::MissingStatus, ArgKind::Status});
  } else if (!value_in(status_values(event.sdoh), event.status->value)) {
    out.push_back({ViolationKind::InvalidStatusValue, ArgKind::Status});
  }

  if (event.sdoh == SdohType::LivingStatus) {
    if (!event.type || !event.type->value || event.type->value->empty()) {
      out.push_back({ViolationKind::MissingLivingType, ArgKind::Type});
    } else if (!value_in(living_type_values(), *event.type->value)) {
      out.push_back({ViolationKind::InvalidTypeValue, ArgKind::Type});
    }
  } else if (event.type && event.type->value && !event.type->value->empty()) {
    // Only LivingStatus type carries a label; a value elsewhere is invalid.
    out.push_back({ViolationKind::InvalidTypeValue, ArgKind::Type});
  }

  return out;
}

EventKey equivalence_key(const SdohEvent& event) {
  return {event.sdoh, event.trigger.start, event.trigger.end};
}

}  // namespace sdoh
