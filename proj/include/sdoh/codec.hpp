#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sdoh/event_model.hpp"

// The model-facing annotation dialect: a list of JSON-like objects whose span
// fields are written as tuples, (start, end, "text") or
// (start, end, "text", "value"). Rendering emits exactly that dialect;
// parsing additionally accepts strict JSON (arrays for tuples), code fences,
// and surrounding prose.
namespace sdoh::codec {

struct Discarded {
  std::string fragment;
  std::string reason;

  bool operator==(const Discarded&) const = default;
};

// Reasons used for discarded fragments.
inline constexpr std::string_view kNotAnObject = "NotAnObject";
inline constexpr std::string_view kMissingSdoh = "MissingSdoh";
inline constexpr std::string_view kUnknownSdohType = "UnknownSdohType";
inline constexpr std::string_view kMissingTrigger = "MissingTrigger";
inline constexpr std::string_view kMalformedTrigger = "MalformedTrigger";

struct ResponseParseReport {
  std::vector<SdohEvent> events;
  std::vector<Discarded> discarded;
  int repairs = 0;          // syntax fixes applied (coercions, dropped commas, ...)
  bool unparseable = false;  // no list structure found anywhere in the input
};

// Absent fields are omitted entirely; an empty list renders as "[]".
std::string render_events(std::span<const SdohEvent> events);

// Never throws on model output; degrades to discarded entries or, when no
// list structure can be located at all, an unparseable report.
ResponseParseReport parse_response(std::string_view raw);

}  // namespace sdoh::codec
