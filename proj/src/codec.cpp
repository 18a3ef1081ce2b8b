#include "sdoh/codec.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace sdoh::codec {

namespace {

using nlohmann::json;

std::string escape_json(std::string_view s) {
  std::string out;
  out.reserve(s.size() + 2);
  for (const char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      case '\t': out += "\\t"; break;
      case '\b': out += "\\b"; break;
      case '\f': out += "\\f"; break;
      default:
        if (static_cast<unsigned char>(c) < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof(buf), "\\u%04x", c);
          out += buf;
        } else {
          out += c;
        }
    }
  }
  return out;
}

std::string tuple(const Span& span, const std::optional<std::string>& value) {
  std::ostringstream out;
  out << '(' << span.start << ", " << span.end << ", \"" << escape_json(span.text)
      << '"';
  if (value) out << ", \"" << escape_json(*value) << '"';
  out << ')';
  return out.str();
}

// Single pass over a JSON-ish candidate: rewrites the tuple dialect into
// strict JSON, drops trailing commas, and counts duplicate object keys
// (nlohmann keeps the last occurrence, which is the behavior we want).
struct Rewritten {
  std::string text;
  int repairs = 0;
};

Rewritten rewrite_candidate(std::string_view in) {
  Rewritten out;
  out.text.reserve(in.size());
  bool in_string = false;
  bool escaped = false;
  std::string current_string;
  std::vector<std::set<std::string>> object_keys;

  auto next_nonspace = [&](std::size_t from) -> char {
    for (std::size_t j = from; j < in.size(); ++j) {
      if (!std::isspace(static_cast<unsigned char>(in[j]))) return in[j];
    }
    return '\0';
  };

  for (std::size_t i = 0; i < in.size(); ++i) {
    const char c = in[i];
    if (in_string) {
      out.text += c;
      if (escaped) {
        escaped = false;
        current_string += c;
      } else if (c == '\\') {
        escaped = true;
        current_string += c;
      } else if (c == '"') {
        in_string = false;
        if (!object_keys.empty() && next_nonspace(i + 1) == ':') {
          if (!object_keys.back().insert(current_string).second) {
            ++out.repairs;  // duplicate key, last occurrence wins
          }
        }
      } else {
        current_string += c;
      }
      continue;
    }
    switch (c) {
      case '"':
        in_string = true;
        current_string.clear();
        out.text += c;
        break;
      case '(':
        out.text += '[';
        ++out.repairs;
        break;
      case ')':
        out.text += ']';
        break;
      case '{':
        object_keys.emplace_back();
        out.text += c;
        break;
      case '}':
        if (!object_keys.empty()) object_keys.pop_back();
        out.text += c;
        break;
      case ',': {
        const char next = next_nonspace(i + 1);
        if (next == ']' || next == '}' || next == ')') {
          ++out.repairs;  // trailing comma
        } else {
          out.text += c;
        }
        break;
      }
      default:
        out.text += c;
    }
  }
  return out;
}

// Balanced segment starting at an opening bracket, aware of strings and of
// all three bracket kinds. Returns npos when unbalanced.
std::size_t find_balanced_end(std::string_view s, std::size_t open) {
  int depth = 0;
  bool in_string = false;
  bool escaped = false;
  for (std::size_t i = open; i < s.size(); ++i) {
    const char c = s[i];
    if (in_string) {
      if (escaped) {
        escaped = false;
      } else if (c == '\\') {
        escaped = true;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    switch (c) {
      case '"': in_string = true; break;
      case '[': case '{': case '(': ++depth; break;
      case ']': case '}': case ')':
        --depth;
        if (depth == 0) return i;
        if (depth < 0) return std::string_view::npos;
        break;
      default: break;
    }
  }
  return std::string_view::npos;
}

// Candidate texts to scan for a list, most specific first: fenced code
// blocks, then the raw input.
std::vector<std::string_view> candidates(std::string_view raw) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    const std::size_t open = raw.find("```", pos);
    if (open == std::string_view::npos) break;
    std::size_t body = open + 3;
    const std::size_t eol = raw.find('\n', body);
    const std::size_t close = raw.find("```", body);
    if (close == std::string_view::npos) break;
    if (eol != std::string_view::npos && eol < close) body = eol + 1;  // skip tag
    if (body < close) out.push_back(raw.substr(body, close - body));
    pos = close + 3;
  }
  out.push_back(raw);
  return out;
}

struct SpanParse {
  std::optional<Span> span;
  std::optional<std::string> value;
  int repairs = 0;
  bool ok = false;
};

std::optional<std::size_t> coerce_offset(const json& v, int& repairs) {
  if (v.is_number_unsigned()) return v.get<std::size_t>();
  if (v.is_number_integer()) {
    const auto n = v.get<long long>();
    if (n < 0) return std::nullopt;
    return static_cast<std::size_t>(n);
  }
  if (v.is_number_float()) {
    const double d = v.get<double>();
    if (!(d >= 0 && d < 1e15)) return std::nullopt;
    ++repairs;
    return static_cast<std::size_t>(std::llround(d));
  }
  if (v.is_string()) {
    const auto& s = v.get_ref<const std::string&>();
    if (s.empty() || s.size() > 15 ||
        !std::all_of(s.begin(), s.end(),
                     [](unsigned char c) { return std::isdigit(c) != 0; })) {
      return std::nullopt;
    }
    ++repairs;  // offsets given as strings
    return static_cast<std::size_t>(std::stoull(s));
  }
  return std::nullopt;
}

SpanParse parse_span(const json& v, bool valued) {
  SpanParse r;
  if (!v.is_array() || v.size() < 3) return r;
  const auto start = coerce_offset(v[0], r.repairs);
  const auto end = coerce_offset(v[1], r.repairs);
  if (!start || !end || !v[2].is_string()) return r;
  r.span = Span{*start, *end, v[2].get<std::string>()};
  if (v.size() > 3) {
    if (valued && v[3].is_string()) {
      r.value = to_lower(v[3].get<std::string>());
    } else {
      ++r.repairs;  // unexpected extra element, ignored
    }
  }
  if (v.size() > 4) ++r.repairs;
  r.ok = true;
  return r;
}

void map_object(const json& obj, ResponseParseReport& report) {
  if (!obj.is_object()) {
    report.discarded.push_back({obj.dump(), std::string(kNotAnObject)});
    return;
  }
  const auto sdoh_it = obj.find("sdoh");
  if (sdoh_it == obj.end() || !sdoh_it->is_string()) {
    report.discarded.push_back({obj.dump(), std::string(kMissingSdoh)});
    return;
  }
  const auto sdoh = sdoh_type_from(sdoh_it->get<std::string>());
  if (!sdoh) {
    report.discarded.push_back({obj.dump(), std::string(kUnknownSdohType)});
    return;
  }

  SdohEvent event;
  event.sdoh = *sdoh;

  const auto trig_it = obj.find("trigger");
  if (trig_it == obj.end() || trig_it->is_null()) {
    report.discarded.push_back({obj.dump(), std::string(kMissingTrigger)});
    return;
  }
  SpanParse trig = parse_span(*trig_it, /*valued=*/false);
  if (!trig.ok) {
    report.discarded.push_back({obj.dump(), std::string(kMalformedTrigger)});
    return;
  }
  report.repairs += trig.repairs;
  event.trigger = *trig.span;

  for (ArgKind kind : kAllArgKinds) {
    if (kind == ArgKind::Trigger) continue;
    const auto it = obj.find(std::string(to_string(kind)));
    if (it == obj.end() || it->is_null()) continue;  // null means not annotated
    // Type tuples may carry a 4th element for any category; validation
    // decides whether the value is admissible.
    const bool valued = kind == ArgKind::Status || kind == ArgKind::Type;
    SpanParse arg = parse_span(*it, valued);
    if (!arg.ok) {
      ++report.repairs;  // malformed optional argument, stripped
      continue;
    }
    report.repairs += arg.repairs;
    ArgVariant variant{*arg.span, std::nullopt};
    if (kind == ArgKind::Status) variant.value = arg.value.value_or("");
    if (kind == ArgKind::Type) variant.value = arg.value;
    set_arg(event, kind, variant);
  }
  report.events.push_back(std::move(event));
}

}  // namespace

std::string render_events(std::span<const SdohEvent> events) {
  if (events.empty()) return "[]";
  std::string out = "[\n";
  for (std::size_t i = 0; i < events.size(); ++i) {
    const SdohEvent& event = events[i];
    std::vector<std::string> fields;
    fields.push_back("    \"sdoh\": \"" + std::string(to_string(event.sdoh)) + '"');
    for (ArgKind kind : kAllArgKinds) {
      const auto variant = arg_variant(event, kind);
      if (!variant) continue;
      fields.push_back("    \"" + std::string(to_string(kind)) +
                       "\": " + tuple(variant->span, variant->value));
    }
    out += "  {\n";
    for (std::size_t f = 0; f < fields.size(); ++f) {
      out += fields[f];
      if (f + 1 < fields.size()) out += ",\n";
    }
    out += '}';
    out += i + 1 < events.size() ? ",\n" : "\n";
  }
  out += ']';
  return out;
}

ResponseParseReport parse_response(std::string_view raw) {
  ResponseParseReport report;

  json parsed;
  bool found = false;
  int syntax_repairs = 0;
  bool wrapped_object = false;

  for (const std::string_view candidate : candidates(raw)) {
    // Structural openers in order of appearance; the first one that parses
    // wins, so an outer object beats the arrays nested inside it.
    std::size_t pos = candidate.find_first_of("[{");
    for (int attempts = 0; pos != std::string_view::npos && attempts < 64;
         ++attempts, pos = candidate.find_first_of("[{", pos + 1)) {
      const std::size_t close = find_balanced_end(candidate, pos);
      if (close == std::string_view::npos) continue;
      Rewritten rewritten = rewrite_candidate(candidate.substr(pos, close - pos + 1));
      json j = json::parse(rewritten.text, nullptr, /*allow_exceptions=*/false);
      if (j.is_discarded()) continue;
      if (!j.is_array() && !j.is_object()) continue;
      wrapped_object = j.is_object();
      parsed = std::move(j);
      syntax_repairs = rewritten.repairs;
      found = true;
      break;
    }
    if (found) break;
  }

  if (!found) {
    report.unparseable = true;
    return report;
  }
  report.repairs += syntax_repairs;
  if (wrapped_object) {
    ++report.repairs;  // single object where a list was expected
    map_object(parsed, report);
    return report;
  }
  for (const json& element : parsed) {
    map_object(element, report);
  }
  return report;
}

}  // namespace sdoh::codec
