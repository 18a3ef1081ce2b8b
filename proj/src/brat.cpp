#include "sdoh/brat.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "sdoh/utf8.hpp"

namespace sdoh::brat {

namespace {

bool all_digits(std::string_view s) {
  if (s.empty()) return false;
  return std::all_of(s.begin(), s.end(),
                     [](unsigned char c) { return std::isdigit(c) != 0; });
}

bool is_record_id(std::string_view s, char prefix) {
  return s.size() >= 2 && s[0] == prefix && all_digits(s.substr(1));
}

long id_number(std::string_view id) {
  long n = 0;
  auto [ptr, ec] = std::from_chars(id.data() + 1, id.data() + id.size(), n);
  (void)ptr;
  return ec == std::errc() ? n : 0;
}

std::optional<std::size_t> parse_offset(std::string_view s) {
  if (!all_digits(s)) return std::nullopt;
  std::size_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  (void)ptr;
  if (ec != std::errc()) return std::nullopt;
  return v;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> parts;
  std::size_t pos = 0;
  while (true) {
    const std::size_t next = s.find(sep, pos);
    if (next == std::string_view::npos) {
      parts.push_back(s.substr(pos));
      break;
    }
    parts.push_back(s.substr(pos, next - pos));
    pos = next + 1;
  }
  return parts;
}

[[noreturn]] void fail(BratErrorKind kind, int line_no, const std::string& msg) {
  throw BratError(kind, line_no, msg);
}

}  // namespace

const Entity* Document::find_entity(std::string_view id) const {
  for (const Entity& e : entities) {
    if (e.id == id) return &e;
  }
  return nullptr;
}

bool record_set_equal(const Document& a, const Document& b) {
  auto sorted = [](const Document& d) {
    Document out = d;
    auto by_id = [](const auto& x, const auto& y) { return x.id < y.id; };
    std::sort(out.entities.begin(), out.entities.end(), by_id);
    std::sort(out.events.begin(), out.events.end(), by_id);
    std::sort(out.attributes.begin(), out.attributes.end(), by_id);
    std::sort(out.extras.begin(), out.extras.end());
    return out;
  };
  const Document sa = sorted(a);
  const Document sb = sorted(b);
  return sa.entities == sb.entities && sa.events == sb.events &&
         sa.attributes == sb.attributes && sa.extras == sb.extras;
}

RoleMap RoleMap::defaults() {
  RoleMap m;
  for (ArgKind kind : kAllArgKinds) {
    if (kind == ArgKind::Trigger) continue;
    std::string role(to_string(kind));
    role[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(role[0])));
    m.roles_[kind] = role;
    m.labels_[kind]["*"] = role;
  }
  m.labels_[ArgKind::Status]["*"] = "StatusTime";
  m.labels_[ArgKind::Status]["Employment"] = "StatusEmploy";
  m.labels_[ArgKind::Type]["LivingStatus"] = "TypeLiving";
  m.attributes_[ArgKind::Status]["*"] = "StatusTimeVal";
  m.attributes_[ArgKind::Status]["Employment"] = "StatusEmployVal";
  m.attributes_[ArgKind::Type]["LivingStatus"] = "TypeLivingVal";
  return m;
}

RoleMap RoleMap::load(const std::filesystem::path& json_file) {
  std::ifstream in(json_file, std::ios::binary);
  if (!in) throw ConfigError("cannot open role map: " + json_file.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("bad role map " + json_file.string() + ": " + e.what());
  }
  RoleMap m = defaults();
  auto read_table = [&](const char* section,
                        std::map<ArgKind, std::map<std::string, std::string>>& table) {
    if (!j.contains(section)) return;
    for (const auto& [kind_name, entry] : j.at(section).items()) {
      const auto kind = arg_kind_from(kind_name);
      if (!kind) throw ConfigError("role map: unknown argument kind " + kind_name);
      if (entry.is_string()) {
        table[*kind]["*"] = entry.get<std::string>();
      } else {
        for (const auto& [type_name, label] : entry.items()) {
          table[*kind][type_name] = label.get<std::string>();
        }
      }
    }
  };
  if (j.contains("roles")) {
    for (const auto& [kind_name, role] : j.at("roles").items()) {
      const auto kind = arg_kind_from(kind_name);
      if (!kind) throw ConfigError("role map: unknown argument kind " + kind_name);
      m.roles_[*kind] = role.get<std::string>();
    }
  }
  read_table("labels", m.labels_);
  read_table("attributes", m.attributes_);
  return m;
}

std::string RoleMap::role_name(ArgKind kind) const {
  const auto it = roles_.find(kind);
  return it != roles_.end() ? it->second : std::string(to_string(kind));
}

std::optional<ArgKind> RoleMap::kind_of_role(std::string_view role) const {
  // BRAT deduplicates repeated roles with numeric suffixes (Type2, Type3).
  while (!role.empty() && std::isdigit(static_cast<unsigned char>(role.back()))) {
    role.remove_suffix(1);
  }
  for (const auto& [kind, name] : roles_) {
    if (name == role) return kind;
  }
  return std::nullopt;
}

std::string RoleMap::entity_label(SdohType type, ArgKind kind) const {
  if (kind == ArgKind::Trigger) return std::string(to_string(type));
  const auto it = labels_.find(kind);
  if (it != labels_.end()) {
    const auto specific = it->second.find(std::string(to_string(type)));
    if (specific != it->second.end()) return specific->second;
    const auto any = it->second.find("*");
    if (any != it->second.end()) return any->second;
  }
  return role_name(kind);
}

std::optional<std::string> RoleMap::attribute_name(SdohType type, ArgKind kind) const {
  const auto it = attributes_.find(kind);
  if (it == attributes_.end()) return std::nullopt;
  const auto specific = it->second.find(std::string(to_string(type)));
  if (specific != it->second.end()) return specific->second;
  const auto any = it->second.find("*");
  if (any != it->second.end()) return any->second;
  return std::nullopt;
}

Document parse_brat(std::string_view ann_text, std::string_view note_text,
                    std::string doc_id) {
  Document doc;
  doc.doc_id = std::move(doc_id);
  const std::size_t note_len = utf8::length(note_text);
  std::set<std::string, std::less<>> seen_ids;
  std::set<std::pair<std::string, std::string>> seen_attr_keys;

  int line_no = 0;
  for (std::string_view line : split(ann_text, '\n')) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;

    const std::size_t tab = line.find('\t');
    const std::string_view id = line.substr(0, tab == std::string_view::npos ? line.size() : tab);
    const bool typed = is_record_id(id, 'T') || is_record_id(id, 'E') || is_record_id(id, 'A');
    if (!typed) {
      doc.extras.emplace_back(line);
      continue;
    }
    if (tab == std::string_view::npos) {
      fail(BratErrorKind::MalformedLine, line_no, "missing tab after id " + std::string(id));
    }
    if (!seen_ids.insert(std::string(id)).second) {
      fail(BratErrorKind::MalformedLine, line_no, "duplicate id " + std::string(id));
    }
    const std::string_view rest = line.substr(tab + 1);

    if (id[0] == 'T') {
      const std::size_t tab2 = rest.find('\t');
      if (tab2 == std::string_view::npos) {
        fail(BratErrorKind::MalformedLine, line_no, "entity line needs a text field");
      }
      const std::string_view header = rest.substr(0, tab2);
      const std::string_view text = rest.substr(tab2 + 1);
      if (header.find(';') != std::string_view::npos) {
        fail(BratErrorKind::MalformedLine, line_no,
             "discontinuous spans are not supported");
      }
      const auto fields = split(header, ' ');
      if (fields.size() != 3 || fields[0].empty()) {
        fail(BratErrorKind::MalformedLine, line_no,
             "entity header must be 'label start end'");
      }
      const auto start = parse_offset(fields[1]);
      const auto end = parse_offset(fields[2]);
      if (!start || !end) {
        fail(BratErrorKind::MalformedLine, line_no, "offsets must be integers");
      }
      if (*start >= *end || *end > note_len) {
        fail(BratErrorKind::OffsetOutOfBounds, line_no,
             "offsets [" + std::string(fields[1]) + ", " + std::string(fields[2]) +
                 ") out of bounds for note of length " + std::to_string(note_len));
      }
      const std::string_view actual = utf8::slice(note_text, *start, *end);
      if (actual != text) {
        fail(BratErrorKind::SpanTextMismatch, line_no,
             "span text \"" + std::string(text) + "\" does not match note text \"" +
                 std::string(actual) + "\"");
      }
      doc.entities.push_back(
          {std::string(id), std::string(fields[0]), *start, *end, std::string(text)});
    } else if (id[0] == 'E') {
      if (rest.find('\t') != std::string_view::npos) {
        fail(BratErrorKind::MalformedLine, line_no, "unexpected tab in event line");
      }
      EventLine ev;
      ev.id = std::string(id);
      bool first = true;
      for (std::string_view tok : split(rest, ' ')) {
        if (tok.empty()) {
          fail(BratErrorKind::MalformedLine, line_no, "empty token in event line");
        }
        const std::size_t colon = tok.find(':');
        if (colon == std::string_view::npos || colon == 0 || colon + 1 == tok.size()) {
          fail(BratErrorKind::MalformedLine, line_no,
               "event token must be Role:Id, got " + std::string(tok));
        }
        const std::string role(tok.substr(0, colon));
        const std::string ref(tok.substr(colon + 1));
        if (first) {
          ev.trigger_label = role;
          ev.trigger_ref = ref;
          first = false;
        } else {
          ev.args.push_back({role, ref});
        }
      }
      if (first) fail(BratErrorKind::MalformedLine, line_no, "empty event line");
      doc.events.push_back(std::move(ev));
    } else {  // 'A'
      if (rest.find('\t') != std::string_view::npos) {
        fail(BratErrorKind::MalformedLine, line_no, "unexpected tab in attribute line");
      }
      const auto fields = split(rest, ' ');
      if (fields.size() < 3 || fields[0].empty() || fields[1].empty()) {
        fail(BratErrorKind::MalformedLine, line_no,
             "attribute line must be 'name target value'");
      }
      std::string value(fields[2]);
      for (std::size_t i = 3; i < fields.size(); ++i) {
        value += ' ';
        value += fields[i];
      }
      Attribute attr{std::string(id), std::string(fields[0]), std::string(fields[1]),
                     std::move(value)};
      if (!seen_attr_keys.insert({attr.name, attr.target}).second) {
        fail(BratErrorKind::MalformedLine, line_no,
             "duplicate attribute " + attr.name + " on " + attr.target);
      }
      doc.attributes.push_back(std::move(attr));
    }
  }

  for (const EventLine& ev : doc.events) {
    if (!doc.find_entity(ev.trigger_ref)) {
      fail(BratErrorKind::DanglingReference, 0,
           ev.id + " references missing entity " + ev.trigger_ref);
    }
    for (const EventArg& arg : ev.args) {
      if (!doc.find_entity(arg.entity_id)) {
        fail(BratErrorKind::DanglingReference, 0,
             ev.id + " references missing entity " + arg.entity_id);
      }
    }
  }
  for (const Attribute& attr : doc.attributes) {
    if (!doc.find_entity(attr.target)) {
      fail(BratErrorKind::DanglingReference, 0,
           attr.id + " targets missing entity " + attr.target);
    }
  }
  return doc;
}

std::string serialize_brat(const Document& doc) {
  auto by_numeric_id = [](const auto& a, const auto& b) {
    const long na = id_number(a.id);
    const long nb = id_number(b.id);
    return na != nb ? na < nb : a.id < b.id;
  };

  std::vector<Entity> entities = doc.entities;
  std::vector<EventLine> events = doc.events;
  std::vector<Attribute> attributes = doc.attributes;
  std::sort(entities.begin(), entities.end(), by_numeric_id);
  std::sort(events.begin(), events.end(), by_numeric_id);
  std::sort(attributes.begin(), attributes.end(), by_numeric_id);

  std::ostringstream out;
  for (const Entity& e : entities) {
    out << e.id << '\t' << e.label << ' ' << e.start << ' ' << e.end << '\t' << e.text
        << '\n';
  }
  for (const EventLine& ev : events) {
    out << ev.id << '\t' << ev.trigger_label << ':' << ev.trigger_ref;
    for (const EventArg& arg : ev.args) {
      out << ' ' << arg.role << ':' << arg.entity_id;
    }
    out << '\n';
  }
  for (const Attribute& a : attributes) {
    out << a.id << '\t' << a.name << ' ' << a.target << ' ' << a.value << '\n';
  }
  for (const std::string& extra : doc.extras) {
    out << extra << '\n';
  }
  return out.str();
}

std::vector<SdohEvent> brat_to_events(const Document& doc, std::string_view note_text,
                                      const RoleMap& role_map) {
  (void)note_text;
  std::vector<SdohEvent> events;
  events.reserve(doc.events.size());

  auto attribute_value = [&](const std::string& entity_id,
                             const std::optional<std::string>& preferred)
      -> std::optional<std::string> {
    if (preferred) {
      for (const Attribute& a : doc.attributes) {
        if (a.target == entity_id && a.name == *preferred) return a.value;
      }
    }
    for (const Attribute& a : doc.attributes) {
      if (a.target == entity_id) return a.value;
    }
    return std::nullopt;
  };

  for (const EventLine& line : doc.events) {
    const auto sdoh = sdoh_type_from(line.trigger_label);
    if (!sdoh) {
      fail(BratErrorKind::UnknownTriggerLabel, 0,
           line.id + ": unknown trigger label " + line.trigger_label);
    }
    const Entity* trig = doc.find_entity(line.trigger_ref);
    SdohEvent event;
    event.sdoh = *sdoh;
    event.trigger = {trig->start, trig->end, trig->text};

    for (const EventArg& arg : line.args) {
      const auto kind = role_map.kind_of_role(arg.role);
      if (!kind || *kind == ArgKind::Trigger) {
        fail(BratErrorKind::UnknownRole, 0, line.id + ": unknown role " + arg.role);
      }
      if (arg_span(event, *kind)) continue;  // keep the first of a repeated role
      const Entity* ent = doc.find_entity(arg.entity_id);
      ArgVariant variant{{ent->start, ent->end, ent->text}, std::nullopt};
      if (*kind == ArgKind::Status) {
        const auto value =
            attribute_value(ent->id, role_map.attribute_name(*sdoh, ArgKind::Status));
        variant.value = to_lower(value.value_or(""));
      } else if (*kind == ArgKind::Type) {
        if (const auto value = attribute_value(
                ent->id, role_map.attribute_name(*sdoh, ArgKind::Type))) {
          variant.value = to_lower(*value);
        }
      }
      set_arg(event, *kind, variant);
    }
    events.push_back(std::move(event));
  }
  return events;
}

Document events_to_brat(std::span<const SdohEvent> events, std::string_view note_text,
                        const RoleMap& role_map) {
  Document doc;
  const std::size_t note_len = utf8::length(note_text);
  int next_t = 1;
  int next_e = 1;
  int next_a = 1;

  auto add_entity = [&](const Span& span, const std::string& label) -> std::string {
    if (span.start >= span.end || span.end > note_len) {
      fail(BratErrorKind::OffsetOutOfBounds, 0,
           "span [" + std::to_string(span.start) + ", " + std::to_string(span.end) +
               ") out of bounds for note of length " + std::to_string(note_len));
    }
    std::string id = "T" + std::to_string(next_t++);
    doc.entities.push_back({id, label, span.start, span.end, span.text});
    return id;
  };

  for (const SdohEvent& event : events) {
    EventLine line;
    line.id = "E" + std::to_string(next_e++);
    line.trigger_label = std::string(to_string(event.sdoh));
    // Shared spans across events get their own T records; no deduplication.
    line.trigger_ref = add_entity(event.trigger, line.trigger_label);

    for (ArgKind kind : kAllArgKinds) {
      if (kind == ArgKind::Trigger) continue;
      const auto variant = arg_variant(event, kind);
      if (!variant) continue;
      const std::string entity_id =
          add_entity(variant->span, role_map.entity_label(event.sdoh, kind));
      line.args.push_back({role_map.role_name(kind), entity_id});
      // Value attributes: status always, type only for LivingStatus.
      const bool valued = kind == ArgKind::Status ||
                          (kind == ArgKind::Type && event.sdoh == SdohType::LivingStatus);
      if (valued && variant->value && !variant->value->empty()) {
        if (const auto attr_name = role_map.attribute_name(event.sdoh, kind)) {
          doc.attributes.push_back(
              {"A" + std::to_string(next_a++), *attr_name, entity_id, *variant->value});
        }
      }
    }
    doc.events.push_back(std::move(line));
  }
  return doc;
}

}  // namespace sdoh::brat
