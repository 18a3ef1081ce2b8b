#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sdoh/errors.hpp"
#include "sdoh/event_model.hpp"

// BRAT standoff format: a .txt note paired with a .ann file of tab-separated
// records. T lines are text-bound entities, E lines connect a trigger entity
// with role-labeled argument entities, A lines attach a value to an entity.
namespace sdoh::brat {

struct Entity {
  std::string id;  // "T" + number
  std::string label;
  std::size_t start = 0;  // code points into the companion note
  std::size_t end = 0;
  std::string text;

  bool operator==(const Entity&) const = default;
};

struct EventArg {
  std::string role;  // as written, possibly with a numeric suffix (Type2)
  std::string entity_id;

  bool operator==(const EventArg&) const = default;
};

struct EventLine {
  std::string id;  // "E" + number
  std::string trigger_label;
  std::string trigger_ref;
  std::vector<EventArg> args;

  bool operator==(const EventLine&) const = default;
};

struct Attribute {
  std::string id;  // "A" + number
  std::string name;
  std::string target;  // entity id
  std::string value;

  bool operator==(const Attribute&) const = default;
};

struct Document {
  std::string doc_id;
  std::vector<Entity> entities;
  std::vector<EventLine> events;
  std::vector<Attribute> attributes;
  // Line types we do not interpret (#, R, N, ...) preserved verbatim so a
  // parse/serialize round trip keeps them.
  std::vector<std::string> extras;

  bool operator==(const Document&) const = default;

  const Entity* find_entity(std::string_view id) const;
  bool empty() const {
    return entities.empty() && events.empty() && attributes.empty() && extras.empty();
  }
};

// Same records regardless of file order.
bool record_set_equal(const Document& a, const Document& b);

enum class BratErrorKind {
  MalformedLine,
  DanglingReference,
  OffsetOutOfBounds,
  SpanTextMismatch,
  UnknownRole,
  UnknownTriggerLabel,
};

class BratError : public DataError {
 public:
  BratError(BratErrorKind kind, int line_no, const std::string& message)
      : DataError(message), kind_(kind), line_no_(line_no) {}

  BratErrorKind kind() const { return kind_; }
  int line_no() const { return line_no_; }  // 1-based; 0 when not line-tied

 private:
  BratErrorKind kind_;
  int line_no_;
};

// Maps between event argument kinds and the standoff label inventory. The
// shared-task corpus is not distributed with this repository, so the exact
// names are configurable; defaults follow the guideline vocabulary
// (StatusTime/StatusTimeVal, StatusEmploy/StatusEmployVal, TypeLiving/...).
class RoleMap {
 public:
  static RoleMap defaults();
  static RoleMap load(const std::filesystem::path& json_file);

  std::string role_name(ArgKind kind) const;
  std::optional<ArgKind> kind_of_role(std::string_view role) const;  // strips digits
  std::string entity_label(SdohType type, ArgKind kind) const;
  std::optional<std::string> attribute_name(SdohType type, ArgKind kind) const;

 private:
  std::map<ArgKind, std::string> roles_;
  // kind -> ("*" or SdohType name) -> label / attribute name
  std::map<ArgKind, std::map<std::string, std::string>> labels_;
  std::map<ArgKind, std::map<std::string, std::string>> attributes_;
};

// Throws BratError on malformed records, dangling references, bad offsets,
// or span/text disagreement. Never crashes on arbitrary byte input.
Document parse_brat(std::string_view ann_text, std::string_view note_text,
                    std::string doc_id = "");

// Tab-separated standoff text; records emitted in ascending numeric id order,
// extras last. parse_brat(serialize_brat(d), txt) == d for well-formed d.
std::string serialize_brat(const Document& doc);

std::vector<SdohEvent> brat_to_events(const Document& doc, std::string_view note_text,
                                      const RoleMap& role_map = RoleMap::defaults());

Document events_to_brat(std::span<const SdohEvent> events, std::string_view note_text,
                        const RoleMap& role_map = RoleMap::defaults());

}  // namespace sdoh::brat
