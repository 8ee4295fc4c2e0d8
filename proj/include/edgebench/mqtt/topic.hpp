#pragma once

#include <optional>
#include <string_view>

namespace edgebench::mqtt {

enum class TopicKind { Name, Filter };

enum class TopicViolation {
  Empty,
  TooLong,
  InvalidUtf8,
  NullCharacter,
  WildcardInName,
  HashNotLast,
  HashNotWholeSegment,
  PlusNotWholeSegment,
};

const char* to_string(TopicViolation v);

/// Checks MQTT 3.1.1 UTF-8 string rules: well-formed, no surrogates, no U+0000.
bool is_valid_utf8(std::string_view s);

/// Returns the first violated rule, or nullopt when `s` is a valid topic of `kind`.
std::optional<TopicViolation> validate_topic(std::string_view s, TopicKind kind);

/// Standard MQTT segment matching. Both arguments must already be valid.
/// Topics starting with '$' are not matched by a leading wildcard.
bool topic_matches(std::string_view filter, std::string_view name);

}  // namespace edgebench::mqtt
