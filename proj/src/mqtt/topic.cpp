#include "edgebench/mqtt/topic.hpp"

#include <cstdint>

namespace edgebench::mqtt {

const char* to_string(TopicViolation v) {
  switch (v) {
    case TopicViolation::Empty: return "topic is empty";
    case TopicViolation::TooLong: return "topic exceeds 65535 bytes";
    case TopicViolation::InvalidUtf8: return "topic is not valid UTF-8";
    case TopicViolation::NullCharacter: return "topic contains U+0000";
    case TopicViolation::WildcardInName: return "wildcard in topic name";
    case TopicViolation::HashNotLast: return "'#' is not the final segment";
    case TopicViolation::HashNotWholeSegment: return "'#' does not occupy a whole segment";
    case TopicViolation::PlusNotWholeSegment: return "'+' does not occupy a whole segment";
  }
  return "unknown";
}

bool is_valid_utf8(std::string_view s) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(s.data());
  const std::size_t n = s.size();
  std::size_t i = 0;
  while (i < n) {
    const std::uint8_t c = p[i];
    if (c == 0) return false;
    if (c < 0x80) {
      ++i;
      continue;
    }
    std::size_t len;
    std::uint32_t cp;
    if ((c & 0xE0) == 0xC0) {
      len = 2;
      cp = c & 0x1F;
    } else if ((c & 0xF0) == 0xE0) {
      len = 3;
      cp = c & 0x0F;
    } else if ((c & 0xF8) == 0xF0) {
      len = 4;
      cp = c & 0x07;
    } else {
      return false;
    }
    if (i + len > n) return false;
    for (std::size_t k = 1; k < len; ++k) {
      if ((p[i + k] & 0xC0) != 0x80) return false;
      cp = (cp << 6) | (p[i + k] & 0x3F);
    }
    // overlong forms, surrogates, out of range
    if ((len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) || (len == 4 && cp < 0x10000)) return false;
    if (cp >= 0xD800 && cp <= 0xDFFF) return false;
    if (cp > 0x10FFFF) return false;
    i += len;
  }
  return true;
}

std::optional<TopicViolation> validate_topic(std::string_view s, TopicKind kind) {
  if (s.empty()) return TopicViolation::Empty;
  if (s.size() > 65535) return TopicViolation::TooLong;
  if (s.find('\0') != std::string_view::npos) return TopicViolation::NullCharacter;
  if (!is_valid_utf8(s)) return TopicViolation::InvalidUtf8;

  if (kind == TopicKind::Name) {
    if (s.find_first_of("+#") != std::string_view::npos) return TopicViolation::WildcardInName;
    return std::nullopt;
  }

  std::size_t start = 0;
  while (true) {
    const std::size_t slash = s.find('/', start);
    const bool last = slash == std::string_view::npos;
    const std::string_view seg = s.substr(start, last ? std::string_view::npos : slash - start);
    if (seg.find('#') != std::string_view::npos) {
      if (seg.size() != 1) return TopicViolation::HashNotWholeSegment;
      if (!last) return TopicViolation::HashNotLast;
    }
    if (seg.find('+') != std::string_view::npos && seg.size() != 1) return TopicViolation::PlusNotWholeSegment;
    if (last) break;
    start = slash + 1;
  }
  return std::nullopt;
}

bool topic_matches(std::string_view filter, std::string_view name) {
  if (!name.empty() && name.front() == '$' && !filter.empty() && (filter.front() == '+' || filter.front() == '#'))
    return false;

  std::size_t fi = 0;
  std::size_t ni = 0;
  while (true) {
    const std::size_t fslash = filter.find('/', fi);
    const std::string_view fseg = filter.substr(fi, fslash == std::string_view::npos ? std::string_view::npos : fslash - fi);
    if (fseg == "#") return true;  // remainder, including zero further levels

    if (ni == std::string_view::npos) {
      return false;  // name exhausted but filter has more non-'#' levels
    }
    const std::size_t nslash = name.find('/', ni);
    const std::string_view nseg = name.substr(ni, nslash == std::string_view::npos ? std::string_view::npos : nslash - ni);
    if (fseg != "+" && fseg != nseg) return false;

    const bool f_end = fslash == std::string_view::npos;
    const bool n_end = nslash == std::string_view::npos;
    if (f_end && n_end) return true;
    if (f_end) return false;
    fi = fslash + 1;
    if (n_end) {
      // "a/#" matches "a": the only remaining filter level must be '#'
      ni = std::string_view::npos;
    } else {
      ni = nslash + 1;
    }
  }
}

}  // namespace edgebench::mqtt
