#pragma once

// Strong-label events and their DESED-style TSV representation:
//   filename<TAB>onset<TAB>offset<TAB>event_label
// Clip ids are file stems; a trailing ".wav" is added on write and stripped
// on read so labels, detections and duration tables join on the same key.

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "sedkit/error.hpp"
#include "sedkit/text.hpp"

namespace sedkit {

struct EventAnnotation {
  std::string clip_id;
  double onset = 0.0;
  double offset = 0.0;
  std::string class_name;

  double duration() const noexcept { return offset - onset; }

  friend bool operator==(const EventAnnotation&, const EventAnnotation&) = default;
};

inline std::string clip_id_from_filename(std::string_view name) {
  constexpr std::string_view ext = ".wav";
  if (name.size() > ext.size() && name.substr(name.size() - ext.size()) == ext)
    name.remove_suffix(ext.size());
  return std::string(name);
}

inline std::string filename_from_clip_id(const std::string& clip_id) { return clip_id + ".wav"; }

inline constexpr std::string_view kLabelHeader = "filename\tonset\toffset\tevent_label";

inline std::string format_label_tsv(const std::vector<EventAnnotation>& events) {
  std::string out(kLabelHeader);
  out += '\n';
  for (const auto& e : events) {
    out += filename_from_clip_id(e.clip_id) + '\t' + text::format_fixed(e.onset, 3) + '\t' +
           text::format_fixed(e.offset, 3) + '\t' + e.class_name + '\n';
  }
  return out;
}

inline void write_label_tsv(const std::vector<EventAnnotation>& events,
                            const std::filesystem::path& path) {
  text::write_file(path.string(), format_label_tsv(events));
}

inline std::vector<EventAnnotation> parse_label_tsv(const std::vector<std::string>& lines) {
  std::vector<EventAnnotation> out;
  std::size_t row = 0;
  for (std::size_t li = 0; li < lines.size(); ++li) {
    if (text::trim(lines[li]).empty()) continue;
    if (li == 0 && lines[li].rfind("filename", 0) == 0) continue;
    ++row;
    const auto fields = text::split(lines[li], '\t');
    if (fields.size() < 4) throw ParseError(row, "expected 4 tab-separated fields");
    const auto onset = text::parse_double(fields[1]);
    const auto offset = text::parse_double(fields[2]);
    if (!onset || !offset) throw ParseError(row, "onset/offset must be numbers");
    const auto label = std::string(text::trim(fields[3]));
    if (label.empty()) throw ParseError(row, "empty event label");
    out.push_back({clip_id_from_filename(text::trim(fields[0])), *onset, *offset, label});
  }
  return out;
}

inline std::vector<EventAnnotation> read_label_tsv(const std::filesystem::path& path) {
  try {
    return parse_label_tsv(text::read_lines(path.string()));
  } catch (const ParseError& e) {
    throw ParseError(e.row(), path.string() + ": " + e.what());
  }
}

/// clip id -> duration in seconds, from `filename<TAB>duration`.
using DurationTable = std::map<std::string, double>;

inline void write_duration_tsv(const DurationTable& durations, const std::filesystem::path& path) {
  std::string out = "filename\tduration\n";
  for (const auto& [clip, dur] : durations)
    out += filename_from_clip_id(clip) + '\t' + text::format_fixed(dur, 3) + '\n';
  text::write_file(path.string(), out);
}

inline DurationTable read_duration_tsv(const std::filesystem::path& path) {
  const auto lines = text::read_lines(path.string());
  DurationTable out;
  std::size_t row = 0;
  for (std::size_t li = 0; li < lines.size(); ++li) {
    if (text::trim(lines[li]).empty()) continue;
    if (li == 0 && lines[li].rfind("filename", 0) == 0) continue;
    ++row;
    const auto fields = text::split(lines[li], '\t');
    const auto dur = fields.size() >= 2 ? text::parse_double(fields[1]) : std::nullopt;
    if (!dur || !(*dur > 0.0))
      throw ParseError(row, path.string() + ": expected filename<TAB>positive duration");
    out[clip_id_from_filename(text::trim(fields[0]))] = *dur;
  }
  return out;
}

}  // namespace sedkit
