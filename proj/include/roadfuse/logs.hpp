#pragma once

/// \file
/// \brief Line-delimited JSON logs. Every file opens with a header line
/// {"schema": ..., "version": N}; readers reject unknown schemas and versions.

#include <filesystem>
#include <fstream>
#include <functional>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "roadfuse/sensors.hpp"

namespace roadfuse {

inline constexpr int kLogVersion = 1;
inline constexpr const char* kFramesSchema = "roadfuse.frames";
inline constexpr const char* kTracksSchema = "roadfuse.tracks";
inline constexpr const char* kTruthSchema = "roadfuse.truth";

/// Malformed or truncated log; `line` is 1-based.
class LogError : public std::runtime_error {
 public:
  LogError(const std::string& file, std::size_t line, const std::string& what)
      : std::runtime_error(file + ":" + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class JsonlWriter {
 public:
  JsonlWriter(const std::filesystem::path& path, const std::string& schema,
              nlohmann::json header_extra = nlohmann::json::object());
  void write(const nlohmann::json& record);
  void close();

 private:
  std::ofstream out_;
};

/// Calls `on_record(record, line)` for each line after the header and returns
/// the header. Throws LogError on a bad header, a malformed line or a file
/// that does not end with a newline.
/// `on_header`, when given, sees the header before any record.
nlohmann::json read_jsonl(const std::filesystem::path& path, const std::string& schema,
                          const std::function<void(const nlohmann::json&, std::size_t)>& on_record,
                          const std::function<void(const nlohmann::json&)>& on_header = {});

nlohmann::json frame_to_json(const StampedFrame& frame);
StampedFrame frame_from_json(const nlohmann::json& j);

nlohmann::json box3d_to_json(const Box3D& box);
Box3D box3d_from_json(const nlohmann::json& j);

}  // namespace roadfuse
