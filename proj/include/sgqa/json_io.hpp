#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "sgqa/error.hpp"
#include "sgqa/rng.hpp"

namespace sgqa {

using Json = nlohmann::json;

inline constexpr const char* kToolName = "sgqa";
inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr const char* kHeaderKey = "sgqa_header";

/// One parsed JSON value plus where it came from, for diagnostics.
struct Document {
  Json value;
  std::string source;
  std::size_t line = 0;  // 1-based; 0 when the whole file is one document

  std::string where() const {
    return line == 0 ? source : source + ":" + std::to_string(line);
  }
};

inline bool is_header(const Json& j) { return j.is_object() && j.contains(kHeaderKey); }

/// Parses `text` either as a single JSON value or, failing that, as JSON
/// Lines. Top-level arrays are flattened one level and header lines dropped.
inline std::vector<Document> parse_documents(const std::string& text, const std::string& source) {
  std::vector<Document> out;
  auto push = [&](Json j, std::size_t line) {
    if (is_header(j)) return;
    if (j.is_array()) {
      for (auto& e : j) out.push_back({std::move(e), source, line});
    } else {
      out.push_back({std::move(j), source, line});
    }
  };

  Json whole = Json::parse(text, nullptr, false);
  if (!whole.is_discarded()) {
    push(std::move(whole), 0);
    return out;
  }
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Json j = Json::parse(line, nullptr, false);
    if (j.is_discarded()) throw DataError(source + ":" + std::to_string(lineno) + ": malformed JSON");
    push(std::move(j), lineno);
  }
  return out;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(path.string() + ": cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::vector<Document> read_documents(const std::filesystem::path& path) {
  return parse_documents(read_file(path), path.string());
}

/// Stable hex digest of a JSON value (keys are already sorted by nlohmann).
inline std::string digest(const Json& j) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(j.dump())));
  return buf;
}

/// First line of every file the tool writes.
inline std::string header_line(const std::string& kind, std::uint64_t seed, const Json& config) {
  Json h;
  h[kHeaderKey] = {{"tool", kToolName},
                   {"version", kToolVersion},
                   {"kind", kind},
                   {"seed", seed},
                   {"config_digest", digest(config)}};
  return h.dump();
}

}  // namespace sgqa
