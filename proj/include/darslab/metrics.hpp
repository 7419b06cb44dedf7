#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "darslab/errors.hpp"

namespace darslab {

// Shortest decimal text that round-trips the exact double. Used everywhere a
// float goes into a file, so identical numbers always produce identical
// bytes regardless of locale or stream state.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

// One row of the metrics log. k distinguishes families like pass@k; it is
// empty for scalar metrics.
struct MetricsRecord {
  std::string run_id;
  std::string preset;
  std::uint64_t seed = 0;
  int step = 0;
  std::string metric;
  std::optional<int> k;
  double value = 0.0;
};

inline constexpr const char* kMetricsHeader = "run_id,preset,seed,step,metric,k,value";

inline std::string format_metrics_record(const MetricsRecord& r) {
  std::ostringstream line;
  line << r.run_id << ',' << r.preset << ',' << r.seed << ',' << r.step << ',' << r.metric << ',';
  if (r.k) line << *r.k;
  line << ',' << format_double(r.value);
  return line.str();
}

// Append-only CSV writer, one flushed line per record; a crash can lose at
// most a partial final line, which the reader tolerates.
class MetricsWriter {
 public:
  MetricsWriter(const std::filesystem::path& path, bool append)
      : out_(path, append ? std::ios::app : std::ios::trunc) {
    if (!out_) throw IoError("metrics-write: cannot open " + path.string());
    if (!append) {
      out_ << kMetricsHeader << '\n';
      out_.flush();
    }
  }

  void write(const MetricsRecord& r) {
    out_ << format_metrics_record(r) << '\n';
    out_.flush();
    if (!out_) throw IoError("metrics-write: write failed");
  }

 private:
  std::ofstream out_;
};

namespace detail {

inline std::optional<MetricsRecord> parse_metrics_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  fields.push_back(cur);
  if (fields.size() != 7) return std::nullopt;
  MetricsRecord r;
  r.run_id = fields[0];
  r.preset = fields[1];
  try {
    r.seed = std::stoull(fields[2]);
    r.step = std::stoi(fields[3]);
  } catch (const std::exception&) {
    return std::nullopt;
  }
  r.metric = fields[4];
  if (!fields[5].empty()) {
    try {
      r.k = std::stoi(fields[5]);
    } catch (const std::exception&) {
      return std::nullopt;
    }
  }
  const char* b = fields[6].data();
  const char* e = b + fields[6].size();
  const auto res = std::from_chars(b, e, r.value);
  if (res.ec != std::errc() || res.ptr != e) return std::nullopt;
  return r;
}

}  // namespace detail

// Reads a metrics file back. A malformed final line (truncated by a crash)
// is dropped silently; a malformed line anywhere else is an error.
inline std::vector<MetricsRecord> read_metrics(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("metrics-parse: cannot open " + path.string());
  std::vector<MetricsRecord> out;
  std::string line;
  bool pending_bad = false;
  std::string bad_line;
  bool first = true;
  while (std::getline(in, line)) {
    if (first) {
      first = false;
      if (line == kMetricsHeader) continue;
    }
    if (pending_bad)
      throw IoError("metrics-parse: malformed line: " + bad_line);
    if (line.empty()) continue;
    auto rec = detail::parse_metrics_line(line);
    if (!rec) {
      pending_bad = true;  // tolerated only if it turns out to be the last line
      bad_line = line;
      continue;
    }
    out.push_back(std::move(*rec));
  }
  return out;
}

}  // namespace darslab
