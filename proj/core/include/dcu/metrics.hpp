#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <string>

namespace dcu {

/// Append-only `run_id,step,metric,value,wall_ms` table. Values use the
/// shortest round-trip decimal form. wall_ms is milliseconds since the writer
/// was opened, or 0 when wall-clock recording is off (byte-stable output).
class MetricsWriter {
 public:
  MetricsWriter(const std::filesystem::path& path, std::string run_id, bool wall_clock);

  void write(long step, const std::string& metric, double value);
  void flush();

  static constexpr const char* kHeader = "run_id,step,metric,value,wall_ms";

 private:
  std::ofstream out_;
  std::string run_id_;
  bool wall_clock_;
  std::chrono::steady_clock::time_point start_;
};

}  // namespace dcu
