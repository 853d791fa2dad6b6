#include "dcu/metrics.hpp"

#include "dcu/errors.hpp"
#include "dcu/format.hpp"

namespace dcu {

MetricsWriter::MetricsWriter(const std::filesystem::path& path, std::string run_id,
                             bool wall_clock)
    : out_(path, std::ios::out | std::ios::trunc),
      run_id_(std::move(run_id)),
      wall_clock_(wall_clock),
      start_(std::chrono::steady_clock::now()) {
  if (!out_) throw IoError("cannot write " + path.string());
  out_ << kHeader << '\n';
  out_.flush();
}

void MetricsWriter::write(long step, const std::string& metric, double value) {
  long long ms = 0;
  if (wall_clock_)
    ms = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() -
                                                               start_)
             .count();
  out_ << run_id_ << ',' << step << ',' << metric << ',' << format_double(value) << ',' << ms
       << '\n';
  if (!out_) throw IoError("metrics write failed");
}

void MetricsWriter::flush() {
  out_.flush();
  if (!out_) throw IoError("metrics flush failed");
}

}  // namespace dcu
