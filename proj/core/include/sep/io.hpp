#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

namespace sep {

inline constexpr const char* kVersion = "sepsim 0.1.0";

// Deterministic CSV emission: metadata as '# key=value' comment lines, then
// a header row and data rows.  Doubles are printed with %.17g so reruns are
// byte-identical.
class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::string& header,
            const std::vector<std::pair<std::string, std::string>>& metadata);

  void row(const std::vector<double>& values);
  void raw_row(const std::string& line);

  static std::string format(double v);

 private:
  std::ofstream out_;
};

void ensure_directory(const std::string& path);
std::string join_path(const std::string& dir, const std::string& name);
std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

struct PlotSeries {
  std::string label;
  std::vector<std::pair<double, double>> points;
  bool line = true;
};

// Standalone SVG scatter/line plot; log-log when requested.  No plotting
// dependency, just text emission.  Metadata lands in an XML comment.
void write_svg_plot(
    const std::string& path, const std::string& title,
    const std::string& x_label, const std::string& y_label,
    const std::vector<PlotSeries>& series, bool loglog,
    const std::vector<std::pair<std::string, std::string>>& metadata = {});

}  // namespace sep
