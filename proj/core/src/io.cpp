#include "sep/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <sstream>

#include "sep/errors.hpp"

namespace sep {

std::string CsvWriter::format(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

CsvWriter::CsvWriter(
    const std::string& path, const std::string& header,
    const std::vector<std::pair<std::string, std::string>>& metadata) {
  out_.open(path);
  if (!out_) throw SpecError("cannot open output file: " + path);
  for (const auto& [key, value] : metadata)
    out_ << "# " << key << "=" << value << "\n";
  out_ << header << "\n";
}

void CsvWriter::row(const std::vector<double>& values) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out_ << ",";
    out_ << format(values[i]);
  }
  out_ << "\n";
}

void CsvWriter::raw_row(const std::string& line) { out_ << line << "\n"; }

void ensure_directory(const std::string& path) {
  std::error_code ec;
  std::filesystem::create_directories(path, ec);
  if (ec) throw SpecError("cannot create directory " + path + ": " + ec.message());
}

std::string join_path(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SpecError("cannot open file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw SpecError("cannot open output file: " + path);
  out << text;
}

namespace {

double to_axis(double v, bool log_scale) {
  return log_scale ? std::log10(v) : v;
}

std::string fmt_tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

}  // namespace

void write_svg_plot(
    const std::string& path, const std::string& title,
    const std::string& x_label, const std::string& y_label,
    const std::vector<PlotSeries>& series, bool loglog,
    const std::vector<std::pair<std::string, std::string>>& metadata) {
  const int W = 640, H = 480, ML = 70, MR = 20, MT = 40, MB = 50;
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (const auto& s : series)
    for (auto [x, y] : s.points) {
      if (loglog && (x <= 0.0 || y <= 0.0)) continue;
      xmin = std::min(xmin, to_axis(x, loglog));
      xmax = std::max(xmax, to_axis(x, loglog));
      ymin = std::min(ymin, to_axis(y, loglog));
      ymax = std::max(ymax, to_axis(y, loglog));
    }
  if (xmin > xmax) {
    xmin = 0;
    xmax = 1;
  }
  if (ymin > ymax) {
    ymin = 0;
    ymax = 1;
  }
  if (xmax - xmin < 1e-12) {
    xmin -= 0.5;
    xmax += 0.5;
  }
  if (ymax - ymin < 1e-12) {
    ymin -= 0.5;
    ymax += 0.5;
  }
  auto px = [&](double x) {
    return ML + (to_axis(x, loglog) - xmin) / (xmax - xmin) * (W - ML - MR);
  };
  auto py = [&](double y) {
    return H - MB - (to_axis(y, loglog) - ymin) / (ymax - ymin) * (H - MT - MB);
  };

  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c",
                                 "#9467bd", "#ff7f0e", "#8c564b"};
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W
      << "\" height=\"" << H << "\" viewBox=\"0 0 " << W << " " << H
      << "\">\n";
  if (!metadata.empty()) {
    svg << "<!--";
    for (const auto& [key, value] : metadata) svg << " " << key << "=" << value;
    svg << " -->\n";
  }
  svg << "<rect width=\"" << W << "\" height=\"" << H
      << "\" fill=\"white\"/>\n";
  svg << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" "
      << "font-family=\"sans-serif\" font-size=\"16\">" << title
      << "</text>\n";
  // frame
  svg << "<rect x=\"" << ML << "\" y=\"" << MT << "\" width=\"" << W - ML - MR
      << "\" height=\"" << H - MT - MB
      << "\" fill=\"none\" stroke=\"#333\"/>\n";
  // ticks
  for (int i = 0; i <= 4; ++i) {
    const double ax = xmin + (xmax - xmin) * i / 4.0;
    const double ay = ymin + (ymax - ymin) * i / 4.0;
    const double vx = loglog ? std::pow(10.0, ax) : ax;
    const double vy = loglog ? std::pow(10.0, ay) : ay;
    const double X = ML + (W - ML - MR) * i / 4.0;
    const double Y = H - MB - (H - MT - MB) * i / 4.0;
    svg << "<line x1=\"" << X << "\" y1=\"" << H - MB << "\" x2=\"" << X
        << "\" y2=\"" << H - MB + 5 << "\" stroke=\"#333\"/>\n";
    svg << "<text x=\"" << X << "\" y=\"" << H - MB + 18
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
           "font-size=\"11\">"
        << fmt_tick(vx) << "</text>\n";
    svg << "<line x1=\"" << ML - 5 << "\" y1=\"" << Y << "\" x2=\"" << ML
        << "\" y2=\"" << Y << "\" stroke=\"#333\"/>\n";
    svg << "<text x=\"" << ML - 8 << "\" y=\"" << Y + 4
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" "
           "font-size=\"11\">"
        << fmt_tick(vy) << "</text>\n";
  }
  svg << "<text x=\"" << (ML + W - MR) / 2 << "\" y=\"" << H - 12
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"13\">"
      << x_label << "</text>\n";
  svg << "<text x=\"16\" y=\"" << (MT + H - MB) / 2
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"13\" transform=\"rotate(-90 16 "
      << (MT + H - MB) / 2 << ")\">" << y_label << "</text>\n";

  int ci = 0;
  double ly = MT + 16;
  for (const auto& s : series) {
    const char* color = colors[ci % 6];
    if (s.line && s.points.size() > 1) {
      svg << "<polyline fill=\"none\" stroke=\"" << color
          << "\" stroke-width=\"1.5\" points=\"";
      for (auto [x, y] : s.points) {
        if (loglog && (x <= 0 || y <= 0)) continue;
        svg << px(x) << "," << py(y) << " ";
      }
      svg << "\"/>\n";
    }
    for (auto [x, y] : s.points) {
      if (loglog && (x <= 0 || y <= 0)) continue;
      svg << "<circle cx=\"" << px(x) << "\" cy=\"" << py(y)
          << "\" r=\"3\" fill=\"" << color << "\"/>\n";
    }
    if (!s.label.empty()) {
      svg << "<circle cx=\"" << W - MR - 150 << "\" cy=\"" << ly - 4
          << "\" r=\"3\" fill=\"" << color << "\"/>\n";
      svg << "<text x=\"" << W - MR - 140 << "\" y=\"" << ly
          << "\" font-family=\"sans-serif\" font-size=\"12\">" << s.label
          << "</text>\n";
      ly += 16;
    }
    ++ci;
  }
  svg << "</svg>\n";
  write_text_file(path, svg.str());
}

}  // namespace sep
