#pragma once

// Run outputs: metric CSVs and static SVG line plots.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "codesign/evolution/run.hpp"

namespace codesign {

inline std::string csv_number(double v) {
  if (std::isnan(v)) return "";
  std::ostringstream s;
  s << std::setprecision(10) << v;
  return s.str();
}

inline const char* kMetricsHeader =
    "epoch,mean_episode_return,episodes,mean_step_reward,policy_loss,value_loss,entropy,kl,clip_frac,lr,grad_norm,"
    "seconds\n";

inline std::string metrics_row(const EpochStats& s) {
  std::ostringstream o;
  o << s.epoch << ',' << csv_number(s.mean_episode_return) << ',' << s.episodes << ','
    << csv_number(s.mean_step_reward) << ',' << csv_number(s.update.policy_loss) << ','
    << csv_number(s.update.value_loss) << ',' << csv_number(s.update.entropy) << ',' << csv_number(s.update.kl) << ','
    << csv_number(s.update.clip_frac) << ',' << csv_number(s.update.lr) << ',' << csv_number(s.update.grad_norm)
    << ',' << csv_number(s.seconds) << '\n';
  return o.str();
}

inline const char* kHistoryHeader = "generation,best_fitness,mean_fitness,median_fitness,actual_change,lr,seconds,rolled_back\n";

inline std::string history_row(const GenerationRecord& r) {
  std::ostringstream o;
  o << r.index << ',' << csv_number(r.best_fitness) << ',' << csv_number(r.mean_fitness()) << ','
    << csv_number(r.median_fitness()) << ',' << csv_number(r.actual_change) << ',' << csv_number(r.lr) << ','
    << csv_number(r.seconds) << ',' << (r.rolled_back ? 1 : 0) << '\n';
  return o.str();
}

/// Appends to a CSV, writing the header first when the file is new or empty.
inline void append_csv(const std::filesystem::path& path, const char* header, const std::string& rows) {
  const bool fresh = !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
  std::ofstream out(path, std::ios::app);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  if (fresh) out << header;
  out << rows;
}

inline void write_csv(const std::filesystem::path& path, const char* header, const std::string& rows) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << header << rows;
}

struct PlotSeries {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;  // NaN entries break the line
};

/// Minimal SVG line chart with axes, ticks and a legend.
inline std::string svg_line_plot(const std::string& title, const std::string& xlabel, const std::string& ylabel,
                                 const std::vector<PlotSeries>& series) {
  constexpr double W = 720, H = 440, L = 80, R = 20, T = 40, B = 60;
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : series) {
    for (size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!std::isfinite(s.y[i])) continue;
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
  }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 == x0) x1 = x0 + 1;
  if (y1 == y0) y0 -= 0.5, y1 += 0.5;
  const double pad = 0.05 * (y1 - y0);
  y0 -= pad;
  y1 += pad;
  auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
  auto py = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };

  std::ostringstream o;
  o << std::fixed << std::setprecision(2);
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << title << "</text>\n";
  o << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
    << "\" stroke=\"black\"/>\n";
  o << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 5; ++k) {
    const double xv = x0 + (x1 - x0) * k / 5.0, yv = y0 + (y1 - y0) * k / 5.0;
    o << "<text x=\"" << px(xv) << "\" y=\"" << H - B + 18 << "\" text-anchor=\"middle\">" << std::setprecision(1)
      << xv << "</text>\n";
    o << "<text x=\"" << L - 6 << "\" y=\"" << py(yv) + 4 << "\" text-anchor=\"end\">" << yv << "</text>\n";
    o << "<line x1=\"" << L << "\" y1=\"" << py(yv) << "\" x2=\"" << W - R << "\" y2=\"" << py(yv)
      << "\" stroke=\"#e0e0e0\"/>\n"
      << std::setprecision(2);
  }
  o << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 15 << "\" text-anchor=\"middle\">" << xlabel
    << "</text>\n";
  o << "<text transform=\"translate(18," << (T + H - B) / 2 << ") rotate(-90)\" text-anchor=\"middle\">" << ylabel
    << "</text>\n";
  for (size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* c = colors[k % 6];
    std::string pts;
    auto flush = [&] {
      if (!pts.empty()) o << "<polyline fill=\"none\" stroke=\"" << c << "\" stroke-width=\"2\" points=\"" << pts << "\"/>\n";
      pts.clear();
    };
    for (size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!std::isfinite(s.y[i])) {
        flush();
        continue;
      }
      std::ostringstream p;
      p << std::fixed << std::setprecision(2) << px(s.x[i]) << ',' << py(s.y[i]) << ' ';
      pts += p.str();
    }
    flush();
    const double ly = T + 8 + 18.0 * k;
    o << "<line x1=\"" << W - R - 150 << "\" y1=\"" << ly << "\" x2=\"" << W - R - 125 << "\" y2=\"" << ly
      << "\" stroke=\"" << c << "\" stroke-width=\"2\"/>\n";
    o << "<text x=\"" << W - R - 120 << "\" y=\"" << ly + 4 << "\">" << s.name << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

/// Best fitness per generation, baseline first (x = 0).
inline PlotSeries best_fitness_series(const std::string& name, const GenerationRecord& baseline,
                                      const std::vector<GenerationRecord>& gens) {
  PlotSeries s{name, {0.0}, {baseline.best_fitness}};
  for (const auto& g : gens) {
    s.x.push_back(g.index);
    s.y.push_back(g.best_fitness);
  }
  return s;
}

}  // namespace codesign
