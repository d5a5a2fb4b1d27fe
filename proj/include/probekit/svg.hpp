#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <string_view>
#include <vector>

namespace probekit::svg {

inline std::string escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

inline constexpr std::string_view kPalette[] = {"#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3", "#937860"};

struct Bar {
  std::string label;
  double value = 0.0;
  std::string group;  // bars of one group share a colour
};

struct Series {
  std::string name;
  std::vector<double> y;
};

namespace detail {

struct Frame {
  double width = 640, height = 400, left = 64, right = 16, top = 40, bottom = 90;
  double lo = 0.0, hi = 1.0;

  double plot_w() const { return width - left - right; }
  double plot_h() const { return height - top - bottom; }
  double y_of(double v) const { return top + plot_h() * (hi - v) / (hi - lo); }
};

inline void fit_range(Frame& f, const std::vector<double>& values) {
  double lo = 0.0, hi = 0.0;
  for (double v : values)
    if (std::isfinite(v)) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  if (hi - lo < 1e-12) hi = lo + 1.0;
  f.lo = lo;
  f.hi = hi + 0.05 * (hi - lo);
}

inline std::string open(const Frame& f, std::string_view title, std::string_view ylabel) {
  std::string s = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(f.width) + "\" height=\"" + num(f.height) +
       "\" viewBox=\"0 0 " + num(f.width) + " " + num(f.height) + "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  s += "<rect x=\"0\" y=\"0\" width=\"" + num(f.width) + "\" height=\"" + num(f.height) + "\" fill=\"white\"/>\n";
  s += "<text x=\"" + num(f.width / 2) + "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" + escape(title) + "</text>\n";
  s += "<text x=\"14\" y=\"" + num(f.top + f.plot_h() / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 14 " +
       num(f.top + f.plot_h() / 2) + ")\">" + escape(ylabel) + "</text>\n";
  const double x0 = f.left, x1 = f.left + f.plot_w();
  for (int t = 0; t <= 5; ++t) {
    const double v = f.lo + (f.hi - f.lo) * t / 5.0;
    const double y = f.y_of(v);
    s += "<line x1=\"" + num(x0 - 4) + "\" y1=\"" + num(y) + "\" x2=\"" + num(x1) + "\" y2=\"" + num(y) +
         "\" stroke=\"#dddddd\"/>\n";
    s += "<text x=\"" + num(x0 - 6) + "\" y=\"" + num(y + 4) + "\" text-anchor=\"end\">" + tick_label(v) + "</text>\n";
  }
  s += "<line x1=\"" + num(x0) + "\" y1=\"" + num(f.top) + "\" x2=\"" + num(x0) + "\" y2=\"" + num(f.top + f.plot_h()) +
       "\" stroke=\"black\"/>\n";
  const double zero = f.y_of(std::clamp(0.0, f.lo, f.hi));
  s += "<line x1=\"" + num(x0) + "\" y1=\"" + num(zero) + "\" x2=\"" + num(x1) + "\" y2=\"" + num(zero) +
       "\" stroke=\"black\"/>\n";
  return s;
}

inline std::string legend(const Frame& f, const std::vector<std::string>& names) {
  std::string s;
  double x = f.left;
  const double y = f.height - 14;
  for (std::size_t i = 0; i < names.size(); ++i) {
    s += "<rect x=\"" + num(x) + "\" y=\"" + num(y - 9) + "\" width=\"10\" height=\"10\" fill=\"" +
         std::string(kPalette[i % std::size(kPalette)]) + "\"/>\n";
    s += "<text x=\"" + num(x + 14) + "\" y=\"" + num(y) + "\">" + escape(names[i]) + "</text>\n";
    x += 24 + 7.0 * static_cast<double>(names[i].size());
  }
  return s;
}

}  // namespace detail

/// Vertical bar chart; bars are coloured by group in order of first appearance.
inline std::string bar_chart(const std::vector<Bar>& bars, std::string_view title, std::string_view ylabel) {
  detail::Frame f;
  std::vector<double> values;
  for (const auto& b : bars) values.push_back(b.value);
  detail::fit_range(f, values);
  std::string s = detail::open(f, title, ylabel);

  std::vector<std::string> groups;
  for (const auto& b : bars)
    if (std::find(groups.begin(), groups.end(), b.group) == groups.end()) groups.push_back(b.group);

  const double slot = f.plot_w() / static_cast<double>(std::max<std::size_t>(bars.size(), 1));
  const double zero = f.y_of(std::clamp(0.0, f.lo, f.hi));
  for (std::size_t i = 0; i < bars.size(); ++i) {
    const auto& b = bars[i];
    const auto g = static_cast<std::size_t>(std::find(groups.begin(), groups.end(), b.group) - groups.begin());
    const double v = std::isfinite(b.value) ? b.value : 0.0;
    const double y = f.y_of(v);
    const double x = f.left + slot * (static_cast<double>(i) + 0.15);
    s += "<rect x=\"" + num(x) + "\" y=\"" + num(std::min(y, zero)) + "\" width=\"" + num(slot * 0.7) + "\" height=\"" +
         num(std::abs(zero - y)) + "\" fill=\"" + std::string(kPalette[g % std::size(kPalette)]) +
         "\"><title>" + escape(b.label) + ": " + tick_label(b.value) + "</title></rect>\n";
    const double cx = f.left + slot * (static_cast<double>(i) + 0.5);
    const double ly = f.top + f.plot_h() + 12;
    s += "<text x=\"" + num(cx) + "\" y=\"" + num(ly) + "\" text-anchor=\"end\" transform=\"rotate(-35 " + num(cx) + " " +
         num(ly) + ")\">" + escape(b.label) + "</text>\n";
  }
  if (groups.size() > 1 || (groups.size() == 1 && !groups.front().empty())) s += detail::legend(f, groups);
  s += "</svg>\n";
  return s;
}

/// Line chart over categorical x positions, one polyline per series.
inline std::string line_chart(const std::vector<std::string>& x_labels, const std::vector<Series>& series,
                              std::string_view title, std::string_view ylabel) {
  detail::Frame f;
  std::vector<double> values;
  for (const auto& s : series) values.insert(values.end(), s.y.begin(), s.y.end());
  detail::fit_range(f, values);
  std::string s = detail::open(f, title, ylabel);

  const std::size_t count = std::max<std::size_t>(x_labels.size(), 1);
  auto x_of = [&](std::size_t i) {
    return count == 1 ? f.left + f.plot_w() / 2 : f.left + f.plot_w() * static_cast<double>(i) / static_cast<double>(count - 1);
  };
  for (std::size_t i = 0; i < x_labels.size(); ++i)
    s += "<text x=\"" + num(x_of(i)) + "\" y=\"" + num(f.top + f.plot_h() + 16) + "\" text-anchor=\"middle\">" +
         escape(x_labels[i]) + "</text>\n";
  std::vector<std::string> names;
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto colour = std::string(kPalette[k % std::size(kPalette)]);
    std::string points;
    for (std::size_t i = 0; i < series[k].y.size() && i < x_labels.size(); ++i) {
      if (!std::isfinite(series[k].y[i])) continue;
      const double x = x_of(i), y = f.y_of(series[k].y[i]);
      points += (points.empty() ? "" : " ") + num(x) + "," + num(y);
      s += "<circle cx=\"" + num(x) + "\" cy=\"" + num(y) + "\" r=\"3\" fill=\"" + colour + "\"/>\n";
    }
    if (!points.empty())
      s += "<polyline points=\"" + points + "\" fill=\"none\" stroke=\"" + colour + "\" stroke-width=\"1.5\"/>\n";
    names.push_back(series[k].name);
  }
  s += detail::legend(f, names);
  s += "</svg>\n";
  return s;
}

}  // namespace probekit::svg
