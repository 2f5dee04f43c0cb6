#include "splitinfer/plot.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <map>

#include "splitinfer/error.hpp"

namespace splitinfer {

size_t CsvTable::Column(std::string_view name) const {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) {
    throw Error(ErrorCode::kMissingColumn, fmt::format("results have no '{}' column", name));
  }
  return static_cast<size_t>(it - header.begin());
}

double CsvTable::Number(size_t row, size_t column) const {
  const std::string& cell = rows.at(row).at(column);
  size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(cell, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != cell.size()) {
    throw Error(ErrorCode::kParse, fmt::format("line {}: '{}' in column '{}' is not a number",
                                               row + 2, cell, header.at(column)));
  }
  return v;
}

CsvTable ParseCsv(std::string_view text) {
  CsvTable t;
  size_t line_no = 0;
  auto split = [](std::string_view line) {
    std::vector<std::string> cells;
    size_t start = 0;
    while (true) {
      const size_t comma = line.find(',', start);
      cells.emplace_back(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    return cells;
  };
  while (!text.empty()) {
    const size_t nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    auto cells = split(line);
    if (t.header.empty()) {
      t.header = std::move(cells);
      continue;
    }
    if (cells.size() != t.header.size()) {
      throw Error(ErrorCode::kParse, fmt::format("line {}: expected {} fields, found {}", line_no,
                                                 t.header.size(), cells.size()));
    }
    t.rows.push_back(std::move(cells));
  }
  if (t.header.empty()) throw Error(ErrorCode::kParse, "line 1: empty CSV");
  if (t.rows.empty()) throw Error(ErrorCode::kParse, "line 2: CSV has a header but no rows");
  return t;
}

std::vector<std::string> FigureIds() { return {"fig4", "fig5", "fig6", "fig7", "fig8"}; }

namespace {

constexpr double kWidth = 960, kHeight = 540;
constexpr double kLeft = 90, kRight = 90, kTop = 60, kBottom = 110;
constexpr const char* kPalette[] = {"#4e79a7", "#f28e2b", "#e15759", "#76b7b2",
                                    "#59a14f", "#edc948", "#b07aa1", "#9c755f"};

const char* Color(size_t i) { return kPalette[i % std::size(kPalette)]; }

std::string Num(double v) { return fmt::format("{:.2f}", v); }

std::string Escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

std::string ModeLabel(std::string_view mode) {
  if (mode == "l0") return "UE-only";
  if (mode == "l5") return "Server-only";
  if (mode == "adaptive") return "Adaptive";
  if (mode.size() == 2 && mode[0] == 'l') return fmt::format("Split-{}", mode[1]);
  return std::string(mode);
}

// 1-2-5 step giving about `target` intervals up to `max`.
double NiceStep(double max, int target = 5) {
  if (!(max > 0.0)) return 1.0;
  const double raw = max / target;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    if (raw <= m * mag) return m * mag;
  }
  return 10.0 * mag;
}

std::string TickLabel(double v, double step) {
  if (step >= 1.0) return fmt::format("{:.0f}", v);
  const int digits = std::min(9, static_cast<int>(std::ceil(-std::log10(step))) );
  return fmt::format("{:.{}f}", v, digits);
}

class Svg {
 public:
  explicit Svg(std::string_view title) {
    out_ = fmt::format(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" "
        "viewBox=\"0 0 {0} {1}\" font-family=\"sans-serif\" font-size=\"12\">\n"
        "<rect x=\"0\" y=\"0\" width=\"{0}\" height=\"{1}\" fill=\"#ffffff\"/>\n",
        kWidth, kHeight);
    Text(kWidth / 2, 30, title, "middle", 16);
  }
  void Rect(double x, double y, double w, double h, const char* fill, const char* cls) {
    out_ += fmt::format("<rect class=\"{}\" x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{}\"/>\n",
                        cls, Num(x), Num(y), Num(w), Num(h), fill);
  }
  void Line(double x1, double y1, double x2, double y2, const char* stroke, double width = 1) {
    out_ += fmt::format(
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{}\" stroke-width=\"{}\"/>\n",
        Num(x1), Num(y1), Num(x2), Num(y2), stroke, Num(width));
  }
  void Polyline(const std::vector<std::pair<double, double>>& pts, const char* stroke,
                double width, const char* cls, bool dashed = false) {
    std::string p;
    for (const auto& [x, y] : pts) p += fmt::format("{}{},{}", p.empty() ? "" : " ", Num(x), Num(y));
    out_ += fmt::format(
        "<polyline class=\"{}\" points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"{}\"{}/>\n",
        cls, p, stroke, Num(width), dashed ? " stroke-dasharray=\"6,3\"" : "");
  }
  void Circle(double x, double y, double r, const char* fill) {
    out_ += fmt::format("<circle cx=\"{}\" cy=\"{}\" r=\"{}\" fill=\"{}\"/>\n", Num(x), Num(y),
                        Num(r), fill);
  }
  void Text(double x, double y, std::string_view s, const char* anchor = "start",
            int size = 12, double rotate = 0) {
    const std::string rot =
        rotate != 0 ? fmt::format(" transform=\"rotate({} {} {})\"", Num(rotate), Num(x), Num(y)) : "";
    out_ += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"{}\" font-size=\"{}\"{}>{}</text>\n",
                        Num(x), Num(y), anchor, size, rot, Escape(s));
  }
  std::string Finish() { return out_ + "</svg>\n"; }

 private:
  std::string out_;
};

struct Axis {
  double max = 1.0;
  double step = 1.0;
  double Y(double v) const { return kHeight - kBottom - v / max * (kHeight - kBottom - kTop); }
};

Axis MakeAxis(double data_max) {
  Axis a;
  a.step = NiceStep(data_max);
  a.max = std::max(a.step, std::ceil(data_max / a.step - 1e-9) * a.step);
  return a;
}

void DrawAxis(Svg& svg, const Axis& axis, bool right, std::string_view label) {
  const double x = right ? kWidth - kRight : kLeft;
  svg.Line(x, kTop, x, kHeight - kBottom, "#333333");
  for (double v = 0; v <= axis.max + axis.step * 1e-6; v += axis.step) {
    const double y = axis.Y(v);
    svg.Line(x, y, x + (right ? 5 : -5), y, "#333333");
    svg.Text(x + (right ? 8 : -8), y + 4, TickLabel(v, axis.step), right ? "start" : "end");
    if (!right) svg.Line(kLeft, y, kWidth - kRight, y, "#e0e0e0");
  }
  const double lx = right ? kWidth - 20 : 22;
  svg.Text(lx, (kTop + kHeight - kBottom) / 2, label, "middle", 12, right ? 90 : -90);
}

void Legend(Svg& svg, const std::vector<std::string>& names, bool lines = false) {
  const double y = kHeight - 30;
  const double slot = (kWidth - kLeft - kRight) / static_cast<double>(std::max<size_t>(names.size(), 1));
  for (size_t i = 0; i < names.size(); ++i) {
    const double x = kLeft + slot * static_cast<double>(i);
    if (lines) {
      svg.Line(x, y - 4, x + 18, y - 4, Color(i), 3);
    } else {
      svg.Rect(x, y - 12, 14, 12, Color(i), "legend");
    }
    svg.Text(x + 22, y, names[i]);
  }
}

struct Grouped {
  std::vector<std::string> groups;  // x categories
  std::vector<std::string> series;  // bars within a group
  std::vector<std::vector<double>> values;  // [series][group]
};

// Mean of `value` per (series key, group key), keys in first-seen order.
Grouped GroupMeans(const CsvTable& t, const std::vector<size_t>& rows, size_t group_col,
                   size_t series_col, size_t value_col, bool group_numeric) {
  Grouped g;
  std::map<std::string, size_t> gi, si;
  std::map<std::pair<size_t, size_t>, std::pair<double, size_t>> sums;
  std::vector<std::string> group_keys;
  for (size_t r : rows) {
    const std::string& gk = t.rows[r][group_col];
    const std::string& sk = t.rows[r][series_col];
    if (gi.try_emplace(gk, gi.size()).second) group_keys.push_back(gk);
    if (si.try_emplace(sk, si.size()).second) g.series.push_back(sk);
    auto& s = sums[{si[sk], gi[gk]}];
    s.first += t.Number(r, value_col);
    ++s.second;
  }
  std::vector<size_t> order(group_keys.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  if (group_numeric) {
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
      return std::stod(group_keys[a]) < std::stod(group_keys[b]);
    });
  }
  for (size_t i : order) g.groups.push_back(group_keys[i]);
  g.values.assign(g.series.size(), std::vector<double>(g.groups.size(), 0.0));
  for (const auto& [key, s] : sums) {
    const size_t pos = static_cast<size_t>(std::find(order.begin(), order.end(), key.second) - order.begin());
    g.values[key.first][pos] = s.first / static_cast<double>(s.second);
  }
  return g;
}

// Rows of the preferred path (dUPF when present) restricted to fixed modes.
std::vector<size_t> SelectRows(const CsvTable& t, bool fixed_only) {
  const size_t path = t.Column("path");
  const size_t mode = t.Column("mode");
  bool has_dupf = false;
  for (const auto& r : t.rows) has_dupf |= r[path] == "dupf";
  const std::string want = has_dupf ? "dupf" : t.rows.front()[path];
  std::vector<size_t> out;
  for (size_t i = 0; i < t.rows.size(); ++i) {
    if (t.rows[i][path] != want) continue;
    if (fixed_only && t.rows[i][mode] == "adaptive") continue;
    out.push_back(i);
  }
  if (out.empty()) throw Error(ErrorCode::kParse, "no rows to plot");
  return out;
}

void DrawBars(Svg& svg, const Grouped& g, const std::vector<Axis>& axes,
              const std::vector<size_t>& axis_of_series,
              const std::vector<std::string>& group_labels) {
  const double plot_w = kWidth - kLeft - kRight;
  const double group_w = plot_w / static_cast<double>(g.groups.size());
  const double bar_w = group_w * 0.8 / static_cast<double>(g.series.size());
  for (size_t gi = 0; gi < g.groups.size(); ++gi) {
    const double x0 = kLeft + group_w * static_cast<double>(gi) + group_w * 0.1;
    for (size_t si = 0; si < g.series.size(); ++si) {
      const Axis& a = axes[axis_of_series[si]];
      const double v = g.values[si][gi];
      const double y = a.Y(v);
      svg.Rect(x0 + bar_w * static_cast<double>(si), y, bar_w * 0.92, kHeight - kBottom - y,
               Color(si), "bar");
    }
    svg.Text(x0 + group_w * 0.4, kHeight - kBottom + 18, group_labels[gi], "middle");
  }
}

double MaxOf(const std::vector<std::vector<double>>& v) {
  double m = 0.0;
  for (const auto& row : v) for (double x : row) m = std::max(m, x);
  return m;
}

std::string Fig4(const CsvTable& t) {
  const auto rows = SelectRows(t, true);
  Grouped g = GroupMeans(t, rows, t.Column("mode"), t.Column("interference_db"),
                         t.Column("total_ms"), false);
  // Series are interference levels; order them numerically.
  std::vector<size_t> order(g.series.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return std::stod(g.series[a]) < std::stod(g.series[b]);
  });
  Grouped s{g.groups, {}, {}};
  for (size_t i : order) {
    s.series.push_back(g.series[i]);
    s.values.push_back(g.values[i]);
  }
  Svg svg("E2E delay per split mode and interference level");
  const Axis a = MakeAxis(MaxOf(s.values));
  DrawAxis(svg, a, false, "E2E delay (ms)");
  std::vector<std::string> labels;
  for (const auto& m : s.groups) labels.push_back(ModeLabel(m));
  DrawBars(svg, s, {a}, std::vector<size_t>(s.series.size(), 0), labels);
  std::vector<std::string> legend;
  for (const auto& lv : s.series) legend.push_back(fmt::format("{:.0f} dB", std::stod(lv)));
  Legend(svg, legend);
  return svg.Finish();
}

std::string Fig5(const CsvTable& t) {
  const auto rows = SelectRows(t, true);
  const size_t mode = t.Column("mode");
  const size_t leak = t.Column("leakage");
  const size_t energy = t.Column("total_wh");
  Grouped g = GroupMeans(t, rows, mode, mode, energy, false);
  // Collapse to one series: each group has exactly one contributing series.
  std::vector<double> e(g.groups.size(), 0.0), p(g.groups.size(), 0.0);
  for (size_t gi = 0; gi < g.groups.size(); ++gi) {
    for (size_t si = 0; si < g.series.size(); ++si) e[gi] += g.values[si][gi];
  }
  Grouped lg = GroupMeans(t, rows, mode, mode, leak, false);
  for (size_t gi = 0; gi < lg.groups.size(); ++gi) {
    for (size_t si = 0; si < lg.series.size(); ++si) p[gi] += lg.values[si][gi];
  }
  Svg svg("UE energy per frame and privacy leakage");
  const Axis ea = MakeAxis(*std::max_element(e.begin(), e.end()));
  Axis pa;
  pa.max = 1.0;
  pa.step = 0.2;
  DrawAxis(svg, ea, false, "UE energy (Wh/frame)");
  DrawAxis(svg, pa, true, "Leakage (distance correlation)");
  std::vector<std::string> labels;
  for (const auto& m : g.groups) labels.push_back(ModeLabel(m));
  DrawBars(svg, Grouped{g.groups, {"energy"}, {e}}, {ea}, {0}, labels);
  const double group_w = (kWidth - kLeft - kRight) / static_cast<double>(g.groups.size());
  std::vector<std::pair<double, double>> pts;
  for (size_t gi = 0; gi < p.size(); ++gi) {
    pts.emplace_back(kLeft + group_w * (static_cast<double>(gi) + 0.5), pa.Y(p[gi]));
  }
  svg.Polyline(pts, Color(2), 2.5, "leakage");
  for (const auto& [x, y] : pts) svg.Circle(x, y, 4, Color(2));
  Legend(svg, {"UE energy", "Leakage"});
  return svg.Finish();
}

std::string Fig6(const CsvTable& t) {
  auto rows = SelectRows(t, true);
  const size_t mode = t.Column("mode");
  const size_t tx = t.Column("tx_wh");
  std::erase_if(rows, [&](size_t r) { return t.rows[r][mode] == "l0"; });
  if (rows.empty()) throw Error(ErrorCode::kParse, "no transmitting modes to plot");
  Grouped g = GroupMeans(t, rows, t.Column("interference_db"), mode, tx, true);
  Svg svg("Transmission energy per frame versus interference");
  const Axis a = MakeAxis(MaxOf(g.values));
  DrawAxis(svg, a, false, "Tx energy (Wh/frame)");
  std::vector<std::string> labels;
  for (const auto& lv : g.groups) labels.push_back(fmt::format("{:.0f} dB", std::stod(lv)));
  DrawBars(svg, g, {a}, std::vector<size_t>(g.series.size(), 0), labels);
  std::vector<std::string> legend;
  for (const auto& m : g.series) legend.push_back(ModeLabel(m));
  Legend(svg, legend);
  return svg.Finish();
}

std::string Fig7(const CsvTable& t) {
  const auto rows = SelectRows(t, true);
  const size_t mode = t.Column("mode");
  Grouped c = GroupMeans(t, rows, mode, mode, t.Column("compute_wh"), false);
  Grouped x = GroupMeans(t, rows, mode, mode, t.Column("tx_wh"), false);
  std::vector<double> cv(c.groups.size(), 0.0), xv(c.groups.size(), 0.0);
  for (size_t gi = 0; gi < c.groups.size(); ++gi) {
    for (size_t si = 0; si < c.series.size(); ++si) cv[gi] += c.values[si][gi];
    for (size_t si = 0; si < x.series.size(); ++si) xv[gi] += x.values[si][gi];
  }
  Svg svg("Inference versus transmission energy per frame");
  const Axis ca = MakeAxis(*std::max_element(cv.begin(), cv.end()));
  const Axis xa = MakeAxis(*std::max_element(xv.begin(), xv.end()));
  DrawAxis(svg, ca, false, "Inference energy (Wh/frame)");
  DrawAxis(svg, xa, true, "Tx energy (Wh/frame)");
  std::vector<std::string> labels;
  for (const auto& m : c.groups) labels.push_back(ModeLabel(m));
  DrawBars(svg, Grouped{c.groups, {"compute", "tx"}, {cv, xv}}, {ca, xa}, {0, 1}, labels);
  Legend(svg, {"Inference (left axis)", "Transmission (right axis)"});
  return svg.Finish();
}

std::string Fig8(const CsvTable& t, const PlotOptions& options) {
  const size_t path = t.Column("path");
  const size_t mode = t.Column("mode");
  const size_t ts = t.Column("timestamp_ms");
  const size_t total = t.Column("total_ms");
  if (options.moving_average_window == 0) {
    throw Error(ErrorCode::kInvalidParameter, "moving-average window must be positive");
  }
  std::vector<std::string> paths;
  std::map<std::string, std::vector<std::pair<double, double>>> series;
  for (size_t r = 0; r < t.rows.size(); ++r) {
    if (t.rows[r][mode] != options.fig8_mode) continue;
    const std::string& p = t.rows[r][path];
    if (!series.count(p)) paths.push_back(p);
    series[p].emplace_back(t.Number(r, ts), t.Number(r, total));
  }
  if (paths.empty()) {
    throw Error(ErrorCode::kParse, fmt::format("no rows for mode '{}'", options.fig8_mode));
  }
  double t_min = INFINITY, t_max = -INFINITY, v_max = 0.0;
  for (const auto& [_, s] : series) {
    for (const auto& [x, y] : s) {
      t_min = std::min(t_min, x);
      t_max = std::max(t_max, x);
      v_max = std::max(v_max, y);
    }
  }
  if (t_max <= t_min) t_max = t_min + 1.0;
  Svg svg(fmt::format("Per-frame E2E delay over time, {}", ModeLabel(options.fig8_mode)));
  const Axis a = MakeAxis(v_max);
  DrawAxis(svg, a, false, "E2E delay (ms)");
  const double plot_w = kWidth - kLeft - kRight;
  auto px = [&](double x) { return kLeft + (x - t_min) / (t_max - t_min) * plot_w; };
  const Axis ta = MakeAxis(t_max - t_min);
  for (double v = 0; v <= ta.max + ta.step * 1e-6 && v <= t_max - t_min + 1e-9; v += ta.step) {
    svg.Line(px(t_min + v), kHeight - kBottom, px(t_min + v), kHeight - kBottom + 5, "#333333");
    svg.Text(px(t_min + v), kHeight - kBottom + 18, TickLabel((t_min + v) / 1000.0, ta.step / 1000.0),
             "middle");
  }
  svg.Text(kLeft + plot_w / 2, kHeight - kBottom + 40, "time (s)", "middle");
  std::vector<std::string> legend;
  for (size_t i = 0; i < paths.size(); ++i) {
    const auto& s = series[paths[i]];
    std::vector<std::pair<double, double>> raw, avg;
    double window_sum = 0.0;
    for (size_t k = 0; k < s.size(); ++k) {
      raw.emplace_back(px(s[k].first), a.Y(s[k].second));
      window_sum += s[k].second;
      if (k >= options.moving_average_window) window_sum -= s[k - options.moving_average_window].second;
      const size_t n = std::min(k + 1, options.moving_average_window);
      avg.emplace_back(px(s[k].first), a.Y(window_sum / static_cast<double>(n)));
    }
    svg.Polyline(raw, Color(i), 1.0, "series");
    svg.Polyline(avg, Color(i), 2.5, "moving-average", true);
    std::string upper = paths[i];
    std::transform(upper.begin(), upper.end(), upper.begin(), ::toupper);
    legend.push_back(upper);
  }
  Legend(svg, legend, true);
  return svg.Finish();
}

}  // namespace

std::string RenderFigure(std::string_view figure_id, const CsvTable& results,
                         const PlotOptions& options) {
  if (figure_id == "fig4") return Fig4(results);
  if (figure_id == "fig5") return Fig5(results);
  if (figure_id == "fig6") return Fig6(results);
  if (figure_id == "fig7") return Fig7(results);
  if (figure_id == "fig8") return Fig8(results, options);
  throw Error(ErrorCode::kUnknownFigure,
              fmt::format("unknown figure '{}' (expected fig4..fig8)", figure_id));
}

}  // namespace splitinfer
