#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace splitinfer {

// Minimal CSV reader for the files this tool writes: a header line, no
// quoting, LF or CRLF line endings.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Throws kMissingColumn naming the column.
  size_t Column(std::string_view name) const;
  double Number(size_t row, size_t column) const;
};

CsvTable ParseCsv(std::string_view text);

struct PlotOptions {
  std::string fig8_mode = "l1";
  size_t moving_average_window = 10;
};

// Figure ids: fig4 (delay per mode and interference), fig5 (energy bars with
// leakage line), fig6 (tx energy per interference level), fig7 (compute vs tx
// energy on two axes), fig8 (dUPF/cUPF delay series with moving averages).
// Throws kUnknownFigure or kMissingColumn.
std::string RenderFigure(std::string_view figure_id, const CsvTable& results,
                         const PlotOptions& options = {});

std::vector<std::string> FigureIds();

}  // namespace splitinfer
