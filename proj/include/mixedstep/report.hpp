#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mixedstep/harness.hpp"

namespace mixedstep {

/// Generic figure data: a header plus string-valued rows. Every figure is
/// rendered from exactly this table, and the table is what the CSV twin
/// stores, so a figure is a pure function of its CSV.
struct FigureTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

void write_figure_csv(const std::string& path, const FigureTable& table);
FigureTable read_figure_csv(const std::string& path);

/// Median final error with p5/p95 bars vs. relative tolerance per variant,
/// at a fixed system size. Complete tests only.
FigureTable tol_error_table(const ResultSet& rs, int agents);

/// Final-error box summaries (p1, q1, median, q3, p99) per
/// (tolerance, variant, size). Complete tests only.
FigureTable size_error_table(const ResultSet& rs);

/// Median averaged local errors (estimated and, where present, analytic)
/// vs. tolerance per variant. Complete tests only.
FigureTable local_error_table(const ResultSet& rs);

/// Five-number beta summaries per variant. Complete tests only.
FigureTable beta_table(const ResultSet& rs);

std::string render_tol_error_svg(const FigureTable& table);
std::string render_size_error_svg(const FigureTable& table);
std::string render_local_error_svg(const FigureTable& table);
std::string render_beta_table_svg(const FigureTable& table);

/// Largest system size present (used as the default tol-error size filter).
int largest_size(const ResultSet& rs);

struct ReportOutput {
    std::string csv_path;
    std::string svg_path;
};

/// Builds one named figure ("tol-error", "size-error", "local-error",
/// "beta-table") into out_dir, writing the CSV twin next to the SVG.
ReportOutput emit_figure(const ResultSet& rs, const std::string& figure,
                         const std::string& out_dir,
                         std::optional<int> size_filter = {});

}  // namespace mixedstep
