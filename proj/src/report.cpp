#include "mixedstep/report.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

namespace mixedstep {

namespace {

const char* kVariantOrder[] = {"Single", "Mixed1", "Mixed2", "Double"};

int variant_rank(const std::string& v) {
    for (int i = 0; i < 4; ++i)
        if (v == kVariantOrder[i]) return i;
    return 4;
}

const char* variant_color(const std::string& v) {
    if (v == "Single") return "#d62728";
    if (v == "Mixed1") return "#ff7f0e";
    if (v == "Mixed2") return "#1f77b4";
    if (v == "Double") return "#2ca02c";
    return "#555555";
}

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

std::string join(const std::vector<std::string>& fields) {
    std::string out;
    for (size_t i = 0; i < fields.size(); ++i) {
        if (i) out += ',';
        out += fields[i];
    }
    return out;
}

// Rows of completed tests belonging to the four solver variants.
std::vector<const ResultRow*> complete_variant_rows(const ResultSet& rs) {
    const auto complete = select_complete(rs);
    std::vector<const ResultRow*> out;
    for (const ResultRow& r : rs.rows)
        if (complete.count(r.test_id) && r.variant != "Reference")
            out.push_back(&r);
    return out;
}

struct GroupKey {
    int rank;
    std::string variant;
    double rel_tol;
    int agents;
    bool operator<(const GroupKey& o) const {
        if (rank != o.rank) return rank < o.rank;
        if (rel_tol != o.rel_tol) return rel_tol > o.rel_tol;  // loose to strict
        return agents < o.agents;
    }
};

// --- SVG primitives --------------------------------------------------------

class Svg {
  public:
    Svg(double width, double height) : w_(width), h_(height) {
        os_ << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" "
            << "width=\"" << w_ << "\" height=\"" << h_ << "\" viewBox=\"0 0 "
            << w_ << " " << h_ << "\">\n"
            << "<rect width=\"" << w_ << "\" height=\"" << h_
            << "\" fill=\"white\"/>\n";
    }
    void line(double x1, double y1, double x2, double y2,
              const std::string& stroke, double width = 1.0) {
        os_ << "<line x1=\"" << x1 << "\" y1=\"" << y1 << "\" x2=\"" << x2
            << "\" y2=\"" << y2 << "\" stroke=\"" << stroke
            << "\" stroke-width=\"" << width << "\"/>\n";
    }
    void rect(double x, double y, double w, double h, const std::string& fill,
              const std::string& stroke) {
        os_ << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << w
            << "\" height=\"" << h << "\" fill=\"" << fill << "\" stroke=\""
            << stroke << "\"/>\n";
    }
    void circle(double cx, double cy, double r, const std::string& fill) {
        os_ << "<circle cx=\"" << cx << "\" cy=\"" << cy << "\" r=\"" << r
            << "\" fill=\"" << fill << "\"/>\n";
    }
    void polygon(const std::vector<std::pair<double, double>>& pts,
                 const std::string& fill) {
        os_ << "<polygon points=\"";
        for (const auto& [x, y] : pts) os_ << x << "," << y << " ";
        os_ << "\" fill=\"" << fill << "\"/>\n";
    }
    void text(double x, double y, const std::string& s, int size = 12,
              const std::string& anchor = "start") {
        os_ << "<text x=\"" << x << "\" y=\"" << y << "\" font-size=\"" << size
            << "\" font-family=\"sans-serif\" text-anchor=\"" << anchor << "\">"
            << s << "</text>\n";
    }
    std::string finish() {
        os_ << "</svg>\n";
        return os_.str();
    }

  private:
    double w_, h_;
    std::ostringstream os_;
};

void marker(Svg& svg, const std::string& variant, double x, double y,
            double r = 4.0) {
    const std::string c = variant_color(variant);
    if (variant == "Single") {
        svg.rect(x - r, y - r, 2 * r, 2 * r, c, "none");
    } else if (variant == "Mixed1") {
        svg.polygon({{x, y - r}, {x - r, y + r}, {x + r, y + r}}, c);
    } else if (variant == "Mixed2") {
        svg.circle(x, y, r, c);
    } else {
        svg.polygon({{x, y - r}, {x - r, y}, {x, y + r}, {x + r, y}}, c);
    }
}

std::string pow10_label(int e) { return "1e" + std::to_string(e); }

// Log-scale axis mapping a decade range onto pixels.
struct LogAxis {
    double lo_e, hi_e;  // log10 bounds
    double px0, px1;    // pixel bounds

    double map(double v) const {
        const double e = std::log10(v);
        return px0 + (e - lo_e) / (hi_e - lo_e) * (px1 - px0);
    }
};

LogAxis fit_axis(std::vector<double> values, double px0, double px1) {
    double lo = 1e300, hi = -1e300;
    for (double v : values) {
        if (v <= 0.0 || !std::isfinite(v)) continue;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    if (hi < lo) {
        lo = 1e-1;
        hi = 1e1;
    }
    double lo_e = std::floor(std::log10(lo));
    double hi_e = std::ceil(std::log10(hi));
    if (hi_e <= lo_e) hi_e = lo_e + 1;
    return LogAxis{lo_e, hi_e, px0, px1};
}

void draw_y_decades(Svg& svg, const LogAxis& ax, double x0, double x1) {
    for (int e = static_cast<int>(ax.lo_e); e <= static_cast<int>(ax.hi_e); ++e) {
        const double y = ax.map(std::pow(10.0, e));
        svg.line(x0, y, x1, y, "#dddddd");
        svg.text(x0 - 6, y + 4, pow10_label(e), 11, "end");
    }
}

std::string svg_no_data(const std::string& what) {
    Svg svg(480, 120);
    svg.text(240, 60, "no data: " + what, 14, "middle");
    return svg.finish();
}

double fld(const std::vector<std::string>& row, size_t i) {
    return std::stod(row.at(i));
}

// Median/percentile series figure shared by tol-error and local-error.
void render_series_panel(Svg& svg, size_t var_col, size_t tol_col,
                         size_t med_col, size_t lo_col, size_t hi_col,
                         const std::vector<const std::vector<std::string>*>& rows,
                         double top, double bottom, double left, double right,
                         const std::string& y_label) {
    std::vector<double> xs, ys;
    for (auto* r : rows) {
        xs.push_back(fld(*r, tol_col));
        ys.push_back(fld(*r, med_col));
        ys.push_back(fld(*r, lo_col));
        ys.push_back(fld(*r, hi_col));
    }
    LogAxis xax = fit_axis(xs, left, right);
    LogAxis yax = fit_axis(ys, bottom, top);

    for (int e = static_cast<int>(xax.lo_e); e <= static_cast<int>(xax.hi_e); ++e) {
        const double x = xax.map(std::pow(10.0, e));
        svg.line(x, top, x, bottom, "#dddddd");
        svg.text(x, bottom + 16, pow10_label(e), 11, "middle");
    }
    draw_y_decades(svg, yax, left, right);
    svg.line(left, bottom, right, bottom, "#000000");
    svg.line(left, top, left, bottom, "#000000");
    svg.text(left, top - 8, y_label, 12);

    std::map<std::string, std::vector<std::pair<double, double>>> series;
    std::map<std::string, std::vector<std::array<double, 3>>> bars;
    for (auto* r : rows) {
        const std::string v = (*r)[var_col];
        // Horizontal nudge so overlapping symbols stay distinguishable.
        const double shift = 1.0 + 0.04 * (variant_rank(v) - 1.5);
        const double x = xax.map(fld(*r, tol_col) * shift);
        const double y = yax.map(fld(*r, med_col));
        series[v].push_back({x, y});
        bars[v].push_back({x, yax.map(fld(*r, lo_col)), yax.map(fld(*r, hi_col))});
    }
    for (auto& [v, pts] : series) {
        std::sort(pts.begin(), pts.end());
        for (size_t i = 1; i < pts.size(); ++i)
            svg.line(pts[i - 1].first, pts[i - 1].second, pts[i].first,
                     pts[i].second, variant_color(v), 0.8);
        for (const auto& [x, ylo, yhi] : bars[v]) {
            svg.line(x, ylo, x, yhi, variant_color(v), 1.0);
            svg.line(x - 3, ylo, x + 3, ylo, variant_color(v), 1.0);
            svg.line(x - 3, yhi, x + 3, yhi, variant_color(v), 1.0);
        }
        for (const auto& [x, y] : pts) marker(svg, v, x, y);
    }
    double ly = top + 4;
    for (const char* v : kVariantOrder) {
        if (!series.count(v)) continue;
        marker(svg, v, right - 70, ly + 4);
        svg.text(right - 60, ly + 8, v, 11);
        ly += 16;
    }
}

}  // namespace

void write_figure_csv(const std::string& path, const FigureTable& table) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << join(table.header) << '\n';
    for (const auto& row : table.rows) out << join(row) << '\n';
}

FigureTable read_figure_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path);
    FigureTable t;
    std::string line;
    if (!std::getline(in, line))
        throw std::runtime_error("empty figure csv: " + path);
    t.header = split_line(line);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        t.rows.push_back(split_line(line));
    }
    return t;
}

int largest_size(const ResultSet& rs) {
    int n = 0;
    for (const ResultRow& r : rs.rows) n = std::max(n, r.agents);
    return n;
}

FigureTable tol_error_table(const ResultSet& rs, int agents) {
    FigureTable t;
    t.header = {"variant", "rel_tol", "n", "median", "p5", "p95"};
    std::map<GroupKey, std::vector<double>> groups;
    for (const ResultRow* r : complete_variant_rows(rs)) {
        if (r->agents != agents || !r->final_error) continue;
        groups[{variant_rank(r->variant), r->variant, r->rel_tol, agents}]
            .push_back(*r->final_error);
    }
    for (auto& [key, vals] : groups) {
        const DistributionSummary s = summarize(vals);
        t.rows.push_back({key.variant, format_double(key.rel_tol),
                          std::to_string(vals.size()), format_double(s.median),
                          format_double(s.p5), format_double(s.p95)});
    }
    return t;
}

FigureTable size_error_table(const ResultSet& rs) {
    FigureTable t;
    t.header = {"rel_tol", "variant", "N", "n", "p1", "q1", "median", "q3", "p99"};
    std::map<GroupKey, std::vector<double>> groups;
    for (const ResultRow* r : complete_variant_rows(rs)) {
        if (!r->final_error) continue;
        groups[{variant_rank(r->variant), r->variant, r->rel_tol, r->agents}]
            .push_back(*r->final_error);
    }
    for (auto& [key, vals] : groups) {
        const DistributionSummary s = summarize(vals);
        t.rows.push_back({format_double(key.rel_tol), key.variant,
                          std::to_string(key.agents), std::to_string(vals.size()),
                          format_double(s.p1), format_double(s.q1),
                          format_double(s.median), format_double(s.q3),
                          format_double(s.p99)});
    }
    // Order rows by tolerance first for panel grouping.
    std::sort(t.rows.begin(), t.rows.end(),
              [](const auto& a, const auto& b) {
                  const double ta = std::stod(a[0]), tb = std::stod(b[0]);
                  if (ta != tb) return ta > tb;
                  const int ra = variant_rank(a[1]), rb = variant_rank(b[1]);
                  if (ra != rb) return ra < rb;
                  return std::stoi(a[2]) < std::stoi(b[2]);
              });
    return t;
}

FigureTable local_error_table(const ResultSet& rs) {
    FigureTable t;
    t.header = {"kind", "variant", "rel_tol", "n", "median", "p5", "p95"};
    std::map<GroupKey, std::vector<double>> ebs, ean;
    for (const ResultRow* r : complete_variant_rows(rs)) {
        const GroupKey key{variant_rank(r->variant), r->variant, r->rel_tol, 0};
        if (r->mean_ebs) ebs[key].push_back(*r->mean_ebs);
        if (r->mean_eanalytic) ean[key].push_back(*r->mean_eanalytic);
    }
    for (auto& [key, vals] : ebs) {
        const DistributionSummary s = summarize(vals);
        t.rows.push_back({"e_bs", key.variant, format_double(key.rel_tol),
                          std::to_string(vals.size()), format_double(s.median),
                          format_double(s.p5), format_double(s.p95)});
    }
    for (auto& [key, vals] : ean) {
        const DistributionSummary s = summarize(vals);
        t.rows.push_back({"e_analytic", key.variant, format_double(key.rel_tol),
                          std::to_string(vals.size()), format_double(s.median),
                          format_double(s.p5), format_double(s.p95)});
    }
    return t;
}

FigureTable beta_table(const ResultSet& rs) {
    FigureTable t;
    t.header = {"variant", "n", "min", "q1", "median", "q3", "max"};
    std::map<GroupKey, std::vector<double>> groups;
    for (const ResultRow* r : complete_variant_rows(rs)) {
        if (!r->beta) continue;
        groups[{variant_rank(r->variant), r->variant, 0.0, 0}].push_back(*r->beta);
    }
    for (auto& [key, vals] : groups) {
        const DistributionSummary s = summarize(vals);
        t.rows.push_back({key.variant, std::to_string(vals.size()),
                          format_double(s.min), format_double(s.q1),
                          format_double(s.median), format_double(s.q3),
                          format_double(s.max)});
    }
    return t;
}

std::string render_tol_error_svg(const FigureTable& table) {
    if (table.rows.empty()) return svg_no_data("tol-error");
    Svg svg(720, 480);
    std::vector<const std::vector<std::string>*> rows;
    for (const auto& r : table.rows) rows.push_back(&r);
    render_series_panel(svg, 0, 1, 3, 4, 5, rows, 40, 440, 70, 690,
                        "normalized final error vs. relative tolerance");
    return svg.finish();
}

std::string render_local_error_svg(const FigureTable& table) {
    if (table.rows.empty()) return svg_no_data("local-error");
    Svg svg(720, 900);
    std::vector<const std::vector<std::string>*> ebs, ean;
    for (const auto& r : table.rows) {
        if (r[0] == "e_bs") ebs.push_back(&r);
        else ean.push_back(&r);
    }
    if (!ebs.empty())
        render_series_panel(svg, 1, 2, 4, 5, 6, ebs, 40, 420, 70, 690,
                            "(a) averaged estimated local error");
    if (!ean.empty())
        render_series_panel(svg, 1, 2, 4, 5, 6, ean, 480, 860, 70, 690,
                            "(b) averaged analytic local error");
    return svg.finish();
}

std::string render_size_error_svg(const FigureTable& table) {
    if (table.rows.empty()) return svg_no_data("size-error");

    // Collect panels (tolerances) and size palette.
    std::vector<double> tols;
    std::set<int> sizes_set;
    for (const auto& r : table.rows) {
        const double tol = std::stod(r[0]);
        if (std::find(tols.begin(), tols.end(), tol) == tols.end())
            tols.push_back(tol);
        sizes_set.insert(std::stoi(r[2]));
    }
    const std::vector<int> sizes(sizes_set.begin(), sizes_set.end());

    const double panel_h = 260.0;
    const double width = 760.0;
    Svg svg(width, panel_h * static_cast<double>(tols.size()) + 40.0);

    for (size_t p = 0; p < tols.size(); ++p) {
        const double top = 30.0 + panel_h * static_cast<double>(p);
        const double bottom = top + panel_h - 60.0;
        const double left = 70.0, right = width - 30.0;

        std::vector<double> ys;
        for (const auto& r : table.rows)
            if (std::stod(r[0]) == tols[p])
                for (size_t c = 4; c <= 8; ++c) ys.push_back(fld(r, c));
        LogAxis yax = fit_axis(ys, bottom, top);
        draw_y_decades(svg, yax, left, right);
        svg.line(left, bottom, right, bottom, "#000000");
        svg.line(left, top, left, bottom, "#000000");
        svg.text(left, top - 8, "rel_tol = " + format_double(tols[p]), 12);

        const double group_w = (right - left) / 4.0;
        const double box_w =
            std::min(18.0, group_w / (static_cast<double>(sizes.size()) + 1.0));
        for (const auto& r : table.rows) {
            if (std::stod(r[0]) != tols[p]) continue;
            const int vr = variant_rank(r[1]);
            const auto si = static_cast<double>(
                std::find(sizes.begin(), sizes.end(), std::stoi(r[2])) -
                sizes.begin());
            const double cx = left + group_w * (vr + 0.5) +
                              box_w * (si - (static_cast<double>(sizes.size()) - 1) / 2.0);
            const double yp1 = yax.map(fld(r, 4));
            const double yq1 = yax.map(fld(r, 5));
            const double ymed = yax.map(fld(r, 6));
            const double yq3 = yax.map(fld(r, 7));
            const double yp99 = yax.map(fld(r, 8));
            // Shade darker with size.
            const int shade = 210 - static_cast<int>(
                150.0 * (si + 1.0) / static_cast<double>(sizes.size()));
            char fill[16];
            std::snprintf(fill, sizeof(fill), "#%02x%02xe0", shade, shade);
            svg.line(cx, yp1, cx, yq1, "#333333");
            svg.line(cx, yq3, cx, yp99, "#333333");
            svg.rect(cx - box_w / 2, yq3, box_w, yq1 - yq3, fill, "#333333");
            svg.line(cx - box_w / 2, ymed, cx + box_w / 2, ymed, "#000000", 1.5);
        }
        for (int v = 0; v < 4; ++v)
            svg.text(left + group_w * (v + 0.5), bottom + 16, kVariantOrder[v],
                     11, "middle");
    }
    return svg.finish();
}

std::string render_beta_table_svg(const FigureTable& table) {
    if (table.rows.empty()) return svg_no_data("beta-table");
    const double row_h = 22.0;
    Svg svg(640, row_h * static_cast<double>(table.rows.size() + 2) + 20.0);
    svg.text(20, 24, "beta distribution (min, q1, median, q3, max)", 13);
    double y = 24 + row_h;
    std::string head;
    for (const auto& h : table.header) head += h + "  ";
    svg.text(20, y, head, 12);
    for (const auto& r : table.rows) {
        y += row_h;
        std::string line;
        for (const auto& f : r) line += f + "  ";
        svg.text(20, y, line, 12);
    }
    return svg.finish();
}

ReportOutput emit_figure(const ResultSet& rs, const std::string& figure,
                         const std::string& out_dir,
                         std::optional<int> size_filter) {
    std::filesystem::create_directories(out_dir);
    FigureTable table;
    std::string svg;
    if (figure == "tol-error") {
        table = tol_error_table(rs, size_filter.value_or(largest_size(rs)));
        svg = render_tol_error_svg(table);
    } else if (figure == "size-error") {
        table = size_error_table(rs);
        svg = render_size_error_svg(table);
    } else if (figure == "local-error") {
        table = local_error_table(rs);
        svg = render_local_error_svg(table);
    } else if (figure == "beta-table") {
        table = beta_table(rs);
        svg = render_beta_table_svg(table);
    } else {
        throw std::invalid_argument("unknown figure: " + figure);
    }
    ReportOutput out;
    out.csv_path = out_dir + "/" + figure + ".csv";
    out.svg_path = out_dir + "/" + figure + ".svg";
    write_figure_csv(out.csv_path, table);
    std::ofstream sf(out.svg_path, std::ios::trunc);
    if (!sf) throw std::runtime_error("cannot write " + out.svg_path);
    sf << svg;
    return out;
}

}  // namespace mixedstep
