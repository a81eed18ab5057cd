#include "fg/eval/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "fg/error.hpp"

namespace fg::eval {
namespace {

constexpr double kWidth = 640, kHeight = 420;
constexpr double kLeft = 70, kRight = 170, kTop = 40, kBottom = 55;

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '&': out += "&amp;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

std::string px(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

struct Range {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    void add(double v) {
        if (!std::isfinite(v)) return;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    void settle() {
        if (!std::isfinite(lo)) lo = 0, hi = 1;
        if (hi - lo < 1e-12) lo -= 0.5, hi += 0.5;
    }
};

}  // namespace

std::string format_number(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

std::size_t CsvTable::column(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw Error("csv: missing column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
}

double CsvTable::number(std::size_t row, std::size_t col) const {
    const std::string& s = rows.at(row).at(col);
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size()) throw Error("csv: not a number: '" + s + "'");
    return v;
}

std::string to_csv(const CsvTable& table) {
    std::string out;
    auto line = [&](const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (cells[i].find_first_of(",\n\"") != std::string::npos) throw Error("csv: cell needs quoting");
            if (i) out += ',';
            out += cells[i];
        }
        out += '\n';
    };
    line(table.header);
    for (const auto& r : table.rows) line(r);
    return out;
}

CsvTable parse_csv(const std::string& text) {
    CsvTable t;
    std::istringstream is(text);
    std::string line;
    bool first = true;
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::string cell;
        std::istringstream ls(line);
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        if (line.back() == ',') cells.emplace_back();
        if (first) {
            t.header = std::move(cells);
            first = false;
        } else {
            if (cells.size() != t.header.size()) throw Error("csv: row width differs from header");
            t.rows.push_back(std::move(cells));
        }
    }
    if (first) throw Error("csv: empty input");
    return t;
}

void write_csv(const std::string& path, const CsvTable& table) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FileError("cannot write " + path);
    os << to_csv(table);
}

CsvTable read_csv(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FileError("cannot open " + path);
    std::ostringstream ss;
    ss << is.rdbuf();
    return parse_csv(ss.str());
}

CsvTable pr_table(const std::vector<PRCurve>& curves) {
    CsvTable t{{"trial", "threshold", "precision", "recall"}, {}};
    for (std::size_t i = 0; i < curves.size(); ++i) {
        for (const auto& p : curves[i].points) {
            t.rows.push_back({std::to_string(i), format_number(p.threshold), format_number(p.precision),
                              format_number(p.recall)});
        }
    }
    return t;
}

CsvTable reward_csv(const RewardTable& table) {
    CsvTable t{{"ratio", "defense", "trial", "return"}, {}};
    for (const auto& r : table.rows) {
        t.rows.push_back({format_number(r.ratio), r.defense, std::to_string(r.trial), format_number(r.total_return)});
    }
    return t;
}

CsvTable quality_table(const std::vector<StudyRecord>& records) {
    CsvTable t{{"snapshot", "mse", "map"}, {}};
    for (const auto& r : records) {
        t.rows.push_back({r.snapshot, format_number(r.mse), r.map ? format_number(*r.map) : "nan"});
    }
    return t;
}

CsvTable timeline_table(const std::vector<TimelinePoint>& points) {
    CsvTable t{{"t", "score", "attacked"}, {}};
    for (const auto& p : points) t.rows.push_back({std::to_string(p.t), format_number(p.score), p.attacked ? "1" : "0"});
    return t;
}

std::string render_svg(const Chart& chart) {
    Range xr, yr;
    for (const auto& s : chart.series) {
        for (double v : s.x) xr.add(v);
        for (double v : s.y) yr.add(v);
    }
    if (chart.band_lower_upper) {
        for (double v : chart.band_lower_upper->first) yr.add(v);
        for (double v : chart.band_lower_upper->second) yr.add(v);
        for (double v : chart.band_x) xr.add(v);
    }
    for (const auto& [a, b] : chart.shaded_x) xr.add(a), xr.add(b);
    xr.settle();
    yr.settle();
    const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
    auto sx = [&](double x) { return kLeft + (x - xr.lo) / (xr.hi - xr.lo) * pw; };
    auto sy = [&](double y) { return kTop + ph - (y - yr.lo) / (yr.hi - yr.lo) * ph; };

    std::ostringstream o;
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    o << "<text x=\"" << px(kLeft + pw / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">"
      << escape(chart.title) << "</text>\n";
    for (const auto& [a, b] : chart.shaded_x) {
        o << "<rect x=\"" << px(sx(a)) << "\" y=\"" << px(kTop) << "\" width=\"" << px(sx(b) - sx(a)) << "\" height=\""
          << px(ph) << "\" fill=\"#f4cccc\"/>\n";
    }
    if (chart.band_lower_upper) {
        const auto& [lo, hi] = *chart.band_lower_upper;
        o << "<polygon fill=\"#1f77b4\" fill-opacity=\"0.2\" points=\"";
        for (std::size_t i = 0; i < chart.band_x.size(); ++i) o << px(sx(chart.band_x[i])) << ',' << px(sy(hi[i])) << ' ';
        for (std::size_t i = chart.band_x.size(); i-- > 0;) o << px(sx(chart.band_x[i])) << ',' << px(sy(lo[i])) << ' ';
        o << "\"/>\n";
    }
    // Axes and ticks.
    o << "<line x1=\"" << px(kLeft) << "\" y1=\"" << px(kTop + ph) << "\" x2=\"" << px(kLeft + pw) << "\" y2=\""
      << px(kTop + ph) << "\" stroke=\"black\"/>\n";
    o << "<line x1=\"" << px(kLeft) << "\" y1=\"" << px(kTop) << "\" x2=\"" << px(kLeft) << "\" y2=\"" << px(kTop + ph)
      << "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 5; ++i) {
        const double fx = xr.lo + (xr.hi - xr.lo) * i / 5.0, fy = yr.lo + (yr.hi - yr.lo) * i / 5.0;
        o << "<line x1=\"" << px(sx(fx)) << "\" y1=\"" << px(kTop + ph) << "\" x2=\"" << px(sx(fx)) << "\" y2=\""
          << px(kTop + ph + 5) << "\" stroke=\"black\"/>\n";
        o << "<text x=\"" << px(sx(fx)) << "\" y=\"" << px(kTop + ph + 18) << "\" text-anchor=\"middle\">"
          << format_number(std::round(fx * 1000) / 1000) << "</text>\n";
        o << "<line x1=\"" << px(kLeft - 5) << "\" y1=\"" << px(sy(fy)) << "\" x2=\"" << px(kLeft) << "\" y2=\""
          << px(sy(fy)) << "\" stroke=\"black\"/>\n";
        o << "<text x=\"" << px(kLeft - 8) << "\" y=\"" << px(sy(fy) + 4) << "\" text-anchor=\"end\">"
          << format_number(std::round(fy * 1000) / 1000) << "</text>\n";
    }
    o << "<text x=\"" << px(kLeft + pw / 2) << "\" y=\"" << px(kHeight - 12) << "\" text-anchor=\"middle\">"
      << escape(chart.x_label) << "</text>\n";
    o << "<text transform=\"translate(18," << px(kTop + ph / 2) << ") rotate(-90)\" text-anchor=\"middle\">"
      << escape(chart.y_label) << "</text>\n";

    for (std::size_t i = 0; i < chart.series.size(); ++i) {
        const auto& s = chart.series[i];
        const char* color = kPalette[i % std::size(kPalette)];
        if (s.markers) {
            for (std::size_t k = 0; k < s.x.size(); ++k) {
                if (!std::isfinite(s.x[k]) || !std::isfinite(s.y[k])) continue;
                o << "<circle cx=\"" << px(sx(s.x[k])) << "\" cy=\"" << px(sy(s.y[k])) << "\" r=\"4\" fill=\"" << color
                  << "\"/>\n";
            }
        } else {
            o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
            for (std::size_t k = 0; k < s.x.size(); ++k) {
                if (!std::isfinite(s.x[k]) || !std::isfinite(s.y[k])) continue;
                o << px(sx(s.x[k])) << ',' << px(sy(s.y[k])) << ' ';
            }
            o << "\"/>\n";
        }
        const double ly = kTop + 10 + 18.0 * static_cast<double>(i);
        o << "<rect x=\"" << px(kWidth - kRight + 15) << "\" y=\"" << px(ly - 8) << "\" width=\"14\" height=\"8\" fill=\""
          << color << "\"/>\n";
        o << "<text x=\"" << px(kWidth - kRight + 35) << "\" y=\"" << px(ly) << "\">" << escape(s.name) << "</text>\n";
    }
    o << "</svg>\n";
    return o.str();
}

Chart chart_from_csv(const CsvTable& t) {
    auto has = [&](const char* name) { return std::find(t.header.begin(), t.header.end(), name) != t.header.end(); };
    Chart c;
    if (has("precision") && has("recall") && has("trial")) {
        c.title = "Precision-recall";
        c.x_label = "recall";
        c.y_label = "precision";
        const auto ct = t.column("trial"), cp = t.column("precision"), cr = t.column("recall");
        std::map<std::string, std::size_t> index;
        for (std::size_t r = 0; r < t.rows.size(); ++r) {
            const auto [it, added] = index.emplace(t.rows[r][ct], c.series.size());
            if (added) c.series.push_back({"trial " + t.rows[r][ct], {}, {}, false});
            c.series[it->second].x.push_back(t.number(r, cr));
            c.series[it->second].y.push_back(t.number(r, cp));
        }
    } else if (has("ratio") && has("defense") && has("return")) {
        c.title = "Return under attack";
        c.x_label = "attack ratio";
        c.y_label = "mean return";
        const auto cr = t.column("ratio"), cd = t.column("defense"), cv = t.column("return");
        std::map<std::string, std::map<double, std::pair<double, int>>> acc;
        std::vector<std::string> order;
        for (std::size_t r = 0; r < t.rows.size(); ++r) {
            const auto& d = t.rows[r][cd];
            if (!acc.count(d)) order.push_back(d);
            auto& cell = acc[d][t.number(r, cr)];
            cell.first += t.number(r, cv);
            cell.second += 1;
        }
        for (const auto& d : order) {
            Series s{d, {}, {}, false};
            for (const auto& [ratio, sum] : acc[d]) {
                s.x.push_back(ratio);
                s.y.push_back(sum.first / sum.second);
            }
            c.series.push_back(std::move(s));
        }
    } else if (has("snapshot") && has("mse") && has("map")) {
        c.title = "Predictor quality vs detection";
        c.x_label = "validation MSE";
        c.y_label = "mAP";
        Series s{"snapshots", {}, {}, true};
        const auto cm = t.column("mse"), ca = t.column("map");
        for (std::size_t r = 0; r < t.rows.size(); ++r) {
            s.x.push_back(t.number(r, cm));
            s.y.push_back(t.number(r, ca));
        }
        c.series.push_back(std::move(s));
    } else if (has("t") && has("score") && has("attacked")) {
        c.title = "Detector score over time";
        c.x_label = "step";
        c.y_label = "score";
        Series s{"score", {}, {}, false};
        const auto ct = t.column("t"), cs = t.column("score"), ca = t.column("attacked");
        bool open = false;
        double start = 0, prev_t = 0;
        for (std::size_t r = 0; r < t.rows.size(); ++r) {
            const double step = t.number(r, ct);
            s.x.push_back(step);
            s.y.push_back(t.number(r, cs));
            const bool attacked = t.rows[r][ca] == "1";
            if (attacked && !open) open = true, start = step;
            if (!attacked && open) {
                c.shaded_x.emplace_back(start, step);
                open = false;
            }
            prev_t = step;
        }
        if (open) c.shaded_x.emplace_back(start, prev_t + 1);
        c.series.push_back(std::move(s));
    } else {
        throw Error("plot: unrecognised CSV columns");
    }
    return c;
}

}  // namespace fg::eval
