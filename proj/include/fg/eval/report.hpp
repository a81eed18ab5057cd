#pragma once
// CSV tables and SVG polyline charts for experiment outputs.

#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fg/eval/experiments.hpp"

namespace fg::eval {

// %.9g
std::string format_number(double v);

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::size_t column(const std::string& name) const;  // throws if absent
    double number(std::size_t row, std::size_t col) const;
};

std::string to_csv(const CsvTable& table);
CsvTable parse_csv(const std::string& text);
void write_csv(const std::string& path, const CsvTable& table);
CsvTable read_csv(const std::string& path);

// pr.csv (trial, threshold, precision, recall)
CsvTable pr_table(const std::vector<PRCurve>& curves);
// reward.csv (ratio, defense, trial, return)
CsvTable reward_csv(const RewardTable& table);
// quality.csv (snapshot, mse, map); an absent mAP is written as "nan"
CsvTable quality_table(const std::vector<StudyRecord>& records);
// timeline.csv (t, score, attacked)
CsvTable timeline_table(const std::vector<TimelinePoint>& points);

struct Series {
    std::string name;
    std::vector<double> x, y;
    bool markers = false;  // draw circles instead of a polyline
};

struct Chart {
    std::string title, x_label, y_label;
    std::vector<Series> series;
    std::vector<std::pair<double, double>> shaded_x;  // highlighted x intervals
    std::optional<std::pair<std::vector<double>, std::vector<double>>> band_lower_upper;
    std::vector<double> band_x;
};

std::string render_svg(const Chart& chart);

// Chooses a chart from the CSV header (pr, reward, quality or timeline).
Chart chart_from_csv(const CsvTable& table);

}  // namespace fg::eval
