#pragma once
// JSON-lines trajectory records, one object per step:
//   {"t":..,"action":..,"reward":..,"done":..,"frame":"<base64>"}
// frame is 256 bytes, row-major, round(pixel * 255). action is -1 on the
// terminal observation of an episode (no action was taken there).

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "fg/env/env.hpp"

namespace fg::env {

struct TrajectoryStep {
    int t = 0;
    int action = -1;
    double reward = 0.0;
    bool done = false;
    Frame frame;
};

std::string base64_encode(const std::uint8_t* data, std::size_t n);
std::vector<std::uint8_t> base64_decode(std::string_view text);

std::string encode_frame(const Frame& frame);
Frame decode_frame(std::string_view text);

std::string trajectory_line(const TrajectoryStep& step);
TrajectoryStep parse_trajectory_line(std::string_view line);

void write_trajectory(std::ostream& os, const std::vector<TrajectoryStep>& steps);
std::vector<TrajectoryStep> read_trajectory(std::istream& is);

}  // namespace fg::env
