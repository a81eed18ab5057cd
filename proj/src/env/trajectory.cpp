#include "fg/env/trajectory.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <istream>
#include <ostream>

#include <json.hpp>

#include "fg/error.hpp"

namespace fg::env {
namespace {

constexpr char kAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

int decode_char(char c) {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+') return 62;
    if (c == '/') return 63;
    return -1;
}

}  // namespace

std::string base64_encode(const std::uint8_t* data, std::size_t n) {
    std::string out;
    out.reserve((n + 2) / 3 * 4);
    for (std::size_t i = 0; i < n; i += 3) {
        const std::uint32_t b0 = data[i];
        const std::uint32_t b1 = i + 1 < n ? data[i + 1] : 0;
        const std::uint32_t b2 = i + 2 < n ? data[i + 2] : 0;
        const std::uint32_t v = (b0 << 16) | (b1 << 8) | b2;
        out.push_back(kAlphabet[(v >> 18) & 63]);
        out.push_back(kAlphabet[(v >> 12) & 63]);
        out.push_back(i + 1 < n ? kAlphabet[(v >> 6) & 63] : '=');
        out.push_back(i + 2 < n ? kAlphabet[v & 63] : '=');
    }
    return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
    if (text.size() % 4 != 0) throw Error("base64: length not a multiple of 4");
    std::vector<std::uint8_t> out;
    for (std::size_t i = 0; i < text.size(); i += 4) {
        int v[4];
        int pad = 0;
        for (int j = 0; j < 4; ++j) {
            const char c = text[i + j];
            if (c == '=' && i + 4 == text.size() && j >= 2) {
                v[j] = 0;
                ++pad;
            } else {
                v[j] = decode_char(c);
                if (v[j] < 0 || pad) throw Error("base64: invalid character");
            }
        }
        const std::uint32_t w = (v[0] << 18) | (v[1] << 12) | (v[2] << 6) | v[3];
        out.push_back(static_cast<std::uint8_t>(w >> 16));
        if (pad < 2) out.push_back(static_cast<std::uint8_t>((w >> 8) & 0xff));
        if (pad < 1) out.push_back(static_cast<std::uint8_t>(w & 0xff));
    }
    return out;
}

std::string encode_frame(const Frame& frame) {
    std::array<std::uint8_t, kPixels> bytes{};
    for (std::size_t i = 0; i < kPixels; ++i) {
        bytes[i] = static_cast<std::uint8_t>(std::lround(std::clamp(frame.px[i], 0.0f, 1.0f) * 255.0f));
    }
    return base64_encode(bytes.data(), bytes.size());
}

Frame decode_frame(std::string_view text) {
    const auto bytes = base64_decode(text);
    if (bytes.size() != kPixels) throw Error("frame: expected 256 bytes, got " + std::to_string(bytes.size()));
    Frame f;
    for (std::size_t i = 0; i < kPixels; ++i) f.px[i] = static_cast<float>(bytes[i]) / 255.0f;
    return f;
}

std::string trajectory_line(const TrajectoryStep& step) {
    nlohmann::ordered_json j;
    j["t"] = step.t;
    j["action"] = step.action;
    j["reward"] = step.reward;
    j["done"] = step.done;
    j["frame"] = encode_frame(step.frame);
    return j.dump();
}

TrajectoryStep parse_trajectory_line(std::string_view line) {
    try {
        const auto j = nlohmann::json::parse(line);
        TrajectoryStep s;
        s.t = j.at("t").get<int>();
        s.action = j.at("action").get<int>();
        s.reward = j.at("reward").get<double>();
        s.done = j.at("done").get<bool>();
        s.frame = decode_frame(j.at("frame").get<std::string>());
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw FileError(std::string("trajectory line: ") + e.what());
    }
}

void write_trajectory(std::ostream& os, const std::vector<TrajectoryStep>& steps) {
    for (const auto& s : steps) os << trajectory_line(s) << '\n';
}

std::vector<TrajectoryStep> read_trajectory(std::istream& is) {
    std::vector<TrajectoryStep> out;
    std::string line;
    while (std::getline(is, line)) {
        if (!line.empty()) out.push_back(parse_trajectory_line(line));
    }
    return out;
}

}  // namespace fg::env
