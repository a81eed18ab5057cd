#include "fg/nn/serialize.hpp"

#include <bit>
#include <cstdint>
#include <fstream>
#include <sstream>

#include "fg/error.hpp"

namespace fg::nn {
namespace {

constexpr char kMagic[4] = {'F', 'G', 'N', '1'};

void put_u32(std::ostream& os, std::uint32_t v) {
    const char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                       static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
    os.write(b, 4);
}

std::uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    if (!is.read(reinterpret_cast<char*>(b), 4)) throw FileError("model container: truncated header");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

void write_container(std::ostream& os, const std::vector<std::string>& descriptors,
                     std::span<const Tensor* const> params) {
    os.write(kMagic, 4);
    put_u32(os, static_cast<std::uint32_t>(descriptors.size()));
    for (const auto& d : descriptors) {
        put_u32(os, static_cast<std::uint32_t>(d.size()));
        os.write(d.data(), static_cast<std::streamsize>(d.size()));
    }
    for (const Tensor* t : params) {
        for (float v : t->values()) put_u32(os, std::bit_cast<std::uint32_t>(v));
    }
    if (!os) throw FileError("model container: write failed");
}

std::vector<std::string> read_descriptors(std::istream& is) {
    char magic[4];
    if (!is.read(magic, 4) || std::string(magic, 4) != std::string(kMagic, 4)) {
        throw FileError("model container: bad magic (expected FGN1)");
    }
    const std::uint32_t count = get_u32(is);
    if (count > 4096) throw FileError("model container: implausible descriptor count");
    std::vector<std::string> out;
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint32_t len = get_u32(is);
        if (len > 65536) throw FileError("model container: implausible descriptor length");
        std::string s(len, '\0');
        if (!is.read(s.data(), len)) throw FileError("model container: truncated descriptor");
        out.push_back(std::move(s));
    }
    return out;
}

void read_blocks(std::istream& is, std::span<Tensor* const> params) {
    for (Tensor* t : params) {
        for (float& v : t->values()) v = std::bit_cast<float>(get_u32(is));
        if (!t->all_finite()) throw FileError("model container: non-finite parameter");
    }
    if (is.peek() != std::char_traits<char>::eof()) throw FileError("model container: trailing bytes");
}

std::vector<std::string> network_descriptors(const Network& net) {
    std::ostringstream os;
    os << "input";
    for (std::size_t d : net.input_shape()) os << ' ' << d;
    std::vector<std::string> out{os.str()};
    for (auto& d : net.descriptors()) out.push_back(d);
    return out;
}

Network network_from_descriptors(std::span<const std::string> descriptors) {
    if (descriptors.empty() || descriptors[0].rfind("input", 0) != 0) {
        throw FileError("model container: first descriptor must be 'input <dims>'");
    }
    std::istringstream is(descriptors[0].substr(5));
    Shape shape;
    std::size_t d;
    while (is >> d) shape.push_back(d);
    std::vector<std::unique_ptr<Layer>> layers;
    try {
        for (std::size_t i = 1; i < descriptors.size(); ++i) layers.push_back(layer_from_descriptor(descriptors[i]));
        return Network(shape, std::move(layers));
    } catch (const FileError&) {
        throw;
    } catch (const Error& e) {
        throw FileError(std::string("model container: ") + e.what());
    }
}

void save_network(const std::string& path, const Network& net) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FileError("cannot write " + path);
    const auto params = net.params();
    write_container(os, network_descriptors(net), params);
}

Network load_network(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FileError("cannot open " + path);
    const auto desc = read_descriptors(is);
    Network net = network_from_descriptors(desc);
    read_blocks(is, net.params());
    return net;
}

}  // namespace fg::nn
