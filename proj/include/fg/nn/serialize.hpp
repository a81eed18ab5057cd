#pragma once
// Flat binary model container:
//   "FGN1" | u32 descriptor count | (u32 length, text)* | float32 blocks
// All integers and floats little-endian; parameter blocks follow in
// declaration order with sizes implied by the descriptors.

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "fg/nn/network.hpp"

namespace fg::nn {

void write_container(std::ostream& os, const std::vector<std::string>& descriptors,
                     std::span<const Tensor* const> params);
std::vector<std::string> read_descriptors(std::istream& is);
// Fills every tensor in order; throws FileError on truncation or trailing bytes.
void read_blocks(std::istream& is, std::span<Tensor* const> params);

// Descriptor list for a network: "input <dims>" followed by one line per layer.
std::vector<std::string> network_descriptors(const Network& net);
Network network_from_descriptors(std::span<const std::string> descriptors);

void save_network(const std::string& path, const Network& net);
Network load_network(const std::string& path);

}  // namespace fg::nn
