#pragma once

#include <string>
#include <utility>
#include <vector>

#include "intent/nn.hpp"

namespace intent::nn {

// Flat binary parameter container:
//   bytes 0..7   magic "INTNNP1\n"
//   u32 LE       version (1)
//   u64 LE       JSON header length
//   ...          JSON header: {"sections":[{"name","rows","cols"},...]}
//   ...          payload: section tensors in header order, row-major,
//                little-endian IEEE-754 doubles
// Round-trips bit-exactly.
void save_params(const std::string& path,
                 const std::vector<std::pair<std::string, const Tensor2*>>& sections);

std::vector<std::pair<std::string, Tensor2>> load_params(const std::string& path);

}  // namespace intent::nn
