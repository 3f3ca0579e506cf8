#pragma once

#include <string>

#include "stabnet/layers.hpp"

namespace stabnet {

// Versioned text checkpoint. Values are written as C hexfloats ("%a"),
// which round-trip doubles bit-exactly, so save -> load -> save produces
// identical files. Layout (tokens are whitespace-separated):
//
//   stabnet-model 1
//   stages <count>
//   affine <in> <out> <activation> <mode>
//   beta <hex>
//   W <out> <in>
//   <hex> ... one row per line
//   b <out>
//   <hex> ...
//   lstm <input> <hidden> <mode>
//   beta 11
//   <hex> ... all 11 in branch order xi hi ci xf hf cf xc hc xo ho co
//   W_xi <rows> <cols>
//   ...            (all 11 matrices, then b_i b_f b_c b_o)
//   end
//
// load_network rejects anything it cannot parse and any non-finite
// value with a "corrupt checkpoint" error.

void save_network(const Network& net, const std::string& path);

Network load_network(const std::string& path);

}  // namespace stabnet
