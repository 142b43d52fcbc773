#pragma once

#include <iosfwd>
#include <string>

#include "tst/model.hpp"

namespace tst {

// Binary layout, all integers and floats little-endian:
//   "TST1"
//   u32 field count, then the TSTConfig fields in declaration order
//     (extents/counts as u64, real values as f64, position encoding as u64:
//      0 = 1d, 1 = none)
//   u32 parameter count, then per parameter in named_parameters() order:
//     u32 rank, rank x u64 extents, f32 values

void write_checkpoint(std::ostream& out, const TSTModel<float>& model);
TSTModel<float> read_checkpoint(std::istream& in);

void save_checkpoint(const TSTModel<float>& model, const std::string& path);
TSTModel<float> load_checkpoint(const std::string& path);
/// Also rejects checkpoints whose architecture differs from `expected`.
TSTModel<float> load_checkpoint(const std::string& path, const TSTConfig& expected);

}  // namespace tst
