#pragma once

#include <filesystem>
#include <string>

#include "scfm/tensor.hpp"

namespace scfm {

// STF binary tensor container, little-endian:
//   magic  "STF1"
//   dtype  u8 (1 = f64)
//   rank   u32
//   dims   rank x u64
//   data   row-major f64 payload
//
// Writes are whole-file atomic (temp file + rename).
void stf_write(const std::filesystem::path& path, const Tensor& t);
Tensor stf_read(const std::filesystem::path& path);

} // namespace scfm
