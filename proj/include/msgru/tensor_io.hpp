#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "msgru/tensor.hpp"

namespace msgru::num {

// Byte layout (all little-endian):
//   "MSGT" | u32 version = 1 | u32 ndim | u64 extent * ndim | f64 payload (row-major)
inline constexpr char kTensorMagic[4] = {'M', 'S', 'G', 'T'};
inline constexpr std::uint32_t kTensorFormatVersion = 1;

std::string encode_tensor(const Tensor& t);
Tensor decode_tensor(std::string_view bytes);

void write_tensor(const std::filesystem::path& path, const Tensor& t);
Tensor read_tensor(const std::filesystem::path& path);

}  // namespace msgru::num
