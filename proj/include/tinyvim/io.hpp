#pragma once

#include <string>
#include <utility>
#include <vector>

#include "tinyvim/tensor.hpp"

namespace tinyvim {

// "TVMT" raw tensor file: magic, u8 version=1, u8 scalar_kind (0=f32, 1=f64),
// u8 ndim, ndim u32 little-endian extents, row-major little-endian payload.
template <typename T>
void write_tvmt(const Tensor<T>& t, const std::string& path);
template <typename T>
Tensor<T> read_tvmt(const std::string& path);
ScalarKind probe_tvmt_kind(const std::string& path);

// "TVMW" weight file: magic, u8 version=1, u32 entry count; per entry
// u16 name length, UTF-8 name, u8 scalar_kind, u8 ndim, ndim u32 dims,
// little-endian payload.
template <typename T>
void write_tvmw(const std::vector<std::pair<std::string, const Tensor<T>*>>& entries,
                const std::string& path);
template <typename T>
std::vector<std::pair<std::string, Tensor<T>>> read_tvmw(const std::string& path);

}  // namespace tinyvim
