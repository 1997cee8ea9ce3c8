#pragma once

#include "mvtc/tensor.hpp"

#include <iosfwd>
#include <string>

namespace mvtc {

// Tensor snapshot layout (all integers and values little-endian):
//   "MVTC" | version u32 | I J K S u64 | count u64 | count x f64
// Mask snapshot layout:
//   "MVTM" | version u32 | I J K S u64 | K*S slab states u8 (k fastest;
//   0 missing, 1 observed, 2 partial) | for each partial slab in the same
//   order, ceil(I*J/8) bytes of entry bits, i fastest, LSB first.
inline constexpr std::uint32_t kSnapshotVersion = 1;

void write_tensor(std::ostream& out, const Tensor4& tensor);
Tensor4 read_tensor(std::istream& in);
void write_mask(std::ostream& out, const ObservationMask& mask);
ObservationMask read_mask(std::istream& in);

void save_tensor(const std::string& path, const Tensor4& tensor);
Tensor4 load_tensor(const std::string& path);
void save_mask(const std::string& path, const ObservationMask& mask);
ObservationMask load_mask(const std::string& path);

}  // namespace mvtc
