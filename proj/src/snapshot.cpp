#include "mvtc/snapshot.hpp"

#include "mvtc/errors.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace mvtc {
namespace {

template <typename T>
void put(std::ostream& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  std::array<unsigned char, sizeof(T)> bytes{};
  std::memcpy(bytes.data(), &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  out.write(reinterpret_cast<const char*>(bytes.data()), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  std::array<unsigned char, sizeof(T)> bytes{};
  if (!in.read(reinterpret_cast<char*>(bytes.data()), sizeof(T))) {
    throw IngestError(0, "truncated snapshot");
  }
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  T value;
  std::memcpy(&value, bytes.data(), sizeof(T));
  return value;
}

void put_header(std::ostream& out, const char* magic, const Dims4& d) {
  out.write(magic, 4);
  put<std::uint32_t>(out, kSnapshotVersion);
  for (std::uint64_t n : {d.I, d.J, d.K, d.S}) put<std::uint64_t>(out, n);
}

Dims4 get_header(std::istream& in, const char* magic) {
  char got[4];
  if (!in.read(got, 4) || std::memcmp(got, magic, 4) != 0) {
    throw IngestError(0, std::string("bad snapshot magic, expected ") + std::string(magic, 4));
  }
  const auto version = get<std::uint32_t>(in);
  if (version != kSnapshotVersion) {
    throw IngestError(0, "unsupported snapshot version " + std::to_string(version));
  }
  Dims4 d;
  d.I = get<std::uint64_t>(in);
  d.J = get<std::uint64_t>(in);
  d.K = get<std::uint64_t>(in);
  d.S = get<std::uint64_t>(in);
  return d;
}

}  // namespace

void write_tensor(std::ostream& out, const Tensor4& tensor) {
  put_header(out, "MVTC", tensor.dims());
  put<std::uint64_t>(out, tensor.size());
  for (double v : tensor.values()) put<double>(out, v);
}

Tensor4 read_tensor(std::istream& in) {
  const Dims4 d = get_header(in, "MVTC");
  const auto count = get<std::uint64_t>(in);
  if (count != d.size()) throw IngestError(0, "snapshot value count does not match dims");
  std::vector<double> values(count);
  for (auto& v : values) v = get<double>(in);
  return Tensor4(d, std::move(values));
}

void write_mask(std::ostream& out, const ObservationMask& mask) {
  const auto& d = mask.dims();
  put_header(out, "MVTM", d);
  for (std::size_t s = 0; s < d.S; ++s)
    for (std::size_t k = 0; k < d.K; ++k)
      put<std::uint8_t>(out, static_cast<std::uint8_t>(mask.slab_state(k, s)));
  const std::size_t n = d.I * d.J;
  for (std::size_t s = 0; s < d.S; ++s)
    for (std::size_t k = 0; k < d.K; ++k) {
      auto bits = mask.partial_entries(k, s);
      if (bits.empty()) continue;
      for (std::size_t byte = 0; byte < (n + 7) / 8; ++byte) {
        std::uint8_t packed = 0;
        for (std::size_t b = 0; b < 8 && byte * 8 + b < n; ++b)
          if (bits[byte * 8 + b]) packed |= static_cast<std::uint8_t>(1u << b);
        put<std::uint8_t>(out, packed);
      }
    }
}

ObservationMask read_mask(std::istream& in) {
  const Dims4 d = get_header(in, "MVTM");
  ObservationMask mask(d);
  std::vector<std::uint8_t> states(d.K * d.S);
  for (auto& st : states) {
    st = get<std::uint8_t>(in);
    if (st > 2) throw IngestError(0, "bad mask slab state");
  }
  const std::size_t n = d.I * d.J;
  for (std::size_t s = 0; s < d.S; ++s)
    for (std::size_t k = 0; k < d.K; ++k) {
      const auto st = states[k + d.K * s];
      if (st == 1) mask.set_slab(k, s, true);
      if (st != 2) continue;
      for (std::size_t byte = 0; byte < (n + 7) / 8; ++byte) {
        const auto packed = get<std::uint8_t>(in);
        for (std::size_t b = 0; b < 8 && byte * 8 + b < n; ++b) {
          const std::size_t e = byte * 8 + b;
          mask.set(e % d.I, e / d.I, k, s, (packed >> b) & 1u);
        }
      }
    }
  return mask;
}

namespace {
std::ofstream open_out(const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ArgumentError("cannot open " + path + " for writing");
  return f;
}
std::ifstream open_in(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ArgumentError("cannot open " + path);
  return f;
}
}  // namespace

void save_tensor(const std::string& path, const Tensor4& tensor) {
  auto f = open_out(path);
  write_tensor(f, tensor);
}
Tensor4 load_tensor(const std::string& path) {
  auto f = open_in(path);
  return read_tensor(f);
}
void save_mask(const std::string& path, const ObservationMask& mask) {
  auto f = open_out(path);
  write_mask(f, mask);
}
ObservationMask load_mask(const std::string& path) {
  auto f = open_in(path);
  return read_mask(f);
}

}  // namespace mvtc
