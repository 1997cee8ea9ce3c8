#include "mvtc/tensor.hpp"

#include "mvtc/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <tuple>

namespace mvtc {

std::size_t Dims4::extent(int mode) const {
  switch (mode) {
    case 1: return I;
    case 2: return J;
    case 3: return K;
    case 4: return S;
    default: throw ArgumentError("mode must be in 1..4, got " + std::to_string(mode));
  }
}

Tensor4::Tensor4(Dims4 dims) : dims_(dims), values_(dims.size(), 0.0) {}

Tensor4::Tensor4(Dims4 dims, std::vector<double> values) : dims_(dims), values_(std::move(values)) {
  if (values_.size() != dims_.size()) {
    throw ArgumentError("tensor value count " + std::to_string(values_.size()) +
                        " does not match dims product " + std::to_string(dims_.size()));
  }
  for (double v : values_) {
    if (!std::isfinite(v)) throw ArgumentError("tensor entries must be finite");
  }
}

Tensor3::Tensor3(std::size_t I, std::size_t J, std::size_t S)
    : I_(I), J_(J), S_(S), values_(I * J * S, 0.0) {}

// ---------------------------------------------------------------------------

ObservationMask::ObservationMask(Dims4 dims)
    : dims_(dims),
      slabs_(dims.K * dims.S, SlabState::kMissing),
      partial_index_(dims.K * dims.S, -1) {}

ObservationMask ObservationMask::full(Dims4 dims) {
  ObservationMask m(dims);
  std::fill(m.slabs_.begin(), m.slabs_.end(), SlabState::kObserved);
  return m;
}

void ObservationMask::set_slab(std::size_t k, std::size_t s, bool observed) {
  if (k >= dims_.K || s >= dims_.S) throw ArgumentError("mask slab index out of range");
  const std::size_t at = k + dims_.K * s;
  slabs_[at] = observed ? SlabState::kObserved : SlabState::kMissing;
  if (partial_index_[at] >= 0) {
    partial_[static_cast<std::size_t>(partial_index_[at])].clear();
    partial_index_[at] = -1;
  }
}

void ObservationMask::set(std::size_t i, std::size_t j, std::size_t k, std::size_t s,
                          bool observed) {
  if (i >= dims_.I || j >= dims_.J || k >= dims_.K || s >= dims_.S) {
    throw ArgumentError("mask index out of range");
  }
  const std::size_t at = k + dims_.K * s;
  if (slabs_[at] != SlabState::kPartial) {
    const bool current = slabs_[at] == SlabState::kObserved;
    if (current == observed) return;
    partial_index_[at] = static_cast<std::int32_t>(partial_.size());
    partial_.emplace_back(dims_.I * dims_.J, current ? 1 : 0);
    slabs_[at] = SlabState::kPartial;
  }
  auto& bits = partial_[static_cast<std::size_t>(partial_index_[at])];
  bits[i + dims_.I * j] = observed ? 1 : 0;
}

bool ObservationMask::contains(std::size_t i, std::size_t j, std::size_t k, std::size_t s) const {
  const std::size_t at = k + dims_.K * s;
  switch (slabs_[at]) {
    case SlabState::kObserved: return true;
    case SlabState::kMissing: return false;
    case SlabState::kPartial:
      return partial_[static_cast<std::size_t>(partial_index_[at])][i + dims_.I * j] != 0;
  }
  return false;
}

std::span<const std::uint8_t> ObservationMask::partial_entries(std::size_t k, std::size_t s) const {
  const std::size_t at = k + dims_.K * s;
  if (slabs_[at] != SlabState::kPartial) return {};
  return partial_[static_cast<std::size_t>(partial_index_[at])];
}

bool ObservationMask::gd_fully_observed(std::size_t s) const {
  for (std::size_t k = 0; k < dims_.K; ++k) {
    const auto state = slab_state(k, s);
    if (state == SlabState::kMissing) return false;
    if (state == SlabState::kPartial) {
      auto bits = partial_entries(k, s);
      if (std::find(bits.begin(), bits.end(), 0) != bits.end()) return false;
    }
  }
  return true;
}

std::size_t ObservationMask::count() const {
  std::size_t n = 0;
  const std::size_t slab = dims_.I * dims_.J;
  for (std::size_t s = 0; s < dims_.S; ++s) {
    for (std::size_t k = 0; k < dims_.K; ++k) {
      switch (slab_state(k, s)) {
        case SlabState::kObserved: n += slab; break;
        case SlabState::kMissing: break;
        case SlabState::kPartial: {
          auto bits = partial_entries(k, s);
          n += static_cast<std::size_t>(std::count(bits.begin(), bits.end(), 1));
          break;
        }
      }
    }
  }
  return n;
}

ObservationMask ObservationMask::complement() const {
  ObservationMask out(dims_);
  for (std::size_t s = 0; s < dims_.S; ++s) {
    for (std::size_t k = 0; k < dims_.K; ++k) {
      switch (slab_state(k, s)) {
        case SlabState::kObserved: break;
        case SlabState::kMissing: out.set_slab(k, s, true); break;
        case SlabState::kPartial: {
          auto bits = partial_entries(k, s);
          for (std::size_t j = 0; j < dims_.J; ++j)
            for (std::size_t i = 0; i < dims_.I; ++i)
              if (!bits[i + dims_.I * j]) out.set(i, j, k, s, true);
          break;
        }
      }
    }
  }
  return out;
}

bool ObservationMask::operator==(const ObservationMask& other) const {
  if (dims_ != other.dims_) return false;
  for (std::size_t s = 0; s < dims_.S; ++s)
    for (std::size_t k = 0; k < dims_.K; ++k) {
      const auto a = slab_state(k, s);
      const auto b = other.slab_state(k, s);
      if (a != SlabState::kPartial && b != SlabState::kPartial) {
        if (a != b) return false;
        continue;
      }
      for (std::size_t j = 0; j < dims_.J; ++j)
        for (std::size_t i = 0; i < dims_.I; ++i)
          if (contains(i, j, k, s) != other.contains(i, j, k, s)) return false;
    }
  return true;
}

// ---------------------------------------------------------------------------

SparseTensor4::SparseTensor4(Dims4 dims, std::vector<Entry> entries)
    : dims_(dims), entries_(std::move(entries)) {
  for (const auto& e : entries_) {
    if (e.i >= dims_.I || e.j >= dims_.J || e.k >= dims_.K || e.s >= dims_.S) {
      throw ArgumentError("sparse entry index out of range");
    }
    if (!std::isfinite(e.value)) throw ArgumentError("sparse entries must be finite");
  }
  std::sort(entries_.begin(), entries_.end(), [](const Entry& a, const Entry& b) {
    return std::tie(a.s, a.k, a.j, a.i) < std::tie(b.s, b.k, b.j, b.i);
  });
}

SparseTensor4 SparseTensor4::from_dense(const Tensor4& dense) {
  const auto& d = dense.dims();
  std::vector<Entry> entries;
  for (std::size_t s = 0; s < d.S; ++s)
    for (std::size_t k = 0; k < d.K; ++k)
      for (std::size_t j = 0; j < d.J; ++j)
        for (std::size_t i = 0; i < d.I; ++i) {
          const double v = dense(i, j, k, s);
          if (v != 0.0) {
            entries.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j),
                               static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(s), v});
          }
        }
  SparseTensor4 out;
  out.dims_ = d;
  out.entries_ = std::move(entries);
  return out;
}

Tensor4 SparseTensor4::to_dense() const {
  Tensor4 out(dims_);
  for (const auto& e : entries_) out(e.i, e.j, e.k, e.s) += e.value;
  return out;
}

// ---------------------------------------------------------------------------

Matrix& FactorSet::factor(int mode) {
  switch (mode) {
    case 1: return A;
    case 2: return B;
    case 3: return C;
    case 4: return D;
    default: throw ArgumentError("mode must be in 1..4, got " + std::to_string(mode));
  }
}

const Matrix& FactorSet::factor(int mode) const {
  return const_cast<FactorSet*>(this)->factor(mode);
}

void FactorSet::check_rank() const {
  const auto F = A.cols();
  if (B.cols() != F || C.cols() != F || D.cols() != F) {
    throw ArgumentError("factor column counts differ (rank mismatch)");
  }
}

bool FactorSet::nonnegative() const {
  if (A.size() == 0 || B.size() == 0 || C.size() == 0 || D.size() == 0) return true;
  return A.minCoeff() >= 0.0 && B.minCoeff() >= 0.0 && C.minCoeff() >= 0.0 &&
         D.minCoeff() >= 0.0;
}

}  // namespace mvtc
