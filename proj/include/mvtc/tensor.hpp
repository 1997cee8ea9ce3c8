#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace mvtc {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Extents of a location x feature x update-index x generation-date tensor.
struct Dims4 {
  std::size_t I = 0, J = 0, K = 0, S = 0;

  std::size_t size() const { return I * J * K * S; }
  /// Extent of mode `mode` (1-based).
  std::size_t extent(int mode) const;
  bool operator==(const Dims4&) const = default;
};

/// Dense 4-way tensor. Linearization: i fastest, then j, k, s, so that a
/// mode-1 fiber X(:, j, k, s) and a GD slab X(:, :, :, s) are contiguous.
class Tensor4 {
 public:
  Tensor4() = default;
  explicit Tensor4(Dims4 dims);
  Tensor4(Dims4 dims, std::vector<double> values);

  const Dims4& dims() const { return dims_; }
  std::size_t size() const { return values_.size(); }

  std::size_t index(std::size_t i, std::size_t j, std::size_t k, std::size_t s) const {
    return i + dims_.I * (j + dims_.J * (k + dims_.K * s));
  }
  double operator()(std::size_t i, std::size_t j, std::size_t k, std::size_t s) const {
    return values_[index(i, j, k, s)];
  }
  double& operator()(std::size_t i, std::size_t j, std::size_t k, std::size_t s) {
    return values_[index(i, j, k, s)];
  }

  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }
  const double* fiber(std::size_t j, std::size_t k, std::size_t s) const {
    return values_.data() + index(0, j, k, s);
  }
  double* fiber(std::size_t j, std::size_t k, std::size_t s) {
    return values_.data() + index(0, j, k, s);
  }

  bool operator==(const Tensor4&) const = default;

 private:
  Dims4 dims_{};
  std::vector<double> values_;
};

/// Dense location x feature x generation-date tensor (the aggregated counts).
/// Linearization i fastest, then j, then s.
class Tensor3 {
 public:
  Tensor3() = default;
  Tensor3(std::size_t I, std::size_t J, std::size_t S);

  std::size_t I() const { return I_; }
  std::size_t J() const { return J_; }
  std::size_t S() const { return S_; }
  std::size_t size() const { return values_.size(); }

  double operator()(std::size_t i, std::size_t j, std::size_t s) const {
    return values_[i + I_ * (j + J_ * s)];
  }
  double& operator()(std::size_t i, std::size_t j, std::size_t s) {
    return values_[i + I_ * (j + J_ * s)];
  }
  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }

  bool operator==(const Tensor3&) const = default;

 private:
  std::size_t I_ = 0, J_ = 0, S_ = 0;
  std::vector<double> values_;
};

/// Index set of observed entries. Stored per (k, s) slab: a slab is fully
/// observed, fully missing, or partial; only partial slabs carry a per-entry
/// bitmap.
class ObservationMask {
 public:
  enum class SlabState : std::uint8_t { kMissing = 0, kObserved = 1, kPartial = 2 };

  ObservationMask() = default;
  /// All entries missing.
  explicit ObservationMask(Dims4 dims);

  static ObservationMask full(Dims4 dims);
  static ObservationMask empty(Dims4 dims) { return ObservationMask(dims); }

  const Dims4& dims() const { return dims_; }

  SlabState slab_state(std::size_t k, std::size_t s) const { return slabs_[k + dims_.K * s]; }
  void set_slab(std::size_t k, std::size_t s, bool observed);
  void set(std::size_t i, std::size_t j, std::size_t k, std::size_t s, bool observed);
  bool contains(std::size_t i, std::size_t j, std::size_t k, std::size_t s) const;

  /// Per-entry flag for the partial slab (k, s); empty span otherwise.
  std::span<const std::uint8_t> partial_entries(std::size_t k, std::size_t s) const;

  /// True when every (k) slab of GD s is observed.
  bool gd_fully_observed(std::size_t s) const;
  std::size_t count() const;
  ObservationMask complement() const;

  bool operator==(const ObservationMask& other) const;

 private:
  Dims4 dims_{};
  std::vector<SlabState> slabs_;
  // I*J bitmaps of partial slabs; partial_index_[k + K*s] is -1 or a slot.
  std::vector<std::vector<std::uint8_t>> partial_;
  std::vector<std::int32_t> partial_index_;
};

/// Coordinate-list tensor, entries sorted by s then k (then j, i).
class SparseTensor4 {
 public:
  struct Entry {
    std::uint32_t i, j, k, s;
    double value;
  };

  SparseTensor4() = default;
  SparseTensor4(Dims4 dims, std::vector<Entry> entries);
  /// Keeps entries with |value| > 0.
  static SparseTensor4 from_dense(const Tensor4& dense);

  const Dims4& dims() const { return dims_; }
  std::span<const Entry> entries() const { return entries_; }
  std::size_t nnz() const { return entries_.size(); }
  Tensor4 to_dense() const;

 private:
  Dims4 dims_{};
  std::vector<Entry> entries_;
};

/// CP model parameters: location (A), feature (B), update-index (C) and
/// generation-date (D) factors sharing rank F.
struct FactorSet {
  Matrix A, B, C, D;

  std::size_t rank() const { return static_cast<std::size_t>(A.cols()); }
  Dims4 dims() const {
    return {static_cast<std::size_t>(A.rows()), static_cast<std::size_t>(B.rows()),
            static_cast<std::size_t>(C.rows()), static_cast<std::size_t>(D.rows())};
  }
  /// Factor of mode 1..4.
  Matrix& factor(int mode);
  const Matrix& factor(int mode) const;
  /// Throws ArgumentError unless all four share a column count.
  void check_rank() const;
  bool nonnegative() const;
};

}  // namespace mvtc
