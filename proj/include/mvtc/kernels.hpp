#pragma once

#include "mvtc/tensor.hpp"

#include <vector>

namespace mvtc {

// Column ordering convention shared by unfold and khatri_rao: in a mode-n
// unfolding the remaining modes appear in ascending order with the LAST one
// varying fastest, which is exactly the row order of the Khatri-Rao product
// of their factors taken left to right. Hence
//   unfold(reconstruct(theta), 1) == A * khatri_rao({B, C, D})^T
// and analogously for the other modes.

/// Mode-n unfolding (mode in 1..4): extent(n) rows, product of the other
/// extents as columns.
Matrix unfold(const Tensor4& tensor, int mode);

/// Columnwise Kronecker product, left to right. Needs >= 2 inputs with equal
/// column counts.
Matrix khatri_rao(const std::vector<Matrix>& factors);

/// unfold(T, mode) * khatri_rao(others) without forming the Khatri-Rao
/// matrix. `factors` are the three non-target factors in ascending mode order.
Matrix mttkrp(const Tensor4& tensor, const std::vector<Matrix>& factors, int mode);
Matrix mttkrp(const Tensor4& tensor, const Matrix& first, const Matrix& second,
              const Matrix& third, int mode);

/// Coordinate-list path; touches only stored entries.
Matrix mttkrp(const SparseTensor4& tensor, const std::vector<Matrix>& factors, int mode);

/// Mode-1 fiber projection P = unfold(T,1)^T * A, one row per (j, k, s)
/// fiber in storage order. The B/C/D MTTKRPs all reduce over this product,
/// so a solver sweep forms it once per update of A.
Matrix project_fibers(const Tensor4& tensor, const Matrix& A);

/// Finish a mode 2, 3 or 4 MTTKRP from a fiber projection. `first` and
/// `second` are the two remaining non-A factors in ascending mode order.
Matrix mttkrp_from_projection(const Matrix& projection, const Dims4& dims, const Matrix& first,
                              const Matrix& second, int mode);

/// Sum of F rank-1 tensors.
Tensor4 reconstruct(const FactorSet& theta);

enum class Keep { kInside, kOutside };

/// Zeroes every entry not in the kept set.
Tensor4 project_mask(const Tensor4& tensor, const ObservationMask& mask, Keep keep);

/// Hadamard product of Gram matrices of the given factors (the Gram of their
/// Khatri-Rao product).
Matrix gram_hadamard(const std::vector<const Matrix*>& factors);

}  // namespace mvtc
