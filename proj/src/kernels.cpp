#include "mvtc/kernels.hpp"

#include "mvtc/errors.hpp"

#include <array>
#include <string>

namespace mvtc {
namespace {

using ConstMap = Eigen::Map<const Matrix>;

std::array<int, 3> other_modes(int mode) {
  switch (mode) {
    case 1: return {2, 3, 4};
    case 2: return {1, 3, 4};
    case 3: return {1, 2, 4};
    case 4: return {1, 2, 3};
    default: throw ArgumentError("mode must be in 1..4, got " + std::to_string(mode));
  }
}

void check_factor(const Matrix& m, std::size_t rows, Eigen::Index cols, const char* what) {
  if (static_cast<std::size_t>(m.rows()) != rows || m.cols() != cols) {
    throw ArgumentError(std::string("factor dimension mismatch for ") + what);
  }
}

}  // namespace

Matrix unfold(const Tensor4& tensor, int mode) {
  const auto& d = tensor.dims();
  const auto others = other_modes(mode);
  const std::array<std::size_t, 4> ext{d.I, d.J, d.K, d.S};
  const std::size_t n1 = ext[others[1] - 1];
  const std::size_t n2 = ext[others[2] - 1];
  Matrix out(static_cast<Eigen::Index>(d.extent(mode)),
             static_cast<Eigen::Index>(d.size() / d.extent(mode)));
  std::array<std::size_t, 4> idx{};
  for (idx[3] = 0; idx[3] < d.S; ++idx[3])
    for (idx[2] = 0; idx[2] < d.K; ++idx[2])
      for (idx[1] = 0; idx[1] < d.J; ++idx[1])
        for (idx[0] = 0; idx[0] < d.I; ++idx[0]) {
          const std::size_t col =
              (idx[others[0] - 1] * n1 + idx[others[1] - 1]) * n2 + idx[others[2] - 1];
          out(static_cast<Eigen::Index>(idx[mode - 1]), static_cast<Eigen::Index>(col)) =
              tensor(idx[0], idx[1], idx[2], idx[3]);
        }
  return out;
}

Matrix khatri_rao(const std::vector<Matrix>& factors) {
  if (factors.size() < 2) throw ArgumentError("khatri_rao needs at least two matrices");
  const Eigen::Index F = factors.front().cols();
  for (const auto& m : factors) {
    if (m.cols() != F) throw ArgumentError("khatri_rao inputs must share a column count");
  }
  Matrix acc = factors.front();
  for (std::size_t n = 1; n < factors.size(); ++n) {
    const Matrix& next = factors[n];
    Matrix out(acc.rows() * next.rows(), F);
    for (Eigen::Index f = 0; f < F; ++f)
      for (Eigen::Index r = 0; r < acc.rows(); ++r)
        out.col(f).segment(r * next.rows(), next.rows()) = acc(r, f) * next.col(f);
    acc = std::move(out);
  }
  return acc;
}

Matrix project_fibers(const Tensor4& tensor, const Matrix& A) {
  const auto& d = tensor.dims();
  check_factor(A, d.I, A.cols(), "mode 1");
  ConstMap unfolded(tensor.values().data(), static_cast<Eigen::Index>(d.I),
                    static_cast<Eigen::Index>(d.J * d.K * d.S));
  return A.transpose() * unfolded;  // F x JKS, one column per fiber
}

Matrix mttkrp_from_projection(const Matrix& projection, const Dims4& d, const Matrix& first,
                              const Matrix& second, int mode) {
  const Eigen::Index F = projection.rows();
  if (static_cast<std::size_t>(projection.cols()) != d.J * d.K * d.S) {
    throw ArgumentError("fiber projection does not match tensor dims");
  }
  // out is accumulated transposed (F x extent) so every update is a
  // contiguous column; fibers are visited in storage order.
  Matrix out_t;
  Vector w(F);
  switch (mode) {
    case 2: {
      check_factor(first, d.K, F, "mode 3");
      check_factor(second, d.S, F, "mode 4");
      out_t = Matrix::Zero(F, static_cast<Eigen::Index>(d.J));
      for (std::size_t s = 0; s < d.S; ++s)
        for (std::size_t k = 0; k < d.K; ++k) {
          w = first.row(static_cast<Eigen::Index>(k)).cwiseProduct(second.row(static_cast<Eigen::Index>(s))).transpose();
          const Eigen::Index base = static_cast<Eigen::Index>(d.J * (k + d.K * s));
          for (std::size_t j = 0; j < d.J; ++j)
            out_t.col(static_cast<Eigen::Index>(j)) +=
                projection.col(base + static_cast<Eigen::Index>(j)).cwiseProduct(w);
        }
      break;
    }
    case 3: {
      check_factor(first, d.J, F, "mode 2");
      check_factor(second, d.S, F, "mode 4");
      out_t = Matrix::Zero(F, static_cast<Eigen::Index>(d.K));
      Matrix bd(F, static_cast<Eigen::Index>(d.J));
      for (std::size_t s = 0; s < d.S; ++s) {
        for (std::size_t j = 0; j < d.J; ++j)
          bd.col(static_cast<Eigen::Index>(j)) =
              first.row(static_cast<Eigen::Index>(j)).cwiseProduct(second.row(static_cast<Eigen::Index>(s))).transpose();
        for (std::size_t k = 0; k < d.K; ++k) {
          const Eigen::Index base = static_cast<Eigen::Index>(d.J * (k + d.K * s));
          w.setZero();
          for (std::size_t j = 0; j < d.J; ++j)
            w += projection.col(base + static_cast<Eigen::Index>(j))
                     .cwiseProduct(bd.col(static_cast<Eigen::Index>(j)));
          out_t.col(static_cast<Eigen::Index>(k)) += w;
        }
      }
      break;
    }
    case 4: {
      check_factor(first, d.J, F, "mode 2");
      check_factor(second, d.K, F, "mode 3");
      out_t = Matrix::Zero(F, static_cast<Eigen::Index>(d.S));
      Matrix bc(F, static_cast<Eigen::Index>(d.J * d.K));
      for (std::size_t k = 0; k < d.K; ++k)
        for (std::size_t j = 0; j < d.J; ++j)
          bc.col(static_cast<Eigen::Index>(j + d.J * k)) =
              first.row(static_cast<Eigen::Index>(j)).cwiseProduct(second.row(static_cast<Eigen::Index>(k))).transpose();
      const Eigen::Index slab = static_cast<Eigen::Index>(d.J * d.K);
      for (std::size_t s = 0; s < d.S; ++s) {
        out_t.col(static_cast<Eigen::Index>(s)) =
            projection.middleCols(static_cast<Eigen::Index>(s) * slab, slab)
                .cwiseProduct(bc)
                .rowwise()
                .sum();
      }
      break;
    }
    default: throw ArgumentError("projection MTTKRP supports modes 2..4 only");
  }
  return out_t.transpose();
}

Matrix mttkrp(const Tensor4& tensor, const Matrix& first, const Matrix& second,
              const Matrix& third, int mode) {
  const auto& d = tensor.dims();
  const auto others = other_modes(mode);
  const Eigen::Index F = first.cols();
  check_factor(first, d.extent(others[0]), F, "first factor");
  check_factor(second, d.extent(others[1]), F, "second factor");
  check_factor(third, d.extent(others[2]), F, "third factor");
  if (mode != 1) {
    return mttkrp_from_projection(project_fibers(tensor, first), d, second, third, mode);
  }
  // Mode 1: out += X(:, :, k, s) * (B .* (c_k .* d_s)) per (k, s) slab.
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(d.I), F);
  Matrix weighted(static_cast<Eigen::Index>(d.J), F);
  for (std::size_t s = 0; s < d.S; ++s)
    for (std::size_t k = 0; k < d.K; ++k) {
      const Eigen::RowVectorXd w =
          second.row(static_cast<Eigen::Index>(k)).cwiseProduct(third.row(static_cast<Eigen::Index>(s)));
      weighted = first.array().rowwise() * w.array();
      ConstMap slab(tensor.fiber(0, k, s), static_cast<Eigen::Index>(d.I),
                    static_cast<Eigen::Index>(d.J));
      out.noalias() += slab * weighted;
    }
  return out;
}

Matrix mttkrp(const Tensor4& tensor, const std::vector<Matrix>& factors, int mode) {
  if (factors.size() != 3) throw ArgumentError("mttkrp needs exactly three factors");
  return mttkrp(tensor, factors[0], factors[1], factors[2], mode);
}

Matrix mttkrp(const SparseTensor4& tensor, const std::vector<Matrix>& factors, int mode) {
  if (factors.size() != 3) throw ArgumentError("mttkrp needs exactly three factors");
  const auto& d = tensor.dims();
  const auto others = other_modes(mode);
  const Eigen::Index F = factors[0].cols();
  for (int n = 0; n < 3; ++n) check_factor(factors[n], d.extent(others[n]), F, "sparse factor");
  Matrix out_t = Matrix::Zero(F, static_cast<Eigen::Index>(d.extent(mode)));
  for (const auto& e : tensor.entries()) {
    const std::array<std::uint32_t, 4> idx{e.i, e.j, e.k, e.s};
    auto col = out_t.col(idx[mode - 1]);
    for (Eigen::Index f = 0; f < F; ++f) {
      col(f) += e.value * factors[0](idx[others[0] - 1], f) * factors[1](idx[others[1] - 1], f) *
                factors[2](idx[others[2] - 1], f);
    }
  }
  return out_t.transpose();
}

Tensor4 reconstruct(const FactorSet& theta) {
  theta.check_rank();
  const Dims4 d = theta.dims();
  Tensor4 out(d);
  Matrix weighted(static_cast<Eigen::Index>(d.I), theta.A.cols());
  for (std::size_t s = 0; s < d.S; ++s)
    for (std::size_t k = 0; k < d.K; ++k) {
      const Eigen::RowVectorXd w = theta.C.row(static_cast<Eigen::Index>(k))
                                       .cwiseProduct(theta.D.row(static_cast<Eigen::Index>(s)));
      weighted = theta.A.array().rowwise() * w.array();
      Eigen::Map<Matrix> slab(out.fiber(0, k, s), static_cast<Eigen::Index>(d.I),
                              static_cast<Eigen::Index>(d.J));
      slab.noalias() = weighted * theta.B.transpose();
    }
  return out;
}

Tensor4 project_mask(const Tensor4& tensor, const ObservationMask& mask, Keep keep) {
  const auto& d = tensor.dims();
  if (!(mask.dims() == d)) throw ArgumentError("mask dims do not match tensor dims");
  Tensor4 out(d);
  const bool inside = keep == Keep::kInside;
  const std::size_t slab = d.I * d.J;
  for (std::size_t s = 0; s < d.S; ++s)
    for (std::size_t k = 0; k < d.K; ++k) {
      const double* src = tensor.fiber(0, k, s);
      double* dst = out.fiber(0, k, s);
      switch (mask.slab_state(k, s)) {
        case ObservationMask::SlabState::kObserved:
          if (inside) std::copy(src, src + slab, dst);
          break;
        case ObservationMask::SlabState::kMissing:
          if (!inside) std::copy(src, src + slab, dst);
          break;
        case ObservationMask::SlabState::kPartial: {
          auto bits = mask.partial_entries(k, s);
          for (std::size_t n = 0; n < slab; ++n)
            if ((bits[n] != 0) == inside) dst[n] = src[n];
          break;
        }
      }
    }
  return out;
}

Matrix gram_hadamard(const std::vector<const Matrix*>& factors) {
  if (factors.empty()) throw ArgumentError("gram_hadamard needs at least one factor");
  Matrix g = factors.front()->transpose() * *factors.front();
  for (std::size_t n = 1; n < factors.size(); ++n) {
    if (factors[n]->cols() != g.cols()) throw ArgumentError("gram_hadamard rank mismatch");
    g = g.cwiseProduct(factors[n]->transpose() * *factors[n]);
  }
  return g;
}

}  // namespace mvtc
