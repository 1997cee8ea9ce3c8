#include "mvtc/synth.hpp"

#include "mvtc/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace mvtc {
namespace {

// Independent streams for the parts of one generator run.
constexpr std::uint64_t kFactorStream = 0x9e3779b97f4a7c15ULL;
constexpr std::uint64_t kSplitStream = 0xbf58476d1ce4e5b9ULL;
constexpr std::uint64_t kMismatchStream = 0x94d049bb133111ebULL;

Matrix uniform_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  // Column-major fill order fixes the draw sequence.
  for (Eigen::Index c = 0; c < m.cols(); ++c)
    for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = u(rng);
  return m;
}

Matrix moving_average(const Matrix& m, std::size_t window) {
  const auto n = m.rows();
  const auto half = static_cast<Eigen::Index>(window / 2);
  Matrix out(n, m.cols());
  for (Eigen::Index r = 0; r < n; ++r) {
    const Eigen::Index lo = std::max<Eigen::Index>(0, r - half);
    const Eigen::Index hi = std::min<Eigen::Index>(n - 1, r + half);
    out.row(r) = m.middleRows(lo, hi - lo + 1).colwise().mean();
  }
  return out;
}

// Head increments are floored to multiples of ulp(total), so every partial
// sum is exact and the residual last increment closes the total bit for bit.
void fill_increments(double total, const std::vector<double>& w, double* out, std::size_t stride) {
  const std::size_t K = w.size();
  const double q = total > 0.0 ? std::nextafter(total, INFINITY) - total : 0.0;
  double partial = 0.0;
  for (std::size_t k = 0; k + 1 < K; ++k) {
    const double v = q > 0.0 ? std::floor(total * w[k] / q) * q : 0.0;
    out[k * stride] = std::min(v, total - partial);
    partial += out[k * stride];
  }
  out[(K - 1) * stride] = total - partial;
}

}  // namespace

std::vector<double> default_profile(std::size_t K) {
  if (K == 4) return {0.6, 0.25, 0.1, 0.05};
  std::vector<double> p(K);
  double v = 1.0;
  for (auto& x : p) {
    x = v;
    v *= 0.4;
  }
  const double sum = std::accumulate(p.begin(), p.end(), 0.0);
  for (auto& x : p) x /= sum;
  return p;
}

std::vector<double> GeneratorConfig::profile() const {
  return fractions.empty() ? default_profile(K) : fractions;
}

void GeneratorConfig::validate() const {
  if (I == 0 || J == 0 || S == 0 || K == 0 || F == 0) {
    throw ArgumentError("generator dimensions and rank must be >= 1");
  }
  if (!fractions.empty()) {
    if (fractions.size() != K) throw ArgumentError("delay profile needs K fractions");
    double sum = 0.0;
    for (double p : fractions) {
      if (!(p >= 0.0)) throw ArgumentError("delay fractions must be nonnegative");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-12) throw ArgumentError("delay fractions must sum to 1");
  }
  if (!concentration.empty()) {
    if (concentration.size() != K) throw ArgumentError("concentration needs K parameters");
    for (double a : concentration)
      if (!(a > 0.0)) throw ArgumentError("concentration parameters must be positive");
  }
  if (!(noise_scale >= 0.0)) throw ArgumentError("noise_scale must be nonnegative");
  if (!(mismatch_scale >= 0.0)) throw ArgumentError("mismatch_scale must be nonnegative");
  if (communities > I) throw ArgumentError("more communities than locations");
  if (smoothing_window == 0) throw ArgumentError("smoothing_window must be >= 1");
}

GroundTruth gen_ground_truth(const GeneratorConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed ^ kFactorStream);
  GroundTruth gt;
  auto& th = gt.factors;
  if (cfg.constant_factors) {
    const auto F = static_cast<Eigen::Index>(cfg.F);
    th.A = Matrix::Ones(static_cast<Eigen::Index>(cfg.I), F);
    th.B = Matrix::Ones(static_cast<Eigen::Index>(cfg.J), F);
    th.C = Matrix::Ones(static_cast<Eigen::Index>(cfg.K), F);
    th.D = Matrix::Ones(static_cast<Eigen::Index>(cfg.S), F);
  } else {
    if (cfg.communities > 0) {
      const Matrix centroids = uniform_matrix(cfg.communities, cfg.F, rng);
      std::uniform_int_distribution<std::size_t> pick(0, cfg.communities - 1);
      gt.community.resize(cfg.I);
      // Every community gets at least one member.
      for (std::size_t i = 0; i < cfg.I; ++i) gt.community[i] = i < cfg.communities ? i : pick(rng);
      std::shuffle(gt.community.begin(), gt.community.end(), rng);
      const Matrix jitter = uniform_matrix(cfg.I, cfg.F, rng);
      th.A.resize(static_cast<Eigen::Index>(cfg.I), static_cast<Eigen::Index>(cfg.F));
      for (std::size_t i = 0; i < cfg.I; ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        th.A.row(r) = (centroids.row(static_cast<Eigen::Index>(gt.community[i])).array() +
                       cfg.community_spread * (jitter.row(r).array() - 0.5))
                          .max(0.0)
                          .matrix();
      }
    } else {
      th.A = uniform_matrix(cfg.I, cfg.F, rng);
    }
    th.B = uniform_matrix(cfg.J, cfg.F, rng);
    th.C = uniform_matrix(cfg.K, cfg.F, rng);
    th.D = uniform_matrix(cfg.S, cfg.F, rng);
    if (cfg.factor_smoothness) th.D = moving_average(th.D, cfg.smoothing_window);
  }

  std::vector<Edge> edges;
  for (std::size_t u = 0; u < gt.community.size(); ++u)
    for (std::size_t v = u + 1; v < gt.community.size(); ++v)
      if (gt.community[u] == gt.community[v]) edges.push_back({u, v, 1.0});
  gt.graph = LocationGraph::from_edges(cfg.I, edges);

  const Eigen::RowVectorXd csum = th.C.colwise().sum();
  gt.totals = Tensor3(cfg.I, cfg.J, cfg.S);
  for (std::size_t s = 0; s < cfg.S; ++s)
    for (std::size_t j = 0; j < cfg.J; ++j)
      for (std::size_t i = 0; i < cfg.I; ++i) {
        double z = 0.0;
        for (std::size_t f = 0; f < cfg.F; ++f) {
          const auto ff = static_cast<Eigen::Index>(f);
          z += th.A(static_cast<Eigen::Index>(i), ff) * th.B(static_cast<Eigen::Index>(j), ff) *
               th.D(static_cast<Eigen::Index>(s), ff) * csum(ff);
        }
        gt.totals(i, j, s) = z;
      }

  if (cfg.mismatch_scale > 0.0) {
    std::mt19937_64 mrng(cfg.seed ^ kMismatchStream);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    auto vals = gt.totals.values();
    const double mean = std::accumulate(vals.begin(), vals.end(), 0.0) / static_cast<double>(vals.size());
    for (auto& z : vals) z += cfg.mismatch_scale * mean * u(mrng);
  }
  return gt;
}

Tensor4 split_updates(const Tensor3& totals, const GeneratorConfig& cfg) {
  cfg.validate();
  const std::size_t K = cfg.K;
  const Dims4 dims{totals.I(), totals.J(), K, totals.S()};
  Tensor4 x(dims);
  const std::vector<double> base = cfg.profile();
  const bool random_split = !cfg.concentration.empty();
  const bool jitter = cfg.noise_scale > 0.0;
  std::mt19937_64 rng(cfg.seed ^ kSplitStream);
  std::normal_distribution<double> normal;
  std::vector<std::gamma_distribution<double>> gammas;
  for (double a : cfg.concentration) gammas.emplace_back(a, 1.0);

  std::vector<double> w(K);
  const std::size_t stride = dims.I * dims.J;
  for (std::size_t s = 0; s < dims.S; ++s)
    for (std::size_t j = 0; j < dims.J; ++j)
      for (std::size_t i = 0; i < dims.I; ++i) {
        if (random_split) {
          for (std::size_t k = 0; k < K; ++k) w[k] = gammas[k](rng);
        } else {
          w = base;
        }
        if (jitter) {
          for (std::size_t k = 0; k < K; ++k) w[k] *= std::exp(cfg.noise_scale * normal(rng));
        }
        if (random_split || jitter) {
          const double sum = std::accumulate(w.begin(), w.end(), 0.0);
          if (sum > 0.0) {
            for (auto& v : w) v /= sum;
          } else {
            w = base;
          }
        }
        fill_increments(totals(i, j, s), w, &x(i, j, 0, s), stride);
      }
  return x;
}

FactorSet planted_update_factors(const GroundTruth& truth, const GeneratorConfig& cfg) {
  FactorSet out = truth.factors;
  const std::vector<double> p = cfg.profile();
  const Eigen::RowVectorXd csum = truth.factors.C.colwise().sum();
  for (std::size_t k = 0; k < cfg.K; ++k) out.C.row(static_cast<Eigen::Index>(k)) = p[k] * csum;
  return out;
}

EmittedData emit_events(const Tensor4& updates, std::int64_t horizon, std::size_t K,
                        std::int64_t epoch) {
  const auto& d = updates.dims();
  if (K != d.K) throw ArgumentError("K does not match the update tensor");
  const std::int64_t last_gd = epoch + static_cast<std::int64_t>(d.S) - 1;
  if (horizon > last_gd) throw ArgumentError("horizon beyond the generated GDs");
  EmittedData out;
  for (std::int64_t ld = epoch; ld <= horizon; ++ld) {
    for (std::int64_t gd = std::max(epoch, ld - static_cast<std::int64_t>(K) + 1); gd <= ld; ++gd) {
      const auto s = static_cast<std::size_t>(gd - epoch);
      const auto k = static_cast<std::size_t>(ld - gd);
      for (std::size_t i = 0; i < d.I; ++i)
        for (std::size_t j = 0; j < d.J; ++j) {
          const double v = updates(i, j, k, s);
          if (v != 0.0) out.events.push_back({i, j, gd, ld, v});
        }
    }
  }
  const std::int64_t first_withheld = horizon - static_cast<std::int64_t>(K) + 2;
  const Tensor3 z = marginalize(updates);
  for (std::int64_t gd = std::max(epoch, first_withheld); gd <= horizon; ++gd) {
    const auto s = static_cast<std::size_t>(gd - epoch);
    for (std::size_t i = 0; i < d.I; ++i)
      for (std::size_t j = 0; j < d.J; ++j) out.withheld.push_back({i, j, gd, z(i, j, s)});
  }
  return out;
}

std::vector<CellValue> truth_cells(const Tensor4& updates, std::int64_t epoch) {
  const Tensor3 z = marginalize(updates);
  std::vector<CellValue> cells;
  cells.reserve(z.size());
  for (std::size_t s = 0; s < z.S(); ++s)
    for (std::size_t i = 0; i < z.I(); ++i)
      for (std::size_t j = 0; j < z.J(); ++j)
        cells.push_back({i, j, epoch + static_cast<std::int64_t>(s), z(i, j, s)});
  return cells;
}

}  // namespace mvtc
