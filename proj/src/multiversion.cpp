#include "mvtc/multiversion.hpp"

#include "mvtc/errors.hpp"

#include <cmath>
#include <string>

namespace mvtc {
namespace {

void check_options(const IngestOptions& o) {
  if (o.I == 0 || o.J == 0) throw ArgumentError("I and J must be positive");
  if (o.K == 0) throw ArgumentError("K must be at least 1");
  if (o.horizon < o.epoch) throw ArgumentError("horizon precedes the epoch");
}

// Adds events into `x`; record numbers start at `first_record`.
void fold_events(Tensor4& x, const IngestOptions& o, std::span<const UpdateEvent> events,
                 std::size_t first_record) {
  std::size_t record = first_record;
  for (const auto& e : events) {
    if (e.location >= o.I) {
      throw IngestError(record, "location " + std::to_string(e.location) + " out of range [0, " +
                                    std::to_string(o.I) + ")");
    }
    if (e.feature >= o.J) {
      throw IngestError(record, "feature " + std::to_string(e.feature) + " out of range [0, " +
                                    std::to_string(o.J) + ")");
    }
    if (!std::isfinite(e.count) || e.count < 0.0) {
      throw IngestError(record, "count must be a nonnegative finite number");
    }
    if (e.ld < e.gd) throw IngestError(record, "loading date precedes generation date");
    if (e.gd < o.epoch) throw IngestError(record, "generation date precedes the epoch");
    ++record;
    if (e.ld > o.horizon) continue;
    const auto k = std::min<std::int64_t>(e.ld - e.gd, static_cast<std::int64_t>(o.K) - 1);
    const auto s = static_cast<std::size_t>(e.gd - o.epoch);
    x(e.location, e.feature, static_cast<std::size_t>(k), s) += e.count;
  }
}

}  // namespace

MultiVersionDataset::MultiVersionDataset(IngestOptions options, Tensor4 updates,
                                         ObservationMask mask)
    : options_(options), updates_(std::move(updates)), mask_(std::move(mask)) {
  if (!(mask_.dims() == updates_.dims())) throw ArgumentError("mask and update tensor dims differ");
}

std::size_t MultiVersionDataset::fully_observed_slabs() const {
  const auto s = static_cast<std::int64_t>(S()) - static_cast<std::int64_t>(K()) + 1;
  return s > 0 ? static_cast<std::size_t>(s) : 0;
}

ObservationMask age_mask(Dims4 dims, std::int64_t epoch, std::int64_t horizon) {
  ObservationMask mask(dims);
  for (std::size_t s = 0; s < dims.S; ++s) {
    const std::int64_t age = horizon - (epoch + static_cast<std::int64_t>(s)) + 1;
    for (std::size_t k = 0; k < dims.K; ++k) {
      if (static_cast<std::int64_t>(k) + 1 <= age) mask.set_slab(k, s, true);
    }
  }
  return mask;
}

MultiVersionDataset ingest(std::span<const UpdateEvent> events, const IngestOptions& options) {
  check_options(options);
  const Dims4 dims{options.I, options.J, options.K,
                   static_cast<std::size_t>(options.horizon - options.epoch + 1)};
  Tensor4 x(dims);
  fold_events(x, options, events, 1);
  return MultiVersionDataset(options, std::move(x), age_mask(dims, options.epoch, options.horizon));
}

MultiVersionDataset MultiVersionDataset::advance(std::span<const UpdateEvent> new_events,
                                                 std::int64_t new_horizon) const {
  if (new_horizon < options_.horizon) throw StreamError("cannot advance to an earlier horizon");
  IngestOptions o = options_;
  o.horizon = new_horizon;
  const Dims4 dims{o.I, o.J, o.K, static_cast<std::size_t>(o.horizon - o.epoch + 1)};
  std::vector<double> values(dims.size(), 0.0);
  std::copy(updates_.values().begin(), updates_.values().end(), values.begin());
  Tensor4 x(dims, std::move(values));
  fold_events(x, o, new_events, 1);
  return MultiVersionDataset(o, std::move(x), age_mask(dims, o.epoch, o.horizon));
}

Tensor3 aggregate(const MultiVersionDataset& ds) {
  const auto& x = ds.update_tensor();
  const auto& d = x.dims();
  Tensor3 z(d.I, d.J, d.S);
  for (std::size_t s = 0; s < d.S; ++s)
    for (std::size_t k = 0; k < d.K; ++k)
      for (std::size_t j = 0; j < d.J; ++j)
        for (std::size_t i = 0; i < d.I; ++i)
          if (ds.mask().contains(i, j, k, s)) z(i, j, s) += x(i, j, k, s);
  return z;
}

Tensor3 marginalize(const Tensor4& completed) {
  const auto& d = completed.dims();
  Tensor3 z(d.I, d.J, d.S);
  for (std::size_t s = 0; s < d.S; ++s)
    for (std::size_t k = 0; k < d.K; ++k)
      for (std::size_t j = 0; j < d.J; ++j) {
        const double* fiber = completed.fiber(j, k, s);
        for (std::size_t i = 0; i < d.I; ++i) z(i, j, s) += fiber[i];
      }
  return z;
}

Tensor3 naive_estimate(const MultiVersionDataset& ds) { return aggregate(ds); }

}  // namespace mvtc
