#pragma once

#include "mvtc/tensor.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace mvtc {

/// One ingested increment: `count` new items for (location, feature)
/// generated on GD `gd`, received on LD `ld`.
struct UpdateEvent {
  std::size_t location = 0;
  std::size_t feature = 0;
  std::int64_t gd = 0;
  std::int64_t ld = 0;
  double count = 0.0;

  bool operator==(const UpdateEvent&) const = default;
};

struct IngestOptions {
  std::size_t I = 0;  ///< locations
  std::size_t J = 0;  ///< features
  std::size_t K = 1;  ///< maximum updates per GD
  std::int64_t epoch = 0;    ///< GD of slab 0
  std::int64_t horizon = 0;  ///< latest LD (and GD) included
};

/// Update tensor X_t (I x J x K x S_t) with its age-dependent mask. GD slab
/// s (0-based) holds generation date epoch + s; S_t = horizon - epoch + 1.
class MultiVersionDataset {
 public:
  MultiVersionDataset() = default;
  MultiVersionDataset(IngestOptions options, Tensor4 updates, ObservationMask mask);

  std::size_t I() const { return options_.I; }
  std::size_t J() const { return options_.J; }
  std::size_t K() const { return options_.K; }
  std::size_t S() const { return updates_.dims().S; }
  std::int64_t epoch() const { return options_.epoch; }
  std::int64_t horizon() const { return options_.horizon; }
  const IngestOptions& options() const { return options_; }

  const Tensor4& update_tensor() const { return updates_; }
  const ObservationMask& mask() const { return mask_; }

  /// Number of leading fully reported GD slabs, max(S - K + 1, 0).
  std::size_t fully_observed_slabs() const;

  /// Same data replayed to a later horizon with extra events. Events with an
  /// LD beyond the new horizon are dropped, exactly as in ingest().
  MultiVersionDataset advance(std::span<const UpdateEvent> new_events,
                              std::int64_t new_horizon) const;

 private:
  IngestOptions options_{};
  Tensor4 updates_;
  ObservationMask mask_;
};

/// Slab-uniform age mask: (k, s) observed iff k + 1 <= horizon - gd(s) + 1.
ObservationMask age_mask(Dims4 dims, std::int64_t epoch, std::int64_t horizon);

/// Builds X_t from an event log. Update index k = ld - gd + 1, folded into
/// slot K when larger; duplicates are summed; LDs past the horizon skipped.
/// Throws IngestError naming the 1-based record for bad indices, ld < gd,
/// gd before the epoch, or negative/non-finite counts.
MultiVersionDataset ingest(std::span<const UpdateEvent> events, const IngestOptions& options);

/// Z_t: sum over the observed update slots.
Tensor3 aggregate(const MultiVersionDataset& ds);

/// Sum over the update mode of a (completed) update tensor.
Tensor3 marginalize(const Tensor4& completed);

/// Received totals as-is.
Tensor3 naive_estimate(const MultiVersionDataset& ds);

}  // namespace mvtc
