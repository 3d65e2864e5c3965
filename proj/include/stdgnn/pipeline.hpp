#pragma once

// Event log -> snapshot series per periodic component -> walk tensors.

#include <array>
#include <optional>

#include "stdgnn/grcnn.hpp"
#include "stdgnn/ingest.hpp"
#include "stdgnn/jrwalk.hpp"

namespace stdgnn {

/// One series per component; inactive components stay empty.
using SeriesSet = std::array<std::optional<SnapshotSeries>, kNumComponents>;

inline SeriesSet build_series(const EventLog& log, const std::array<std::size_t, kNumComponents>& T,
                              const std::array<bool, kNumComponents>& active, int window_len = 1) {
  SeriesSet out;
  for (auto g : kComponents) {
    const auto c = component_index(g);
    if (active[c]) out[c] = build_snapshots(log, g, window_len, static_cast<int>(T[c]));
  }
  return out;
}

/// Walk tensors for every slice of every built series. Slice t of component
/// c draws walks from seed derive_seed(seed, c, t).
inline ModelInputs build_inputs(const SeriesSet& series, const WalkParams& walk, Encoding encoding, std::size_t a_v,
                                std::uint64_t seed, unsigned threads = 1) {
  ModelInputs in;
  for (std::size_t c = 0; c < kNumComponents; ++c) {
    if (!series[c]) continue;
    for (const auto& snap : series[c]->snapshots) {
      const auto tables = build_transition(snap);
      const auto walks = generate_walks(tables, walk, derive_seed(seed, c, snap.index), threads);
      in.slices[c].push_back(walks_to_tensor(walks, encoding, a_v));
    }
  }
  return in;
}

/// Node vocabulary shared by the built series.
inline const Vocabulary& series_vocabulary(const SeriesSet& series) {
  for (const auto& s : series) {
    if (s) return *s->node_ids;
  }
  throw ValidationError("pipeline: no component series built");
}

}  // namespace stdgnn
