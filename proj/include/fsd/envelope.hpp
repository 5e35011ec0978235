#pragma once

#include <cstdint>
#include <optional>
#include <string>

namespace fsd {

using ElementId = std::string;

/// Where an envelope entered the pipeline from. Rehydrated envelopes are
/// re-entries produced by a dehydrator wake, never fresh submissions.
enum class Origin { External, Rehydrated };

/// The unit flowing through a pipeline: an application payload plus identity,
/// event time and retry metadata.
///
/// Invariants:
///  - retry_count == 0 exactly when origin == External
///  - first_seen_ms never exceeds the current clock time; event_time_ms may
///    (late data is admitted as-is)
///  - element_id is assigned by the submitter and survives rehydration
template <typename P>
struct Envelope {
  ElementId element_id;
  P payload{};
  std::int64_t event_time_ms = 0;
  std::int64_t first_seen_ms = 0;
  std::uint32_t retry_count = 0;
  Origin origin = Origin::External;
  /// Lineage link for envelopes derived by a splitter.
  std::optional<ElementId> parent_id;
};

}  // namespace fsd
