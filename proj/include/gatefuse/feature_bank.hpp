// SPDX-License-Identifier: Apache-2.0
//
// Per-segment clip features and detection lists, plus the object-feature
// aggregation chain: context window -> top-K by score -> coordinatewise max.

#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "gatefuse/tensor.hpp"

namespace gatefuse {

/// Bank or file contents that violate an invariant. The message names the
/// offending line or record.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Detection {
  long frame_index = 0;
  double score = 0.0;  // in [0, 1]
  Vector feature;

  friend bool operator==(const Detection&, const Detection&) = default;
};

struct SegmentRecord {
  std::string segment_id;
  Vector clip_feature;
  long clip_center_frame = 0;
  std::vector<Detection> detections;
  std::optional<int> verb_label;
  std::optional<int> noun_label;

  friend bool operator==(const SegmentRecord&, const SegmentRecord&) = default;
};

struct FeatureBank {
  std::size_t dim_v = 0;
  std::size_t dim_o = 0;
  int verb_vocab_size = 0;
  int noun_vocab_size = 0;
  std::vector<SegmentRecord> records;

  /// Throws ValidationError naming the first violating record.
  void validate() const;

  friend bool operator==(const FeatureBank&, const FeatureBank&) = default;
};

struct AggregationConfig {
  int k = 10;
  int window = 5;  // frames, odd

  void validate() const;
};

/// Detections with |frame - center| <= (window - 1) / 2, in input order.
std::vector<Detection> context_window(const SegmentRecord& record, const AggregationConfig& cfg);

/// The k highest-scoring detections, descending by score. Ties go to the
/// lower frame index, then to the earlier input position.
std::vector<Detection> select_top_k(const std::vector<Detection>& detections, int k);

/// Coordinatewise max; the zero vector when `detections` is empty.
Vector maxpool_features(const std::vector<Detection>& detections, std::size_t dim_o);

Vector aggregate_object_feature(const SegmentRecord& record, const AggregationConfig& cfg,
                                std::size_t dim_o);

/// Line-delimited JSON: a header object, then one object per record.
FeatureBank read_feature_bank(std::istream& in);
FeatureBank load_feature_bank(const std::filesystem::path& path);
void write_feature_bank(std::ostream& out, const FeatureBank& bank);
void save_feature_bank(const std::filesystem::path& path, const FeatureBank& bank);

}  // namespace gatefuse
