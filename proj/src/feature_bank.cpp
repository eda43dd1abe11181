// SPDX-License-Identifier: Apache-2.0

#include "gatefuse/feature_bank.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace gatefuse {

using nlohmann::json;

namespace {

std::string record_label(std::size_t index, const SegmentRecord& r) {
  std::ostringstream s;
  s << "record " << index << " ('" << r.segment_id << "')";
  return s.str();
}

}  // namespace

void FeatureBank::validate() const {
  if (dim_v == 0 || dim_o == 0) throw ValidationError("feature bank: dim_v and dim_o must be positive");
  if (verb_vocab_size <= 0 || noun_vocab_size <= 0)
    throw ValidationError("feature bank: vocabulary sizes must be positive");
  std::set<std::string> seen;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    const auto where = record_label(i, r);
    if (r.segment_id.empty()) throw ValidationError(where + ": empty segment_id");
    if (!seen.insert(r.segment_id).second) throw ValidationError(where + ": duplicate segment_id");
    if (r.clip_feature.dim() != dim_v) {
      std::ostringstream msg;
      msg << where << ": clip_feature dim " << r.clip_feature.dim() << " inconsistent with dim_v "
          << dim_v;
      throw ValidationError(msg.str());
    }
    for (std::size_t d = 0; d < r.detections.size(); ++d) {
      const auto& det = r.detections[d];
      if (!(det.score >= 0.0 && det.score <= 1.0)) {
        std::ostringstream msg;
        msg << where << ": detection " << d << " score " << det.score << " outside [0,1]";
        throw ValidationError(msg.str());
      }
      if (det.feature.dim() != dim_o) {
        std::ostringstream msg;
        msg << where << ": detection " << d << " feature dim " << det.feature.dim()
            << " inconsistent with dim_o " << dim_o;
        throw ValidationError(msg.str());
      }
    }
    if (r.verb_label && (*r.verb_label < 0 || *r.verb_label >= verb_vocab_size)) {
      std::ostringstream msg;
      msg << where << ": verb_label " << *r.verb_label << " out of range [0," << verb_vocab_size << ")";
      throw ValidationError(msg.str());
    }
    if (r.noun_label && (*r.noun_label < 0 || *r.noun_label >= noun_vocab_size)) {
      std::ostringstream msg;
      msg << where << ": noun_label " << *r.noun_label << " out of range [0," << noun_vocab_size << ")";
      throw ValidationError(msg.str());
    }
  }
}

void AggregationConfig::validate() const {
  if (k < 1) throw std::invalid_argument("aggregation: k must be >= 1");
  if (window < 1 || window % 2 == 0)
    throw std::invalid_argument("aggregation: window must be a positive odd integer");
}

std::vector<Detection> context_window(const SegmentRecord& record, const AggregationConfig& cfg) {
  cfg.validate();
  const long half = (cfg.window - 1) / 2;
  std::vector<Detection> out;
  for (const auto& det : record.detections) {
    const long offset = det.frame_index - record.clip_center_frame;
    if (offset >= -half && offset <= half) out.push_back(det);
  }
  return out;
}

std::vector<Detection> select_top_k(const std::vector<Detection>& detections, int k) {
  if (k < 1) throw std::invalid_argument("select_top_k: k must be >= 1");
  std::vector<Detection> sorted = detections;
  std::stable_sort(sorted.begin(), sorted.end(), [](const Detection& a, const Detection& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.frame_index < b.frame_index;
  });
  if (sorted.size() > static_cast<std::size_t>(k)) sorted.resize(static_cast<std::size_t>(k));
  return sorted;
}

Vector maxpool_features(const std::vector<Detection>& detections, std::size_t dim_o) {
  if (detections.empty()) return Vector(dim_o);
  Vector out = detections.front().feature;
  if (out.dim() != dim_o) throw_shape_error("maxpool_features", dim_o, out.dim());
  for (std::size_t d = 1; d < detections.size(); ++d) {
    const auto& f = detections[d].feature;
    if (f.dim() != dim_o) throw_shape_error("maxpool_features", dim_o, f.dim());
    for (std::size_t i = 0; i < dim_o; ++i) out[i] = std::max(out[i], f[i]);
  }
  return out;
}

Vector aggregate_object_feature(const SegmentRecord& record, const AggregationConfig& cfg,
                                std::size_t dim_o) {
  return maxpool_features(select_top_k(context_window(record, cfg), cfg.k), dim_o);
}

// ---------------------------------------------------------------------------
// I/O

namespace {

Vector parse_vector(const json& j, const char* key) {
  if (!j.is_array()) throw ValidationError(std::string(key) + " must be an array of numbers");
  std::vector<double> out;
  out.reserve(j.size());
  for (const auto& x : j) {
    if (!x.is_number()) throw ValidationError(std::string(key) + " must be an array of numbers");
    out.push_back(x.get<double>());
  }
  return Vector(std::move(out));
}

template <typename T>
T require_integer(const json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_number_integer())
    throw ValidationError(std::string("missing or non-integer '") + key + "'");
  return j.at(key).get<T>();
}

std::optional<int> optional_label(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  if (!j.at(key).is_number_integer()) throw ValidationError(std::string("non-integer '") + key + "'");
  return j.at(key).get<int>();
}

SegmentRecord parse_record(const json& j) {
  if (!j.is_object()) throw ValidationError("record is not an object");
  SegmentRecord r;
  if (!j.contains("segment_id") || !j.at("segment_id").is_string())
    throw ValidationError("missing or non-string 'segment_id'");
  r.segment_id = j.at("segment_id").get<std::string>();
  if (!j.contains("clip_feature")) throw ValidationError("missing 'clip_feature'");
  r.clip_feature = parse_vector(j.at("clip_feature"), "clip_feature");
  r.clip_center_frame = require_integer<long>(j, "center");
  if (j.contains("detections")) {
    const auto& dets = j.at("detections");
    if (!dets.is_array()) throw ValidationError("'detections' must be an array");
    for (const auto& d : dets) {
      if (!d.is_object()) throw ValidationError("detection is not an object");
      Detection det;
      det.frame_index = require_integer<long>(d, "frame");
      if (!d.contains("score") || !d.at("score").is_number())
        throw ValidationError("detection missing numeric 'score'");
      det.score = d.at("score").get<double>();
      if (!d.contains("feature")) throw ValidationError("detection missing 'feature'");
      det.feature = parse_vector(d.at("feature"), "feature");
      r.detections.push_back(std::move(det));
    }
  }
  r.verb_label = optional_label(j, "verb");
  r.noun_label = optional_label(j, "noun");
  return r;
}

json to_json(const SegmentRecord& r) {
  json j;
  j["segment_id"] = r.segment_id;
  j["clip_feature"] = r.clip_feature.raw();
  j["center"] = r.clip_center_frame;
  json dets = json::array();
  for (const auto& d : r.detections)
    dets.push_back({{"frame", d.frame_index}, {"score", d.score}, {"feature", d.feature.raw()}});
  j["detections"] = std::move(dets);
  if (r.verb_label) j["verb"] = *r.verb_label;
  if (r.noun_label) j["noun"] = *r.noun_label;
  return j;
}

}  // namespace

FeatureBank read_feature_bank(std::istream& in) {
  FeatureBank bank;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      if (!have_header) {
        if (!j.is_object()) throw ValidationError("header is not an object");
        bank.dim_v = require_integer<std::size_t>(j, "dim_v");
        bank.dim_o = require_integer<std::size_t>(j, "dim_o");
        bank.verb_vocab_size = require_integer<int>(j, "verb_vocab_size");
        bank.noun_vocab_size = require_integer<int>(j, "noun_vocab_size");
        have_header = true;
      } else {
        bank.records.push_back(parse_record(j));
      }
    } catch (const json::exception& e) {
      throw ValidationError("feature bank line " + std::to_string(line_no) + ": parse error: " + e.what());
    } catch (const ValidationError& e) {
      throw ValidationError("feature bank line " + std::to_string(line_no) + ": " + e.what());
    } catch (const NumericError& e) {
      throw ValidationError("feature bank line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!have_header) throw ValidationError("feature bank: missing header line");
  try {
    bank.validate();
  } catch (const ValidationError& e) {
    // Records start on the line after the header; blank lines are not expected
    // in files this library writes.
    throw ValidationError(std::string("feature bank: ") + e.what());
  }
  return bank;
}

FeatureBank load_feature_bank(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open feature bank '" + path.string() + "'");
  return read_feature_bank(in);
}

void write_feature_bank(std::ostream& out, const FeatureBank& bank) {
  bank.validate();
  const json header = {{"dim_v", bank.dim_v},
                       {"dim_o", bank.dim_o},
                       {"verb_vocab_size", bank.verb_vocab_size},
                       {"noun_vocab_size", bank.noun_vocab_size}};
  out << header.dump() << '\n';
  for (const auto& r : bank.records) out << to_json(r).dump() << '\n';
}

void save_feature_bank(const std::filesystem::path& path, const FeatureBank& bank) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write feature bank '" + path.string() + "'");
  write_feature_bank(out, bank);
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

}  // namespace gatefuse
