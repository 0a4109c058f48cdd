#pragma once

#include <cstddef>
#include <limits>
#include <map>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "json.hpp"
#include "presel/error.hpp"
#include "presel/util.hpp"

namespace presel {

using ojson = nlohmann::ordered_json;

struct SampleRecord {
  std::string sample_id;
  std::vector<std::string> task_ids;
  bool is_reference = false;
  bool text_only = false;  // no image; carried but never clustered or selected

  bool operator==(const SampleRecord&) const = default;
};

inline constexpr std::size_t kNoRow = std::numeric_limits<std::size_t>::max();

// Ordered sample records plus the derived task index. The index only covers
// image-bearing records, so a task made solely of text-only samples does not
// appear in it.
class DatasetManifest {
 public:
  DatasetManifest() = default;

  static DatasetManifest from_records(std::vector<SampleRecord> records) {
    DatasetManifest m;
    m.records_ = std::move(records);
    m.rebuild();
    return m;
  }

  [[nodiscard]] const std::vector<SampleRecord>& records() const noexcept { return records_; }
  [[nodiscard]] const SampleRecord& record(std::size_t i) const { return records_.at(i); }
  [[nodiscard]] std::size_t size() const noexcept { return records_.size(); }

  /// |D|: records that carry an image.
  [[nodiscard]] std::size_t image_count() const noexcept { return image_count_; }

  /// Task id -> record indices (ascending), text-only records excluded.
  [[nodiscard]] const std::map<std::string, std::vector<std::size_t>>& tasks() const noexcept {
    return tasks_;
  }

  [[nodiscard]] std::size_t task_count() const noexcept { return tasks_.size(); }

  /// Row of the feature matrix for a record, or kNoRow for text-only records.
  [[nodiscard]] std::size_t feature_row(std::size_t record) const { return feature_row_.at(record); }

  [[nodiscard]] std::size_t index_of(const std::string& sample_id) const {
    auto it = id_index_.find(sample_id);
    if (it == id_index_.end()) throw Error(ErrorKind::UnknownSample, "unknown sample id '" + sample_id + "'");
    return it->second;
  }

  [[nodiscard]] bool contains(const std::string& sample_id) const { return id_index_.count(sample_id) != 0; }

  [[nodiscard]] std::size_t reference_count() const noexcept {
    std::size_t n = 0;
    for (const auto& r : records_) n += (r.is_reference && !r.text_only) ? 1 : 0;
    return n;
  }

  [[nodiscard]] bool has_reference_flags() const noexcept { return reference_count() > 0; }

  /// Task members that are not reference samples: the engine-selectable pool.
  [[nodiscard]] std::vector<std::size_t> selectable_pool(const std::string& task_id) const {
    std::vector<std::size_t> pool;
    auto it = tasks_.find(task_id);
    if (it == tasks_.end()) return pool;
    for (std::size_t idx : it->second)
      if (!records_[idx].is_reference) pool.push_back(idx);
    return pool;
  }

  /// Copy with the given records flagged as references (all other flags cleared).
  [[nodiscard]] DatasetManifest with_references(const std::vector<std::size_t>& reference_records) const {
    DatasetManifest m = *this;
    for (auto& r : m.records_) r.is_reference = false;
    for (std::size_t idx : reference_records) m.records_.at(idx).is_reference = true;
    return m;
  }

 private:
  void rebuild() {
    tasks_.clear();
    id_index_.clear();
    feature_row_.assign(records_.size(), kNoRow);
    image_count_ = 0;
    for (std::size_t i = 0; i < records_.size(); ++i) {
      const auto& r = records_[i];
      if (r.sample_id.empty()) throw Error(ErrorKind::MalformedRecord, "record " + std::to_string(i) + " has an empty sample_id");
      if (!id_index_.emplace(r.sample_id, i).second)
        throw Error(ErrorKind::DuplicateId, "sample id '" + r.sample_id + "' appears more than once");
      if (r.task_ids.empty())
        throw Error(ErrorKind::MalformedRecord, "sample '" + r.sample_id + "' has no task_ids");
      std::unordered_set<std::string> seen;
      for (const auto& t : r.task_ids) {
        if (t.empty()) throw Error(ErrorKind::MalformedRecord, "sample '" + r.sample_id + "' has an empty task id");
        if (!seen.insert(t).second)
          throw Error(ErrorKind::MalformedRecord, "sample '" + r.sample_id + "' lists task '" + t + "' twice");
      }
      if (r.text_only) continue;
      feature_row_[i] = image_count_++;
      for (const auto& t : r.task_ids) tasks_[t].push_back(i);
    }
    if (image_count_ == 0) throw Error(ErrorKind::EmptyDataset, "manifest has no image-bearing records");
  }

  std::vector<SampleRecord> records_;
  std::map<std::string, std::vector<std::size_t>> tasks_;
  std::vector<std::size_t> feature_row_;
  std::unordered_map<std::string, std::size_t> id_index_;
  std::size_t image_count_ = 0;
};

// --- line format -----------------------------------------------------------
//
// {"sample_id":"img_0","task_ids":["vqa","ocr"],"is_reference":false,"text_only":false}

inline SampleRecord parse_sample_record(const std::string& line, std::size_t line_no = 0) {
  auto fail = [&](const std::string& why) {
    return Error(ErrorKind::MalformedRecord, "manifest line " + std::to_string(line_no + 1) + ": " + why);
  };
  ojson j;
  try {
    j = ojson::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw fail(e.what());
  }
  if (!j.is_object()) throw fail("record is not an object");
  SampleRecord r;
  try {
    if (!j.contains("sample_id") || !j["sample_id"].is_string()) throw fail("missing string sample_id");
    r.sample_id = j["sample_id"].get<std::string>();
    if (!j.contains("task_ids") || !j["task_ids"].is_array()) throw fail("missing task_ids array");
    r.task_ids = j["task_ids"].get<std::vector<std::string>>();
    if (j.contains("is_reference")) r.is_reference = j["is_reference"].get<bool>();
    if (j.contains("text_only")) r.text_only = j["text_only"].get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw fail(e.what());
  }
  return r;
}

inline std::string serialize_sample_record(const SampleRecord& r) {
  ojson j;
  j["sample_id"] = r.sample_id;
  j["task_ids"] = r.task_ids;
  j["is_reference"] = r.is_reference;
  j["text_only"] = r.text_only;
  return j.dump();
}

inline DatasetManifest parse_manifest(const std::vector<std::string>& lines) {
  std::vector<SampleRecord> records;
  records.reserve(lines.size());
  for (std::size_t i = 0; i < lines.size(); ++i) records.push_back(parse_sample_record(lines[i], i));
  return DatasetManifest::from_records(std::move(records));
}

inline DatasetManifest load_manifest(const std::string& path) { return parse_manifest(read_lines(path)); }

inline std::string serialize_manifest(const DatasetManifest& m) {
  std::string out;
  for (const auto& r : m.records()) {
    out += serialize_sample_record(r);
    out += '\n';
  }
  return out;
}

inline void save_manifest(const DatasetManifest& m, const std::string& path) { write_text(path, serialize_manifest(m)); }

}  // namespace presel
