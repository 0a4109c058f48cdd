#pragma once

#include <set>
#include <string>
#include <unordered_set>
#include <vector>

#include "json.hpp"
#include "presel/features.hpp"
#include "presel/losses.hpp"
#include "presel/manifest.hpp"

namespace presel {

struct ValidationReport {
  std::vector<std::string> missing_losses;        // reference samples without a loss record
  std::vector<std::string> orphan_losses;         // loss records whose id is not in the manifest
  std::vector<std::string> non_reference_losses;  // loss records for samples not flagged as reference
  std::vector<std::string> duplicate_losses;      // ids with more than one loss record
  std::vector<std::string> no_reference_tasks;    // tasks whose importance falls back to the neutral score
  bool feature_rows_mismatch = false;

  [[nodiscard]] bool empty() const noexcept {
    return missing_losses.empty() && orphan_losses.empty() && non_reference_losses.empty() &&
           duplicate_losses.empty() && no_reference_tasks.empty() && !feature_rows_mismatch;
  }

  [[nodiscard]] nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["missing_losses"] = missing_losses;
    j["orphan_losses"] = orphan_losses;
    j["non_reference_losses"] = non_reference_losses;
    j["duplicate_losses"] = duplicate_losses;
    j["no_reference_tasks"] = no_reference_tasks;
    j["feature_rows_mismatch"] = feature_rows_mismatch;
    return j;
  }
};

inline ValidationReport validate_inputs(const DatasetManifest& manifest, const FeatureMatrix* features,
                                        const std::vector<LossRecord>& losses) {
  ValidationReport report;
  if (features != nullptr) report.feature_rows_mismatch = features->rows() != manifest.image_count();

  std::unordered_set<std::string> seen;
  std::unordered_set<std::size_t> usable;  // reference records with a loss record
  for (const auto& loss : losses) {
    if (!seen.insert(loss.sample_id).second) {
      report.duplicate_losses.push_back(loss.sample_id);
      continue;
    }
    if (!manifest.contains(loss.sample_id)) {
      report.orphan_losses.push_back(loss.sample_id);
      continue;
    }
    std::size_t idx = manifest.index_of(loss.sample_id);
    const auto& rec = manifest.record(idx);
    if (!rec.is_reference || rec.text_only) {
      report.non_reference_losses.push_back(loss.sample_id);
      continue;
    }
    usable.insert(idx);
  }
  for (std::size_t i = 0; i < manifest.size(); ++i) {
    const auto& rec = manifest.record(i);
    if (rec.is_reference && !rec.text_only && !usable.count(i)) report.missing_losses.push_back(rec.sample_id);
  }
  for (const auto& [task, members] : manifest.tasks()) {
    bool any = false;
    for (std::size_t idx : members) any |= usable.count(idx) != 0;
    if (!any) report.no_reference_tasks.push_back(task);
  }
  return report;
}

inline ValidationReport validate_inputs(const DatasetManifest& manifest, const FeatureMatrix& features,
                                        const std::vector<LossRecord>& losses) {
  return validate_inputs(manifest, &features, losses);
}

}  // namespace presel
