#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "presel/error.hpp"
#include "presel/util.hpp"

namespace presel {

// Reference-model statistics for one reference sample. Token-level logprobs
// (both sequences scoring the same response tokens) take precedence over the
// pre-aggregated NLL pair when both are present.
struct LossRecord {
  std::string sample_id;
  std::optional<std::vector<double>> logprobs_with_q;
  std::optional<std::vector<double>> logprobs_without_q;
  std::optional<double> nll_with_q;
  std::optional<double> nll_without_q;

  [[nodiscard]] bool has_tokens() const noexcept { return logprobs_with_q.has_value() && logprobs_without_q.has_value(); }

  bool operator==(const LossRecord&) const = default;
};

inline void check_loss_record(const LossRecord& r) {
  auto fail = [&](const std::string& why) {
    return Error(ErrorKind::MalformedRecord, "loss record '" + r.sample_id + "': " + why);
  };
  if (r.sample_id.empty()) throw Error(ErrorKind::MalformedRecord, "loss record with empty sample_id");
  if (r.logprobs_with_q.has_value() != r.logprobs_without_q.has_value())
    throw fail("token logprobs must be given for both contexts");
  if (r.nll_with_q.has_value() != r.nll_without_q.has_value()) throw fail("nll values must be given for both contexts");
  if (!r.has_tokens() && !r.nll_with_q) throw fail("neither token logprobs nor nll values present");
  if (r.has_tokens()) {
    if (r.logprobs_with_q->size() != r.logprobs_without_q->size())
      throw fail("with-Q and without-Q sequences differ in length");
    for (const auto* seq : {&*r.logprobs_with_q, &*r.logprobs_without_q})
      for (double v : *seq)
        if (!std::isfinite(v) || v > 0.0) throw Error(ErrorKind::InvalidLogprob, "loss record '" + r.sample_id + "': logprob " + std::to_string(v) + " is not <= 0");
  }
  if (r.nll_with_q) {
    for (double v : {*r.nll_with_q, *r.nll_without_q})
      if (!std::isfinite(v) || v < 0.0) throw fail("nll " + std::to_string(v) + " is not a finite non-negative value");
  }
}

// {"sample_id":"a","logprobs_with_q":[...],"logprobs_without_q":[...]}
// {"sample_id":"a","nll_with_q":1.2,"nll_without_q":2.0}
inline LossRecord parse_loss_record(const std::string& line, std::size_t line_no = 0) {
  auto fail = [&](const std::string& why) {
    return Error(ErrorKind::MalformedRecord, "loss line " + std::to_string(line_no + 1) + ": " + why);
  };
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw fail(e.what());
  }
  if (!j.is_object() || !j.contains("sample_id") || !j["sample_id"].is_string()) throw fail("missing string sample_id");
  LossRecord r;
  try {
    r.sample_id = j["sample_id"].get<std::string>();
    if (j.contains("logprobs_with_q")) r.logprobs_with_q = j["logprobs_with_q"].get<std::vector<double>>();
    if (j.contains("logprobs_without_q")) r.logprobs_without_q = j["logprobs_without_q"].get<std::vector<double>>();
    if (j.contains("nll_with_q")) r.nll_with_q = j["nll_with_q"].get<double>();
    if (j.contains("nll_without_q")) r.nll_without_q = j["nll_without_q"].get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw fail(e.what());
  }
  check_loss_record(r);
  return r;
}

inline std::string serialize_loss_record(const LossRecord& r) {
  nlohmann::ordered_json j;
  j["sample_id"] = r.sample_id;
  if (r.logprobs_with_q) j["logprobs_with_q"] = *r.logprobs_with_q;
  if (r.logprobs_without_q) j["logprobs_without_q"] = *r.logprobs_without_q;
  if (r.nll_with_q) j["nll_with_q"] = *r.nll_with_q;
  if (r.nll_without_q) j["nll_without_q"] = *r.nll_without_q;
  return j.dump();
}

inline std::vector<LossRecord> load_losses(const std::string& path) {
  auto lines = read_lines(path);
  std::vector<LossRecord> out;
  out.reserve(lines.size());
  for (std::size_t i = 0; i < lines.size(); ++i) out.push_back(parse_loss_record(lines[i], i));
  return out;
}

inline std::string serialize_losses(const std::vector<LossRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    out += serialize_loss_record(r);
    out += '\n';
  }
  return out;
}

inline void save_losses(const std::vector<LossRecord>& records, const std::string& path) {
  write_text(path, serialize_losses(records));
}

}  // namespace presel
