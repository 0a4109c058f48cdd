#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "presel/error.hpp"
#include "presel/losses.hpp"
#include "presel/util.hpp"

namespace presel {

inline constexpr double kIrsEpsilon = 1e-8;

/// Mean negated log-probability over the scored response tokens (natural log).
inline double response_nll(std::span<const double> token_logprobs) {
  if (token_logprobs.empty()) throw Error(ErrorKind::EmptyResponse, "response has no scored tokens");
  double sum = 0.0;
  for (double lp : token_logprobs) {
    if (!std::isfinite(lp) || lp > 0.0) throw Error(ErrorKind::InvalidLogprob, "logprob " + std::to_string(lp) + " is not <= 0");
    sum -= lp;
  }
  return sum / static_cast<double>(token_logprobs.size());
}

/// Instruction relevance: response loss with the question in context over the
/// loss without it. Below 1 means the question helps predict the response.
inline double irs(double nll_with_q, double nll_without_q) {
  if (!std::isfinite(nll_with_q) || !std::isfinite(nll_without_q) || nll_with_q < 0.0 || nll_without_q < 0.0)
    throw Error(ErrorKind::InvalidScore, "nll values must be finite and non-negative");
  if (nll_without_q < kIrsEpsilon)
    throw Error(ErrorKind::DegenerateDenominator, "response is predicted perfectly without the question");
  return nll_with_q / nll_without_q;
}

struct IrsRecord {
  std::string sample_id;
  double nll_with_q = 0.0;
  double nll_without_q = 0.0;
  double irs = 0.0;
};

struct IrsExclusion {
  std::string sample_id;
  double nll_with_q = 0.0;
  double nll_without_q = 0.0;
  std::string reason;
};

struct IrsResult {
  std::vector<IrsRecord> records;
  std::vector<IrsExclusion> excluded;
};

inline std::pair<double, double> record_nlls(const LossRecord& r) {
  if (r.has_tokens()) return {response_nll(*r.logprobs_with_q), response_nll(*r.logprobs_without_q)};
  if (r.nll_with_q && r.nll_without_q) return {*r.nll_with_q, *r.nll_without_q};
  throw Error(ErrorKind::MalformedRecord, "loss record '" + r.sample_id + "' carries no losses");
}

inline IrsResult compute_irs_records(std::span<const LossRecord> losses) {
  IrsResult out;
  out.records.reserve(losses.size());
  for (const auto& loss : losses) {
    auto [with_q, without_q] = record_nlls(loss);
    try {
      out.records.push_back({loss.sample_id, with_q, without_q, irs(with_q, without_q)});
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::DegenerateDenominator) throw;
      out.excluded.push_back({loss.sample_id, with_q, without_q, std::string(e.name())});
    }
  }
  return out;
}

// --- IRS report ------------------------------------------------------------
// One line per scored sample; excluded samples carry "irs":null and a reason.

inline std::string serialize_irs_report(const IrsResult& result) {
  std::string out;
  for (const auto& r : result.records) {
    nlohmann::ordered_json j;
    j["sample_id"] = r.sample_id;
    j["nll_with_q"] = r.nll_with_q;
    j["nll_without_q"] = r.nll_without_q;
    j["irs"] = r.irs;
    out += j.dump() + '\n';
  }
  for (const auto& e : result.excluded) {
    nlohmann::ordered_json j;
    j["sample_id"] = e.sample_id;
    j["nll_with_q"] = e.nll_with_q;
    j["nll_without_q"] = e.nll_without_q;
    j["irs"] = nullptr;
    j["excluded"] = e.reason;
    out += j.dump() + '\n';
  }
  return out;
}

inline IrsResult parse_irs_report(const std::vector<std::string>& lines) {
  IrsResult out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    try {
      auto j = nlohmann::json::parse(lines[i]);
      std::string id = j.at("sample_id").get<std::string>();
      double w = j.at("nll_with_q").get<double>();
      double wo = j.at("nll_without_q").get<double>();
      if (j.at("irs").is_null())
        out.excluded.push_back({id, w, wo, j.value("excluded", std::string("DegenerateDenominator"))});
      else
        out.records.push_back({id, w, wo, j.at("irs").get<double>()});
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::MalformedRecord, "irs report line " + std::to_string(i + 1) + ": " + e.what());
    }
  }
  return out;
}

inline IrsResult load_irs_report(const std::string& path) { return parse_irs_report(read_lines(path)); }

}  // namespace presel
