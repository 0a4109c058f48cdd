#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "presel/error.hpp"
#include "presel/manifest.hpp"
#include "presel/relevance.hpp"
#include "presel/util.hpp"

namespace presel {

struct TaskScore {
  double score = 0.0;         // mean IRS over the task's usable reference samples
  std::size_t ref_count = 0;  // usable reference samples (degenerate ones excluded)
  bool fallback = false;      // no usable reference sample; neutral score imputed
};

struct TaskBudget {
  std::string task_id;
  double score = 0.0;
  double weight = 0.0;
  std::size_t quota = 0;
  std::size_t ref_count = 0;
  std::size_t pool_size = 0;  // selectable (non-reference) members
  bool fallback = false;
};

/// Mean IRS per task. A multi-task reference sample counts toward each of its
/// tasks. Tasks without usable reference samples get the mean of the observed
/// task scores (1.0 if no task has any) and are flagged.
inline std::map<std::string, TaskScore> task_scores(std::span<const IrsRecord> records, const DatasetManifest& manifest) {
  std::map<std::string, double> sums;
  std::map<std::string, std::size_t> counts;
  for (const auto& r : records) {
    const auto& rec = manifest.record(manifest.index_of(r.sample_id));
    if (!rec.is_reference || rec.text_only)
      throw Error(ErrorKind::UnknownSample, "irs record '" + r.sample_id + "' is not a reference image sample");
    for (const auto& t : rec.task_ids) {
      sums[t] += r.irs;
      counts[t] += 1;
    }
  }
  std::map<std::string, TaskScore> out;
  double observed_sum = 0.0;
  std::size_t observed = 0;
  for (const auto& [task, members] : manifest.tasks()) {
    auto it = counts.find(task);
    if (it == counts.end()) continue;
    TaskScore s;
    s.ref_count = it->second;
    s.score = sums[task] / static_cast<double>(it->second);
    out[task] = s;
    observed_sum += s.score;
    ++observed;
  }
  const double neutral = observed > 0 ? observed_sum / static_cast<double>(observed) : 1.0;
  for (const auto& [task, members] : manifest.tasks())
    if (!out.count(task)) out[task] = TaskScore{neutral, 0, true};
  return out;
}

/// Temperature: explicit value, or 1/sqrt(M) when unset.
inline double resolve_tau(std::size_t task_count, std::optional<double> tau) {
  if (tau) {
    if (!(*tau > 0.0) || !std::isfinite(*tau)) throw Error(ErrorKind::InvalidConfig, "temperature must be positive");
    return *tau;
  }
  if (task_count == 0) throw Error(ErrorKind::InvalidScore, "no tasks");
  return 1.0 / std::sqrt(static_cast<double>(task_count));
}

/// Softmax over negated scores with temperature; lower score gets more weight.
inline std::map<std::string, double> task_weights(const std::map<std::string, double>& scores, std::optional<double> tau = {}) {
  if (scores.empty()) throw Error(ErrorKind::InvalidScore, "no task scores");
  const double t = resolve_tau(scores.size(), tau);
  double min_score = std::numeric_limits<double>::infinity();
  for (const auto& [task, s] : scores) {
    if (!std::isfinite(s)) throw Error(ErrorKind::InvalidScore, "score for task '" + task + "' is not finite");
    min_score = std::min(min_score, s);
  }
  std::map<std::string, double> w;
  double z = 0.0;
  for (const auto& [task, s] : scores) {
    double e = std::exp(-(s - min_score) / t);
    w[task] = e;
    z += e;
  }
  for (auto& [task, v] : w) v /= z;
  return w;
}

/// Largest-remainder (Hamilton) apportionment of `total` units over real shares
/// summing to `total`. Leftover units go to the largest fractional parts, ties
/// to the lower index. Entries with zero capacity never receive leftovers.
inline std::vector<std::size_t> largest_remainder(std::span<const double> shares, std::size_t total,
                                                  std::span<const std::size_t> caps = {}) {
  const std::size_t n = shares.size();
  std::vector<std::size_t> out(n, 0);
  std::vector<double> frac(n, 0.0);
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double x = std::max(0.0, shares[i]);
    double f = std::floor(x);
    out[i] = static_cast<std::size_t>(f);
    if (!caps.empty()) out[i] = std::min(out[i], caps[i]);
    frac[i] = x - f;
    assigned += out[i];
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return frac[a] > frac[b]; });
  // Rounding in the shares can leave the floors one unit over; take it back
  // from the smallest remainders.
  for (auto it = order.rbegin(); assigned > total && it != order.rend(); ++it)
    if (out[*it] > 0) {
      --out[*it];
      --assigned;
    }
  while (assigned < total) {
    bool progressed = false;
    for (std::size_t i : order) {
      if (assigned == total) break;
      if (!caps.empty() && out[i] >= caps[i]) continue;
      ++out[i];
      ++assigned;
      progressed = true;
    }
    if (!progressed) break;
  }
  return out;
}

/// Integer per-task quotas from weights. Tasks whose share exceeds their pool
/// are clamped to it and the remainder is re-apportioned over the others in
/// proportion to their weights, again by largest remainder.
inline std::map<std::string, std::size_t> task_quotas(const std::map<std::string, double>& weights, std::size_t target_total,
                                                      const std::map<std::string, std::size_t>& pool_sizes) {
  std::vector<std::string> ids;
  std::vector<double> w;
  std::vector<std::size_t> pools;
  std::size_t pool_sum = 0;
  for (const auto& [task, weight] : weights) {
    auto it = pool_sizes.find(task);
    if (it == pool_sizes.end()) throw Error(ErrorKind::StageMismatch, "no pool size for task '" + task + "'");
    ids.push_back(task);
    w.push_back(weight);
    pools.push_back(it->second);
    pool_sum += it->second;
  }
  if (target_total > pool_sum)
    throw Error(ErrorKind::InfeasibleBudget, "requested " + std::to_string(target_total) +
                                                 " samples but task pools hold at most " + std::to_string(pool_sum));
  const std::size_t n = ids.size();
  std::vector<std::size_t> quota(n, 0);
  std::vector<bool> clamped(n, false);
  std::size_t remaining = target_total;
  for (;;) {
    std::vector<std::size_t> active;
    double wsum = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      if (!clamped[i]) {
        active.push_back(i);
        wsum += w[i];
      }
    if (active.empty()) break;
    std::vector<double> shares(active.size());
    std::vector<std::size_t> caps(active.size());
    for (std::size_t a = 0; a < active.size(); ++a) {
      shares[a] = wsum > 0.0 ? w[active[a]] / wsum * static_cast<double>(remaining)
                             : static_cast<double>(remaining) / static_cast<double>(active.size());
      caps[a] = std::numeric_limits<std::size_t>::max();
    }
    auto q = largest_remainder(shares, remaining, caps);
    bool any_clamped = false;
    for (std::size_t a = 0; a < active.size(); ++a) {
      std::size_t i = active[a];
      if (q[a] > pools[i]) {
        quota[i] = pools[i];
        clamped[i] = true;
        remaining -= pools[i];
        any_clamped = true;
      }
    }
    if (!any_clamped) {
      for (std::size_t a = 0; a < active.size(); ++a) quota[active[a]] = q[a];
      break;
    }
  }
  std::map<std::string, std::size_t> out;
  for (std::size_t i = 0; i < n; ++i) out[ids[i]] = quota[i];
  return out;
}

// --- budget plan -----------------------------------------------------------

struct BudgetPlan {
  double ratio = 0.15;
  double tau = 1.0;
  bool tau_auto = true;
  std::size_t image_count = 0;    // |D|
  std::size_t total_size = 0;     // round(ratio * |D|), references included
  std::size_t ref_count = 0;      // |D_ref|
  std::size_t target_total = 0;   // engine-selected portion: total_size - ref_count
  std::vector<TaskBudget> tasks;  // task_id order

  [[nodiscard]] const TaskBudget& task(const std::string& id) const {
    for (const auto& t : tasks)
      if (t.task_id == id) return t;
    throw Error(ErrorKind::StageMismatch, "budget has no task '" + id + "'");
  }
};

inline std::size_t total_selection_size(double ratio, std::size_t image_count) {
  auto total = round_half_up(ratio * static_cast<double>(image_count));
  return std::min<std::size_t>(static_cast<std::size_t>(std::max<std::int64_t>(total, 0)), image_count);
}

inline std::map<std::string, std::size_t> pool_sizes(const DatasetManifest& manifest) {
  std::map<std::string, std::size_t> pools;
  for (const auto& [task, members] : manifest.tasks()) pools[task] = manifest.selectable_pool(task).size();
  return pools;
}

/// Budget from explicit per-task weights; `scores` only feeds the report.
inline BudgetPlan plan_from_weights(const DatasetManifest& manifest, const std::map<std::string, double>& weights,
                                    const std::map<std::string, TaskScore>& scores, double ratio, double tau, bool tau_auto) {
  BudgetPlan plan;
  plan.ratio = ratio;
  plan.tau = tau;
  plan.tau_auto = tau_auto;
  plan.image_count = manifest.image_count();
  plan.total_size = total_selection_size(ratio, plan.image_count);
  plan.ref_count = manifest.reference_count();
  if (plan.ref_count > plan.total_size)
    throw Error(ErrorKind::InfeasibleBudget, "reference set (" + std::to_string(plan.ref_count) +
                                                 ") is larger than the selection size (" + std::to_string(plan.total_size) + ")");
  plan.target_total = plan.total_size - plan.ref_count;
  auto pools = pool_sizes(manifest);
  auto quotas = task_quotas(weights, plan.target_total, pools);
  for (const auto& [task, w] : weights) {
    TaskBudget b;
    b.task_id = task;
    b.weight = w;
    b.quota = quotas.at(task);
    b.pool_size = pools.at(task);
    if (auto it = scores.find(task); it != scores.end()) {
      b.score = it->second.score;
      b.ref_count = it->second.ref_count;
      b.fallback = it->second.fallback;
    }
    plan.tasks.push_back(b);
  }
  return plan;
}

/// Task-importance budget: mean IRS -> softmax weights -> integer quotas.
inline BudgetPlan plan_budget(const DatasetManifest& manifest, std::span<const IrsRecord> irs_records, double ratio,
                              std::optional<double> tau = {}) {
  auto scores = task_scores(irs_records, manifest);
  std::map<std::string, double> raw;
  for (const auto& [task, s] : scores) raw[task] = s.score;
  const double t = resolve_tau(raw.size(), tau);
  return plan_from_weights(manifest, task_weights(raw, t), scores, ratio, t, !tau.has_value());
}

inline std::string serialize_budget_plan(const BudgetPlan& plan) {
  nlohmann::ordered_json head;
  head["kind"] = "plan";
  head["ratio"] = plan.ratio;
  head["tau"] = plan.tau;
  head["tau_auto"] = plan.tau_auto;
  head["image_count"] = plan.image_count;
  head["total_size"] = plan.total_size;
  head["ref_count"] = plan.ref_count;
  head["target_total"] = plan.target_total;
  std::string out = head.dump() + '\n';
  for (const auto& t : plan.tasks) {
    nlohmann::ordered_json j;
    j["kind"] = "task";
    j["task_id"] = t.task_id;
    j["score_s"] = t.score;
    j["weight_w"] = t.weight;
    j["quota"] = t.quota;
    j["ref_count"] = t.ref_count;
    j["pool_size"] = t.pool_size;
    j["fallback"] = t.fallback;
    out += j.dump() + '\n';
  }
  return out;
}

inline BudgetPlan parse_budget_plan(const std::vector<std::string>& lines) {
  BudgetPlan plan;
  bool have_head = false;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    try {
      auto j = nlohmann::json::parse(lines[i]);
      const auto kind = j.at("kind").get<std::string>();
      if (kind == "plan") {
        plan.ratio = j.at("ratio").get<double>();
        plan.tau = j.at("tau").get<double>();
        plan.tau_auto = j.at("tau_auto").get<bool>();
        plan.image_count = j.at("image_count").get<std::size_t>();
        plan.total_size = j.at("total_size").get<std::size_t>();
        plan.ref_count = j.at("ref_count").get<std::size_t>();
        plan.target_total = j.at("target_total").get<std::size_t>();
        have_head = true;
      } else if (kind == "task") {
        TaskBudget t;
        t.task_id = j.at("task_id").get<std::string>();
        t.score = j.at("score_s").get<double>();
        t.weight = j.at("weight_w").get<double>();
        t.quota = j.at("quota").get<std::size_t>();
        t.ref_count = j.at("ref_count").get<std::size_t>();
        t.pool_size = j.at("pool_size").get<std::size_t>();
        t.fallback = j.at("fallback").get<bool>();
        plan.tasks.push_back(t);
      }
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::MalformedRecord, "budget line " + std::to_string(i + 1) + ": " + e.what());
    }
  }
  if (!have_head) throw Error(ErrorKind::MalformedRecord, "budget report has no plan line");
  return plan;
}

inline BudgetPlan load_budget_plan(const std::string& path) { return parse_budget_plan(read_lines(path)); }

}  // namespace presel
