#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "json.hpp"
#include "presel/budgeting.hpp"
#include "presel/config.hpp"
#include "presel/error.hpp"
#include "presel/features.hpp"
#include "presel/geometry.hpp"
#include "presel/losses.hpp"
#include "presel/manifest.hpp"
#include "presel/relevance.hpp"
#include "presel/util.hpp"

namespace presel {

// --- per-cluster budgets ---------------------------------------------------

struct ClusterQuota {
  std::size_t cluster_id = 0;
  std::size_t size = 0;
  std::size_t raw = 0;  // floor(w * |A_c| / |T| * |D_S|), before any redistribution
  std::size_t n = 0;    // final budget
};

/// Splits a task quota over its clusters. The raw budget of each cluster is
/// floor(weight * size / pool * target_total); the shortfall against the task
/// quota goes one unit per cluster to the largest fractional remainders (ties
/// to the lower cluster id, full clusters skipped). When the raw budgets are
/// off by more than one unit per cluster (the task quota was clamped or
/// topped up by budgeting) the quota is re-split in proportion to size.
/// `sizes` may cover only part of the pool; `pool_size` is the denominator.
inline std::vector<ClusterQuota> cluster_quotas(double weight, std::span<const std::size_t> sizes, std::size_t pool_size,
                                                std::size_t target_total, std::size_t task_quota) {
  const std::size_t c = sizes.size();
  std::size_t sum_sizes = std::accumulate(sizes.begin(), sizes.end(), std::size_t{0});
  if (sum_sizes > pool_size) throw Error(ErrorKind::StageMismatch, "cluster sizes exceed the pool size");
  if (task_quota > sum_sizes) throw Error(ErrorKind::InfeasibleBudget, "task quota exceeds the clustered pool");
  std::vector<ClusterQuota> out(c);
  if (c == 0) return out;

  std::vector<double> share(c);
  std::vector<std::size_t> raw(c);
  std::size_t raw_sum = 0, capacity_clusters = 0;
  for (std::size_t i = 0; i < c; ++i) {
    share[i] = weight * static_cast<double>(sizes[i]) / static_cast<double>(pool_size) * static_cast<double>(target_total);
    raw[i] = static_cast<std::size_t>(std::floor(share[i]));
    out[i] = {i, sizes[i], raw[i], std::min(raw[i], sizes[i])};
    raw_sum += out[i].n;
    capacity_clusters += out[i].n < sizes[i] ? 1 : 0;
  }

  if (raw_sum <= task_quota && task_quota - raw_sum <= capacity_clusters) {
    std::vector<std::size_t> order(c);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return share[a] - std::floor(share[a]) > share[b] - std::floor(share[b]);
    });
    std::size_t left = task_quota - raw_sum;
    for (std::size_t i : order) {
      if (left == 0) break;
      if (out[i].n >= sizes[i]) continue;
      ++out[i].n;
      --left;
    }
    return out;
  }

  std::vector<double> rescaled(c);
  for (std::size_t i = 0; i < c; ++i)
    rescaled[i] = static_cast<double>(task_quota) * static_cast<double>(sizes[i]) / static_cast<double>(sum_sizes);
  auto n = largest_remainder(rescaled, task_quota, sizes);
  for (std::size_t i = 0; i < c; ++i) out[i].n = n[i];
  return out;
}

/// Positions of `members` ordered best first: higher score, then lower sample index.
inline std::vector<std::size_t> rank_positions(std::span<const std::size_t> members, std::span<const double> scores,
                                               std::size_t keep = std::numeric_limits<std::size_t>::max()) {
  if (members.size() != scores.size()) throw Error(ErrorKind::StageMismatch, "members and scores differ in length");
  keep = std::min(keep, members.size());
  std::vector<std::size_t> order(members.size());
  std::iota(order.begin(), order.end(), 0);
  auto better = [&](std::size_t a, std::size_t b) {
    return scores[a] > scores[b] || (scores[a] == scores[b] && members[a] < members[b]);
  };
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep), order.end(), better);
  order.resize(keep);
  return order;
}

/// The n_c highest-scoring members, best first; equal scores go to the lower
/// sample index.
inline std::vector<std::size_t> select_cluster(std::span<const std::size_t> members, std::span<const double> scores, std::size_t n_c) {
  if (n_c > members.size()) throw Error(ErrorKind::InfeasibleBudget, "cluster budget exceeds cluster size");
  std::vector<std::size_t> out;
  out.reserve(n_c);
  for (std::size_t p : rank_positions(members, scores, n_c)) out.push_back(members[p]);
  return out;
}

// --- reference split -------------------------------------------------------

/// Flags round(ref_ratio * |D|) image samples as references, drawn uniformly
/// without replacement from the seeded reference stream.
inline DatasetManifest ref_split(const DatasetManifest& manifest, double ref_ratio, std::uint64_t seed) {
  if (manifest.has_reference_flags()) throw Error(ErrorKind::RefAlreadyAssigned, "manifest already carries reference flags");
  if (!(ref_ratio > 0.0 && ref_ratio < 1.0)) throw Error(ErrorKind::InvalidConfig, "ref_ratio must be in (0, 1)");
  std::vector<std::size_t> images;
  for (std::size_t i = 0; i < manifest.size(); ++i)
    if (!manifest.record(i).text_only) images.push_back(i);
  auto count = static_cast<std::size_t>(std::max<std::int64_t>(round_half_up(ref_ratio * static_cast<double>(images.size())), 0));
  count = std::min(count, images.size());
  std::mt19937_64 rng(derive_seed(seed, Stage::RefSplit));
  for (std::size_t i = 0; i < count; ++i) {
    std::size_t j = std::uniform_int_distribution<std::size_t>(i, images.size() - 1)(rng);
    std::swap(images[i], images[j]);
  }
  images.resize(count);
  std::sort(images.begin(), images.end());
  return manifest.with_references(images);
}

// --- selection manifest ----------------------------------------------------

enum class Provenance { Reference, Selected };

struct SelectionEntry {
  std::string sample_id;
  std::string task_id;
  std::optional<std::size_t> cluster_id;
  std::optional<double> nc_score;
  Provenance provenance = Provenance::Selected;

  bool operator==(const SelectionEntry&) const = default;
};

struct SelectionManifest {
  nlohmann::ordered_json config;
  std::vector<SelectionEntry> entries;

  [[nodiscard]] std::size_t count(Provenance p) const {
    return static_cast<std::size_t>(std::count_if(entries.begin(), entries.end(), [&](const auto& e) { return e.provenance == p; }));
  }

  void check() const {
    std::unordered_set<std::string> seen;
    const bool random = config.is_object() && config.value("strategy", std::string{}) == "random";
    for (const auto& e : entries) {
      if (!seen.insert(e.sample_id).second) throw Error(ErrorKind::DuplicateId, "selection lists '" + e.sample_id + "' twice");
      if (e.provenance == Provenance::Reference && (e.cluster_id || e.nc_score))
        throw Error(ErrorKind::MalformedRecord, "reference entry '" + e.sample_id + "' carries cluster data");
      if (e.provenance == Provenance::Selected && !random && (!e.cluster_id || !e.nc_score))
        throw Error(ErrorKind::MalformedRecord, "selected entry '" + e.sample_id + "' lacks cluster data");
    }
  }
};

inline std::string serialize_selection(const SelectionManifest& s) {
  nlohmann::ordered_json head;
  head["config"] = s.config;
  std::string out = head.dump() + '\n';
  for (const auto& e : s.entries) {
    nlohmann::ordered_json j;
    j["sample_id"] = e.sample_id;
    j["task_id"] = e.task_id;
    j["cluster_id"] = e.cluster_id ? nlohmann::ordered_json(*e.cluster_id) : nlohmann::ordered_json(nullptr);
    j["nc_score"] = e.nc_score ? nlohmann::ordered_json(*e.nc_score) : nlohmann::ordered_json(nullptr);
    j["provenance"] = e.provenance == Provenance::Reference ? "reference" : "selected";
    out += j.dump() + '\n';
  }
  return out;
}

inline SelectionManifest parse_selection(const std::vector<std::string>& lines) {
  SelectionManifest s;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    try {
      auto j = nlohmann::ordered_json::parse(lines[i]);
      if (i == 0) {
        s.config = j.at("config");
        continue;
      }
      SelectionEntry e;
      e.sample_id = j.at("sample_id").get<std::string>();
      e.task_id = j.at("task_id").get<std::string>();
      if (!j.at("cluster_id").is_null()) e.cluster_id = j.at("cluster_id").get<std::size_t>();
      if (!j.at("nc_score").is_null()) e.nc_score = j.at("nc_score").get<double>();
      const auto prov = j.at("provenance").get<std::string>();
      if (prov == "reference") e.provenance = Provenance::Reference;
      else if (prov == "selected") e.provenance = Provenance::Selected;
      else throw Error(ErrorKind::MalformedRecord, "selection line " + std::to_string(i + 1) + ": bad provenance '" + prov + "'");
      s.entries.push_back(std::move(e));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::MalformedRecord, "selection line " + std::to_string(i + 1) + ": " + e.what());
    }
  }
  if (lines.empty()) throw Error(ErrorKind::MalformedRecord, "selection file is empty");
  s.check();
  return s;
}

inline SelectionManifest load_selection(const std::string& path) { return parse_selection(read_lines(path)); }
inline void save_selection(const SelectionManifest& s, const std::string& path) { write_text(path, serialize_selection(s)); }

// --- pipeline --------------------------------------------------------------

struct ClusterStats {
  std::size_t cluster_id = 0;
  std::size_t size = 0;
  std::size_t raw = 0;
  std::size_t quota = 0;
  std::size_t selected = 0;
};

struct TaskStats {
  TaskBudget budget;
  std::size_t clusters = 0;
  std::size_t selected = 0;
  double inertia = 0.0;
  std::size_t iterations = 0;
  std::vector<ClusterStats> cluster_stats;
};

struct ClusterDump {
  std::string task_id;
  std::vector<std::string> members;  // pool sample ids, manifest order
  ClusterAssignment assignment;
};

struct SelectionOutcome {
  SelectionManifest selection;
  BudgetPlan plan;
  std::vector<TaskStats> tasks;  // processing order
  std::vector<ClusterDump> clusters;
  std::vector<IrsExclusion> irs_excluded;
  std::size_t irs_scored = 0;
  std::size_t threads = 1;
  std::map<std::string, double> timings;
};

/// Tasks in processing order: descending weight, ties by task id.
inline std::vector<std::size_t> processing_order(const BudgetPlan& plan) {
  std::vector<std::size_t> order(plan.tasks.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (plan.tasks[a].weight != plan.tasks[b].weight) return plan.tasks[a].weight > plan.tasks[b].weight;
    return plan.tasks[a].task_id < plan.tasks[b].task_id;
  });
  return order;
}

namespace detail {

using Clock = std::chrono::steady_clock;

inline double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// One task's candidates: per cluster, the full ranking (best first) with the
// score of each ranked sample.
struct TaskCandidates {
  std::vector<std::vector<std::size_t>> ranked;  // record indices
  std::vector<std::vector<double>> scores;
  std::vector<std::size_t> quotas;
  bool with_clusters = true;
};

}  // namespace detail

/// Cluster, score and assemble a selection for a finished budget plan.
/// Tasks are served in processing order; a sample already taken (reference or
/// earlier task) is skipped and the task fills from its next-best candidates,
/// round-robin over clusters. Any task that runs dry passes its deficit on.
inline SelectionOutcome select_with_plan(const DatasetManifest& manifest, const FeatureMatrix& features, const BudgetPlan& plan,
                                         const SelectionConfig& cfg) {
  cfg.validate();
  if (features.rows() != manifest.image_count())
    throw Error(ErrorKind::RowCountMismatch, "feature rows do not match the manifest");
  if (plan.tasks.size() != manifest.task_count())
    throw Error(ErrorKind::StageMismatch, "budget and manifest disagree on the task set");
  for (const auto& t : plan.tasks)
    if (!manifest.tasks().count(t.task_id)) throw Error(ErrorKind::StageMismatch, "budget task '" + t.task_id + "' is not in the manifest");
  if (plan.ref_count != manifest.reference_count())
    throw Error(ErrorKind::StageMismatch, "budget was planned for a different reference set");

  SelectionOutcome out;
  out.plan = plan;
  out.threads = resolve_threads(cfg.threads);
  const auto order = processing_order(plan);
  const bool random = cfg.strategy == Strategy::Random;

  auto t_geo = detail::Clock::now();
  std::vector<detail::TaskCandidates> cand(plan.tasks.size());
  std::vector<TaskStats> stats(plan.tasks.size());
  double nc_seconds = 0.0;
  for (std::size_t ti = 0; ti < plan.tasks.size(); ++ti) {
    const auto& budget = plan.tasks[ti];
    auto& st = stats[ti];
    auto& tc = cand[ti];
    st.budget = budget;
    const auto pool = manifest.selectable_pool(budget.task_id);
    if (pool.size() != budget.pool_size) throw Error(ErrorKind::StageMismatch, "pool size of task '" + budget.task_id + "' changed");
    if (pool.empty()) continue;

    if (random) {
      std::vector<std::size_t> shuffled = pool;
      std::mt19937_64 rng(derive_seed(cfg.seed, Stage::RandomBaseline, budget.task_id));
      for (std::size_t i = 0; i + 1 < shuffled.size(); ++i)
        std::swap(shuffled[i], shuffled[std::uniform_int_distribution<std::size_t>(i, shuffled.size() - 1)(rng)]);
      tc.with_clusters = false;
      tc.ranked.push_back(std::move(shuffled));
      tc.scores.emplace_back();
      tc.quotas.push_back(budget.quota);
      st.clusters = 1;
      st.cluster_stats.push_back({0, pool.size(), budget.quota, budget.quota, 0});
      continue;
    }

    std::vector<std::size_t> rows(pool.size());
    for (std::size_t i = 0; i < pool.size(); ++i) rows[i] = manifest.feature_row(pool[i]);
    // Cluster count follows the whole task (references included), capped by
    // the selectable pool that is actually clustered.
    const std::size_t task_size = manifest.tasks().at(budget.task_id).size();
    const std::size_t c = std::min(default_cluster_count(task_size, cfg.clusters_per_100), pool.size());
    DenseMatrix x = features.gather(rows, cfg.normalize);
    auto km = kmeans(x.view(), c, derive_seed(cfg.seed, Stage::KMeans, budget.task_id), {cfg.max_iter, cfg.tol, out.threads});
    km.task_id = budget.task_id;
    st.clusters = c;
    st.inertia = km.inertia;
    st.iterations = km.iterations;

    auto t_nc = detail::Clock::now();
    auto members = km.members();
    tc.ranked.resize(c);
    tc.scores.resize(c);
    parallel_for(c, out.threads, [&](std::size_t cl) {
      std::vector<std::size_t> member_rows(members[cl].size());
      std::vector<std::size_t> member_records(members[cl].size());
      for (std::size_t i = 0; i < members[cl].size(); ++i) {
        member_rows[i] = rows[members[cl][i]];
        member_records[i] = pool[members[cl][i]];
      }
      DenseMatrix raw = features.gather(member_rows);
      auto scores = nc_scores(raw.view(), cfg.k);
      auto pos = rank_positions(member_records, scores);
      std::vector<std::size_t> ranked(pos.size());
      std::vector<double> ranked_scores(pos.size());
      for (std::size_t r = 0; r < pos.size(); ++r) {
        ranked[r] = member_records[pos[r]];
        ranked_scores[r] = scores[pos[r]];
      }
      tc.ranked[cl] = std::move(ranked);
      tc.scores[cl] = std::move(ranked_scores);
    });
    nc_seconds += detail::seconds_since(t_nc);

    auto quotas = cluster_quotas(budget.weight, km.sizes, pool.size(), plan.target_total, budget.quota);
    for (const auto& q : quotas) {
      tc.quotas.push_back(q.n);
      st.cluster_stats.push_back({q.cluster_id, q.size, q.raw, q.n, 0});
    }
    ClusterDump dump;
    dump.task_id = budget.task_id;
    for (std::size_t idx : pool) dump.members.push_back(manifest.record(idx).sample_id);
    dump.assignment = std::move(km);
    out.clusters.push_back(std::move(dump));
  }
  out.timings["clustering_and_nc"] = detail::seconds_since(t_geo);
  out.timings["nc"] = nc_seconds;

  auto t_asm = detail::Clock::now();
  std::vector<bool> taken(manifest.size(), false);
  auto& entries = out.selection.entries;
  for (std::size_t i = 0; i < manifest.size(); ++i) {
    const auto& r = manifest.record(i);
    if (!r.is_reference || r.text_only) continue;
    taken[i] = true;
    entries.push_back({r.sample_id, r.task_ids.front(), std::nullopt, std::nullopt, Provenance::Reference});
  }

  std::vector<std::vector<std::size_t>> cursor(plan.tasks.size());
  for (std::size_t ti = 0; ti < plan.tasks.size(); ++ti) cursor[ti].assign(cand[ti].ranked.size(), 0);

  auto take_next = [&](std::size_t ti, std::size_t cl) {
    auto& tc = cand[ti];
    auto& pos = cursor[ti][cl];
    while (pos < tc.ranked[cl].size() && taken[tc.ranked[cl][pos]]) ++pos;
    if (pos == tc.ranked[cl].size()) return false;
    std::size_t rec = tc.ranked[cl][pos];
    taken[rec] = true;
    SelectionEntry e{manifest.record(rec).sample_id, plan.tasks[ti].task_id, std::nullopt, std::nullopt, Provenance::Selected};
    if (tc.with_clusters) {
      e.cluster_id = cl;
      e.nc_score = tc.scores[cl][pos];
    }
    entries.push_back(std::move(e));
    ++pos;
    ++stats[ti].selected;
    ++stats[ti].cluster_stats[cl].selected;
    return true;
  };
  auto round_robin = [&](std::size_t ti, std::size_t want) {
    while (want > 0) {
      bool progressed = false;
      for (std::size_t cl = 0; cl < cand[ti].ranked.size() && want > 0; ++cl)
        if (take_next(ti, cl)) {
          --want;
          progressed = true;
        }
      if (!progressed) break;
    }
    return want;
  };

  std::size_t carry = 0;
  for (std::size_t ti : order) {
    std::size_t deficit = carry;
    for (std::size_t cl = 0; cl < cand[ti].ranked.size(); ++cl)
      for (std::size_t q = 0; q < cand[ti].quotas[cl]; ++q)
        if (!take_next(ti, cl)) {
          deficit += cand[ti].quotas[cl] - q;
          break;
        }
    carry = round_robin(ti, deficit);
  }
  for (std::size_t ti : order) {
    if (carry == 0) break;
    carry = round_robin(ti, carry);
  }
  if (carry > 0)
    throw Error(ErrorKind::InfeasibleBudget, std::to_string(carry) + " samples could not be placed after deduplication");
  out.timings["assembly"] = detail::seconds_since(t_asm);

  out.selection.config = cfg.echo(plan.tau);
  out.selection.check();
  for (std::size_t ti : order) out.tasks.push_back(std::move(stats[ti]));
  return out;
}

/// Reuses the manifest's reference flags, or draws a reference set when none
/// are present and ref_ratio > 0.
inline DatasetManifest prepare_reference(const DatasetManifest& manifest, const SelectionConfig& cfg) {
  if (manifest.has_reference_flags() || cfg.ref_ratio <= 0.0) return manifest;
  return ref_split(manifest, cfg.ref_ratio, cfg.seed);
}

/// Loss records that belong to reference image samples of the manifest (first
/// record per id); everything else is reported by validate_inputs.
inline std::vector<LossRecord> usable_losses(const DatasetManifest& manifest, const std::vector<LossRecord>& losses) {
  std::vector<LossRecord> out;
  std::unordered_set<std::string> seen;
  for (const auto& l : losses) {
    if (!manifest.contains(l.sample_id) || !seen.insert(l.sample_id).second) continue;
    const auto& r = manifest.record(manifest.index_of(l.sample_id));
    if (r.is_reference && !r.text_only) out.push_back(l);
  }
  return out;
}

inline SelectionOutcome run_pipeline(const DatasetManifest& input, const FeatureMatrix& features,
                                     const std::vector<LossRecord>& losses, const SelectionConfig& cfg) {
  cfg.validate();
  auto t0 = detail::Clock::now();
  DatasetManifest manifest = prepare_reference(input, cfg);
  auto usable = usable_losses(manifest, losses);
  IrsResult irs = compute_irs_records(usable);
  double t_irs = detail::seconds_since(t0);

  auto t1 = detail::Clock::now();
  BudgetPlan plan;
  std::map<std::string, TaskScore> scores = task_scores(irs.records, manifest);
  std::map<std::string, double> weights;
  const double m = static_cast<double>(manifest.task_count());
  double tau = resolve_tau(manifest.task_count(), cfg.tau);
  switch (cfg.strategy) {
    case Strategy::PreSel:
    case Strategy::TaskImportance: {
      std::map<std::string, double> raw;
      for (const auto& [t, s] : scores) raw[t] = s.score;
      weights = task_weights(raw, tau);
      break;
    }
    case Strategy::Uniform:
      for (const auto& [t, members] : manifest.tasks()) weights[t] = 1.0 / m;
      break;
    case Strategy::Random:
    case Strategy::SizeBalanced: {
      auto pools = pool_sizes(manifest);
      double total = 0.0;
      for (const auto& [t, p] : pools) total += static_cast<double>(p);
      for (const auto& [t, p] : pools) weights[t] = total > 0.0 ? static_cast<double>(p) / total : 1.0 / m;
      break;
    }
  }
  plan = plan_from_weights(manifest, weights, scores, cfg.ratio, tau, !cfg.tau.has_value());
  double t_budget = detail::seconds_since(t1);

  auto out = select_with_plan(manifest, features, plan, cfg);
  out.irs_excluded = irs.excluded;
  out.irs_scored = irs.records.size();
  out.timings["irs"] = t_irs;
  out.timings["budget"] = t_budget;
  out.timings["total"] = detail::seconds_since(t0);
  return out;
}

/// Full pipeline: reference split, IRS, task budgets, clustering, neighbor
/// centrality ranking and assembly.
inline SelectionManifest run_selection(const DatasetManifest& manifest, const FeatureMatrix& features,
                                       const std::vector<LossRecord>& losses, SelectionConfig cfg) {
  cfg.strategy = Strategy::PreSel;
  return run_pipeline(manifest, features, losses, cfg).selection;
}

/// Comparison selectors sharing the assembly machinery: uniform (equal task
/// weights), size_balanced (weights proportional to pool size),
/// task_importance (IRS weights) and random (size-balanced quotas, uniform draw
/// inside each task, no clustering).
inline SelectionManifest baseline_select(const DatasetManifest& manifest, const FeatureMatrix& features,
                                         const std::vector<LossRecord>& losses, SelectionConfig cfg, Strategy strategy) {
  cfg.strategy = strategy;
  return run_pipeline(manifest, features, losses, cfg).selection;
}

// --- reports ---------------------------------------------------------------

inline std::string serialize_run_report(const SelectionOutcome& o, const SelectionConfig& cfg) {
  std::string out;
  auto line = [&](nlohmann::ordered_json j) { out += j.dump() + '\n'; };
  {
    auto j = cfg.echo(o.plan.tau);
    nlohmann::ordered_json head;
    head["kind"] = "config";
    for (auto& [k, v] : j.items()) head[k] = v;
    head["threads"] = o.threads;
    line(head);
  }
  {
    nlohmann::ordered_json j;
    j["kind"] = "plan";
    j["task_count"] = o.plan.tasks.size();
    j["image_count"] = o.plan.image_count;
    j["total_size"] = o.plan.total_size;
    j["ref_count"] = o.plan.ref_count;
    j["target_total"] = o.plan.target_total;
    j["tau"] = o.plan.tau;
    j["irs_scored"] = o.irs_scored;
    std::vector<std::string> excl;
    for (const auto& e : o.irs_excluded) excl.push_back(e.sample_id);
    j["irs_excluded"] = excl;
    line(j);
  }
  for (const auto& t : o.tasks) {
    nlohmann::ordered_json j;
    j["kind"] = "task";
    j["task_id"] = t.budget.task_id;
    j["score_s"] = t.budget.score;
    j["weight_w"] = t.budget.weight;
    j["quota"] = t.budget.quota;
    j["ref_count"] = t.budget.ref_count;
    j["fallback"] = t.budget.fallback;
    j["pool_size"] = t.budget.pool_size;
    j["clusters"] = t.clusters;
    j["selected"] = t.selected;
    j["inertia"] = t.inertia;
    j["iterations"] = t.iterations;
    line(j);
  }
  for (const auto& t : o.tasks)
    for (const auto& c : t.cluster_stats) {
      nlohmann::ordered_json j;
      j["kind"] = "cluster";
      j["task_id"] = t.budget.task_id;
      j["cluster_id"] = c.cluster_id;
      j["size"] = c.size;
      j["raw_n_c"] = c.raw;
      j["n_c"] = c.quota;
      j["selected"] = c.selected;
      line(j);
    }
  {
    nlohmann::ordered_json j;
    j["kind"] = "timing";
    for (const auto& [k, v] : o.timings) j[k + "_seconds"] = v;
    line(j);
  }
  {
    nlohmann::ordered_json j;
    j["kind"] = "summary";
    j["entries"] = o.selection.entries.size();
    j["references"] = o.selection.count(Provenance::Reference);
    j["selected"] = o.selection.count(Provenance::Selected);
    line(j);
  }
  return out;
}

inline std::string serialize_cluster_dump(const std::vector<ClusterDump>& dumps) {
  std::string out;
  for (const auto& d : dumps) {
    const auto& a = d.assignment;
    nlohmann::ordered_json j;
    j["task_id"] = d.task_id;
    j["clusters"] = a.clusters;
    j["members"] = d.members;
    j["labels"] = a.labels;
    j["sizes"] = a.sizes;
    std::vector<double> norms;
    for (std::size_t c = 0; c < a.clusters; ++c) {
      double s = 0.0;
      for (double v : a.centroid(c)) s += v * v;
      norms.push_back(std::sqrt(s));
    }
    j["centroid_norms"] = norms;
    j["inertia"] = a.inertia;
    j["iterations"] = a.iterations;
    out += j.dump() + '\n';
  }
  return out;
}

}  // namespace presel
