#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"
#include "presel/error.hpp"
#include "presel/features.hpp"
#include "presel/losses.hpp"
#include "presel/manifest.hpp"
#include "presel/selector.hpp"
#include "presel/util.hpp"

namespace presel {

// Gaussian-mixture benchmark: tasks of given sizes, each with its own blobs,
// optional image sharing between tasks, and reference losses whose IRS
// concentrates around a planted per-task mean.
struct SynthSpec {
  std::size_t n_tasks = 2;
  std::vector<std::size_t> samples_per_task{500, 500};
  std::size_t d = 16;
  std::size_t blobs_per_task = 5;
  double blob_stddev = 0.1;
  double center_scale = 1.0;  // per-coordinate stddev of blob centers
  double overlap_fraction = 0.0;
  std::vector<double> planted_task_irs{0.5, 1.5};
  double ref_ratio = 0.05;
  std::uint64_t seed = 0;

  void validate() const {
    auto bad = [](const std::string& why) { return Error(ErrorKind::SynthSpecError, why); };
    if (n_tasks == 0) throw bad("n_tasks must be positive");
    if (samples_per_task.size() != n_tasks) throw bad("samples_per_task needs one entry per task");
    if (planted_task_irs.size() != n_tasks) throw bad("planted_task_irs needs one entry per task");
    for (auto s : samples_per_task)
      if (s == 0) throw bad("every task needs at least one sample");
    for (double p : planted_task_irs)
      if (!(p > 0.0) || !std::isfinite(p)) throw bad("planted IRS means must be positive");
    if (d == 0) throw bad("d must be positive");
    if (blobs_per_task == 0) throw bad("blobs_per_task must be positive");
    if (!(blob_stddev >= 0.0) || !(center_scale > 0.0)) throw bad("blob_stddev must be >= 0 and center_scale > 0");
    if (!(overlap_fraction >= 0.0 && overlap_fraction < 1.0)) throw bad("overlap_fraction must be in [0, 1)");
    if (!(ref_ratio >= 0.0 && ref_ratio < 1.0)) throw bad("ref_ratio must be in [0, 1)");
  }
};

struct SynthTruth {
  std::string sample_id;
  std::string origin_task;
  std::size_t blob = 0;
};

struct SynthData {
  DatasetManifest manifest;
  DenseMatrix features;
  std::vector<LossRecord> losses;
  std::vector<SynthTruth> truth;  // per image record, manifest order
  std::vector<std::string> task_ids;
  std::vector<double> planted;
};

inline std::string synth_task_id(std::size_t t) {
  std::string s = std::to_string(t);
  return "task_" + std::string(s.size() < 2 ? 2 - s.size() : 0, '0') + s;
}

inline SynthData synth_generate(const SynthSpec& spec) {
  spec.validate();
  SynthData out;
  std::vector<SampleRecord> records;
  std::vector<float> flat;
  std::size_t total = 0;
  for (auto n : spec.samples_per_task) total += n;
  flat.reserve(total * spec.d);
  std::vector<std::size_t> origin;  // task index per record

  for (std::size_t t = 0; t < spec.n_tasks; ++t) {
    const std::string tid = synth_task_id(t);
    out.task_ids.push_back(tid);
    out.planted.push_back(spec.planted_task_irs[t]);
    std::mt19937_64 rng(derive_seed(spec.seed, Stage::Synth, tid));
    std::normal_distribution<double> normal(0.0, 1.0);

    std::vector<std::vector<double>> centers(spec.blobs_per_task, std::vector<double>(spec.d));
    for (auto& c : centers)
      for (double& v : c) v = normal(rng) * spec.center_scale;

    const std::size_t want = spec.samples_per_task[t];
    std::size_t shared = t == 0 ? 0 : static_cast<std::size_t>(round_half_up(spec.overlap_fraction * static_cast<double>(want)));
    shared = std::min(shared, records.size());
    if (shared > 0) {
      std::vector<std::size_t> candidates(records.size());
      for (std::size_t i = 0; i < candidates.size(); ++i) candidates[i] = i;
      for (std::size_t i = 0; i < shared; ++i)
        std::swap(candidates[i], candidates[std::uniform_int_distribution<std::size_t>(i, candidates.size() - 1)(rng)]);
      candidates.resize(shared);
      std::sort(candidates.begin(), candidates.end());
      for (std::size_t idx : candidates) records[idx].task_ids.push_back(tid);
    }
    for (std::size_t i = shared; i < want; ++i) {
      const std::size_t blob = i % spec.blobs_per_task;
      const std::size_t start = flat.size();
      bool nonzero = false;
      for (std::size_t j = 0; j < spec.d; ++j) {
        flat.push_back(static_cast<float>(centers[blob][j] + normal(rng) * spec.blob_stddev));
        nonzero |= flat.back() != 0.0f;
      }
      if (!nonzero) flat[start] = 1e-3f;
      std::string id = std::to_string(records.size());
      id = "s" + std::string(id.size() < 7 ? 7 - id.size() : 0, '0') + id;
      records.push_back({id, {tid}, false, false});
      origin.push_back(t);
      out.truth.push_back({records.back().sample_id, tid, blob});
    }
  }

  out.manifest = DatasetManifest::from_records(records);
  if (spec.ref_ratio > 0.0) out.manifest = ref_split(out.manifest, spec.ref_ratio, spec.seed);

  out.features = DenseMatrix(records.size(), spec.d, std::move(flat));

  // Reference losses: without-Q token NLLs around a per-sample base level,
  // with-Q tokens scaled so the sample ratio sits near the origin task's mean.
  std::mt19937_64 rng(derive_seed(spec.seed, Stage::Synth, "losses"));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> base_dist(1.0, 3.0);
  std::uniform_int_distribution<std::size_t> len_dist(16, 64);
  for (std::size_t i = 0; i < out.manifest.size(); ++i) {
    const auto& r = out.manifest.record(i);
    if (!r.is_reference) continue;
    const double base = base_dist(rng);
    const std::size_t len = len_dist(rng);
    const double target = spec.planted_task_irs[origin[i]] * std::max(0.05, 1.0 + 0.05 * normal(rng));
    LossRecord loss;
    loss.sample_id = r.sample_id;
    std::vector<double> without(len), with(len);
    for (double& v : without) v = -std::max(0.0, base * (1.0 + 0.2 * normal(rng)));
    double nll_without = 0.0;
    for (double v : without) nll_without -= v;
    nll_without /= static_cast<double>(len);
    for (double& v : with) v = -std::max(0.0, target * nll_without * (1.0 + 0.2 * normal(rng)));
    loss.logprobs_with_q = std::move(with);
    loss.logprobs_without_q = std::move(without);
    out.losses.push_back(std::move(loss));
  }
  return out;
}

inline std::string serialize_truth(const SynthData& data) {
  std::string out;
  for (std::size_t t = 0; t < data.task_ids.size(); ++t) {
    nlohmann::ordered_json j;
    j["kind"] = "task";
    j["task_id"] = data.task_ids[t];
    j["planted_irs"] = data.planted[t];
    out += j.dump() + '\n';
  }
  for (const auto& s : data.truth) {
    nlohmann::ordered_json j;
    j["kind"] = "sample";
    j["sample_id"] = s.sample_id;
    j["origin_task"] = s.origin_task;
    j["blob"] = s.blob;
    out += j.dump() + '\n';
  }
  return out;
}

struct SynthPaths {
  std::string manifest, features, losses, truth;
};

inline SynthPaths write_synth(const SynthData& data, const std::string& dir) {
  std::filesystem::create_directories(dir);
  SynthPaths p{dir + "/manifest.jsonl", dir + "/features.bin", dir + "/losses.jsonl", dir + "/truth.jsonl"};
  save_manifest(data.manifest, p.manifest);
  save_features(data.features.view(), p.features);
  save_losses(data.losses, p.losses);
  write_text(p.truth, serialize_truth(data));
  return p;
}

}  // namespace presel
