#pragma once
/**
 * scheduler.hpp - atom-count load balancing of heterogeneous mini-batches.
 *
 * Balanced plan, three steps:
 *   1. shuffle samples, cut into S near-equal splits, sort each split by
 *      atom count descending;
 *   2. cut each split into chunks of G samples (partial tail dropped) and
 *      consume chunks in transpose order: rank 0 of every split, then rank 1
 *      of every split, ... so consecutive chunks come from different splits
 *      while each split's chunks still arrive largest-first;
 *   3. merge B consecutive chunks into a mini-batch of G*B samples and
 *      assign them to workers greedily (LPT with a B-samples-per-worker cap).
 *
 * Within every split, consumed chunk totals are non-increasing - exact, any
 * seed. The naive plan skips steps 1-2 (shuffle + contiguous batches) and
 * either slices contiguously per worker (mode naive) or applies the same
 * per-batch greedy assignment (mode greedy_only).
 */

#include <cstdint>
#include <filesystem>
#include <vector>

#include "lamm/core.hpp"

namespace lamm::scheduler {

enum class Mode { balanced, greedy_only, naive };

std::string to_string(Mode mode);
Mode mode_from_string(const std::string& s);

struct ScheduleConfig {
    int workers = 1;           // G
    int batch_per_worker = 1;  // B
    int num_splits = 100;      // S
    std::uint64_t seed = 0;
    Mode mode = Mode::balanced;
};

struct ScheduledSample {
    std::int64_t sample = 0;  // index into the planned population
    int worker = 0;
    std::int64_t atoms = 0;
    std::int64_t split = 0;
    std::int64_t chunk_rank = 0;
};

struct MiniBatch {
    std::vector<ScheduledSample> samples;     // exactly G*B, grouped by worker order of assignment
    std::vector<std::int64_t> worker_atoms;   // per-worker totals
};

struct MiniBatchSchedule {
    std::vector<MiniBatch> batches;
    int workers = 1;
    int batch_per_worker = 1;
    std::int64_t dropped_samples = 0;  // ragged chunk/batch tails
};

/// LPT with a per-worker cardinality cap: samples sorted descending, each
/// goes to the worker with the smallest atom total among those still short
/// of B samples; ties broken by lowest worker index. Returns worker per
/// input position. Requires exactly G*B entries.
std::vector<int> greedy_assign(const std::vector<std::int64_t>& atoms, int workers,
                               int batch_per_worker);

MiniBatchSchedule plan_balanced(const std::vector<std::int64_t>& atom_counts,
                                const ScheduleConfig& cfg);
MiniBatchSchedule plan_naive(const std::vector<std::int64_t>& atom_counts,
                             const ScheduleConfig& cfg);
/// Dispatches on cfg.mode.
MiniBatchSchedule plan(const std::vector<std::int64_t>& atom_counts, const ScheduleConfig& cfg);

struct GrowthEvent {
    std::int64_t step = 0;
    int worker = 0;
    std::int64_t atoms = 0;
    std::int64_t previous_peak = 0;
};

struct ScheduleMetrics {
    double max_imbalance = 1.0;   // max over steps of max/mean worker atoms
    double mean_imbalance = 1.0;  // mean over steps
    std::int64_t monotonicity_violations = 0;  // split-local chunk total increases
    std::vector<GrowthEvent> growth_events;    // per-worker high-water growth
    std::vector<std::vector<std::int64_t>> step_worker_atoms;
};

ScheduleMetrics schedule_metrics(const MiniBatchSchedule& schedule);

/// CSV with header step,worker,sample_id,atoms,split,chunk_rank.
void write_schedule_csv(const std::filesystem::path& path, const MiniBatchSchedule& schedule);
MiniBatchSchedule read_schedule_csv(const std::filesystem::path& path);

}  // namespace lamm::scheduler
