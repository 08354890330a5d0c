#pragma once
/**
 * simulator.hpp - trace-driven step-time model for synchronous multi-worker
 * training.
 *
 * Per worker and step: compute = alpha + beta * atoms, plus a fixed realloc
 * penalty whenever that worker's atom total exceeds its running high-water
 * mark. A step ends when the slowest worker finishes, then the allreduce
 * constant is paid: step_time = max_g(compute_g + realloc_g) + gamma.
 */

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "lamm/core.hpp"
#include "lamm/scheduler.hpp"

namespace lamm::simulator {

struct CostModel {
    double alpha_s = 0.005;            // per-worker fixed compute, seconds
    double beta_s_per_atom = 0.00001;  // compute per atom (default 1 ms per 100 atoms)
    double gamma_s = 0.010;            // allreduce constant
    double delta_s = 0.050;            // penalty per high-water growth event
};

void validate_cost(const CostModel& cost);

struct StepRecord {
    double time_s = 0.0;
    double idle_s = 0.0;  // summed over workers
    int realloc_events = 0;
    std::int64_t max_worker_atoms = 0;
};

struct SimResult {
    std::vector<StepRecord> steps;
    std::vector<double> worker_idle_s;
    std::int64_t realloc_events = 0;
    double total_s = 0.0;
    double throughput_samples_per_s = 0.0;
    std::int64_t samples = 0;
};

SimResult simulate(const scheduler::MiniBatchSchedule& schedule, const CostModel& cost);

/// Nearest-rank percentiles of the step-time distribution.
struct StepTimeSummary {
    double min_s = 0.0;
    double median_s = 0.0;
    double mean_s = 0.0;
    double max_s = 0.0;
    double p95_s = 0.0;
};

StepTimeSummary step_time_summary(std::span<const double> step_times);
StepTimeSummary step_time_summary(const SimResult& result);

struct ScheduleReport {
    SimResult sim;
    StepTimeSummary summary;
};

struct Comparison {
    std::vector<ScheduleReport> reports;
    std::vector<double> relative_throughput;  // vs. the first schedule
};

/// Requires all schedules to come from one sample population: any sample id
/// scheduled by more than one of them must carry the same atom count.
Comparison compare(std::span<const scheduler::MiniBatchSchedule> schedules,
                   const CostModel& cost);

/// CSV with header step,step_time_s,idle_s,realloc_events,max_worker_atoms.
void write_steps_csv(const std::filesystem::path& path, const SimResult& result);

}  // namespace lamm::simulator
