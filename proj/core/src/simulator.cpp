#include "lamm/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

namespace lamm::simulator {

void validate_cost(const CostModel& cost) {
    const double v[] = {cost.alpha_s, cost.beta_s_per_atom, cost.gamma_s, cost.delta_s};
    for (double x : v)
        if (!(x >= 0.0) || !std::isfinite(x))
            throw InputError("cost model: coefficients must be finite and non-negative");
    if (cost.alpha_s + cost.beta_s_per_atom <= 0.0)
        throw InputError("cost model: compute cost must be positive");
}

SimResult simulate(const scheduler::MiniBatchSchedule& schedule, const CostModel& cost) {
    validate_cost(cost);
    const auto workers = static_cast<std::size_t>(schedule.workers);
    if (workers == 0) throw InputError("simulate: schedule has no workers");

    SimResult result;
    result.worker_idle_s.assign(workers, 0.0);
    std::vector<std::int64_t> peak(workers, 0);  // high-water atom marks
    for (const auto& batch : schedule.batches) {
        if (batch.worker_atoms.size() != workers)
            throw InputError("simulate: batch worker count mismatch");
        StepRecord record;
        double slowest = 0.0;
        std::vector<double> busy(workers, 0.0);
        for (std::size_t g = 0; g < workers; ++g) {
            const std::int64_t atoms = batch.worker_atoms[g];
            double t = cost.alpha_s + cost.beta_s_per_atom * static_cast<double>(atoms);
            if (atoms > peak[g]) {  // buffer regrow, paid once per new high water
                t += cost.delta_s;
                peak[g] = atoms;
                ++record.realloc_events;
            }
            busy[g] = t;
            slowest = std::max(slowest, t);
            record.max_worker_atoms = std::max(record.max_worker_atoms, atoms);
        }
        record.time_s = slowest + cost.gamma_s;
        for (std::size_t g = 0; g < workers; ++g) {
            const double idle = slowest - busy[g];
            result.worker_idle_s[g] += idle;
            record.idle_s += idle;
        }
        result.realloc_events += record.realloc_events;
        result.total_s += record.time_s;
        result.samples += static_cast<std::int64_t>(batch.samples.size());
        result.steps.push_back(record);
    }
    result.throughput_samples_per_s =
        result.total_s > 0.0 ? static_cast<double>(result.samples) / result.total_s : 0.0;
    return result;
}

StepTimeSummary step_time_summary(std::span<const double> step_times) {
    if (step_times.empty()) throw InputError("step_time_summary: no steps");
    std::vector<double> sorted(step_times.begin(), step_times.end());
    std::sort(sorted.begin(), sorted.end());
    const auto n = sorted.size();
    const auto rank = [&](double q) {  // nearest-rank percentile
        const auto r = static_cast<std::size_t>(std::ceil(q * static_cast<double>(n)));
        return sorted[std::max<std::size_t>(r, 1) - 1];
    };
    StepTimeSummary summary;
    summary.min_s = sorted.front();
    summary.max_s = sorted.back();
    summary.median_s = rank(0.5);
    summary.p95_s = rank(0.95);
    double sum = 0.0;
    for (double t : sorted) sum += t;
    summary.mean_s = sum / static_cast<double>(n);
    return summary;
}

StepTimeSummary step_time_summary(const SimResult& result) {
    std::vector<double> times;
    times.reserve(result.steps.size());
    for (const auto& s : result.steps) times.push_back(s.time_s);
    return step_time_summary(times);
}

Comparison compare(std::span<const scheduler::MiniBatchSchedule> schedules, const CostModel& cost) {
    if (schedules.empty()) throw InputError("compare: no schedules");
    std::map<std::int64_t, std::int64_t> atoms_by_id;
    for (const auto& schedule : schedules) {
        for (const auto& batch : schedule.batches) {
            for (const auto& s : batch.samples) {
                const auto [it, inserted] = atoms_by_id.emplace(s.sample, s.atoms);
                if (!inserted && it->second != s.atoms)
                    throw InputError("compare: sample " + std::to_string(s.sample) +
                                     " has conflicting atom counts across schedules");
            }
        }
    }
    Comparison cmp;
    for (const auto& schedule : schedules) {
        ScheduleReport report;
        report.sim = simulate(schedule, cost);
        report.summary = step_time_summary(report.sim);
        cmp.reports.push_back(std::move(report));
    }
    for (const auto& report : cmp.reports)
        cmp.relative_throughput.push_back(
            cmp.reports.front().sim.throughput_samples_per_s > 0.0
                ? report.sim.throughput_samples_per_s / cmp.reports.front().sim.throughput_samples_per_s
                : 0.0);
    return cmp;
}

void write_steps_csv(const std::filesystem::path& path, const SimResult& result) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot open " + path.string() + " for writing");
    out << "step,step_time_s,idle_s,realloc_events,max_worker_atoms\n";
    out.precision(12);
    for (std::size_t step = 0; step < result.steps.size(); ++step) {
        const auto& s = result.steps[step];
        out << step << ',' << s.time_s << ',' << s.idle_s << ',' << s.realloc_events << ','
            << s.max_worker_atoms << '\n';
    }
    if (!out) throw std::runtime_error("short write to " + path.string());
}

}  // namespace lamm::simulator
