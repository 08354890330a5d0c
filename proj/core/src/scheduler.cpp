#include "lamm/scheduler.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "lamm/rng.hpp"

namespace lamm::scheduler {

std::string to_string(Mode mode) {
    switch (mode) {
        case Mode::balanced: return "balanced";
        case Mode::greedy_only: return "greedy_only";
        case Mode::naive: return "naive";
    }
    throw std::logic_error("unreachable mode");
}

Mode mode_from_string(const std::string& s) {
    if (s == "balanced") return Mode::balanced;
    if (s == "greedy_only") return Mode::greedy_only;
    if (s == "naive") return Mode::naive;
    throw InputError("unknown schedule mode \"" + s + "\"");
}

namespace {

void validate_config(const ScheduleConfig& cfg) {
    if (cfg.workers < 1) throw InputError("schedule: workers must be >= 1");
    if (cfg.batch_per_worker < 1) throw InputError("schedule: batch_per_worker must be >= 1");
    if (cfg.num_splits < 1) throw InputError("schedule: num_splits must be >= 1");
}

void validate_atoms(const std::vector<std::int64_t>& atom_counts) {
    for (std::int64_t a : atom_counts)
        if (a < 1) throw InputError("schedule: atom counts must be >= 1");
}

/// Groups a flat G*B assignment into a MiniBatch ordered worker-major.
MiniBatch pack_batch(const std::vector<ScheduledSample>& flat, const std::vector<int>& assign,
                     int workers) {
    MiniBatch batch;
    batch.samples.reserve(flat.size());
    batch.worker_atoms.assign(static_cast<std::size_t>(workers), 0);
    for (int g = 0; g < workers; ++g) {
        for (std::size_t p = 0; p < flat.size(); ++p) {
            if (assign[p] != g) continue;
            ScheduledSample s = flat[p];
            s.worker = g;
            batch.worker_atoms[static_cast<std::size_t>(g)] += s.atoms;
            batch.samples.push_back(s);
        }
    }
    return batch;
}

}  // namespace

std::vector<int> greedy_assign(const std::vector<std::int64_t>& atoms, int workers,
                               int batch_per_worker) {
    if (workers < 1 || batch_per_worker < 1) throw InputError("greedy_assign: bad worker shape");
    const auto expected = static_cast<std::size_t>(workers) * static_cast<std::size_t>(batch_per_worker);
    if (atoms.size() != expected)
        throw InputError("greedy_assign: need exactly workers*batch_per_worker samples");

    std::vector<std::size_t> order(atoms.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return atoms[a] > atoms[b]; });

    std::vector<std::int64_t> load(static_cast<std::size_t>(workers), 0);
    std::vector<int> count(static_cast<std::size_t>(workers), 0);
    std::vector<int> assign(atoms.size(), -1);
    for (std::size_t pos : order) {
        int best = -1;
        for (int g = 0; g < workers; ++g) {
            if (count[static_cast<std::size_t>(g)] >= batch_per_worker) continue;
            if (best < 0 || load[static_cast<std::size_t>(g)] < load[static_cast<std::size_t>(best)])
                best = g;
        }
        assign[pos] = best;
        load[static_cast<std::size_t>(best)] += atoms[pos];
        ++count[static_cast<std::size_t>(best)];
    }
    return assign;
}

MiniBatchSchedule plan_balanced(const std::vector<std::int64_t>& atom_counts,
                                const ScheduleConfig& cfg) {
    validate_config(cfg);
    validate_atoms(atom_counts);
    const auto n = static_cast<std::int64_t>(atom_counts.size());
    const std::int64_t splits = cfg.num_splits;
    const int workers = cfg.workers;
    const int per_worker = cfg.batch_per_worker;
    const auto chunk = static_cast<std::int64_t>(workers);

    MiniBatchSchedule schedule;
    schedule.workers = workers;
    schedule.batch_per_worker = per_worker;

    Rng rng(cfg.seed);
    const auto perm = rng.permutation(static_cast<std::size_t>(n));

    // Step 1: near-equal contiguous cuts of the shuffled ids, each sorted by
    // atom count descending (ties by lower sample id, for determinism).
    std::vector<std::vector<std::int64_t>> split_ids(static_cast<std::size_t>(splits));
    std::int64_t offset = 0;
    for (std::int64_t s = 0; s < splits; ++s) {
        const std::int64_t len = n / splits + (s < n % splits ? 1 : 0);
        auto& ids = split_ids[static_cast<std::size_t>(s)];
        ids.reserve(static_cast<std::size_t>(len));
        for (std::int64_t k = 0; k < len; ++k)
            ids.push_back(static_cast<std::int64_t>(perm[static_cast<std::size_t>(offset + k)]));
        offset += len;
        std::sort(ids.begin(), ids.end(), [&](std::int64_t a, std::int64_t b) {
            const auto aa = atom_counts[static_cast<std::size_t>(a)];
            const auto ab = atom_counts[static_cast<std::size_t>(b)];
            return aa != ab ? aa > ab : a < b;
        });
    }

    // Step 2: fixed-size chunks per split, consumed in transpose order
    // (chunk rank r of split 0..S-1, then rank r+1, ...).
    std::vector<ScheduledSample> stream;
    std::int64_t max_ranks = 0;
    for (const auto& ids : split_ids) {
        const auto ranks = static_cast<std::int64_t>(ids.size()) / chunk;
        schedule.dropped_samples += static_cast<std::int64_t>(ids.size()) - ranks * chunk;
        max_ranks = std::max(max_ranks, ranks);
    }
    for (std::int64_t rank = 0; rank < max_ranks; ++rank) {
        for (std::int64_t s = 0; s < splits; ++s) {
            const auto& ids = split_ids[static_cast<std::size_t>(s)];
            if ((rank + 1) * chunk > static_cast<std::int64_t>(ids.size())) continue;
            for (std::int64_t k = rank * chunk; k < (rank + 1) * chunk; ++k) {
                const auto id = ids[static_cast<std::size_t>(k)];
                stream.push_back({id, 0, atom_counts[static_cast<std::size_t>(id)], s, rank});
            }
        }
    }

    // Step 3: merge B consecutive chunks, then balance across workers.
    const auto batch_size = static_cast<std::size_t>(workers) * static_cast<std::size_t>(per_worker);
    const std::size_t full = stream.size() / batch_size;
    schedule.dropped_samples += static_cast<std::int64_t>(stream.size() - full * batch_size);
    for (std::size_t b = 0; b < full; ++b) {
        std::vector<ScheduledSample> flat(stream.begin() + static_cast<std::ptrdiff_t>(b * batch_size),
                                          stream.begin() + static_cast<std::ptrdiff_t>((b + 1) * batch_size));
        std::vector<std::int64_t> atoms(batch_size);
        for (std::size_t p = 0; p < batch_size; ++p) atoms[p] = flat[p].atoms;
        schedule.batches.push_back(pack_batch(flat, greedy_assign(atoms, workers, per_worker), workers));
    }
    return schedule;
}

MiniBatchSchedule plan_naive(const std::vector<std::int64_t>& atom_counts,
                             const ScheduleConfig& cfg) {
    validate_config(cfg);
    validate_atoms(atom_counts);
    const auto n = atom_counts.size();
    const int workers = cfg.workers;
    const int per_worker = cfg.batch_per_worker;
    const auto batch_size = static_cast<std::size_t>(workers) * static_cast<std::size_t>(per_worker);

    MiniBatchSchedule schedule;
    schedule.workers = workers;
    schedule.batch_per_worker = per_worker;

    Rng rng(cfg.seed);
    const auto perm = rng.permutation(n);
    const std::size_t full = n / batch_size;
    schedule.dropped_samples = static_cast<std::int64_t>(n - full * batch_size);

    for (std::size_t b = 0; b < full; ++b) {
        std::vector<ScheduledSample> flat(batch_size);
        std::vector<std::int64_t> atoms(batch_size);
        for (std::size_t p = 0; p < batch_size; ++p) {
            const auto id = static_cast<std::int64_t>(perm[b * batch_size + p]);
            // One conceptual split; chunk rank = position of this G-sized
            // group in the stream, so chunk totals trace arrival order.
            flat[p] = {id, 0, atom_counts[static_cast<std::size_t>(id)], 0,
                       static_cast<std::int64_t>((b * batch_size + p) / static_cast<std::size_t>(workers))};
            atoms[p] = flat[p].atoms;
        }
        std::vector<int> assign(batch_size);
        if (cfg.mode == Mode::greedy_only) {
            assign = greedy_assign(atoms, workers, per_worker);
        } else {
            for (std::size_t p = 0; p < batch_size; ++p)
                assign[p] = static_cast<int>(p / static_cast<std::size_t>(per_worker));
        }
        schedule.batches.push_back(pack_batch(flat, assign, workers));
    }
    return schedule;
}

MiniBatchSchedule plan(const std::vector<std::int64_t>& atom_counts, const ScheduleConfig& cfg) {
    return cfg.mode == Mode::balanced ? plan_balanced(atom_counts, cfg) : plan_naive(atom_counts, cfg);
}

ScheduleMetrics schedule_metrics(const MiniBatchSchedule& schedule) {
    ScheduleMetrics metrics;
    metrics.max_imbalance = 0.0;
    metrics.mean_imbalance = 0.0;
    const auto workers = static_cast<std::size_t>(schedule.workers);

    std::map<std::pair<std::int64_t, std::int64_t>, std::int64_t> chunk_totals;
    std::vector<std::int64_t> peak(workers, 0);
    for (std::size_t step = 0; step < schedule.batches.size(); ++step) {
        const auto& batch = schedule.batches[step];
        std::vector<std::int64_t> totals(workers, 0);
        for (const auto& s : batch.samples) {
            totals[static_cast<std::size_t>(s.worker)] += s.atoms;
            chunk_totals[{s.split, s.chunk_rank}] += s.atoms;
        }
        std::int64_t sum = 0;
        std::int64_t peak_step = 0;
        for (std::size_t g = 0; g < workers; ++g) {
            sum += totals[g];
            peak_step = std::max(peak_step, totals[g]);
            if (totals[g] > peak[g]) {
                metrics.growth_events.push_back(
                    {static_cast<std::int64_t>(step), static_cast<int>(g), totals[g], peak[g]});
                peak[g] = totals[g];
            }
        }
        const double mean = static_cast<double>(sum) / static_cast<double>(workers);
        const double imbalance = mean > 0.0 ? static_cast<double>(peak_step) / mean : 1.0;
        metrics.max_imbalance = std::max(metrics.max_imbalance, imbalance);
        metrics.mean_imbalance += imbalance;
        metrics.step_worker_atoms.push_back(std::move(totals));
    }
    if (!schedule.batches.empty())
        metrics.mean_imbalance /= static_cast<double>(schedule.batches.size());
    else
        metrics.max_imbalance = metrics.mean_imbalance = 1.0;

    // Count split-local chunk-total increases along consumption order.
    std::int64_t prev_split = -1;
    std::int64_t prev_total = 0;
    for (const auto& [key, total] : chunk_totals) {  // map order = (split, rank)
        if (key.first == prev_split && total > prev_total) ++metrics.monotonicity_violations;
        prev_split = key.first;
        prev_total = total;
    }
    return metrics;
}

void write_schedule_csv(const std::filesystem::path& path, const MiniBatchSchedule& schedule) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot open " + path.string() + " for writing");
    out << "step,worker,sample_id,atoms,split,chunk_rank\n";
    for (std::size_t step = 0; step < schedule.batches.size(); ++step)
        for (const auto& s : schedule.batches[step].samples)
            out << step << ',' << s.worker << ',' << s.sample << ',' << s.atoms << ',' << s.split
                << ',' << s.chunk_rank << '\n';
    if (!out) throw std::runtime_error("short write to " + path.string());
}

MiniBatchSchedule read_schedule_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != "step,worker,sample_id,atoms,split,chunk_rank")
        throw InputError(path.string() + ": not a schedule CSV");

    MiniBatchSchedule schedule;
    int max_worker = 0;
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::int64_t step = 0;
        ScheduledSample s;
        char c[5];
        if (!(ss >> step >> c[0] >> s.worker >> c[1] >> s.sample >> c[2] >> s.atoms >> c[3] >>
              s.split >> c[4] >> s.chunk_rank))
            throw InputError(path.string() + ": malformed row \"" + line + "\"");
        for (char sep : c)
            if (sep != ',') throw InputError(path.string() + ": malformed row \"" + line + "\"");
        if (step < 0 || s.worker < 0) throw InputError(path.string() + ": negative step or worker");
        if (static_cast<std::size_t>(step) >= schedule.batches.size())
            schedule.batches.resize(static_cast<std::size_t>(step) + 1);
        schedule.batches[static_cast<std::size_t>(step)].samples.push_back(s);
        max_worker = std::max(max_worker, s.worker);
        ++rows;
    }
    if (rows == 0) throw InputError(path.string() + ": schedule has no rows");

    schedule.workers = max_worker + 1;
    for (auto& batch : schedule.batches) {
        if (batch.samples.empty()) throw InputError(path.string() + ": missing step rows");
        if (batch.samples.size() % static_cast<std::size_t>(schedule.workers) != 0)
            throw InputError(path.string() + ": step size not divisible by worker count");
        batch.worker_atoms.assign(static_cast<std::size_t>(schedule.workers), 0);
        for (const auto& s : batch.samples)
            batch.worker_atoms[static_cast<std::size_t>(s.worker)] += s.atoms;
    }
    schedule.batch_per_worker =
        static_cast<int>(schedule.batches.front().samples.size() / static_cast<std::size_t>(schedule.workers));
    return schedule;
}

}  // namespace lamm::scheduler
