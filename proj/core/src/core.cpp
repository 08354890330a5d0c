#include "lamm/core.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <thread>

namespace lamm {

void validate_system(const AtomicSystem& system) {
    if (system.positions.empty()) throw InputError("system has no atoms");
    if (system.positions.size() != system.atomic_numbers.size())
        throw InputError("positions/atomic_numbers size mismatch");
    for (const auto& p : system.positions)
        for (double c : p)
            if (!std::isfinite(c)) throw InputError("non-finite coordinate");
    for (int z : system.atomic_numbers)
        if (z < 1 || z > kMaxAtomicNumber)
            throw InputError("atomic number " + std::to_string(z) + " outside [1, 118]");
}

void validate_labels(const Labels& labels, std::size_t n_atoms) {
    if (labels.energy_mask && !labels.energy.has_value())
        throw InputError("energy mask set but energy missing");
    if (labels.force_mask && labels.forces.size() != n_atoms)
        throw InputError("force mask set but force rows != atom count");
    if (labels.dataset_index < 0) throw InputError("negative dataset index");
}

NeighborList build_neighbor_list(const AtomicSystem& system, double cutoff) {
    validate_system(system);
    if (!(cutoff > 0.0)) throw InputError("cutoff must be positive");

    NeighborList list;
    list.cutoff = cutoff;
    const int n = static_cast<int>(system.size());
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            if (j == i) continue;
            const Vec3 d = system.positions[i] - system.positions[j];
            const double r = norm(d);
            if (r < cutoff) {
                list.pairs.push_back({i, j, r, (1.0 / r) * d});
            }
        }
    }
    return list;
}

std::map<int, int> composition_vector(const AtomicSystem& system) {
    validate_system(system);
    std::map<int, int> counts;
    for (int z : system.atomic_numbers) ++counts[z];
    return counts;
}

int thread_budget() {
    int budget = static_cast<int>(std::thread::hardware_concurrency());
    if (budget < 1) budget = 1;
    if (const char* env = std::getenv("LAMM_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end == env || *end != '\0' || v < 1)
            throw InputError("LAMM_THREADS must be a positive integer, got \"" + std::string(env) + "\"");
        budget = std::min(budget, static_cast<int>(v));
    }
    return budget;
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
    const auto budget = static_cast<std::size_t>(thread_budget());
    if (budget <= 1 || n <= 1) {
        for (std::size_t k = 0; k < n; ++k) fn(k);
        return;
    }
    const std::size_t n_threads = std::min(budget, n);
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    for (std::size_t t = 0; t < n_threads; ++t) {
        pool.emplace_back([&, t] {
            for (std::size_t k = t; k < n; k += n_threads) fn(k);
        });
    }
    for (auto& th : pool) th.join();
}

}  // namespace lamm
