#pragma once
/**
 * core.hpp - geometric and sample types shared by every module.
 *
 * All quantities are in Å (positions, distances) and eV / eV/Å (labels).
 * Types are plain value types; once built they are never mutated, so they
 * can be shared freely across worker threads.
 */

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace lamm {

/// Invalid user input (bad config, malformed file, violated precondition).
/// The CLI maps this to exit code 1; every other exception is exit code 2.
struct InputError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

using Vec3 = std::array<double, 3>;

inline Vec3 operator+(const Vec3& a, const Vec3& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
inline Vec3 operator-(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
inline Vec3 operator*(double s, const Vec3& a) { return {s * a[0], s * a[1], s * a[2]}; }
inline double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }

constexpr int kMaxAtomicNumber = 118;

/// One structure: positions (Å) and atomic numbers, nothing else.
struct AtomicSystem {
    std::vector<Vec3> positions;
    std::vector<int> atomic_numbers;

    std::size_t size() const { return positions.size(); }
};

/// Throws InputError unless N >= 1, coordinates finite, Z in [1, 118].
void validate_system(const AtomicSystem& system);

/// Optional per-sample labels plus the masks that gate them in the loss.
struct Labels {
    std::optional<double> energy;   // eV
    std::vector<Vec3> forces;       // eV/Å, one row per atom when present
    bool energy_mask = false;       // m_E
    bool force_mask = false;        // m_F
    int dataset_index = 0;          // d, selects the prediction head
};

/// Throws InputError unless masks are consistent with label presence.
void validate_labels(const Labels& labels, std::size_t n_atoms);

struct Sample {
    AtomicSystem system;
    Labels labels;
    int subset_id = 0;
};

/// Directed pair (i, j): atom j is within the cutoff of atom i.
/// `unit` points from j to i, so it is the direction of a repulsive force on i.
struct NeighborPair {
    int i = 0;
    int j = 0;
    double distance = 0.0;  // Å
    Vec3 unit{0.0, 0.0, 0.0};
};

struct NeighborList {
    std::vector<NeighborPair> pairs;  // grouped by i, ascending j
    double cutoff = 0.0;              // Å
};

/// All directed pairs with distance strictly below the cutoff. Ties at
/// exactly the cutoff are excluded so the graph is identical across platforms.
NeighborList build_neighbor_list(const AtomicSystem& system, double cutoff);

/// Element counts {Z -> count}; values sum to N.
std::map<int, int> composition_vector(const AtomicSystem& system);

/// Worker threads to use: hardware concurrency, capped by the LAMM_THREADS
/// environment variable when set. Always >= 1; a malformed value throws
/// InputError.
int thread_budget();

/// Runs fn(0..n-1) on up to thread_budget() threads. Iterations must be
/// independent; results written per-index stay deterministic regardless of
/// the budget.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace lamm
