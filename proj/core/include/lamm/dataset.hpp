#pragma once
/**
 * dataset.hpp - synthetic catalog generation and epoch construction.
 *
 * A catalog is a set of subsets, each emulating one source dataset: its own
 * label availability (energy+forces, energy only, or unlabeled structures
 * for denoising), its own atom-count distribution, and its own label
 * transform standing in for a distinct reference method. Labels come from an
 * analytic Morse pair potential, so forces are exact gradients and every
 * generated sample can be checked against finite differences.
 */

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "lamm/core.hpp"

namespace lamm::dataset {

enum class TaskKind { energy_and_forces, energy_only, denoising };

std::string to_string(TaskKind kind);
TaskKind task_kind_from_string(const std::string& s);

struct SubsetMeta {
    std::string name;
    TaskKind task = TaskKind::energy_and_forces;
    std::int64_t size = 0;
    int head_index = 0;  // d, the prediction channel this subset trains
    bool has_energy = false;
    bool has_forces = false;
};

struct Subset {
    SubsetMeta meta;
    std::vector<Sample> samples;
};

struct Catalog {
    std::vector<Subset> subsets;
    std::uint64_t seed = 0;
};

/// Per-subset repeat counts realizing temperature sampling.
struct MixPlan {
    std::vector<double> repeats;  // r_k, same order as the size list
    double temperature = 1.0;
};

/// r_k = n_max^(1 - 1/T) * n_k^(1/T). The largest subset keeps its own size;
/// smaller subsets are scaled up toward it.
std::vector<double> temperature_counts(const std::vector<double>& sizes, double temperature);

MixPlan make_mix_plan(const std::vector<double>& sizes, double temperature);

struct EpochEntry {
    int subset = 0;
    std::int64_t sample = 0;
};

/// One epoch of (subset, sample) draws. Subset k contributes round(r_k)
/// entries; every sample of k appears floor or ceil of r_k/n_k times, with
/// the extra copies always going to the lowest sample ids so the epoch
/// multiset is seed-independent. The seed only shuffles the order.
std::vector<EpochEntry> build_epoch_index(const MixPlan& plan,
                                          const std::vector<std::int64_t>& sizes,
                                          std::uint64_t seed);

/// Drops samples with more than `limit` atoms. Returns the surviving indices
/// (order preserved) and the number removed.
std::pair<std::vector<std::int64_t>, std::int64_t> filter_max_atoms(
    const std::vector<Sample>& samples, std::int64_t limit = 300);

struct SplitIndices {
    std::vector<std::int64_t> train;
    std::vector<std::int64_t> val;
};

/// Disjoint, exhaustive split with val size = round(val_fraction * n).
/// Deterministic for a given seed.
SplitIndices split_train_val(std::size_t n, double val_fraction, std::uint64_t seed);

/// Morse pair interaction: V(r) = depth * ((1 - exp(-stiffness*(r - r_eq)))^2 - 1).
/// V(r_eq) = -depth and V'(r_eq) = 0.
struct MorseParams {
    double depth = 1.0;      // eV
    double stiffness = 2.2;  // 1/Å
    double r_eq = 1.9;       // Å
};

/// Species-pair parameter lookup with a fallback for unlisted pairs.
struct PairTable {
    MorseParams fallback;
    std::map<std::pair<int, int>, MorseParams> overrides;  // keyed (min Z, max Z)

    const MorseParams& at(int z1, int z2) const;
};

/// Emulates a distinct labeling method: E' = scale*E + sum_Z c_Z*offset_Z,
/// F' = scale*F.
struct LabelTransform {
    std::map<int, double> element_offsets;  // Z -> eV
    double energy_scale = 1.0;
};

/// Everything needed to generate one subset.
struct SynthSpec {
    std::string name = "subset";
    TaskKind task = TaskKind::energy_and_forces;
    std::int64_t count = 1000;
    double atom_count_mode = 15.0;   // mode of the log-normal atom count
    double atom_count_sigma = 0.45;  // log-space sigma
    int min_atoms = 2;
    int max_atoms = 300;
    std::vector<int> elements = {6};
    PairTable morse;
    LabelTransform transform;
    int relax_steps = 6;
    double relax_step = 0.02;  // Å²/eV, steepest-descent step scale
};

/// Total energy / analytic forces of the generating potential (all pairs,
/// no cutoff, so the surface is smooth everywhere).
double morse_energy(const AtomicSystem& system, const PairTable& table);
std::vector<Vec3> morse_forces(const AtomicSystem& system, const PairTable& table);

/// Random relaxed clusters with labels per the spec's task kind. Sample
/// ordinal s draws from an independent stream seeded with mix(seed, s), so
/// output is identical regardless of worker count (LAMM_THREADS).
std::vector<Sample> synth_generate(const SynthSpec& spec, std::int64_t count, std::uint64_t seed);

/// Generates a whole catalog; subset k uses stream mix(seed, k) and head
/// index k (or a caller-fixed head map for head-sharing experiments).
Catalog synth_catalog(const std::vector<SynthSpec>& specs, std::uint64_t seed);

/// Catalog directory layout: catalog.json + one <name>.bin per subset.
/// Binary layout (little-endian): magic "LAMMDS1", u64 sample count, then per
/// sample u32 N, N*(f64 x,y,z), N*u8 Z, u8 mask (bit0 energy, bit1 forces),
/// optional f64 energy, optional N*3 f64 forces.
void write_catalog(const std::filesystem::path& dir, const Catalog& catalog);
Catalog read_catalog(const std::filesystem::path& dir);

}  // namespace lamm::dataset
