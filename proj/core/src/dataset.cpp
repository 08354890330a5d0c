#include "lamm/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "lamm/binio.hpp"
#include "lamm/rng.hpp"

namespace lamm::dataset {

namespace {

using nlohmann::json;

constexpr std::string_view kCatalogMagic = "LAMMDS1";

}  // namespace

std::string to_string(TaskKind kind) {
    switch (kind) {
        case TaskKind::energy_and_forces: return "energy_and_forces";
        case TaskKind::energy_only: return "energy_only";
        case TaskKind::denoising: return "denoising";
    }
    throw std::logic_error("unreachable task kind");
}

TaskKind task_kind_from_string(const std::string& s) {
    if (s == "energy_and_forces") return TaskKind::energy_and_forces;
    if (s == "energy_only") return TaskKind::energy_only;
    if (s == "denoising") return TaskKind::denoising;
    throw InputError("unknown task kind \"" + s + "\"");
}

std::vector<double> temperature_counts(const std::vector<double>& sizes, double temperature) {
    if (sizes.empty()) throw InputError("temperature_counts: no subset sizes");
    if (!(temperature >= 1.0)) throw InputError("temperature_counts: temperature must be >= 1");
    double n_max = 0.0;
    for (double n : sizes) {
        if (!(n > 0.0)) throw InputError("temperature_counts: sizes must be positive");
        n_max = std::max(n_max, n);
    }
    std::vector<double> out(sizes.size());
    const double inv_t = 1.0 / temperature;
    for (std::size_t k = 0; k < sizes.size(); ++k)
        out[k] = std::pow(n_max, 1.0 - inv_t) * std::pow(sizes[k], inv_t);
    return out;
}

MixPlan make_mix_plan(const std::vector<double>& sizes, double temperature) {
    MixPlan plan;
    plan.temperature = temperature;
    plan.repeats = temperature_counts(sizes, temperature);
    return plan;
}

std::vector<EpochEntry> build_epoch_index(const MixPlan& plan,
                                          const std::vector<std::int64_t>& sizes,
                                          std::uint64_t seed) {
    if (plan.repeats.size() != sizes.size())
        throw InputError("build_epoch_index: repeats/sizes length mismatch");
    std::vector<EpochEntry> epoch;
    for (std::size_t k = 0; k < sizes.size(); ++k) {
        const std::int64_t n = sizes[k];
        if (n <= 0) throw InputError("build_epoch_index: subset sizes must be positive");
        const std::int64_t total = std::llround(plan.repeats[k]);
        if (total < 0) throw InputError("build_epoch_index: negative repeat count");
        const std::int64_t base = total / n;
        const std::int64_t extra = total % n;  // lowest sample ids get the extra copy
        for (std::int64_t s = 0; s < n; ++s) {
            const std::int64_t copies = base + (s < extra ? 1 : 0);
            for (std::int64_t c = 0; c < copies; ++c)
                epoch.push_back({static_cast<int>(k), s});
        }
    }
    Rng rng(seed);
    rng.shuffle(epoch);
    return epoch;
}

std::pair<std::vector<std::int64_t>, std::int64_t> filter_max_atoms(
    const std::vector<Sample>& samples, std::int64_t limit) {
    if (limit < 1) throw InputError("filter_max_atoms: limit must be >= 1");
    std::vector<std::int64_t> kept;
    kept.reserve(samples.size());
    for (std::size_t s = 0; s < samples.size(); ++s)
        if (static_cast<std::int64_t>(samples[s].system.size()) <= limit)
            kept.push_back(static_cast<std::int64_t>(s));
    const std::int64_t removed = static_cast<std::int64_t>(samples.size()) -
                                 static_cast<std::int64_t>(kept.size());
    return {std::move(kept), removed};
}

SplitIndices split_train_val(std::size_t n, double val_fraction, std::uint64_t seed) {
    if (!(val_fraction >= 0.0 && val_fraction <= 1.0))
        throw InputError("split_train_val: val_fraction must be in [0, 1]");
    Rng rng(seed);
    const auto perm = rng.permutation(n);
    const auto n_val = static_cast<std::size_t>(
        std::llround(val_fraction * static_cast<double>(n)));
    SplitIndices split;
    split.val.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_val));
    split.train.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_val), perm.end());
    std::sort(split.val.begin(), split.val.end());
    std::sort(split.train.begin(), split.train.end());
    return split;
}

const MorseParams& PairTable::at(int z1, int z2) const {
    const auto key = std::minmax(z1, z2);
    const auto it = overrides.find({key.first, key.second});
    return it == overrides.end() ? fallback : it->second;
}

double morse_energy(const AtomicSystem& system, const PairTable& table) {
    const auto n = system.size();
    double energy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const auto& p = table.at(system.atomic_numbers[i], system.atomic_numbers[j]);
            const double r = norm(system.positions[i] - system.positions[j]);
            const double g = 1.0 - std::exp(-p.stiffness * (r - p.r_eq));
            energy += p.depth * (g * g - 1.0);
        }
    }
    return energy;
}

std::vector<Vec3> morse_forces(const AtomicSystem& system, const PairTable& table) {
    const auto n = system.size();
    std::vector<Vec3> forces(n, Vec3{0.0, 0.0, 0.0});
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const auto& p = table.at(system.atomic_numbers[i], system.atomic_numbers[j]);
            const Vec3 rij = system.positions[i] - system.positions[j];
            const double r = norm(rij);
            const double e = std::exp(-p.stiffness * (r - p.r_eq));
            const double dv_dr = 2.0 * p.depth * (1.0 - e) * p.stiffness * e;
            const Vec3 f = (-dv_dr / r) * rij;  // force on i; j gets the opposite
            forces[i] = forces[i] + f;
            forces[j] = forces[j] - f;
        }
    }
    return forces;
}

namespace {

int draw_atom_count(const SynthSpec& spec, Rng& rng) {
    // Log-normal with the requested mode: mode = exp(mu - sigma^2).
    const double mu = std::log(spec.atom_count_mode) + spec.atom_count_sigma * spec.atom_count_sigma;
    const double n = std::exp(rng.normal(mu, spec.atom_count_sigma));
    const auto rounded = static_cast<int>(std::llround(n));
    return std::clamp(rounded, spec.min_atoms, spec.max_atoms);
}

AtomicSystem random_cluster(const SynthSpec& spec, int n_atoms, Rng& rng) {
    AtomicSystem system;
    system.positions.reserve(static_cast<std::size_t>(n_atoms));
    system.atomic_numbers.reserve(static_cast<std::size_t>(n_atoms));
    const double r_eq = spec.morse.fallback.r_eq;
    const double min_sep = 0.8 * r_eq;
    // Ball sized for roughly liquid-like density; grown if insertion stalls.
    double radius = 0.75 * r_eq * std::cbrt(static_cast<double>(n_atoms));
    for (int a = 0; a < n_atoms; ++a) {
        Vec3 pos{0.0, 0.0, 0.0};
        for (int attempt = 0;; ++attempt) {
            pos = {rng.uniform(-radius, radius), rng.uniform(-radius, radius),
                   rng.uniform(-radius, radius)};
            if (norm(pos) > radius) continue;
            bool ok = true;
            for (const auto& q : system.positions) {
                if (norm(pos - q) < min_sep) {
                    ok = false;
                    break;
                }
            }
            if (ok) break;
            if (attempt >= 200) {
                radius *= 1.1;
                attempt = 0;
            }
        }
        system.positions.push_back(pos);
        const auto pick = rng.bounded(spec.elements.size());
        system.atomic_numbers.push_back(spec.elements[static_cast<std::size_t>(pick)]);
    }
    return system;
}

void relax(AtomicSystem& system, const SynthSpec& spec) {
    // A few damped steepest-descent steps toward the Morse surface minimum;
    // per-atom moves are capped so early overlaps cannot explode.
    const double max_move = 0.25;
    for (int step = 0; step < spec.relax_steps; ++step) {
        const auto forces = morse_forces(system, spec.morse);
        for (std::size_t a = 0; a < system.size(); ++a) {
            Vec3 move = spec.relax_step * forces[a];
            const double m = norm(move);
            if (m > max_move) move = (max_move / m) * move;
            system.positions[a] = system.positions[a] + move;
        }
    }
}

Sample make_sample(const SynthSpec& spec, std::uint64_t stream_seed) {
    Rng rng(stream_seed);
    Sample sample;
    sample.system = random_cluster(spec, draw_atom_count(spec, rng), rng);
    relax(sample.system, spec);
    if (spec.task == TaskKind::denoising) return sample;  // structures only

    double energy = spec.transform.energy_scale * morse_energy(sample.system, spec.morse);
    for (int z : sample.system.atomic_numbers) {
        const auto it = spec.transform.element_offsets.find(z);
        if (it != spec.transform.element_offsets.end()) energy += it->second;
    }
    sample.labels.energy = energy;
    sample.labels.energy_mask = true;
    if (spec.task == TaskKind::energy_and_forces) {
        sample.labels.forces = morse_forces(sample.system, spec.morse);
        for (auto& f : sample.labels.forces) f = spec.transform.energy_scale * f;
        sample.labels.force_mask = true;
    }
    return sample;
}

}  // namespace

std::vector<Sample> synth_generate(const SynthSpec& spec, std::int64_t count, std::uint64_t seed) {
    if (count < 0) throw InputError("synth_generate: negative count");
    if (spec.elements.empty()) throw InputError("synth_generate: element list is empty");
    for (int z : spec.elements)
        if (z < 1 || z > kMaxAtomicNumber) throw InputError("synth_generate: atomic number out of range");
    if (spec.min_atoms < 1 || spec.max_atoms < spec.min_atoms)
        throw InputError("synth_generate: bad atom-count bounds");
    if (!(spec.atom_count_mode >= 1.0)) throw InputError("synth_generate: atom_count_mode must be >= 1");
    std::vector<Sample> samples(static_cast<std::size_t>(count));
    parallel_for(static_cast<std::size_t>(count), [&](std::size_t s) {
        samples[s] = make_sample(spec, mix_seed(seed, s));
    });
    return samples;
}

Catalog synth_catalog(const std::vector<SynthSpec>& specs, std::uint64_t seed) {
    Catalog catalog;
    catalog.seed = seed;
    for (std::size_t k = 0; k < specs.size(); ++k) {
        const auto& spec = specs[k];
        Subset subset;
        subset.meta.name = spec.name;
        subset.meta.task = spec.task;
        subset.meta.size = spec.count;
        subset.meta.head_index = static_cast<int>(k);
        subset.meta.has_energy = spec.task != TaskKind::denoising;
        subset.meta.has_forces = spec.task == TaskKind::energy_and_forces;
        subset.samples = synth_generate(spec, spec.count, mix_seed(seed, k));
        for (auto& sample : subset.samples) {
            sample.subset_id = static_cast<int>(k);
            sample.labels.dataset_index = static_cast<int>(k);
        }
        catalog.subsets.push_back(std::move(subset));
    }
    return catalog;
}

namespace {

void write_subset_bin(const std::filesystem::path& path, const Subset& subset) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot open " + path.string() + " for writing");
    binio::write_magic(out, kCatalogMagic);
    binio::write_u64(out, subset.samples.size());
    for (const auto& sample : subset.samples) {
        const auto n = sample.system.size();
        binio::write_u32(out, static_cast<std::uint32_t>(n));
        for (const auto& p : sample.system.positions)
            for (double c : p) binio::write_f64(out, c);
        for (int z : sample.system.atomic_numbers)
            binio::write_u8(out, static_cast<std::uint8_t>(z));
        const std::uint8_t mask = static_cast<std::uint8_t>((sample.labels.energy_mask ? 1 : 0) |
                                                            (sample.labels.force_mask ? 2 : 0));
        binio::write_u8(out, mask);
        if (sample.labels.energy_mask) binio::write_f64(out, *sample.labels.energy);
        if (sample.labels.force_mask)
            for (const auto& f : sample.labels.forces)
                for (double c : f) binio::write_f64(out, c);
    }
    if (!out) throw std::runtime_error("short write to " + path.string());
}

std::vector<Sample> read_subset_bin(const std::filesystem::path& path, int subset_id) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open " + path.string());
    binio::expect_magic(in, kCatalogMagic, path.string());
    const std::uint64_t count = binio::read_u64(in);
    std::vector<Sample> samples;
    samples.reserve(count);
    for (std::uint64_t s = 0; s < count; ++s) {
        Sample sample;
        const std::uint32_t n = binio::read_u32(in);
        sample.system.positions.resize(n);
        for (auto& p : sample.system.positions)
            for (double& c : p) c = binio::read_f64(in);
        sample.system.atomic_numbers.resize(n);
        for (int& z : sample.system.atomic_numbers) z = binio::read_u8(in);
        const std::uint8_t mask = binio::read_u8(in);
        if (mask & 1) {
            sample.labels.energy = binio::read_f64(in);
            sample.labels.energy_mask = true;
        }
        if (mask & 2) {
            sample.labels.forces.resize(n);
            for (auto& f : sample.labels.forces)
                for (double& c : f) c = binio::read_f64(in);
            sample.labels.force_mask = true;
        }
        sample.subset_id = subset_id;
        sample.labels.dataset_index = subset_id;
        validate_system(sample.system);
        validate_labels(sample.labels, n);
        samples.push_back(std::move(sample));
    }
    return samples;
}

}  // namespace

void write_catalog(const std::filesystem::path& dir, const Catalog& catalog) {
    std::filesystem::create_directories(dir);
    json meta;
    meta["format"] = "lamm-catalog";
    meta["version"] = 1;
    meta["seed"] = catalog.seed;
    meta["subsets"] = json::array();
    for (const auto& subset : catalog.subsets) {
        if (subset.meta.name.empty() ||
            subset.meta.name.find_first_of("/\\") != std::string::npos)
            throw InputError("subset name \"" + subset.meta.name + "\" is not a valid file stem");
        json entry;
        entry["name"] = subset.meta.name;
        entry["task"] = to_string(subset.meta.task);
        entry["size"] = subset.samples.size();
        entry["head_index"] = subset.meta.head_index;
        entry["has_energy"] = subset.meta.has_energy;
        entry["has_forces"] = subset.meta.has_forces;
        entry["file"] = subset.meta.name + ".bin";
        meta["subsets"].push_back(entry);
        write_subset_bin(dir / (subset.meta.name + ".bin"), subset);
    }
    std::ofstream out(dir / "catalog.json");
    if (!out) throw InputError("cannot open " + (dir / "catalog.json").string() + " for writing");
    out << meta.dump(2) << "\n";
}

Catalog read_catalog(const std::filesystem::path& dir) {
    std::ifstream in(dir / "catalog.json");
    if (!in) throw InputError("cannot open " + (dir / "catalog.json").string());
    json meta;
    try {
        in >> meta;
    } catch (const json::exception& e) {
        throw InputError("malformed catalog.json: " + std::string(e.what()));
    }
    try {
        if (meta.at("format") != "lamm-catalog") throw InputError("not a catalog directory");
        Catalog catalog;
        catalog.seed = meta.at("seed").get<std::uint64_t>();
        int subset_id = 0;
        for (const auto& entry : meta.at("subsets")) {
            Subset subset;
            subset.meta.name = entry.at("name").get<std::string>();
            subset.meta.task = task_kind_from_string(entry.at("task").get<std::string>());
            subset.meta.size = entry.at("size").get<std::int64_t>();
            subset.meta.head_index = entry.at("head_index").get<int>();
            subset.meta.has_energy = entry.at("has_energy").get<bool>();
            subset.meta.has_forces = entry.at("has_forces").get<bool>();
            subset.samples = read_subset_bin(dir / entry.at("file").get<std::string>(), subset_id);
            if (static_cast<std::int64_t>(subset.samples.size()) != subset.meta.size)
                throw InputError("catalog.json size disagrees with " + subset.meta.name + ".bin");
            for (auto& sample : subset.samples) sample.labels.dataset_index = subset.meta.head_index;
            catalog.subsets.push_back(std::move(subset));
            ++subset_id;
        }
        return catalog;
    } catch (const json::exception& e) {
        throw InputError("malformed catalog.json: " + std::string(e.what()));
    }
}

}  // namespace lamm::dataset
