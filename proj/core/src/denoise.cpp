#include "lamm/denoise.hpp"

#include "lamm/rng.hpp"

namespace lamm::denoise {

NoiseResult apply_displacements(const AtomicSystem& system, const std::vector<Vec3>& deltas,
                                Scheme scheme) {
    validate_system(system);
    const auto n = system.size();
    if (deltas.size() != n) throw InputError("apply_displacements: one delta per atom required");

    std::vector<Vec3> effective = deltas;
    if (scheme == Scheme::centered) {
        Vec3 mean{0.0, 0.0, 0.0};
        for (const auto& d : deltas) mean = mean + d;
        mean = (1.0 / static_cast<double>(n)) * mean;
        for (auto& d : effective) d = d - mean;
    }

    NoiseResult result;
    result.noisy = system;
    result.pseudo_forces.resize(n);
    for (std::size_t a = 0; a < n; ++a) {
        result.noisy.positions[a] = system.positions[a] + effective[a];
        result.pseudo_forces[a] = -1.0 * effective[a];  // points back to the original
    }
    return result;
}

NoiseResult apply_noise(const AtomicSystem& system, const NoiseConfig& cfg) {
    if (!(cfg.sigma > 0.0)) throw InputError("apply_noise: sigma must be positive");
    // Raw draws depend only on the seed, not the scheme, so baseline and
    // centered runs with equal seeds perturb identically.
    Rng rng(cfg.seed);
    std::vector<Vec3> deltas(system.size());
    for (auto& d : deltas)
        for (double& c : d) c = rng.normal(0.0, cfg.sigma);
    return apply_displacements(system, deltas, cfg.scheme);
}

Sample make_denoising_sample(const AtomicSystem& system, const NoiseConfig& cfg,
                             int dataset_index, int subset_id) {
    auto noise = apply_noise(system, cfg);
    Sample sample;
    sample.system = std::move(noise.noisy);
    sample.labels.forces = std::move(noise.pseudo_forces);
    sample.labels.force_mask = true;
    sample.labels.energy_mask = false;
    sample.labels.dataset_index = dataset_index;
    sample.subset_id = subset_id;
    return sample;
}

}  // namespace lamm::denoise
