#pragma once
/**
 * denoise.hpp - pseudo-force labels for coordinate denoising.
 *
 * Baseline scheme: displace every atom by Gaussian noise dx_i and label it
 * with -dx_i. Centered scheme: subtract the mean displacement first, so the
 * label is -(dx_i - mean(dx)). Centered labels always sum to zero and are a
 * pure function of the (original, noisy) geometry pair; baseline labels are
 * not, because the mean translation leaves no trace in relative coordinates.
 */

#include <cstdint>
#include <vector>

#include "lamm/core.hpp"

namespace lamm::denoise {

enum class Scheme { baseline, centered };

struct NoiseConfig {
    double sigma = 0.3;  // Å, per-component Gaussian std
    Scheme scheme = Scheme::centered;
    std::uint64_t seed = 0;
};

struct NoiseResult {
    AtomicSystem noisy;
    std::vector<Vec3> pseudo_forces;  // Å (displacement units)
};

/// Deterministic core: applies caller-supplied displacements.
NoiseResult apply_displacements(const AtomicSystem& system,
                                const std::vector<Vec3>& deltas,
                                Scheme scheme);

/// Draws displacements from cfg.seed and applies them.
NoiseResult apply_noise(const AtomicSystem& system, const NoiseConfig& cfg);

/// Wraps the result as a trainable sample: m_E = 0, m_F = 1, pseudo-forces
/// in the force slot.
Sample make_denoising_sample(const AtomicSystem& system, const NoiseConfig& cfg,
                             int dataset_index, int subset_id);

}  // namespace lamm::denoise
