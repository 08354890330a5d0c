#pragma once
/**
 * loss.hpp - masked semi-supervised mini-batch loss, linear reference
 * energies, and label normalization.
 *
 * The batch loss is
 *
 *   L = le/sum(m_E) * sum_i m_E^i |Ehat_i - (E_i)_{d_i}|
 *     + lf/sum(m_F) * sum_i m_F^i/N_i * sum_j ||Fhat_i^j - (F_i^j)_{d_i}||_2
 *
 * i.e. MAE on energies and a system-size-balanced L2 MAE on forces, where
 * only the channel d_i selected by each sample's dataset index contributes.
 * A term whose mask count is zero is defined as 0 and flagged, not NaN.
 */

#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "lamm/core.hpp"
#include "lamm/model.hpp"

namespace lamm::loss {

struct LossConfig {
    double lambda_energy = 1.0;
    double lambda_force = 1.0;
};

/// Per-dataset normalization constants, fit on the training split only.
struct DatasetNormalizer {
    std::map<int, double> reference_energies;  // Z -> rho_Z, eV
    double energy_mean = 0.0;                  // of E - sum(rho_Z c_Z), eV
    double energy_std = 1.0;                   // eV
    double force_std = 1.0;                    // eV/Å, per-component
    bool has_energy_stats = false;
};

struct ReferenceTable {
    std::vector<DatasetNormalizer> per_dataset;  // indexed by d

    const DatasetNormalizer& at(int d) const;
};

/// Minimum-norm least squares of energies on composition counts:
/// rho minimizes sum_s (E_s - sum_Z c_{s,Z} rho_Z)^2.
/// Throws InputError if no sample carries an energy label.
std::map<int, double> fit_reference(std::span<const Sample> samples);

/// Fits rho, energy mean/std of the residual, and per-component force std
/// for one dataset. `pseudo_force_std` supplies the force scale for
/// datasets without stored force labels (denoising).
DatasetNormalizer fit_normalizer(std::span<const Sample> samples,
                                 double pseudo_force_std = 0.0);

/// energy' = (E - sum rho_Z c_Z - mean) / std; forces' = F / force_std.
Sample normalize_labels(const Sample& sample, const ReferenceTable& table);

/// Inverse transform for predictions of dataset d.
double denormalize_energy(double energy_norm, const AtomicSystem& system,
                          const DatasetNormalizer& norm);
double denormalize_force_component(double f_norm, const DatasetNormalizer& norm);

struct LossBreakdown {
    double total = 0.0;
    double energy_term = 0.0;
    double force_term = 0.0;
    int energy_labeled = 0;  // sum m_E
    int force_labeled = 0;   // sum m_F
    bool energy_empty = false;
    bool force_empty = false;
};

LossBreakdown masked_loss(std::span<const Sample> batch,
                          std::span<const model::Prediction> predictions,
                          const LossConfig& cfg);

/// Same value, plus d(L)/d(prediction) for every sample. Channels other than
/// each sample's d_i receive exactly zero gradient.
LossBreakdown masked_loss_grad(std::span<const Sample> batch,
                               std::span<const model::Prediction> predictions,
                               const LossConfig& cfg,
                               std::vector<model::PredictionGrad>& grads_out);

}  // namespace lamm::loss
