#include "lamm/loss.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <Eigen/Dense>

namespace lamm::loss {

const DatasetNormalizer& ReferenceTable::at(int d) const {
    if (d < 0 || static_cast<std::size_t>(d) >= per_dataset.size())
        throw InputError("dataset index " + std::to_string(d) + " outside reference table");
    return per_dataset[static_cast<std::size_t>(d)];
}

std::map<int, double> fit_reference(std::span<const Sample> samples) {
    std::set<int> elements;
    std::size_t labeled = 0;
    for (const auto& s : samples) {
        if (!s.labels.energy_mask) continue;
        ++labeled;
        for (int z : s.system.atomic_numbers) elements.insert(z);
    }
    if (labeled == 0) throw InputError("fit_reference: no energy labels");

    std::vector<int> order(elements.begin(), elements.end());
    Eigen::MatrixXd a(labeled, order.size());
    Eigen::VectorXd b(labeled);
    std::size_t row = 0;
    for (const auto& s : samples) {
        if (!s.labels.energy_mask) continue;
        const auto counts = composition_vector(s.system);
        for (std::size_t c = 0; c < order.size(); ++c) {
            const auto it = counts.find(order[c]);
            a(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(c)) =
                it == counts.end() ? 0.0 : static_cast<double>(it->second);
        }
        b(static_cast<Eigen::Index>(row)) = *s.labels.energy;
        ++row;
    }
    // Minimum-norm least squares; compositions are often rank deficient
    // (e.g. single-element data makes columns collinear with each other).
    const Eigen::VectorXd rho = a.completeOrthogonalDecomposition().solve(b);
    std::map<int, double> out;
    for (std::size_t c = 0; c < order.size(); ++c)
        out[order[c]] = rho(static_cast<Eigen::Index>(c));
    return out;
}

namespace {

double reference_sum(const AtomicSystem& system, const std::map<int, double>& rho) {
    double total = 0.0;
    for (int z : system.atomic_numbers) {
        const auto it = rho.find(z);
        if (it != rho.end()) total += it->second;
    }
    return total;
}

}  // namespace

DatasetNormalizer fit_normalizer(std::span<const Sample> samples, double pseudo_force_std) {
    DatasetNormalizer norm;

    std::size_t n_energy = 0;
    for (const auto& s : samples)
        if (s.labels.energy_mask) ++n_energy;
    if (n_energy > 0) {
        norm.reference_energies = fit_reference(samples);
        double sum = 0.0;
        for (const auto& s : samples)
            if (s.labels.energy_mask)
                sum += *s.labels.energy - reference_sum(s.system, norm.reference_energies);
        norm.energy_mean = sum / static_cast<double>(n_energy);
        double sq = 0.0;
        for (const auto& s : samples) {
            if (!s.labels.energy_mask) continue;
            const double r =
                *s.labels.energy - reference_sum(s.system, norm.reference_energies) - norm.energy_mean;
            sq += r * r;
        }
        norm.energy_std = std::max(std::sqrt(sq / static_cast<double>(n_energy)), 1e-8);
        norm.has_energy_stats = true;
    }

    std::size_t n_comp = 0;
    double f_sum = 0.0;
    for (const auto& s : samples) {
        if (!s.labels.force_mask) continue;
        for (const auto& f : s.labels.forces)
            for (double c : f) {
                f_sum += c;
                ++n_comp;
            }
    }
    if (n_comp > 0) {
        const double mean = f_sum / static_cast<double>(n_comp);
        double sq = 0.0;
        for (const auto& s : samples) {
            if (!s.labels.force_mask) continue;
            for (const auto& f : s.labels.forces)
                for (double c : f) sq += (c - mean) * (c - mean);
        }
        norm.force_std = std::max(std::sqrt(sq / static_cast<double>(n_comp)), 1e-8);
    } else if (pseudo_force_std > 0.0) {
        norm.force_std = pseudo_force_std;
    }
    return norm;
}

Sample normalize_labels(const Sample& sample, const ReferenceTable& table) {
    const auto& norm = table.at(sample.labels.dataset_index);
    Sample out = sample;
    if (out.labels.energy_mask) {
        if (!norm.has_energy_stats)
            throw InputError("normalize_labels: dataset has no fitted energy statistics");
        out.labels.energy = (*sample.labels.energy - reference_sum(sample.system, norm.reference_energies) -
                             norm.energy_mean) /
                            norm.energy_std;
    }
    if (out.labels.force_mask)
        for (auto& f : out.labels.forces) f = (1.0 / norm.force_std) * f;
    return out;
}

double denormalize_energy(double energy_norm, const AtomicSystem& system,
                          const DatasetNormalizer& norm) {
    return energy_norm * norm.energy_std + norm.energy_mean +
           reference_sum(system, norm.reference_energies);
}

double denormalize_force_component(double f_norm, const DatasetNormalizer& norm) {
    return f_norm * norm.force_std;
}

namespace {

LossBreakdown masked_loss_impl(std::span<const Sample> batch,
                               std::span<const model::Prediction> predictions, const LossConfig& cfg,
                               std::vector<model::PredictionGrad>* grads_out) {
    if (batch.size() != predictions.size())
        throw InputError("masked_loss: one prediction per sample required");
    if (!(cfg.lambda_energy >= 0.0) || !(cfg.lambda_force >= 0.0))
        throw InputError("masked_loss: lambdas must be non-negative");

    int m_energy = 0;
    int m_force = 0;
    for (std::size_t s = 0; s < batch.size(); ++s) {
        const auto& pred = predictions[s];
        const auto n = batch[s].system.size();
        validate_labels(batch[s].labels, n);
        if (static_cast<std::size_t>(pred.n_atoms) != n ||
            pred.energy.size() != static_cast<std::size_t>(pred.heads) ||
            pred.forces.size() != static_cast<std::size_t>(pred.heads) * n * 3)
            throw InputError("masked_loss: prediction shape mismatch");
        if (batch[s].labels.dataset_index >= pred.heads)
            throw InputError("masked_loss: dataset index outside prediction heads");
        if (batch[s].labels.energy_mask) ++m_energy;
        if (batch[s].labels.force_mask) ++m_force;
    }

    if (grads_out) {
        grads_out->resize(batch.size());
        for (std::size_t s = 0; s < batch.size(); ++s) {
            auto& g = (*grads_out)[s];
            g.n_atoms = predictions[s].n_atoms;
            g.heads = predictions[s].heads;
            g.energy.assign(predictions[s].energy.size(), 0.0);
            g.forces.assign(predictions[s].forces.size(), 0.0);
        }
    }

    LossBreakdown out;
    out.energy_labeled = m_energy;
    out.force_labeled = m_force;
    out.energy_empty = m_energy == 0;
    out.force_empty = m_force == 0;
    const double w_energy = m_energy > 0 ? cfg.lambda_energy / static_cast<double>(m_energy) : 0.0;
    const double w_force = m_force > 0 ? cfg.lambda_force / static_cast<double>(m_force) : 0.0;

    for (std::size_t s = 0; s < batch.size(); ++s) {
        const auto& labels = batch[s].labels;
        const auto& pred = predictions[s];
        const auto d = static_cast<std::size_t>(labels.dataset_index);
        const auto n = static_cast<std::size_t>(pred.n_atoms);
        if (labels.energy_mask) {
            const double diff = pred.energy[d] - *labels.energy;
            out.energy_term += w_energy * std::abs(diff);
            if (grads_out && diff != 0.0)
                (*grads_out)[s].energy[d] = diff > 0.0 ? w_energy : -w_energy;
        }
        if (labels.force_mask) {
            const double w_sample = w_force / static_cast<double>(n);
            for (std::size_t j = 0; j < n; ++j) {
                double sq = 0.0;
                double diff[3];
                for (std::size_t c = 0; c < 3; ++c) {
                    diff[c] = pred.forces[(d * n + j) * 3 + c] - labels.forces[j][c];
                    sq += diff[c] * diff[c];
                }
                const double dist = std::sqrt(sq);
                out.force_term += w_sample * dist;
                if (grads_out && dist > 0.0)
                    for (std::size_t c = 0; c < 3; ++c)
                        (*grads_out)[s].forces[(d * n + j) * 3 + c] = w_sample * diff[c] / dist;
            }
        }
    }
    out.total = out.energy_term + out.force_term;
    return out;
}

}  // namespace

LossBreakdown masked_loss(std::span<const Sample> batch,
                          std::span<const model::Prediction> predictions, const LossConfig& cfg) {
    return masked_loss_impl(batch, predictions, cfg, nullptr);
}

LossBreakdown masked_loss_grad(std::span<const Sample> batch,
                               std::span<const model::Prediction> predictions, const LossConfig& cfg,
                               std::vector<model::PredictionGrad>& grads_out) {
    return masked_loss_impl(batch, predictions, cfg, &grads_out);
}

}  // namespace lamm::loss
