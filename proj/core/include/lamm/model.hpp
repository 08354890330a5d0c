#pragma once
/**
 * model.hpp - miniature rotation-invariant message-passing potential.
 *
 * Architecture, all double precision:
 *   h_i^0      = embedding[Z_i]
 *   f_ij       = (W_filter^l * rbf(r_ij)) * fcut(r_ij)
 *   m_i^l      = sum_j tanh(h_j^l) ⊙ f_ij
 *   h_i^{l+1}  = h_i^l + W_update^l * tanh(m_i^l)
 *   E^(d)      = sum_i (W_energy^T h_i^L)_d
 *   w_ij       = W_force^T [tanh(h_i)+tanh(h_j); tanh(h_i)⊙tanh(h_j); rbf(r_ij)]
 *   F_i^(d)    = sum_j w_ij^(d) * fcut(r_ij) * u_ij
 *
 * with Gaussian radial basis rbf on [0, cutoff] and the cosine envelope
 * fcut(r) = (cos(pi r / r_c) + 1) / 2. Features depend only on pair
 * distances and atomic numbers, so energies are invariant under rigid
 * motions. The pair weight w_ij is symmetric in (i, j) while u_ij flips
 * sign, so predicted forces sum to zero exactly, channel by channel.
 *
 * backward() is a hand-written reverse pass over this exact computation;
 * gradient tests hold it to finite differences at 1e-5 relative error.
 */

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "lamm/core.hpp"
#include "lamm/matrix.hpp"

namespace lamm::model {

struct ModelConfig {
    int hidden = 64;      // H
    int layers = 2;       // L
    int rbf = 16;         // K
    double cutoff = 5.0;  // Å
    int heads = 1;        // |D|
};

void validate_config(const ModelConfig& cfg);

/// All trainable tensors. Doubles as the gradient container: shapes match
/// one-to-one and declaration order fixes the serialization order.
struct ModelParams {
    Matrix embedding;            // 118 x H
    std::vector<Matrix> filter;  // L of H x K
    std::vector<Matrix> update;  // L of H x H
    Matrix energy_head;          // H x D
    Matrix force_head;           // (2H + K) x D

    bool operator==(const ModelParams&) const = default;
};

using Gradients = ModelParams;

/// Visits every tensor in declaration order.
template <class P, class F>
void for_each_tensor(P& params, F&& fn) {
    fn(params.embedding);
    for (auto& m : params.filter) fn(m);
    for (auto& m : params.update) fn(m);
    fn(params.energy_head);
    fn(params.force_head);
}

std::size_t param_count(const ModelParams& params);
Gradients zero_like(const ModelParams& params);
void scale_params(ModelParams& params, double s);
void axpy_params(ModelParams& dst, const ModelParams& src, double a);  // dst += a * src
double global_norm(const ModelParams& params);

/// Deterministic scaled-uniform initialization.
ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed);

/// Fresh heads with `new_heads` channels; encoder tensors are bit-identical
/// to the input.
ModelParams reset_heads(const ModelParams& params, const ModelConfig& cfg, int new_heads,
                        std::uint64_t seed);

/// N x H rotation-invariant per-atom representations.
using AtomFeatures = Matrix;

/// Per-sample intermediates kept for the reverse pass.
struct ForwardCache {
    int n_atoms = 0;
    std::vector<int> atomic_numbers;     // routes embedding gradients
    std::vector<int> pair_i, pair_j;     // directed pairs, grouped by i
    std::vector<double> pair_fcut;       // fcut(r_ij)
    std::vector<Vec3> pair_unit;         // u_ij (from j to i)
    Matrix pair_rbf;                     // P x K
    std::vector<Matrix> h;               // L+1 of N x H (h[0] = embeddings)
    std::vector<Matrix> msg_tanh;        // L of N x H, tanh(m_i^l)
};

/// Energies per head (eV at training scale) and forces laid out
/// forces[(d * N + j) * 3 + c].
struct Prediction {
    int n_atoms = 0;
    int heads = 0;
    std::vector<double> energy;  // D
    std::vector<double> forces;  // D * N * 3

    double force(int d, int j, int c) const {
        return forces[(static_cast<std::size_t>(d) * n_atoms + j) * 3 + c];
    }
};

/// Gradient of a scalar loss with respect to a Prediction, same layout.
using PredictionGrad = Prediction;

AtomFeatures encode(const AtomicSystem& system, const ModelParams& params,
                    const ModelConfig& cfg);

std::vector<double> predict_energy(const AtomFeatures& features, const ModelParams& params);

/// forces[(d * N + j) * 3 + c]; requires features computed from `system`.
std::vector<double> predict_forces(const AtomicSystem& system, const AtomFeatures& features,
                                   const ModelParams& params, const ModelConfig& cfg);

/// Fused forward that also fills the reverse-pass cache when given one.
Prediction forward(const AtomicSystem& system, const ModelParams& params,
                   const ModelConfig& cfg, ForwardCache* cache = nullptr);

/// Accumulates d(loss)/d(params) for one sample into `grads`, given the
/// upstream gradient with respect to its Prediction.
void backward(const ForwardCache& cache, const ModelParams& params, const ModelConfig& cfg,
              const PredictionGrad& upstream, Gradients& grads);

/// Checkpoint: magic "LAMMCKPT", u32 version, config, then tensor blobs in
/// declaration order, all little-endian f64. Bit-exact round trip.
void save_checkpoint(const std::filesystem::path& path, const ModelConfig& cfg,
                     const ModelParams& params);
struct Checkpoint {
    ModelConfig config;
    ModelParams params;
};
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace lamm::model
