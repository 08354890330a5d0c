#include "lamm/model.hpp"

#include <cmath>
#include <fstream>

#include "lamm/binio.hpp"
#include "lamm/rng.hpp"

namespace lamm::model {

namespace {

constexpr std::string_view kCheckpointMagic = "LAMMCKPT";
constexpr std::uint32_t kCheckpointVersion = 1;
constexpr double kPi = 3.14159265358979323846;

double fcut(double r, double cutoff) { return 0.5 * (std::cos(kPi * r / cutoff) + 1.0); }

/// Gaussian basis, K centers uniform on [0, cutoff], width = center spacing.
void fill_rbf(double r, const ModelConfig& cfg, double* out) {
    const double width = cfg.cutoff / static_cast<double>(cfg.rbf - 1);
    const double inv = 1.0 / (2.0 * width * width);
    for (int k = 0; k < cfg.rbf; ++k) {
        const double d = r - width * static_cast<double>(k);
        out[k] = std::exp(-d * d * inv);
    }
}

Matrix tanh_of(const Matrix& m) {
    Matrix out(m.rows(), m.cols());
    for (std::size_t k = 0; k < m.size(); ++k) out.data()[k] = std::tanh(m.data()[k]);
    return out;
}

/// Shared encoder walk; fills `cache` (pair data + per-layer h, tanh(m))
/// when given one and returns h^L.
Matrix run_encoder(const AtomicSystem& system, const ModelParams& params, const ModelConfig& cfg,
                   ForwardCache* cache) {
    validate_config(cfg);
    const auto nlist = build_neighbor_list(system, cfg.cutoff);
    const auto n = system.size();
    const auto n_pairs = nlist.pairs.size();
    const auto hdim = static_cast<std::size_t>(cfg.hidden);

    Matrix rbf(n_pairs, static_cast<std::size_t>(cfg.rbf));
    std::vector<double> fc(n_pairs);
    for (std::size_t p = 0; p < n_pairs; ++p) {
        fill_rbf(nlist.pairs[p].distance, cfg, rbf.row(p).data());
        fc[p] = fcut(nlist.pairs[p].distance, cfg.cutoff);
    }

    Matrix h(n, hdim);
    for (std::size_t i = 0; i < n; ++i) {
        const auto emb = params.embedding.row(static_cast<std::size_t>(system.atomic_numbers[i] - 1));
        for (std::size_t a = 0; a < hdim; ++a) h(i, a) = emb[a];
    }

    if (cache) {
        cache->n_atoms = static_cast<int>(n);
        cache->atomic_numbers = system.atomic_numbers;
        cache->pair_i.resize(n_pairs);
        cache->pair_j.resize(n_pairs);
        cache->pair_unit.resize(n_pairs);
        for (std::size_t p = 0; p < n_pairs; ++p) {
            cache->pair_i[p] = nlist.pairs[p].i;
            cache->pair_j[p] = nlist.pairs[p].j;
            cache->pair_unit[p] = nlist.pairs[p].unit;
        }
        cache->pair_fcut = fc;
        cache->pair_rbf = rbf;
        cache->h.clear();
        cache->msg_tanh.clear();
        cache->h.push_back(h);
    }

    std::vector<double> filt(hdim);
    for (int l = 0; l < cfg.layers; ++l) {
        const Matrix t = tanh_of(h);
        const auto& w_filter = params.filter[static_cast<std::size_t>(l)];
        Matrix msg(n, hdim);
        for (std::size_t p = 0; p < n_pairs; ++p) {
            const auto rb = rbf.row(p);
            for (std::size_t a = 0; a < hdim; ++a) {
                double acc = 0.0;
                for (int k = 0; k < cfg.rbf; ++k)
                    acc += w_filter(a, static_cast<std::size_t>(k)) * rb[static_cast<std::size_t>(k)];
                filt[a] = acc * fc[p];
            }
            const auto i = static_cast<std::size_t>(nlist.pairs[p].i);
            const auto j = static_cast<std::size_t>(nlist.pairs[p].j);
            for (std::size_t a = 0; a < hdim; ++a) msg(i, a) += t(j, a) * filt[a];
        }
        const Matrix mt = tanh_of(msg);
        const auto& w_update = params.update[static_cast<std::size_t>(l)];
        Matrix h_next(n, hdim);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t b = 0; b < hdim; ++b) {
                double acc = h(i, b);
                for (std::size_t a = 0; a < hdim; ++a) acc += w_update(b, a) * mt(i, a);
                h_next(i, b) = acc;
            }
        }
        h = std::move(h_next);
        if (cache) {
            cache->msg_tanh.push_back(mt);
            cache->h.push_back(h);
        }
    }
    return h;
}

}  // namespace

void validate_config(const ModelConfig& cfg) {
    if (cfg.hidden < 1) throw InputError("model: hidden must be >= 1");
    if (cfg.layers < 0) throw InputError("model: layers must be >= 0");
    if (cfg.rbf < 2) throw InputError("model: rbf must be >= 2");
    if (!(cfg.cutoff > 0.0)) throw InputError("model: cutoff must be positive");
    if (cfg.heads < 1) throw InputError("model: heads must be >= 1");
}

std::size_t param_count(const ModelParams& params) {
    std::size_t n = 0;
    for_each_tensor(params, [&](const Matrix& m) { n += m.size(); });
    return n;
}

Gradients zero_like(const ModelParams& params) {
    Gradients z = params;
    for_each_tensor(z, [](Matrix& m) { m.fill(0.0); });
    return z;
}

void scale_params(ModelParams& params, double s) {
    for_each_tensor(params, [s](Matrix& m) {
        for (std::size_t k = 0; k < m.size(); ++k) m.data()[k] *= s;
    });
}

void axpy_params(ModelParams& dst, const ModelParams& src, double a) {
    std::vector<const Matrix*> from;
    for_each_tensor(src, [&](const Matrix& m) { from.push_back(&m); });
    std::size_t t = 0;
    for_each_tensor(dst, [&](Matrix& m) {
        const Matrix& s = *from.at(t++);
        if (s.rows() != m.rows() || s.cols() != m.cols())
            throw InputError("axpy_params: shape mismatch");
        for (std::size_t k = 0; k < m.size(); ++k) m.data()[k] += a * s.data()[k];
    });
    if (t != from.size()) throw InputError("axpy_params: tensor count mismatch");
}

double global_norm(const ModelParams& params) {
    double sq = 0.0;
    for_each_tensor(params, [&](const Matrix& m) {
        for (std::size_t k = 0; k < m.size(); ++k) sq += m.data()[k] * m.data()[k];
    });
    return std::sqrt(sq);
}

namespace {

void init_tensor(Matrix& m, double scale, Rng& rng) {
    for (std::size_t k = 0; k < m.size(); ++k) m.data()[k] = rng.uniform(-scale, scale);
}

void init_heads(ModelParams& params, const ModelConfig& cfg, int heads, Rng& rng) {
    params.energy_head = Matrix(static_cast<std::size_t>(cfg.hidden), static_cast<std::size_t>(heads));
    params.force_head =
        Matrix(static_cast<std::size_t>(2 * cfg.hidden + cfg.rbf), static_cast<std::size_t>(heads));
    init_tensor(params.energy_head, 1.0 / std::sqrt(static_cast<double>(cfg.hidden)), rng);
    init_tensor(params.force_head, 1.0 / std::sqrt(static_cast<double>(2 * cfg.hidden + cfg.rbf)), rng);
}

}  // namespace

ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed) {
    validate_config(cfg);
    Rng rng(seed);
    ModelParams params;
    params.embedding = Matrix(kMaxAtomicNumber, static_cast<std::size_t>(cfg.hidden));
    init_tensor(params.embedding, 1.0, rng);
    for (int l = 0; l < cfg.layers; ++l) {
        params.filter.emplace_back(static_cast<std::size_t>(cfg.hidden), static_cast<std::size_t>(cfg.rbf));
        init_tensor(params.filter.back(), 1.0 / std::sqrt(static_cast<double>(cfg.rbf)), rng);
    }
    for (int l = 0; l < cfg.layers; ++l) {
        params.update.emplace_back(static_cast<std::size_t>(cfg.hidden), static_cast<std::size_t>(cfg.hidden));
        init_tensor(params.update.back(), 1.0 / std::sqrt(static_cast<double>(cfg.hidden)), rng);
    }
    init_heads(params, cfg, cfg.heads, rng);
    return params;
}

ModelParams reset_heads(const ModelParams& params, const ModelConfig& cfg, int new_heads,
                        std::uint64_t seed) {
    if (new_heads < 1) throw InputError("reset_heads: need at least one head");
    ModelParams out = params;
    Rng rng(seed);
    init_heads(out, cfg, new_heads, rng);
    return out;
}

AtomFeatures encode(const AtomicSystem& system, const ModelParams& params, const ModelConfig& cfg) {
    return run_encoder(system, params, cfg, nullptr);
}

std::vector<double> predict_energy(const AtomFeatures& features, const ModelParams& params) {
    const auto heads = params.energy_head.cols();
    const auto hdim = params.energy_head.rows();
    if (features.cols() != hdim) throw InputError("predict_energy: feature width != head input");
    std::vector<double> energy(heads, 0.0);
    for (std::size_t i = 0; i < features.rows(); ++i)
        for (std::size_t a = 0; a < hdim; ++a)
            for (std::size_t d = 0; d < heads; ++d)
                energy[d] += params.energy_head(a, d) * features(i, a);
    return energy;
}

namespace {

/// Pair force head on precomputed pair data; `t` is tanh of the features.
std::vector<double> force_kernel(const Matrix& t, const std::vector<int>& pair_i,
                                 const std::vector<int>& pair_j, const std::vector<double>& pair_fcut,
                                 const Matrix& pair_rbf, const std::vector<Vec3>& pair_unit,
                                 const ModelParams& params, const ModelConfig& cfg) {
    const auto n = t.rows();
    const auto hdim = static_cast<std::size_t>(cfg.hidden);
    const auto heads = params.force_head.cols();
    std::vector<double> forces(heads * n * 3, 0.0);
    std::vector<double> w(heads);
    for (std::size_t p = 0; p < pair_i.size(); ++p) {
        const auto i = static_cast<std::size_t>(pair_i[p]);
        const auto j = static_cast<std::size_t>(pair_j[p]);
        const auto rb = pair_rbf.row(p);
        // phi = [tanh(h_i)+tanh(h_j); tanh(h_i)*tanh(h_j); rbf], symmetric in (i, j)
        for (std::size_t d = 0; d < heads; ++d) {
            double acc = 0.0;
            for (std::size_t a = 0; a < hdim; ++a) {
                acc += params.force_head(a, d) * (t(i, a) + t(j, a));
                acc += params.force_head(hdim + a, d) * (t(i, a) * t(j, a));
            }
            for (int k = 0; k < cfg.rbf; ++k)
                acc += params.force_head(2 * hdim + static_cast<std::size_t>(k), d) *
                       rb[static_cast<std::size_t>(k)];
            w[d] = acc;
        }
        for (std::size_t d = 0; d < heads; ++d)
            for (std::size_t c = 0; c < 3; ++c)
                forces[(d * n + i) * 3 + c] += w[d] * pair_fcut[p] * pair_unit[p][c];
    }
    return forces;
}

void check_heads(const ModelParams& params, const ModelConfig& cfg) {
    if (params.energy_head.cols() != static_cast<std::size_t>(cfg.heads) ||
        params.force_head.cols() != static_cast<std::size_t>(cfg.heads))
        throw InputError("model: parameter head count disagrees with config");
}

}  // namespace

std::vector<double> predict_forces(const AtomicSystem& system, const AtomFeatures& features,
                                   const ModelParams& params, const ModelConfig& cfg) {
    validate_config(cfg);
    if (features.rows() != system.size())
        throw InputError("predict_forces: feature rows != atom count");
    const auto nlist = build_neighbor_list(system, cfg.cutoff);
    const auto n_pairs = nlist.pairs.size();
    std::vector<int> pair_i(n_pairs), pair_j(n_pairs);
    std::vector<double> fc(n_pairs);
    std::vector<Vec3> unit(n_pairs);
    Matrix rbf(n_pairs, static_cast<std::size_t>(cfg.rbf));
    for (std::size_t p = 0; p < n_pairs; ++p) {
        pair_i[p] = nlist.pairs[p].i;
        pair_j[p] = nlist.pairs[p].j;
        fc[p] = fcut(nlist.pairs[p].distance, cfg.cutoff);
        unit[p] = nlist.pairs[p].unit;
        fill_rbf(nlist.pairs[p].distance, cfg, rbf.row(p).data());
    }
    return force_kernel(tanh_of(features), pair_i, pair_j, fc, rbf, unit, params, cfg);
}

Prediction forward(const AtomicSystem& system, const ModelParams& params, const ModelConfig& cfg,
                   ForwardCache* cache) {
    check_heads(params, cfg);
    ForwardCache local;
    ForwardCache* c = cache ? cache : &local;
    const Matrix features = run_encoder(system, params, cfg, c);
    Prediction pred;
    pred.n_atoms = static_cast<int>(system.size());
    pred.heads = cfg.heads;
    pred.energy = predict_energy(features, params);
    pred.forces = force_kernel(tanh_of(features), c->pair_i, c->pair_j, c->pair_fcut, c->pair_rbf,
                               c->pair_unit, params, cfg);
    return pred;
}

void backward(const ForwardCache& cache, const ModelParams& params, const ModelConfig& cfg,
              const PredictionGrad& upstream, Gradients& grads) {
    const auto n = static_cast<std::size_t>(cache.n_atoms);
    const auto hdim = static_cast<std::size_t>(cfg.hidden);
    const auto heads = static_cast<std::size_t>(cfg.heads);
    const auto n_pairs = cache.pair_i.size();
    check_heads(params, cfg);
    if (upstream.energy.size() != heads || upstream.forces.size() != heads * n * 3)
        throw InputError("backward: upstream gradient shape mismatch");
    if (cache.h.size() != static_cast<std::size_t>(cfg.layers) + 1)
        throw InputError("backward: cache does not match config");

    const Matrix& h_last = cache.h.back();
    const Matrix t_last = tanh_of(h_last);

    // dL/dh^L and dL/dtanh(h^L), filled by the two heads.
    Matrix gh(n, hdim);
    Matrix gt(n, hdim);

    for (std::size_t d = 0; d < heads; ++d) {
        const double ge = upstream.energy[d];
        if (ge == 0.0) continue;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t a = 0; a < hdim; ++a) {
                grads.energy_head(a, d) += h_last(i, a) * ge;
                gh(i, a) += params.energy_head(a, d) * ge;
            }
        }
    }

    std::vector<double> gw(heads);
    std::vector<double> gphi(2 * hdim + static_cast<std::size_t>(cfg.rbf));
    for (std::size_t p = 0; p < n_pairs; ++p) {
        const auto i = static_cast<std::size_t>(cache.pair_i[p]);
        const auto j = static_cast<std::size_t>(cache.pair_j[p]);
        const double env = cache.pair_fcut[p];
        bool any = false;
        for (std::size_t d = 0; d < heads; ++d) {
            double acc = 0.0;
            for (int c = 0; c < 3; ++c)
                acc += upstream.forces[(d * n + i) * 3 + static_cast<std::size_t>(c)] *
                       cache.pair_unit[p][static_cast<std::size_t>(c)];
            gw[d] = env * acc;
            any = any || gw[d] != 0.0;
        }
        if (!any) continue;
        const auto rb = cache.pair_rbf.row(p);
        for (std::size_t q = 0; q < gphi.size(); ++q) {
            double phi_q;
            if (q < hdim) phi_q = t_last(i, q) + t_last(j, q);
            else if (q < 2 * hdim) phi_q = t_last(i, q - hdim) * t_last(j, q - hdim);
            else phi_q = rb[q - 2 * hdim];
            double g = 0.0;
            for (std::size_t d = 0; d < heads; ++d) {
                grads.force_head(q, d) += phi_q * gw[d];
                g += params.force_head(q, d) * gw[d];
            }
            gphi[q] = g;
        }
        for (std::size_t a = 0; a < hdim; ++a) {
            gt(i, a) += gphi[a] + gphi[hdim + a] * t_last(j, a);
            gt(j, a) += gphi[a] + gphi[hdim + a] * t_last(i, a);
        }
    }

    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t a = 0; a < hdim; ++a)
            gh(i, a) += gt(i, a) * (1.0 - t_last(i, a) * t_last(i, a));

    std::vector<double> filt(hdim);
    std::vector<double> gpsi(hdim);
    for (int l = cfg.layers - 1; l >= 0; --l) {
        const auto lu = static_cast<std::size_t>(l);
        const Matrix& mt = cache.msg_tanh[lu];
        const Matrix& w_update = params.update[lu];
        const Matrix& w_filter = params.filter[lu];

        // h^{l+1} = h^l + W_update tanh(m): update-weight grads and dL/dm.
        Matrix gm(n, hdim);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t b = 0; b < hdim; ++b) {
                const double g = gh(i, b);
                if (g == 0.0) continue;
                for (std::size_t a = 0; a < hdim; ++a) {
                    grads.update[lu](b, a) += g * mt(i, a);
                    gm(i, a) += w_update(b, a) * g;
                }
            }
        }
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t a = 0; a < hdim; ++a)
                gm(i, a) *= 1.0 - mt(i, a) * mt(i, a);

        // m_i = sum_j tanh(h_j) * f_ij: filter grads and dL/dtanh(h^l).
        const Matrix t_l = tanh_of(cache.h[lu]);
        Matrix gt_l(n, hdim);
        for (std::size_t p = 0; p < n_pairs; ++p) {
            const auto i = static_cast<std::size_t>(cache.pair_i[p]);
            const auto j = static_cast<std::size_t>(cache.pair_j[p]);
            const double env = cache.pair_fcut[p];
            const auto rb = cache.pair_rbf.row(p);
            for (std::size_t a = 0; a < hdim; ++a) {
                double acc = 0.0;
                for (int k = 0; k < cfg.rbf; ++k)
                    acc += w_filter(a, static_cast<std::size_t>(k)) * rb[static_cast<std::size_t>(k)];
                filt[a] = acc * env;
            }
            for (std::size_t a = 0; a < hdim; ++a) {
                const double g = gm(i, a);
                if (g == 0.0) continue;
                gt_l(j, a) += g * filt[a];
                gpsi[a] = g * t_l(j, a) * env;
                for (int k = 0; k < cfg.rbf; ++k)
                    grads.filter[lu](a, static_cast<std::size_t>(k)) +=
                        gpsi[a] * rb[static_cast<std::size_t>(k)];
            }
        }
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t a = 0; a < hdim; ++a)
                gh(j, a) += gt_l(j, a) * (1.0 - t_l(j, a) * t_l(j, a));
    }

    for (std::size_t i = 0; i < n; ++i) {
        const auto z = static_cast<std::size_t>(cache.atomic_numbers[i] - 1);
        for (std::size_t a = 0; a < hdim; ++a) grads.embedding(z, a) += gh(i, a);
    }
}

namespace {

void write_tensor(std::ostream& out, const Matrix& m) {
    binio::write_u32(out, static_cast<std::uint32_t>(m.rows()));
    binio::write_u32(out, static_cast<std::uint32_t>(m.cols()));
    for (std::size_t k = 0; k < m.size(); ++k) binio::write_f64(out, m.data()[k]);
}

Matrix read_tensor(std::istream& in) {
    const std::uint32_t rows = binio::read_u32(in);
    const std::uint32_t cols = binio::read_u32(in);
    Matrix m(rows, cols);
    for (std::size_t k = 0; k < m.size(); ++k) m.data()[k] = binio::read_f64(in);
    return m;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ModelConfig& cfg,
                     const ModelParams& params) {
    validate_config(cfg);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot open " + path.string() + " for writing");
    binio::write_magic(out, kCheckpointMagic);
    binio::write_u32(out, kCheckpointVersion);
    binio::write_u32(out, static_cast<std::uint32_t>(cfg.hidden));
    binio::write_u32(out, static_cast<std::uint32_t>(cfg.layers));
    binio::write_u32(out, static_cast<std::uint32_t>(cfg.rbf));
    binio::write_u32(out, static_cast<std::uint32_t>(cfg.heads));
    binio::write_f64(out, cfg.cutoff);
    for_each_tensor(params, [&](const Matrix& m) { write_tensor(out, m); });
    if (!out) throw std::runtime_error("short write to " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open " + path.string());
    binio::expect_magic(in, kCheckpointMagic, path.string());
    const std::uint32_t version = binio::read_u32(in);
    if (version != kCheckpointVersion)
        throw InputError(path.string() + ": unsupported checkpoint version " + std::to_string(version));
    Checkpoint ckpt;
    ckpt.config.hidden = static_cast<int>(binio::read_u32(in));
    ckpt.config.layers = static_cast<int>(binio::read_u32(in));
    ckpt.config.rbf = static_cast<int>(binio::read_u32(in));
    ckpt.config.heads = static_cast<int>(binio::read_u32(in));
    ckpt.config.cutoff = binio::read_f64(in);
    validate_config(ckpt.config);

    const auto& cfg = ckpt.config;
    ckpt.params.embedding = read_tensor(in);
    for (int l = 0; l < cfg.layers; ++l) ckpt.params.filter.push_back(read_tensor(in));
    for (int l = 0; l < cfg.layers; ++l) ckpt.params.update.push_back(read_tensor(in));
    ckpt.params.energy_head = read_tensor(in);
    ckpt.params.force_head = read_tensor(in);

    const auto expect = [&](const Matrix& m, std::size_t rows, std::size_t cols, const char* what) {
        if (m.rows() != rows || m.cols() != cols)
            throw InputError(path.string() + ": " + what + " tensor shape disagrees with config");
    };
    expect(ckpt.params.embedding, kMaxAtomicNumber, static_cast<std::size_t>(cfg.hidden), "embedding");
    for (const auto& m : ckpt.params.filter)
        expect(m, static_cast<std::size_t>(cfg.hidden), static_cast<std::size_t>(cfg.rbf), "filter");
    for (const auto& m : ckpt.params.update)
        expect(m, static_cast<std::size_t>(cfg.hidden), static_cast<std::size_t>(cfg.hidden), "update");
    expect(ckpt.params.energy_head, static_cast<std::size_t>(cfg.hidden),
           static_cast<std::size_t>(cfg.heads), "energy head");
    expect(ckpt.params.force_head, static_cast<std::size_t>(2 * cfg.hidden + cfg.rbf),
           static_cast<std::size_t>(cfg.heads), "force head");
    return ckpt;
}

}  // namespace lamm::model
