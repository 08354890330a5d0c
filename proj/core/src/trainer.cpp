#include "lamm/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "lamm/rng.hpp"

namespace lamm::trainer {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Stream tags: every random decision derives from mix_seed(cfg.seed, tag)
// so reruns are bit-identical and the streams never collide.
constexpr std::uint64_t kInitTag = 0x1217;
constexpr std::uint64_t kHeadTag = 0xf1e7;
constexpr std::uint64_t kSplitTag = 0x53504c54;
constexpr std::uint64_t kEpochTag = 0x45504f43;
constexpr std::uint64_t kScheduleTag = 0x53434845;
constexpr std::uint64_t kNoiseTag = 0x4e4f4953;
constexpr std::uint64_t kValNoiseTag = 0x56414c4e;
constexpr std::uint64_t kProbeTag = 0x50535444;

/// Per-parameter RMS-scaled gradient descent (momentum-free).
struct RmsOptimizer {
    model::Gradients v;
    double decay;
    double eps;

    RmsOptimizer(const model::ModelParams& params, double decay_, double eps_)
        : v(model::zero_like(params)), decay(decay_), eps(eps_) {}

    void step(model::ModelParams& params, const model::Gradients& grads, double lr) {
        std::vector<const Matrix*> g_list;
        model::for_each_tensor(grads, [&](const Matrix& m) { g_list.push_back(&m); });
        std::vector<Matrix*> v_list;
        model::for_each_tensor(v, [&](Matrix& m) { v_list.push_back(&m); });
        std::size_t t = 0;
        model::for_each_tensor(params, [&](Matrix& p) {
            const Matrix& g = *g_list.at(t);
            Matrix& vv = *v_list.at(t);
            ++t;
            for (std::size_t k = 0; k < p.size(); ++k) {
                const double gk = g.data()[k];
                vv.data()[k] = decay * vv.data()[k] + (1.0 - decay) * gk * gk;
                p.data()[k] -= lr * gk / (std::sqrt(vv.data()[k]) + eps);
            }
        });
    }
};

/// One subset resolved for training: surviving sample ids split train/val.
struct SubsetView {
    const dataset::Subset* subset = nullptr;
    std::vector<std::int64_t> train_ids;  // indices into subset->samples
    std::vector<std::int64_t> val_ids;
    bool denoising = false;
};

SubsetView make_view(const dataset::Subset& subset, const TrainConfig& cfg, std::uint64_t split_seed) {
    SubsetView view;
    view.subset = &subset;
    view.denoising = subset.meta.task == dataset::TaskKind::denoising;
    auto [kept, removed] = dataset::filter_max_atoms(subset.samples, cfg.max_atoms);
    (void)removed;
    if (kept.empty())
        throw InputError("subset \"" + subset.meta.name + "\": no samples under the atom limit");
    const auto split = dataset::split_train_val(kept.size(), cfg.val_fraction, split_seed);
    for (auto k : split.train) view.train_ids.push_back(kept[static_cast<std::size_t>(k)]);
    for (auto k : split.val) view.val_ids.push_back(kept[static_cast<std::size_t>(k)]);
    if (view.train_ids.empty())
        throw InputError("subset \"" + subset.meta.name + "\": empty training split");
    return view;
}

/// Label scale of the denoising pseudo-forces, estimated from a fixed probe
/// of training structures; stands in for the force std of labeled data.
double estimate_pseudo_force_std(const SubsetView& view, const TrainConfig& cfg) {
    const std::size_t probe = std::min<std::size_t>(view.train_ids.size(), 256);
    double sum = 0.0, sq = 0.0;
    std::size_t count = 0;
    for (std::size_t v = 0; v < probe; ++v) {
        const auto& system = view.subset->samples[static_cast<std::size_t>(view.train_ids[v])].system;
        denoise::NoiseConfig ncfg{cfg.noise_sigma, cfg.noise_scheme, mix_seed(cfg.seed, kProbeTag + v)};
        const auto noise = denoise::apply_noise(system, ncfg);
        for (const auto& f : noise.pseudo_forces)
            for (double c : f) {
                sum += c;
                sq += c * c;
                ++count;
            }
    }
    if (count == 0) return cfg.noise_sigma;
    const double mean = sum / static_cast<double>(count);
    return std::max(std::sqrt(std::max(sq / static_cast<double>(count) - mean * mean, 0.0)), 1e-8);
}

/// Fits one normalizer per prediction channel. Subsets sharing a channel are
/// pooled into a single fit, which is exactly what makes conflicting label
/// conventions collide when heads are shared.
loss::ReferenceTable build_refs(const std::vector<SubsetView>& views, const model::ModelConfig& mcfg,
                                const TrainConfig& cfg) {
    loss::ReferenceTable refs;
    refs.per_dataset.resize(static_cast<std::size_t>(mcfg.heads));
    for (int d = 0; d < mcfg.heads; ++d) {
        std::vector<Sample> pool;
        double pseudo_std = 0.0;
        for (const auto& view : views) {
            if (view.subset->meta.head_index != d) continue;
            if (view.denoising) {
                pseudo_std = std::max(pseudo_std, estimate_pseudo_force_std(view, cfg));
                continue;
            }
            for (auto id : view.train_ids)
                pool.push_back(view.subset->samples[static_cast<std::size_t>(id)]);
        }
        if (!pool.empty() || pseudo_std > 0.0)
            refs.per_dataset[static_cast<std::size_t>(d)] = loss::fit_normalizer(pool, pseudo_std);
    }
    return refs;
}

/// Physical-label validation pool; denoising subsets contribute one fixed
/// noisy copy per structure when requested (the same displacement draws for
/// any labeling scheme under the same base seed).
std::vector<Sample> build_val_samples(const std::vector<SubsetView>& views, const TrainConfig& cfg,
                                      bool include_denoising) {
    std::vector<Sample> out;
    std::size_t ordinal = 0;
    for (const auto& view : views) {
        for (auto id : view.val_ids) {
            const auto& raw = view.subset->samples[static_cast<std::size_t>(id)];
            if (view.denoising) {
                if (include_denoising) {
                    denoise::NoiseConfig ncfg{cfg.noise_sigma, cfg.noise_scheme,
                                              mix_seed(cfg.seed, kValNoiseTag + ordinal)};
                    out.push_back(denoise::make_denoising_sample(
                        raw.system, ncfg, view.subset->meta.head_index, raw.subset_id));
                }
            } else {
                out.push_back(raw);
            }
            ++ordinal;
        }
    }
    return out;
}

struct LoopSetup {
    std::vector<SubsetView> views;
    dataset::MixPlan plan;
    scheduler::ScheduleConfig sched;
    model::ModelConfig mcfg;
    TrainConfig cfg;
    loss::ReferenceTable refs;
    std::vector<Sample> val_samples;
};

/// Running batch-level training statistics in physical units.
struct BatchStats {
    double energy_abs = 0.0;
    std::int64_t energy_count = 0;
    double force_mae_sum = 0.0;  // per-sample component MAEs
    std::int64_t force_count = 0;

    double energy_mae() const {
        return energy_count > 0 ? 1000.0 * energy_abs / static_cast<double>(energy_count) : kNaN;
    }
    double force_mae() const {
        return force_count > 0 ? 1000.0 * force_mae_sum / static_cast<double>(force_count) : kNaN;
    }
};

std::string batch_composition(const std::vector<const dataset::Subset*>& subsets) {
    std::map<std::string, int> counts;
    for (const auto* s : subsets) ++counts[s->meta.name];
    std::ostringstream os;
    bool first = true;
    for (const auto& [name, c] : counts) {
        if (!first) os << ", ";
        os << name << " x" << c;
        first = false;
    }
    return os.str();
}

RunMetrics run_loop(const LoopSetup& setup, model::ModelParams& params,
                    const CheckpointSink& checkpoint_sink, const PointSink& point_sink) {
    const auto& cfg = setup.cfg;
    const auto& mcfg = setup.mcfg;
    validate_train_config(cfg);
    model::validate_config(mcfg);
    for (const auto& view : setup.views)
        if (view.subset->meta.head_index < 0 || view.subset->meta.head_index >= mcfg.heads)
            throw InputError("subset \"" + view.subset->meta.name +
                             "\" trains head " + std::to_string(view.subset->meta.head_index) +
                             " but the model has " + std::to_string(mcfg.heads));

    std::vector<std::int64_t> train_sizes;
    for (const auto& view : setup.views)
        train_sizes.push_back(static_cast<std::int64_t>(view.train_ids.size()));

    const loss::LossConfig lcfg{cfg.lambda_energy, cfg.lambda_force};
    RmsOptimizer opt(params, cfg.rms_decay, cfg.rms_epsilon);
    RunMetrics metrics;
    metrics.best_energy_mae = kNaN;
    metrics.best_force_mae = kNaN;
    metrics.final_loss = kNaN;

    const auto emit = [&](MetricPoint point) {
        if (point_sink) point_sink(point);
        metrics.points.push_back(std::move(point));
    };
    const auto record_val = [&](std::int64_t step) {
        if (setup.val_samples.empty()) return;
        const EvalResult eval = evaluate(mcfg, params, setup.refs, setup.val_samples);
        emit({step, "val", eval.energy_mae, eval.force_mae, kNaN});
        if (!std::isnan(eval.energy_mae) &&
            !(metrics.best_energy_mae <= eval.energy_mae))  // NaN-aware min
            metrics.best_energy_mae = eval.energy_mae;
        if (!std::isnan(eval.force_mae) && !(metrics.best_force_mae <= eval.force_mae))
            metrics.best_force_mae = eval.force_mae;
        if (cfg.energy_threshold > 0.0 && metrics.steps_to_energy_threshold < 0 &&
            eval.energy_mae <= cfg.energy_threshold)
            metrics.steps_to_energy_threshold = step;
        if (cfg.force_threshold > 0.0 && metrics.steps_to_force_threshold < 0 &&
            eval.force_mae <= cfg.force_threshold)
            metrics.steps_to_force_threshold = step;
    };

    const int workers = setup.sched.workers;
    const int per_worker = setup.sched.batch_per_worker;
    std::int64_t step = 0;
    std::int64_t epoch = 0;
    while (step < cfg.max_steps) {
        const auto epoch_index =
            dataset::build_epoch_index(setup.plan, train_sizes, mix_seed(cfg.seed, kEpochTag + epoch));
        std::vector<std::int64_t> atoms(epoch_index.size());
        for (std::size_t e = 0; e < epoch_index.size(); ++e) {
            const auto& view = setup.views[static_cast<std::size_t>(epoch_index[e].subset)];
            const auto id = view.train_ids[static_cast<std::size_t>(epoch_index[e].sample)];
            atoms[e] = static_cast<std::int64_t>(view.subset->samples[static_cast<std::size_t>(id)].system.size());
        }
        auto sched_cfg = setup.sched;
        sched_cfg.seed = mix_seed(cfg.seed, kScheduleTag + epoch);
        const auto schedule = scheduler::plan(atoms, sched_cfg);
        if (schedule.batches.empty())
            throw InputError("schedule produced no mini-batches; reduce workers*batch_per_worker"
                             " or num_splits, or provide more data");

        for (const auto& batch : schedule.batches) {
            if (step >= cfg.max_steps) break;

            double loss_sum = 0.0;
            auto grads = model::zero_like(params);
            BatchStats stats;
            std::vector<const dataset::Subset*> batch_subsets;
            for (int g = 0; g < workers; ++g) {
                std::vector<Sample> normalized;
                std::vector<Sample> raw;  // physical labels for the batch stats
                std::vector<model::ForwardCache> caches(static_cast<std::size_t>(per_worker));
                std::vector<model::Prediction> preds;
                for (int b = 0; b < per_worker; ++b) {
                    const auto pos = static_cast<std::size_t>(g * per_worker + b);
                    const auto& scheduled = batch.samples[pos];
                    const auto& entry = epoch_index[static_cast<std::size_t>(scheduled.sample)];
                    const auto& view = setup.views[static_cast<std::size_t>(entry.subset)];
                    const auto id = view.train_ids[static_cast<std::size_t>(entry.sample)];
                    const auto& source = view.subset->samples[static_cast<std::size_t>(id)];
                    batch_subsets.push_back(view.subset);
                    if (view.denoising) {
                        denoise::NoiseConfig ncfg{cfg.noise_sigma, cfg.noise_scheme,
                                                  mix_seed(mix_seed(cfg.seed, kNoiseTag + step), pos)};
                        raw.push_back(denoise::make_denoising_sample(
                            source.system, ncfg, view.subset->meta.head_index, source.subset_id));
                    } else {
                        raw.push_back(source);
                    }
                    normalized.push_back(loss::normalize_labels(raw.back(), setup.refs));
                    preds.push_back(model::forward(normalized.back().system, params, mcfg,
                                                   &caches[static_cast<std::size_t>(b)]));
                }
                std::vector<model::PredictionGrad> pgrads;
                const auto breakdown = loss::masked_loss_grad(normalized, preds, lcfg, pgrads);
                loss_sum += breakdown.total;
                for (int b = 0; b < per_worker; ++b)
                    model::backward(caches[static_cast<std::size_t>(b)], params, mcfg,
                                    pgrads[static_cast<std::size_t>(b)], grads);

                for (int b = 0; b < per_worker; ++b) {
                    const auto bu = static_cast<std::size_t>(b);
                    const auto& labels = raw[bu].labels;
                    const auto d = labels.dataset_index;
                    const auto& norm = setup.refs.at(d);
                    const auto n = raw[bu].system.size();
                    if (labels.energy_mask) {
                        const double pred_phys = loss::denormalize_energy(
                            preds[bu].energy[static_cast<std::size_t>(d)], raw[bu].system, norm);
                        stats.energy_abs += std::abs(pred_phys - *labels.energy) / static_cast<double>(n);
                        ++stats.energy_count;
                    }
                    if (labels.force_mask) {
                        double abs_sum = 0.0;
                        for (std::size_t j = 0; j < n; ++j)
                            for (int c = 0; c < 3; ++c)
                                abs_sum += std::abs(loss::denormalize_force_component(
                                                        preds[bu].force(d, static_cast<int>(j), c), norm) -
                                                    labels.forces[j][static_cast<std::size_t>(c)]);
                        stats.force_mae_sum += abs_sum / (3.0 * static_cast<double>(n));
                        ++stats.force_count;
                    }
                }
            }

            model::scale_params(grads, 1.0 / static_cast<double>(workers));
            const double loss = loss_sum / static_cast<double>(workers);
            const double grad_norm = model::global_norm(grads);
            if (!std::isfinite(loss) || !std::isfinite(grad_norm))
                throw std::runtime_error("non-finite loss or gradient at step " + std::to_string(step) +
                                         " (batch: " + batch_composition(batch_subsets) + ")");
            if (cfg.clip_norm > 0.0 && grad_norm > cfg.clip_norm)
                model::scale_params(grads, cfg.clip_norm / grad_norm);
            opt.step(params, grads, cfg.learning_rate);

            ++step;
            metrics.final_loss = loss;
            const bool last = step == cfg.max_steps;
            if (step % cfg.val_every == 0 || last) {
                emit({step, "train", stats.energy_mae(), stats.force_mae(), loss});
                record_val(step);
            }
            if (checkpoint_sink && cfg.checkpoint_every > 0 && step % cfg.checkpoint_every == 0 && !last)
                checkpoint_sink(step, mcfg, params, setup.refs);
        }
        ++epoch;
    }
    if (checkpoint_sink) checkpoint_sink(step, mcfg, params, setup.refs);
    return metrics;
}

}  // namespace

void validate_train_config(const TrainConfig& cfg) {
    if (cfg.max_steps < 1) throw InputError("train: max_steps must be >= 1");
    if (!(cfg.learning_rate > 0.0)) throw InputError("train: learning_rate must be positive");
    if (!(cfg.clip_norm >= 0.0)) throw InputError("train: clip_norm must be >= 0");
    if (cfg.val_every < 1) throw InputError("train: val_every must be >= 1");
    if (cfg.checkpoint_every < 0) throw InputError("train: checkpoint_every must be >= 0");
    if (!(cfg.lambda_energy >= 0.0) || !(cfg.lambda_force >= 0.0))
        throw InputError("train: lambdas must be >= 0");
    if (!(cfg.val_fraction >= 0.0 && cfg.val_fraction < 1.0))
        throw InputError("train: val_fraction must be in [0, 1)");
    if (cfg.max_atoms < 1) throw InputError("train: max_atoms must be >= 1");
    if (!(cfg.noise_sigma > 0.0)) throw InputError("train: noise_sigma must be positive");
    if (!(cfg.energy_threshold >= 0.0) || !(cfg.force_threshold >= 0.0))
        throw InputError("train: thresholds must be >= 0");
    if (!(cfg.rms_decay >= 0.0 && cfg.rms_decay < 1.0))
        throw InputError("train: rms_decay must be in [0, 1)");
    if (!(cfg.rms_epsilon > 0.0)) throw InputError("train: rms_epsilon must be positive");
}

std::vector<MetricPoint> RunMetrics::val_points() const {
    std::vector<MetricPoint> out;
    for (const auto& p : points)
        if (p.split == "val") out.push_back(p);
    return out;
}

void write_metrics_csv(const std::filesystem::path& path, const RunMetrics& metrics) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot open " + path.string() + " for writing");
    out << "step,split,energy_mae,force_mae,loss\n";
    out.precision(12);
    for (const auto& p : metrics.points)
        out << p.step << ',' << p.split << ',' << p.energy_mae << ',' << p.force_mae << ','
            << p.loss << '\n';
    if (!out) throw std::runtime_error("short write to " + path.string());
}

PretrainResult pretrain(const dataset::Catalog& catalog, const dataset::MixPlan& plan,
                        const scheduler::ScheduleConfig& sched, const model::ModelConfig& model_cfg,
                        const TrainConfig& cfg, const CheckpointSink& checkpoint_sink,
                        const PointSink& point_sink) {
    if (catalog.subsets.empty()) throw InputError("pretrain: catalog has no subsets");
    if (!plan.repeats.empty() && plan.repeats.size() != catalog.subsets.size())
        throw InputError("pretrain: mix plan length != subset count");

    LoopSetup setup;
    setup.sched = sched;
    setup.mcfg = model_cfg;
    setup.cfg = cfg;
    for (std::size_t k = 0; k < catalog.subsets.size(); ++k)
        setup.views.push_back(make_view(catalog.subsets[k], cfg, mix_seed(cfg.seed, kSplitTag + k)));
    setup.refs = build_refs(setup.views, model_cfg, cfg);
    if (plan.repeats.empty()) {
        std::vector<double> sizes;
        for (const auto& view : setup.views) sizes.push_back(static_cast<double>(view.train_ids.size()));
        setup.plan = dataset::make_mix_plan(sizes, plan.temperature);
    } else {
        setup.plan = plan;
    }
    setup.val_samples = build_val_samples(setup.views, cfg, false);

    PretrainResult result;
    result.config = model_cfg;
    result.params = model::init_params(model_cfg, mix_seed(cfg.seed, kInitTag));
    result.refs = setup.refs;
    result.metrics = run_loop(setup, result.params, checkpoint_sink, point_sink);
    return result;
}

FinetuneResult finetune(const model::Checkpoint& start, const dataset::Subset& target,
                        const scheduler::ScheduleConfig& sched, const TrainConfig& cfg,
                        const CheckpointSink& checkpoint_sink, const PointSink& point_sink) {
    model::validate_config(start.config);

    // Single fresh head; every target label trains channel 0.
    dataset::Subset local = target;
    local.meta.head_index = 0;
    for (auto& sample : local.samples) sample.labels.dataset_index = 0;

    LoopSetup setup;
    setup.sched = sched;
    setup.mcfg = start.config;
    setup.mcfg.heads = 1;
    setup.cfg = cfg;
    setup.views.push_back(make_view(local, cfg, mix_seed(cfg.seed, kSplitTag)));
    setup.refs = build_refs(setup.views, setup.mcfg, cfg);
    setup.plan.temperature = 1.0;
    setup.plan.repeats = {static_cast<double>(setup.views.front().train_ids.size())};
    setup.val_samples = build_val_samples(setup.views, cfg, true);

    FinetuneResult result;
    result.config = setup.mcfg;
    result.params = model::reset_heads(start.params, start.config, 1, mix_seed(cfg.seed, kHeadTag));
    result.refs = setup.refs;
    result.metrics = run_loop(setup, result.params, checkpoint_sink, point_sink);
    return result;
}

DenoiseBenchResult denoise_bench(const dataset::Subset& unlabeled,
                                 const scheduler::ScheduleConfig& sched,
                                 const model::ModelConfig& model_cfg, const TrainConfig& cfg,
                                 double threshold_mae, const PointSink& point_sink) {
    if (!(threshold_mae >= 0.0)) throw InputError("denoise_bench: threshold must be >= 0");

    dataset::Subset local = unlabeled;
    local.meta.task = dataset::TaskKind::denoising;
    local.meta.head_index = 0;
    for (auto& sample : local.samples) {
        sample.labels = Labels{};  // structures only; labels are generated noise
        sample.labels.dataset_index = 0;
    }

    model::ModelConfig mcfg = model_cfg;
    mcfg.heads = 1;
    const auto initial = model::init_params(mcfg, mix_seed(cfg.seed, kInitTag));

    DenoiseBenchResult result;
    result.threshold = threshold_mae;
    for (const auto scheme : {denoise::Scheme::baseline, denoise::Scheme::centered}) {
        LoopSetup setup;
        setup.sched = sched;
        setup.mcfg = mcfg;
        setup.cfg = cfg;
        setup.cfg.noise_scheme = scheme;
        setup.cfg.force_threshold = threshold_mae;
        setup.views.push_back(make_view(local, setup.cfg, mix_seed(cfg.seed, kSplitTag)));
        setup.refs = build_refs(setup.views, mcfg, setup.cfg);
        setup.plan.temperature = 1.0;
        setup.plan.repeats = {static_cast<double>(setup.views.front().train_ids.size())};
        setup.val_samples = build_val_samples(setup.views, setup.cfg, true);

        model::ModelParams params = initial;
        RunMetrics metrics = run_loop(setup, params, {}, point_sink);
        if (scheme == denoise::Scheme::baseline) {
            result.baseline_steps_to_threshold = metrics.steps_to_force_threshold;
            result.baseline = std::move(metrics);
        } else {
            result.centered_steps_to_threshold = metrics.steps_to_force_threshold;
            result.centered = std::move(metrics);
        }
    }
    return result;
}

EvalResult evaluate_predictions(std::span<const Sample> samples,
                                std::span<const model::Prediction> predictions) {
    if (samples.size() != predictions.size())
        throw InputError("evaluate: one prediction per sample required");
    EvalResult result;
    double energy_sum = 0.0;
    double force_sum = 0.0;
    for (std::size_t s = 0; s < samples.size(); ++s) {
        const auto& labels = samples[s].labels;
        const auto& pred = predictions[s];
        const auto n = samples[s].system.size();
        validate_labels(labels, n);
        if (static_cast<std::size_t>(pred.n_atoms) != n || labels.dataset_index >= pred.heads)
            throw InputError("evaluate: prediction shape mismatch");
        const auto d = labels.dataset_index;
        if (labels.energy_mask) {
            energy_sum += std::abs(pred.energy[static_cast<std::size_t>(d)] - *labels.energy) /
                          static_cast<double>(n);
            ++result.energy_count;
        }
        if (labels.force_mask) {
            double abs_sum = 0.0;
            for (std::size_t j = 0; j < n; ++j)
                for (int c = 0; c < 3; ++c)
                    abs_sum += std::abs(pred.force(d, static_cast<int>(j), c) -
                                        labels.forces[j][static_cast<std::size_t>(c)]);
            force_sum += abs_sum / (3.0 * static_cast<double>(n));
            ++result.force_count;
        }
    }
    result.energy_mae =
        result.energy_count > 0 ? 1000.0 * energy_sum / static_cast<double>(result.energy_count) : kNaN;
    result.force_mae =
        result.force_count > 0 ? 1000.0 * force_sum / static_cast<double>(result.force_count) : kNaN;
    return result;
}

EvalResult evaluate(const model::ModelConfig& cfg, const model::ModelParams& params,
                    const loss::ReferenceTable& refs, std::span<const Sample> samples) {
    std::vector<model::Prediction> physical(samples.size());
    parallel_for(samples.size(), [&](std::size_t s) {
        const auto& sample = samples[s];
        const auto d = sample.labels.dataset_index;
        const auto& norm = refs.at(d);
        const auto n = sample.system.size();
        auto pred = model::forward(sample.system, params, cfg);
        // Denormalize the sample's own channel; other channels stay zero.
        model::Prediction phys;
        phys.n_atoms = pred.n_atoms;
        phys.heads = pred.heads;
        phys.energy.assign(pred.energy.size(), 0.0);
        phys.forces.assign(pred.forces.size(), 0.0);
        if (sample.labels.energy_mask)
            phys.energy[static_cast<std::size_t>(d)] = loss::denormalize_energy(
                pred.energy[static_cast<std::size_t>(d)], sample.system, norm);
        for (std::size_t j = 0; j < n; ++j)
            for (int c = 0; c < 3; ++c)
                phys.forces[(static_cast<std::size_t>(d) * n + j) * 3 + static_cast<std::size_t>(c)] =
                    loss::denormalize_force_component(pred.force(d, static_cast<int>(j), c), norm);
        physical[s] = std::move(phys);
    });
    return evaluate_predictions(samples, physical);
}

}  // namespace lamm::trainer
