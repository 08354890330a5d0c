#pragma once
/**
 * trainer.hpp - pre-training / fine-tuning loops over scheduled mini-batches.
 *
 * Workers are simulated: the G device-batches of each scheduled mini-batch
 * are processed sequentially in worker order, each computes the masked loss
 * on its own B samples, and the G gradients are averaged in worker order
 * before one optimizer step (per-parameter RMS-scaled, momentum-free,
 * gradient-norm clipped). Fixed seeds give bit-identical runs on one
 * platform.
 *
 * Metric units: energy MAE in meV/atom, force MAE in milli-units of the
 * dataset's force label (meV/Å for real forces, mÅ for denoising
 * pseudo-forces).
 */

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "lamm/core.hpp"
#include "lamm/dataset.hpp"
#include "lamm/denoise.hpp"
#include "lamm/loss.hpp"
#include "lamm/model.hpp"
#include "lamm/scheduler.hpp"

namespace lamm::trainer {

struct TrainConfig {
    std::int64_t max_steps = 1000;
    double learning_rate = 1e-3;
    double clip_norm = 10.0;
    std::int64_t val_every = 50;        // validation cadence, steps
    std::int64_t checkpoint_every = 0;  // 0: only at the end
    std::uint64_t seed = 0;
    double lambda_energy = 1.0;
    double lambda_force = 1.0;
    double val_fraction = 0.01;
    std::int64_t max_atoms = 300;
    double noise_sigma = 0.3;  // Å, denoising subsets
    denoise::Scheme noise_scheme = denoise::Scheme::centered;
    double energy_threshold = 0.0;  // meV/atom, <= 0 disables
    double force_threshold = 0.0;   // meV/Å (mÅ for denoising), <= 0 disables
    double rms_decay = 0.99;
    double rms_epsilon = 1e-8;
};

void validate_train_config(const TrainConfig& cfg);

struct MetricPoint {
    std::int64_t step = 0;
    std::string split;  // "train" or "val"
    double energy_mae = 0.0;
    double force_mae = 0.0;
    double loss = 0.0;
};

struct RunMetrics {
    std::vector<MetricPoint> points;
    std::int64_t steps_to_energy_threshold = -1;  // -1: not reached
    std::int64_t steps_to_force_threshold = -1;
    double best_energy_mae = 0.0;  // NaN when no labeled validation happened
    double best_force_mae = 0.0;
    double final_loss = 0.0;

    std::vector<MetricPoint> val_points() const;
};

/// CSV with header step,split,energy_mae,force_mae,loss.
void write_metrics_csv(const std::filesystem::path& path, const RunMetrics& metrics);

/// Invoked at checkpoint cadence and once at the end.
using CheckpointSink =
    std::function<void(std::int64_t step, const model::ModelConfig&, const model::ModelParams&,
                       const loss::ReferenceTable&)>;
/// Invoked for every recorded metric point (progress streaming).
using PointSink = std::function<void(const MetricPoint&)>;

struct PretrainResult {
    model::ModelConfig config;
    model::ModelParams params;
    loss::ReferenceTable refs;
    RunMetrics metrics;
};

/// Full pipeline: 300-atom filter, train/val split, per-dataset reference +
/// normalizer fit on the training split, temperature-sampled epoch index,
/// load-balanced schedule, optimizer steps. Denoising subsets receive fresh
/// noise per draw. Aborts with a diagnostic on non-finite loss.
PretrainResult pretrain(const dataset::Catalog& catalog, const dataset::MixPlan& plan,
                        const scheduler::ScheduleConfig& sched, const model::ModelConfig& model_cfg,
                        const TrainConfig& cfg, const CheckpointSink& checkpoint_sink = {},
                        const PointSink& point_sink = {});

struct FinetuneResult {
    model::ModelConfig config;
    model::ModelParams params;
    loss::ReferenceTable refs;
    RunMetrics metrics;
};

/// Heads reset to a single channel, encoder reused from the checkpoint,
/// references refit on the target's training split.
FinetuneResult finetune(const model::Checkpoint& start, const dataset::Subset& target,
                        const scheduler::ScheduleConfig& sched, const TrainConfig& cfg,
                        const CheckpointSink& checkpoint_sink = {},
                        const PointSink& point_sink = {});

struct DenoiseBenchResult {
    RunMetrics baseline;
    RunMetrics centered;
    double threshold = 0.0;                        // mÅ
    std::int64_t baseline_steps_to_threshold = -1;
    std::int64_t centered_steps_to_threshold = -1;
};

/// Trains the two labeling schemes with identical seeds, data, and noise
/// draws; only the labels differ. Validation uses one fixed noisy copy of
/// the held-out structures per scheme.
DenoiseBenchResult denoise_bench(const dataset::Subset& unlabeled,
                                 const scheduler::ScheduleConfig& sched,
                                 const model::ModelConfig& model_cfg, const TrainConfig& cfg,
                                 double threshold_mae, const PointSink& point_sink = {});

struct EvalResult {
    double energy_mae = 0.0;  // meV/atom, NaN when no energy labels
    double force_mae = 0.0;   // meV/Å, NaN when no force labels
    std::int64_t energy_count = 0;
    std::int64_t force_count = 0;
};

/// Pure statistics over already-denormalized predictions; the model path
/// below is checked against this seam.
EvalResult evaluate_predictions(std::span<const Sample> samples,
                                std::span<const model::Prediction> predictions);

/// Runs the model on every sample, denormalizes with the sample's dataset
/// entry, and reports MAEs in physical units.
EvalResult evaluate(const model::ModelConfig& cfg, const model::ModelParams& params,
                    const loss::ReferenceTable& refs, std::span<const Sample> samples);

}  // namespace lamm::trainer
