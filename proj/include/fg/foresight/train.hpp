#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "fg/foresight/dataset.hpp"
#include "fg/foresight/predictor.hpp"

namespace fg::foresight {

struct CurriculumPhase {
    std::size_t horizon = 1;
    float learning_rate = 1e-4f;
    std::size_t batch_size = 32;
    std::size_t iterations = 0;
};

// k = 1, 3, 5 with learning rates 1e-4, 1e-5, 1e-5 and batch sizes 32, 8, 8.
std::vector<CurriculumPhase> default_curriculum();

struct PredictorTrainConfig {
    PredictorArch arch;
    std::vector<CurriculumPhase> phases = default_curriculum();
    // Total-iteration marks at which a parameter snapshot is kept.
    std::vector<std::size_t> snapshot_marks = {1000, 2000, 4000, 8000, 16000, 30000};
    std::size_t val_windows = 2000;  // cap on validation windows scored per evaluation
    std::uint64_t seed = 1;
};

struct Snapshot {
    std::size_t iteration = 0;
    PredictorModel model;
    double val_mse = 0.0;
};

struct PredictorTrainResult {
    PredictorModel model;
    double initial_val_mse = 0.0;
    std::vector<double> phase_val_mse;  // after each phase
    std::vector<Snapshot> snapshots;
};

// Per-pixel mean of the training split.
policy::PixelStats dataset_stats(const PredictionDataset& data);

// Mean squared one-step prediction error in [0,1] pixel units over (at most
// max_windows evenly spaced) windows of a split.
double prediction_mse(const PredictionDataset& data, const PredictorModel& model, Split split,
                      std::size_t max_windows);
// Mean squared error of each rollout step 1..k.
std::vector<double> rollout_mse(const PredictionDataset& data, const PredictorModel& model, Split split,
                                std::size_t k, std::size_t max_windows);
double reconstruction_mse(const PredictionDataset& data, const PredictorModel& autoencoder, Split split,
                          std::size_t max_frames);

using ProgressFn = std::function<void(std::size_t iteration, double loss)>;

PredictorTrainResult train_predictor(const PredictionDataset& data, const PredictorTrainConfig& config,
                                     const ProgressFn& progress = {});

struct AutoencoderTrainConfig {
    PredictorArch arch;
    std::size_t iterations = 20000;
    float learning_rate = 1e-4f;
    std::size_t batch_size = 32;
    std::size_t checkpoint_every = 2000;
    std::size_t eval_frames = 2000;
    std::uint64_t seed = 1;
};

struct AutoencoderTrainResult {
    PredictorModel model;
    std::vector<std::pair<std::size_t, double>> train_mse;  // (iteration, reconstruction MSE)
};

AutoencoderTrainResult train_autoencoder(const PredictionDataset& data, const AutoencoderTrainConfig& config,
                                         const ProgressFn& progress = {});

}  // namespace fg::foresight
