#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "wseg/dataset.hpp"
#include "wseg/imaging.hpp"
#include "wseg/model.hpp"
#include "wseg/optim.hpp"

namespace wseg {

// Stops after `patience` consecutive non-improving epochs: observe() returns
// true exactly when epochs_since_improvement exceeds patience.
struct EarlyStopper {
    int patience = 100;
    double best_metric = -std::numeric_limits<double>::infinity();
    int epochs_since_improvement = 0;

    bool observe(double metric) {
        if (metric > best_metric) {
            best_metric = metric;
            epochs_since_improvement = 0;
            return false;
        }
        ++epochs_since_improvement;
        return epochs_since_improvement > patience;
    }
};

struct TrainLogRow {
    int epoch = 0;
    double loss = 0.0;
    double train_dice = 0.0;
    double val_precision = 0.0;
    double val_recall = 0.0;
    double val_dice = 0.0;
};

struct TrainOptions {
    int batch_size = 2;
    float learning_rate = 1e-4f;
    int max_epochs = 1000;
    int patience = 100;
    std::uint64_t seed = 0;
    bool augment_enabled = true;
    AugmentSpec augment;  // per-sample seeds are derived from (seed, epoch, index)
    std::function<void(const TrainLogRow&)> on_epoch;  // optional progress hook
};

// One Adam slot per model parameter.
class Adam {
public:
    Adam(Model& model, float learning_rate);
    void step(Model& model);  // applies var->grad and clears it

private:
    std::vector<nn::AdamState> slots_;
};

struct EpochStats {
    double loss = 0.0;
    double train_dice = 0.0;
};

struct SplitMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double dice = 0.0;
};

struct FitResult {
    int best_epoch = 0;
    double best_val_dice = 0.0;
    int epochs_run = 0;
    bool early_stopped = false;
    std::vector<TrainLogRow> log;
};

// One full pass over the training split in deterministic shuffled order.
EpochStats train_epoch(Model& model, const std::vector<DataPair>& train, Adam& optimizer,
                       const TrainOptions& options, int epoch);

// Mean per-image metrics at probability threshold 0.5, before any CCL
// post-processing. Used both for validation and model selection.
SplitMetrics evaluate_split(Model& model, const std::vector<DataPair>& split);

// Trains until early stopping or max_epochs and leaves the model restored to
// the epoch with the highest validation Dice.
FitResult fit(Model& model, const std::vector<DataPair>& train, const std::vector<DataPair>& val,
              const TrainOptions& options);

std::string training_log_header();
std::string training_log_row(const TrainLogRow& row);
std::string training_log_csv(const std::vector<TrainLogRow>& rows);

// Per-image dice of a probability plane against the ground truth mask,
// thresholded through the shared quantize-then-compare rule.
double dice_of_probability_plane(const float* prob, const BinaryMask& gt);

}  // namespace wseg
