#pragma once

// SGD training loop with step learning-rate decay, epoch shuffling and
// per-epoch history, plus warm-started fine-tuning (keep a trained prefix,
// reinitialize the tail, optionally freeze the prefix).

#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

#include "bump/network.hpp"
#include "bump/tensor.hpp"

namespace bump::tensornet {

struct Dataset {
    Tensor inputs;            // {N, ...sample shape}
    std::vector<int> labels;  // class indices, one per sample
    std::size_t size() const { return labels.size(); }
};

// Split off the last `fraction` of the samples as validation (order is
// preserved; shuffle upstream if the set is sorted).
std::pair<Dataset, Dataset> holdout_split(const Dataset& all, double fraction);

struct TrainConfig {
    double initial_lr = 0.01;
    double decay_factor = 0.1;
    std::size_t decay_every = 0;  // epochs between decays; 0 = max(1, epochs/3)
    std::size_t batch_size = 16;
    std::size_t epochs = 30;
    std::uint64_t seed = 0;
    std::size_t freeze_prefix = 0;  // leading layers excluded from updates
};

struct EpochStats {
    std::size_t epoch = 0;  // 1-based
    double lr = 0;
    double train_loss = 0;
    double train_acc = 0;
    double val_acc = 0;
};
using History = std::vector<EpochStats>;

// lr for a 0-based epoch index under step decay.
double lr_at_epoch(const TrainConfig& cfg, std::size_t epoch_index);

// Trains in place, one history row per epoch. Shuffles sample order each
// epoch from a seed derived from (cfg.seed, epoch), updates every
// non-frozen parameter after each minibatch, throws numeric_error if the
// loss stops being finite. on_epoch, if set, sees each row as it lands.
History train(Model& model, const Dataset& train_set, const Dataset& val_set,
              const TrainConfig& cfg,
              const std::function<void(const EpochStats&)>& on_epoch = {});

double accuracy_on(const Model& model, const Dataset& set);

// New model sharing the first keep_prefix layers (parameters copied
// bit-exactly), with new_tail appended and freshly initialized. Trains for
// cfg.epochs epochs (0 = just assemble); freeze_prefix locks the copied
// layers.
Model fine_tune(const Model& src, std::size_t keep_prefix,
                const std::vector<LayerSpec>& new_tail, const Dataset& train_set,
                const Dataset& val_set, const TrainConfig& cfg, bool freeze_prefix,
                History* history = nullptr);

// Header "epoch,lr,train_loss,train_acc,val_acc".
void write_history_csv(const History& history, const std::filesystem::path& path);

}  // namespace bump::tensornet
