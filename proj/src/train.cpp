#include "bump/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "bump/errors.hpp"
#include "bump/rng.hpp"

namespace bump::tensornet {

namespace {

std::size_t sample_floats(const Dataset& set) {
    if (set.inputs.rank() < 2)
        throw std::invalid_argument("dataset inputs need a leading sample dimension");
    return set.inputs.size() / set.inputs.dim(0);
}

void check_dataset(const Dataset& set, const char* which) {
    if (set.size() == 0)
        throw std::invalid_argument(std::string(which) + " set is empty");
    if (set.inputs.dim(0) != set.size())
        throw std::invalid_argument(std::string(which) +
                                    " set labels do not match its inputs");
}

void check_config(const TrainConfig& cfg, const Model& model) {
    if (!(cfg.initial_lr > 0) || !std::isfinite(cfg.initial_lr))
        throw std::invalid_argument("learning rate must be positive");
    if (!(cfg.decay_factor > 0) || cfg.decay_factor > 1)
        throw std::invalid_argument("decay factor must be in (0, 1]");
    if (cfg.batch_size == 0) throw std::invalid_argument("batch size must be positive");
    if (cfg.freeze_prefix > model.spec.layers.size())
        throw std::invalid_argument("freeze prefix exceeds the layer count");
}

}  // namespace

std::pair<Dataset, Dataset> holdout_split(const Dataset& all, double fraction) {
    check_dataset(all, "input");
    if (!(fraction > 0) || !(fraction < 1))
        throw std::invalid_argument("holdout fraction must be in (0, 1)");
    const std::size_t n = all.size();
    if (n < 2) throw std::invalid_argument("need at least two samples to split");
    auto n_val = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
    n_val = std::clamp<std::size_t>(n_val, 1, n - 1);
    const std::size_t n_train = n - n_val;
    const std::size_t sample = sample_floats(all);

    const auto slice = [&](std::size_t from, std::size_t count) {
        std::vector<std::size_t> shape = all.inputs.shape();
        shape[0] = count;
        Dataset out;
        out.inputs = Tensor(shape, std::vector<double>(
                                       all.inputs.data() + from * sample,
                                       all.inputs.data() + (from + count) * sample));
        out.labels.assign(all.labels.begin() + static_cast<std::ptrdiff_t>(from),
                          all.labels.begin() + static_cast<std::ptrdiff_t>(from + count));
        return out;
    };
    return {slice(0, n_train), slice(n_train, n_val)};
}

double lr_at_epoch(const TrainConfig& cfg, std::size_t epoch_index) {
    std::size_t every = cfg.decay_every;
    if (every == 0) every = std::max<std::size_t>(1, cfg.epochs / 3);
    const auto steps = static_cast<double>(epoch_index / every);
    return cfg.initial_lr * std::pow(cfg.decay_factor, steps);
}

double accuracy_on(const Model& model, const Dataset& set) {
    check_dataset(set, "evaluation");
    const auto preds = predict_chunked(model, set.inputs);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < preds.size(); ++i)
        if (preds[i].cls == set.labels[i]) ++correct;
    return static_cast<double>(correct) / static_cast<double>(preds.size());
}

History train(Model& model, const Dataset& train_set, const Dataset& val_set,
              const TrainConfig& cfg,
              const std::function<void(const EpochStats&)>& on_epoch) {
    check_config(cfg, model);
    History history;
    if (cfg.epochs == 0) return history;
    check_dataset(train_set, "training");
    check_dataset(val_set, "validation");

    const std::size_t n = train_set.size();
    const std::size_t sample = sample_floats(train_set);
    std::vector<std::size_t> sample_shape(train_set.inputs.shape().begin() + 1,
                                          train_set.inputs.shape().end());

    std::vector<std::size_t> order(n);
    Gradients grads;
    Tensor probs;

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double lr = lr_at_epoch(cfg, epoch);
        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng shuffle_rng(mix_seed(cfg.seed, seed_domain::epoch, epoch));
        shuffle_rng.shuffle(order);

        double loss_sum = 0;
        std::size_t correct = 0;
        for (std::size_t at = 0; at < n; at += cfg.batch_size) {
            const std::size_t take = std::min(cfg.batch_size, n - at);
            std::vector<std::size_t> shape{take};
            shape.insert(shape.end(), sample_shape.begin(), sample_shape.end());
            Tensor batch(shape);
            std::vector<int> labels(take);
            for (std::size_t i = 0; i < take; ++i) {
                const std::size_t src = order[at + i];
                std::memcpy(batch.values().data() + i * sample,
                            train_set.inputs.data() + src * sample,
                            sample * sizeof(double));
                labels[i] = train_set.labels[src];
            }

            const double loss = loss_and_grads(model, batch, labels, grads, &probs);
            if (!std::isfinite(loss))
                throw numeric_error("loss diverged at epoch " +
                                    std::to_string(epoch + 1));
            loss_sum += loss * static_cast<double>(take);

            const std::size_t k = probs.dim(1);
            for (std::size_t i = 0; i < take; ++i) {
                const double* row = probs.data() + i * k;
                std::size_t arg = 0;
                for (std::size_t j = 1; j < k; ++j)
                    if (row[j] > row[arg]) arg = j;
                if (static_cast<int>(arg) == labels[i]) ++correct;
            }

            for (std::size_t li = cfg.freeze_prefix; li < model.params.size(); ++li) {
                if (model.params[li].empty()) continue;
                double* w = model.params[li].w.values().data();
                const double* gw = grads.layers[li].w.data();
                const std::size_t nw = model.params[li].w.size();
                for (std::size_t p = 0; p < nw; ++p) w[p] -= lr * gw[p];
                double* b = model.params[li].b.values().data();
                const double* gb = grads.layers[li].b.data();
                const std::size_t nb = model.params[li].b.size();
                for (std::size_t p = 0; p < nb; ++p) b[p] -= lr * gb[p];
            }
        }

        model.epoch += 1;
        EpochStats row;
        row.epoch = epoch + 1;
        row.lr = lr;
        row.train_loss = loss_sum / static_cast<double>(n);
        row.train_acc = static_cast<double>(correct) / static_cast<double>(n);
        row.val_acc = accuracy_on(model, val_set);
        if (on_epoch) on_epoch(row);
        history.push_back(row);
    }
    return history;
}

Model fine_tune(const Model& src, std::size_t keep_prefix,
                const std::vector<LayerSpec>& new_tail, const Dataset& train_set,
                const Dataset& val_set, const TrainConfig& cfg, bool freeze_prefix,
                History* history) {
    if (keep_prefix > src.spec.layers.size())
        throw std::invalid_argument("keep prefix exceeds the source layer count");

    NetworkSpec spec;
    spec.input_shape = src.spec.input_shape;
    spec.layers.assign(src.spec.layers.begin(),
                       src.spec.layers.begin() + static_cast<std::ptrdiff_t>(keep_prefix));
    spec.layers.insert(spec.layers.end(), new_tail.begin(), new_tail.end());
    chain_shapes(spec);

    Model model = init(spec, mix_seed(cfg.seed, seed_domain::init, 0));
    for (std::size_t i = 0; i < keep_prefix; ++i) model.params[i] = src.params[i];
    model.encoding = src.encoding;

    TrainConfig run = cfg;
    run.freeze_prefix = freeze_prefix ? keep_prefix : 0;
    History h = train(model, train_set, val_set, run);
    if (history) *history = std::move(h);
    return model;
}

void write_history_csv(const History& history, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw io_error("cannot open " + path.string() + " for writing");
    out << "epoch,lr,train_loss,train_acc,val_acc\n";
    char line[256];
    for (const auto& row : history) {
        std::snprintf(line, sizeof(line), "%zu,%.9g,%.9g,%.9g,%.9g\n", row.epoch, row.lr,
                      row.train_loss, row.train_acc, row.val_acc);
        out << line;
    }
    if (!out) throw io_error("short write to " + path.string());
}

}  // namespace bump::tensornet
