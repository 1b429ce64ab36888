#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pime/objectives.hpp"

namespace pime {

struct TrainConfig {
    std::size_t epochs = 200;
    std::size_t batch_size = 32;
    double lr = 1e-3;
    double lr_decay = 0.5;
    std::size_t lr_decay_every = 50;
    double weight_decay = 0.03;
    double r = 0.25;  // perturbation ratio
    double beta = 0.001;
    double lambda1 = 0.1;
    double lambda2 = 0.1;
    double lambda_cons = 0.1;
    double lambda_sparse = 0.01;
    double lambda_div = 0.01;
    double delta = 1.0;
    std::size_t protos_per_class = 7;
    std::size_t latent_d = 64;
    std::vector<std::size_t> gin_widths = {128, 256, 512};
    double keep_ratio = 0.3;
    std::uint64_t seed = 0;
    std::size_t folds = 5;
    bool shared_readout = false;

    LossWeights weights() const {
        LossWeights w;
        w.beta = beta;
        w.lambda1 = lambda1;
        w.lambda2 = lambda2;
        w.lambda_cons = lambda_cons;
        w.lambda_sparse = lambda_sparse;
        w.lambda_div = lambda_div;
        w.delta = delta;
        w.perturb_ratio = r;
        return w;
    }

    ModelConfig model_config(std::size_t regions, std::size_t num_classes) const {
        ModelConfig m;
        m.regions = regions;
        m.num_classes = num_classes;
        m.latent_d = latent_d;
        m.protos_per_class = protos_per_class;
        m.gin_widths = gin_widths;
        m.shared_readout = shared_readout;
        return m;
    }

    // Desk-scale widths (16/32/64, d = 8).
    void apply_tiny_preset() {
        gin_widths = {16, 32, 64};
        latent_d = 8;
    }

    // Effective lr during (0-based) epoch e.
    double lr_at(std::size_t epoch) const {
        double f = 1.0;
        for (std::size_t i = 0; i < epoch / lr_decay_every; ++i) f *= lr_decay;
        return lr * f;
    }
};

struct TrainHistory {
    struct Row {
        std::size_t epoch = 0;
        double lr = 0;
        LossBreakdown mean_loss;
        double train_acc = 0;
        double val_acc = -1;  // -1 when no validation split
    };
    std::vector<Row> rows;
};

struct Checkpoint {
    ModelConfig model_cfg;
    TrainConfig train_cfg;
    ParamSet params;
    AdamState adam;
    std::size_t epoch = 0;
    std::string shuffle_rng;
    std::string noise_rng;
    std::string perturb_rng;
};

struct EvalResult {
    double accuracy = 0;
    std::vector<double> per_class_accuracy;
    std::vector<std::size_t> per_class_count;
};

EvalResult evaluate(const ModelConfig& cfg, const ParamSet& params,
                    const std::vector<BrainGraph>& graphs);

// Stratified k-fold split. Same seed gives the same split.
struct FoldSplit {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};
std::vector<FoldSplit> kfold_split(const std::vector<int>& labels, std::size_t folds,
                                   std::uint64_t seed);

// Incremental trainer so mid-run checkpoints can resume bit-exactly.
class Trainer {
public:
    Trainer(ModelConfig model_cfg, TrainConfig cfg);
    explicit Trainer(Checkpoint ckpt);

    // Trains epochs [current, until). Appends one history row per epoch.
    void run_epochs(const std::vector<BrainGraph>& train_graphs, std::size_t until_epoch,
                    const std::vector<BrainGraph>* val_graphs, TrainHistory& history);

    Checkpoint checkpoint() const;
    const ParamSet& params() const { return params_; }
    const ModelConfig& model_config() const { return model_cfg_; }
    std::size_t epoch() const { return epoch_; }

private:
    ModelConfig model_cfg_;
    TrainConfig cfg_;
    ParamSet params_;
    AdamState adam_;
    std::size_t epoch_ = 0;
    Rng shuffle_rng_;
    Rng noise_rng_;
    Rng perturb_rng_;
};

struct TrainResult {
    ModelConfig model_cfg;
    ParamSet params;
    TrainHistory history;
};

// Builds graphs from recordings (keep_ratio from config) and trains for
// cfg.epochs. Optional index subsets select train/validation rows.
TrainResult train(const Dataset& ds, const TrainConfig& cfg,
                  const std::vector<std::size_t>* train_idx = nullptr,
                  const std::vector<std::size_t>* val_idx = nullptr);

std::vector<BrainGraph> dataset_to_graphs(const Dataset& ds, double keep_ratio);

}  // namespace pime
