#include "pime/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace pime {

std::vector<BrainGraph> dataset_to_graphs(const Dataset& ds, double keep_ratio) {
    std::vector<BrainGraph> graphs;
    graphs.reserve(ds.recordings.size());
    for (const auto& rec : ds.recordings) graphs.push_back(recording_to_graph(rec, keep_ratio));
    return graphs;
}

EvalResult evaluate(const ModelConfig& cfg, const ParamSet& params,
                    const std::vector<BrainGraph>& graphs) {
    EvalResult res;
    res.per_class_accuracy.assign(cfg.num_classes, 0.0);
    res.per_class_count.assign(cfg.num_classes, 0);
    std::size_t correct = 0;
    for (const auto& g : graphs) {
        Tensor probs = predict_probs(g, cfg, params);
        std::size_t pred = 0;
        for (std::size_t k = 1; k < probs.size(); ++k)
            if (probs[k] > probs[pred]) pred = k;  // ties -> lowest index
        res.per_class_count[g.label] += 1;
        if (static_cast<int>(pred) == g.label) {
            ++correct;
            res.per_class_accuracy[g.label] += 1.0;
        }
    }
    for (std::size_t k = 0; k < cfg.num_classes; ++k)
        if (res.per_class_count[k]) res.per_class_accuracy[k] /= res.per_class_count[k];
    res.accuracy = graphs.empty() ? 0.0 : static_cast<double>(correct) / graphs.size();
    return res;
}

std::vector<FoldSplit> kfold_split(const std::vector<int>& labels, std::size_t folds,
                                   std::uint64_t seed) {
    if (folds < 2) throw std::invalid_argument("kfold_split: folds must be >= 2");
    if (folds > labels.size()) throw std::invalid_argument("kfold_split: folds exceed dataset size");
    int K = 0;
    for (int l : labels) K = std::max(K, l + 1);
    std::vector<std::vector<std::size_t>> by_class(K);
    for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
    Rng rng(seed);
    std::vector<std::vector<std::size_t>> test_sets(folds);
    for (int c = 0; c < K; ++c) {
        auto& idx = by_class[c];
        if (idx.size() < folds)
            throw std::invalid_argument("kfold_split: class " + std::to_string(c) + " has " +
                                        std::to_string(idx.size()) + " members, fewer than " +
                                        std::to_string(folds) + " folds");
        rng.shuffle(idx);
        for (std::size_t i = 0; i < idx.size(); ++i) test_sets[i % folds].push_back(idx[i]);
    }
    std::vector<FoldSplit> out(folds);
    for (std::size_t f = 0; f < folds; ++f) {
        std::sort(test_sets[f].begin(), test_sets[f].end());
        out[f].test = test_sets[f];
        std::vector<bool> in_test(labels.size(), false);
        for (std::size_t i : test_sets[f]) in_test[i] = true;
        for (std::size_t i = 0; i < labels.size(); ++i)
            if (!in_test[i]) out[f].train.push_back(i);
    }
    return out;
}

Trainer::Trainer(ModelConfig model_cfg, TrainConfig cfg)
    : model_cfg_(model_cfg), cfg_(cfg) {
    Rng root(cfg_.seed);
    Rng init_rng = root.fork(1);
    shuffle_rng_ = root.fork(2);
    noise_rng_ = root.fork(3);
    perturb_rng_ = root.fork(4);
    params_ = init_params(model_cfg_, init_rng);
    adam_ = AdamState::init(params_, cfg_.lr, cfg_.weight_decay);
}

Trainer::Trainer(Checkpoint ckpt)
    : model_cfg_(ckpt.model_cfg),
      cfg_(ckpt.train_cfg),
      params_(std::move(ckpt.params)),
      adam_(std::move(ckpt.adam)),
      epoch_(ckpt.epoch),
      shuffle_rng_(Rng::deserialize(ckpt.shuffle_rng)),
      noise_rng_(Rng::deserialize(ckpt.noise_rng)),
      perturb_rng_(Rng::deserialize(ckpt.perturb_rng)) {}

Checkpoint Trainer::checkpoint() const {
    Checkpoint c;
    c.model_cfg = model_cfg_;
    c.train_cfg = cfg_;
    c.params = params_;
    c.adam = adam_;
    c.epoch = epoch_;
    c.shuffle_rng = shuffle_rng_.serialize();
    c.noise_rng = noise_rng_.serialize();
    c.perturb_rng = perturb_rng_.serialize();
    return c;
}

void Trainer::run_epochs(const std::vector<BrainGraph>& train_graphs, std::size_t until_epoch,
                         const std::vector<BrainGraph>* val_graphs, TrainHistory& history) {
    if (train_graphs.empty()) throw std::invalid_argument("train: empty dataset");
    LossWeights w = cfg_.weights();
    std::size_t n = train_graphs.size();
    for (; epoch_ < until_epoch; ++epoch_) {
        adam_.lr = cfg_.lr_at(epoch_);
        std::vector<std::size_t> order(n);
        for (std::size_t i = 0; i < n; ++i) order[i] = i;
        shuffle_rng_.shuffle(order);
        LossBreakdown epoch_sum;
        std::size_t steps = 0;
        for (std::size_t start = 0; start < n; start += cfg_.batch_size) {
            std::size_t end = std::min(n, start + cfg_.batch_size);
            ParamSet grad_sum = params_.zeros_like();
            LossBreakdown batch_sum;
            for (std::size_t b = start; b < end; ++b) {
                const BrainGraph& g = train_graphs[order[b]];
                Tensor noise({model_cfg_.latent_d});
                for (std::size_t i = 0; i < noise.size(); ++i) noise[i] = noise_rng_.normal();
                LossBreakdown parts;
                ParamSet grads;
                try {
                    std::tie(parts, grads) =
                        loss_and_grads(g, model_cfg_, params_, w, noise, perturb_rng_);
                } catch (const NumericalError& e) {
                    throw NumericalError("epoch " + std::to_string(epoch_) + ", batch item " +
                                         std::to_string(order[b]) + ": " + e.what());
                }
                for (std::size_t p = 0; p < grad_sum.count(); ++p)
                    for (std::size_t i = 0; i < grad_sum[p].tensor.size(); ++i)
                        grad_sum[p].tensor[i] += grads[p].tensor[i];
                batch_sum.ce += parts.ce;
                batch_sum.cluster += parts.cluster;
                batch_sum.separation += parts.separation;
                batch_sum.ib += parts.ib;
                batch_sum.consistency += parts.consistency;
                batch_sum.sparsity += parts.sparsity;
                batch_sum.diversity += parts.diversity;
                batch_sum.total += parts.total;
            }
            double inv = 1.0 / static_cast<double>(end - start);
            for (std::size_t p = 0; p < grad_sum.count(); ++p)
                for (std::size_t i = 0; i < grad_sum[p].tensor.size(); ++i)
                    grad_sum[p].tensor[i] *= inv;
            adam_step(params_, grad_sum, adam_);
            epoch_sum.ce += batch_sum.ce;
            epoch_sum.cluster += batch_sum.cluster;
            epoch_sum.separation += batch_sum.separation;
            epoch_sum.ib += batch_sum.ib;
            epoch_sum.consistency += batch_sum.consistency;
            epoch_sum.sparsity += batch_sum.sparsity;
            epoch_sum.diversity += batch_sum.diversity;
            epoch_sum.total += batch_sum.total;
            ++steps;
            (void)steps;
        }
        TrainHistory::Row row;
        row.epoch = epoch_;
        row.lr = adam_.lr;
        double inv_n = 1.0 / static_cast<double>(n);
        row.mean_loss.ce = epoch_sum.ce * inv_n;
        row.mean_loss.cluster = epoch_sum.cluster * inv_n;
        row.mean_loss.separation = epoch_sum.separation * inv_n;
        row.mean_loss.ib = epoch_sum.ib * inv_n;
        row.mean_loss.consistency = epoch_sum.consistency * inv_n;
        row.mean_loss.sparsity = epoch_sum.sparsity * inv_n;
        row.mean_loss.diversity = epoch_sum.diversity * inv_n;
        row.mean_loss.total = epoch_sum.total * inv_n;
        row.train_acc = evaluate(model_cfg_, params_, train_graphs).accuracy;
        row.val_acc = val_graphs ? evaluate(model_cfg_, params_, *val_graphs).accuracy : -1.0;
        history.rows.push_back(row);
    }
}

TrainResult train(const Dataset& ds, const TrainConfig& cfg,
                  const std::vector<std::size_t>* train_idx,
                  const std::vector<std::size_t>* val_idx) {
    if (ds.recordings.empty()) throw std::invalid_argument("train: empty dataset");
    std::vector<BrainGraph> graphs = dataset_to_graphs(ds, cfg.keep_ratio);
    std::size_t C = graphs[0].node_count();
    for (const auto& g : graphs)
        if (g.node_count() != C) throw std::invalid_argument("train: graphs differ in node count");
    ModelConfig mcfg = cfg.model_config(C, ds.num_classes);

    std::vector<BrainGraph> train_graphs;
    if (train_idx) {
        for (std::size_t i : *train_idx) train_graphs.push_back(graphs[i]);
    } else {
        train_graphs = graphs;
    }
    std::vector<BrainGraph> val_graphs;
    if (val_idx)
        for (std::size_t i : *val_idx) val_graphs.push_back(graphs[i]);

    Trainer trainer(mcfg, cfg);
    TrainResult res;
    res.history = TrainHistory{};
    trainer.run_epochs(train_graphs, cfg.epochs, val_idx ? &val_graphs : nullptr, res.history);
    res.model_cfg = mcfg;
    res.params = trainer.params();
    return res;
}

}  // namespace pime
