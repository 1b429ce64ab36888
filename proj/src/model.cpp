#include "pime/model.hpp"

#include <cmath>
#include <stdexcept>

namespace pime {

using ad::Var;

namespace {

Tensor glorot(std::size_t in, std::size_t out, Rng& rng) {
    double s = std::sqrt(6.0 / static_cast<double>(in + out));
    Tensor w({in, out});
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = (2.0 * rng.uniform() - 1.0) * s;
    return w;
}

}  // namespace

ParamSet init_params(const ModelConfig& cfg, Rng& rng) {
    if (cfg.regions < 2) throw std::invalid_argument("init_params: config.regions unset");
    ParamSet p;
    std::size_t in = cfg.regions;
    for (std::size_t l = 0; l < cfg.gin_widths.size(); ++l) {
        std::size_t out = cfg.gin_widths[l];
        std::string pre = "gin" + std::to_string(l) + ".";
        p.add(pre + "W1", glorot(in, out, rng));
        p.add(pre + "b1", Tensor({out}));
        p.add(pre + "W2", glorot(out, out, rng));
        p.add(pre + "b2", Tensor({out}));
        in = out;
    }
    std::size_t h = cfg.gin_widths.back();
    std::size_t d = cfg.latent_d;
    p.add("mu.W", glorot(h, d, rng));
    p.add("mu.b", Tensor({d}));
    p.add("logvar.W", glorot(h, d, rng));
    p.add("logvar.b", Tensor({d}));
    std::size_t M = cfg.num_prototypes();
    Tensor protos({M, d});
    for (std::size_t i = 0; i < protos.size(); ++i) protos[i] = 0.1 * rng.normal();
    p.add("prototypes", protos);
    p.add("attention", Tensor({M, cfg.regions}));  // zeros -> uniform softmax
    p.add("head.W", glorot(M, cfg.num_classes, rng));
    p.add("head.b", Tensor({cfg.num_classes}));
    return p;
}

TapedModel::TapedModel(ad::Tape& tape, const ModelConfig& cfg, const ParamSet& params)
    : tape_(tape), cfg_(cfg) {
    for (const auto& e : params) {
        names_.push_back(e.name);
        leaves_.push_back(tape_.leaf(e.tensor));
    }
}

Var TapedModel::param(const std::string& name) const {
    for (std::size_t i = 0; i < names_.size(); ++i)
        if (names_[i] == name) return leaves_[i];
    throw std::invalid_argument("TapedModel: no parameter named " + name);
}

ParamSet TapedModel::grads() const {
    ParamSet g;
    for (std::size_t i = 0; i < names_.size(); ++i)
        g.add(names_[i], tape_.grad(leaves_[i].id));
    return g;
}

Forward TapedModel::forward(const BrainGraph& graph, const Tensor* noise) const {
    if (graph.node_count() != cfg_.regions)
        throw std::invalid_argument("forward: graph has " + std::to_string(graph.node_count()) +
                                    " nodes, config expects " + std::to_string(cfg_.regions));
    Var A = tape_.leaf(graph.adjacency);
    Var H = tape_.leaf(graph.node_features);
    for (std::size_t l = 0; l < cfg_.gin_widths.size(); ++l) {
        std::string pre = "gin" + std::to_string(l) + ".";
        // h'_u = MLP(h_u + sum_v A_uv h_v), weighted aggregation with eps = 0
        Var agg = ad::add(H, ad::matmul(A, H));
        Var hidden = ad::relu(ad::add_rowvec(ad::matmul(agg, param(pre + "W1")), param(pre + "b1")));
        H = ad::add_rowvec(ad::matmul(hidden, param(pre + "W2")), param(pre + "b2"));
    }

    std::size_t M = cfg_.num_prototypes();
    Var muW = param("mu.W"), mub = param("mu.b");
    Var lvW = param("logvar.W"), lvb = param("logvar.b");
    Var attention = param("attention");
    Var protos = param("prototypes");

    auto posterior = [&](Var pooled) {
        Var mu = ad::add(ad::vecmat(pooled, muW), mub);
        Var lv = ad::add(ad::vecmat(pooled, lvW), lvb);
        return std::pair<Var, Var>(mu, lv);
    };
    auto sample = [&](Var mu, Var lv) {
        if (!noise) return mu;
        Var sigma = ad::exp_op(ad::scale(lv, 0.5));
        return ad::add(mu, ad::mul_const(sigma, *noise));
    };

    Forward f;
    std::vector<Var> dists;
    if (cfg_.shared_readout) {
        // single-z variant: uniform mean pooling, one posterior for all d_k
        Tensor uni({cfg_.regions});
        for (std::size_t i = 0; i < uni.size(); ++i) uni[i] = 1.0 / static_cast<double>(cfg_.regions);
        Var pooled = ad::vecmat(tape_.leaf(uni), H);
        auto [mu, lv] = posterior(pooled);
        Var z = sample(mu, lv);
        f.mu.push_back(mu);
        f.log_var.push_back(lv);
        for (std::size_t k = 0; k < M; ++k)
            dists.push_back(ad::sq_norm(ad::sub(z, ad::row(protos, k))));
    } else {
        for (std::size_t k = 0; k < M; ++k) {
            Var w = ad::softmax_vec(ad::row(attention, k));
            Var pooled = ad::vecmat(w, H);
            auto [mu, lv] = posterior(pooled);
            Var z = sample(mu, lv);
            f.mu.push_back(mu);
            f.log_var.push_back(lv);
            dists.push_back(ad::sq_norm(ad::sub(z, ad::row(protos, k))));
        }
    }
    f.distances = ad::concat(dists);
    f.activations = ad::softmax_vec(ad::scale(f.distances, -1.0));
    Var logits = ad::add(ad::vecmat(f.activations, param("head.W")), param("head.b"));
    f.probs = ad::softmax_vec(logits);
    return f;
}

Tensor predict_probs(const BrainGraph& graph, const ModelConfig& cfg, const ParamSet& params) {
    ad::Tape tape;
    TapedModel m(tape, cfg, params);
    return m.forward(graph, nullptr).probs.value();
}

Tensor inference_distances(const BrainGraph& graph, const ModelConfig& cfg, const ParamSet& params) {
    ad::Tape tape;
    TapedModel m(tape, cfg, params);
    return m.forward(graph, nullptr).distances.value();
}

Tensor activations_from_distances(const Tensor& d) {
    ad::Tape tape;
    Var dv = tape.leaf(d);
    return ad::softmax_vec(ad::scale(dv, -1.0)).value();
}

}  // namespace pime
