#include "pime/objectives.hpp"

#include <cmath>
#include <stdexcept>

namespace pime {

using ad::Var;

PerturbMask draw_mask(std::size_t regions, double r, Rng& rng) {
    if (r < 0.0 || r >= 1.0) throw std::invalid_argument("draw_mask: need 0 <= r < 1");
    std::size_t k = static_cast<std::size_t>(std::floor(r * static_cast<double>(regions)));
    PerturbMask m;
    m.ratio = r;
    m.masked_regions = rng.sample_without_replacement(regions, k);
    return m;
}

BrainGraph apply_mask(const BrainGraph& graph, const std::vector<std::size_t>& masked_regions) {
    std::size_t C = graph.node_count();
    std::vector<bool> masked(C, false);
    for (std::size_t u : masked_regions) {
        if (u >= C) throw std::invalid_argument("apply_mask: region index out of range");
        masked[u] = true;
    }
    Tensor adj = graph.adjacency;
    for (std::size_t u = 0; u < C; ++u)
        for (std::size_t v = 0; v < C; ++v)
            if (masked[u] || masked[v]) adj.at(u, v) = 0.0;
    BrainGraph out;
    out.adjacency = adj;
    out.node_features = adj;
    out.label = graph.label;
    return out;
}

std::pair<BrainGraph, PerturbMask> perturb(const BrainGraph& graph, double r, Rng& rng) {
    PerturbMask m = draw_mask(graph.node_count(), r, rng);
    return {apply_mask(graph, m.masked_regions), m};
}

BrainGraph mask_to_subset(const BrainGraph& graph, const std::vector<std::size_t>& retained) {
    std::size_t C = graph.node_count();
    std::vector<bool> keep(C, false);
    for (std::size_t u : retained) {
        if (u >= C) throw std::invalid_argument("mask_to_subset: region index out of range");
        keep[u] = true;
    }
    std::vector<std::size_t> masked;
    for (std::size_t u = 0; u < C; ++u)
        if (!keep[u]) masked.push_back(u);
    return apply_mask(graph, masked);
}

namespace {

// KL(N(mu, diag exp(lv)) || N(0, I)) as a tape subgraph; mirrors
// numerics::kl_diag_gaussian term by term.
Var kl_taped(Var mu, Var lv) {
    std::size_t dim = mu.value().size();
    Var s = ad::sub(ad::add(ad::sq_norm(mu), ad::sum(ad::exp_op(lv))), ad::sum(lv));
    return ad::scale(ad::add_scalar(s, -static_cast<double>(dim)), 0.5);
}

Var kl_probs_taped(Var p, Var q) {
    // forward KL with a 1e-12 floor inside the logs
    Var lp = ad::log_op(ad::add_scalar(p, 1e-12));
    Var lq = ad::log_op(ad::add_scalar(q, 1e-12));
    return ad::dot(p, ad::sub(lp, lq));
}

std::size_t argmin_in(const Tensor& d, const ModelConfig& cfg, int label, bool own_class) {
    std::size_t best = d.size();
    double best_v = 0.0;
    for (std::size_t k = 0; k < d.size(); ++k) {
        bool own = cfg.proto_class(k) == label;
        if (own != own_class) continue;
        if (best == d.size() || d[k] < best_v) {
            best = k;
            best_v = d[k];
        }
    }
    return best;
}

}  // namespace

TapedLoss total_loss_taped(ad::Tape& tape, const TapedModel& model, const ModelConfig& cfg,
                           const BrainGraph& graph, const BrainGraph& graph_pert,
                           const LossWeights& w, const Tensor& noise) {
    int label = graph.label;
    if (label < 0 || label >= static_cast<int>(cfg.num_classes))
        throw std::invalid_argument("total_loss: label out of range");

    Forward clean = model.forward(graph, &noise);
    Forward pert = model.forward(graph_pert, &noise);  // same noise for both passes

    // cross-entropy
    Var ce = ad::scale(ad::log_op(ad::pick(clean.probs, static_cast<std::size_t>(label))), -1.0);

    // clustering / separation over prototype distances
    const Tensor& dvals = clean.distances.value();
    std::size_t own = argmin_in(dvals, cfg, label, true);
    Var cluster = ad::pick(clean.distances, own);
    Var separation;
    std::size_t other = argmin_in(dvals, cfg, label, false);
    if (other == dvals.size()) {
        separation = tape.leaf(Tensor::scalar(0.0));  // K = 1: vacuous minimum
    } else {
        Var neg_min = ad::scale(ad::pick(clean.distances, other), -1.0);
        separation = ad::relu(ad::add_scalar(neg_min, w.delta));
    }

    // IB term on the clean pass, averaged across posteriors
    Var ib = kl_taped(clean.mu[0], clean.log_var[0]);
    for (std::size_t k = 1; k < clean.mu.size(); ++k)
        ib = ad::add(ib, kl_taped(clean.mu[k], clean.log_var[k]));
    ib = ad::scale(ib, 1.0 / static_cast<double>(clean.mu.size()));

    // consistency between clean and perturbed predictions/activations
    Var consistency = ad::add(kl_probs_taped(clean.probs, pert.probs),
                              ad::sq_norm(ad::sub(clean.activations, pert.activations)));

    // attention sparsity and prototype diversity
    std::size_t M = cfg.num_prototypes();
    Var attention = model.param("attention");
    Var sparsity = ad::scale(ad::l1_norm(attention), 1.0 / static_cast<double>(M));
    Var protos = model.param("prototypes");
    Var div_sum = tape.leaf(Tensor::scalar(0.0));
    for (std::size_t i = 0; i < M; ++i)
        for (std::size_t j = 0; j < M; ++j) {
            if (i == j) continue;
            div_sum = ad::add(div_sum, ad::sq_norm(ad::sub(ad::row(protos, i), ad::row(protos, j))));
        }
    Var diversity = ad::scale(div_sum, 1.0 / static_cast<double>(M * (M - 1)));

    Var total = ce;
    total = ad::add(total, ad::scale(cluster, w.lambda1));
    total = ad::add(total, ad::scale(separation, w.lambda2));
    total = ad::add(total, ad::scale(ib, w.beta));
    total = ad::add(total, ad::scale(consistency, w.lambda_cons));
    total = ad::add(total, ad::scale(sparsity, w.lambda_sparse));
    total = ad::add(total, ad::scale(diversity, -w.lambda_div));

    TapedLoss out;
    out.parts.ce = ce.value().item();
    out.parts.cluster = cluster.value().item();
    out.parts.separation = separation.value().item();
    out.parts.ib = ib.value().item();
    out.parts.consistency = consistency.value().item();
    out.parts.sparsity = sparsity.value().item();
    out.parts.diversity = diversity.value().item();
    out.parts.total = total.value().item();
    out.total = total;
    out.terms = {{"ce", ce},           {"cluster", cluster},   {"separation", separation},
                 {"ib", ib},           {"consistency", consistency}, {"sparsity", sparsity},
                 {"diversity", diversity}};
    return out;
}

std::pair<LossBreakdown, ParamSet> loss_and_grads(const BrainGraph& graph, const ModelConfig& cfg,
                                                  const ParamSet& params, const LossWeights& w,
                                                  const Tensor& noise, Rng& perturb_rng) {
    auto [graph_pert, mask] = perturb(graph, w.perturb_ratio, perturb_rng);
    ad::Tape tape;
    TapedModel model(tape, cfg, params);
    TapedLoss loss = total_loss_taped(tape, model, cfg, graph, graph_pert, w, noise);
    tape.backward(loss.total);
    return {loss.parts, model.grads()};
}

double consistency_loss(const Tensor& probs, const Tensor& probs_pert, const Tensor& s,
                        const Tensor& s_pert) {
    if (!probs.same_shape(probs_pert) || !s.same_shape(s_pert))
        throw std::invalid_argument("consistency_loss: shape mismatch");
    double kl = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i)
        kl += probs[i] * (std::log(probs[i] + 1e-12) - std::log(probs_pert[i] + 1e-12));
    double sq = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        double diff = s[i] - s_pert[i];
        sq += diff * diff;
    }
    return kl + sq;
}

double sparsity_loss(const Tensor& attention) {
    double s = 0.0;
    for (std::size_t i = 0; i < attention.size(); ++i) s += std::abs(attention[i]);
    return s / static_cast<double>(attention.rows());
}

double diversity_loss(const Tensor& prototypes) {
    std::size_t M = prototypes.rows(), d = prototypes.cols();
    if (M < 2) return 0.0;
    double s = 0.0;
    for (std::size_t i = 0; i < M; ++i)
        for (std::size_t j = 0; j < M; ++j) {
            if (i == j) continue;
            for (std::size_t c = 0; c < d; ++c) {
                double diff = prototypes.at(i, c) - prototypes.at(j, c);
                s += diff * diff;
            }
        }
    return s / static_cast<double>(M * (M - 1));
}

}  // namespace pime
