#pragma once

#include "pime/model.hpp"

namespace pime {

struct LossWeights {
    double beta = 0.001;
    double lambda1 = 0.1;
    double lambda2 = 0.1;
    double lambda_cons = 0.1;
    double lambda_sparse = 0.01;
    double lambda_div = 0.01;
    double delta = 1.0;
    double perturb_ratio = 0.25;
};

struct LossBreakdown {
    double ce = 0;
    double cluster = 0;
    double separation = 0;
    double ib = 0;
    double consistency = 0;
    double sparsity = 0;
    double diversity = 0;
    double total = 0;

    double recombine(const LossWeights& w) const {
        return ce + w.lambda1 * cluster + w.lambda2 * separation + w.beta * ib +
               w.lambda_cons * consistency + w.lambda_sparse * sparsity -
               w.lambda_div * diversity;
    }
};

struct PerturbMask {
    std::vector<std::size_t> masked_regions;
    double ratio = 0.0;
};

// Draws floor(r*C) regions without replacement and zeroes all incident
// edges; node features are recomputed from the perturbed adjacency.
PerturbMask draw_mask(std::size_t regions, double r, Rng& rng);
BrainGraph apply_mask(const BrainGraph& graph, const std::vector<std::size_t>& masked_regions);
std::pair<BrainGraph, PerturbMask> perturb(const BrainGraph& graph, double r, Rng& rng);

// Masks everything outside `retained` (explainer masking semantics).
BrainGraph mask_to_subset(const BrainGraph& graph, const std::vector<std::size_t>& retained);

// Total objective on one graph, recorded on `tape` so the caller can run
// backward on `total`. All parts are computed unweighted; weights enter
// only the total.
struct TapedLoss {
    LossBreakdown parts;
    ad::Var total;
    // unweighted term nodes in a fixed order (ce, cluster, separation, ib,
    // consistency, sparsity, diversity); used by the gradient checker
    std::vector<std::pair<std::string, ad::Var>> terms;
};

TapedLoss total_loss_taped(ad::Tape& tape, const TapedModel& model, const ModelConfig& cfg,
                           const BrainGraph& graph, const BrainGraph& graph_pert,
                           const LossWeights& w, const Tensor& noise);

// Convenience wrapper: draws the perturbation mask from rng, evaluates loss
// and gradients in one shot.
std::pair<LossBreakdown, ParamSet> loss_and_grads(const BrainGraph& graph, const ModelConfig& cfg,
                                                  const ParamSet& params, const LossWeights& w,
                                                  const Tensor& noise, Rng& perturb_rng);

// Scalar-only term evaluations used by unit tests and the CLI report.
double consistency_loss(const Tensor& probs, const Tensor& probs_pert, const Tensor& s,
                        const Tensor& s_pert);
double sparsity_loss(const Tensor& attention);
double diversity_loss(const Tensor& prototypes);

}  // namespace pime
