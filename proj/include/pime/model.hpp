#pragma once

#include <string>
#include <vector>

#include "pime/autodiff.hpp"
#include "pime/connectome.hpp"
#include "pime/numerics.hpp"
#include "pime/rng.hpp"

namespace pime {

struct ModelConfig {
    std::size_t regions = 0;  // C, fixed per dataset
    std::size_t num_classes = 2;
    std::size_t latent_d = 64;
    std::size_t protos_per_class = 7;
    std::vector<std::size_t> gin_widths = {128, 256, 512};
    bool shared_readout = false;

    std::size_t num_prototypes() const { return protos_per_class * num_classes; }
    int proto_class(std::size_t k) const { return static_cast<int>(k / protos_per_class); }

    // Desk-scale widths for tests and synthetic runs.
    static ModelConfig tiny(std::size_t regions, std::size_t num_classes = 2) {
        ModelConfig c;
        c.regions = regions;
        c.num_classes = num_classes;
        c.latent_d = 8;
        c.gin_widths = {16, 32, 64};
        return c;
    }
};

ParamSet init_params(const ModelConfig& cfg, Rng& rng);

// One full forward pass recorded on a tape.
struct Forward {
    ad::Var distances;  // M
    ad::Var activations;  // M, softmax over negative distances
    ad::Var probs;  // K
    std::vector<ad::Var> mu;       // posterior means feeding the IB term
    std::vector<ad::Var> log_var;  // matching log-variances
};

// Binds a ParamSet onto a tape as leaves so gradients can be read back in
// parameter order after backward().
class TapedModel {
public:
    TapedModel(ad::Tape& tape, const ModelConfig& cfg, const ParamSet& params);

    // noise == nullptr selects inference mode (z = mu).
    Forward forward(const BrainGraph& graph, const Tensor* noise) const;

    // Gradients of the bound leaves, shaped like the original ParamSet.
    ParamSet grads() const;

    ad::Var param(const std::string& name) const;

private:
    ad::Tape& tape_;
    const ModelConfig& cfg_;
    std::vector<std::string> names_;
    std::vector<ad::Var> leaves_;
};

// Plain inference helpers (no gradient use).
Tensor predict_probs(const BrainGraph& graph, const ModelConfig& cfg, const ParamSet& params);
Tensor inference_distances(const BrainGraph& graph, const ModelConfig& cfg, const ParamSet& params);

// Softmax over negative distances, max-subtracted.
Tensor activations_from_distances(const Tensor& d);

}  // namespace pime
