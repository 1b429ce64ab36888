#pragma once

#include <map>
#include <string>
#include <vector>

#include "pime/model.hpp"

namespace pime {

struct Explanation {
    std::string subject_id;
    std::vector<std::size_t> retained_final;  // sorted
    std::size_t target_size = 0;
    std::size_t anchor_prototype = 0;
    int predicted_class = 0;
    double score_final = 0;
    std::vector<std::pair<std::size_t, double>> trajectory;  // (subset size, score)
    std::uint64_t seed = 0;
};

struct MctsOptions {
    std::size_t rollouts = 20;  // iterations per removal move
    double c_uct = 1.4142135623730951;
    double epsilon = 1e-6;  // score constant
};

// log((d+1)/(d+eps)) for the distance to the anchor prototype on the
// subset-masked graph.
double score_subset(const std::vector<std::size_t>& subset, const BrainGraph& graph,
                    const ModelConfig& cfg, const ParamSet& params, double epsilon = 1e-6);

// Pure score formula, exposed for tests.
double score_from_distance(double d, double epsilon = 1e-6);

// (predicted class, closest own-class prototype) on the full graph.
std::pair<int, std::size_t> anchor_prototype(const BrainGraph& graph, const ModelConfig& cfg,
                                             const ParamSet& params);

Explanation mcts_explain(const BrainGraph& graph, const ModelConfig& cfg, const ParamSet& params,
                         std::size_t target_size, const MctsOptions& opt, Rng& rng);

// Enumerates all C-choose-k subsets; guarded to C <= 16.
std::pair<std::vector<std::size_t>, double> exhaustive_oracle(const BrainGraph& graph,
                                                              const ModelConfig& cfg,
                                                              const ParamSet& params,
                                                              std::size_t k,
                                                              double epsilon = 1e-6);

struct Stability {
    double jaccard = 0;
    double dice = 0;
};
Stability stability(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b);

// round(C * 10 / 116), at least 4
std::size_t default_target_size(std::size_t regions);

struct DatasetExplanations {
    std::vector<Explanation> per_subject;
    // (region, count) sorted by descending count, then ascending region
    std::vector<std::pair<std::size_t, std::size_t>> frequency;
};

DatasetExplanations explain_dataset(const Dataset& ds, const ModelConfig& cfg,
                                    const ParamSet& params, double keep_ratio,
                                    std::size_t target_size, const MctsOptions& opt,
                                    std::uint64_t seed);

void save_explanation_json(const Explanation& e, const std::string& path);
void save_frequency_csv(const std::vector<std::pair<std::size_t, std::size_t>>& freq,
                        const std::string& path);

}  // namespace pime
