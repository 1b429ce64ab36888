#pragma once

#include <string>
#include <vector>

#include "pime/objectives.hpp"

namespace pime {

struct GradCheckReport {
    struct TermResult {
        std::string term;
        double max_rel_err = 0;
        std::size_t coords_checked = 0;
        bool pass = false;
    };
    std::vector<TermResult> terms;
    bool all_pass = false;
};

struct GradCheckOptions {
    std::size_t n_graphs = 20;
    std::size_t regions = 6;
    std::size_t coords_per_graph = 40;  // sampled parameter coordinates per term
    double h = 1e-5;
    double tol = 1e-4;
    std::uint64_t seed = 7;
    std::string corrupt_term;  // test hook: perturb this term's analytic gradient
};

// Central finite-difference check of every loss term's analytic gradient on
// random graphs with the tiny preset.
GradCheckReport run_gradcheck(const GradCheckOptions& opt);

// Random symmetric zero-diagonal test graph with entries in [-1, 1],
// sparsified to keep_ratio.
BrainGraph random_graph(std::size_t regions, int label, double keep_ratio, Rng& rng);

}  // namespace pime
