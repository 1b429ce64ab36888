#include <doctest.h>

#include "pime/gradcheck.hpp"

using namespace pime;

TEST_CASE("random_graph produces a valid sparsified connectome") {
    Rng rng(6);
    BrainGraph g = random_graph(7, 1, 0.5, rng);
    CHECK(g.node_count() == 7);
    CHECK(g.label == 1);
    for (std::size_t i = 0; i < 7; ++i) {
        CHECK(g.adjacency.at(i, i) == 0.0);
        for (std::size_t j = 0; j < 7; ++j) {
            CHECK(g.adjacency.at(i, j) == g.adjacency.at(j, i));
            CHECK(std::abs(g.adjacency.at(i, j)) <= 1.0);
        }
    }
    CHECK(g.node_features == g.adjacency);
}

TEST_CASE("gradcheck passes on a reduced budget") {
    GradCheckOptions opt;
    opt.n_graphs = 3;
    opt.regions = 5;
    opt.coords_per_graph = 25;
    GradCheckReport rep = run_gradcheck(opt);
    REQUIRE(rep.terms.size() == 7);
    for (const auto& t : rep.terms) {
        INFO(t.term << " max_rel_err=" << t.max_rel_err);
        CHECK(t.pass);
        CHECK(t.coords_checked > 0);
    }
    CHECK(rep.all_pass);
}

TEST_CASE("gradcheck catches a corrupted analytic gradient") {
    GradCheckOptions opt;
    opt.n_graphs = 2;
    opt.regions = 5;
    opt.coords_per_graph = 25;
    opt.corrupt_term = "cluster";
    GradCheckReport rep = run_gradcheck(opt);
    CHECK_FALSE(rep.all_pass);
    bool cluster_failed = false;
    for (const auto& t : rep.terms)
        if (t.term == "cluster" && !t.pass) cluster_failed = true;
    CHECK(cluster_failed);
}
