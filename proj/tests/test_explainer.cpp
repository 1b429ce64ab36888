#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "pime/explainer.hpp"
#include "pime/gradcheck.hpp"

using namespace pime;
namespace fs = std::filesystem;

TEST_CASE("score_from_distance fixtures") {
    // d = 0: log(1 / 1e-6) = 6 ln 10
    CHECK(score_from_distance(0.0) == doctest::Approx(6.0 * std::log(10.0)).epsilon(1e-12));
    CHECK(score_from_distance(1.0) ==
          doctest::Approx(std::log(2.0 / (1.0 + 1e-6))).epsilon(1e-12));
    // monotone decreasing in d
    double prev = score_from_distance(0.0);
    for (double d = 0.25; d < 5.0; d += 0.25) {
        double s = score_from_distance(d);
        CHECK(s < prev);
        prev = s;
    }
    CHECK(score_from_distance(1000.0) > 0.0);  // stays positive
}

TEST_CASE("anchor_prototype picks the closest own-class prototype") {
    ModelConfig cfg = ModelConfig::tiny(6);
    cfg.protos_per_class = 3;
    Rng rng(2);
    ParamSet params = init_params(cfg, rng);
    BrainGraph g = random_graph(6, 0, 0.6, rng);
    auto [cls, anchor] = anchor_prototype(g, cfg, params);
    Tensor probs = predict_probs(g, cfg, params);
    for (std::size_t k = 0; k < probs.size(); ++k)
        CHECK(probs[static_cast<std::size_t>(cls)] >= probs[k]);
    CHECK(cfg.proto_class(anchor) == cls);
    Tensor d = inference_distances(g, cfg, params);
    for (std::size_t k = 0; k < d.size(); ++k)
        if (cfg.proto_class(k) == cls) CHECK(d[anchor] <= d[k]);
}

TEST_CASE("score_subset: full retention equals the unmasked anchor score") {
    ModelConfig cfg = ModelConfig::tiny(5);
    Rng rng(4);
    ParamSet params = init_params(cfg, rng);
    BrainGraph g = random_graph(5, 0, 0.8, rng);
    std::vector<std::size_t> all = {0, 1, 2, 3, 4};
    auto [cls, anchor] = anchor_prototype(g, cfg, params);
    (void)cls;
    double expect = score_from_distance(inference_distances(g, cfg, params)[anchor]);
    CHECK(score_subset(all, g, cfg, params) == doctest::Approx(expect).epsilon(1e-12));
    CHECK_THROWS_AS(score_subset({}, g, cfg, params), std::invalid_argument);
}

TEST_CASE("exhaustive_oracle: agrees with direct enumeration on a tiny case") {
    ModelConfig cfg = ModelConfig::tiny(5);
    Rng rng(9);
    ParamSet params = init_params(cfg, rng);
    BrainGraph g = random_graph(5, 1, 0.8, rng);
    auto [best, best_score] = exhaustive_oracle(g, cfg, params, 2);
    REQUIRE(best.size() == 2);
    // check every pair by hand
    for (std::size_t a = 0; a < 5; ++a)
        for (std::size_t b = a + 1; b < 5; ++b)
            CHECK(best_score >= score_subset({a, b}, g, cfg, params) - 1e-12);
    CHECK(best_score == doctest::Approx(score_subset(best, g, cfg, params)).epsilon(1e-12));

    CHECK_THROWS_AS(exhaustive_oracle(g, cfg, params, 0), std::invalid_argument);
    CHECK_THROWS_AS(exhaustive_oracle(g, cfg, params, 6), std::invalid_argument);
}

TEST_CASE("mcts_explain: trajectory shrinks one region per move") {
    ModelConfig cfg = ModelConfig::tiny(8);
    Rng rng(12);
    ParamSet params = init_params(cfg, rng);
    BrainGraph g = random_graph(8, 0, 0.7, rng);
    MctsOptions opt;
    Rng search_rng(77);
    Explanation e = mcts_explain(g, cfg, params, 3, opt, search_rng);
    CHECK(e.retained_final.size() == 3);
    REQUIRE(e.trajectory.size() == 6);  // sizes 8,7,6,5,4,3
    for (std::size_t i = 0; i < e.trajectory.size(); ++i)
        CHECK(e.trajectory[i].first == 8 - i);
    CHECK(e.score_final == doctest::Approx(e.trajectory.back().second).epsilon(1e-12));
    for (std::size_t i = 1; i < e.retained_final.size(); ++i)
        CHECK(e.retained_final[i - 1] < e.retained_final[i]);
    for (std::size_t r : e.retained_final) CHECK(r < 8);

    CHECK_THROWS_AS(mcts_explain(g, cfg, params, 0, opt, search_rng), std::invalid_argument);
    CHECK_THROWS_AS(mcts_explain(g, cfg, params, 8, opt, search_rng), std::invalid_argument);
}

TEST_CASE("mcts_explain: deterministic in the search seed") {
    ModelConfig cfg = ModelConfig::tiny(8);
    Rng rng(14);
    ParamSet params = init_params(cfg, rng);
    BrainGraph g = random_graph(8, 1, 0.7, rng);
    MctsOptions opt;
    Rng a(5), b(5), c(6);
    Explanation ea = mcts_explain(g, cfg, params, 3, opt, a);
    Explanation eb = mcts_explain(g, cfg, params, 3, opt, b);
    CHECK(ea.retained_final == eb.retained_final);
    CHECK(ea.score_final == eb.score_final);
    Explanation ec = mcts_explain(g, cfg, params, 3, opt, c);
    CHECK(ec.retained_final.size() == 3);  // may or may not match, but must be valid
}

TEST_CASE("mcts_explain: exhaustive rollouts find the best single removal") {
    // with target C-1 every child is terminal, so rollouts >= C visit each
    // removal exactly and the commit rule reduces to argmax over exact scores
    ModelConfig cfg = ModelConfig::tiny(6);
    Rng rng(20);
    ParamSet params = init_params(cfg, rng);
    BrainGraph g = random_graph(6, 0, 0.8, rng);
    MctsOptions opt;
    opt.rollouts = 64;
    Rng search_rng(1);
    Explanation e = mcts_explain(g, cfg, params, 5, opt, search_rng);
    auto [best, best_score] = exhaustive_oracle(g, cfg, params, 5);
    CHECK(e.retained_final == best);
    CHECK(e.score_final == doctest::Approx(best_score).epsilon(1e-12));
}

TEST_CASE("stability fixtures") {
    SUBCASE("identical sets") {
        Stability s = stability({1, 2, 3}, {3, 2, 1});
        CHECK(s.jaccard == 1.0);
        CHECK(s.dice == 1.0);
    }
    SUBCASE("disjoint sets") {
        Stability s = stability({1, 2}, {3, 4});
        CHECK(s.jaccard == 0.0);
        CHECK(s.dice == 0.0);
    }
    SUBCASE("9 shared regions between two 10-region sets") {
        std::vector<std::size_t> shared = {5, 20, 22, 59, 62, 92, 147, 197, 199};
        std::vector<std::size_t> a = shared, b = shared;
        a.push_back(111);
        b.push_back(121);
        Stability s = stability(a, b);
        CHECK(s.dice == doctest::Approx(0.90).epsilon(1e-14));
        CHECK(s.jaccard == doctest::Approx(9.0 / 11.0).epsilon(1e-14));
    }
    SUBCASE("duplicates are ignored") {
        Stability s = stability({1, 1, 2}, {2, 2, 3});
        CHECK(s.jaccard == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
        CHECK(s.dice == doctest::Approx(0.5).epsilon(1e-14));
    }
    CHECK_THROWS_AS(stability({}, {1}), std::invalid_argument);
}

TEST_CASE("default_target_size") {
    CHECK(default_target_size(116) == 10);
    CHECK(default_target_size(200) == 17);
    CHECK(default_target_size(20) == 4);  // floor of 2, clamped to 4
    CHECK(default_target_size(10) == 4);
}

TEST_CASE("explain_dataset: frequency counts and ordering") {
    SynthSpec spec;
    spec.n_per_class = 3;
    spec.regions = 8;
    spec.timepoints = 40;
    spec.planted_regions = {1, 5};
    spec.seed = 13;
    Dataset ds = synth_dataset(spec);
    ModelConfig cfg = ModelConfig::tiny(8);
    Rng rng(17);
    ParamSet params = init_params(cfg, rng);
    MctsOptions opt;
    opt.rollouts = 8;
    DatasetExplanations out = explain_dataset(ds, cfg, params, 0.5, 4, opt, 99);
    REQUIRE(out.per_subject.size() == 6);
    std::size_t total = 0;
    for (const auto& [region, count] : out.frequency) {
        CHECK(region < 8);
        total += count;
    }
    CHECK(total == 6 * 4);  // every retained slot counted once
    for (std::size_t i = 1; i < out.frequency.size(); ++i) {
        const auto& prev = out.frequency[i - 1];
        const auto& cur = out.frequency[i];
        CHECK((prev.second > cur.second ||
               (prev.second == cur.second && prev.first < cur.first)));
    }
    // repeatable
    DatasetExplanations again = explain_dataset(ds, cfg, params, 0.5, 4, opt, 99);
    CHECK(again.frequency == out.frequency);
}

TEST_CASE("explanation json and frequency csv outputs") {
    Explanation e;
    e.subject_id = "s1";
    e.retained_final = {0, 3, 5};
    e.target_size = 3;
    e.anchor_prototype = 2;
    e.predicted_class = 1;
    e.score_final = 4.5;
    e.seed = 7;
    e.trajectory = {{5, 3.0}, {4, 3.5}, {3, 4.5}};
    auto dir = fs::temp_directory_path();
    auto jpath = dir / "pime_explanation.json";
    save_explanation_json(e, jpath.string());
    std::ifstream in(jpath);
    nlohmann::json j = nlohmann::json::parse(in);
    CHECK(j["subject_id"] == "s1");
    CHECK(j["retained_regions"] == nlohmann::json({0, 3, 5}));
    CHECK(j["predicted_class"] == 1);
    CHECK(j["trajectory"].size() == 3);
    CHECK(j["trajectory"][2]["size"] == 3);

    auto cpath = dir / "pime_frequency.csv";
    save_frequency_csv({{5, 6}, {0, 3}}, cpath.string());
    std::ifstream cin_(cpath);
    std::string line;
    REQUIRE(std::getline(cin_, line));
    CHECK(line == "region,count");
    REQUIRE(std::getline(cin_, line));
    CHECK(line == "5,6");
    REQUIRE(std::getline(cin_, line));
    CHECK(line == "0,3");
}
