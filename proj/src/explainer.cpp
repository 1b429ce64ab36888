#include "pime/explainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <memory>
#include <stdexcept>

#include <json.hpp>

#include "pime/objectives.hpp"

using nlohmann::json;

namespace pime {

double score_from_distance(double d, double epsilon) {
    return std::log((d + 1.0) / (d + epsilon));
}

namespace {

double anchor_distance(const std::vector<std::size_t>& subset, const BrainGraph& graph,
                       const ModelConfig& cfg, const ParamSet& params, std::size_t anchor) {
    BrainGraph masked = mask_to_subset(graph, subset);
    Tensor d = inference_distances(masked, cfg, params);
    return d[anchor];
}

}  // namespace

std::pair<int, std::size_t> anchor_prototype(const BrainGraph& graph, const ModelConfig& cfg,
                                             const ParamSet& params) {
    Tensor probs = predict_probs(graph, cfg, params);
    int cls = 0;
    for (std::size_t k = 1; k < probs.size(); ++k)
        if (probs[k] > probs[cls]) cls = static_cast<int>(k);
    Tensor d = inference_distances(graph, cfg, params);
    std::size_t best = cfg.num_prototypes();
    for (std::size_t k = 0; k < d.size(); ++k) {
        if (cfg.proto_class(k) != cls) continue;
        if (best == cfg.num_prototypes() || d[k] < d[best]) best = k;
    }
    return {cls, best};
}

double score_subset(const std::vector<std::size_t>& subset, const BrainGraph& graph,
                    const ModelConfig& cfg, const ParamSet& params, double epsilon) {
    if (subset.empty()) throw std::invalid_argument("score_subset: empty subset");
    auto [cls, anchor] = anchor_prototype(graph, cfg, params);
    (void)cls;
    return score_from_distance(anchor_distance(subset, graph, cfg, params, anchor), epsilon);
}

namespace {

struct SearchNode {
    std::vector<std::size_t> retained;  // sorted
    std::size_t visit_count = 0;
    double total_value = 0;
    // children keyed by position of the removed region in `retained`
    std::vector<std::unique_ptr<SearchNode>> children;
    std::size_t expanded = 0;  // children[0..expanded) exist

    explicit SearchNode(std::vector<std::size_t> r) : retained(std::move(r)) {
        children.resize(retained.size());
    }

    bool terminal(std::size_t target) const { return retained.size() <= target; }
    double mean() const { return visit_count ? total_value / visit_count : 0.0; }
};

std::vector<std::size_t> remove_at(const std::vector<std::size_t>& v, std::size_t pos) {
    std::vector<std::size_t> out;
    out.reserve(v.size() - 1);
    for (std::size_t i = 0; i < v.size(); ++i)
        if (i != pos) out.push_back(v[i]);
    return out;
}

}  // namespace

Explanation mcts_explain(const BrainGraph& graph, const ModelConfig& cfg, const ParamSet& params,
                         std::size_t target_size, const MctsOptions& opt, Rng& rng) {
    std::size_t C = graph.node_count();
    if (target_size < 1 || target_size >= C)
        throw std::invalid_argument("mcts_explain: need 1 <= target_size < C");

    auto [cls, anchor] = anchor_prototype(graph, cfg, params);
    double norm = std::log(1.0 / opt.epsilon);  // rewards scaled to about [0, 1]

    auto raw_score = [&](const std::vector<std::size_t>& subset) {
        return score_from_distance(anchor_distance(subset, graph, cfg, params, anchor),
                                   opt.epsilon);
    };

    std::vector<std::size_t> retained(C);
    for (std::size_t i = 0; i < C; ++i) retained[i] = i;

    Explanation ex;
    ex.target_size = target_size;
    ex.anchor_prototype = anchor;
    ex.predicted_class = cls;
    ex.trajectory.push_back({C, raw_score(retained)});

    while (retained.size() > target_size) {
        SearchNode root(retained);
        for (std::size_t it = 0; it < opt.rollouts; ++it) {
            // selection
            std::vector<SearchNode*> path{&root};
            SearchNode* node = &root;
            while (!node->terminal(target_size) && node->expanded == node->children.size()) {
                std::size_t best = 0;
                double best_v = -1.0;
                for (std::size_t i = 0; i < node->children.size(); ++i) {
                    SearchNode* ch = node->children[i].get();
                    double v;
                    if (ch->visit_count == 0) {
                        v = std::numeric_limits<double>::infinity();  // unvisited first
                    } else {
                        v = ch->mean() +
                            opt.c_uct * std::sqrt(std::log(static_cast<double>(node->visit_count)) /
                                                  static_cast<double>(ch->visit_count));
                    }
                    if (v > best_v) {
                        best_v = v;
                        best = i;  // lowest index wins ties
                    }
                }
                node = node->children[best].get();
                path.push_back(node);
            }
            // expansion (lowest-index unexpanded child)
            if (!node->terminal(target_size)) {
                std::size_t pos = node->expanded;
                node->children[pos] = std::make_unique<SearchNode>(remove_at(node->retained, pos));
                node->expanded += 1;
                node = node->children[pos].get();
                path.push_back(node);
            }
            // rollout: random removals down to target size
            std::vector<std::size_t> sim = node->retained;
            while (sim.size() > target_size) {
                std::size_t pos = static_cast<std::size_t>(rng.uniform_int(sim.size()));
                sim.erase(sim.begin() + static_cast<std::ptrdiff_t>(pos));
            }
            double reward = raw_score(sim) / norm;
            // backpropagation
            for (SearchNode* n : path) {
                n->visit_count += 1;
                n->total_value += reward;
            }
        }
        // commit: highest visit count, then higher mean, then lower index
        std::size_t best = root.children.size();
        for (std::size_t i = 0; i < root.expanded; ++i) {
            const SearchNode* ch = root.children[i].get();
            if (best == root.children.size()) {
                best = i;
                continue;
            }
            const SearchNode* bc = root.children[best].get();
            if (ch->visit_count > bc->visit_count ||
                (ch->visit_count == bc->visit_count && ch->mean() > bc->mean())) {
                best = i;
            }
        }
        if (best == root.children.size())
            throw std::logic_error("mcts_explain: no child expanded");
        retained = root.children[best]->retained;
        ex.trajectory.push_back({retained.size(), raw_score(retained)});
    }

    ex.retained_final = retained;
    ex.score_final = raw_score(retained);
    return ex;
}

std::pair<std::vector<std::size_t>, double> exhaustive_oracle(const BrainGraph& graph,
                                                              const ModelConfig& cfg,
                                                              const ParamSet& params,
                                                              std::size_t k, double epsilon) {
    std::size_t C = graph.node_count();
    if (C > 16)
        throw std::invalid_argument(
            "exhaustive_oracle: C > 16 is combinatorially infeasible, use mcts_explain");
    if (k < 1 || k > C) throw std::invalid_argument("exhaustive_oracle: bad subset size");
    auto [cls, anchor] = anchor_prototype(graph, cfg, params);
    (void)cls;

    std::vector<std::size_t> best;
    double best_score = 0;
    std::vector<std::size_t> subset(k);
    // lexicographic enumeration; ties keep the first (lowest) subset
    std::vector<std::size_t> idx(k);
    for (std::size_t i = 0; i < k; ++i) idx[i] = i;
    while (true) {
        double s = score_from_distance(anchor_distance(idx, graph, cfg, params, anchor), epsilon);
        if (best.empty() || s > best_score) {
            best = idx;
            best_score = s;
        }
        // next combination
        std::size_t i = k;
        while (i > 0 && idx[i - 1] == C - k + (i - 1)) --i;
        if (i == 0) break;
        idx[i - 1] += 1;
        for (std::size_t j = i; j < k; ++j) idx[j] = idx[j - 1] + 1;
    }
    return {best, best_score};
}

Stability stability(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
    if (a.empty() || b.empty()) throw std::invalid_argument("stability: empty set");
    std::vector<std::size_t> sa = a, sb = b;
    std::sort(sa.begin(), sa.end());
    sa.erase(std::unique(sa.begin(), sa.end()), sa.end());
    std::sort(sb.begin(), sb.end());
    sb.erase(std::unique(sb.begin(), sb.end()), sb.end());
    std::vector<std::size_t> inter;
    std::set_intersection(sa.begin(), sa.end(), sb.begin(), sb.end(), std::back_inserter(inter));
    std::vector<std::size_t> uni;
    std::set_union(sa.begin(), sa.end(), sb.begin(), sb.end(), std::back_inserter(uni));
    Stability s;
    s.jaccard = static_cast<double>(inter.size()) / static_cast<double>(uni.size());
    s.dice = 2.0 * static_cast<double>(inter.size()) /
             static_cast<double>(sa.size() + sb.size());
    return s;
}

std::size_t default_target_size(std::size_t regions) {
    std::size_t t = static_cast<std::size_t>(
        std::llround(static_cast<double>(regions) * 10.0 / 116.0));
    return std::max<std::size_t>(t, 4);
}

DatasetExplanations explain_dataset(const Dataset& ds, const ModelConfig& cfg,
                                    const ParamSet& params, double keep_ratio,
                                    std::size_t target_size, const MctsOptions& opt,
                                    std::uint64_t seed) {
    DatasetExplanations out;
    std::map<std::size_t, std::size_t> counts;
    for (std::size_t i = 0; i < ds.recordings.size(); ++i) {
        BrainGraph g = recording_to_graph(ds.recordings[i], keep_ratio);
        Rng rng(seed + 0x51ed2700ULL * (i + 1));
        Explanation e = mcts_explain(g, cfg, params, target_size, opt, rng);
        e.subject_id = ds.recordings[i].subject_id;
        e.seed = seed;
        for (std::size_t r : e.retained_final) counts[r] += 1;
        out.per_subject.push_back(std::move(e));
    }
    for (const auto& [region, count] : counts) out.frequency.push_back({region, count});
    std::stable_sort(out.frequency.begin(), out.frequency.end(),
                     [](const auto& x, const auto& y) { return x.second > y.second; });
    return out;
}

void save_explanation_json(const Explanation& e, const std::string& path) {
    json j;
    j["subject_id"] = e.subject_id;
    j["retained_regions"] = e.retained_final;
    j["target_size"] = e.target_size;
    j["anchor_prototype"] = e.anchor_prototype;
    j["predicted_class"] = e.predicted_class;
    j["score_final"] = e.score_final;
    j["seed"] = e.seed;
    json traj = json::array();
    for (const auto& [size, score] : e.trajectory)
        traj.push_back({{"size", size}, {"score", score}});
    j["trajectory"] = traj;
    std::ofstream out(path);
    if (!out) throw DataError("cannot open " + path + " for writing");
    out << j.dump(2) << "\n";
}

void save_frequency_csv(const std::vector<std::pair<std::size_t, std::size_t>>& freq,
                        const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open " + path + " for writing");
    out << "region,count\n";
    for (const auto& [region, count] : freq) out << region << "," << count << "\n";
}

}  // namespace pime
