#include "pime/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace pime {

BrainGraph random_graph(std::size_t regions, int label, double keep_ratio, Rng& rng) {
    Tensor fc({regions, regions});
    for (std::size_t i = 0; i < regions; ++i)
        for (std::size_t j = i + 1; j < regions; ++j) {
            double v = 2.0 * rng.uniform() - 1.0;
            fc.at(i, j) = v;
            fc.at(j, i) = v;
        }
    return build_graph(threshold_topk(fc, keep_ratio), label);
}

namespace {

const char* kTerms[] = {"ce", "cluster", "separation", "ib", "consistency", "sparsity", "diversity"};

double term_value(const std::string& term, const BrainGraph& g, const BrainGraph& gp,
                  const ModelConfig& cfg, const ParamSet& params, const LossWeights& w,
                  const Tensor& noise) {
    ad::Tape tape;
    TapedModel model(tape, cfg, params);
    TapedLoss loss = total_loss_taped(tape, model, cfg, g, gp, w, noise);
    for (const auto& [name, var] : loss.terms)
        if (name == term) return var.value().item();
    throw std::invalid_argument("gradcheck: unknown term " + term);
}

ParamSet term_grads(const std::string& term, const BrainGraph& g, const BrainGraph& gp,
                    const ModelConfig& cfg, const ParamSet& params, const LossWeights& w,
                    const Tensor& noise) {
    ad::Tape tape;
    TapedModel model(tape, cfg, params);
    TapedLoss loss = total_loss_taped(tape, model, cfg, g, gp, w, noise);
    for (const auto& [name, var] : loss.terms)
        if (name == term) {
            tape.backward(var);
            return model.grads();
        }
    throw std::invalid_argument("gradcheck: unknown term " + term);
}

}  // namespace

GradCheckReport run_gradcheck(const GradCheckOptions& opt) {
    GradCheckReport report;
    for (const char* term : kTerms)
        report.terms.push_back({term, 0.0, 0, true});

    Rng rng(opt.seed);
    LossWeights w;  // defaults; weights do not affect the unweighted terms
    for (std::size_t gi = 0; gi < opt.n_graphs; ++gi) {
        int label = static_cast<int>(rng.uniform_int(2));
        BrainGraph g = random_graph(opt.regions, label, 0.5, rng);
        ModelConfig cfg = ModelConfig::tiny(opt.regions);
        Rng init_rng = rng.fork(gi);
        ParamSet params = init_params(cfg, init_rng);
        // move zero-initialized coordinates (biases, attention) off zero: a
        // masked node row otherwise puts a relu input exactly on its kink,
        // and the attention l1 term sits on its own kink, where central
        // differences and the subgradient legitimately disagree
        for (auto& e : params)
            for (std::size_t i = 0; i < e.tensor.size(); ++i)
                if (e.tensor[i] == 0.0)
                    e.tensor[i] = (init_rng.uniform() < 0.5 ? -1.0 : 1.0) *
                                  (0.01 + 0.04 * init_rng.uniform());
        Tensor noise({cfg.latent_d});
        for (std::size_t i = 0; i < noise.size(); ++i) noise[i] = rng.normal();
        PerturbMask mask = draw_mask(opt.regions, w.perturb_ratio, rng);
        BrainGraph gp = apply_mask(g, mask.masked_regions);

        for (auto& tr : report.terms) {
            ParamSet analytic = term_grads(tr.term, g, gp, cfg, params, w, noise);
            if (tr.term == opt.corrupt_term)
                for (auto& e : analytic)
                    for (std::size_t i = 0; i < e.tensor.size(); ++i) e.tensor[i] += 1e-2;
            for (std::size_t c = 0; c < opt.coords_per_graph; ++c) {
                std::size_t p = static_cast<std::size_t>(rng.uniform_int(params.count()));
                std::size_t i =
                    static_cast<std::size_t>(rng.uniform_int(params[p].tensor.size()));
                ParamSet mod = params;
                double orig = mod[p].tensor[i];
                mod[p].tensor[i] = orig + opt.h;
                double fp = term_value(tr.term, g, gp, cfg, mod, w, noise);
                mod[p].tensor[i] = orig - opt.h;
                double fm = term_value(tr.term, g, gp, cfg, mod, w, noise);
                double fd = (fp - fm) / (2.0 * opt.h);
                double a = analytic[p].tensor[i];
                double err = std::abs(a - fd);
                double rel = err / std::max({std::abs(a), std::abs(fd), 1e-6});
                if (err > 1e-7 && rel > tr.max_rel_err) tr.max_rel_err = rel;
                tr.coords_checked += 1;
            }
        }
    }
    report.all_pass = true;
    for (auto& tr : report.terms) {
        tr.pass = tr.max_rel_err <= opt.tol;
        if (!tr.pass) report.all_pass = false;
    }
    return report;
}

}  // namespace pime
