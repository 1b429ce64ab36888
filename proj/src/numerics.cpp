#include "pime/numerics.hpp"

#include <cmath>
#include <stdexcept>

namespace pime {

Tensor& ParamSet::tensor(const std::string& name) {
    for (auto& e : entries_)
        if (e.name == name) return e.tensor;
    throw std::invalid_argument("ParamSet: no parameter named " + name);
}

const Tensor& ParamSet::tensor(const std::string& name) const {
    return const_cast<ParamSet*>(this)->tensor(name);
}

std::size_t ParamSet::scalar_count() const {
    std::size_t n = 0;
    for (const auto& e : entries_) n += e.tensor.size();
    return n;
}

ParamSet ParamSet::zeros_like() const {
    ParamSet z;
    for (const auto& e : entries_) z.add(e.name, Tensor::zeros_like(e.tensor));
    return z;
}

bool ParamSet::operator==(const ParamSet& o) const {
    if (entries_.size() != o.entries_.size()) return false;
    for (std::size_t i = 0; i < entries_.size(); ++i)
        if (entries_[i].name != o.entries_[i].name || !(entries_[i].tensor == o.entries_[i].tensor))
            return false;
    return true;
}

AdamState AdamState::init(const ParamSet& params, double lr, double weight_decay) {
    if (lr <= 0.0) throw std::invalid_argument("AdamState: lr must be positive");
    AdamState s;
    s.lr = lr;
    s.weight_decay = weight_decay;
    s.first_moment = params.zeros_like();
    s.second_moment = params.zeros_like();
    return s;
}

void adam_step(ParamSet& params, const ParamSet& grads, AdamState& state) {
    if (params.count() != grads.count() || params.count() != state.first_moment.count())
        throw std::invalid_argument("adam_step: parameter/gradient count mismatch");
    state.step += 1;
    double t = static_cast<double>(state.step);
    double bc1 = 1.0 - std::pow(state.beta1, t);
    double bc2 = 1.0 - std::pow(state.beta2, t);
    for (std::size_t p = 0; p < params.count(); ++p) {
        Tensor& w = params[p].tensor;
        const Tensor& g = grads[p].tensor;
        Tensor& m = state.first_moment[p].tensor;
        Tensor& v = state.second_moment[p].tensor;
        if (!w.same_shape(g))
            throw std::invalid_argument("adam_step: shape mismatch for " + params[p].name);
        for (std::size_t i = 0; i < w.size(); ++i) {
            m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
            v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
            double mhat = m[i] / bc1;
            double vhat = v[i] / bc2;
            w[i] -= state.lr * mhat / (std::sqrt(vhat) + state.eps_adam);
            // decoupled weight decay
            w[i] -= state.lr * state.weight_decay * w[i];
        }
    }
}

double kl_diag_gaussian(const Tensor& mu, const Tensor& log_var) {
    if (!mu.same_shape(log_var))
        throw std::invalid_argument("kl_diag_gaussian: shape mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < mu.size(); ++i)
        s += mu[i] * mu[i] + std::exp(log_var[i]) - log_var[i] - 1.0;
    return 0.5 * s;
}

}  // namespace pime
