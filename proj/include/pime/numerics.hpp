#pragma once

#include <string>
#include <vector>

#include "pime/tensor.hpp"

namespace pime {

// Ordered collection of named parameter tensors. Order is fixed at
// construction and defines the flattening used by Adam and checkpoints.
class ParamSet {
public:
    struct Entry {
        std::string name;
        Tensor tensor;
    };

    void add(std::string name, Tensor t) { entries_.push_back({std::move(name), std::move(t)}); }

    std::size_t count() const { return entries_.size(); }
    Entry& operator[](std::size_t i) { return entries_[i]; }
    const Entry& operator[](std::size_t i) const { return entries_[i]; }

    Tensor& tensor(const std::string& name);
    const Tensor& tensor(const std::string& name) const;

    // Total scalar count across all tensors.
    std::size_t scalar_count() const;

    // Same names/shapes, all zeros.
    ParamSet zeros_like() const;

    std::vector<Entry>::iterator begin() { return entries_.begin(); }
    std::vector<Entry>::iterator end() { return entries_.end(); }
    std::vector<Entry>::const_iterator begin() const { return entries_.begin(); }
    std::vector<Entry>::const_iterator end() const { return entries_.end(); }

    bool operator==(const ParamSet& o) const;

private:
    std::vector<Entry> entries_;
};

struct AdamState {
    std::size_t step = 0;
    ParamSet first_moment;
    ParamSet second_moment;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps_adam = 1e-8;
    double weight_decay = 0.03;

    static AdamState init(const ParamSet& params, double lr, double weight_decay);
};

// Bias-corrected Adam update followed by decoupled weight decay.
void adam_step(ParamSet& params, const ParamSet& grads, AdamState& state);

// KL( N(mu, diag(exp(log_var))) || N(0, I) )
double kl_diag_gaussian(const Tensor& mu, const Tensor& log_var);

}  // namespace pime
