#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pime/rng.hpp"
#include "pime/tensor.hpp"

namespace pime {

struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

struct BoldRecording {
    std::string subject_id;
    Tensor series;  // C x T
    int label = 0;

    std::size_t regions() const { return series.rows(); }
    std::size_t timepoints() const { return series.cols(); }
};

struct BrainGraph {
    Tensor adjacency;      // C x C, symmetric, zero diagonal
    Tensor node_features;  // row u = adjacency row u
    int label = 0;

    std::size_t node_count() const { return adjacency.rows(); }
};

struct SynthSpec {
    std::size_t n_per_class = 50;
    std::size_t regions = 20;
    std::size_t timepoints = 120;
    std::vector<std::size_t> planted_regions = {2, 5, 11, 17};
    double effect_size = 2.0;
    std::uint64_t seed = 0;
};

struct Dataset {
    std::vector<BoldRecording> recordings;
    int num_classes = 2;
    std::vector<std::size_t> planted_regions;  // empty for real data
};

// Rejects rows with zero variance; diagonal forced to zero.
Tensor pearson_fc(const Tensor& series);

// Keeps the keep_ratio fraction of off-diagonal pairs with largest |value|
// (signed weights preserved). Ties at the cutoff magnitude are all kept.
Tensor threshold_topk(const Tensor& fc, double keep_ratio);

BrainGraph build_graph(const Tensor& fc_thresholded, int label);

// Full BOLD -> graph pipeline for one recording.
BrainGraph recording_to_graph(const BoldRecording& rec, double keep_ratio);

// Two-class synthetic data with a planted correlated block in class 1.
Dataset synth_dataset(const SynthSpec& spec);

// -- serialization ---------------------------------------------------------

BoldRecording load_bold_csv(const std::string& path);
void save_bold_csv(const BoldRecording& rec, const std::string& path);

// Directory with one CSV per subject plus index.json.
void save_dataset(const Dataset& ds, const std::string& dir, const SynthSpec* spec = nullptr);
Dataset load_dataset(const std::string& dir);

}  // namespace pime
