#include "pime/connectome.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace pime {

namespace {

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t idx) {
    // splitmix64 over (seed, idx)
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (idx + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

void validate_recording(const BoldRecording& rec) {
    if (rec.regions() < 2) throw DataError("recording " + rec.subject_id + ": need at least 2 regions");
    if (rec.timepoints() < 3) throw DataError("recording " + rec.subject_id + ": need at least 3 timepoints");
    for (std::size_t r = 0; r < rec.regions(); ++r) {
        double first = rec.series.at(r, 0);
        bool constant = true;
        for (std::size_t t = 1; t < rec.timepoints(); ++t)
            if (rec.series.at(r, t) != first) {
                constant = false;
                break;
            }
        if (constant)
            throw DataError("recording " + rec.subject_id + ": region " + std::to_string(r) +
                            " has constant (zero-variance) series");
    }
}

}  // namespace

Tensor pearson_fc(const Tensor& series) {
    std::size_t C = series.rows(), T = series.cols();
    // center rows
    Tensor centered({C, T});
    std::vector<double> norms(C);
    for (std::size_t r = 0; r < C; ++r) {
        double mean = 0.0;
        for (std::size_t t = 0; t < T; ++t) mean += series.at(r, t);
        mean /= static_cast<double>(T);
        double sq = 0.0;
        for (std::size_t t = 0; t < T; ++t) {
            double c = series.at(r, t) - mean;
            centered.at(r, t) = c;
            sq += c * c;
        }
        if (sq == 0.0)
            throw DataError("pearson_fc: region " + std::to_string(r) + " has zero variance");
        norms[r] = std::sqrt(sq);
    }
    Tensor fc({C, C});
    for (std::size_t i = 0; i < C; ++i)
        for (std::size_t j = i + 1; j < C; ++j) {
            double d = 0.0;
            for (std::size_t t = 0; t < T; ++t) d += centered.at(i, t) * centered.at(j, t);
            double r = d / (norms[i] * norms[j]);
            r = std::clamp(r, -1.0, 1.0);
            fc.at(i, j) = r;
            fc.at(j, i) = r;
        }
    return fc;
}

Tensor threshold_topk(const Tensor& fc, double keep_ratio) {
    std::size_t C = fc.rows();
    std::vector<double> mags;
    for (std::size_t i = 0; i < C; ++i)
        for (std::size_t j = i + 1; j < C; ++j) mags.push_back(std::abs(fc.at(i, j)));
    std::size_t total = mags.size();
    std::size_t keep = static_cast<std::size_t>(std::ceil(keep_ratio * static_cast<double>(total)));
    keep = std::min(keep, total);
    Tensor out({C, C});
    if (keep == 0) return out;
    std::sort(mags.begin(), mags.end(), std::greater<double>());
    double cutoff = mags[keep - 1];
    for (std::size_t i = 0; i < C; ++i)
        for (std::size_t j = i + 1; j < C; ++j)
            if (std::abs(fc.at(i, j)) >= cutoff) {
                out.at(i, j) = fc.at(i, j);
                out.at(j, i) = fc.at(j, i);
            }
    return out;
}

BrainGraph build_graph(const Tensor& fc_thresholded, int label) {
    std::size_t C = fc_thresholded.rows();
    for (std::size_t i = 0; i < C; ++i) {
        if (fc_thresholded.at(i, i) != 0.0)
            throw DataError("build_graph: nonzero diagonal at " + std::to_string(i));
        for (std::size_t j = i + 1; j < C; ++j)
            if (std::abs(fc_thresholded.at(i, j) - fc_thresholded.at(j, i)) > 1e-9)
                throw DataError("build_graph: asymmetry at (" + std::to_string(i) + "," +
                                std::to_string(j) + ")");
    }
    BrainGraph g;
    g.adjacency = fc_thresholded;
    g.node_features = fc_thresholded;  // connection profile per node
    g.label = label;
    return g;
}

BrainGraph recording_to_graph(const BoldRecording& rec, double keep_ratio) {
    return build_graph(threshold_topk(pearson_fc(rec.series), keep_ratio), rec.label);
}

Dataset synth_dataset(const SynthSpec& spec) {
    for (std::size_t p : spec.planted_regions)
        if (p >= spec.regions) throw DataError("synth_dataset: planted region out of range");
    if (spec.effect_size < 0.0) throw DataError("synth_dataset: effect_size must be >= 0");
    Dataset ds;
    ds.num_classes = 2;
    ds.planted_regions = spec.planted_regions;
    std::vector<bool> planted(spec.regions, false);
    for (std::size_t p : spec.planted_regions) planted[p] = true;
    const std::size_t block = 5;
    std::size_t n_blocks = (spec.regions + block - 1) / block;
    std::size_t idx = 0;
    for (int label = 0; label < 2; ++label) {
        for (std::size_t s = 0; s < spec.n_per_class; ++s, ++idx) {
            Rng rng(mix_seed(spec.seed, idx));
            std::size_t T = spec.timepoints;
            // shared latents: one per correlated block, plus the planted
            // latent for class-1 subjects
            std::vector<std::vector<double>> block_latent(n_blocks, std::vector<double>(T));
            for (auto& bl : block_latent)
                for (double& v : bl) v = rng.normal();
            std::vector<double> planted_latent(T, 0.0);
            if (label == 1)
                for (double& v : planted_latent) v = rng.normal();
            BoldRecording rec;
            char name[64];
            std::snprintf(name, sizeof(name), "synth_c%d_%03zu", label, s);
            rec.subject_id = name;
            rec.label = label;
            rec.series = Tensor({spec.regions, T});
            for (std::size_t c = 0; c < spec.regions; ++c)
                for (std::size_t t = 0; t < T; ++t) {
                    double v = rng.normal() + 0.5 * block_latent[c / block][t];
                    if (label == 1 && planted[c]) v += spec.effect_size * planted_latent[t];
                    rec.series.at(c, t) = v;
                }
            ds.recordings.push_back(std::move(rec));
        }
    }
    return ds;
}

// -- serialization ---------------------------------------------------------

void save_bold_csv(const BoldRecording& rec, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open " + path + " for writing");
    out << "subject_id," << rec.subject_id << ",label," << rec.label << "\n";
    for (std::size_t r = 0; r < rec.regions(); ++r) {
        for (std::size_t t = 0; t < rec.timepoints(); ++t) {
            if (t) out << ',';
            out << fmt_double(rec.series.at(r, t));
        }
        out << "\n";
    }
}

BoldRecording load_bold_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw DataError(path + ": empty file");
    std::vector<std::string> head;
    {
        std::stringstream ss(line);
        std::string tok;
        while (std::getline(ss, tok, ',')) head.push_back(tok);
    }
    if (head.size() != 4 || head[0] != "subject_id" || head[2] != "label")
        throw DataError(path + ":1: expected header 'subject_id,<id>,label,<int>'");
    BoldRecording rec;
    rec.subject_id = head[1];
    try {
        rec.label = std::stoi(head[3]);
    } catch (const std::exception&) {
        throw DataError(path + ":1: label is not an integer");
    }
    std::vector<std::vector<double>> rows;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string tok;
        while (std::getline(ss, tok, ',')) {
            try {
                std::size_t pos = 0;
                double v = std::stod(tok, &pos);
                if (pos != tok.size()) throw std::invalid_argument(tok);
                row.push_back(v);
            } catch (const std::exception&) {
                throw DataError(path + ":" + std::to_string(lineno) + ": non-numeric cell '" + tok + "'");
            }
        }
        if (!rows.empty() && row.size() != rows[0].size())
            throw DataError(path + ":" + std::to_string(lineno) + ": row length " +
                            std::to_string(row.size()) + " != " + std::to_string(rows[0].size()));
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw DataError(path + ": no series rows");
    rec.series = Tensor({rows.size(), rows[0].size()});
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t t = 0; t < rows[r].size(); ++t) rec.series.at(r, t) = rows[r][t];
    validate_recording(rec);
    return rec;
}

void save_dataset(const Dataset& ds, const std::string& dir, const SynthSpec* spec) {
    fs::create_directories(dir);
    json index;
    index["files"] = json::array();
    std::size_t C = 0, T = 0;
    for (const auto& rec : ds.recordings) {
        std::string fname = rec.subject_id + ".csv";
        save_bold_csv(rec, (fs::path(dir) / fname).string());
        index["files"].push_back(fname);
        C = rec.regions();
        T = rec.timepoints();
    }
    index["C"] = C;
    index["T"] = T;
    index["K"] = ds.num_classes;
    if (!ds.planted_regions.empty()) index["planted_regions"] = ds.planted_regions;
    if (spec) {
        index["spec"] = {{"n_per_class", spec->n_per_class}, {"regions", spec->regions},
                         {"timepoints", spec->timepoints},   {"planted_regions", spec->planted_regions},
                         {"effect_size", spec->effect_size}, {"seed", spec->seed}};
    }
    std::ofstream out(fs::path(dir) / "index.json");
    out << index.dump(2) << "\n";
}

Dataset load_dataset(const std::string& dir) {
    std::ifstream in(fs::path(dir) / "index.json");
    if (!in) throw DataError(dir + ": missing index.json");
    json index;
    try {
        in >> index;
    } catch (const json::exception& e) {
        throw DataError(dir + "/index.json: " + e.what());
    }
    Dataset ds;
    ds.num_classes = index.at("K").get<int>();
    if (index.contains("planted_regions"))
        ds.planted_regions = index["planted_regions"].get<std::vector<std::size_t>>();
    for (const auto& f : index.at("files")) {
        BoldRecording rec = load_bold_csv((fs::path(dir) / f.get<std::string>()).string());
        if (rec.label < 0 || rec.label >= ds.num_classes)
            throw DataError(rec.subject_id + ": label " + std::to_string(rec.label) +
                            " out of range for K=" + std::to_string(ds.num_classes));
        ds.recordings.push_back(std::move(rec));
    }
    return ds;
}

}  // namespace pime
