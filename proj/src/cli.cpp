#include "pime/cli.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "pime/explainer.hpp"
#include "pime/gradcheck.hpp"
#include "pime/io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace pime {

namespace {

std::uint64_t default_seed() {
    if (const char* env = std::getenv("PIME_SEED")) {
        try {
            return std::stoull(env);
        } catch (const std::exception&) {
            throw DataError("PIME_SEED is not an integer");
        }
    }
    return 0;
}

std::vector<std::size_t> parse_index_list(const std::string& s) {
    std::vector<std::size_t> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok.empty()) continue;
        out.push_back(std::stoull(tok));
    }
    return out;
}

std::map<std::size_t, std::string> load_region_labels(const std::string& path) {
    std::map<std::size_t, std::string> labels;
    std::ifstream in(path);
    if (!in) throw DataError("cannot open region-label file " + path);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto comma = line.find(',');
        if (comma == std::string::npos) throw DataError(path + ": expected 'index,name' lines");
        labels[std::stoull(line.substr(0, comma))] = line.substr(comma + 1);
    }
    return labels;
}

// Region-set file: either a frequency CSV ("region,count" header) from the
// explain subcommand, of which the top `top_n` rows are taken, or a plain
// list of one region index per line.
std::vector<std::size_t> load_region_set(const std::string& path, std::size_t top_n) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open region-set file " + path);
    std::string line;
    if (!std::getline(in, line)) throw DataError(path + ": empty file");
    std::vector<std::size_t> regions;
    if (line.rfind("region,", 0) == 0) {
        while (std::getline(in, line) && regions.size() < top_n) {
            if (line.empty()) continue;
            regions.push_back(std::stoull(line.substr(0, line.find(','))));
        }
    } else {
        do {
            if (line.empty()) continue;
            regions.push_back(std::stoull(line));
        } while (std::getline(in, line));
    }
    if (regions.empty()) throw DataError(path + ": no regions");
    return regions;
}

void check_regions_match(const ModelConfig& cfg, const Dataset& ds) {
    if (ds.recordings.empty()) throw DataError("dataset is empty");
    std::size_t C = ds.recordings[0].regions();
    if (cfg.regions != C)
        throw DataError("checkpoint was trained on C=" + std::to_string(cfg.regions) +
                        " regions but dataset has C=" + std::to_string(C));
}

int cmd_synth(const SynthSpec& spec, const std::string& out_dir) {
    Dataset ds = synth_dataset(spec);
    save_dataset(ds, out_dir, &spec);
    std::cout << "wrote " << ds.recordings.size() << " subjects to " << out_dir << "\n";
    std::cout << "planted regions:";
    for (std::size_t p : spec.planted_regions) std::cout << ' ' << p;
    std::cout << "\n";
    return 0;
}

int cmd_ingest(const std::string& in_dir, const std::string& out_dir, int num_classes) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(in_dir))
        if (entry.path().extension() == ".csv") files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw DataError(in_dir + ": no .csv files");
    Dataset ds;
    ds.num_classes = num_classes;
    for (const auto& f : files) {
        BoldRecording rec = load_bold_csv(f.string());
        if (rec.label < 0 || rec.label >= num_classes)
            throw DataError(f.string() + ": label " + std::to_string(rec.label) +
                            " out of range for K=" + std::to_string(num_classes));
        ds.recordings.push_back(std::move(rec));
    }
    save_dataset(ds, out_dir);
    std::cout << "ingested " << ds.recordings.size() << " subjects into " << out_dir << "\n";
    return 0;
}

int cmd_train(const TrainConfig& cfg, const std::string& dataset_dir, const std::string& out_dir,
              bool cross_validate) {
    Dataset ds = load_dataset(dataset_dir);
    fs::create_directories(out_dir);
    save_train_config(cfg, (fs::path(out_dir) / "config.json").string());

    std::vector<BrainGraph> graphs = dataset_to_graphs(ds, cfg.keep_ratio);
    std::size_t C = graphs.at(0).node_count();
    ModelConfig mcfg = cfg.model_config(C, ds.num_classes);

    if (cross_validate) {
        std::vector<int> labels;
        for (const auto& g : graphs) labels.push_back(g.label);
        auto splits = kfold_split(labels, cfg.folds, cfg.seed);
        json cv;
        cv["folds"] = json::array();
        double mean_acc = 0;
        for (std::size_t f = 0; f < splits.size(); ++f) {
            std::vector<BrainGraph> tr, te;
            for (std::size_t i : splits[f].train) tr.push_back(graphs[i]);
            for (std::size_t i : splits[f].test) te.push_back(graphs[i]);
            Trainer trainer(mcfg, cfg);
            TrainHistory hist;
            trainer.run_epochs(tr, cfg.epochs, &te, hist);
            EvalResult res = evaluate(mcfg, trainer.params(), te);
            mean_acc += res.accuracy;
            cv["folds"].push_back({{"fold", f},
                                   {"test_accuracy", res.accuracy},
                                   {"per_class_accuracy", res.per_class_accuracy}});
            std::cout << "fold " << f << ": test accuracy " << res.accuracy << "\n";
        }
        mean_acc /= static_cast<double>(splits.size());
        cv["mean_test_accuracy"] = mean_acc;
        std::ofstream out(fs::path(out_dir) / "cv_metrics.json");
        out << cv.dump(2) << "\n";
        std::cout << "mean test accuracy: " << mean_acc << "\n";
    }

    Trainer trainer(mcfg, cfg);
    TrainHistory hist;
    trainer.run_epochs(graphs, cfg.epochs, nullptr, hist);
    save_checkpoint(trainer.checkpoint(), (fs::path(out_dir) / "checkpoint.json").string());
    save_history_csv(hist, (fs::path(out_dir) / "history.csv").string());
    if (!hist.rows.empty())
        std::cout << "final train accuracy: " << hist.rows.back().train_acc << "\n";
    std::cout << "checkpoint written to " << (fs::path(out_dir) / "checkpoint.json").string()
              << "\n";
    return 0;
}

int cmd_eval(const std::string& ckpt_path, const std::string& dataset_dir,
             const std::string& out_path, std::size_t folds) {
    Checkpoint ckpt = load_checkpoint(ckpt_path);
    Dataset ds = load_dataset(dataset_dir);
    check_regions_match(ckpt.model_cfg, ds);
    std::vector<BrainGraph> graphs = dataset_to_graphs(ds, ckpt.train_cfg.keep_ratio);
    EvalResult res = evaluate(ckpt.model_cfg, ckpt.params, graphs);
    json metrics;
    metrics["accuracy"] = res.accuracy;
    metrics["per_class_accuracy"] = res.per_class_accuracy;
    metrics["per_class_count"] = res.per_class_count;
    if (folds > 1) {
        std::vector<int> labels;
        for (const auto& g : graphs) labels.push_back(g.label);
        auto splits = kfold_split(labels, folds, ckpt.train_cfg.seed);
        json per_fold = json::array();
        for (std::size_t f = 0; f < splits.size(); ++f) {
            std::vector<BrainGraph> te;
            for (std::size_t i : splits[f].test) te.push_back(graphs[i]);
            per_fold.push_back(evaluate(ckpt.model_cfg, ckpt.params, te).accuracy);
        }
        metrics["per_fold_accuracy"] = per_fold;
    }
    std::ofstream out(out_path);
    if (!out) throw DataError("cannot open " + out_path + " for writing");
    out << metrics.dump(2) << "\n";
    std::cout << "accuracy: " << res.accuracy << "\n";
    return 0;
}

int cmd_explain(const std::string& ckpt_path, const std::string& dataset_dir,
                const std::string& out_dir, std::size_t target_size, const MctsOptions& opt,
                std::uint64_t seed, const std::string& labels_path) {
    Checkpoint ckpt = load_checkpoint(ckpt_path);
    Dataset ds = load_dataset(dataset_dir);
    check_regions_match(ckpt.model_cfg, ds);
    std::size_t C = ds.recordings[0].regions();
    if (target_size == 0) target_size = default_target_size(C);
    if (target_size >= C) throw DataError("target size must be below C=" + std::to_string(C));
    fs::create_directories(out_dir);

    DatasetExplanations exps = explain_dataset(ds, ckpt.model_cfg, ckpt.params,
                                               ckpt.train_cfg.keep_ratio, target_size, opt, seed);
    std::map<std::size_t, std::string> labels;
    if (!labels_path.empty()) labels = load_region_labels(labels_path);

    for (const auto& e : exps.per_subject)
        save_explanation_json(e, (fs::path(out_dir) / (e.subject_id + ".explanation.json")).string());
    if (labels.empty()) {
        save_frequency_csv(exps.frequency, (fs::path(out_dir) / "frequency.csv").string());
    } else {
        std::ofstream out(fs::path(out_dir) / "frequency.csv");
        out << "region,count,name\n";
        for (const auto& [region, count] : exps.frequency) {
            auto it = labels.find(region);
            out << region << "," << count << "," << (it == labels.end() ? "" : it->second)
                << "\n";
        }
    }
    json echo = {{"checkpoint", ckpt_path}, {"dataset", dataset_dir},
                 {"target_size", target_size}, {"rollouts", opt.rollouts},
                 {"c_uct", opt.c_uct},         {"epsilon", opt.epsilon},
                 {"seed", seed}};
    std::ofstream echo_out(fs::path(out_dir) / "explain_config.json");
    echo_out << echo.dump(2) << "\n";
    std::cout << "explained " << exps.per_subject.size() << " subjects, target size "
              << target_size << "\n";
    return 0;
}

int cmd_stability(const std::vector<std::string>& files, const std::string& out_path,
                  std::size_t top_n) {
    if (files.size() < 2) throw DataError("stability needs at least two region-set files");
    std::vector<std::vector<std::size_t>> sets;
    for (const auto& f : files) sets.push_back(load_region_set(f, top_n));
    std::ofstream out(out_path);
    if (!out) throw DataError("cannot open " + out_path + " for writing");
    out << "file_a,file_b,jaccard,dice\n";
    char buf[128];
    for (std::size_t i = 0; i < sets.size(); ++i)
        for (std::size_t j = 0; j < sets.size(); ++j) {
            Stability s = stability(sets[i], sets[j]);
            std::snprintf(buf, sizeof(buf), "%.17g,%.17g\n", s.jaccard, s.dice);
            out << files[i] << "," << files[j] << "," << buf;
        }
    std::cout << "wrote pairwise stability matrix for " << sets.size() << " sets to " << out_path
              << "\n";
    return 0;
}

int cmd_gradcheck(const GradCheckOptions& opt) {
    GradCheckReport report = run_gradcheck(opt);
    for (const auto& tr : report.terms) {
        std::printf("%-12s max_rel_err=%.3e coords=%zu %s\n", tr.term.c_str(), tr.max_rel_err,
                    tr.coords_checked, tr.pass ? "PASS" : "FAIL");
    }
    if (!report.all_pass) {
        std::cout << "gradcheck FAILED\n";
        return 3;
    }
    std::cout << "gradcheck passed\n";
    return 0;
}

int dispatch(const std::vector<std::string>& args) {
    CLI::App app{"PIME: prototype-based information-bottleneck brain-network classification "
                 "with MCTS explanations"};
    app.require_subcommand(1);

    // synth
    auto* synth = app.add_subcommand("synth", "generate a synthetic planted-biomarker dataset");
    SynthSpec spec;
    spec.seed = default_seed();
    std::string synth_out, planted_str = "2,5,11,17";
    synth->add_option("--out", synth_out, "output dataset directory")->required();
    synth->add_option("--n-per-class", spec.n_per_class, "subjects per class");
    synth->add_option("--regions", spec.regions, "number of regions C");
    synth->add_option("--timepoints", spec.timepoints, "timepoints T");
    synth->add_option("--planted", planted_str, "comma-separated planted region indices");
    synth->add_option("--effect-size", spec.effect_size, "planted latent amplitude");
    synth->add_option("--seed", spec.seed, "generation seed");

    // ingest
    auto* ingest = app.add_subcommand("ingest", "validate BOLD CSVs into a dataset directory");
    std::string ingest_in, ingest_out;
    int ingest_classes = 2;
    ingest->add_option("--in", ingest_in, "directory of BOLD CSV files")->required();
    ingest->add_option("--out", ingest_out, "output dataset directory")->required();
    ingest->add_option("--classes", ingest_classes, "number of classes K");

    // train
    auto* train_cmd = app.add_subcommand("train", "train a model on a dataset");
    std::string train_cfg_path, train_dataset, train_out;
    bool train_tiny = false, train_cv = false;
    TrainConfig tc_flags;
    train_cmd->add_option("--config", train_cfg_path, "config JSON (defaults otherwise)");
    train_cmd->add_option("--dataset", train_dataset, "dataset directory")->required();
    train_cmd->add_option("--out", train_out, "output directory")->required();
    auto* f_epochs = train_cmd->add_option("--epochs", tc_flags.epochs, "training epochs");
    auto* f_batch = train_cmd->add_option("--batch-size", tc_flags.batch_size, "batch size");
    auto* f_lr = train_cmd->add_option("--lr", tc_flags.lr, "learning rate");
    auto* f_seed = train_cmd->add_option("--seed", tc_flags.seed, "training seed");
    auto* f_keep = train_cmd->add_option("--keep-ratio", tc_flags.keep_ratio, "edge keep ratio");
    auto* f_folds = train_cmd->add_option("--folds", tc_flags.folds, "cross-validation folds");
    auto* f_r = train_cmd->add_option("--perturb-ratio", tc_flags.r, "node masking ratio r");
    train_cmd->add_flag("--tiny", train_tiny, "use the tiny width preset (16/32/64, d=8)");
    train_cmd->add_flag("--cv", train_cv, "also run k-fold cross-validation");

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
    std::string eval_ckpt, eval_dataset, eval_out = "metrics.json";
    std::size_t eval_folds = 1;
    eval_cmd->add_option("--checkpoint", eval_ckpt, "checkpoint JSON")->required();
    eval_cmd->add_option("--dataset", eval_dataset, "dataset directory")->required();
    eval_cmd->add_option("--out", eval_out, "metrics JSON output path");
    eval_cmd->add_option("--folds", eval_folds, "also report per-fold accuracy on this split");

    // explain
    auto* explain_cmd = app.add_subcommand("explain", "extract per-subject region subsets via MCTS");
    std::string ex_ckpt, ex_dataset, ex_out, ex_labels;
    std::size_t ex_target = 0;
    MctsOptions mcts_opt;
    std::uint64_t ex_seed = default_seed();
    explain_cmd->add_option("--checkpoint", ex_ckpt, "checkpoint JSON")->required();
    explain_cmd->add_option("--dataset", ex_dataset, "dataset directory")->required();
    explain_cmd->add_option("--out", ex_out, "output directory")->required();
    explain_cmd->add_option("--target-size", ex_target, "retained set size (default scales with C)");
    explain_cmd->add_option("--rollouts", mcts_opt.rollouts, "MCTS iterations per removal move");
    explain_cmd->add_option("--c-uct", mcts_opt.c_uct, "UCT exploration constant");
    explain_cmd->add_option("--seed", ex_seed, "search seed");
    explain_cmd->add_option("--region-labels", ex_labels, "CSV of 'index,name' region labels");

    // stability
    auto* stab_cmd = app.add_subcommand("stability", "pairwise jaccard/dice of region sets");
    std::vector<std::string> stab_files;
    std::string stab_out = "stability.csv";
    std::size_t stab_top = 10;
    stab_cmd->add_option("files", stab_files, "region-set files (frequency CSVs or index lists)")
        ->required();
    stab_cmd->add_option("--out", stab_out, "output CSV path");
    stab_cmd->add_option("--top", stab_top, "top-N regions taken from frequency CSVs");

    // gradcheck
    auto* gc_cmd = app.add_subcommand("gradcheck", "finite-difference check of all loss terms");
    GradCheckOptions gc_opt;
    gc_cmd->add_option("--graphs", gc_opt.n_graphs, "number of random graphs");
    gc_cmd->add_option("--seed", gc_opt.seed, "rng seed");
    gc_cmd->add_option("--tol", gc_opt.tol, "relative error tolerance");
    gc_cmd->add_option("--coords", gc_opt.coords_per_graph, "sampled coordinates per term/graph");
    gc_cmd->add_option("--corrupt", gc_opt.corrupt_term,
                       "test hook: corrupt this term's analytic gradient");

    std::vector<std::string> rev(args.rbegin(), args.rend());
    try {
        app.parse(rev);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    if (*synth) {
        spec.planted_regions = parse_index_list(planted_str);
        return cmd_synth(spec, synth_out);
    }
    if (*ingest) return cmd_ingest(ingest_in, ingest_out, ingest_classes);
    if (*train_cmd) {
        TrainConfig cfg;
        cfg.seed = default_seed();
        if (!train_cfg_path.empty()) cfg = load_train_config(train_cfg_path, cfg);
        if (f_epochs->count()) cfg.epochs = tc_flags.epochs;
        if (f_batch->count()) cfg.batch_size = tc_flags.batch_size;
        if (f_lr->count()) cfg.lr = tc_flags.lr;
        if (f_seed->count()) cfg.seed = tc_flags.seed;
        if (f_keep->count()) cfg.keep_ratio = tc_flags.keep_ratio;
        if (f_folds->count()) cfg.folds = tc_flags.folds;
        if (f_r->count()) cfg.r = tc_flags.r;
        if (train_tiny) cfg.apply_tiny_preset();
        return cmd_train(cfg, train_dataset, train_out, train_cv);
    }
    if (*eval_cmd) return cmd_eval(eval_ckpt, eval_dataset, eval_out, eval_folds);
    if (*explain_cmd)
        return cmd_explain(ex_ckpt, ex_dataset, ex_out, ex_target, mcts_opt, ex_seed, ex_labels);
    if (*stab_cmd) return cmd_stability(stab_files, stab_out, stab_top);
    if (*gc_cmd) return cmd_gradcheck(gc_opt);
    return 1;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
    try {
        return dispatch(args);
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}

}  // namespace pime
