#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "pime/cli.hpp"
#include "pime/connectome.hpp"
#include "pime/io.hpp"

using namespace pime;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path temp_dir(const std::string& name) {
    fs::path p = fs::temp_directory_path() / ("pime_cli_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

int cli(std::initializer_list<std::string> args) { return run_cli(std::vector<std::string>(args)); }

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("cli: no subcommand or bad flag is a usage error") {
    CHECK(run_cli({}) == 1);
    CHECK(cli({"train"}) == 1);                       // missing required options
    CHECK(cli({"synth", "--no-such-flag"}) == 1);
    CHECK(cli({"frobnicate"}) == 1);
}

TEST_CASE("cli: synth then train then eval round trip") {
    fs::path base = temp_dir("pipeline");
    std::string data = (base / "data").string();
    std::string run = (base / "run").string();

    CHECK(cli({"synth", "--out", data, "--n-per-class", "6", "--regions", "10", "--timepoints",
               "40", "--planted", "1,3,6", "--seed", "5"}) == 0);
    CHECK(fs::exists(fs::path(data) / "index.json"));

    CHECK(cli({"train", "--dataset", data, "--out", run, "--tiny", "--epochs", "2",
               "--batch-size", "4", "--seed", "9"}) == 0);
    fs::path ckpt = fs::path(run) / "checkpoint.json";
    REQUIRE(fs::exists(ckpt));
    CHECK(fs::exists(fs::path(run) / "history.csv"));
    CHECK(fs::exists(fs::path(run) / "config.json"));

    // saved config reflects flag overrides
    TrainConfig cfg = load_train_config((fs::path(run) / "config.json").string());
    CHECK(cfg.epochs == 2);
    CHECK(cfg.seed == 9);
    CHECK(cfg.latent_d == 8);

    std::string metrics = (base / "metrics.json").string();
    CHECK(cli({"eval", "--checkpoint", ckpt.string(), "--dataset", data, "--out", metrics}) == 0);
    std::ifstream in(metrics);
    json j = json::parse(in);
    CHECK(j["accuracy"].get<double>() >= 0.0);
    CHECK(j["accuracy"].get<double>() <= 1.0);
    CHECK(j["per_class_count"].size() == 2);
}

TEST_CASE("cli: config file layered under flags") {
    fs::path base = temp_dir("config_layering");
    std::string data = (base / "data").string();
    REQUIRE(cli({"synth", "--out", data, "--n-per-class", "4", "--regions", "8", "--timepoints",
                 "30", "--planted", "1,3", "--seed", "2"}) == 0);
    std::ofstream(base / "cfg.json") << "{\"epochs\": 5, \"batch_size\": 2, \"seed\": 4}\n";
    std::string run = (base / "run").string();
    CHECK(cli({"train", "--dataset", data, "--out", run, "--tiny", "--config",
               (base / "cfg.json").string(), "--epochs", "1"}) == 0);
    TrainConfig cfg = load_train_config((fs::path(run) / "config.json").string());
    CHECK(cfg.epochs == 1);      // flag beats config
    CHECK(cfg.batch_size == 2);  // config beats default
    CHECK(cfg.seed == 4);
}

TEST_CASE("cli: ingest validates and packages csv files") {
    fs::path base = temp_dir("ingest");
    fs::path raw = base / "raw";
    fs::create_directories(raw);
    SynthSpec spec;
    spec.n_per_class = 2;
    spec.regions = 6;
    spec.timepoints = 20;
    spec.planted_regions = {1, 4};
    spec.seed = 3;
    Dataset ds = synth_dataset(spec);
    for (const auto& rec : ds.recordings)
        save_bold_csv(rec, (raw / (rec.subject_id + ".csv")).string());
    std::string out = (base / "data").string();
    CHECK(cli({"ingest", "--in", raw.string(), "--out", out}) == 0);
    Dataset back = load_dataset(out);
    CHECK(back.recordings.size() == 4);

    // corrupt one file: data errors exit with 2
    std::ofstream(raw / "bad.csv") << "subject_id,bad,label,0\n1,2\n3\n";
    CHECK(cli({"ingest", "--in", raw.string(), "--out", out}) == 2);
}

TEST_CASE("cli: explain writes per-subject json and a frequency csv") {
    fs::path base = temp_dir("explain");
    std::string data = (base / "data").string();
    std::string run = (base / "run").string();
    REQUIRE(cli({"synth", "--out", data, "--n-per-class", "3", "--regions", "8", "--timepoints",
                 "30", "--planted", "1,5", "--seed", "8"}) == 0);
    REQUIRE(cli({"train", "--dataset", data, "--out", run, "--tiny", "--epochs", "1",
                 "--batch-size", "3", "--seed", "1"}) == 0);
    std::string ex = (base / "explain").string();
    CHECK(cli({"explain", "--checkpoint", (fs::path(run) / "checkpoint.json").string(),
               "--dataset", data, "--out", ex, "--target-size", "4", "--rollouts", "6", "--seed",
               "3"}) == 0);
    CHECK(fs::exists(fs::path(ex) / "frequency.csv"));
    std::size_t n_json = 0;
    for (const auto& entry : fs::directory_iterator(ex))
        if (entry.path().filename().string().find(".explanation.json") != std::string::npos)
            ++n_json;
    CHECK(n_json == 6);
    std::ifstream jin(fs::path(ex) / "synth_c0_000.explanation.json");
    REQUIRE(jin.good());
    json j = json::parse(jin);
    CHECK(j["retained_regions"].size() == 4);
}

TEST_CASE("cli: stability over frequency csvs and plain lists") {
    fs::path base = temp_dir("stability");
    std::ofstream(base / "a.csv") << "region,count\n5,9\n20,8\n22,7\n111,1\n";
    std::ofstream(base / "b.txt") << "5\n20\n22\n121\n";
    std::string out = (base / "stability.csv").string();
    CHECK(cli({"stability", (base / "a.csv").string(), (base / "b.txt").string(), "--out", out,
               "--top", "4"}) == 0);
    std::ifstream in(out);
    std::string header;
    REQUIRE(std::getline(in, header));
    CHECK(header == "file_a,file_b,jaccard,dice");
    std::size_t rows = 0;
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) ++rows;
    CHECK(rows == 4);  // 2x2 ordered pairs
    // shared {5,20,22}: jaccard 3/5, dice 6/8
    std::string all = slurp(out);
    CHECK(all.find("0.59999999999999998") != std::string::npos);
    CHECK(all.find("0.75") != std::string::npos);
}

TEST_CASE("cli: gradcheck subcommand on a reduced budget") {
    CHECK(cli({"gradcheck", "--graphs", "2", "--coords", "20"}) == 0);
    CHECK(cli({"gradcheck", "--graphs", "2", "--coords", "20", "--corrupt", "ce"}) == 3);
}

TEST_CASE("cli: PIME_SEED env var is the default seed") {
    fs::path base = temp_dir("env_seed");
    setenv("PIME_SEED", "1234", 1);
    std::string data = (base / "data").string();
    CHECK(cli({"synth", "--out", data, "--n-per-class", "2", "--regions", "6", "--timepoints",
               "20", "--planted", "1,4"}) == 0);
    unsetenv("PIME_SEED");
    std::ifstream in(fs::path(data) / "index.json");
    json j = json::parse(in);
    CHECK(j["spec"]["seed"] == 1234);

    setenv("PIME_SEED", "not-a-number", 1);
    CHECK(cli({"synth", "--out", data, "--n-per-class", "2", "--regions", "6", "--timepoints",
               "20", "--planted", "1,4"}) == 2);
    unsetenv("PIME_SEED");
}

TEST_CASE("cli: mismatched checkpoint and dataset is a data error") {
    fs::path base = temp_dir("mismatch");
    std::string data8 = (base / "data8").string();
    std::string data6 = (base / "data6").string();
    std::string run = (base / "run").string();
    REQUIRE(cli({"synth", "--out", data8, "--n-per-class", "3", "--regions", "8", "--timepoints",
                 "30", "--planted", "1,5", "--seed", "8"}) == 0);
    REQUIRE(cli({"synth", "--out", data6, "--n-per-class", "3", "--regions", "6", "--timepoints",
                 "30", "--planted", "1,5", "--seed", "8"}) == 0);
    REQUIRE(cli({"train", "--dataset", data8, "--out", run, "--tiny", "--epochs", "1",
                 "--batch-size", "3", "--seed", "1"}) == 0);
    CHECK(cli({"eval", "--checkpoint", (fs::path(run) / "checkpoint.json").string(), "--dataset",
               data6, "--out", (base / "m.json").string()}) == 2);
}
