#include "pime/io.hpp"

#include <cstdio>
#include <fstream>

#include <json.hpp>

using nlohmann::json;

namespace pime {

namespace {

json config_to_json(const TrainConfig& c) {
    return json{{"epochs", c.epochs},
                {"batch_size", c.batch_size},
                {"lr", c.lr},
                {"lr_decay", c.lr_decay},
                {"lr_decay_every", c.lr_decay_every},
                {"weight_decay", c.weight_decay},
                {"r", c.r},
                {"beta", c.beta},
                {"lambda1", c.lambda1},
                {"lambda2", c.lambda2},
                {"lambda_cons", c.lambda_cons},
                {"lambda_sparse", c.lambda_sparse},
                {"lambda_div", c.lambda_div},
                {"delta", c.delta},
                {"protos_per_class", c.protos_per_class},
                {"latent_d", c.latent_d},
                {"gin_widths", c.gin_widths},
                {"keep_ratio", c.keep_ratio},
                {"seed", c.seed},
                {"folds", c.folds},
                {"shared_readout", c.shared_readout}};
}

TrainConfig config_from_json(const json& j, TrainConfig c = TrainConfig{}) {
    json known = config_to_json(TrainConfig{});
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!known.contains(it.key()))
            throw DataError("config: unknown key '" + it.key() + "'");
    if (j.contains("epochs")) c.epochs = j["epochs"].get<std::size_t>();
    if (j.contains("batch_size")) c.batch_size = j["batch_size"].get<std::size_t>();
    if (j.contains("lr")) c.lr = j["lr"].get<double>();
    if (j.contains("lr_decay")) c.lr_decay = j["lr_decay"].get<double>();
    if (j.contains("lr_decay_every")) c.lr_decay_every = j["lr_decay_every"].get<std::size_t>();
    if (j.contains("weight_decay")) c.weight_decay = j["weight_decay"].get<double>();
    if (j.contains("r")) c.r = j["r"].get<double>();
    if (j.contains("beta")) c.beta = j["beta"].get<double>();
    if (j.contains("lambda1")) c.lambda1 = j["lambda1"].get<double>();
    if (j.contains("lambda2")) c.lambda2 = j["lambda2"].get<double>();
    if (j.contains("lambda_cons")) c.lambda_cons = j["lambda_cons"].get<double>();
    if (j.contains("lambda_sparse")) c.lambda_sparse = j["lambda_sparse"].get<double>();
    if (j.contains("lambda_div")) c.lambda_div = j["lambda_div"].get<double>();
    if (j.contains("delta")) c.delta = j["delta"].get<double>();
    if (j.contains("protos_per_class")) c.protos_per_class = j["protos_per_class"].get<std::size_t>();
    if (j.contains("latent_d")) c.latent_d = j["latent_d"].get<std::size_t>();
    if (j.contains("gin_widths")) c.gin_widths = j["gin_widths"].get<std::vector<std::size_t>>();
    if (j.contains("keep_ratio")) c.keep_ratio = j["keep_ratio"].get<double>();
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("folds")) c.folds = j["folds"].get<std::size_t>();
    if (j.contains("shared_readout")) c.shared_readout = j["shared_readout"].get<bool>();
    return c;
}

json tensor_to_json(const Tensor& t) {
    json shape = json::array();
    for (std::size_t d : t.shape()) shape.push_back(d);
    json data = json::array();
    for (std::size_t i = 0; i < t.size(); ++i) data.push_back(t[i]);
    return json{{"shape", shape}, {"data", data}};
}

Tensor tensor_from_json(const json& j) {
    std::vector<std::size_t> shape = j.at("shape").get<std::vector<std::size_t>>();
    std::vector<double> data = j.at("data").get<std::vector<double>>();
    return Tensor(std::move(shape), std::move(data));
}

json paramset_to_json(const ParamSet& p) {
    json arr = json::array();
    for (const auto& e : p) {
        json ej = tensor_to_json(e.tensor);
        ej["name"] = e.name;
        arr.push_back(ej);
    }
    return arr;
}

ParamSet paramset_from_json(const json& j) {
    ParamSet p;
    for (const auto& e : j) p.add(e.at("name").get<std::string>(), tensor_from_json(e));
    return p;
}

json model_cfg_to_json(const ModelConfig& m) {
    return json{{"regions", m.regions},
                {"num_classes", m.num_classes},
                {"latent_d", m.latent_d},
                {"protos_per_class", m.protos_per_class},
                {"gin_widths", m.gin_widths},
                {"shared_readout", m.shared_readout}};
}

ModelConfig model_cfg_from_json(const json& j) {
    ModelConfig m;
    m.regions = j.at("regions").get<std::size_t>();
    m.num_classes = j.at("num_classes").get<std::size_t>();
    m.latent_d = j.at("latent_d").get<std::size_t>();
    m.protos_per_class = j.at("protos_per_class").get<std::size_t>();
    m.gin_widths = j.at("gin_widths").get<std::vector<std::size_t>>();
    m.shared_readout = j.at("shared_readout").get<bool>();
    return m;
}

}  // namespace

TrainConfig train_config_from_json_text(const std::string& text, TrainConfig base) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw DataError(std::string("config: ") + e.what());
    }
    return config_from_json(j, base);
}

TrainConfig train_config_from_json_text(const std::string& text) {
    return train_config_from_json_text(text, TrainConfig{});
}

std::string train_config_to_json_text(const TrainConfig& cfg) {
    return config_to_json(cfg).dump(2) + "\n";
}

TrainConfig load_train_config(const std::string& path, TrainConfig base) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open config " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return train_config_from_json_text(text, base);
}

TrainConfig load_train_config(const std::string& path) {
    return load_train_config(path, TrainConfig{});
}

void save_train_config(const TrainConfig& cfg, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open " + path + " for writing");
    out << train_config_to_json_text(cfg);
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    json j;
    j["format"] = "pime-checkpoint-v1";
    j["model"] = model_cfg_to_json(ckpt.model_cfg);
    j["train_config"] = config_to_json(ckpt.train_cfg);
    j["epoch"] = ckpt.epoch;
    j["rng"] = {{"shuffle", ckpt.shuffle_rng}, {"noise", ckpt.noise_rng},
                {"perturb", ckpt.perturb_rng}};
    j["params"] = paramset_to_json(ckpt.params);
    j["adam"] = {{"step", ckpt.adam.step},
                 {"lr", ckpt.adam.lr},
                 {"beta1", ckpt.adam.beta1},
                 {"beta2", ckpt.adam.beta2},
                 {"eps_adam", ckpt.adam.eps_adam},
                 {"weight_decay", ckpt.adam.weight_decay},
                 {"first_moment", paramset_to_json(ckpt.adam.first_moment)},
                 {"second_moment", paramset_to_json(ckpt.adam.second_moment)}};
    std::ofstream out(path);
    if (!out) throw DataError("cannot open " + path + " for writing");
    out << j.dump(2) << "\n";
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open checkpoint " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw DataError(path + ": " + e.what());
    }
    if (!j.contains("format") || j["format"] != "pime-checkpoint-v1")
        throw DataError(path + ": not a pime checkpoint");
    Checkpoint c;
    c.model_cfg = model_cfg_from_json(j.at("model"));
    c.train_cfg = config_from_json(j.at("train_config"));
    c.epoch = j.at("epoch").get<std::size_t>();
    c.shuffle_rng = j.at("rng").at("shuffle").get<std::string>();
    c.noise_rng = j.at("rng").at("noise").get<std::string>();
    c.perturb_rng = j.at("rng").at("perturb").get<std::string>();
    c.params = paramset_from_json(j.at("params"));
    const json& a = j.at("adam");
    c.adam.step = a.at("step").get<std::size_t>();
    c.adam.lr = a.at("lr").get<double>();
    c.adam.beta1 = a.at("beta1").get<double>();
    c.adam.beta2 = a.at("beta2").get<double>();
    c.adam.eps_adam = a.at("eps_adam").get<double>();
    c.adam.weight_decay = a.at("weight_decay").get<double>();
    c.adam.first_moment = paramset_from_json(a.at("first_moment"));
    c.adam.second_moment = paramset_from_json(a.at("second_moment"));
    return c;
}

void save_history_csv(const TrainHistory& history, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open " + path + " for writing");
    out << "epoch,lr,ce,cluster,separation,ib,consistency,sparsity,diversity,total,"
           "train_acc,val_acc\n";
    char buf[512];
    for (const auto& r : history.rows) {
        const LossBreakdown& l = r.mean_loss;
        std::snprintf(buf, sizeof(buf),
                      "%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                      r.epoch, r.lr, l.ce, l.cluster, l.separation, l.ib, l.consistency,
                      l.sparsity, l.diversity, l.total, r.train_acc, r.val_acc);
        out << buf;
    }
}

}  // namespace pime
