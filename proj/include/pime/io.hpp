#pragma once

#include <string>

#include "pime/trainer.hpp"

namespace pime {

// Config JSON mirrors TrainConfig field names; unknown keys are rejected.
TrainConfig load_train_config(const std::string& path);
TrainConfig load_train_config(const std::string& path, TrainConfig base);
void save_train_config(const TrainConfig& cfg, const std::string& path);
TrainConfig train_config_from_json_text(const std::string& text);
TrainConfig train_config_from_json_text(const std::string& text, TrainConfig base);
std::string train_config_to_json_text(const TrainConfig& cfg);

// Checkpoint: JSON header (shapes, config, epoch, RNG streams) plus all
// parameter and optimizer values as decimal arrays. load(save(p)) == p.
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

void save_history_csv(const TrainHistory& history, const std::string& path);

}  // namespace pime
