#pragma once

#include <string>
#include <vector>

#include "steg/adam.hpp"
#include "steg/corruption.hpp"
#include "steg/losses.hpp"
#include "steg/stego_net.hpp"

namespace steg {

struct TrainConfig {
    NetConfig net;
    int steps = 20000;
    int batch_size = 2;
    double lambda_r_target = 1.5;
    double lambda_p_target = 1.0;
    double lambda_m = 1.0;
    int ramp_start = 1500;
    int ramp_end = 5000;
    std::string suite = "none";           // corruption preset used during training
    AdamConfig adam;
    std::uint64_t seed = 1;
    int checkpoint_interval = 0;          // steps between checkpoint writes, 0 = final only
    std::string checkpoint_path;          // empty disables checkpoint writes

    void validate() const;  // InvalidConfig
};

// Residual and structural weights stay at zero until ramp_start, rise
// linearly to their targets by ramp_end, and hold; the message weight is
// constant throughout.
LossWeights lambda_schedule(int step, const TrainConfig& cfg);

struct TrainLogRow {
    int step = 0;
    double lambda_r = 0, lambda_p = 0, lambda_m = 0;
    double loss_r = 0, loss_p = 0, loss_m = 0, loss_total = 0;
    double bit_acc = 0;
};

std::string log_to_csv(const std::vector<TrainLogRow>& rows);
void write_log_csv(const std::vector<TrainLogRow>& rows, const std::string& path);  // IoFailure

struct TrainResult {
    StegoParams params;
    std::vector<TrainLogRow> log;
};

// One optimizer step per log row: sample a batch of covers and fresh random
// payloads, encode, corrupt (differentiable, per-step seed derived from
// config.seed and the step index), decode, weighted loss, backward, Adam.
// Deterministic for a fixed config. Checkpoints go to checkpoint_path every
// checkpoint_interval steps and at the end; a non-finite or exploding loss
// aborts with DivergedLoss, leaving the last written checkpoint in place.
TrainResult train(const std::vector<Tensor>& images, const TrainConfig& cfg);

// loads every PNG under dir at the configured side, then trains
TrainResult train_from_dir(const std::string& dir, const TrainConfig& cfg);

}  // namespace steg
