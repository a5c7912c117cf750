// Copyright (c) 2026 the wbcdetect authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "core/data.hpp"
#include "core/model.hpp"
#include "core/rpn.hpp"

namespace wbc {

struct TrainingConfig {
    double lr_rpn = 1e-4;      // RPN parameters
    double lr_cnn = 1e-5;      // backbone parameters while unfrozen
    double lr_head = 1e-2;     // detector-head FC branches
    double lr_pretrain = 5e-2; // synthetic pretraining stage
    int max_epochs = 15;       // per stage

    int minibatch = 256;       // sampled anchors per image step
    double pos_fraction = 0.5;
    double pos_iou = 0.7;
    double neg_iou = 0.3;

    // n_cls/n_reg <= 0 resolve at runtime to the minibatch size and the
    // number of anchor locations respectively.
    LossConfig loss{10.0, 0, 0};
    ProposalConfig proposals;
    ModelConfig model;

    int roi_batch = 32;        // sampled proposals per image step
    double roi_fg_fraction = 0.25;
    double roi_fg_iou = 0.5;

    // stages 3 and 4 keep the shared layers fixed
    std::array<bool, 4> freeze_backbone{{false, false, true, true}};

    std::uint64_t seed = 0;
};

struct StageReport {
    std::string name;
    std::vector<double> epoch_losses;  // mean loss per epoch
    double seconds = 0.0;
    bool diverged = false;
};

// True when the series contains `run_length` consecutive strictly
// increasing epoch losses (the divergence guard).
bool has_divergent_run(const std::vector<double>& losses, int run_length = 5);

// ---------------------------------------------------------------------------
// pretraining (stands in for the large-corpus pretrained model)

struct PatchSet {
    std::vector<Tensor> patches;  // [3,32,32]
    std::vector<int> labels;      // 1 = cell, 0 = background
};

// Cuts cell-centered positives and non-overlapping background negatives.
PatchSet extract_patches(const std::vector<Sample>& samples, std::uint64_t seed);

struct PretrainResult {
    Checkpoint backbone;  // stage "pretrain"
    double train_accuracy = 0.0;
    double holdout_accuracy = 0.0;
    StageReport report;
};

// Trains backbone + a temporary patch classifier; fails below 60% held-out
// accuracy after max_epochs.
PretrainResult pretrain_backbone(const PatchSet& patches, const TrainingConfig& cfg);

// ---------------------------------------------------------------------------
// alternating training

struct TrainRunResult {
    std::array<Checkpoint, 4> stage_checkpoints;
    Checkpoint final_checkpoint;  // stage "final" (equals stage 4 values)
    std::vector<StageReport> stages;
};

// The 4-step schedule: (1) RPN over a fresh copy of the pretrained
// backbone; (2) detector head over a second pretrained copy, fed by
// stage-1 proposals; (3) RPN retrained with the shared backbone fixed;
// (4) detector head fine-tuned with the shared backbone still fixed.
TrainRunResult alternating_train(const std::vector<Sample>& train_set,
                                 const Checkpoint& pretrained_backbone,
                                 const TrainingConfig& cfg);

struct TransferResult {
    Checkpoint checkpoint;  // stage "transfer"
    std::vector<StageReport> stages;
};

// Backbone frozen; RPN and detector-head parameters retrained on new data.
TransferResult transfer_learn(const Checkpoint& checkpoint,
                              const std::vector<Sample>& train_set,
                              const TrainingConfig& cfg);

// Loads every sample behind a manifest into memory.
std::vector<Sample> load_samples(const std::vector<ManifestEntry>& entries);

}  // namespace wbc
