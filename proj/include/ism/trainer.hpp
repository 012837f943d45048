#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "ism/data.hpp"
#include "ism/haze.hpp"
#include "ism/losses.hpp"
#include "ism/models.hpp"
#include "ism/optim.hpp"

namespace ism {

struct TrainConfig {
    size_t epochs = 40;
    size_t batch = 32;
    double lr = 0.00035;
    // Staircase decay at floor(fraction * epochs); mirrors 40/90 of 120.
    std::vector<double> milestones = {1.0 / 3.0, 0.75};
    double decay = 0.1;
    LossWeights weights;
    uint64_t model_seed = 1;
    uint64_t data_seed = 2;
    uint64_t haze_seed = 3;
    bool use_isl = true;
    bool use_idkl = true;
    bool source_ce_replay = false;
    ExtractorConfig extractor;       // init_seed is overridden by model_seed
    size_t discriminator_hidden = 32;
    // Two-time-scale updates: the discriminator trains faster than the
    // student so its boundaries stay sharp enough to guide the KL term.
    double disc_lr_scale = 8.0;
};

void validate(const TrainConfig& config);

double lr_at(size_t epoch, const TrainConfig& config);

struct EpochRecord {
    size_t epoch = 0;
    double lr = 0.0;
    double ce = 0.0;
    double isl = 0.0;
    double idkl = 0.0;
    double disc = 0.0;
    double total = 0.0;  // ce + lambda1*isl + lambda2*idkl from the logged means
    uint64_t teacher_checksum = 0;
    uint64_t student_checksum = 0;
};

struct RunLog {
    std::vector<EpochRecord> epochs;
    uint64_t final_checksum = 0;
};

void write_runlog(const RunLog& log, const std::filesystem::path& path);

// Supervised pretraining with smoothed cross-entropy; the returned
// checkpoint seeds both teacher and student.
Checkpoint pretrain(const DatasetSplit& source, const TrainConfig& config, RunLog* log = nullptr);

struct RoundLosses {
    double disc = 0.0;
    double isl = 0.0;
    double idkl = 0.0;
    double ce = 0.0;  // replay term, zero when replay is off
};

// One alternating step: the discriminator learns to separate teacher(clear)
// from student(hazy) features, then the student is updated against the
// refreshed discriminator with the enabled loss terms.
RoundLosses adversarial_round(const Mlp& teacher, Mlp& student, Discriminator& disc,
                              const Tensor& clear_batch, const Tensor& hazy_batch,
                              const TrainConfig& config, Adam& disc_opt, Adam& student_opt,
                              const Tensor* replay_pixels = nullptr,
                              const Tensor* replay_targets = nullptr,
                              const ClassifierHead* replay_head = nullptr);

struct AdaptResult {
    Checkpoint student;
    RunLog log;
};

// Target-domain adaptation: teacher frozen from the checkpoint, student a
// trainable copy, fresh discriminator; clear/hazy batches stay index-paired.
// `source_for_replay` is required iff config.source_ce_replay is set.
// `student_init` optionally seeds the student from a different checkpoint
// of identical architecture (default: copy of the teacher).
AdaptResult adapt(const Checkpoint& pretrained, const DatasetSplit& target_clear,
                  const DepthSource& depth, const HazeParams& haze, const TrainConfig& config,
                  const DatasetSplit* source_for_replay = nullptr,
                  const Checkpoint* student_init = nullptr);

}  // namespace ism
