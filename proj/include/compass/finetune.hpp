#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "compass/backend.hpp"
#include "compass/corruption.hpp"
#include "compass/nn/optim.hpp"
#include "compass/nn/transformer.hpp"

namespace compass {

// vnmpp:      incomplete text -> masked text
// sc:         masked text     -> original text
// sc_v2:      masked text     -> completion-marker sequence ("" for m = 0)
// end_to_end: incomplete text -> original text
std::pair<std::string, std::string> build_training_pair(const CorruptedExample& example, TaskRole role,
                                                        const Markers& markers = {});

struct TrainConfig {
    TaskRole role = TaskRole::vnmpp;
    // Checkpoint directory to start from; empty means random init of `model`.
    std::string base_checkpoint;
    nn::ModelConfig model;
    nn::AdamWConfig optimizer;
    double initial_lr = 3e-5;
    int epochs = 3;
    int batch_size = 32;
    long warmup_steps = 0;
    double clip_norm = 1.0;
    CorruptionPolicy policy = CorruptionPolicy::roc();
    std::uint64_t seed = 0;
    int max_source_tokens = 256;
    int max_target_tokens = 256;
    Markers markers;

    // Throws Error(InvalidArgument) on out-of-range values.
    void validate() const;
    nlohmann::json to_json() const;
    // Missing keys keep their defaults.
    static TrainConfig from_json(const nlohmann::json& j);
};

struct TrainStep {
    long step = 0;
    int epoch = 0;
    double loss = 0.0;
    double lr = 0.0;
};

struct TrainResult {
    std::filesystem::path checkpoint;
    std::vector<TrainStep> log;
    long total_steps = 0;
};

using StepCallback = std::function<void(const TrainStep&)>;

// Corrupts each story afresh every epoch from the epoch-derived stream,
// optimizes teacher-forced NLL with AdamW under a linear schedule spanning
// all epochs, and writes manifest.json, vocab.json, weights.bin and
// train_log.jsonl ({step, loss, lr}) into out_dir.
// Throws InvalidArgument unless corpus.split == train, and
// DivergenceDetected on a non-finite loss after dumping state to
// out_dir/divergence.
TrainResult train(const Corpus& corpus, const TrainConfig& config, const std::filesystem::path& out_dir,
                  const StepCallback& on_step = {});

}  // namespace compass
