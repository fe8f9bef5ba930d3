#pragma once

#include "seqcap/data.hpp"
#include "seqcap/model.hpp"

#include <map>
#include <optional>
#include <string>
#include <utility>

namespace seqcap {

struct TrainConfig {
    double learning_rate = 0.1;
    int epochs = 50;
    uint64_t seed = 1;
    // Global-norm gradient clipping. Enabled by default so small-corpus runs
    // do not blow up; set to nullopt for plain unclipped SGD.
    std::optional<double> grad_clip = 5.0;
    double init_scale = 0.08;
    double finetune_lr_factor = 0.1;
    int hidden_dim = 32;
    bool biases = true;
    // Epochs between progress lines on stderr; 0 silences them.
    int log_every = 0;
};

struct Checkpoint {
    int format_version = 1;
    ModelParams params;
    int epochs_completed = 0;
    double final_loss = 0.0;  // mean per-word train loss of the last epoch
    std::map<std::string, std::string> config_echo;

    bool operator==(const Checkpoint& o) const = default;
};

struct EpochStats {
    double train_loss = 0.0;  // mean per-word negative log-likelihood
    std::optional<double> val_loss;  // absent when the val split is empty
    double seconds = 0.0;
};

struct TrainReport {
    std::vector<EpochStats> epochs;
};

// theta <- theta - lr * grad for every entry; if clip is set and the global
// L2 norm of the gradient exceeds it, the gradient is scaled by clip/norm
// first. Throws on shape mismatch or a non-finite gradient.
void sgd_step(ModelParams& p, const ModelGrads& g, double lr, std::optional<double> clip);

// One sgd_step per (mean-pooled feature, caption) pair, visiting all train
// pairs in a freshly shuffled order each epoch. Every caption of an item is
// its own pair. Deterministic given (dataset, config, seed): the seed drives
// initialization and all shuffles through a single generator.
// The vocabulary is built from every caption in the dataset.
std::pair<Checkpoint, TrainReport> train(const Dataset& d, const TrainConfig& cfg);

// Same loop, but resuming from a checkpoint: its parameters and vocabulary
// are used as-is (cfg.hidden_dim / init_scale / biases are ignored) and
// epochs_completed accumulates.
std::pair<Checkpoint, TrainReport> train(const Dataset& d, const TrainConfig& cfg,
                                         const Checkpoint& resume_from);

// Transfer to a new corpus: the vocabulary becomes the union of the base
// model's and the target's; output-projection rows and layer-1 input
// columns of words the base model knows are copied bit-for-bit into their
// new index positions, new words keep their fresh seeded initialization,
// and training runs at learning_rate * finetune_lr_factor.
std::pair<Checkpoint, TrainReport> finetune(const Checkpoint& base, const Dataset& d,
                                            const TrainConfig& cfg);

// Builds the fine-tune starting point without training: merged vocabulary,
// transferred weights, fresh rows for new words. Exposed so the transfer
// contract is testable in isolation.
ModelParams transfer_init(const ModelParams& base, const Vocabulary& merged,
                          SeededRng& rng, double init_scale);

// Structured text, lossless: decimal values carry 17 significant digits.
void save_checkpoint(const Checkpoint& c, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace seqcap
