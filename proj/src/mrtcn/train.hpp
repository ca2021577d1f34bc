#pragma once

// Training loop, loss traces and checkpoints.

#include "mrtcn/arch.hpp"
#include "mrtcn/data.hpp"
#include "mrtcn/ops.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace mrtcn {

struct TrainConfig {
    double lr = 1e-3;
    std::size_t batch_size = 32;
    std::size_t iterations = 5000;
    std::vector<double> class_weights;  // empty: every class weighs 1
    std::uint64_t seed = 42;            // parameter initialisation
    int precision = 64;                 // 32 keeps parameters and optimizer state in float
    std::size_t eval_every = 0;         // 0 disables the periodic callback
    LossNormalization normalization = LossNormalization::WeightedMean;
    bool record_time = false;           // false writes 0 in the ms column
    std::size_t log_every = 0;          // progress lines on stderr; 0 disables

    void validate(std::size_t num_classes) const;
    std::vector<double> weights(std::size_t num_classes) const;
};

struct LossPoint {
    std::size_t iteration = 0;
    double loss = 0.0;
    double ms = 0.0;

    friend bool operator==(const LossPoint&, const LossPoint&) = default;
};

struct LossTrace {
    std::vector<LossPoint> points;

    /// Iterations must be strictly increasing.
    void append(LossPoint p);
    /// Mean loss over the trailing `count` points (all if fewer).
    double tail_mean(std::size_t count) const;
    std::string to_csv() const;
    void save(const std::filesystem::path& path) const;

    friend bool operator==(const LossTrace&, const LossTrace&) = default;
};

/// Everything needed to continue training bit-exactly.
struct Checkpoint {
    NetworkSpec spec;
    int precision = 64;
    std::uint64_t iteration = 0;
    std::string rng_state;
    NetworkParams params;
};

/// "TTCK" 0x01, u64 spec hash, u8 precision, spec string, u64 iteration,
/// rng state string, then per parameter (value, adam_m, adam_v, step count)
/// and per batch norm (running mean, running var); tensors are u64 element
/// counts followed by f64 (or f32 at precision 32) values.
std::string encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(std::string_view bytes);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);
/// Loads and checks the stored spec hash against `expected`.
Checkpoint load_checkpoint(const std::filesystem::path& path, const NetworkSpec& expected);

/// Forward, weighted loss, backward and Adam update on one batch. When every
/// target has weight zero the parameters and optimizer state are left alone.
/// Throws a Numeric error naming `iteration` if the loss is not finite.
double train_step(Network& net, const Batch& batch, std::span<const double> class_weights, const TrainConfig& cfg,
                  std::size_t iteration);

class Trainer {
public:
    /// The dataset must outlive the trainer.
    Trainer(NetworkSpec spec, const Dataset& data, SamplerConfig sampler, TrainConfig cfg);
    Trainer(const Checkpoint& ckpt, const Dataset& data, SamplerConfig sampler, TrainConfig cfg);

    /// One sample-forward-backward-update iteration; returns the batch loss.
    double step();
    /// One iteration on a caller-supplied batch.
    double step(const Batch& batch);
    /// Runs until `cfg.iterations` total iterations; `on_eval` fires every
    /// eval_every iterations.
    LossTrace run(const std::function<void(std::size_t, Network&)>& on_eval = {});

    Checkpoint checkpoint() const;
    Network& network() { return net_; }
    std::size_t iteration() const { return iteration_; }
    const TrainConfig& config() const { return cfg_; }
    WindowSampler& sampler() { return sampler_; }

private:
    Network net_;
    WindowSampler sampler_;
    TrainConfig cfg_;
    std::vector<double> weights_;
    std::size_t iteration_ = 0;
};

/// Rounds parameter values, Adam moments and batch-norm statistics to float.
void round_to_float(NetworkParams& params);

}  // namespace mrtcn
