#pragma once

// Run configuration: one JSON document with a section per pipeline stage.
// Every consumer seed is derived from the root seed.

#include "mrtcn/ablation.hpp"
#include "mrtcn/arch.hpp"
#include "mrtcn/data.hpp"
#include "mrtcn/synthetic.hpp"
#include "mrtcn/train.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace mrtcn {

struct NetworkConfig {
    std::vector<std::string> towers{"t1", "t2", "t3"};
    std::size_t hidden_channels = 128;
    HeadMode head = HeadMode::Dense;
    std::size_t window_len = 30;  // frames per window
};

struct EvalConfig {
    double delta = 1.0;
    bool postprocess = true;  // duplicate merge and consecutive suppression
    std::size_t batch_size = 64;
    std::string split = "test";
    std::vector<int> rare_classes;  // empty: every event class but the dominant one in the train split
};

struct SpotConfig {
    double threshold = 0.5;
    std::string delta_grid = "5:60:5";
    std::string split = "test";
};

struct AblateConfig {
    std::vector<std::string> arms;  // empty: the seven default arms
    std::size_t loss_window = 1000;
};

struct RunConfig {
    std::uint64_t seed = 42;
    SyntheticSpec synth;
    std::vector<double> splits{0.6, 0.2, 0.2};  // train, val, test
    NetworkConfig network;
    double p0 = 0.2;
    double shift_range = 0.0;
    TrainConfig train;
    EvalConfig eval;
    SpotConfig spot;
    AblateConfig ablate;

    /// Throws a Config error naming the offending key.
    void validate() const;

    SyntheticSpec synth_spec() const;        // seed derived from the root
    SamplerConfig sampler_config() const;    // window geometry follows the network head
    TrainConfig train_config() const;        // init seed derived from the root
    NetworkSpec network_spec(std::size_t input_dim, std::size_t classes) const;
    NetworkSpec network_spec(std::size_t input_dim, std::size_t classes,
                             const std::vector<std::string>& towers) const;
    AblationSetup ablation_setup() const;
    std::vector<AblationArm> ablation_arms() const;
};

/// Missing keys keep their defaults; unknown keys and wrong types are Config
/// errors naming the dotted key.
RunConfig parse_config(std::string_view json_text);
RunConfig load_config(const std::filesystem::path& path);
/// Every key, pretty-printed; parse_config(dump_config(c)) == c.
std::string dump_config(const RunConfig& config);

/// Sets one dotted key ("train.iterations") from JSON text ("250"). Bare
/// strings that are not valid JSON are taken as string values.
void set_config_value(RunConfig& config, std::string_view key, std::string_view json_value);

/// "key  default  description" lines for every config key.
std::string config_reference();

bool operator==(const RunConfig& a, const RunConfig& b);

}  // namespace mrtcn
