#pragma once

// Tower-combination ablation: trains each configuration on the same data and
// seeds and scores raw network output (no merging or suppression).

#include "mrtcn/metrics.hpp"
#include "mrtcn/train.hpp"

#include <functional>
#include <string>
#include <vector>

namespace mrtcn {

struct AblationArm {
    std::string name;                 // e.g. "T1+T2+T3"
    std::vector<std::string> towers;  // e.g. {"t1", "t2", "t3"}
};

/// T1, T2, T3, T1+T1+T1, T2+T2+T2, T3+T3+T3, T1+T2+T3.
std::vector<AblationArm> default_ablation_arms();
/// Parses "t1+t2+t3" style names.
AblationArm parse_ablation_arm(const std::string& text);

struct AblationSetup {
    std::size_t hidden_channels = 128;
    SamplerConfig sampler;
    TrainConfig train;
    double delta = 1.0;
    std::size_t loss_window = 1000;  // trailing iterations averaged into final_loss
};

struct AblationRow {
    AblationArm arm;
    EvalReport report;
    double final_loss = 0.0;
    LossTrace trace;
};

/// Raw argmax F1: no duplicate merge (first window's row) and no suppression.
EvalReport ablation_report(Network& net, const Dataset& eval_data, double delta);

std::vector<AblationRow> run_ablation(const std::vector<AblationArm>& arms, const Dataset& train_data,
                                      const Dataset& eval_data, const AblationSetup& setup,
                                      const std::function<void(const AblationRow&)>& on_row = {});

/// `configuration,<class f1 columns>,average,final_loss`.
std::string ablation_csv(const std::vector<AblationRow>& rows);

}  // namespace mrtcn
