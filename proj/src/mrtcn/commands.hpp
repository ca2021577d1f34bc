#pragma once

// Pipeline commands behind the C API and the CLI. Each writes its artifacts
// into an output directory and returns a short printable summary.

#include "mrtcn/config.hpp"
#include "mrtcn/gradcheck.hpp"
#include "mrtcn/infer.hpp"
#include "mrtcn/metrics.hpp"

#include <filesystem>
#include <functional>
#include <string>

namespace mrtcn {

/// <dir>/<split>.fseq and <dir>/<split>.jsonl.
std::filesystem::path features_path(const std::filesystem::path& dir, const std::string& split);
std::filesystem::path annotations_path(const std::filesystem::path& dir, const std::string& split);
Dataset load_split(const std::filesystem::path& dir, const std::string& split);

using LogSink = std::function<void(const std::string&)>;

/// Raw argmax and post-processed reports on one split.
struct DenseEvaluation {
    ProbabilityCurve curve;
    std::vector<EventPrediction> raw;
    std::vector<EventPrediction> processed;  // empty when post-processing is off
    EvalReport raw_report;
    EvalReport report;  // the configured pipeline
};

/// Rare classes from the config, or the default derived from `train_track`.
std::set<int> rare_classes(const EvalConfig& cfg, const AnnotationTrack& train_track);
DenseEvaluation evaluate_dense(Network& net, const Dataset& data, const EvalConfig& cfg,
                               const std::set<int>& rare);

struct SpotEvaluation {
    ProbabilityCurve curve;
    std::vector<SpotCandidate> spots;
    std::vector<double> grid;
    std::vector<MapResult> per_delta;
    double average_map = 0.0;
};

SpotEvaluation evaluate_spotting(Network& net, const Dataset& data, const SpotConfig& cfg, std::size_t batch_size);

/// train/val/test feature and annotation files plus the resolved config.
std::string cmd_synth(const RunConfig& cfg, const std::filesystem::path& out_dir);

/// checkpoint.ttck and loss.csv (and val_f1.csv with eval_every). With a
/// resume checkpoint, training continues from its iteration and the trace
/// holds only the new iterations.
std::string cmd_train(const RunConfig& cfg, const std::filesystem::path& data_dir,
                      const std::filesystem::path& out_dir, const std::filesystem::path& resume = {},
                      const LogSink& log = {});

/// eval.csv.
std::string cmd_eval(const RunConfig& cfg, const std::filesystem::path& checkpoint,
                     const std::filesystem::path& data_dir, const std::filesystem::path& out_dir);

/// spots.csv, map_curve.csv and pr_curve.csv.
std::string cmd_spot(const RunConfig& cfg, const std::filesystem::path& checkpoint,
                     const std::filesystem::path& data_dir, const std::filesystem::path& out_dir);

struct RfReport {
    std::string table;
    bool agree = true;
};

/// Per tower: layer output lengths, rf, jump, left offset, and whether the
/// analytic influence sets equal the perturbation probe.
RfReport cmd_rf(const RunConfig& cfg, bool first_block_only = false);

struct GradcheckReport {
    std::string table;
    bool passed = true;
};

GradcheckReport cmd_gradcheck(std::uint64_t seed, const GradCheckRegistry& registry = GradCheckRegistry::builtin());

/// ablation.csv and loss_<arm>.csv per configuration.
std::string cmd_ablate(const RunConfig& cfg, const std::filesystem::path& data_dir,
                       const std::filesystem::path& out_dir, const LogSink& log = {});

}  // namespace mrtcn
