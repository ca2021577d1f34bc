#pragma once

// Sliding-window inference, duplicate merging, consecutive-event suppression
// and watershed spotting.

#include "mrtcn/arch.hpp"
#include "mrtcn/data.hpp"

#include <set>
#include <span>
#include <string>
#include <vector>

namespace mrtcn {

/// Per-second class probabilities, row-major [seconds x classes].
struct ProbabilityCurve {
    std::size_t seconds = 0;
    std::size_t classes = 0;
    double fps = 1.0;
    std::vector<double> probs;

    std::span<const double> row(std::size_t second) const { return {probs.data() + second * classes, classes}; }
    double at(std::size_t second, std::size_t cls) const { return probs[second * classes + cls]; }

    /// `second,<class names>` with 6-decimal probabilities.
    std::string to_csv(const std::vector<std::string>& class_names) const;
};

struct EventPrediction {
    int second = 0;
    int class_id = 0;
    double confidence = 0.0;
    std::vector<double> row;  // full class distribution for this second
};

struct SpotCandidate {
    double center_sec = 0.0;
    int class_id = 0;
    double confidence = 0.0;
    double start_sec = 0.0;
    double end_sec = 0.0;
};

struct InferOptions {
    std::size_t batch_size = 64;
    bool merge = true;  // dense only: fold overlapping rows with merge_duplicates
};

/// Dense heads: every window whose labeled seconds lie in the sequence, one
/// second apart; a second covered by several windows keeps the merged row (or
/// the first window's row without merging). Average heads: one window centred
/// on each second. Frames outside the sequence repeat the edge frame.
ProbabilityCurve sliding_window_predict(Network& net, const FeatureSequence& seq, const InferOptions& opts = {});

/// Row with the larger maximum; ties keep `earlier`.
std::span<const double> merge_duplicates(std::span<const double> earlier, std::span<const double> later);

/// One prediction per second: argmax class (background included).
std::vector<EventPrediction> decode_predictions(const ProbabilityCurve& curve);

/// Within each run (n > 1) of the same rare class on consecutive seconds, keeps
/// the most confident member (earliest on ties) and reassigns the others to
/// their second most likely class. Single pass.
std::vector<EventPrediction> suppress_consecutive(std::vector<EventPrediction> preds, const std::set<int>& rare_classes);

/// Rare-class default: every event class except the dominant one.
std::set<int> default_rare_classes(const AnnotationTrack& track);

/// Maximal runs of seconds with probability >= threshold; centre is the mean
/// of the run's first and last second, confidence its peak.
std::vector<SpotCandidate> watershed_spot(const ProbabilityCurve& curve, int class_id, double threshold);
/// watershed_spot over every event class, ordered by class then time.
std::vector<SpotCandidate> spot_all(const ProbabilityCurve& curve, double threshold);

/// `class,center_sec,confidence,start_sec,end_sec`.
std::string spots_to_csv(const std::vector<SpotCandidate>& spots, const std::vector<std::string>& class_names);

}  // namespace mrtcn
