#pragma once

// Tolerance-matched detection scores and spotting average precision.

#include "mrtcn/data.hpp"
#include "mrtcn/infer.hpp"

#include <string>
#include <utility>
#include <vector>

namespace mrtcn {

struct ClassScore {
    int class_id = 0;
    std::string name;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
};

struct EvalReport {
    double delta = 1.0;
    std::vector<ClassScore> classes;  // every event class, background excluded
    double macro_precision = 0.0;     // over classes with ground truth
    double macro_recall = 0.0;
    double macro_f1 = 0.0;

    /// `class,precision,recall,f1,tp,fp,fn` rows plus an `average` row.
    std::string to_csv() const;
};

/// Greedy one-to-one matching of timestamps: predictions in the given order
/// each take the nearest unclaimed target within delta (earlier target on
/// ties). Returns, per prediction, the matched target index or -1.
std::vector<int> greedy_match(const std::vector<double>& predictions, const std::vector<double>& targets,
                              double delta);

/// Background predictions are ignored.
EvalReport tolerance_f1(const std::vector<EventPrediction>& preds, const AnnotationTrack& gts, double delta);

/// Maximum number of one-to-one pairs with |p - g| <= delta, by exhaustive
/// search. At most 12 predictions and 12 targets.
std::size_t brute_force_match(const std::vector<double>& predictions, const std::vector<double>& targets,
                              double delta);

/// (recall, precision) after each group of equal-confidence candidates,
/// candidates ordered by confidence descending then earlier centre.
std::vector<std::pair<double, double>> pr_curve(const std::vector<SpotCandidate>& spots,
                                                const AnnotationTrack& anchors, int class_id, double delta);

/// All-points interpolated AP; 0 when the class has no anchors.
double spotting_ap(const std::vector<SpotCandidate>& spots, const AnnotationTrack& anchors, int class_id,
                   double delta);

struct MapResult {
    double delta = 0.0;
    std::vector<double> ap;  // per class, index 0 (background) unused
    double map = 0.0;        // mean over classes with anchors
};

MapResult spotting_map(const std::vector<SpotCandidate>& spots, const AnnotationTrack& anchors, double delta);

/// Mean of mAP over the grid; also returns the per-delta values.
double average_map(const std::vector<SpotCandidate>& spots, const AnnotationTrack& anchors,
                   const std::vector<double>& delta_grid, std::vector<MapResult>* per_delta = nullptr);

/// "start:stop:step" (inclusive stop) or a comma-separated list.
std::vector<double> parse_delta_grid(const std::string& text);

/// `delta,map`.
std::string map_curve_csv(const std::vector<MapResult>& per_delta);
/// `class,delta,recall,precision` for every event class.
std::string pr_curve_csv(const std::vector<SpotCandidate>& spots, const AnnotationTrack& anchors, double delta);

}  // namespace mrtcn
