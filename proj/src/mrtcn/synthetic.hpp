#pragma once

// Planted-event synthetic data: Gaussian background noise plus, per event, a
// class-specific direction in feature space modulated by a half-sine envelope
// of the class's characteristic duration.

#include "mrtcn/data.hpp"

#include <cstdint>
#include <vector>

namespace mrtcn {

struct SyntheticSpec {
    std::size_t num_classes = 4;  // including background
    std::size_t feature_dim = 16;
    double fps = 10.0;
    int duration_sec = 36000;
    std::size_t events_per_class = 2000;
    std::vector<std::size_t> pattern_frames{3, 8, 15};  // one per event class, distinct
    std::size_t jitter_frames = 9;                      // pattern centre offset within its second
    double noise_sigma = 0.25;
    double amplitude = 1.0;
    int min_gap_sec = 2;
    std::uint64_t seed = 42;

    void validate() const;
    /// Dense defaults with the given seed.
    static SyntheticSpec dense(std::uint64_t seed = 42);
    /// One event per ~60 s at 2 fps with long patterns, for the spotting regime.
    static SyntheticSpec sparse(std::uint64_t seed = 42);
};

/// Frames [begin, end) carrying the planted pattern of one event.
struct PlantedSpan {
    long begin = 0;
    long end = 0;
    int class_id = 0;
};

struct SyntheticData {
    FeatureSequence features;
    AnnotationTrack annotations;
    std::vector<PlantedSpan> spans;
};

SyntheticData gen_synthetic(const SyntheticSpec& spec);

/// Contiguous second ranges of one dataset, in order, cut by the given
/// fractions (which must sum to 1). Event seconds are rebased to each part.
std::vector<SyntheticData> split_contiguous(const SyntheticData& data, const std::vector<double>& fractions);

}  // namespace mrtcn
