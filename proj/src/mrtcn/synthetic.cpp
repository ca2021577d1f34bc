#include "mrtcn/synthetic.hpp"

#include "mrtcn/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <set>

namespace mrtcn {

namespace {

long frames_for(double seconds, double fps) { return std::lround(seconds * fps); }

}  // namespace

void SyntheticSpec::validate() const {
    require(num_classes >= 2, ErrorKind::Config, "synth.num_classes must be at least 2");
    require(feature_dim >= 1, ErrorKind::Config, "synth.feature_dim must be positive");
    require(fps > 0.0 && std::isfinite(fps), ErrorKind::Config, "synth.fps must be positive");
    require(duration_sec >= 1, ErrorKind::Config, "synth.duration_sec must be positive");
    require(std::abs(fps * duration_sec - std::round(fps * duration_sec)) < 1e-9, ErrorKind::Config,
            "synth.fps * synth.duration_sec must be a whole number of frames");
    require(pattern_frames.size() == num_classes - 1, ErrorKind::Config,
            "synth.pattern_frames needs one duration per event class");
    std::set<std::size_t> distinct(pattern_frames.begin(), pattern_frames.end());
    require(distinct.size() == pattern_frames.size(), ErrorKind::Config,
            "synth.pattern_frames must be distinct across classes");
    require(*distinct.begin() >= 1, ErrorKind::Config, "synth.pattern_frames must be positive");
    require(static_cast<double>(jitter_frames) < fps, ErrorKind::Config,
            "synth.jitter_frames must stay below one second of frames");
    require(noise_sigma >= 0.0, ErrorKind::Config, "synth.noise_sigma must be non-negative");
    require(min_gap_sec >= 0, ErrorKind::Config, "synth.min_gap_sec must be non-negative");
}

SyntheticSpec SyntheticSpec::dense(std::uint64_t seed) {
    SyntheticSpec s;
    s.seed = seed;
    return s;
}

SyntheticSpec SyntheticSpec::sparse(std::uint64_t seed) {
    SyntheticSpec s;
    s.fps = 2.0;
    s.duration_sec = 36000;
    s.events_per_class = 200;
    s.jitter_frames = 1;
    s.min_gap_sec = 20;
    s.seed = seed;
    return s;
}

SyntheticData gen_synthetic(const SyntheticSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);
    const std::size_t l = spec.feature_dim;
    const std::size_t event_classes = spec.num_classes - 1;

    std::vector<std::vector<double>> directions(event_classes, std::vector<double>(l));
    for (auto& dir : directions) {
        double norm = 0.0;
        for (double& v : dir) {
            v = rng.normal();
            norm += v * v;
        }
        norm = std::sqrt(norm);
        for (double& v : dir) {
            v /= norm;
        }
    }

    const std::size_t n_events = event_classes * spec.events_per_class;
    const std::size_t max_dur = *std::max_element(spec.pattern_frames.begin(), spec.pattern_frames.end());
    const long gap = static_cast<long>(std::ceil(static_cast<double>(max_dur + spec.jitter_frames) / spec.fps)) +
                     spec.min_gap_sec;
    const long margin = static_cast<long>(std::ceil(static_cast<double>(max_dur) / spec.fps)) + 1;
    const long used = n_events == 0 ? 0 : static_cast<long>(n_events - 1) * gap;
    const long slack = spec.duration_sec - 2 * margin - used - 1;
    if (slack < 0) {
        fail(ErrorKind::Config, std::to_string(n_events) + " events with a " + std::to_string(gap) +
                                    " s spacing do not fit in " + std::to_string(spec.duration_sec) + " s");
    }

    std::vector<long> offsets(n_events);
    for (long& o : offsets) {
        o = static_cast<long>(rng.below(static_cast<std::uint64_t>(slack) + 1));
    }
    std::sort(offsets.begin(), offsets.end());

    std::vector<int> classes;
    classes.reserve(n_events);
    for (std::size_t c = 1; c <= event_classes; ++c) {
        classes.insert(classes.end(), spec.events_per_class, static_cast<int>(c));
    }
    for (std::size_t i = n_events; i > 1; --i) {
        std::swap(classes[i - 1], classes[rng.below(i)]);
    }

    SyntheticData out;
    const std::size_t frames = static_cast<std::size_t>(frames_for(spec.duration_sec, spec.fps));
    out.annotations.duration_sec = spec.duration_sec;
    out.annotations.class_names.push_back("background");
    for (std::size_t c = 1; c <= event_classes; ++c) {
        out.annotations.class_names.push_back("class" + std::to_string(c));
    }

    std::vector<double> signal(frames * l, 0.0);
    for (std::size_t i = 0; i < n_events; ++i) {
        const int second = static_cast<int>(margin + offsets[i] + static_cast<long>(i) * gap);
        const int cls = classes[i];
        const long jitter = static_cast<long>(rng.below(spec.jitter_frames + 1));
        const long dur = static_cast<long>(spec.pattern_frames[static_cast<std::size_t>(cls - 1)]);
        const long centre = frames_for(second, spec.fps) + jitter;
        const long begin = centre - dur / 2;
        const std::vector<double>& dir = directions[static_cast<std::size_t>(cls - 1)];
        for (long k = 0; k < dur; ++k) {
            const double env =
                spec.amplitude * std::sin(std::numbers::pi * (static_cast<double>(k) + 0.5) / static_cast<double>(dur));
            double* row = signal.data() + static_cast<std::size_t>(begin + k) * l;
            for (std::size_t d = 0; d < l; ++d) {
                row[d] += env * dir[d];
            }
        }
        out.annotations.events.push_back({second, cls});
        out.spans.push_back({begin, begin + dur, cls});
    }
    out.annotations.normalize();

    out.features.frames = frames;
    out.features.dim = l;
    out.features.fps = static_cast<float>(spec.fps);
    out.features.source_id = "synthetic-" + std::to_string(spec.seed);
    out.features.values.resize(frames * l);
    for (std::size_t i = 0; i < frames * l; ++i) {
        const double noise = spec.noise_sigma > 0.0 ? spec.noise_sigma * rng.normal() : 0.0;
        out.features.values[i] = static_cast<float>(signal[i] + noise);
    }
    return out;
}

std::vector<SyntheticData> split_contiguous(const SyntheticData& data, const std::vector<double>& fractions) {
    require(!fractions.empty(), ErrorKind::Config, "split fractions are empty");
    double total = 0.0;
    for (double f : fractions) {
        require(f > 0.0, ErrorKind::Config, "split fractions must be positive");
        total += f;
    }
    require(std::abs(total - 1.0) < 1e-9, ErrorKind::Config, "split fractions must sum to 1");

    const int duration = data.annotations.duration_sec;
    const double fps = static_cast<double>(data.features.fps);
    const std::size_t l = data.features.dim;
    std::vector<SyntheticData> parts;
    double acc = 0.0;
    int start = 0;
    for (std::size_t p = 0; p < fractions.size(); ++p) {
        acc += fractions[p];
        const int end = p + 1 == fractions.size() ? duration : static_cast<int>(std::floor(acc * duration + 1e-9));
        require(end > start, ErrorKind::Config, "split part " + std::to_string(p) + " is empty");
        SyntheticData part;
        const long f0 = frames_for(start, fps);
        const long f1 = std::min<long>(frames_for(end, fps), static_cast<long>(data.features.frames));
        part.features.frames = static_cast<std::size_t>(f1 - f0);
        part.features.dim = l;
        part.features.fps = data.features.fps;
        part.features.source_id = data.features.source_id + "-part" + std::to_string(p);
        part.features.values.assign(data.features.values.begin() + f0 * static_cast<long>(l),
                                    data.features.values.begin() + f1 * static_cast<long>(l));
        part.annotations.duration_sec = end - start;
        part.annotations.class_names = data.annotations.class_names;
        for (const AnnotatedEvent& e : data.annotations.events) {
            if (e.second >= start && e.second < end) {
                part.annotations.events.push_back({e.second - start, e.class_id});
            }
        }
        for (const PlantedSpan& s : data.spans) {
            if (s.begin >= f0 && s.end <= f1) {
                part.spans.push_back({s.begin - f0, s.end - f0, s.class_id});
            }
        }
        parts.push_back(std::move(part));
        start = end;
    }
    return parts;
}

}  // namespace mrtcn
