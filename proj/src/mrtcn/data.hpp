#pragma once

// Feature sequences, coarse annotations, window labeling and the
// class-balanced window sampler.

#include "mrtcn/rng.hpp"
#include "mrtcn/tensor.hpp"

#include <cstdint>
#include <filesystem>
#include <istream>
#include <optional>
#include <string>
#include <vector>

namespace mrtcn {

/// Precomputed per-frame features, frame-major [frames x dim].
struct FeatureSequence {
    std::size_t frames = 0;
    std::size_t dim = 0;
    float fps = 1.0f;
    std::vector<float> values;
    std::string source_id;

    float at(std::size_t frame, std::size_t d) const { return values[frame * dim + d]; }
    /// Whole seconds covered by the frames.
    int duration_sec() const;
    void validate() const;

    friend bool operator==(const FeatureSequence&, const FeatureSequence&) = default;
};

/// "FSEQ" 0x01, u32 frames, u32 dim, f32 fps, frames*dim f32 (little endian).
void save_features(const std::filesystem::path& path, const FeatureSequence& seq);
FeatureSequence load_features(const std::filesystem::path& path);
std::string encode_features(const FeatureSequence& seq);
FeatureSequence decode_features(std::string_view bytes, const std::string& source_id = {});

struct AnnotatedEvent {
    int second = 0;
    int class_id = 0;

    friend auto operator<=>(const AnnotatedEvent&, const AnnotatedEvent&) = default;
};

/// Events at one-second resolution. class_names[0] is "background".
struct AnnotationTrack {
    std::vector<AnnotatedEvent> events;  // sorted by (second, class)
    int duration_sec = 0;
    std::vector<std::string> class_names;

    std::size_t num_classes() const { return class_names.size(); }
    /// -1 when unknown.
    int class_id(const std::string& name) const;
    std::vector<std::size_t> class_counts() const;
    /// Class holding at least half of all events (the Play-like default), or -1.
    int dominant_class() const;
    /// Sorts the events and checks ranges and duplicates.
    void normalize();

    friend bool operator==(const AnnotationTrack&, const AnnotationTrack&) = default;
};

/// JSON lines: a header {"duration_sec": N, "classes": [...]} followed by one
/// {"second": s, "label": "name"} record per event. Unknown fields are ignored.
AnnotationTrack parse_annotations(std::istream& in);
AnnotationTrack load_annotations(const std::filesystem::path& path);
void save_annotations(const std::filesystem::path& path, const AnnotationTrack& track);
std::string format_annotations(const AnnotationTrack& track);

struct Dataset {
    FeatureSequence features;
    AnnotationTrack annotations;

    /// Seconds usable for windows: annotation duration capped by the frames.
    int duration_sec() const;
    std::size_t num_classes() const { return annotations.num_classes(); }
};

Dataset load_dataset(const std::filesystem::path& features_path, const std::filesystem::path& annotations_path);

enum class LabelMode {
    Dense,           // t0 contiguous labeled seconds per window
    SparseCentered,  // one label: the event at the window's centre second
};

struct SamplerConfig {
    double p0 = 0.2;
    std::uint64_t seed = 0;
    std::size_t window_len = 30;  // frames
    std::size_t outputs = 2;      // labeled seconds per window (1 in sparse mode)
    LabelMode mode = LabelMode::Dense;
    double shift_range = 0.0;     // seconds; 0 disables

    void validate() const;
};

/// First frame of the window whose labeled seconds start at `label_start_sec`.
/// The labeled span [start, start + outputs) sits in the middle of the window;
/// the remaining frames are context split evenly on both sides.
long window_first_frame(double label_start_sec, double fps, std::size_t window_len, std::size_t outputs);

/// Copies window frames into out[batch_index] laid out [dim, window_len].
/// Frames outside the sequence repeat the nearest edge frame.
void copy_window(const FeatureSequence& seq, long first_frame, std::size_t window_len, Tensor& out,
                 std::size_t batch_index);

/// Class of one second: background when empty; when several events share it,
/// a non-dominant class wins over the dominant one (lowest id among them).
int second_label(const AnnotationTrack& track, int second, int dominant);

/// Labels of the window whose labeled span starts at `window_start_sec`.
std::vector<int> label_window(const AnnotationTrack& track, int window_start_sec, const SamplerConfig& cfg);

/// Window start (seconds, real valued) for an event shifted by a uniform
/// offset in [-shift_range, shift_range], clamped so the window stays inside
/// [0, duration].
double shift_augment(const AnnotationTrack& track, int event_second, double shift_range, double window_sec,
                     Rng& rng);

struct WindowSample {
    Tensor features;  // [window_len, dim]
    std::vector<int> labels;
    long first_frame = 0;
    bool background = false;
};

struct Batch {
    Tensor inputs;             // [batch, dim, window_len]
    std::vector<int> targets;  // batch * outputs
    std::size_t background_windows = 0;
};

/// Draws background windows with probability p0 and event windows otherwise.
class WindowSampler {
public:
    /// The dataset must outlive the sampler.
    WindowSampler(const Dataset& data, SamplerConfig cfg);

    WindowSample sample();
    Batch sample_batch(std::size_t batch_size);

    const SamplerConfig& config() const { return cfg_; }
    Rng& rng() { return rng_; }
    const Rng& rng() const { return rng_; }
    const std::vector<int>& background_starts() const { return background_starts_; }

private:
    struct Draw {
        long first_frame;
        std::vector<int> labels;
        bool background;
    };
    Draw draw();

    const Dataset* data_;
    SamplerConfig cfg_;
    Rng rng_;
    int duration_ = 0;
    int dominant_ = -1;
    std::vector<int> background_starts_;
    std::vector<AnnotatedEvent> events_;
    bool warned_no_background_ = false;
    bool warned_no_events_ = false;
};

void log_warning(const std::string& message);
void set_warnings_enabled(bool enabled);

}  // namespace mrtcn
