#include "mrtcn/data.hpp"

#include "mrtcn/binary_io.hpp"
#include "mrtcn/error.hpp"

#include "json.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

namespace mrtcn {

namespace {

constexpr std::string_view kFeatureMagic = "FSEQ";
constexpr std::uint8_t kFeatureVersion = 1;

std::atomic<bool> g_warnings{true};

}  // namespace

void log_warning(const std::string& message) {
    if (g_warnings.load()) {
        std::cerr << "warning: " << message << '\n';
    }
}

void set_warnings_enabled(bool enabled) { g_warnings.store(enabled); }

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        fail(ErrorKind::Io, "cannot open " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view data) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        fail(ErrorKind::Io, "cannot write " + path.string());
    }
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!out) {
        fail(ErrorKind::Io, "write failed for " + path.string());
    }
}

int FeatureSequence::duration_sec() const {
    return static_cast<int>(std::floor(static_cast<double>(frames) / static_cast<double>(fps) + 1e-9));
}

void FeatureSequence::validate() const {
    require(frames >= 1 && dim >= 1, ErrorKind::Format, "feature sequence needs at least one frame and dimension");
    require(std::isfinite(fps) && fps > 0.0f, ErrorKind::Format, "feature fps must be positive");
    require(values.size() == frames * dim, ErrorKind::Format, "feature payload does not match frames x dim");
    for (float v : values) {
        if (!std::isfinite(v)) {
            fail(ErrorKind::Format, "non-finite feature value in " + (source_id.empty() ? "sequence" : source_id));
        }
    }
}

std::string encode_features(const FeatureSequence& seq) {
    seq.validate();
    ByteWriter w;
    w.bytes(kFeatureMagic);
    w.u8(kFeatureVersion);
    w.u32(static_cast<std::uint32_t>(seq.frames));
    w.u32(static_cast<std::uint32_t>(seq.dim));
    w.f32(seq.fps);
    for (float v : seq.values) {
        w.f32(v);
    }
    return w.buffer();
}

FeatureSequence decode_features(std::string_view bytes, const std::string& source_id) {
    const std::string what = "feature file" + (source_id.empty() ? std::string() : " " + source_id);
    if (bytes.size() < 5 || bytes.substr(0, 4) != kFeatureMagic) {
        fail(ErrorKind::Format, "bad magic in " + what + " (expected FSEQ)");
    }
    ByteReader r(bytes.substr(4), what);
    const std::uint8_t version = r.u8();
    if (version != kFeatureVersion) {
        fail(ErrorKind::Format, "unsupported version " + std::to_string(version) + " in " + what);
    }
    FeatureSequence seq;
    seq.source_id = source_id;
    seq.frames = r.u32();
    seq.dim = r.u32();
    seq.fps = r.f32();
    const std::uint64_t count = static_cast<std::uint64_t>(seq.frames) * seq.dim;
    r.need(static_cast<std::size_t>(count * 4));
    if (r.remaining() != count * 4) {
        fail(ErrorKind::Format, what + " has " + std::to_string(r.remaining() - count * 4) + " trailing bytes");
    }
    seq.values.resize(static_cast<std::size_t>(count));
    for (float& v : seq.values) {
        v = r.f32();
    }
    seq.validate();
    return seq;
}

void save_features(const std::filesystem::path& path, const FeatureSequence& seq) {
    write_file(path, encode_features(seq));
}

FeatureSequence load_features(const std::filesystem::path& path) {
    return decode_features(read_file(path), path.filename().string());
}

int AnnotationTrack::class_id(const std::string& name) const {
    for (std::size_t i = 0; i < class_names.size(); ++i) {
        if (class_names[i] == name) {
            return static_cast<int>(i);
        }
    }
    return -1;
}

std::vector<std::size_t> AnnotationTrack::class_counts() const {
    std::vector<std::size_t> counts(class_names.size(), 0);
    for (const AnnotatedEvent& e : events) {
        counts[static_cast<std::size_t>(e.class_id)] += 1;
    }
    return counts;
}

int AnnotationTrack::dominant_class() const {
    if (events.empty()) {
        return -1;
    }
    const std::vector<std::size_t> counts = class_counts();
    for (std::size_t c = 1; c < counts.size(); ++c) {
        if (2 * counts[c] >= events.size() && counts[c] < events.size()) {
            return static_cast<int>(c);
        }
    }
    return -1;
}

void AnnotationTrack::normalize() {
    std::sort(events.begin(), events.end());
    const int classes = static_cast<int>(class_names.size());
    for (std::size_t i = 0; i < events.size(); ++i) {
        const AnnotatedEvent& e = events[i];
        if (e.class_id < 1 || e.class_id >= classes) {
            fail(ErrorKind::Format, "event class id " + std::to_string(e.class_id) + " outside [1, " +
                                        std::to_string(classes) + ")");
        }
        if (e.second < 0 || (duration_sec > 0 && e.second >= duration_sec)) {
            fail(ErrorKind::Format, "event second " + std::to_string(e.second) + " outside [0, " +
                                        std::to_string(duration_sec) + ")");
        }
        if (i > 0 && events[i - 1] == e) {
            fail(ErrorKind::Format, "duplicate event '" + class_names[static_cast<std::size_t>(e.class_id)] +
                                        "' at second " + std::to_string(e.second));
        }
    }
}

AnnotationTrack parse_annotations(std::istream& in) {
    AnnotationTrack track;
    std::string line;
    bool have_header = false;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            fail(ErrorKind::Format, "annotation line " + std::to_string(line_no) + ": " + e.what());
        }
        try {
            if (!have_header) {
                if (!j.is_object() || !j.contains("duration_sec") || !j.contains("classes")) {
                    fail(ErrorKind::Format, "annotation line " + std::to_string(line_no) +
                                                ": expected a header with duration_sec and classes");
                }
                track.duration_sec = j.at("duration_sec").get<int>();
                track.class_names = j.at("classes").get<std::vector<std::string>>();
                if (track.duration_sec <= 0) {
                    fail(ErrorKind::Format, "annotation duration_sec must be positive");
                }
                if (track.class_names.empty() || track.class_names.front() != "background") {
                    fail(ErrorKind::Format, "annotation classes must start with \"background\"");
                }
                have_header = true;
                continue;
            }
            const int second = j.at("second").get<int>();
            const std::string label = j.at("label").get<std::string>();
            const int id = track.class_id(label);
            if (id < 0) {
                fail(ErrorKind::Format, "annotation line " + std::to_string(line_no) + ": unknown class name '" +
                                            label + "'");
            }
            if (id == 0) {
                fail(ErrorKind::Format, "annotation line " + std::to_string(line_no) +
                                            ": background is not an event label");
            }
            if (second < 0 || second >= track.duration_sec) {
                fail(ErrorKind::Format, "annotation line " + std::to_string(line_no) + ": second " +
                                            std::to_string(second) + " outside [0, " +
                                            std::to_string(track.duration_sec) + ")");
            }
            track.events.push_back({second, id});
        } catch (const nlohmann::json::exception& e) {
            fail(ErrorKind::Format, "annotation line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    track.normalize();
    return track;
}

AnnotationTrack load_annotations(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        fail(ErrorKind::Io, "cannot open " + path.string());
    }
    return parse_annotations(in);
}

std::string format_annotations(const AnnotationTrack& track) {
    std::string out;
    nlohmann::json header = {{"duration_sec", track.duration_sec}, {"classes", track.class_names}};
    out += header.dump() + "\n";
    for (const AnnotatedEvent& e : track.events) {
        nlohmann::json rec = {{"second", e.second},
                              {"label", track.class_names.at(static_cast<std::size_t>(e.class_id))}};
        out += rec.dump() + "\n";
    }
    return out;
}

void save_annotations(const std::filesystem::path& path, const AnnotationTrack& track) {
    write_file(path, format_annotations(track));
}

int Dataset::duration_sec() const {
    const int from_frames = features.duration_sec();
    return annotations.duration_sec > 0 ? std::min(annotations.duration_sec, from_frames) : from_frames;
}

Dataset load_dataset(const std::filesystem::path& features_path, const std::filesystem::path& annotations_path) {
    Dataset d{load_features(features_path), load_annotations(annotations_path)};
    require(d.annotations.num_classes() >= 2, ErrorKind::Format,
            annotations_path.string() + " declares no event classes");
    return d;
}

void SamplerConfig::validate() const {
    require(p0 >= 0.0 && p0 <= 1.0, ErrorKind::Config, "sampler.p0 must lie in [0, 1]");
    require(window_len >= 1 && outputs >= 1, ErrorKind::Config, "sampler window and outputs must be positive");
    require(shift_range >= 0.0, ErrorKind::Config, "sampler.shift_range must be non-negative");
    require(mode == LabelMode::Dense || outputs == 1, ErrorKind::Config,
            "sparse-centered sampling labels a single second (outputs = 1)");
}

long window_first_frame(double label_start_sec, double fps, std::size_t window_len, std::size_t outputs) {
    const double centre = (label_start_sec + static_cast<double>(outputs) / 2.0) * fps;
    return std::lround(centre - static_cast<double>(window_len) / 2.0);
}

void copy_window(const FeatureSequence& seq, long first_frame, std::size_t window_len, Tensor& out,
                 std::size_t batch_index) {
    const long last = static_cast<long>(seq.frames) - 1;
    for (std::size_t t = 0; t < window_len; ++t) {
        const long f = std::clamp(first_frame + static_cast<long>(t), 0L, last);
        const float* row = seq.values.data() + static_cast<std::size_t>(f) * seq.dim;
        for (std::size_t d = 0; d < seq.dim; ++d) {
            out.at(batch_index, d, t) = static_cast<double>(row[d]);
        }
    }
}

int second_label(const AnnotationTrack& track, int second, int dominant) {
    const auto lo = std::lower_bound(track.events.begin(), track.events.end(), AnnotatedEvent{second, 0});
    int label = 0;
    for (auto it = lo; it != track.events.end() && it->second == second; ++it) {
        if (label == 0 || (label == dominant && it->class_id != dominant)) {
            label = it->class_id;
        }
    }
    return label;
}

std::vector<int> label_window(const AnnotationTrack& track, int window_start_sec, const SamplerConfig& cfg) {
    const int dominant = track.dominant_class();
    std::vector<int> labels(cfg.outputs, 0);
    for (std::size_t i = 0; i < cfg.outputs; ++i) {
        labels[i] = second_label(track, window_start_sec + static_cast<int>(i), dominant);
    }
    return labels;
}

double shift_augment(const AnnotationTrack& track, int event_second, double shift_range, double window_sec,
                     Rng& rng) {
    require(shift_range >= 0.0, ErrorKind::InvalidArgument, "shift range must be non-negative");
    const double offset = shift_range > 0.0 ? rng.uniform(-shift_range, shift_range) : 0.0;
    const double centred = static_cast<double>(event_second) + 0.5 - window_sec / 2.0;
    const double hi = std::max(0.0, static_cast<double>(track.duration_sec) - window_sec);
    return std::clamp(centred + offset, 0.0, hi);
}

WindowSampler::WindowSampler(const Dataset& data, SamplerConfig cfg)
    : data_(&data), cfg_(std::move(cfg)), rng_(cfg_.seed) {
    cfg_.validate();
    duration_ = data.duration_sec();
    dominant_ = data.annotations.dominant_class();
    const int labeled = static_cast<int>(cfg_.outputs);
    require(duration_ >= labeled, ErrorKind::InvalidArgument, "dataset is shorter than one labeled window");

    std::vector<int> per_second(static_cast<std::size_t>(duration_));
    for (int s = 0; s < duration_; ++s) {
        per_second[static_cast<std::size_t>(s)] = second_label(data.annotations, s, dominant_);
    }
    for (int ws = 0; ws + labeled <= duration_; ++ws) {
        bool all_background = true;
        for (int i = 0; i < labeled; ++i) {
            all_background = all_background && per_second[static_cast<std::size_t>(ws + i)] == 0;
        }
        if (all_background) {
            background_starts_.push_back(ws);
        }
    }
    for (const AnnotatedEvent& e : data.annotations.events) {
        if (e.second < duration_) {
            events_.push_back(e);
        }
    }
    const std::vector<std::size_t> counts = data.annotations.class_counts();
    for (std::size_t c = 1; c < counts.size(); ++c) {
        if (counts[c] == 0) {
            log_warning("class '" + data.annotations.class_names[c] + "' has no events; sampler skips it");
        }
    }
    require(!events_.empty() || !background_starts_.empty(), ErrorKind::InvalidArgument,
            "dataset has neither events nor background windows to sample");
}

WindowSampler::Draw WindowSampler::draw() {
    const double fps = static_cast<double>(data_->features.fps);
    bool background = rng_.bernoulli(cfg_.p0);
    if (background && background_starts_.empty()) {
        if (!warned_no_background_) {
            log_warning("no all-background window exists; drawing an event window instead");
            warned_no_background_ = true;
        }
        background = false;
    }
    if (!background && events_.empty()) {
        if (!warned_no_events_) {
            log_warning("dataset has no events; drawing a background window instead");
            warned_no_events_ = true;
        }
        background = true;
    }
    if (background) {
        const int ws = background_starts_[rng_.below(background_starts_.size())];
        return {window_first_frame(ws, fps, cfg_.window_len, cfg_.outputs),
                label_window(data_->annotations, ws, cfg_), true};
    }

    const AnnotatedEvent& e = events_[rng_.below(events_.size())];
    if (cfg_.mode == LabelMode::Dense) {
        const int pos = static_cast<int>(rng_.below(cfg_.outputs));
        const int ws = std::clamp(e.second - pos, 0, duration_ - static_cast<int>(cfg_.outputs));
        return {window_first_frame(ws, fps, cfg_.window_len, cfg_.outputs),
                label_window(data_->annotations, ws, cfg_), false};
    }
    if (cfg_.shift_range > 0.0) {
        const double window_sec = static_cast<double>(cfg_.window_len) / fps;
        const double start = shift_augment(data_->annotations, e.second, cfg_.shift_range, window_sec, rng_);
        return {std::lround(start * fps), std::vector<int>{e.class_id}, false};
    }
    return {window_first_frame(e.second, fps, cfg_.window_len, 1), label_window(data_->annotations, e.second, cfg_),
            false};
}

WindowSample WindowSampler::sample() {
    Draw d = draw();
    const std::size_t dim = data_->features.dim;
    Tensor staged({1, dim, cfg_.window_len});
    copy_window(data_->features, d.first_frame, cfg_.window_len, staged, 0);
    Tensor features({cfg_.window_len, dim});
    for (std::size_t t = 0; t < cfg_.window_len; ++t) {
        for (std::size_t k = 0; k < dim; ++k) {
            features[t * dim + k] = staged.at(0, k, t);
        }
    }
    return {std::move(features), std::move(d.labels), d.first_frame, d.background};
}

Batch WindowSampler::sample_batch(std::size_t batch_size) {
    Batch batch{Tensor({batch_size, data_->features.dim, cfg_.window_len}), {}, 0};
    batch.targets.reserve(batch_size * cfg_.outputs);
    for (std::size_t b = 0; b < batch_size; ++b) {
        Draw d = draw();
        copy_window(data_->features, d.first_frame, cfg_.window_len, batch.inputs, b);
        batch.targets.insert(batch.targets.end(), d.labels.begin(), d.labels.end());
        batch.background_windows += d.background ? 1 : 0;
    }
    return batch;
}

}  // namespace mrtcn
