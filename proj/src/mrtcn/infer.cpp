#include "mrtcn/infer.hpp"

#include "mrtcn/error.hpp"

#include <algorithm>
#include <cstdio>

namespace mrtcn {

namespace {

std::string class_label(const std::vector<std::string>& names, std::size_t id) {
    return id < names.size() ? names[id] : "class" + std::to_string(id);
}

std::size_t argmax(std::span<const double> row) {
    return static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
}

}  // namespace

std::string ProbabilityCurve::to_csv(const std::vector<std::string>& class_names) const {
    std::string out = "second";
    for (std::size_t k = 0; k < classes; ++k) {
        out += "," + class_label(class_names, k);
    }
    out += "\n";
    char buf[32];
    for (std::size_t s = 0; s < seconds; ++s) {
        out += std::to_string(s);
        for (std::size_t k = 0; k < classes; ++k) {
            std::snprintf(buf, sizeof buf, ",%.6f", at(s, k));
            out += buf;
        }
        out += "\n";
    }
    return out;
}

ProbabilityCurve sliding_window_predict(Network& net, const FeatureSequence& seq, const InferOptions& opts) {
    const NetworkSpec& spec = net.spec();
    require(seq.dim == spec.input_dim, ErrorKind::InvalidArgument,
            "features have " + std::to_string(seq.dim) + " dims, network expects " + std::to_string(spec.input_dim));
    require(seq.frames >= spec.input_len, ErrorKind::InvalidArgument,
            "sequence of " + std::to_string(seq.frames) + " frames is shorter than one " +
                std::to_string(spec.input_len) + "-frame window");
    require(opts.batch_size >= 1, ErrorKind::InvalidArgument, "inference batch size must be positive");

    const std::size_t t0 = spec.label_len();
    const std::size_t c = spec.num_classes;
    const int duration = seq.duration_sec();
    require(duration >= static_cast<int>(t0), ErrorKind::InvalidArgument, "sequence shorter than one labeled window");
    const double fps = static_cast<double>(seq.fps);
    const bool sparse = spec.head == HeadMode::Average;
    const std::size_t windows = sparse ? static_cast<std::size_t>(duration)
                                       : static_cast<std::size_t>(duration) - t0 + 1;

    ProbabilityCurve curve;
    curve.seconds = static_cast<std::size_t>(duration);
    curve.classes = c;
    curve.fps = fps;
    curve.probs.assign(curve.seconds * c, 0.0);
    std::vector<bool> filled(curve.seconds, false);

    for (std::size_t first = 0; first < windows; first += opts.batch_size) {
        const std::size_t count = std::min(opts.batch_size, windows - first);
        Tensor x({count, seq.dim, spec.input_len});
        for (std::size_t i = 0; i < count; ++i) {
            const double ws = static_cast<double>(first + i);
            copy_window(seq, window_first_frame(ws, fps, spec.input_len, t0), spec.input_len, x, i);
        }
        const Network::Output out = net.forward(x, Mode::Eval);
        for (std::size_t i = 0; i < count; ++i) {
            for (std::size_t p = 0; p < t0; ++p) {
                const std::size_t second = first + i + p;
                const std::span<const double> row(&out.probs.at(i, p, 0), c);
                double* dst = curve.probs.data() + second * c;
                if (!filled[second]) {
                    std::copy(row.begin(), row.end(), dst);
                    filled[second] = true;
                } else if (opts.merge) {
                    const std::span<const double> kept = merge_duplicates({dst, c}, row);
                    if (kept.data() != dst) {
                        std::copy(kept.begin(), kept.end(), dst);
                    }
                }
            }
        }
    }
    return curve;
}

std::span<const double> merge_duplicates(std::span<const double> earlier, std::span<const double> later) {
    require(earlier.size() == later.size() && !earlier.empty(), ErrorKind::InvalidArgument,
            "merge_duplicates needs two rows of equal length");
    const double a = *std::max_element(earlier.begin(), earlier.end());
    const double b = *std::max_element(later.begin(), later.end());
    return b > a ? later : earlier;
}

std::vector<EventPrediction> decode_predictions(const ProbabilityCurve& curve) {
    std::vector<EventPrediction> preds;
    preds.reserve(curve.seconds);
    for (std::size_t s = 0; s < curve.seconds; ++s) {
        const std::span<const double> row = curve.row(s);
        const std::size_t k = argmax(row);
        preds.push_back({static_cast<int>(s), static_cast<int>(k), row[k], {row.begin(), row.end()}});
    }
    return preds;
}

std::vector<EventPrediction> suppress_consecutive(std::vector<EventPrediction> preds,
                                                  const std::set<int>& rare_classes) {
    std::size_t i = 0;
    while (i < preds.size()) {
        std::size_t end = i + 1;
        if (rare_classes.count(preds[i].class_id)) {
            while (end < preds.size() && preds[end].class_id == preds[i].class_id &&
                   preds[end].second == preds[end - 1].second + 1) {
                ++end;
            }
        }
        if (end - i > 1) {
            std::size_t keep = i;
            for (std::size_t j = i + 1; j < end; ++j) {
                if (preds[j].confidence > preds[keep].confidence) {
                    keep = j;
                }
            }
            for (std::size_t j = i; j < end; ++j) {
                if (j == keep) {
                    continue;
                }
                EventPrediction& p = preds[j];
                require(p.row.size() >= 2, ErrorKind::InvalidArgument,
                        "suppression needs the full class row of each prediction");
                int best = -1;
                for (std::size_t k = 0; k < p.row.size(); ++k) {
                    if (static_cast<int>(k) != p.class_id && (best < 0 || p.row[k] > p.row[static_cast<std::size_t>(best)])) {
                        best = static_cast<int>(k);
                    }
                }
                p.class_id = best;
                p.confidence = p.row[static_cast<std::size_t>(best)];
            }
        }
        i = end;
    }
    return preds;
}

std::set<int> default_rare_classes(const AnnotationTrack& track) {
    const int dominant = track.dominant_class();
    std::set<int> rare;
    for (int k = 1; k < static_cast<int>(track.num_classes()); ++k) {
        if (k != dominant) {
            rare.insert(k);
        }
    }
    return rare;
}

std::vector<SpotCandidate> watershed_spot(const ProbabilityCurve& curve, int class_id, double threshold) {
    require(class_id >= 0 && static_cast<std::size_t>(class_id) < curve.classes, ErrorKind::InvalidArgument,
            "watershed class id out of range");
    std::vector<SpotCandidate> spots;
    std::size_t s = 0;
    while (s < curve.seconds) {
        if (curve.at(s, static_cast<std::size_t>(class_id)) < threshold) {
            ++s;
            continue;
        }
        const std::size_t start = s;
        double peak = 0.0;
        while (s < curve.seconds && curve.at(s, static_cast<std::size_t>(class_id)) >= threshold) {
            peak = std::max(peak, curve.at(s, static_cast<std::size_t>(class_id)));
            ++s;
        }
        const double a = static_cast<double>(start);
        const double b = static_cast<double>(s - 1);
        spots.push_back({(a + b) / 2.0, class_id, peak, a, b});
    }
    return spots;
}

std::vector<SpotCandidate> spot_all(const ProbabilityCurve& curve, double threshold) {
    std::vector<SpotCandidate> all;
    for (std::size_t k = 1; k < curve.classes; ++k) {
        const std::vector<SpotCandidate> spots = watershed_spot(curve, static_cast<int>(k), threshold);
        all.insert(all.end(), spots.begin(), spots.end());
    }
    return all;
}

std::string spots_to_csv(const std::vector<SpotCandidate>& spots, const std::vector<std::string>& class_names) {
    std::string out = "class,center_sec,confidence,start_sec,end_sec\n";
    char buf[128];
    for (const SpotCandidate& s : spots) {
        std::snprintf(buf, sizeof buf, ",%.1f,%.6f,%.1f,%.1f\n", s.center_sec, s.confidence, s.start_sec, s.end_sec);
        out += class_label(class_names, static_cast<std::size_t>(s.class_id)) + buf;
    }
    return out;
}

}  // namespace mrtcn
