#include "mrtcn/metrics.hpp"

#include "mrtcn/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

namespace mrtcn {

namespace {

double f1_of(double p, double r) { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

std::vector<double> anchors_of(const AnnotationTrack& track, int class_id) {
    std::vector<double> out;
    for (const AnnotatedEvent& e : track.events) {
        if (e.class_id == class_id) {
            out.push_back(static_cast<double>(e.second));
        }
    }
    return out;
}

std::vector<SpotCandidate> ranked(const std::vector<SpotCandidate>& spots, int class_id) {
    std::vector<SpotCandidate> out;
    for (const SpotCandidate& s : spots) {
        if (s.class_id == class_id) {
            out.push_back(s);
        }
    }
    std::stable_sort(out.begin(), out.end(), [](const SpotCandidate& a, const SpotCandidate& b) {
        if (a.confidence != b.confidence) {
            return a.confidence > b.confidence;
        }
        return a.center_sec < b.center_sec;
    });
    return out;
}

std::size_t search(const std::vector<double>& preds, const std::vector<double>& targets, double delta,
                   std::size_t i, std::vector<bool>& used) {
    if (i == preds.size()) {
        return 0;
    }
    std::size_t best = search(preds, targets, delta, i + 1, used);
    for (std::size_t g = 0; g < targets.size(); ++g) {
        if (!used[g] && std::abs(preds[i] - targets[g]) <= delta) {
            used[g] = true;
            best = std::max(best, 1 + search(preds, targets, delta, i + 1, used));
            used[g] = false;
        }
    }
    return best;
}

}  // namespace

std::vector<int> greedy_match(const std::vector<double>& predictions, const std::vector<double>& targets,
                              double delta) {
    require(delta >= 0.0, ErrorKind::InvalidArgument, "tolerance must be non-negative");
    std::vector<bool> claimed(targets.size(), false);
    std::vector<int> match(predictions.size(), -1);
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        int best = -1;
        double best_dist = 0.0;
        for (std::size_t g = 0; g < targets.size(); ++g) {
            const double dist = std::abs(predictions[i] - targets[g]);
            if (claimed[g] || dist > delta) {
                continue;
            }
            if (best < 0 || dist < best_dist ||
                (dist == best_dist && targets[g] < targets[static_cast<std::size_t>(best)])) {
                best = static_cast<int>(g);
                best_dist = dist;
            }
        }
        if (best >= 0) {
            claimed[static_cast<std::size_t>(best)] = true;
            match[i] = best;
        }
    }
    return match;
}

EvalReport tolerance_f1(const std::vector<EventPrediction>& preds, const AnnotationTrack& gts, double delta) {
    require(delta >= 0.0, ErrorKind::InvalidArgument, "tolerance must be non-negative");
    const int classes = static_cast<int>(gts.num_classes());
    for (const EventPrediction& p : preds) {
        if (p.class_id < 0 || p.class_id >= classes) {
            fail(ErrorKind::InvalidArgument, "prediction class id " + std::to_string(p.class_id) +
                                                 " outside the annotation vocabulary of " + std::to_string(classes) +
                                                 " classes");
        }
    }
    EvalReport report;
    report.delta = delta;
    std::size_t scored = 0;
    for (int k = 1; k < classes; ++k) {
        std::vector<const EventPrediction*> mine;
        for (const EventPrediction& p : preds) {
            if (p.class_id == k) {
                mine.push_back(&p);
            }
        }
        std::stable_sort(mine.begin(), mine.end(), [](const EventPrediction* a, const EventPrediction* b) {
            if (a->confidence != b->confidence) {
                return a->confidence > b->confidence;
            }
            return a->second < b->second;
        });
        std::vector<double> times;
        for (const EventPrediction* p : mine) {
            times.push_back(static_cast<double>(p->second));
        }
        const std::vector<double> targets = anchors_of(gts, k);
        const std::vector<int> match = greedy_match(times, targets, delta);
        ClassScore s;
        s.class_id = k;
        s.name = gts.class_names[static_cast<std::size_t>(k)];
        s.tp = static_cast<std::size_t>(std::count_if(match.begin(), match.end(), [](int m) { return m >= 0; }));
        s.fp = times.size() - s.tp;
        s.fn = targets.size() - s.tp;
        s.precision = times.empty() ? 0.0 : static_cast<double>(s.tp) / static_cast<double>(times.size());
        s.recall = targets.empty() ? 0.0 : static_cast<double>(s.tp) / static_cast<double>(targets.size());
        s.f1 = f1_of(s.precision, s.recall);
        if (!targets.empty()) {
            report.macro_precision += s.precision;
            report.macro_recall += s.recall;
            report.macro_f1 += s.f1;
            ++scored;
        }
        report.classes.push_back(s);
    }
    if (scored > 0) {
        report.macro_precision /= static_cast<double>(scored);
        report.macro_recall /= static_cast<double>(scored);
        report.macro_f1 /= static_cast<double>(scored);
    }
    return report;
}

std::string EvalReport::to_csv() const {
    std::string out = "class,precision,recall,f1,tp,fp,fn\n";
    char buf[160];
    std::size_t tp = 0, fp = 0, fn = 0;
    for (const ClassScore& s : classes) {
        std::snprintf(buf, sizeof buf, ",%.6f,%.6f,%.6f,%zu,%zu,%zu\n", s.precision, s.recall, s.f1, s.tp, s.fp, s.fn);
        out += s.name + buf;
        tp += s.tp;
        fp += s.fp;
        fn += s.fn;
    }
    std::snprintf(buf, sizeof buf, "average,%.6f,%.6f,%.6f,%zu,%zu,%zu\n", macro_precision, macro_recall, macro_f1, tp,
                  fp, fn);
    out += buf;
    return out;
}

std::size_t brute_force_match(const std::vector<double>& predictions, const std::vector<double>& targets,
                              double delta) {
    if (predictions.size() > 12 || targets.size() > 12) {
        fail(ErrorKind::InvalidArgument, "brute-force matching is limited to 12 events per side");
    }
    std::vector<bool> used(targets.size(), false);
    return search(predictions, targets, delta, 0, used);
}

std::vector<std::pair<double, double>> pr_curve(const std::vector<SpotCandidate>& spots,
                                                const AnnotationTrack& anchors, int class_id, double delta) {
    const std::vector<SpotCandidate> order = ranked(spots, class_id);
    const std::vector<double> targets = anchors_of(anchors, class_id);
    std::vector<double> centres;
    for (const SpotCandidate& s : order) {
        centres.push_back(s.center_sec);
    }
    const std::vector<int> match = greedy_match(centres, targets, delta);
    std::vector<std::pair<double, double>> points;
    const double n = static_cast<double>(targets.size());
    std::size_t tp = 0;
    for (std::size_t i = 0; i < order.size(); ++i) {
        tp += match[i] >= 0 ? 1 : 0;
        if (i + 1 < order.size() && order[i + 1].confidence == order[i].confidence) {
            continue;
        }
        const double recall = n > 0.0 ? static_cast<double>(tp) / n : 0.0;
        points.emplace_back(recall, static_cast<double>(tp) / static_cast<double>(i + 1));
    }
    return points;
}

double spotting_ap(const std::vector<SpotCandidate>& spots, const AnnotationTrack& anchors, int class_id,
                   double delta) {
    if (anchors_of(anchors, class_id).empty()) {
        return 0.0;
    }
    const std::vector<std::pair<double, double>> points = pr_curve(spots, anchors, class_id, delta);
    // Precision envelope from the right, then area over recall steps.
    std::vector<double> envelope(points.size());
    double running = 0.0;
    for (std::size_t i = points.size(); i-- > 0;) {
        running = std::max(running, points[i].second);
        envelope[i] = running;
    }
    double ap = 0.0;
    double prev_recall = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        ap += (points[i].first - prev_recall) * envelope[i];
        prev_recall = points[i].first;
    }
    return ap;
}

MapResult spotting_map(const std::vector<SpotCandidate>& spots, const AnnotationTrack& anchors, double delta) {
    MapResult r;
    r.delta = delta;
    r.ap.assign(anchors.num_classes(), 0.0);
    std::size_t scored = 0;
    for (int k = 1; k < static_cast<int>(anchors.num_classes()); ++k) {
        r.ap[static_cast<std::size_t>(k)] = spotting_ap(spots, anchors, k, delta);
        if (!anchors_of(anchors, k).empty()) {
            r.map += r.ap[static_cast<std::size_t>(k)];
            ++scored;
        }
    }
    if (scored > 0) {
        r.map /= static_cast<double>(scored);
    }
    return r;
}

double average_map(const std::vector<SpotCandidate>& spots, const AnnotationTrack& anchors,
                   const std::vector<double>& delta_grid, std::vector<MapResult>* per_delta) {
    require(!delta_grid.empty(), ErrorKind::InvalidArgument, "delta grid is empty");
    double sum = 0.0;
    for (double d : delta_grid) {
        MapResult r = spotting_map(spots, anchors, d);
        sum += r.map;
        if (per_delta) {
            per_delta->push_back(std::move(r));
        }
    }
    return sum / static_cast<double>(delta_grid.size());
}

std::vector<double> parse_delta_grid(const std::string& text) {
    auto number = [&](const std::string& s) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(s, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != s.size() || !std::isfinite(v)) {
            fail(ErrorKind::Config, "bad delta grid '" + text + "'");
        }
        return v;
    };
    std::vector<double> grid;
    if (text.find(':') != std::string::npos) {
        std::vector<std::string> parts;
        std::stringstream ss(text);
        for (std::string p; std::getline(ss, p, ':');) {
            parts.push_back(p);
        }
        require(parts.size() == 3, ErrorKind::Config, "delta grid '" + text + "' must be start:stop:step");
        const double start = number(parts[0]);
        const double stop = number(parts[1]);
        const double step = number(parts[2]);
        require(step > 0.0 && stop >= start, ErrorKind::Config, "delta grid '" + text + "' is empty");
        const auto count = static_cast<std::size_t>(std::floor((stop - start) / step + 1e-9)) + 1;
        for (std::size_t i = 0; i < count; ++i) {
            grid.push_back(start + static_cast<double>(i) * step);
        }
    } else {
        std::stringstream ss(text);
        for (std::string p; std::getline(ss, p, ',');) {
            grid.push_back(number(p));
        }
    }
    require(!grid.empty(), ErrorKind::Config, "delta grid is empty");
    for (std::size_t i = 0; i < grid.size(); ++i) {
        require(grid[i] >= 0.0 && (i == 0 || grid[i] > grid[i - 1]), ErrorKind::Config,
                "delta grid must be non-negative and ascending");
    }
    return grid;
}

std::string map_curve_csv(const std::vector<MapResult>& per_delta) {
    std::string out = "delta,map\n";
    char buf[64];
    for (const MapResult& r : per_delta) {
        std::snprintf(buf, sizeof buf, "%g,%.6f\n", r.delta, r.map);
        out += buf;
    }
    return out;
}

std::string pr_curve_csv(const std::vector<SpotCandidate>& spots, const AnnotationTrack& anchors, double delta) {
    std::string out = "class,delta,recall,precision\n";
    char buf[96];
    for (int k = 1; k < static_cast<int>(anchors.num_classes()); ++k) {
        for (const auto& [recall, precision] : pr_curve(spots, anchors, k, delta)) {
            std::snprintf(buf, sizeof buf, ",%g,%.6f,%.6f\n", delta, recall, precision);
            out += anchors.class_names[static_cast<std::size_t>(k)] + buf;
        }
    }
    return out;
}

}  // namespace mrtcn
