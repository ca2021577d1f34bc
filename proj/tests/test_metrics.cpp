#include "doctest.h"

#include "mrtcn/error.hpp"
#include "mrtcn/metrics.hpp"

#include <algorithm>
#include <cmath>

using namespace mrtcn;

namespace {

AnnotationTrack track(int duration, std::vector<AnnotatedEvent> events, std::size_t classes = 3) {
    AnnotationTrack t;
    t.duration_sec = duration;
    t.class_names = {"background"};
    for (std::size_t k = 1; k < classes; ++k) {
        t.class_names.push_back("c" + std::to_string(k));
    }
    t.events = std::move(events);
    t.normalize();
    return t;
}

EventPrediction pred(int second, int cls, double conf) { return {second, cls, conf, {}}; }

SpotCandidate spot(double centre, int cls, double conf) { return {centre, cls, conf, centre, centre}; }

// Independent AP: for every distinct confidence threshold, re-run the matching
// from scratch on the candidates at or above it, then integrate precision at
// each recall level k/N as the best precision reaching that recall.
double oracle_ap(const std::vector<SpotCandidate>& spots, const std::vector<double>& anchors, double delta) {
    const double n = static_cast<double>(anchors.size());
    if (anchors.empty()) {
        return 0.0;
    }
    std::vector<double> thresholds;
    for (const SpotCandidate& s : spots) {
        thresholds.push_back(s.confidence);
    }
    std::sort(thresholds.begin(), thresholds.end());
    thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
    std::vector<std::pair<double, double>> pr;
    for (double tau : thresholds) {
        std::vector<SpotCandidate> kept;
        for (const SpotCandidate& s : spots) {
            if (s.confidence >= tau) {
                kept.push_back(s);
            }
        }
        std::sort(kept.begin(), kept.end(), [](const SpotCandidate& a, const SpotCandidate& b) {
            return a.confidence != b.confidence ? a.confidence > b.confidence : a.center_sec < b.center_sec;
        });
        std::vector<bool> used(anchors.size(), false);
        std::size_t tp = 0;
        for (const SpotCandidate& s : kept) {
            std::size_t best = anchors.size();
            for (std::size_t g = 0; g < anchors.size(); ++g) {
                const double dist = std::abs(s.center_sec - anchors[g]);
                if (used[g] || dist > delta) {
                    continue;
                }
                if (best == anchors.size() || dist < std::abs(s.center_sec - anchors[best]) ||
                    (dist == std::abs(s.center_sec - anchors[best]) && anchors[g] < anchors[best])) {
                    best = g;
                }
            }
            if (best < anchors.size()) {
                used[best] = true;
                ++tp;
            }
        }
        pr.emplace_back(static_cast<double>(tp) / n, static_cast<double>(tp) / static_cast<double>(kept.size()));
    }
    double ap = 0.0;
    for (std::size_t k = 1; k <= anchors.size(); ++k) {
        const double level = static_cast<double>(k) / n;
        double best = 0.0;
        for (const auto& [r, p] : pr) {
            if (r >= level - 1e-12) {
                best = std::max(best, p);
            }
        }
        ap += best / n;
    }
    return ap;
}

}  // namespace

TEST_CASE("tolerance_f1 hand cases") {
    const AnnotationTrack gts = track(60, {{10, 1}, {20, 2}, {30, 1}});
    SUBCASE("exact predictions") {
        const EvalReport r = tolerance_f1({pred(10, 1, .9), pred(20, 2, .8), pred(30, 1, .7)}, gts, 1.0);
        for (const ClassScore& s : r.classes) {
            CHECK(s.precision == 1.0);
            CHECK(s.recall == 1.0);
            CHECK(s.f1 == 1.0);
        }
        CHECK(r.macro_f1 == 1.0);
    }
    SUBCASE("one second off is within tolerance") {
        const AnnotationTrack one = track(60, {{10, 1}});
        const EvalReport r = tolerance_f1({pred(11, 1, .9)}, one, 1.0);
        CHECK(r.classes[0].tp == 1);
        CHECK(tolerance_f1({pred(12, 1, .9)}, one, 1.0).classes[0].tp == 0);
    }
    SUBCASE("two predictions near one ground truth") {
        const AnnotationTrack one = track(60, {{10, 1}});
        const EvalReport r = tolerance_f1({pred(10, 1, .6), pred(11, 1, .9)}, one, 1.0);
        CHECK(r.classes[0].tp == 1);
        CHECK(r.classes[0].fp == 1);
        CHECK(r.classes[0].fn == 0);
        CHECK(r.classes[0].precision == 0.5);
        CHECK(r.classes[0].f1 == doctest::Approx(2.0 / 3.0));
    }
    SUBCASE("background predictions are ignored and empty classes score zero") {
        const EvalReport r = tolerance_f1({pred(10, 0, .9), pred(10, 1, .9)}, gts, 1.0);
        CHECK(r.classes[1].precision == 0.0);
        CHECK(r.classes[1].f1 == 0.0);
        CHECK(r.classes[0].tp == 1);
        CHECK(r.classes[0].fn == 1);
    }
    SUBCASE("classes without ground truth leave the macro average") {
        const AnnotationTrack only1 = track(60, {{10, 1}}, 3);
        const EvalReport r = tolerance_f1({pred(10, 1, .9), pred(40, 2, .9)}, only1, 1.0);
        CHECK(r.classes[1].fp == 1);
        CHECK(r.macro_f1 == 1.0);
    }
    CHECK_THROWS_AS(tolerance_f1({pred(1, 5, .5)}, gts, 1.0), Error);
    CHECK_THROWS_AS(tolerance_f1({}, gts, -1.0), Error);
}

TEST_CASE("tolerance_f1 invariants") {
    Rng rng(3);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<AnnotatedEvent> events;
        for (int s = 0; s < 100; ++s) {
            if (rng.bernoulli(0.1)) {
                events.push_back({s, 1 + static_cast<int>(rng.below(3))});
            }
        }
        std::vector<EventPrediction> preds;
        for (int s = 0; s < 100; ++s) {
            if (rng.bernoulli(0.15)) {
                preds.push_back(pred(s, 1 + static_cast<int>(rng.below(3)), rng.uniform()));
            }
        }
        const AnnotationTrack gts = track(200, events, 4);
        const double delta = static_cast<double>(rng.below(4));
        const EvalReport r = tolerance_f1(preds, gts, delta);

        std::vector<AnnotatedEvent> shifted_events = events;
        std::vector<EventPrediction> shifted_preds = preds;
        for (auto& e : shifted_events) {
            e.second += 37;
        }
        for (auto& p : shifted_preds) {
            p.second += 37;
        }
        const EvalReport shifted = tolerance_f1(shifted_preds, track(200, shifted_events, 4), delta);
        for (std::size_t k = 0; k < 3; ++k) {
            const ClassScore& s = r.classes[k];
            CHECK(s.tp == shifted.classes[k].tp);
            CHECK(s.fp == shifted.classes[k].fp);
            const auto gt_count = std::count_if(events.begin(), events.end(),
                                                [&](const AnnotatedEvent& e) { return e.class_id == s.class_id; });
            const auto pred_count = std::count_if(preds.begin(), preds.end(),
                                                  [&](const EventPrediction& p) { return p.class_id == s.class_id; });
            CHECK(s.tp + s.fn == static_cast<std::size_t>(gt_count));
            CHECK(s.tp + s.fp == static_cast<std::size_t>(pred_count));
            if (s.precision + s.recall > 0.0) {
                CHECK(s.f1 == doctest::Approx(2.0 * s.precision * s.recall / (s.precision + s.recall)));
            } else {
                CHECK(s.f1 == 0.0);
            }
        }
    }
}

TEST_CASE("brute-force matching") {
    CHECK(brute_force_match({1, 2, 3}, {5, 6, 7}, 0.0) == 0);
    CHECK(brute_force_match({4, 1, 4, 9}, {9, 4, 1, 4}, 0.0) == 4);
    // Greedy in the given order takes 0 for the prediction at 1 and strands 2.
    CHECK(brute_force_match({1, 2}, {0, 2}, 1.0) == 2);
    CHECK(brute_force_match({}, {1.0}, 1.0) == 0);
    CHECK_THROWS_AS(brute_force_match(std::vector<double>(13, 0.0), {1.0}, 1.0), Error);

    // Greedy agrees with the optimum on typical sparse layouts.
    Rng rng(21);
    int agree = 0;
    const int trials = 300;
    for (int t = 0; t < trials; ++t) {
        std::vector<double> p, g;
        for (std::size_t i = rng.below(9); i > 0; --i) {
            p.push_back(static_cast<double>(rng.below(60)));
        }
        for (std::size_t i = rng.below(9); i > 0; --i) {
            g.push_back(static_cast<double>(rng.below(60)));
        }
        const std::vector<int> m = greedy_match(p, g, 1.0);
        const auto greedy = static_cast<std::size_t>(std::count_if(m.begin(), m.end(), [](int x) { return x >= 0; }));
        const std::size_t best = brute_force_match(p, g, 1.0);
        CHECK(greedy <= best);
        agree += greedy == best ? 1 : 0;
    }
    CHECK(agree >= trials * 95 / 100);
}

TEST_CASE("spotting AP hand cases") {
    const AnnotationTrack one = track(600, {{100, 1}}, 2);
    CHECK(spotting_ap({spot(100, 1, .9)}, one, 1, 5.0) == 1.0);
    CHECK(spotting_ap({}, one, 1, 5.0) == 0.0);

    const std::vector<SpotCandidate> miss_then_hit = {spot(120, 1, .9), spot(102, 1, .4)};
    CHECK(spotting_ap(miss_then_hit, one, 1, 5.0) == 0.5);
    const auto pr = pr_curve(miss_then_hit, one, 1, 5.0);
    REQUIRE(pr.size() == 2);
    CHECK(pr[0] == std::pair<double, double>{0.0, 0.0});
    CHECK(pr[1] == std::pair<double, double>{1.0, 0.5});

    CHECK(pr_curve({spot(100, 1, .9)}, one, 1, 5.0) == std::vector<std::pair<double, double>>{{1.0, 1.0}});
    CHECK(pr_curve({}, one, 1, 5.0).empty());

    const AnnotationTrack three = track(600, {{100, 1}, {200, 1}, {300, 1}}, 2);
    const std::vector<SpotCandidate> exact = {spot(100, 1, .3), spot(200, 1, .9), spot(300, 1, .5)};
    CHECK(spotting_ap(exact, three, 1, 5.0) == 1.0);
    // Equal confidences form one threshold group.
    const std::vector<SpotCandidate> tied = {spot(100, 1, .5), spot(150, 1, .5)};
    CHECK(pr_curve(tied, three, 1, 5.0).size() == 1);
    CHECK(spotting_ap(tied, three, 1, 5.0) == doctest::Approx(1.0 / 6.0));
}

TEST_CASE("spotting AP equals exhaustive threshold enumeration") {
    Rng rng(77);
    for (int trial = 0; trial < 300; ++trial) {
        std::vector<AnnotatedEvent> events;
        for (int s = 0; s < 120; s += 1 + static_cast<int>(rng.below(40))) {
            events.push_back({s, 1});
        }
        const AnnotationTrack anchors = track(200, events, 2);
        std::vector<double> anchor_secs;
        for (const auto& e : anchors.events) {
            anchor_secs.push_back(e.second);
        }
        std::vector<SpotCandidate> spots;
        for (std::size_t i = rng.below(11); i > 0; --i) {
            const double conf = std::round(rng.uniform() * 10.0) / 10.0;  // ties are common
            spots.push_back(spot(std::round(rng.uniform(0.0, 130.0) * 2.0) / 2.0, 1, conf));
        }
        const double delta = 1.0 + static_cast<double>(rng.below(10));
        const double ap = spotting_ap(spots, anchors, 1, delta);
        CHECK(std::abs(ap - oracle_ap(spots, anchor_secs, delta)) <= 1e-9);
        CHECK(ap >= 0.0);
        CHECK(ap <= 1.0);

        // Reordering candidates with distinct confidences does not change AP.
        std::vector<SpotCandidate> reversed(spots.rbegin(), spots.rend());
        CHECK(spotting_ap(reversed, anchors, 1, delta) == ap);
    }
}

TEST_CASE("mAP and average mAP") {
    const AnnotationTrack anchors = track(1000, {{100, 1}, {400, 1}, {250, 2}}, 4);
    const std::vector<SpotCandidate> exact = {spot(100, 1, .9), spot(400, 1, .8), spot(250, 2, .7)};
    const MapResult r = spotting_map(exact, anchors, 5.0);
    CHECK(r.map == 1.0);
    CHECK(r.ap[3] == 0.0);
    CHECK(average_map(exact, anchors, parse_delta_grid("5:60:5")) == 1.0);

    const std::vector<SpotCandidate> off = {spot(108, 1, .9), spot(430, 1, .8), spot(262, 2, .7)};
    std::vector<MapResult> per;
    const double avg = average_map(off, anchors, {5.0}, &per);
    CHECK(avg == spotting_map(off, anchors, 5.0).map);
    per.clear();
    const double full = average_map(off, anchors, parse_delta_grid("5:60:5"), &per);
    REQUIRE(per.size() == 12);
    double lo = 1.0, hi = 0.0;
    for (std::size_t i = 0; i < per.size(); ++i) {
        lo = std::min(lo, per[i].map);
        hi = std::max(hi, per[i].map);
        if (i > 0) {
            CHECK(per[i].map >= per[i - 1].map);
        }
    }
    CHECK(full >= lo);
    CHECK(full <= hi);
    CHECK(map_curve_csv({per[0], per[1]}) == "delta,map\n5,0.000000\n10,0.250000\n");
}

TEST_CASE("delta grid parsing") {
    const std::vector<double> grid = parse_delta_grid("5:60:5");
    REQUIRE(grid.size() == 12);
    CHECK(grid.front() == 5.0);
    CHECK(grid.back() == 60.0);
    CHECK(parse_delta_grid("1,2.5,10") == std::vector<double>{1.0, 2.5, 10.0});
    CHECK(parse_delta_grid("7") == std::vector<double>{7.0});
    CHECK_THROWS_AS(parse_delta_grid("5:60"), Error);
    CHECK_THROWS_AS(parse_delta_grid("3,2"), Error);
    CHECK_THROWS_AS(parse_delta_grid("a"), Error);
    CHECK_THROWS_AS(parse_delta_grid("5:1:1"), Error);
}

TEST_CASE("report csv") {
    const AnnotationTrack gts = track(60, {{10, 1}, {20, 2}});
    const EvalReport r = tolerance_f1({pred(10, 1, .9), pred(40, 2, .8)}, gts, 1.0);
    CHECK(r.to_csv() ==
          "class,precision,recall,f1,tp,fp,fn\n"
          "c1,1.000000,1.000000,1.000000,1,0,0\n"
          "c2,0.000000,0.000000,0.000000,0,1,1\n"
          "average,0.500000,0.500000,0.500000,1,1,1\n");
    const AnnotationTrack one = track(600, {{100, 1}}, 2);
    CHECK(pr_curve_csv({spot(120, 1, .9), spot(102, 1, .4)}, one, 5.0) ==
          "class,delta,recall,precision\nc1,5,0.000000,0.000000\nc1,5,1.000000,0.500000\n");
}
