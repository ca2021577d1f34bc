// Acceptance suite: one PASS/FAIL line per criterion. Pass criterion numbers
// as arguments to run a subset. Exit status is nonzero if any criterion fails.

#include "mrtcn/ablation.hpp"
#include "mrtcn/binary_io.hpp"
#include "mrtcn/commands.hpp"
#include "mrtcn/config.hpp"
#include "mrtcn/gradcheck.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <sys/wait.h>
#include <vector>

using namespace mrtcn;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
    bool pass = true;
    std::vector<std::string> notes;

    void check(bool ok, const std::string& what) {
        notes.push_back(std::string(ok ? "ok    " : "FAIL  ") + what);
        pass = pass && ok;
    }
    void note(const std::string& what) { notes.push_back("      " + what); }
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("mrtcn_acceptance_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

RunConfig dense_config() { return load_config(fs::path(MRTCN_SOURCE_DIR) / "configs" / "dense.json"); }
RunConfig sparse_config() { return load_config(fs::path(MRTCN_SOURCE_DIR) / "configs" / "sparse.json"); }

struct Splits {
    Dataset train, val, test;
};

Splits make_splits(const RunConfig& cfg) {
    const std::vector<SyntheticData> parts = split_contiguous(gen_synthetic(cfg.synth_spec()), cfg.splits);
    return {{parts[0].features, parts[0].annotations},
            {parts[1].features, parts[1].annotations},
            {parts[2].features, parts[2].annotations}};
}

// ---------------------------------------------------------------------------

Outcome gradient_correctness() {
    Outcome out;
    const auto t0 = Clock::now();
    const GradCheckRegistry registry = GradCheckRegistry::builtin();
    const std::set<std::string> required = {"conv1d", "batchnorm1d", "relu", "softmax_cross_entropy",
                                            "tconv_block", "network"};
    for (const std::string& name : required) {
        out.check(registry.contains(name), "registered: " + name);
    }
    for (const GradCheckResult& r : registry.run_all(42)) {
        const double tol = r.name == "network" ? 1e-3 : 1e-4;
        out.check(r.max_rel_error < tol, fmt("%-22s %zu problems, max rel err %.3e < %.0e", r.name.c_str(),
                                             r.problems, r.max_rel_error, tol));
    }
    const double s = seconds_since(t0);
    out.check(s < 60.0, fmt("runtime %.1f s < 60 s", s));
    return out;
}

Outcome architecture_fidelity() {
    Outcome out;
    const auto t0 = Clock::now();
    const NetworkSpec spec = build_default_network(16, 4);
    const std::map<std::string, std::vector<std::size_t>> lengths = {
        {"t1", {10, 4, 2}}, {"t2", {6, 4, 2}}, {"t3", {15, 5, 2}}};
    const std::map<std::string, long> first_rf = {{"t1", 3}, {"t2", 5}, {"t3", 2}};
    const std::map<std::string, long> full_rf = {{"t1", 27}, {"t2", 20}, {"t3", 18}};
    out.check(spec.input_len == 30 && spec.output_len == 2, "t = 30 maps to t0 = 2");
    for (const TowerSpec& tower : spec.towers) {
        const std::vector<std::size_t> got = output_length(tower, 30);
        out.check(got == lengths.at(tower.name), tower.name + " per-layer lengths");
        const long rf1 = receptive_field(std::span<const LayerSpec>(tower.layers.data(), 1)).rf;
        out.check(rf1 == first_rf.at(tower.name), fmt("%s first-block rf %ld", tower.name.c_str(), rf1));
        const long rf = receptive_field(tower).rf;
        out.check(rf == full_rf.at(tower.name), fmt("%s full rf %ld", tower.name.c_str(), rf));
        for (std::size_t t_in : {30, 60}) {
            const auto analytic = analytic_influence(tower, t_in);
            const auto probed = probe_receptive_field(tower, t_in);
            out.check(analytic == probed, fmt("%s analytic influence sets == probe (t_in %zu)", tower.name.c_str(),
                                              t_in));
            if (t_in == 60) {
                // Interior nodes see no padding, so their span is the full rf.
                bool spans = true;
                for (std::size_t j = 1; j + 1 < probed.size(); ++j) {
                    spans = spans && !probed[j].empty() &&
                            *probed[j].rbegin() - *probed[j].begin() + 1 == full_rf.at(tower.name);
                }
                out.check(spans, tower.name + " probed span of interior nodes == rf");
            }
        }
    }
    const double s = seconds_since(t0);
    out.check(s < 10.0, fmt("runtime %.1f s < 10 s", s));
    return out;
}

// Shared by criteria 3, 4 and 5.
struct DenseRun {
    RunConfig cfg;
    Splits data;
    std::optional<Network> net;
    LossTrace trace;
    double train_seconds = 0.0;
};

DenseRun& dense_run() {
    static DenseRun run = [] {
        DenseRun r;
        r.cfg = dense_config();
        r.cfg.train.log_every = 0;
        r.data = make_splits(r.cfg);
        const auto t0 = Clock::now();
        Trainer trainer(r.cfg.network_spec(r.data.train.features.dim, r.data.train.num_classes()), r.data.train,
                        r.cfg.sampler_config(), r.cfg.train_config());
        r.trace = trainer.run();
        r.train_seconds = seconds_since(t0);
        r.net = trainer.network();
        return r;
    }();
    return run;
}

Outcome training_sanity() {
    Outcome out;
    const auto t0 = Clock::now();
    const RunConfig cfg = dense_config();
    const Splits data = make_splits(cfg);
    out.check(cfg.synth.num_classes == 4 && cfg.synth.pattern_frames == std::vector<std::size_t>({3, 8, 15}),
              "3 event classes with pattern durations {3, 8, 15} frames");

    WindowSampler sampler(data.train, cfg.sampler_config());
    const Batch batch = sampler.sample_batch(cfg.train.batch_size);
    const NetworkSpec spec = cfg.network_spec(data.train.features.dim, data.train.num_classes());
    const TrainConfig tc = cfg.train_config();
    Network net(spec, tc.seed);
    const std::vector<double> weights = tc.weights(spec.num_classes);
    std::size_t reached = 0;
    double loss = 0.0;
    for (std::size_t it = 1; it <= 500 && reached == 0; ++it) {
        loss = train_step(net, batch, weights, tc, it);
        if (loss < 0.05) {
            reached = it;
        }
    }
    out.check(reached > 0, reached ? fmt("fixed batch loss %.4f < 0.05 at iteration %zu (<= 500)", loss, reached)
                                   : fmt("fixed batch loss %.4f after 500 iterations", loss));
    const double fixed_seconds = seconds_since(t0);

    DenseRun& run = dense_run();
    out.check(cfg.train.iterations <= 5000, fmt("full training: %zu iterations", cfg.train.iterations));
    const std::set<int> rare = rare_classes(run.cfg.eval, run.data.train.annotations);
    const DenseEvaluation ev = evaluate_dense(*run.net, run.data.test, run.cfg.eval, rare);
    for (const ClassScore& c : ev.report.classes) {
        out.note(fmt("%s: P %.4f R %.4f F1 %.4f", c.name.c_str(), c.precision, c.recall, c.f1));
    }
    out.check(ev.report.macro_f1 >= 0.80, fmt("test macro F1 %.4f >= 0.80 at delta 1 s", ev.report.macro_f1));
    const double s = fixed_seconds + run.train_seconds;
    out.check(s < 600.0, fmt("runtime %.1f s < 600 s", s));
    return out;
}

Outcome ablation_direction() {
    Outcome out;
    DenseRun& run = dense_run();
    const AblationSetup setup = run.cfg.ablation_setup();
    std::vector<AblationArm> arms;
    for (const AblationArm& arm : default_ablation_arms()) {
        if (arm.towers != run.cfg.network.towers) {
            arms.push_back(arm);
        }
    }
    // The mixed arm is the criterion-3 run: same spec, seeds and data.
    AblationRow mixed;
    mixed.arm = parse_ablation_arm("t1+t2+t3");
    mixed.trace = run.trace;
    mixed.final_loss = run.trace.tail_mean(setup.loss_window);
    mixed.report = ablation_report(*run.net, run.data.test, setup.delta);

    std::vector<AblationRow> rows = run_ablation(arms, run.data.train, run.data.test, setup);
    rows.push_back(mixed);
    double best_single = 0.0, best_repeated = 0.0;
    for (const AblationRow& row : rows) {
        out.note(fmt("%-9s macro F1 %.4f  final-%zu loss %.6f", row.arm.name.c_str(), row.report.macro_f1,
                     setup.loss_window, row.final_loss));
        if (row.arm.towers.size() == 1) {
            best_single = std::max(best_single, row.report.macro_f1);
        } else if (row.arm.name != mixed.arm.name) {
            best_repeated = std::max(best_repeated, row.report.macro_f1);
        }
    }
    out.check(mixed.report.macro_f1 >= best_single - 0.02,
              fmt("mixed F1 %.4f >= best single %.4f - 0.02", mixed.report.macro_f1, best_single));
    out.check(mixed.report.macro_f1 >= best_repeated - 0.02,
              fmt("mixed F1 %.4f >= best repeated %.4f - 0.02", mixed.report.macro_f1, best_repeated));
    for (const AblationRow& row : rows) {
        if (row.arm.towers.size() == 3 && row.arm.name != mixed.arm.name) {
            out.check(mixed.final_loss <= row.final_loss,
                      fmt("mixed final loss %.6f <= %s %.6f", mixed.final_loss, row.arm.name.c_str(),
                          row.final_loss));
        }
    }
    return out;
}

Outcome post_processing() {
    Outcome out;
    {
        const std::vector<double> a = {0.1, 0.9}, b = {0.6, 0.4}, c = {0.9, 0.1};
        out.check(merge_duplicates(a, a).data() == a.data(), "merge: identical rows give that row");
        out.check(merge_duplicates(a, b).data() == a.data() && merge_duplicates(b, a).data() == a.data(),
                  "merge: [.1,.9] vs [.6,.4] gives [.1,.9]");
        out.check(merge_duplicates(a, c).data() == a.data() && merge_duplicates(c, a).data() == c.data(),
                  "merge: tie keeps the earlier window's row");
    }
    {
        // Classes: 0 background, 1 Play-like, 2 Faceoff-like (rare).
        const std::vector<EventPrediction> run = {{10, 2, 0.9, {0.05, 0.05, 0.9}}, {11, 2, 0.7, {0.0, 0.5, 0.7}}};
        // Rows need not sum to 1 for the rule; the second-best of second 11 is class 1 at .5.
        const auto got = suppress_consecutive(run, {2});
        out.check(got.size() == 2 && got[0].class_id == 2 && got[0].confidence == 0.9 && got[1].class_id == 1 &&
                      got[1].confidence == 0.5,
                  "suppress: [F@.9, F@.7 (second-best P@.5)] gives [F@.9, P@.5]");
        const std::vector<EventPrediction> single = {{10, 2, 0.9, {0.05, 0.05, 0.9}}, {11, 1, 0.6, {0.1, 0.6, 0.3}},
                                                     {12, 2, 0.8, {0.1, 0.1, 0.8}}};
        const auto same = suppress_consecutive(single, {2});
        bool untouched = same.size() == single.size();
        for (std::size_t i = 0; untouched && i < same.size(); ++i) {
            untouched = same[i].class_id == single[i].class_id && same[i].confidence == single[i].confidence;
        }
        out.check(untouched, "suppress: runs of length 1 untouched");
        const std::vector<EventPrediction> common = {{10, 1, 0.9, {0.05, 0.9, 0.05}}, {11, 1, 0.7, {0.2, 0.7, 0.1}},
                                                     {12, 0, 0.8, {0.8, 0.1, 0.1}}, {13, 0, 0.9, {0.9, 0.1, 0.0}}};
        const auto kept = suppress_consecutive(common, {2});
        bool all_same = true;
        for (std::size_t i = 0; i < kept.size(); ++i) {
            all_same = all_same && kept[i].class_id == common[i].class_id;
        }
        out.check(all_same, "suppress: non-rare runs (Play-like, background) untouched");
    }
    DenseRun& run = dense_run();
    const std::set<int> rare = rare_classes(run.cfg.eval, run.data.train.annotations);
    EvalConfig on = run.cfg.eval;
    on.postprocess = true;
    EvalConfig off = on;
    off.postprocess = false;
    const double pipeline = evaluate_dense(*run.net, run.data.test, on, rare).report.macro_f1;
    const double raw = evaluate_dense(*run.net, run.data.test, off, rare).report.macro_f1;
    out.check(pipeline >= raw - 0.005,
              fmt("pipeline F1 %.4f >= raw argmax F1 %.4f - 0.005 (difference %+.4f)", pipeline, raw, pipeline - raw));
    return out;
}

// Independent spotting AP: re-match from scratch at every distinct confidence
// threshold, then integrate the best precision reaching each recall k/N.
double enumerated_ap(const std::vector<SpotCandidate>& spots, const std::vector<double>& anchors, double delta) {
    if (anchors.empty()) {
        return 0.0;
    }
    const double n = static_cast<double>(anchors.size());
    std::set<double> thresholds;
    for (const SpotCandidate& s : spots) {
        thresholds.insert(s.confidence);
    }
    std::vector<std::pair<double, double>> points;
    for (double tau : thresholds) {
        std::vector<const SpotCandidate*> kept;
        for (const SpotCandidate& s : spots) {
            if (s.confidence >= tau) {
                kept.push_back(&s);
            }
        }
        std::stable_sort(kept.begin(), kept.end(), [](const SpotCandidate* a, const SpotCandidate* b) {
            return a->confidence != b->confidence ? a->confidence > b->confidence : a->center_sec < b->center_sec;
        });
        std::vector<bool> taken(anchors.size(), false);
        double tp = 0.0;
        for (const SpotCandidate* s : kept) {
            int best = -1;
            for (std::size_t g = 0; g < anchors.size(); ++g) {
                const double d = std::abs(s->center_sec - anchors[g]);
                if (!taken[g] && d <= delta && (best < 0 || d < std::abs(s->center_sec - anchors[best]))) {
                    best = static_cast<int>(g);
                }
            }
            if (best >= 0) {
                taken[best] = true;
                tp += 1.0;
            }
        }
        points.emplace_back(tp / n, tp / static_cast<double>(kept.size()));
    }
    double ap = 0.0;
    for (std::size_t k = 1; k <= anchors.size(); ++k) {
        double best = 0.0;
        for (const auto& [r, p] : points) {
            if (r >= static_cast<double>(k) / n - 1e-12) {
                best = std::max(best, p);
            }
        }
        ap += best / n;
    }
    return ap;
}

Outcome metric_oracles() {
    Outcome out;
    const auto t0 = Clock::now();
    Rng rng(2024);
    const std::vector<std::string> names = {"background", "c1", "c2", "c3"};

    // Greedy tolerance matching vs exhaustive maximum matching.
    int agree = 0;
    std::size_t discrepancies = 0;
    for (int inst = 0; inst < 1000; ++inst) {
        AnnotationTrack gts;
        gts.duration_sec = 120;
        gts.class_names = names;
        std::vector<EventPrediction> preds;
        std::map<int, std::vector<double>> pred_secs, gt_secs;
        for (int c = 1; c <= 3; ++c) {
            std::set<int> used;
            for (std::size_t i = rng.below(9); i > 0; --i) {
                const int s = static_cast<int>(rng.below(120));
                if (used.insert(s).second) {
                    gts.events.push_back({s, c});
                    gt_secs[c].push_back(s);
                }
            }
            for (std::size_t i = rng.below(9); i > 0; --i) {
                const int s = static_cast<int>(rng.below(120));
                preds.push_back({s, c, rng.uniform(), {}});
                pred_secs[c].push_back(s);
            }
        }
        gts.normalize();
        const EvalReport r = tolerance_f1(preds, gts, 1.0);
        bool same = true;
        for (const ClassScore& s : r.classes) {
            const std::size_t best = brute_force_match(pred_secs[s.class_id], gt_secs[s.class_id], 1.0);
            if (s.tp != best) {
                same = false;
                ++discrepancies;
                out.note(fmt("instance %d class %s: greedy %zu vs optimum %zu", inst, s.name.c_str(), s.tp, best));
            }
        }
        agree += same ? 1 : 0;
    }
    out.check(agree >= 995, fmt("greedy == brute force on %d / 1000 instances (>= 99.5%%), %zu class discrepancies",
                                agree, discrepancies));

    // Spotting AP vs exhaustive PR enumeration.
    double worst = 0.0;
    for (int inst = 0; inst < 500; ++inst) {
        AnnotationTrack anchors;
        anchors.duration_sec = 300;
        anchors.class_names = {"background", "c1"};
        std::vector<double> secs;
        for (std::size_t i = 1 + rng.below(6); i > 0; --i) {
            const int s = static_cast<int>(rng.below(300));
            if (std::find(secs.begin(), secs.end(), s) == secs.end()) {
                secs.push_back(s);
                anchors.events.push_back({s, 1});
            }
        }
        anchors.normalize();
        std::sort(secs.begin(), secs.end());
        std::vector<SpotCandidate> spots;
        for (std::size_t i = rng.below(11); i > 0; --i) {
            const double centre = std::round(rng.uniform(0.0, 300.0) * 2.0) / 2.0;
            spots.push_back({centre, 1, std::round(rng.uniform() * 20.0) / 20.0, centre, centre});
        }
        const double delta = 5.0 * static_cast<double>(1 + rng.below(12));
        worst = std::max(worst, std::abs(spotting_ap(spots, anchors, 1, delta) - enumerated_ap(spots, secs, delta)));
    }
    out.check(worst <= 1e-9, fmt("AP == exhaustive enumeration on 500 instances, max |diff| %.2e <= 1e-9", worst));

    // mAP(delta) non-decreasing over the default grid.
    const std::vector<double> grid = parse_delta_grid("5:60:5");
    int monotone = 0;
    for (int inst = 0; inst < 100; ++inst) {
        AnnotationTrack anchors;
        anchors.duration_sec = 600;
        anchors.class_names = names;
        std::vector<SpotCandidate> spots;
        for (int c = 1; c <= 3; ++c) {
            std::set<int> used;
            for (std::size_t i = 1 + rng.below(8); i > 0; --i) {
                const int s = static_cast<int>(rng.below(600));
                if (used.insert(s).second) {
                    anchors.events.push_back({s, c});
                }
            }
            for (std::size_t i = rng.below(12); i > 0; --i) {
                const double centre = std::round(rng.uniform(0.0, 600.0) * 2.0) / 2.0;
                spots.push_back({centre, c, rng.uniform(), centre, centre});
            }
        }
        anchors.normalize();
        std::vector<MapResult> per;
        const double avg = average_map(spots, anchors, grid, &per);
        bool ok = true;
        double lo = 1.0, hi = 0.0;
        for (std::size_t i = 0; i < per.size(); ++i) {
            ok = ok && (i == 0 || per[i].map >= per[i - 1].map);
            lo = std::min(lo, per[i].map);
            hi = std::max(hi, per[i].map);
        }
        ok = ok && avg >= lo && avg <= hi;
        monotone += ok ? 1 : 0;
    }
    out.check(monotone == 100, fmt("mAP non-decreasing over delta 5..60 on %d / 100 instances", monotone));
    const double s = seconds_since(t0);
    out.check(s < 60.0, fmt("runtime %.1f s < 60 s", s));
    return out;
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(MRTCN_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    const int raw = std::system(cmd.c_str());
    return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
}

Outcome determinism() {
    Outcome out;
    const std::string config = (fs::path(MRTCN_SOURCE_DIR) / "configs" / "dense.json").string();
    const std::string small = " --config " + config +
                              " --seed 1234 --set synth.duration_sec=1500 --set synth.events_per_class=60"
                              " --set network.hidden_channels=16 --set train.log_every=0";
    std::vector<fs::path> roots;
    for (const char* name : {"run_a", "run_b"}) {
        const fs::path root = scratch(std::string("determinism_") + name);
        roots.push_back(root);
        const std::string data = (root / "data").string(), run = (root / "run").string();
        const bool ok = run_cli("synth" + small + " --out " + data) == 0 &&
                        run_cli("train" + small + " --iterations 300 --data " + data + " --out " + run) == 0 &&
                        run_cli("eval" + small + " --checkpoint " + run + "/checkpoint.ttck --data " + data +
                                " --out " + run) == 0;
        out.check(ok, std::string("synth + train + eval via the CLI (") + name + ")");
    }
    std::size_t compared = 0;
    for (const auto& entry : fs::recursive_directory_iterator(roots[0])) {
        if (!entry.is_regular_file()) {
            continue;
        }
        const fs::path rel = fs::relative(entry.path(), roots[0]);
        const fs::path other = roots[1] / rel;
        const bool same = fs::exists(other) && read_file(entry.path()) == read_file(other);
        out.check(same, "byte-identical " + rel.string());
        ++compared;
    }
    out.check(compared >= 10, fmt("%zu artifacts compared", compared));

    // Resume: 150 + 150 iterations against the uninterrupted 300.
    const fs::path root = scratch("determinism_resume");
    const std::string data = (roots[0] / "data").string();
    const std::string first = (root / "first").string(), second = (root / "second").string();
    const bool ok = run_cli("train" + small + " --iterations 150 --data " + data + " --out " + first) == 0 &&
                    run_cli("train" + small + " --iterations 300 --data " + data + " --out " + second +
                            " --resume " + first + "/checkpoint.ttck") == 0;
    out.check(ok, "train 150 iterations, then resume to 300");
    if (ok) {
        const std::string a = read_file(fs::path(first) / "loss.csv");
        const std::string b = read_file(fs::path(second) / "loss.csv");
        const std::string full = read_file(roots[0] / "run" / "loss.csv");
        out.check(a + b.substr(b.find('\n') + 1) == full, "resumed loss trace == uninterrupted trace (bytes)");
        out.check(read_file(fs::path(second) / "checkpoint.ttck") == read_file(roots[0] / "run" / "checkpoint.ttck"),
                  "resumed final checkpoint == uninterrupted checkpoint (bytes)");
    }
    return out;
}

Outcome spotting_pipeline() {
    Outcome out;
    const auto t0 = Clock::now();
    RunConfig cfg = sparse_config();
    cfg.train.log_every = 0;
    const fs::path root = scratch("spotting");
    cmd_synth(cfg, root / "data");
    const Dataset train = load_split(root / "data", "train");
    const double per_event = static_cast<double>(train.annotations.duration_sec) /
                             static_cast<double>(std::max<std::size_t>(1, train.annotations.events.size()));
    out.check(per_event >= 45.0 && per_event <= 75.0, fmt("one event per %.1f s", per_event));
    out.check(cfg.network.head == HeadMode::Average &&
                  std::abs(static_cast<double>(cfg.network.window_len) / cfg.synth.fps - 15.0) < 1e-9,
              "average-head model on 15 s windows");
    cmd_train(cfg, root / "data", root / "run");
    cmd_spot(cfg, root / "run" / "checkpoint.ttck", root / "data", root / "out");

    const std::string curve = read_file(root / "out" / "map_curve.csv");
    std::vector<double> maps;
    std::size_t pos = curve.find('\n') + 1;
    while (pos < curve.size()) {
        const std::size_t end = curve.find('\n', pos);
        const std::string line = curve.substr(pos, end - pos);
        maps.push_back(std::stod(line.substr(line.find(',') + 1)));
        pos = end + 1;
    }
    double mean = 0.0;
    bool monotone = true;
    for (std::size_t i = 0; i < maps.size(); ++i) {
        mean += maps[i] / static_cast<double>(maps.size());
        monotone = monotone && (i == 0 || maps[i] >= maps[i - 1]);
    }
    for (std::size_t a = 0, b; a < curve.size(); a = b + 1) {
        b = curve.find('\n', a);
        out.note(curve.substr(a, b - a));
    }
    out.check(maps.size() == 12, fmt("%zu tolerances in the grid 5..60", maps.size()));
    out.check(mean >= 0.70, fmt("average-mAP %.4f >= 0.70", mean));
    out.check(monotone, "emitted mAP-vs-delta curve is non-decreasing");
    const double s = seconds_since(t0);
    out.check(s < 600.0, fmt("runtime %.1f s < 600 s", s));
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    set_warnings_enabled(false);
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"gradient correctness", gradient_correctness},
        {"architecture fidelity", architecture_fidelity},
        {"training sanity", training_sanity},
        {"ablation direction", ablation_direction},
        {"post-processing", post_processing},
        {"metric oracles", metric_oracles},
        {"determinism and persistence", determinism},
        {"spotting pipeline", spotting_pipeline},
    };
    std::set<int> selected;
    for (int i = 1; i < argc; ++i) {
        selected.insert(std::atoi(argv[i]));
    }
    std::vector<std::string> summary;
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int number = static_cast<int>(i + 1);
        if (!selected.empty() && !selected.count(number)) {
            continue;
        }
        const auto t0 = Clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o.check(false, std::string("exception: ") + e.what());
        }
        std::printf("[%d] %s\n", number, criteria[i].first.c_str());
        for (const std::string& n : o.notes) {
            std::printf("    %s\n", n.c_str());
        }
        const std::string line = fmt("criterion %d %-28s %s  (%.1f s)", number, criteria[i].first.c_str(),
                                     o.pass ? "PASS" : "FAIL", seconds_since(t0));
        std::printf("%s\n\n", line.c_str());
        std::fflush(stdout);
        summary.push_back(line);
        failures += o.pass ? 0 : 1;
    }
    std::printf("summary\n");
    for (const std::string& line : summary) {
        std::printf("  %s\n", line.c_str());
    }
    return failures == 0 ? 0 : 1;
}
