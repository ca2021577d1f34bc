#include "mrtcn/commands.hpp"

#include "mrtcn/binary_io.hpp"
#include "mrtcn/error.hpp"
#include "mrtcn/train.hpp"

#include <chrono>
#include <cstdio>
#include <sstream>

namespace mrtcn {

namespace {

const char* const kSplits[] = {"train", "val", "test"};

std::string format(const char* fmt, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, fmt, args...);
    return buf;
}

void ensure_dir(const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    require(!ec, ErrorKind::Io, "cannot create directory " + dir.string() + ": " + ec.message());
}

std::string join(const std::vector<std::size_t>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        s += (i ? "," : "") + std::to_string(v[i]);
    }
    return s;
}

std::string file_arm_name(const AblationArm& arm) {
    std::string s;
    for (std::size_t i = 0; i < arm.towers.size(); ++i) {
        s += (i ? "_" : "") + arm.towers[i];
    }
    return s;
}

Network load_network(const RunConfig& cfg, const std::filesystem::path& checkpoint, const Dataset& data) {
    const NetworkSpec expected = cfg.network_spec(data.features.dim, data.num_classes());
    Checkpoint ckpt = load_checkpoint(checkpoint, expected);
    return Network(std::move(ckpt.spec), std::move(ckpt.params));
}

}  // namespace

std::filesystem::path features_path(const std::filesystem::path& dir, const std::string& split) {
    return dir / (split + ".fseq");
}

std::filesystem::path annotations_path(const std::filesystem::path& dir, const std::string& split) {
    return dir / (split + ".jsonl");
}

Dataset load_split(const std::filesystem::path& dir, const std::string& split) {
    return load_dataset(features_path(dir, split), annotations_path(dir, split));
}

std::set<int> rare_classes(const EvalConfig& cfg, const AnnotationTrack& train_track) {
    if (cfg.rare_classes.empty()) {
        return default_rare_classes(train_track);
    }
    std::set<int> rare;
    for (int c : cfg.rare_classes) {
        require(c > 0 && static_cast<std::size_t>(c) < train_track.num_classes(), ErrorKind::Config,
                "eval.rare_classes: class id " + std::to_string(c) + " is not an event class");
        rare.insert(c);
    }
    return rare;
}

DenseEvaluation evaluate_dense(Network& net, const Dataset& data, const EvalConfig& cfg, const std::set<int>& rare) {
    require(net.spec().head == HeadMode::Dense, ErrorKind::Config,
            "eval needs a dense-head network; use spot for average heads");
    DenseEvaluation out;
    InferOptions opts;
    opts.batch_size = cfg.batch_size;
    opts.merge = cfg.postprocess;
    out.curve = sliding_window_predict(net, data.features, opts);
    out.raw = decode_predictions(out.curve);
    out.raw_report = tolerance_f1(out.raw, data.annotations, cfg.delta);
    if (cfg.postprocess) {
        out.processed = suppress_consecutive(out.raw, rare);
        out.report = tolerance_f1(out.processed, data.annotations, cfg.delta);
    } else {
        out.report = out.raw_report;
    }
    return out;
}

SpotEvaluation evaluate_spotting(Network& net, const Dataset& data, const SpotConfig& cfg, std::size_t batch_size) {
    require(net.spec().head == HeadMode::Average, ErrorKind::Config,
            "spot needs an average-head network (network.head = \"average\")");
    SpotEvaluation out;
    InferOptions opts;
    opts.batch_size = batch_size;
    out.curve = sliding_window_predict(net, data.features, opts);
    out.spots = spot_all(out.curve, cfg.threshold);
    out.grid = parse_delta_grid(cfg.delta_grid);
    out.average_map = average_map(out.spots, data.annotations, out.grid, &out.per_delta);
    return out;
}

std::string cmd_synth(const RunConfig& cfg, const std::filesystem::path& out_dir) {
    cfg.validate();
    const SyntheticData data = gen_synthetic(cfg.synth_spec());
    const std::vector<SyntheticData> parts = split_contiguous(data, cfg.splits);
    ensure_dir(out_dir);
    std::string summary;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        save_features(features_path(out_dir, kSplits[i]), parts[i].features);
        save_annotations(annotations_path(out_dir, kSplits[i]), parts[i].annotations);
        summary += format("%s: %d s, %zu frames, %zu events\n", kSplits[i], parts[i].annotations.duration_sec,
                          parts[i].features.frames, parts[i].annotations.events.size());
    }
    write_file(out_dir / "config.json", dump_config(cfg));
    return summary;
}

std::string cmd_train(const RunConfig& cfg, const std::filesystem::path& data_dir,
                      const std::filesystem::path& out_dir, const std::filesystem::path& resume, const LogSink& log) {
    cfg.validate();
    const Dataset train = load_split(data_dir, "train");
    const NetworkSpec spec = cfg.network_spec(train.features.dim, train.num_classes());
    const TrainConfig tc = cfg.train_config();
    tc.validate(train.num_classes());
    ensure_dir(out_dir);

    std::optional<Trainer> trainer;
    if (resume.empty()) {
        trainer.emplace(spec, train, cfg.sampler_config(), tc);
    } else {
        trainer.emplace(load_checkpoint(resume, spec), train, cfg.sampler_config(), tc);
    }

    std::optional<Dataset> val;
    std::string val_csv = "iteration,macro_f1\n";
    const std::set<int> rare = rare_classes(cfg.eval, train.annotations);
    auto on_eval = [&](std::size_t iteration, Network& net) {
        if (!val) {
            val = load_split(data_dir, "val");
        }
        double score = 0.0;
        if (spec.head == HeadMode::Dense) {
            score = evaluate_dense(net, *val, cfg.eval, rare).report.macro_f1;
        } else {
            score = evaluate_spotting(net, *val, cfg.spot, cfg.eval.batch_size).average_map;
        }
        val_csv += format("%zu,%.6f\n", iteration, score);
        if (log) {
            log(format("iteration %zu: val %s %.4f", iteration,
                       spec.head == HeadMode::Dense ? "macro F1" : "average-mAP", score));
        }
    };
    const std::size_t start = trainer->iteration();
    const LossTrace trace = trainer->run(on_eval);

    save_checkpoint(out_dir / "checkpoint.ttck", trainer->checkpoint());
    trace.save(out_dir / "loss.csv");
    if (tc.eval_every > 0) {
        write_file(out_dir / "val_f1.csv", val_csv);
    }
    write_file(out_dir / "config.json", dump_config(cfg));
    return format("trained iterations %zu..%zu, mean loss of the last %zu: %.6f\n", start + 1,
                  trainer->iteration(), std::min<std::size_t>(trace.points.size(), 1000), trace.tail_mean(1000));
}

std::string cmd_eval(const RunConfig& cfg, const std::filesystem::path& checkpoint,
                     const std::filesystem::path& data_dir, const std::filesystem::path& out_dir) {
    cfg.validate();
    const Dataset data = load_split(data_dir, cfg.eval.split);
    Network net = load_network(cfg, checkpoint, data);
    const AnnotationTrack train_track = load_annotations(annotations_path(data_dir, "train"));
    const DenseEvaluation ev = evaluate_dense(net, data, cfg.eval, rare_classes(cfg.eval, train_track));
    ensure_dir(out_dir);
    const std::string csv = ev.report.to_csv();
    write_file(out_dir / "eval.csv", csv);
    return csv;
}

std::string cmd_spot(const RunConfig& cfg, const std::filesystem::path& checkpoint,
                     const std::filesystem::path& data_dir, const std::filesystem::path& out_dir) {
    cfg.validate();
    const Dataset data = load_split(data_dir, cfg.spot.split);
    Network net = load_network(cfg, checkpoint, data);
    const SpotEvaluation ev = evaluate_spotting(net, data, cfg.spot, cfg.eval.batch_size);
    ensure_dir(out_dir);
    write_file(out_dir / "spots.csv", spots_to_csv(ev.spots, data.annotations.class_names));
    write_file(out_dir / "map_curve.csv", map_curve_csv(ev.per_delta));
    std::string pr = "class,delta,recall,precision\n";
    for (double delta : ev.grid) {
        const std::string part = pr_curve_csv(ev.spots, data.annotations, delta);
        pr += part.substr(part.find('\n') + 1);
    }
    write_file(out_dir / "pr_curve.csv", pr);
    return format("%zu candidates, average-mAP %.6f over %zu tolerances\n", ev.spots.size(), ev.average_map,
                  ev.grid.size());
}

RfReport cmd_rf(const RunConfig& cfg, bool first_block_only) {
    cfg.validate();
    const NetworkSpec spec = cfg.network_spec(1, 2);
    RfReport report;
    std::ostringstream out;
    out << "tower,lengths,rf,jump,left_offset,probe_agrees\n";
    for (const TowerSpec& full : spec.towers) {
        TowerSpec tower = full;
        if (first_block_only) {
            tower.layers.resize(1);
        }
        const ReceptiveFieldInfo rf = receptive_field(tower);
        const bool agree = analytic_influence(tower, spec.input_len) == probe_receptive_field(tower, spec.input_len);
        report.agree = report.agree && agree;
        out << tower.name << ",\"" << join(output_length(tower, spec.input_len)) << "\"," << rf.rf << ','
            << rf.jump << ',' << rf.left_offset << ',' << (agree ? "yes" : "no") << '\n';
    }
    report.table = out.str();
    return report;
}

GradcheckReport cmd_gradcheck(std::uint64_t seed, const GradCheckRegistry& registry) {
    GradcheckReport report;
    std::string table = "op,problems,max_rel_error,tolerance,result\n";
    for (const GradCheckResult& r : registry.run_all(seed)) {
        table += format("%s,%zu,%.3e,%.0e,%s\n", r.name.c_str(), r.problems, r.max_rel_error, r.tolerance,
                        r.passed() ? "pass" : "FAIL");
        report.passed = report.passed && r.passed();
    }
    report.table = table;
    return report;
}

std::string cmd_ablate(const RunConfig& cfg, const std::filesystem::path& data_dir,
                       const std::filesystem::path& out_dir, const LogSink& log) {
    cfg.validate();
    const Dataset train = load_split(data_dir, "train");
    const Dataset test = load_split(data_dir, cfg.eval.split);
    ensure_dir(out_dir);
    const std::vector<AblationRow> rows =
        run_ablation(cfg.ablation_arms(), train, test, cfg.ablation_setup(), [&](const AblationRow& row) {
            row.trace.save(out_dir / ("loss_" + file_arm_name(row.arm) + ".csv"));
            if (log) {
                log(format("%s: macro F1 %.4f, final loss %.6f", row.arm.name.c_str(), row.report.macro_f1,
                           row.final_loss));
            }
        });
    const std::string csv = ablation_csv(rows);
    write_file(out_dir / "ablation.csv", csv);
    return csv;
}

}  // namespace mrtcn
