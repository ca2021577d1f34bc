#include "mrtcn/ablation.hpp"

#include "mrtcn/error.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>

namespace mrtcn {

std::vector<AblationArm> default_ablation_arms() {
    std::vector<AblationArm> arms;
    for (const char* text : {"t1", "t2", "t3", "t1+t1+t1", "t2+t2+t2", "t3+t3+t3", "t1+t2+t3"}) {
        arms.push_back(parse_ablation_arm(text));
    }
    return arms;
}

AblationArm parse_ablation_arm(const std::string& text) {
    AblationArm arm;
    std::size_t start = 0;
    while (start <= text.size()) {
        const std::size_t plus = text.find('+', start);
        std::string tower = text.substr(start, plus == std::string::npos ? std::string::npos : plus - start);
        std::transform(tower.begin(), tower.end(), tower.begin(), [](unsigned char ch) { return std::tolower(ch); });
        reference_tower(tower);
        arm.towers.push_back(tower);
        if (plus == std::string::npos) {
            break;
        }
        start = plus + 1;
    }
    for (std::size_t i = 0; i < arm.towers.size(); ++i) {
        std::string upper = arm.towers[i];
        upper[0] = 'T';
        arm.name += (i ? "+" : "") + upper;
    }
    return arm;
}

EvalReport ablation_report(Network& net, const Dataset& eval_data, double delta) {
    const ProbabilityCurve curve = sliding_window_predict(net, eval_data.features, InferOptions{64, false});
    return tolerance_f1(decode_predictions(curve), eval_data.annotations, delta);
}

std::vector<AblationRow> run_ablation(const std::vector<AblationArm>& arms, const Dataset& train_data,
                                      const Dataset& eval_data, const AblationSetup& setup,
                                      const std::function<void(const AblationRow&)>& on_row) {
    require(!arms.empty(), ErrorKind::Config, "ablation needs at least one configuration");
    std::vector<AblationRow> rows;
    for (const AblationArm& arm : arms) {
        const NetworkSpec spec = build_network(arm.towers, train_data.features.dim, train_data.num_classes(),
                                               setup.hidden_channels, HeadMode::Dense, setup.sampler.window_len);
        Trainer trainer(spec, train_data, setup.sampler, setup.train);
        AblationRow row;
        row.arm = arm;
        row.trace = trainer.run();
        row.final_loss = row.trace.tail_mean(setup.loss_window);
        row.report = ablation_report(trainer.network(), eval_data, setup.delta);
        if (on_row) {
            on_row(row);
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
    std::string out = "configuration";
    if (!rows.empty()) {
        for (const ClassScore& s : rows.front().report.classes) {
            out += "," + s.name;
        }
    }
    out += ",average,final_loss\n";
    char buf[48];
    for (const AblationRow& row : rows) {
        out += row.arm.name;
        for (const ClassScore& s : row.report.classes) {
            std::snprintf(buf, sizeof buf, ",%.6f", s.f1);
            out += buf;
        }
        std::snprintf(buf, sizeof buf, ",%.6f,%.6f\n", row.report.macro_f1, row.final_loss);
        out += buf;
    }
    return out;
}

}  // namespace mrtcn
