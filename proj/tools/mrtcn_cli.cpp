// mrtcn: command-line front end over the C API.
//
// Exit codes: 0 success, 1 usage or config error, 2 runtime or numeric failure.

#include "mrtcn/mrtcn.h"

#include "CLI11.hpp"

#include <cstdio>
#include <functional>
#include <optional>
#include <string>
#include <type_traits>
#include <vector>

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

struct CommonOptions {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out = ".";
    std::vector<std::string> sets;
};

// Flag overrides, applied in order after --set.
struct Override {
    std::string key;
    std::function<std::optional<std::string>()> value;
};

int exit_code(mrtcn_status s) {
    switch (s) {
        case MRTCN_OK: return 0;
        case MRTCN_ERR_INVALID_ARGUMENT:
        case MRTCN_ERR_CONFIG: return kExitUsage;
        default: return kExitRuntime;
    }
}

int report(mrtcn_status s) {
    if (s != MRTCN_OK) {
        std::fprintf(stderr, "mrtcn: %s: %s\n", mrtcn_status_name(s), mrtcn_last_error());
    }
    return exit_code(s);
}

void print_and_free(char* text) {
    if (text != nullptr) {
        std::fputs(text, stdout);
        std::fflush(stdout);
        mrtcn_string_free(text);
    }
}

std::string quoted(const std::string& s) {
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"' || ch == '\\') {
            out += '\\';
        }
        out += ch;
    }
    return out + "\"";
}

std::string string_list(const std::string& csv) {
    std::string out = "[";
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = csv.find(',', start);
        out += (start ? "," : "") + quoted(csv.substr(start, comma - start));
        if (comma == std::string::npos) {
            break;
        }
        start = comma + 1;
    }
    return out + "]";
}

template <typename T>
std::function<std::optional<std::string>()> number_flag(const std::optional<T>& v) {
    return [&v]() -> std::optional<std::string> {
        if (!v) {
            return std::nullopt;
        }
        if constexpr (std::is_floating_point_v<T>) {
            char buf[32];
            std::snprintf(buf, sizeof buf, "%.17g", *v);
            return std::string(buf);
        } else {
            return std::to_string(*v);
        }
    };
}

std::function<std::optional<std::string>()> list_flag(const std::optional<std::string>& v) {
    return [&v]() -> std::optional<std::string> {
        if (!v) {
            return std::nullopt;
        }
        return string_list(*v);
    };
}

std::function<std::optional<std::string>()> string_flag(const std::optional<std::string>& v) {
    return [&v]() -> std::optional<std::string> {
        if (!v) {
            return std::nullopt;
        }
        return quoted(*v);
    };
}

void add_common(CLI::App* cmd, CommonOptions& common, bool with_out = true) {
    cmd->add_option("--config", common.config_path, "JSON run configuration");
    cmd->add_option("--seed", common.seed, "root seed (overrides the config)");
    if (with_out) {
        cmd->add_option("--out", common.out, "output directory")->capture_default_str();
    }
    cmd->add_option("--set", common.sets, "override one config key, e.g. --set train.lr=0.0005")
        ->type_name("KEY=JSON");
}

// Loads the config and applies --set, then flag overrides, then --seed.
mrtcn_status build_config(const CommonOptions& common, const std::vector<Override>& overrides, mrtcn_config** out) {
    mrtcn_status s = common.config_path.empty() ? mrtcn_config_default(out)
                                                : mrtcn_config_load(common.config_path.c_str(), out);
    if (s != MRTCN_OK) {
        return s;
    }
    for (const std::string& kv : common.sets) {
        const std::size_t eq = kv.find('=');
        if (eq == std::string::npos) {
            std::fprintf(stderr, "mrtcn: --set expects KEY=VALUE, got '%s'\n", kv.c_str());
            return MRTCN_ERR_CONFIG;
        }
        if ((s = mrtcn_config_set(*out, kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str())) != MRTCN_OK) {
            return s;
        }
    }
    for (const Override& o : overrides) {
        if (const std::optional<std::string> v = o.value()) {
            if ((s = mrtcn_config_set(*out, o.key.c_str(), v->c_str())) != MRTCN_OK) {
                return s;
            }
        }
    }
    if (common.seed) {
        if ((s = mrtcn_config_set(*out, "seed", std::to_string(*common.seed).c_str())) != MRTCN_OK) {
            return s;
        }
    }
    return mrtcn_config_validate(*out);
}

void log_to_stderr(const char* line, void*) {
    std::fprintf(stderr, "%s\n", line);
    std::fflush(stderr);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-receptive-field temporal convolution networks for event detection in feature sequences."};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(mrtcn_version()));

    std::string keys;
    {
        char* ref = nullptr;
        if (mrtcn_config_reference(&ref) == MRTCN_OK) {
            keys = ref;
            mrtcn_string_free(ref);
        }
    }
    app.footer("Config keys (--config file sections, or --set KEY=VALUE):\n" + keys +
               "\nExit codes: 0 success, 1 usage or config error, 2 runtime or numeric failure.");

    CommonOptions common;
    std::optional<std::string> towers, arms, resume, split, delta_grid;
    std::optional<std::size_t> iterations, hidden;
    std::optional<int> precision;
    std::optional<double> delta, threshold;
    std::string data_dir = ".", checkpoint;
    bool no_postprocess = false, first_block = false;

    CLI::App* synth = app.add_subcommand("synth", "generate planted-event synthetic train/val/test splits");
    add_common(synth, common);

    CLI::App* train = app.add_subcommand("train", "train a network; writes checkpoint.ttck and loss.csv");
    add_common(train, common);
    train->add_option("--data", data_dir, "directory written by synth")->capture_default_str();
    train->add_option("--towers", towers, "comma-separated towers, e.g. t1,t2,t3 or t2,t2,t2");
    train->add_option("--iterations", iterations, "total training iterations");
    train->add_option("--hidden", hidden, "hidden channels");
    train->add_option("--precision", precision, "64 or 32");
    train->add_option("--resume", resume, "continue from a checkpoint");

    CLI::App* eval = app.add_subcommand("eval", "tolerance-matched F1 on a split; writes eval.csv");
    add_common(eval, common);
    eval->add_option("--checkpoint", checkpoint, "trained checkpoint")->required();
    eval->add_option("--data", data_dir, "directory written by synth")->capture_default_str();
    eval->add_option("--delta", delta, "matching tolerance in seconds (default 1)");
    eval->add_option("--split", split, "train, val or test (default test)");
    eval->add_flag("--no-postprocess", no_postprocess, "raw argmax: no duplicate merge or suppression");
    eval->add_option("--towers", towers, "towers the checkpoint was trained with");
    eval->add_option("--hidden", hidden, "hidden channels the checkpoint was trained with");

    CLI::App* spot = app.add_subcommand("spot", "watershed spotting and average-mAP; writes spots, mAP and PR CSVs");
    add_common(spot, common);
    spot->add_option("--checkpoint", checkpoint, "trained average-head checkpoint")->required();
    spot->add_option("--data", data_dir, "directory written by synth")->capture_default_str();
    spot->add_option("--threshold", threshold, "watershed threshold (default 0.5)");
    spot->add_option("--delta-grid", delta_grid, "tolerances, \"lo:hi:step\" or a comma list (default 5:60:5)");
    spot->add_option("--split", split, "train, val or test (default test)");
    spot->add_option("--towers", towers, "towers the checkpoint was trained with");
    spot->add_option("--hidden", hidden, "hidden channels the checkpoint was trained with");

    CLI::App* rf = app.add_subcommand("rf", "analytic and probed receptive fields per tower");
    add_common(rf, common, false);
    rf->add_option("--towers", towers, "comma-separated towers");
    rf->add_flag("--first-block", first_block, "report only the first block of each tower");

    CLI::App* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of every backward pass");
    add_common(gradcheck, common, false);

    CLI::App* ablate = app.add_subcommand("ablate", "train and evaluate tower combinations; writes ablation.csv");
    add_common(ablate, common);
    ablate->add_option("--data", data_dir, "directory written by synth")->capture_default_str();
    ablate->add_option("--arms", arms, "comma-separated configurations, e.g. t1+t2+t3,t2+t2+t2");
    ablate->add_option("--iterations", iterations, "training iterations per configuration");
    ablate->add_option("--hidden", hidden, "hidden channels");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }

    if (eval->parsed() && no_postprocess) {
        common.sets.insert(common.sets.begin(), "eval.postprocess=false");
    }
    const std::string split_key = spot->parsed() ? "spot.split" : "eval.split";
    const std::vector<Override> overrides = {
        {"network.towers", list_flag(towers)},
        {"ablate.arms", list_flag(arms)},
        {"train.iterations", number_flag(iterations)},
        {"network.hidden_channels", number_flag(hidden)},
        {"train.precision", number_flag(precision)},
        {"eval.delta", number_flag(delta)},
        {"spot.threshold", number_flag(threshold)},
        {"spot.delta_grid", string_flag(delta_grid)},
        {split_key, string_flag(split)},
    };

    mrtcn_set_log_callback(log_to_stderr, nullptr);
    mrtcn_config* cfg = nullptr;
    mrtcn_status s = build_config(common, overrides, &cfg);
    if (s != MRTCN_OK) {
        mrtcn_config_free(cfg);
        return report(s);
    }

    char* text = nullptr;
    const char* out = common.out.c_str();
    if (synth->parsed()) {
        s = mrtcn_synth(cfg, out, &text);
    } else if (train->parsed()) {
        s = mrtcn_train(cfg, data_dir.c_str(), out, resume ? resume->c_str() : nullptr, &text);
    } else if (eval->parsed()) {
        s = mrtcn_eval(cfg, checkpoint.c_str(), data_dir.c_str(), out, &text);
    } else if (spot->parsed()) {
        s = mrtcn_spot(cfg, checkpoint.c_str(), data_dir.c_str(), out, &text);
    } else if (rf->parsed()) {
        s = mrtcn_rf(cfg, first_block ? 1 : 0, &text);
    } else if (gradcheck->parsed()) {
        s = mrtcn_gradcheck(common.seed.value_or(42), &text);
    } else if (ablate->parsed()) {
        s = mrtcn_ablate(cfg, data_dir.c_str(), out, &text);
    }
    print_and_free(text);
    mrtcn_config_free(cfg);
    return report(s);
}
