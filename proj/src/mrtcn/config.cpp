#include "mrtcn/config.hpp"

#include "mrtcn/error.hpp"
#include "mrtcn/binary_io.hpp"
#include "mrtcn/metrics.hpp"

#include "json.hpp"

#include <cmath>
#include <functional>
#include <sstream>

namespace mrtcn {

namespace {

using json = nlohmann::json;

struct Field {
    std::string key;
    std::string doc;
    std::function<json(const RunConfig&)> get;
    std::function<void(RunConfig&, const json&)> set;
};

template <typename T>
T as(const json& value) {
    return value.get<T>();
}

std::size_t as_count(const json& value) {
    if (!value.is_number_integer() || value.get<long long>() < 0) {
        throw json::type_error::create(302, "expected a non-negative integer", &value);
    }
    return value.get<std::size_t>();
}

std::string head_name(HeadMode head) { return head == HeadMode::Average ? "average" : "dense"; }

HeadMode parse_head(const json& value) {
    const std::string s = value.get<std::string>();
    if (s == "dense") {
        return HeadMode::Dense;
    }
    if (s == "average") {
        return HeadMode::Average;
    }
    fail(ErrorKind::Config, "expected \"dense\" or \"average\", got \"" + s + "\"");
}

std::string normalization_name(LossNormalization n) {
    return n == LossNormalization::BatchMean ? "batch_mean" : "weighted_mean";
}

LossNormalization parse_normalization(const json& value) {
    const std::string s = value.get<std::string>();
    if (s == "weighted_mean") {
        return LossNormalization::WeightedMean;
    }
    if (s == "batch_mean") {
        return LossNormalization::BatchMean;
    }
    fail(ErrorKind::Config, "expected \"weighted_mean\" or \"batch_mean\", got \"" + s + "\"");
}

#define MRTCN_FIELD(key, doc, member, conv) \
    Field { key, doc, [](const RunConfig& c) { return json(c.member); }, [](RunConfig& c, const json& v) { c.member = conv(v); } }

const std::vector<Field>& fields() {
    static const std::vector<Field> table = {
        MRTCN_FIELD("seed", "root seed; synth, sampler and init seeds are derived from it", seed, as<std::uint64_t>),

        MRTCN_FIELD("synth.num_classes", "classes including background", synth.num_classes, as_count),
        MRTCN_FIELD("synth.feature_dim", "feature dimension l", synth.feature_dim, as_count),
        MRTCN_FIELD("synth.fps", "feature frames per second", synth.fps, as<double>),
        MRTCN_FIELD("synth.duration_sec", "sequence length in seconds", synth.duration_sec, as<int>),
        MRTCN_FIELD("synth.events_per_class", "planted events per event class", synth.events_per_class, as_count),
        MRTCN_FIELD("synth.pattern_frames", "pattern length in frames, one per event class", synth.pattern_frames,
                    as<std::vector<std::size_t>>),
        MRTCN_FIELD("synth.jitter_frames", "pattern centre offset range within its second", synth.jitter_frames,
                    as_count),
        MRTCN_FIELD("synth.noise_sigma", "background noise standard deviation", synth.noise_sigma, as<double>),
        MRTCN_FIELD("synth.amplitude", "pattern amplitude", synth.amplitude, as<double>),
        MRTCN_FIELD("synth.min_gap_sec", "minimum seconds between events", synth.min_gap_sec, as<int>),
        MRTCN_FIELD("synth.splits", "train/val/test fractions of the timeline, summing to 1", splits,
                    as<std::vector<double>>),

        MRTCN_FIELD("network.towers", "reference tower names (t1, t2, t3), summed in order", network.towers,
                    as<std::vector<std::string>>),
        MRTCN_FIELD("network.hidden_channels", "channels of the hidden layers", network.hidden_channels, as_count),
        Field{"network.head", "\"dense\" (one output per labeled second) or \"average\" (one centred output)",
              [](const RunConfig& c) { return json(head_name(c.network.head)); },
              [](RunConfig& c, const json& v) { c.network.head = parse_head(v); }},
        MRTCN_FIELD("network.window_len", "frames per input window", network.window_len, as_count),

        MRTCN_FIELD("sampler.p0", "probability of drawing a background window", p0, as<double>),
        MRTCN_FIELD("sampler.shift_range", "uniform event offset in seconds for average heads; 0 centres",
                    shift_range, as<double>),

        MRTCN_FIELD("train.lr", "Adam learning rate", train.lr, as<double>),
        MRTCN_FIELD("train.batch_size", "windows per iteration", train.batch_size, as_count),
        MRTCN_FIELD("train.iterations", "total optimizer steps", train.iterations, as_count),
        MRTCN_FIELD("train.class_weights", "loss weight per class; empty means all 1", train.class_weights,
                    as<std::vector<double>>),
        MRTCN_FIELD("train.precision", "64, or 32 to keep parameters and optimizer state in float",
                    train.precision, as<int>),
        MRTCN_FIELD("train.eval_every", "validation F1 every N iterations; 0 disables", train.eval_every, as_count),
        Field{"train.normalization", "\"weighted_mean\" or \"batch_mean\" loss reduction",
              [](const RunConfig& c) { return json(normalization_name(c.train.normalization)); },
              [](RunConfig& c, const json& v) { c.train.normalization = parse_normalization(v); }},
        MRTCN_FIELD("train.record_time", "write wall-clock ms per step to the loss trace", train.record_time,
                    as<bool>),
        MRTCN_FIELD("train.log_every", "progress line on stderr every N iterations; 0 disables", train.log_every,
                    as_count),

        MRTCN_FIELD("eval.delta", "matching tolerance in seconds", eval.delta, as<double>),
        MRTCN_FIELD("eval.postprocess", "apply duplicate merge and consecutive suppression", eval.postprocess,
                    as<bool>),
        MRTCN_FIELD("eval.batch_size", "windows per inference batch", eval.batch_size, as_count),
        MRTCN_FIELD("eval.rare_classes",
                    "class ids subject to consecutive suppression; empty means all but the dominant event class",
                    eval.rare_classes, as<std::vector<int>>),
        MRTCN_FIELD("eval.split", "split evaluated by eval: train, val or test", eval.split, as<std::string>),

        MRTCN_FIELD("spot.threshold", "watershed threshold in (0, 1)", spot.threshold, as<double>),
        MRTCN_FIELD("spot.delta_grid", "tolerances: \"lo:hi:step\" or a comma list", spot.delta_grid,
                    as<std::string>),
        MRTCN_FIELD("spot.split", "split evaluated by spot: train, val or test", spot.split, as<std::string>),

        MRTCN_FIELD("ablate.arms", "configurations like \"t1+t2+t3\"; empty means the seven defaults", ablate.arms,
                    as<std::vector<std::string>>),
        MRTCN_FIELD("ablate.loss_window", "trailing iterations averaged into final_loss", ablate.loss_window,
                    as_count),
    };
    return table;
}

#undef MRTCN_FIELD

const Field* find_field(std::string_view key) {
    for (const Field& f : fields()) {
        if (f.key == key) {
            return &f;
        }
    }
    return nullptr;
}

void apply(RunConfig& config, const std::string& key, const json& value) {
    const Field* field = find_field(key);
    require(field != nullptr, ErrorKind::Config, "unknown config key '" + key + "'");
    try {
        field->set(config, value);
    } catch (const json::exception& e) {
        fail(ErrorKind::Config, "config key '" + key + "': " + e.what());
    } catch (const Error& e) {
        fail(ErrorKind::Config, "config key '" + key + "': " + e.what());
    }
}

void check_split(const std::string& split, const std::string& key) {
    require(split == "train" || split == "val" || split == "test", ErrorKind::Config,
            key + " must be train, val or test");
}

}  // namespace

void RunConfig::validate() const {
    try {
        synth.validate();
    } catch (const Error& e) {
        fail(ErrorKind::Config, std::string("synth: ") + e.what());
    }
    require(splits.size() == 3, ErrorKind::Config, "synth.splits needs three fractions (train, val, test)");
    double total = 0.0;
    for (double f : splits) {
        require(f > 0.0 && std::isfinite(f), ErrorKind::Config, "synth.splits fractions must be positive");
        total += f;
    }
    require(std::abs(total - 1.0) <= 1e-9, ErrorKind::Config, "synth.splits must sum to 1");
    require(!network.towers.empty(), ErrorKind::Config, "network.towers is empty");
    for (const std::string& t : network.towers) {
        require(t == "t1" || t == "t2" || t == "t3", ErrorKind::Config, "network.towers: unknown tower '" + t + "'");
    }
    require(network.hidden_channels >= 1, ErrorKind::Config, "network.hidden_channels must be positive");
    require(network.window_len >= 1, ErrorKind::Config, "network.window_len must be positive");
    require(p0 >= 0.0 && p0 <= 1.0, ErrorKind::Config, "sampler.p0 must lie in [0, 1]");
    require(shift_range >= 0.0 && std::isfinite(shift_range), ErrorKind::Config,
            "sampler.shift_range must be non-negative");
    train.validate(train.class_weights.empty() ? synth.num_classes : train.class_weights.size());
    require(eval.delta >= 0.0 && std::isfinite(eval.delta), ErrorKind::Config, "eval.delta must be non-negative");
    require(eval.batch_size >= 1, ErrorKind::Config, "eval.batch_size must be positive");
    check_split(eval.split, "eval.split");
    require(spot.threshold > 0.0 && spot.threshold < 1.0, ErrorKind::Config, "spot.threshold must lie in (0, 1)");
    try {
        parse_delta_grid(spot.delta_grid);
    } catch (const Error& e) {
        fail(ErrorKind::Config, std::string("spot.delta_grid: ") + e.what());
    }
    check_split(spot.split, "spot.split");
    for (const std::string& arm : ablate.arms) {
        try {
            parse_ablation_arm(arm);
        } catch (const Error& e) {
            fail(ErrorKind::Config, "ablate.arms: " + std::string(e.what()));
        }
    }
    require(ablate.loss_window >= 1, ErrorKind::Config, "ablate.loss_window must be positive");
}

SyntheticSpec RunConfig::synth_spec() const {
    SyntheticSpec s = synth;
    s.seed = derive_seed(seed, "synth");
    return s;
}

SamplerConfig RunConfig::sampler_config() const {
    SamplerConfig s;
    s.p0 = p0;
    s.seed = derive_seed(seed, "sampler");
    s.window_len = network.window_len;
    s.shift_range = shift_range;
    if (network.head == HeadMode::Average) {
        s.mode = LabelMode::SparseCentered;
        s.outputs = 1;
    } else {
        s.mode = LabelMode::Dense;
        s.outputs = network_spec(1, 2).output_len;
    }
    return s;
}

TrainConfig RunConfig::train_config() const {
    TrainConfig t = train;
    t.seed = derive_seed(seed, "init");
    return t;
}

NetworkSpec RunConfig::network_spec(std::size_t input_dim, std::size_t classes) const {
    return network_spec(input_dim, classes, network.towers);
}

NetworkSpec RunConfig::network_spec(std::size_t input_dim, std::size_t classes,
                                    const std::vector<std::string>& towers) const {
    NetworkSpec spec = build_network(towers, input_dim, classes, network.hidden_channels, network.head,
                                     network.window_len);
    spec.validate();
    return spec;
}

AblationSetup RunConfig::ablation_setup() const {
    AblationSetup s;
    s.hidden_channels = network.hidden_channels;
    s.sampler = sampler_config();
    s.train = train_config();
    s.delta = eval.delta;
    s.loss_window = ablate.loss_window;
    return s;
}

std::vector<AblationArm> RunConfig::ablation_arms() const {
    if (ablate.arms.empty()) {
        return default_ablation_arms();
    }
    std::vector<AblationArm> arms;
    for (const std::string& a : ablate.arms) {
        arms.push_back(parse_ablation_arm(a));
    }
    return arms;
}

RunConfig parse_config(std::string_view json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        fail(ErrorKind::Config, std::string("config is not valid JSON: ") + e.what());
    }
    require(doc.is_object(), ErrorKind::Config, "config must be a JSON object");
    RunConfig config;
    for (const auto& [name, value] : doc.items()) {
        if (value.is_object()) {
            for (const auto& [sub, sub_value] : value.items()) {
                apply(config, name + "." + sub, sub_value);
            }
        } else {
            apply(config, name, value);
        }
    }
    config.validate();
    return config;
}

RunConfig load_config(const std::filesystem::path& path) {
    return parse_config(read_file(path));
}

std::string dump_config(const RunConfig& config) {
    json doc = json::object();
    for (const Field& f : fields()) {
        const std::size_t dot = f.key.find('.');
        if (dot == std::string::npos) {
            doc[f.key] = f.get(config);
        } else {
            doc[f.key.substr(0, dot)][f.key.substr(dot + 1)] = f.get(config);
        }
    }
    return doc.dump(2) + "\n";
}

void set_config_value(RunConfig& config, std::string_view key, std::string_view json_value) {
    json value = json::parse(json_value, nullptr, false);
    if (value.is_discarded()) {
        value = std::string(json_value);
    }
    apply(config, std::string(key), value);
}

std::string config_reference() {
    const RunConfig defaults;
    std::ostringstream out;
    for (const Field& f : fields()) {
        out << "  " << f.key << " = " << f.get(defaults).dump() << "\n      " << f.doc << "\n";
    }
    return out.str();
}

bool operator==(const RunConfig& a, const RunConfig& b) {
    for (const Field& f : fields()) {
        if (f.get(a) != f.get(b)) {
            return false;
        }
    }
    return true;
}

}  // namespace mrtcn
