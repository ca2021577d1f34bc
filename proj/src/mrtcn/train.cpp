#include "mrtcn/train.hpp"

#include "mrtcn/binary_io.hpp"
#include "mrtcn/error.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <iostream>

namespace mrtcn {

namespace {

constexpr std::string_view kCheckpointMagic = "TTCK";
constexpr std::uint8_t kCheckpointVersion = 1;

void round_tensor(Tensor& t) {
    for (double& v : t.values()) {
        v = static_cast<double>(static_cast<float>(v));
    }
}

template <typename Fn>
void for_each_bn(NetworkParams& params, Fn&& fn) {
    for (TowerParams& tower : params.towers) {
        for (LayerParams& layer : tower.layers) {
            if (layer.bn) {
                fn(*layer.bn);
            }
        }
    }
}

void write_tensor(ByteWriter& w, const Tensor& t, int precision) {
    w.u64(t.size());
    for (double v : t.values()) {
        if (precision == 32) {
            w.f32(static_cast<float>(v));
        } else {
            w.f64(v);
        }
    }
}

void read_tensor(ByteReader& r, Tensor& t, int precision, const std::string& what) {
    const std::uint64_t n = r.u64();
    if (n != t.size()) {
        fail(ErrorKind::Format, "checkpoint tensor " + what + " has " + std::to_string(n) + " values, expected " +
                                    std::to_string(t.size()));
    }
    for (double& v : t.values()) {
        v = precision == 32 ? static_cast<double>(r.f32()) : r.f64();
    }
}

}  // namespace

void TrainConfig::validate(std::size_t num_classes) const {
    require(lr > 0.0 && std::isfinite(lr), ErrorKind::Config, "train.lr must be positive");
    require(batch_size >= 1, ErrorKind::Config, "train.batch_size must be positive");
    require(precision == 32 || precision == 64, ErrorKind::Config, "train.precision must be 32 or 64");
    if (!class_weights.empty()) {
        require(class_weights.size() == num_classes, ErrorKind::Config,
                "train.class_weights has " + std::to_string(class_weights.size()) + " entries for " +
                    std::to_string(num_classes) + " classes");
        for (double w : class_weights) {
            require(w > 0.0 && std::isfinite(w), ErrorKind::Config, "train.class_weights must all be positive");
        }
    }
}

std::vector<double> TrainConfig::weights(std::size_t num_classes) const {
    return class_weights.empty() ? std::vector<double>(num_classes, 1.0) : class_weights;
}

void LossTrace::append(LossPoint p) {
    require(points.empty() || p.iteration > points.back().iteration, ErrorKind::InvalidArgument,
            "loss trace iterations must be strictly increasing");
    points.push_back(p);
}

double LossTrace::tail_mean(std::size_t count) const {
    if (points.empty()) {
        return 0.0;
    }
    const std::size_t n = std::min(count, points.size());
    double sum = 0.0;
    for (std::size_t i = points.size() - n; i < points.size(); ++i) {
        sum += points[i].loss;
    }
    return sum / static_cast<double>(n);
}

std::string LossTrace::to_csv() const {
    std::string out = "iteration,loss,ms\n";
    char buf[96];
    for (const LossPoint& p : points) {
        std::snprintf(buf, sizeof buf, "%zu,%.17g,%.3f\n", p.iteration, p.loss, p.ms);
        out += buf;
    }
    return out;
}

void LossTrace::save(const std::filesystem::path& path) const { write_file(path, to_csv()); }

void round_to_float(NetworkParams& params) {
    for (Parameter* p : parameter_list(params)) {
        round_tensor(p->value);
        round_tensor(p->adam_m);
        round_tensor(p->adam_v);
    }
    for_each_bn(params, [](BatchNormState& bn) {
        round_tensor(bn.running_mean);
        round_tensor(bn.running_var);
    });
}

std::string encode_checkpoint(const Checkpoint& ckpt) {
    require(ckpt.precision == 32 || ckpt.precision == 64, ErrorKind::InvalidArgument,
            "checkpoint precision must be 32 or 64");
    ByteWriter w;
    w.bytes(kCheckpointMagic);
    w.u8(kCheckpointVersion);
    w.u64(ckpt.spec.hash());
    w.u8(static_cast<std::uint8_t>(ckpt.precision));
    w.str(ckpt.spec.canonical());
    w.u64(ckpt.iteration);
    w.str(ckpt.rng_state);
    NetworkParams params = ckpt.params;
    const std::vector<Parameter*> list = parameter_list(params);
    w.u64(list.size());
    for (const Parameter* p : list) {
        write_tensor(w, p->value, ckpt.precision);
        write_tensor(w, p->adam_m, ckpt.precision);
        write_tensor(w, p->adam_v, ckpt.precision);
        w.u64(p->step_count);
    }
    for_each_bn(params, [&](BatchNormState& bn) {
        write_tensor(w, bn.running_mean, ckpt.precision);
        write_tensor(w, bn.running_var, ckpt.precision);
    });
    return w.buffer();
}

Checkpoint decode_checkpoint(std::string_view bytes) {
    if (bytes.size() < 5 || bytes.substr(0, 4) != kCheckpointMagic) {
        fail(ErrorKind::Format, "bad magic in checkpoint (expected TTCK)");
    }
    ByteReader r(bytes.substr(4), "checkpoint");
    const std::uint8_t version = r.u8();
    if (version != kCheckpointVersion) {
        fail(ErrorKind::Format, "unsupported checkpoint version " + std::to_string(version));
    }
    const std::uint64_t hash = r.u64();
    Checkpoint ckpt;
    ckpt.precision = r.u8();
    require(ckpt.precision == 32 || ckpt.precision == 64, ErrorKind::Format, "bad checkpoint precision");
    ckpt.spec = parse_network_spec(r.str());
    if (ckpt.spec.hash() != hash) {
        fail(ErrorKind::Format, "checkpoint spec hash does not match its stored network spec");
    }
    ckpt.iteration = r.u64();
    ckpt.rng_state = r.str();
    ckpt.params = init_params(ckpt.spec, 0);
    const std::vector<Parameter*> list = parameter_list(ckpt.params);
    const std::uint64_t count = r.u64();
    if (count != list.size()) {
        fail(ErrorKind::Format, "checkpoint holds " + std::to_string(count) + " parameters, spec needs " +
                                    std::to_string(list.size()));
    }
    for (std::size_t i = 0; i < list.size(); ++i) {
        const std::string what = "#" + std::to_string(i);
        read_tensor(r, list[i]->value, ckpt.precision, what);
        read_tensor(r, list[i]->adam_m, ckpt.precision, what);
        read_tensor(r, list[i]->adam_v, ckpt.precision, what);
        list[i]->step_count = r.u64();
    }
    for_each_bn(ckpt.params, [&](BatchNormState& bn) {
        read_tensor(r, bn.running_mean, ckpt.precision, "running mean");
        read_tensor(r, bn.running_var, ckpt.precision, "running var");
    });
    if (r.remaining() != 0) {
        fail(ErrorKind::Format, "checkpoint has " + std::to_string(r.remaining()) + " trailing bytes");
    }
    return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
    write_file(path, encode_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(read_file(path)); }

Checkpoint load_checkpoint(const std::filesystem::path& path, const NetworkSpec& expected) {
    Checkpoint ckpt = load_checkpoint(path);
    if (ckpt.spec.hash() != expected.hash()) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%016llx vs %016llx", static_cast<unsigned long long>(ckpt.spec.hash()),
                      static_cast<unsigned long long>(expected.hash()));
        fail(ErrorKind::Config, "checkpoint " + path.string() + " was trained for a different network (spec hash " +
                                    buf + ")");
    }
    return ckpt;
}

Trainer::Trainer(NetworkSpec spec, const Dataset& data, SamplerConfig sampler, TrainConfig cfg)
    : net_(std::move(spec), cfg.seed), sampler_(data, std::move(sampler)), cfg_(std::move(cfg)) {
    cfg_.validate(net_.spec().num_classes);
    require(net_.spec().input_dim == data.features.dim, ErrorKind::Config,
            "network expects " + std::to_string(net_.spec().input_dim) + " feature dims, data has " +
                std::to_string(data.features.dim));
    require(net_.spec().num_classes == data.num_classes(), ErrorKind::Config,
            "network has " + std::to_string(net_.spec().num_classes) + " classes, annotations declare " +
                std::to_string(data.num_classes()));
    require(net_.spec().input_len == sampler_.config().window_len &&
                net_.spec().label_len() == sampler_.config().outputs,
            ErrorKind::Config, "sampler window does not match the network's input and output lengths");
    weights_ = cfg_.weights(net_.spec().num_classes);
    if (cfg_.precision == 32) {
        round_to_float(net_.params());
    }
}

Trainer::Trainer(const Checkpoint& ckpt, const Dataset& data, SamplerConfig sampler, TrainConfig cfg)
    : Trainer(ckpt.spec, data, std::move(sampler), std::move(cfg)) {
    require(ckpt.precision == cfg_.precision, ErrorKind::Config,
            "checkpoint precision " + std::to_string(ckpt.precision) + " differs from train.precision");
    net_ = Network(ckpt.spec, ckpt.params);
    sampler_.rng().set_state(ckpt.rng_state);
    iteration_ = static_cast<std::size_t>(ckpt.iteration);
}

double Trainer::step() { return step(sampler_.sample_batch(cfg_.batch_size)); }

double train_step(Network& net, const Batch& batch, std::span<const double> class_weights, const TrainConfig& cfg,
                  std::size_t iteration) {
    Network::Cache cache;
    const Network::Output out = net.forward(batch.inputs, Mode::Train, &cache);
    const LossResult loss = weighted_cross_entropy(out.logits, batch.targets, class_weights, cfg.normalization);
    if (!std::isfinite(loss.loss)) {
        fail(ErrorKind::Numeric, "loss became non-finite at iteration " + std::to_string(iteration));
    }
    if (loss.weight_sum > 0.0) {
        net.backward(cache, loss.grad_logits);
        const std::vector<Parameter*> params = net.parameters();
        adam_step(params, AdamConfig{cfg.lr});
    } else {
        net.zero_grad();
    }
    if (cfg.precision == 32) {
        round_to_float(net.params());
    }
    return loss.loss;
}

double Trainer::step(const Batch& batch) {
    const double loss = train_step(net_, batch, weights_, cfg_, iteration_ + 1);
    ++iteration_;
    return loss;
}

LossTrace Trainer::run(const std::function<void(std::size_t, Network&)>& on_eval) {
    LossTrace trace;
    while (iteration_ < cfg_.iterations) {
        const auto start = std::chrono::steady_clock::now();
        const double loss = step();
        double ms = 0.0;
        if (cfg_.record_time) {
            ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
        }
        trace.append({iteration_, loss, ms});
        if (cfg_.log_every > 0 && iteration_ % cfg_.log_every == 0) {
            std::cerr << "iteration " << iteration_ << " loss " << trace.tail_mean(cfg_.log_every) << '\n';
        }
        if (on_eval && cfg_.eval_every > 0 && iteration_ % cfg_.eval_every == 0) {
            on_eval(iteration_, net_);
        }
    }
    return trace;
}

Checkpoint Trainer::checkpoint() const {
    return {net_.spec(), cfg_.precision, iteration_, sampler_.rng().state(), net_.params()};
}

}  // namespace mrtcn
