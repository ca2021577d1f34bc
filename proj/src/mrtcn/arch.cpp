#include "mrtcn/arch.hpp"

#include "mrtcn/error.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

namespace mrtcn {

namespace {

// Gathers x[:, :, index[j]] into a [batch, channels, index.size()] tensor.
Tensor gather_time(const Tensor& x, const std::vector<std::size_t>& index) {
    const std::size_t batch = x.dim(0);
    const std::size_t channels = x.dim(1);
    Tensor out({batch, channels, index.size()});
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t c = 0; c < channels; ++c) {
            for (std::size_t j = 0; j < index.size(); ++j) {
                out.at(b, c, j) = x.at(b, c, index[j]);
            }
        }
    }
    return out;
}

void scatter_time_add(Tensor& x, const std::vector<std::size_t>& index, const Tensor& values) {
    for (std::size_t b = 0; b < values.dim(0); ++b) {
        for (std::size_t c = 0; c < values.dim(1); ++c) {
            for (std::size_t j = 0; j < index.size(); ++j) {
                x.at(b, c, index[j]) += values.at(b, c, j);
            }
        }
    }
}

void accumulate(Parameter& p, const Tensor& g) { add_inplace(p.grad, g); }

Conv1dSpec projection_spec(const Conv1dSpec& conv) {
    Conv1dSpec proj;
    proj.in_channels = conv.in_channels;
    proj.out_channels = conv.out_channels;
    return proj;
}

Tensor uniform_tensor(Shape shape, double bound, Rng& rng) {
    Tensor t(std::move(shape));
    for (double& v : t.values()) {
        v = rng.uniform(-bound, bound);
    }
    return t;
}

}  // namespace

std::string layer_name(const TowerSpec& tower, std::size_t index) {
    return tower.name + "/block" + std::to_string(index + 1);
}

void NetworkSpec::validate() const {
    require(!towers.empty(), ErrorKind::InvalidArgument, "network needs at least one tower");
    require(input_len >= 1 && input_dim >= 1 && num_classes >= 1 && output_len >= 1, ErrorKind::InvalidArgument,
            "network dimensions must be positive");
    for (const TowerSpec& tower : towers) {
        require(!tower.layers.empty(), ErrorKind::InvalidArgument, "tower " + tower.name + " has no layers");
        std::size_t channels = input_dim;
        for (std::size_t i = 0; i < tower.layers.size(); ++i) {
            const Conv1dSpec& conv = tower.layers[i].conv;
            conv.validate();
            if (conv.in_channels != channels) {
                fail(ErrorKind::InvalidArgument, "layer " + layer_name(tower, i) + " expects " +
                                                     std::to_string(conv.in_channels) + " input channels, gets " +
                                                     std::to_string(channels));
            }
            channels = conv.out_channels;
        }
        if (channels != num_classes) {
            fail(ErrorKind::InvalidArgument, "tower " + tower.name + " emits " + std::to_string(channels) +
                                                 " channels, network has " + std::to_string(num_classes) +
                                                 " classes");
        }
        const std::vector<std::size_t> lengths = output_length(tower, input_len);
        if (lengths.back() != output_len) {
            fail(ErrorKind::InvalidArgument, "tower " + tower.name + " maps " + std::to_string(input_len) +
                                                 " frames to " + std::to_string(lengths.back()) +
                                                 " output nodes, network expects " + std::to_string(output_len));
        }
    }
}

std::string NetworkSpec::canonical() const {
    std::ostringstream os;
    os << "mrtcn-network/1;t=" << input_len << ";l=" << input_dim << ";c=" << num_classes << ";t0=" << output_len
       << ";hidden=" << hidden_channels << ";head=" << (head == HeadMode::Average ? "average" : "dense");
    for (const TowerSpec& tower : towers) {
        os << ";tower=" << tower.name;
        for (const LayerSpec& layer : tower.layers) {
            const Conv1dSpec& c = layer.conv;
            os << "|" << c.in_channels << ">" << c.out_channels << ",k" << c.kernel << ",s" << c.stride << ",d"
               << c.dilation << ",p" << c.padding << ",bn" << layer.has_batchnorm << ",relu" << layer.has_relu
               << ",res" << layer.has_residual;
        }
    }
    return os.str();
}

std::uint64_t NetworkSpec::hash() const { return fnv1a64(canonical()); }

namespace {

std::vector<std::string> split(std::string_view text, char sep) {
    std::vector<std::string> parts;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = text.find(sep, start);
        parts.emplace_back(text.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) {
            return parts;
        }
        start = pos + 1;
    }
}

std::size_t parse_count(const std::string& text, const std::string& what) {
    std::size_t used = 0;
    unsigned long long v = 0;
    try {
        v = std::stoull(text, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != text.size()) {
        fail(ErrorKind::Format, "bad " + what + " '" + text + "' in network spec");
    }
    return static_cast<std::size_t>(v);
}

}  // namespace

NetworkSpec parse_network_spec(std::string_view canonical) {
    const std::vector<std::string> fields = split(canonical, ';');
    require(!fields.empty() && fields[0] == "mrtcn-network/1", ErrorKind::Format,
            "unrecognized network spec encoding");
    NetworkSpec spec;
    for (std::size_t f = 1; f < fields.size(); ++f) {
        const std::string& field = fields[f];
        const std::size_t eq = field.find('=');
        require(eq != std::string::npos, ErrorKind::Format, "bad network spec field '" + field + "'");
        const std::string key = field.substr(0, eq);
        const std::string value = field.substr(eq + 1);
        if (key == "t") {
            spec.input_len = parse_count(value, key);
        } else if (key == "l") {
            spec.input_dim = parse_count(value, key);
        } else if (key == "c") {
            spec.num_classes = parse_count(value, key);
        } else if (key == "t0") {
            spec.output_len = parse_count(value, key);
        } else if (key == "hidden") {
            spec.hidden_channels = parse_count(value, key);
        } else if (key == "head") {
            require(value == "dense" || value == "average", ErrorKind::Format, "bad head '" + value + "'");
            spec.head = value == "average" ? HeadMode::Average : HeadMode::Dense;
        } else if (key == "tower") {
            const std::vector<std::string> parts = split(value, '|');
            TowerSpec tower{parts[0], {}};
            for (std::size_t i = 1; i < parts.size(); ++i) {
                const std::vector<std::string> items = split(parts[i], ',');
                require(items.size() == 8, ErrorKind::Format, "bad layer '" + parts[i] + "' in network spec");
                const std::vector<std::string> io = split(items[0], '>');
                require(io.size() == 2, ErrorKind::Format, "bad layer channels '" + items[0] + "'");
                auto tagged = [&](const std::string& item, std::string_view tag) {
                    require(item.rfind(tag, 0) == 0, ErrorKind::Format, "bad layer field '" + item + "'");
                    return parse_count(item.substr(tag.size()), std::string(tag));
                };
                LayerSpec layer;
                layer.conv.in_channels = parse_count(io[0], "channels");
                layer.conv.out_channels = parse_count(io[1], "channels");
                layer.conv.kernel = tagged(items[1], "k");
                layer.conv.stride = tagged(items[2], "s");
                layer.conv.dilation = tagged(items[3], "d");
                layer.conv.padding = tagged(items[4], "p");
                layer.has_batchnorm = tagged(items[5], "bn") != 0;
                layer.has_relu = tagged(items[6], "relu") != 0;
                layer.has_residual = tagged(items[7], "res") != 0;
                tower.layers.push_back(layer);
            }
            spec.towers.push_back(std::move(tower));
        } else {
            fail(ErrorKind::Format, "unknown network spec field '" + key + "'");
        }
    }
    spec.validate();
    return spec;
}

std::vector<LayerGeometry> reference_tower(std::string_view name) {
    if (name == "t1") {
        return {{3, 3, 1, 0}, {3, 3, 1, 1}, {3, 1, 1, 0}};
    }
    if (name == "t2") {
        return {{3, 5, 2, 0}, {3, 1, 1, 0}, {2, 2, 1, 0}};
    }
    if (name == "t3") {
        return {{2, 2, 1, 0}, {3, 3, 1, 0}, {3, 2, 1, 0}};
    }
    fail(ErrorKind::Config, "unknown tower '" + std::string(name) + "' (expected t1, t2 or t3)");
}

TowerSpec make_tower(std::string name, std::span<const LayerGeometry> geometry, std::size_t input_dim,
                     std::size_t hidden, std::size_t classes, bool residual) {
    TowerSpec tower{std::move(name), {}};
    std::size_t channels = input_dim;
    for (std::size_t i = 0; i < geometry.size(); ++i) {
        LayerSpec layer;
        layer.conv.in_channels = channels;
        layer.conv.out_channels = i + 1 == geometry.size() ? classes : hidden;
        layer.conv.kernel = geometry[i].kernel;
        layer.conv.stride = geometry[i].stride;
        layer.conv.dilation = geometry[i].dilation;
        layer.conv.padding = geometry[i].padding;
        layer.has_residual = residual;
        channels = layer.conv.out_channels;
        tower.layers.push_back(layer);
    }
    return tower;
}

NetworkSpec build_network(std::span<const std::string> tower_names, std::size_t input_dim, std::size_t classes,
                          std::size_t hidden, HeadMode head, std::size_t input_len) {
    NetworkSpec spec;
    spec.input_len = input_len;
    spec.input_dim = input_dim;
    spec.num_classes = classes;
    spec.hidden_channels = hidden;
    spec.head = head;
    std::map<std::string, int> seen;
    for (const std::string& name : tower_names) {
        const int count = ++seen[name];
        std::string unique = count == 1 ? name : name + "." + std::to_string(count);
        const std::vector<LayerGeometry> geometry = reference_tower(name);
        spec.towers.push_back(make_tower(std::move(unique), geometry, input_dim, hidden, classes));
    }
    require(!spec.towers.empty(), ErrorKind::Config, "network needs at least one tower");
    spec.output_len = output_length(spec.towers.front(), input_len).back();
    spec.validate();
    return spec;
}

NetworkSpec build_default_network(std::size_t input_dim, std::size_t classes, std::size_t hidden) {
    const std::vector<std::string> names = {"t1", "t2", "t3"};
    return build_network(names, input_dim, classes, hidden);
}

std::vector<std::size_t> output_length(const TowerSpec& tower, std::size_t t_in) {
    require(t_in >= 1, ErrorKind::InvalidArgument, "input length must be at least 1");
    std::vector<std::size_t> lengths;
    std::size_t length = t_in;
    for (std::size_t i = 0; i < tower.layers.size(); ++i) {
        length = tower.layers[i].conv.output_length(length, layer_name(tower, i));
        lengths.push_back(length);
    }
    return lengths;
}

ReceptiveFieldInfo receptive_field(std::span<const LayerSpec> layers) {
    ReceptiveFieldInfo info;
    for (const LayerSpec& layer : layers) {
        const Conv1dSpec& c = layer.conv;
        info.rf += static_cast<long>(c.dilation * (c.kernel - 1)) * info.jump;
        info.left_offset -= static_cast<long>(c.padding) * info.jump;
        info.jump *= static_cast<long>(c.stride);
    }
    return info;
}

ReceptiveFieldInfo receptive_field(const TowerSpec& tower) { return receptive_field(tower.layers); }

std::vector<std::size_t> residual_slice_indices(const Conv1dSpec& conv, std::size_t l_in, std::size_t l_out) {
    std::vector<std::size_t> index(l_out);
    const long centre_tap = static_cast<long>(conv.dilation * ((conv.kernel - 1) / 2));
    for (std::size_t j = 0; j < l_out; ++j) {
        const long pos = static_cast<long>(j * conv.stride) - static_cast<long>(conv.padding) + centre_tap;
        index[j] = static_cast<std::size_t>(std::clamp(pos, 0L, static_cast<long>(l_in) - 1));
    }
    return index;
}

std::vector<std::set<long>> analytic_influence(const TowerSpec& tower, std::size_t t_in) {
    std::vector<std::set<long>> sets(t_in);
    for (std::size_t f = 0; f < t_in; ++f) {
        sets[f] = {static_cast<long>(f)};
    }
    std::size_t length = t_in;
    for (std::size_t i = 0; i < tower.layers.size(); ++i) {
        const LayerSpec& layer = tower.layers[i];
        const Conv1dSpec& c = layer.conv;
        const std::size_t l_out = c.output_length(length, layer_name(tower, i));
        const std::vector<std::size_t> skip = residual_slice_indices(c, length, l_out);
        std::vector<std::set<long>> next(l_out);
        for (std::size_t j = 0; j < l_out; ++j) {
            for (std::size_t kk = 0; kk < c.kernel; ++kk) {
                const long pos =
                    static_cast<long>(j * c.stride + kk * c.dilation) - static_cast<long>(c.padding);
                if (pos >= 0 && pos < static_cast<long>(length)) {
                    next[j].insert(sets[static_cast<std::size_t>(pos)].begin(),
                                   sets[static_cast<std::size_t>(pos)].end());
                }
            }
            if (layer.has_residual) {
                next[j].insert(sets[skip[j]].begin(), sets[skip[j]].end());
            }
        }
        sets = std::move(next);
        length = l_out;
    }
    return sets;
}

LayerParams init_layer_params(const LayerSpec& layer, Rng& rng) {
    const Conv1dSpec& c = layer.conv;
    LayerParams p;
    const double bound = 1.0 / std::sqrt(static_cast<double>(c.in_channels * c.kernel));
    p.weight = Parameter(uniform_tensor({c.out_channels, c.in_channels, c.kernel}, bound, rng));
    p.bias = Parameter(Tensor({c.out_channels}));
    if (layer.has_batchnorm) {
        p.bn = BatchNormState(c.out_channels);
    }
    if (layer.has_residual && c.in_channels != c.out_channels) {
        const double skip_bound = 1.0 / std::sqrt(static_cast<double>(c.in_channels));
        p.skip = Parameter(uniform_tensor({c.out_channels, c.in_channels, 1}, skip_bound, rng));
    }
    return p;
}

NetworkParams init_params(const NetworkSpec& spec, std::uint64_t seed) {
    Rng rng(seed);
    NetworkParams params;
    for (const TowerSpec& tower : spec.towers) {
        TowerParams tp;
        for (const LayerSpec& layer : tower.layers) {
            tp.layers.push_back(init_layer_params(layer, rng));
        }
        params.towers.push_back(std::move(tp));
    }
    return params;
}

std::vector<Parameter*> parameter_list(NetworkParams& params) {
    std::vector<Parameter*> list;
    for (TowerParams& tower : params.towers) {
        for (LayerParams& layer : tower.layers) {
            list.push_back(&layer.weight);
            list.push_back(&layer.bias);
            if (layer.bn) {
                list.push_back(&layer.bn->gamma);
                list.push_back(&layer.bn->beta);
            }
            if (layer.skip) {
                list.push_back(&*layer.skip);
            }
        }
    }
    return list;
}

Tensor tconv_block_forward(const Tensor& x, const LayerSpec& layer, LayerParams& params, Mode mode,
                           BlockCache* cache, std::string_view name) {
    Tensor z = conv1d_forward(x, layer.conv, params.weight.value, params.bias.value, name);
    const std::size_t l_out = z.dim(2);
    BatchNormCache bn_cache;
    Tensor pre = layer.has_batchnorm ? batchnorm1d_forward(z, *params.bn, mode, &bn_cache) : z;
    Tensor y = layer.has_relu ? relu_forward(pre) : pre;

    Tensor skip_input;
    std::vector<std::size_t> skip_index;
    if (layer.has_residual) {
        skip_index = residual_slice_indices(layer.conv, x.dim(2), l_out);
        skip_input = gather_time(x, skip_index);
        if (params.skip) {
            add_inplace(y, conv1d_forward(skip_input, projection_spec(layer.conv), params.skip->value, Tensor{}));
        } else {
            add_inplace(y, skip_input);
        }
    }
    if (cache) {
        cache->input = x;
        cache->conv_out = std::move(z);
        cache->bn = std::move(bn_cache);
        cache->pre_relu = std::move(pre);
        cache->skip_input = std::move(skip_input);
        cache->skip_index = std::move(skip_index);
    }
    return y;
}

Tensor tconv_block_backward(const LayerSpec& layer, LayerParams& params, const BlockCache& cache,
                            const Tensor& grad_out) {
    Tensor grad_input(cache.input.shape());
    if (layer.has_residual) {
        if (params.skip) {
            Conv1dGrads g = conv1d_backward(cache.skip_input, projection_spec(layer.conv), params.skip->value,
                                            grad_out);
            accumulate(*params.skip, g.weight);
            scatter_time_add(grad_input, cache.skip_index, g.input);
        } else {
            scatter_time_add(grad_input, cache.skip_index, grad_out);
        }
    }
    Tensor grad = layer.has_relu ? relu_backward(cache.pre_relu, grad_out) : grad_out;
    if (layer.has_batchnorm) {
        BatchNormGrads g = batchnorm1d_backward(cache.bn, *params.bn, grad);
        accumulate(params.bn->gamma, g.gamma);
        accumulate(params.bn->beta, g.beta);
        grad = std::move(g.input);
    }
    Conv1dGrads g = conv1d_backward(cache.input, layer.conv, params.weight.value, grad);
    accumulate(params.weight, g.weight);
    accumulate(params.bias, g.bias);
    add_inplace(grad_input, g.input);
    return grad_input;
}

Tensor tower_forward(const TowerSpec& tower, TowerParams& params, const Tensor& x, Mode mode, TowerCache* cache) {
    if (cache) {
        cache->blocks.assign(tower.layers.size(), BlockCache{});
    }
    Tensor h = x;
    for (std::size_t i = 0; i < tower.layers.size(); ++i) {
        h = tconv_block_forward(h, tower.layers[i], params.layers[i], mode, cache ? &cache->blocks[i] : nullptr,
                                layer_name(tower, i));
    }
    return h;
}

Tensor tower_backward(const TowerSpec& tower, TowerParams& params, const TowerCache& cache, const Tensor& grad_out) {
    Tensor grad = grad_out;
    for (std::size_t i = tower.layers.size(); i-- > 0;) {
        grad = tconv_block_backward(tower.layers[i], params.layers[i], cache.blocks[i], grad);
    }
    return grad;
}

Network::Network(NetworkSpec spec, std::uint64_t seed) : spec_(std::move(spec)) {
    spec_.validate();
    params_ = init_params(spec_, seed);
}

Network::Network(NetworkSpec spec, NetworkParams params) : spec_(std::move(spec)), params_(std::move(params)) {
    spec_.validate();
    require(params_.towers.size() == spec_.towers.size(), ErrorKind::InvalidArgument,
            "parameter set does not match the network's towers");
}

Network::Output Network::forward(const Tensor& x, Mode mode, Cache* cache) {
    if (x.rank() != 3 || x.dim(1) != spec_.input_dim || x.dim(2) != spec_.input_len) {
        fail(ErrorKind::InvalidArgument, "network input must be [batch, " + std::to_string(spec_.input_dim) + ", " +
                                             std::to_string(spec_.input_len) + "], got " + shape_string(x.shape()));
    }
    const std::size_t batch = x.dim(0);
    const std::size_t c = spec_.num_classes;
    const std::size_t t0 = spec_.output_len;
    if (cache) {
        cache->towers.assign(spec_.towers.size(), TowerCache{});
        cache->batch = batch;
    }
    Tensor fused({batch, c, t0});
    for (std::size_t i = 0; i < spec_.towers.size(); ++i) {
        add_inplace(fused, tower_forward(spec_.towers[i], params_.towers[i], x, mode,
                                         cache ? &cache->towers[i] : nullptr));
    }

    const std::size_t labels = spec_.label_len();
    Tensor logits({batch, labels, c});
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t k = 0; k < c; ++k) {
            if (spec_.head == HeadMode::Average) {
                double sum = 0.0;
                for (std::size_t t = 0; t < t0; ++t) {
                    sum += fused.at(b, k, t);
                }
                logits.at(b, 0, k) = sum / static_cast<double>(t0);
            } else {
                for (std::size_t t = 0; t < t0; ++t) {
                    logits.at(b, t, k) = fused.at(b, k, t);
                }
            }
        }
    }
    Tensor probs = softmax(logits);
    return {std::move(probs), std::move(logits)};
}

Tensor Network::backward(const Cache& cache, const Tensor& grad_logits) {
    const std::size_t batch = cache.batch;
    const std::size_t c = spec_.num_classes;
    const std::size_t t0 = spec_.output_len;
    expect_shape(grad_logits, {batch, spec_.label_len(), c}, "network backward grad_logits");
    Tensor grad_fused({batch, c, t0});
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t k = 0; k < c; ++k) {
            for (std::size_t t = 0; t < t0; ++t) {
                grad_fused.at(b, k, t) = spec_.head == HeadMode::Average
                                             ? grad_logits.at(b, 0, k) / static_cast<double>(t0)
                                             : grad_logits.at(b, t, k);
            }
        }
    }
    Tensor grad_input({batch, spec_.input_dim, spec_.input_len});
    for (std::size_t i = 0; i < spec_.towers.size(); ++i) {
        add_inplace(grad_input, tower_backward(spec_.towers[i], params_.towers[i], cache.towers[i], grad_fused));
    }
    return grad_input;
}

void Network::zero_grad() {
    for (Parameter* p : parameters()) {
        p->zero_grad();
    }
}

std::vector<std::set<long>> probe_receptive_field(const TowerSpec& tower, TowerParams& params, std::size_t t_in,
                                                  std::uint64_t seed) {
    const std::size_t channels = tower.layers.front().conv.in_channels;
    const std::size_t nodes = output_length(tower, t_in).back();
    const std::size_t out_channels = tower.layers.back().conv.out_channels;
    std::vector<std::set<long>> influence(nodes);
    Rng rng(seed);
    constexpr int kTrials = 3;
    for (int trial = 0; trial < kTrials; ++trial) {
        Tensor base({1, channels, t_in});
        for (double& v : base.values()) {
            v = rng.normal();
        }
        const Tensor reference = tower_forward(tower, params, base, Mode::Eval);
        for (std::size_t f = 0; f < t_in; ++f) {
            Tensor probe = base;
            for (std::size_t ch = 0; ch < channels; ++ch) {
                probe.at(0, ch, f) += 1.0 + rng.uniform();
            }
            const Tensor out = tower_forward(tower, params, probe, Mode::Eval);
            for (std::size_t j = 0; j < nodes; ++j) {
                for (std::size_t ch = 0; ch < out_channels; ++ch) {
                    if (std::abs(out.at(0, ch, j) - reference.at(0, ch, j)) > 1e-12) {
                        influence[j].insert(static_cast<long>(f));
                        break;
                    }
                }
            }
        }
    }
    return influence;
}

std::vector<std::set<long>> probe_receptive_field(const TowerSpec& tower, std::size_t t_in, std::uint64_t seed) {
    Rng rng(seed);
    TowerParams params;
    for (const LayerSpec& layer : tower.layers) {
        LayerParams p = init_layer_params(layer, rng);
        for (double& v : p.bias.value.values()) {
            v = rng.uniform(-0.1, 0.1);
        }
        if (p.bn) {
            for (std::size_t ch = 0; ch < p.bn->channels(); ++ch) {
                p.bn->gamma.value[ch] = rng.uniform(0.5, 1.5);
                p.bn->beta.value[ch] = rng.uniform(0.1, 0.5);
                p.bn->running_mean[ch] = rng.uniform(-0.2, 0.2);
                p.bn->running_var[ch] = rng.uniform(0.5, 2.0);
            }
        }
        params.layers.push_back(std::move(p));
    }
    return probe_receptive_field(tower, params, t_in, seed + 1);
}

}  // namespace mrtcn
