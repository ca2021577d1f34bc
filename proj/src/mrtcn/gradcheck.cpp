#include "mrtcn/gradcheck.hpp"

#include "mrtcn/arch.hpp"
#include "mrtcn/error.hpp"
#include "mrtcn/ops.hpp"
#include "mrtcn/rng.hpp"

#include <algorithm>
#include <cmath>

namespace mrtcn {

namespace {

// Packs named tensors into one flat vector and unpacks them again.
class Packer {
public:
    void add(const Tensor& t) {
        shapes_.push_back(t.shape());
        point_.insert(point_.end(), t.values().begin(), t.values().end());
    }

    std::vector<double> point() const { return point_; }

    Tensor unpack(std::span<const double> flat, std::size_t index) const {
        std::size_t offset = 0;
        for (std::size_t i = 0; i < index; ++i) {
            offset += shape_size(shapes_[i]);
        }
        const std::size_t n = shape_size(shapes_[index]);
        return Tensor(shapes_[index], std::vector<double>(flat.begin() + static_cast<long>(offset),
                                                          flat.begin() + static_cast<long>(offset + n)));
    }

private:
    std::vector<Shape> shapes_;
    std::vector<double> point_;
};

Tensor random_tensor(Shape shape, Rng& rng, double scale = 1.0) {
    Tensor t(std::move(shape));
    for (double& v : t.values()) {
        v = scale * rng.normal();
    }
    return t;
}

double dot(const Tensor& a, const Tensor& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        s += a[i] * b[i];
    }
    return s;
}

void append(std::vector<double>& out, const Tensor& t) { out.insert(out.end(), t.values().begin(), t.values().end()); }

GradCheckProblem conv_problem(std::size_t batch, std::size_t c_in, std::size_t c_out, std::size_t length,
                              LayerGeometry g, Rng& rng) {
    Conv1dSpec spec{c_in, c_out, g.kernel, g.stride, g.dilation, g.padding};
    const std::size_t l_out = spec.output_length(length);
    Packer pk;
    pk.add(random_tensor({batch, c_in, length}, rng));
    pk.add(random_tensor({c_out, c_in, g.kernel}, rng, 0.5));
    pk.add(random_tensor({c_out}, rng, 0.5));
    const Tensor r = random_tensor({batch, c_out, l_out}, rng);
    GradCheckProblem p;
    p.label = "conv1d k" + std::to_string(g.kernel) + " s" + std::to_string(g.stride) + " d" +
              std::to_string(g.dilation) + " p" + std::to_string(g.padding) + " L" + std::to_string(length);
    p.point = pk.point();
    p.objective = [=](std::span<const double> v) {
        return dot(r, conv1d_forward(pk.unpack(v, 0), spec, pk.unpack(v, 1), pk.unpack(v, 2)));
    };
    p.gradient = [=](std::span<const double> v) {
        Conv1dGrads g2 = conv1d_backward(pk.unpack(v, 0), spec, pk.unpack(v, 1), r);
        std::vector<double> out;
        append(out, g2.input);
        append(out, g2.weight);
        append(out, g2.bias);
        return out;
    };
    return p;
}

std::vector<GradCheckProblem> conv_problems(std::uint64_t seed) {
    Rng rng(seed);
    std::vector<GradCheckProblem> problems;
    for (std::size_t k : {1, 2, 3}) {
        for (std::size_t s : {1, 2, 3, 5}) {
            for (std::size_t d : {1, 2}) {
                for (std::size_t pad : {0, 1}) {
                    problems.push_back(conv_problem(2, 3, 2, 11, {k, s, d, pad}, rng));
                }
            }
        }
    }
    problems.push_back(conv_problem(3, 4, 3, 7, {3, 1, 1, 0}, rng));
    return problems;
}

GradCheckProblem batchnorm_problem(Mode mode, Rng& rng) {
    const Shape shape{3, 2, 5};
    Packer pk;
    pk.add(random_tensor(shape, rng, 2.0));
    pk.add(random_tensor({2}, rng));
    pk.add(random_tensor({2}, rng));
    BatchNormState base(2);
    base.running_mean[0] = 0.3;
    base.running_mean[1] = -0.2;
    base.running_var[0] = 1.7;
    base.running_var[1] = 0.6;
    const Tensor r = random_tensor(shape, rng);
    auto make_state = [base, pk](std::span<const double> v) {
        BatchNormState st = base;
        st.gamma.value = pk.unpack(v, 1);
        st.beta.value = pk.unpack(v, 2);
        return st;
    };
    GradCheckProblem p;
    p.label = mode == Mode::Train ? "batchnorm1d train" : "batchnorm1d eval";
    p.point = pk.point();
    p.objective = [=](std::span<const double> v) {
        BatchNormState st = make_state(v);
        return dot(r, batchnorm1d_forward(pk.unpack(v, 0), st, mode));
    };
    p.gradient = [=](std::span<const double> v) {
        BatchNormState st = make_state(v);
        BatchNormCache cache;
        batchnorm1d_forward(pk.unpack(v, 0), st, mode, &cache);
        BatchNormGrads g = batchnorm1d_backward(cache, st, r);
        std::vector<double> out;
        append(out, g.input);
        append(out, g.gamma);
        append(out, g.beta);
        return out;
    };
    return p;
}

std::vector<GradCheckProblem> relu_problems(std::uint64_t seed) {
    Rng rng(seed);
    Tensor x({4, 3, 6});
    for (double& v : x.values()) {
        // Probe away from the kink: |x| > 1e-3.
        do {
            v = rng.normal();
        } while (std::abs(v) <= 1e-3);
    }
    const Tensor r = random_tensor(x.shape(), rng);
    const Shape shape = x.shape();
    GradCheckProblem p;
    p.label = "relu";
    p.point.assign(x.values().begin(), x.values().end());
    p.objective = [=](std::span<const double> v) {
        return dot(r, relu_forward(Tensor(shape, std::vector<double>(v.begin(), v.end()))));
    };
    p.gradient = [=](std::span<const double> v) {
        const Tensor g = relu_backward(Tensor(shape, std::vector<double>(v.begin(), v.end())), r);
        return std::vector<double>(g.values().begin(), g.values().end());
    };
    return {p};
}

std::vector<GradCheckProblem> cross_entropy_problems(std::uint64_t seed) {
    Rng rng(seed);
    std::vector<GradCheckProblem> problems;
    for (int variant = 0; variant < 2; ++variant) {
        const Shape shape{3, 2, 5};
        const Tensor logits = random_tensor(shape, rng, 2.0);
        std::vector<int> targets(6);
        for (int& t : targets) {
            t = static_cast<int>(rng.below(5));
        }
        std::vector<double> weights = {0.033, 1.0, 1.0, 1.0, 0.05};
        if (variant == 1) {
            for (double& w : weights) {
                w = rng.uniform(0.1, 2.0);
            }
        }
        GradCheckProblem p;
        p.label = variant == 0 ? "softmax+weighted CE (reference weights)" : "softmax+weighted CE (random weights)";
        p.point.assign(logits.values().begin(), logits.values().end());
        p.objective = [=](std::span<const double> v) {
            return weighted_cross_entropy(Tensor(shape, std::vector<double>(v.begin(), v.end())), targets, weights)
                .loss;
        };
        p.gradient = [=](std::span<const double> v) {
            const LossResult res =
                weighted_cross_entropy(Tensor(shape, std::vector<double>(v.begin(), v.end())), targets, weights);
            return std::vector<double>(res.grad_logits.values().begin(), res.grad_logits.values().end());
        };
        problems.push_back(std::move(p));
    }
    return problems;
}

// Flattens every trainable parameter of a block/network after the input.
void load_params(std::span<Parameter* const> params, std::span<const double> v, std::size_t offset) {
    for (Parameter* p : params) {
        std::copy(v.begin() + static_cast<long>(offset), v.begin() + static_cast<long>(offset + p->value.size()),
                  p->value.data());
        offset += p->value.size();
    }
}

std::vector<Parameter*> layer_parameters(LayerParams& lp) {
    std::vector<Parameter*> list{&lp.weight, &lp.bias};
    if (lp.bn) {
        list.push_back(&lp.bn->gamma);
        list.push_back(&lp.bn->beta);
    }
    if (lp.skip) {
        list.push_back(&*lp.skip);
    }
    return list;
}

GradCheckProblem block_problem(std::size_t c_in, std::size_t c_out, LayerGeometry g, std::size_t length, Rng& rng) {
    LayerSpec layer;
    layer.conv = {c_in, c_out, g.kernel, g.stride, g.dilation, g.padding};
    LayerParams base = init_layer_params(layer, rng);
    for (double& v : base.bias.value.values()) {
        v = 0.1 * rng.normal();
    }
    for (double& v : base.bn->gamma.value.values()) {
        v = rng.uniform(0.5, 1.5);
    }
    for (double& v : base.bn->beta.value.values()) {
        v = 0.2 * rng.normal();
    }
    const Tensor x = random_tensor({3, c_in, length}, rng);
    const std::size_t l_out = layer.conv.output_length(length);
    const Tensor r = random_tensor({3, c_out, l_out}, rng);

    GradCheckProblem p;
    p.label = "tconv_block " + std::to_string(c_in) + "->" + std::to_string(c_out) + " k" +
              std::to_string(g.kernel) + " s" + std::to_string(g.stride) + " d" + std::to_string(g.dilation) + " p" +
              std::to_string(g.padding);
    p.point.assign(x.values().begin(), x.values().end());
    for (Parameter* q : layer_parameters(base)) {
        append(p.point, q->value);
    }
    const Shape xshape = x.shape();
    auto build = [=](std::span<const double> v) {
        LayerParams lp = base;
        load_params(layer_parameters(lp), v, shape_size(xshape));
        return lp;
    };
    p.objective = [=](std::span<const double> v) {
        LayerParams lp = build(v);
        const Tensor xi(xshape, std::vector<double>(v.begin(), v.begin() + static_cast<long>(shape_size(xshape))));
        return dot(r, tconv_block_forward(xi, layer, lp, Mode::Train));
    };
    p.gradient = [=](std::span<const double> v) {
        LayerParams lp = build(v);
        const Tensor xi(xshape, std::vector<double>(v.begin(), v.begin() + static_cast<long>(shape_size(xshape))));
        BlockCache cache;
        tconv_block_forward(xi, layer, lp, Mode::Train, &cache);
        const Tensor gx = tconv_block_backward(layer, lp, cache, r);
        std::vector<double> out;
        append(out, gx);
        for (Parameter* q : layer_parameters(lp)) {
            append(out, q->grad);
        }
        return out;
    };
    return p;
}

std::vector<GradCheckProblem> block_problems(std::uint64_t seed) {
    Rng rng(seed);
    return {block_problem(3, 4, {3, 3, 1, 1}, 10, rng), block_problem(4, 4, {3, 5, 2, 0}, 16, rng),
            block_problem(2, 3, {2, 2, 1, 0}, 9, rng)};
}

std::vector<GradCheckProblem> network_problems(std::uint64_t seed) {
    Rng rng(seed);
    const NetworkSpec spec = build_default_network(3, 3, 4);
    Network base(spec, seed);
    for (Parameter* q : base.parameters()) {
        if (q->value.rank() == 1) {
            for (double& v : q->value.values()) {
                v += 0.1 * rng.normal();
            }
        }
    }
    const std::size_t batch = 3;
    const Tensor x = random_tensor({batch, spec.input_dim, spec.input_len}, rng);
    std::vector<int> targets(batch * spec.output_len);
    for (int& t : targets) {
        t = static_cast<int>(rng.below(spec.num_classes));
    }
    const std::vector<double> weights = {0.33, 1.0, 0.7};

    GradCheckProblem p;
    p.label = "network t1+t2+t3 + weighted CE";
    p.point.assign(x.values().begin(), x.values().end());
    for (Parameter* q : base.parameters()) {
        append(p.point, q->value);
    }
    const std::size_t nx = x.size();
    const Shape xshape = x.shape();
    auto build = [=](std::span<const double> v) {
        Network net = base;
        load_params(net.parameters(), v, nx);
        return net;
    };
    p.objective = [=](std::span<const double> v) {
        Network net = build(v);
        const Tensor xi(xshape, std::vector<double>(v.begin(), v.begin() + static_cast<long>(nx)));
        return weighted_cross_entropy(net.forward(xi, Mode::Train).logits, targets, weights).loss;
    };
    p.gradient = [=](std::span<const double> v) {
        Network net = build(v);
        const Tensor xi(xshape, std::vector<double>(v.begin(), v.begin() + static_cast<long>(nx)));
        Network::Cache cache;
        const Network::Output out = net.forward(xi, Mode::Train, &cache);
        const LossResult loss = weighted_cross_entropy(out.logits, targets, weights);
        const Tensor gx = net.backward(cache, loss.grad_logits);
        std::vector<double> grad;
        append(grad, gx);
        for (Parameter* q : net.parameters()) {
            append(grad, q->grad);
        }
        return grad;
    };
    return {p};
}

}  // namespace

double max_relative_error(const GradCheckProblem& problem, double perturbation) {
    const std::vector<double> analytic = problem.gradient(problem.point);
    require(analytic.size() == problem.point.size(), ErrorKind::InvalidArgument,
            "gradient of " + problem.label + " has the wrong length");
    std::vector<double> x = problem.point;
    double worst = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double saved = x[i];
        x[i] = saved + perturbation;
        const double plus = problem.objective(x);
        x[i] = saved - perturbation;
        const double minus = problem.objective(x);
        x[i] = saved;
        const double numeric = (plus - minus) / (2.0 * perturbation);
        const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), kGradCheckFloor});
        worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
    }
    return worst;
}

void GradCheckRegistry::add(std::string name, double tolerance, Factory factory) {
    entries_.push_back({std::move(name), tolerance, std::move(factory)});
}

std::vector<std::string> GradCheckRegistry::names() const {
    std::vector<std::string> out;
    for (const Entry& e : entries_) {
        out.push_back(e.name);
    }
    return out;
}

bool GradCheckRegistry::contains(const std::string& name) const {
    return std::any_of(entries_.begin(), entries_.end(), [&](const Entry& e) { return e.name == name; });
}

GradCheckResult GradCheckRegistry::run(const std::string& name, std::uint64_t seed, double perturbation) const {
    const auto it = std::find_if(entries_.begin(), entries_.end(), [&](const Entry& e) { return e.name == name; });
    if (it == entries_.end()) {
        fail(ErrorKind::InvalidArgument, "unknown gradient check '" + name + "'");
    }
    GradCheckResult result{name, 0.0, it->tolerance, 0, {}};
    for (const GradCheckProblem& problem : it->factory(derive_seed(seed, name))) {
        const double err = max_relative_error(problem, perturbation);
        ++result.problems;
        if (err >= result.max_rel_error) {
            result.max_rel_error = err;
            result.worst_problem = problem.label;
        }
    }
    return result;
}

std::vector<GradCheckResult> GradCheckRegistry::run_all(std::uint64_t seed, double perturbation) const {
    std::vector<GradCheckResult> results;
    for (const Entry& e : entries_) {
        results.push_back(run(e.name, seed, perturbation));
    }
    return results;
}

GradCheckRegistry GradCheckRegistry::builtin() {
    GradCheckRegistry registry;
    registry.add("conv1d", 1e-4, conv_problems);
    registry.add("batchnorm1d", 1e-4, [](std::uint64_t seed) {
        Rng rng(seed);
        std::vector<GradCheckProblem> problems;
        problems.push_back(batchnorm_problem(Mode::Train, rng));
        problems.push_back(batchnorm_problem(Mode::Eval, rng));
        return problems;
    });
    registry.add("relu", 1e-4, relu_problems);
    registry.add("softmax_cross_entropy", 1e-4, cross_entropy_problems);
    registry.add("tconv_block", 1e-4, block_problems);
    registry.add("network", 1e-3, network_problems);
    return registry;
}

double finite_diff_check(const std::string& op_name, std::uint64_t seed, double perturbation) {
    return GradCheckRegistry::builtin().run(op_name, seed, perturbation).max_rel_error;
}

}  // namespace mrtcn
