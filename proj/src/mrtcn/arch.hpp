#pragma once

// Multi-tower temporal convolution network: declarative specs, parameter
// storage, TConv block forward/backward and receptive-field arithmetic.

#include "mrtcn/ops.hpp"
#include "mrtcn/parameter.hpp"
#include "mrtcn/rng.hpp"
#include "mrtcn/tensor.hpp"

#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mrtcn {

/// Kernel geometry of one layer, channel counts excluded.
struct LayerGeometry {
    std::size_t kernel = 1;
    std::size_t stride = 1;
    std::size_t dilation = 1;
    std::size_t padding = 0;

    friend bool operator==(const LayerGeometry&, const LayerGeometry&) = default;
};

struct LayerSpec {
    Conv1dSpec conv;
    bool has_batchnorm = true;
    bool has_relu = true;
    bool has_residual = true;

    LayerGeometry geometry() const { return {conv.kernel, conv.stride, conv.dilation, conv.padding}; }

    friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct TowerSpec {
    std::string name;
    std::vector<LayerSpec> layers;

    friend bool operator==(const TowerSpec&, const TowerSpec&) = default;
};

enum class HeadMode {
    Dense,    // one class distribution per output node
    Average,  // fused logits of all output nodes averaged into a single node
};

struct NetworkSpec {
    std::vector<TowerSpec> towers;
    std::size_t input_len = 30;
    std::size_t input_dim = 1;
    std::size_t num_classes = 2;
    std::size_t output_len = 2;
    std::size_t hidden_channels = 128;
    HeadMode head = HeadMode::Dense;

    /// Number of class distributions the network emits per window.
    std::size_t label_len() const { return head == HeadMode::Average ? 1 : output_len; }

    /// Throws when towers disagree on output length, channels do not chain,
    /// or a layer cannot be applied (the failing layer is named).
    void validate() const;

    /// Stable text form; hashed into checkpoints.
    std::string canonical() const;
    std::uint64_t hash() const;

    friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;
};

/// Inverse of NetworkSpec::canonical().
NetworkSpec parse_network_spec(std::string_view canonical);

std::string layer_name(const TowerSpec& tower, std::size_t index);

/// Geometry of the named reference towers "t1", "t2", "t3".
std::vector<LayerGeometry> reference_tower(std::string_view name);

/// Hidden layers use `hidden` channels, the last layer emits `classes`.
TowerSpec make_tower(std::string name, std::span<const LayerGeometry> geometry, std::size_t input_dim,
                     std::size_t hidden, std::size_t classes, bool residual = true);

/// Towers from reference names; repeated names get a ".2", ".3" suffix.
NetworkSpec build_network(std::span<const std::string> tower_names, std::size_t input_dim, std::size_t classes,
                          std::size_t hidden = 128, HeadMode head = HeadMode::Dense, std::size_t input_len = 30);

/// Three-tower reference network (t1 + t2 + t3), 30 input frames, 2 outputs.
NetworkSpec build_default_network(std::size_t input_dim, std::size_t classes, std::size_t hidden = 128);

/// Length after each layer of the tower for an input of t_in frames.
std::vector<std::size_t> output_length(const TowerSpec& tower, std::size_t t_in);

struct ReceptiveFieldInfo {
    long rf = 1;           // frames spanned by one output node
    long jump = 1;         // frames between adjacent output nodes
    long left_offset = 0;  // first frame of output node 0's span (negative with padding)

    friend bool operator==(const ReceptiveFieldInfo&, const ReceptiveFieldInfo&) = default;
};

ReceptiveFieldInfo receptive_field(std::span<const LayerSpec> layers);
ReceptiveFieldInfo receptive_field(const TowerSpec& tower);

/// Input frames (within [0, t_in)) that can influence each output node,
/// derived by index arithmetic over the conv taps and residual slices.
/// Dilation can leave holes, so this is a set rather than an interval.
std::vector<std::set<long>> analytic_influence(const TowerSpec& tower, std::size_t t_in);

/// For each output position, the input frame used by the residual path: the
/// centre tap of that position's kernel window, clamped to [0, l_in).
std::vector<std::size_t> residual_slice_indices(const Conv1dSpec& conv, std::size_t l_in, std::size_t l_out);

struct LayerParams {
    Parameter weight;  // [c_out, c_in, k]
    Parameter bias;    // [c_out]
    std::optional<BatchNormState> bn;
    std::optional<Parameter> skip;  // [c_out, c_in, 1] when channels differ
};

struct TowerParams {
    std::vector<LayerParams> layers;
};

struct NetworkParams {
    std::vector<TowerParams> towers;
};

/// Fan-in scaled uniform conv weights, zero biases, unit BN scale.
LayerParams init_layer_params(const LayerSpec& layer, Rng& rng);
NetworkParams init_params(const NetworkSpec& spec, std::uint64_t seed);

/// Trainable parameters in declaration order (tower, layer, weight, bias,
/// gamma, beta, skip).
std::vector<Parameter*> parameter_list(NetworkParams& params);

struct BlockCache {
    Tensor input;
    Tensor conv_out;
    BatchNormCache bn;
    Tensor pre_relu;
    Tensor skip_input;  // input gathered at residual_slice_indices
    std::vector<std::size_t> skip_index;
};

/// conv -> batch norm -> ReLU, then the residual slice of the input is added
/// (through the 1x1 projection when the channel counts differ).
Tensor tconv_block_forward(const Tensor& x, const LayerSpec& layer, LayerParams& params, Mode mode,
                           BlockCache* cache = nullptr, std::string_view name = {});

/// Accumulates parameter gradients; returns the gradient w.r.t. the block input.
Tensor tconv_block_backward(const LayerSpec& layer, LayerParams& params, const BlockCache& cache,
                            const Tensor& grad_out);

struct TowerCache {
    std::vector<BlockCache> blocks;
};

Tensor tower_forward(const TowerSpec& tower, TowerParams& params, const Tensor& x, Mode mode,
                     TowerCache* cache = nullptr);
Tensor tower_backward(const TowerSpec& tower, TowerParams& params, const TowerCache& cache, const Tensor& grad_out);

class Network {
public:
    struct Output {
        Tensor probs;   // [batch, label_len, classes]
        Tensor logits;  // [batch, label_len, classes]
    };

    struct Cache {
        std::vector<TowerCache> towers;
        std::size_t batch = 0;
    };

    Network() = default;
    Network(NetworkSpec spec, std::uint64_t seed);
    Network(NetworkSpec spec, NetworkParams params);

    /// x is [batch, input_dim, input_len]. Towers are summed in order, then
    /// softmaxed over classes.
    Output forward(const Tensor& x, Mode mode, Cache* cache = nullptr);

    /// Gradient w.r.t. the logits in, parameter gradients accumulated, gradient
    /// w.r.t. the input returned.
    Tensor backward(const Cache& cache, const Tensor& grad_logits);

    std::vector<Parameter*> parameters() { return parameter_list(params_); }
    void zero_grad();

    const NetworkSpec& spec() const { return spec_; }
    NetworkParams& params() { return params_; }
    const NetworkParams& params() const { return params_; }

private:
    NetworkSpec spec_;
    NetworkParams params_;
};

/// Empirical influence sets: every input frame is perturbed in turn and the
/// output nodes whose value changes are recorded (union over a few random
/// inputs so that inactive ReLUs cannot hide a dependency). Batch norm runs in
/// eval mode; params should carry nonzero random weights.
std::vector<std::set<long>> probe_receptive_field(const TowerSpec& tower, TowerParams& params, std::size_t t_in,
                                                  std::uint64_t seed = 1);

/// Same, with randomized parameters (random BN statistics included).
std::vector<std::set<long>> probe_receptive_field(const TowerSpec& tower, std::size_t t_in, std::uint64_t seed = 1);

}  // namespace mrtcn
