#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bdd/rng.hpp"
#include "bdd/tensor.hpp"

namespace bdd::nn {

/// Architecture description of one layer. Conv2d is fixed to a 3x3
/// kernel, stride 1, pad 1; MaxPool2x2 to kernel 2, stride 2.
struct LayerSpec {
    enum class Kind { Conv2d, ReLU, MaxPool2x2, Dropout, Flatten, Dense };

    Kind kind = Kind::ReLU;
    int in_channels = 0;
    int out_channels = 0;
    int in_features = 0;
    int out_features = 0;
    double rate = 0.0;

    static LayerSpec conv2d(int in_channels, int out_channels);
    static LayerSpec relu() { return LayerSpec{Kind::ReLU, 0, 0, 0, 0, 0.0}; }
    static LayerSpec max_pool2x2() { return LayerSpec{Kind::MaxPool2x2, 0, 0, 0, 0, 0.0}; }
    static LayerSpec dropout(double rate);
    static LayerSpec flatten() { return LayerSpec{Kind::Flatten, 0, 0, 0, 0, 0.0}; }
    static LayerSpec dense(int in_features, int out_features);

    bool has_params() const noexcept {
        return kind == Kind::Conv2d || kind == Kind::Dense;
    }
};

/// A materialized network: ordered layers with their weight/bias tensors.
/// Construction draws every weight from one SplitMix64 stream seeded with
/// `seed`, so identical seeds give identical networks.
class Network {
public:
    Network(std::vector<LayerSpec> specs, std::uint64_t seed);

    const std::vector<LayerSpec>& specs() const noexcept { return specs_; }
    std::uint64_t seed() const noexcept { return seed_; }

    /// Parameter tensors in a fixed order: for each parameterized layer,
    /// weight then bias.
    std::vector<Tensor*> parameters();
    std::vector<const Tensor*> parameters() const;
    std::int64_t parameter_count() const;

    Tensor& weight(std::size_t layer) { return weights_[layer]; }
    const Tensor& weight(std::size_t layer) const { return weights_[layer]; }
    Tensor& bias(std::size_t layer) { return biases_[layer]; }
    const Tensor& bias(std::size_t layer) const { return biases_[layer]; }

private:
    std::vector<LayerSpec> specs_;
    std::vector<Tensor> weights_; // index-aligned with specs_; empty if unparameterized
    std::vector<Tensor> biases_;
    std::uint64_t seed_;
};

/// Saved intermediates from one forward pass, consumed by backward().
struct ForwardCache {
    struct LayerCache {
        Tensor input;                // layer input (pre-activation for ReLU)
        Tensor col;                  // conv: im2col matrix
        std::vector<std::int64_t> argmax; // maxpool: winning input index per output
        std::vector<double> mask;    // dropout: per-element scale (0 or 1/(1-rate))
    };
    std::vector<LayerCache> layers;
    Tensor logits;
    bool valid = false;
};

struct SoftmaxResult {
    double loss = 0.0; // mean cross-entropy, nats
    Tensor grad_logits;
};

struct Metrics {
    double loss = 0.0;
    double accuracy = 0.0;
};

/// Inputs paired with integer class labels; inputs are N x C x H x W.
struct LabeledData {
    Tensor inputs;
    std::vector<int> labels;

    std::int64_t count() const noexcept { return static_cast<std::int64_t>(labels.size()); }
};

/// Kaiming uniform bound for a ReLU fan-in: sqrt(2) * sqrt(3 / fan_in).
double kaiming_bound(int fan_in);

/// Fills a tensor with uniform draws from [-kaiming_bound(fan_in), +bound].
void fill_kaiming_uniform(Tensor& weights, int fan_in, SplitMix64& rng);

/// The reference CNN: Conv(1->16) ReLU Pool Conv(16->32) ReLU Pool
/// Flatten Dropout(0.25) Dense(1568->128) ReLU Dense(128->10).
/// 206,922 trainable parameters for 28x28 inputs.
Network build_appendix_cnn(std::uint64_t seed);

/// Runs the network on a batch. Dropout is active only when training,
/// with inverted scaling; evaluation consumes no randomness. Throws
/// ShapeError when the batch does not match the layer chain.
ForwardCache forward(const Network& net, const Tensor& batch, bool training,
                     SplitMix64& rng);

/// Mean cross-entropy over the batch plus d(loss)/d(logits), computed
/// with max-subtraction. Throws DomainError on a label outside [0, classes).
SoftmaxResult softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels);

/// Gradients for every parameter, in parameters() order. Throws
/// StateError when the cache does not come from a matching forward call.
std::vector<Tensor> backward(const Network& net, const ForwardCache& cache,
                             const Tensor& grad_logits);

/// SGD with momentum: delta(t) = -eta * grad + alpha * delta(t-1);
/// the per-parameter velocity stores delta(t).
class SgdMomentum {
public:
    SgdMomentum(double eta, double alpha);

    double eta() const noexcept { return eta_; }
    double alpha() const noexcept { return alpha_; }
    const std::vector<Tensor>& velocities() const noexcept { return velocities_; }

    /// Applies one update. Velocities are created as zeros on first use;
    /// throws ShapeError when shapes disagree.
    void step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads);

private:
    double eta_;
    double alpha_;
    std::vector<Tensor> velocities_;
};

/// One pass over the data in seeded-shuffle order, updating the network
/// per batch; the final short batch is included. Returns mean loss and
/// accuracy over the training passes.
Metrics train_epoch(Network& net, SgdMomentum& opt, const LabeledData& data,
                    int batch_size, SplitMix64& rng);

/// Loss/accuracy with dropout disabled; argmax ties resolve to the
/// lowest class id. Throws DomainError on an empty dataset.
Metrics evaluate(const Network& net, const LabeledData& data);

/// Checkpoint container: "BDNN", version u16, parameterized-layer count
/// u16, then per parameter tensor (layer order, weight then bias): rank
/// u8, extents u32, values f64, all little-endian.
std::vector<std::uint8_t> checkpoint_bytes(const Network& net);

/// Restores parameters from checkpoint bytes; shapes must match the
/// network. Throws FormatError on malformed bytes.
void restore_checkpoint(Network& net, const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const Network& net, const std::string& path);
void load_checkpoint(Network& net, const std::string& path);

} // namespace bdd::nn
