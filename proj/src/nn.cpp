#include "bdd/nn.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

namespace bdd::nn {

namespace {

constexpr char kCheckpointMagic[4] = {'B', 'D', 'N', 'N'};
constexpr std::uint16_t kCheckpointVersion = 1;

struct Shape4 {
    int n, c, h, w;
};

Shape4 require_4d(const Tensor& t, const char* who) {
    if (t.rank() != 4) {
        throw ShapeError(std::string(who) + " expects an NxCxHxW input, got rank " +
                         std::to_string(t.rank()));
    }
    return Shape4{t.dim(0), t.dim(1), t.dim(2), t.dim(3)};
}

// Unfolds 3x3/stride-1/pad-1 patches into rows of (n,oh,ow) by columns
// of (c,kh,kw), so the convolution becomes one matrix product.
void im2col_3x3(const Tensor& in, Tensor& col) {
    const auto [n_batch, channels, height, width] = require_4d(in, "conv2d");
    const double* src = in.data();
    double* dst = col.data();
    const int row_width = channels * 9;
    for (int n = 0; n < n_batch; ++n) {
        for (int oh = 0; oh < height; ++oh) {
            for (int ow = 0; ow < width; ++ow) {
                double* row = dst +
                    (static_cast<std::int64_t>(n) * height * width + oh * width + ow) *
                        row_width;
                for (int c = 0; c < channels; ++c) {
                    const double* plane =
                        src + (static_cast<std::int64_t>(n) * channels + c) * height * width;
                    for (int kh = 0; kh < 3; ++kh) {
                        const int ih = oh + kh - 1;
                        for (int kw = 0; kw < 3; ++kw) {
                            const int iw = ow + kw - 1;
                            const bool inside =
                                ih >= 0 && ih < height && iw >= 0 && iw < width;
                            *row++ = inside ? plane[ih * width + iw] : 0.0;
                        }
                    }
                }
            }
        }
    }
}

void col2im_3x3(const Tensor& grad_col, const Shape4& shape, Tensor& grad_in) {
    const double* src = grad_col.data();
    double* dst = grad_in.data();
    const int row_width = shape.c * 9;
    for (int n = 0; n < shape.n; ++n) {
        for (int oh = 0; oh < shape.h; ++oh) {
            for (int ow = 0; ow < shape.w; ++ow) {
                const double* row = src +
                    (static_cast<std::int64_t>(n) * shape.h * shape.w + oh * shape.w + ow) *
                        row_width;
                for (int c = 0; c < shape.c; ++c) {
                    double* plane = dst +
                        (static_cast<std::int64_t>(n) * shape.c + c) * shape.h * shape.w;
                    for (int kh = 0; kh < 3; ++kh) {
                        const int ih = oh + kh - 1;
                        for (int kw = 0; kw < 3; ++kw) {
                            const int iw = ow + kw - 1;
                            if (ih >= 0 && ih < shape.h && iw >= 0 && iw < shape.w) {
                                plane[ih * shape.w + iw] += *row;
                            }
                            ++row;
                        }
                    }
                }
            }
        }
    }
}

int argmax_row(const double* row, int k) {
    int best = 0;
    for (int i = 1; i < k; ++i) {
        if (row[i] > row[best]) {
            best = i;
        }
    }
    return best;
}

void append_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v & 0xFF));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void append_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) {
        out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
    }
}

void append_f64(std::vector<std::uint8_t>& out, double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) {
        out.push_back(static_cast<std::uint8_t>((bits >> (8 * i)) & 0xFF));
    }
}

class ByteReader {
public:
    ByteReader(const std::uint8_t* data, std::size_t size) : data_(data), size_(size) {}

    std::uint8_t u8() { return take(1)[0]; }

    std::uint16_t u16() {
        const auto* p = take(2);
        return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
    }

    std::uint32_t u32() {
        const auto* p = take(4);
        return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
               (static_cast<std::uint32_t>(p[2]) << 16) |
               (static_cast<std::uint32_t>(p[3]) << 24);
    }

    double f64() {
        const auto* p = take(8);
        std::uint64_t bits = 0;
        for (int i = 7; i >= 0; --i) {
            bits = (bits << 8) | p[i];
        }
        return std::bit_cast<double>(bits);
    }

    bool exhausted() const noexcept { return pos_ == size_; }

private:
    const std::uint8_t* take(std::size_t n) {
        if (pos_ + n > size_) {
            throw FormatError("checkpoint truncated");
        }
        const std::uint8_t* p = data_ + pos_;
        pos_ += n;
        return p;
    }

    const std::uint8_t* data_;
    std::size_t size_;
    std::size_t pos_ = 0;
};

} // namespace

LayerSpec LayerSpec::conv2d(int in_channels, int out_channels) {
    if (in_channels < 1 || out_channels < 1) {
        throw DomainError("conv2d channel counts must be positive");
    }
    return LayerSpec{Kind::Conv2d, in_channels, out_channels, 0, 0, 0.0};
}

LayerSpec LayerSpec::dropout(double rate) {
    if (!(rate >= 0.0) || !(rate < 1.0)) {
        throw DomainError("dropout rate must lie in [0,1), got " + std::to_string(rate));
    }
    return LayerSpec{Kind::Dropout, 0, 0, 0, 0, rate};
}

LayerSpec LayerSpec::dense(int in_features, int out_features) {
    if (in_features < 1 || out_features < 1) {
        throw DomainError("dense feature counts must be positive");
    }
    return LayerSpec{Kind::Dense, 0, 0, in_features, out_features, 0.0};
}

double kaiming_bound(int fan_in) {
    if (fan_in < 1) {
        throw DomainError("kaiming_bound requires fan_in >= 1");
    }
    return std::sqrt(2.0) * std::sqrt(3.0 / fan_in);
}

void fill_kaiming_uniform(Tensor& weights, int fan_in, SplitMix64& rng) {
    const double bound = kaiming_bound(fan_in);
    double* data = weights.data();
    for (std::int64_t i = 0; i < weights.size(); ++i) {
        data[i] = (2.0 * rng.next_double() - 1.0) * bound;
    }
}

Network::Network(std::vector<LayerSpec> specs, std::uint64_t seed)
    : specs_(std::move(specs)), seed_(seed) {
    weights_.resize(specs_.size());
    biases_.resize(specs_.size());
    SplitMix64 rng(seed);
    for (std::size_t i = 0; i < specs_.size(); ++i) {
        const LayerSpec& spec = specs_[i];
        if (spec.kind == LayerSpec::Kind::Conv2d) {
            weights_[i] = Tensor({spec.out_channels, spec.in_channels, 3, 3});
            biases_[i] = Tensor({spec.out_channels});
            fill_kaiming_uniform(weights_[i], spec.in_channels * 9, rng);
        } else if (spec.kind == LayerSpec::Kind::Dense) {
            weights_[i] = Tensor({spec.out_features, spec.in_features});
            biases_[i] = Tensor({spec.out_features});
            fill_kaiming_uniform(weights_[i], spec.in_features, rng);
        }
    }
}

std::vector<Tensor*> Network::parameters() {
    std::vector<Tensor*> params;
    for (std::size_t i = 0; i < specs_.size(); ++i) {
        if (specs_[i].has_params()) {
            params.push_back(&weights_[i]);
            params.push_back(&biases_[i]);
        }
    }
    return params;
}

std::vector<const Tensor*> Network::parameters() const {
    std::vector<const Tensor*> params;
    for (std::size_t i = 0; i < specs_.size(); ++i) {
        if (specs_[i].has_params()) {
            params.push_back(&weights_[i]);
            params.push_back(&biases_[i]);
        }
    }
    return params;
}

std::int64_t Network::parameter_count() const {
    std::int64_t count = 0;
    for (const Tensor* t : parameters()) {
        count += t->size();
    }
    return count;
}

Network build_appendix_cnn(std::uint64_t seed) {
    std::vector<LayerSpec> specs = {
        LayerSpec::conv2d(1, 16),    LayerSpec::relu(), LayerSpec::max_pool2x2(),
        LayerSpec::conv2d(16, 32),   LayerSpec::relu(), LayerSpec::max_pool2x2(),
        LayerSpec::flatten(),        LayerSpec::dropout(0.25),
        LayerSpec::dense(1568, 128), LayerSpec::relu(),
        LayerSpec::dense(128, 10),
    };
    return Network(std::move(specs), seed);
}

ForwardCache forward(const Network& net, const Tensor& batch, bool training,
                     SplitMix64& rng) {
    ForwardCache cache;
    cache.layers.resize(net.specs().size());
    Tensor current = batch;

    for (std::size_t li = 0; li < net.specs().size(); ++li) {
        const LayerSpec& spec = net.specs()[li];
        auto& lc = cache.layers[li];

        switch (spec.kind) {
        case LayerSpec::Kind::Conv2d: {
            const auto shape = require_4d(current, "conv2d");
            if (shape.c != spec.in_channels) {
                throw ShapeError("conv2d expects " + std::to_string(spec.in_channels) +
                                 " input channels, got " + std::to_string(shape.c));
            }
            lc.input = current;
            lc.col = Tensor({shape.n * shape.h * shape.w, shape.c * 9});
            im2col_3x3(current, lc.col);

            Tensor out({shape.n, spec.out_channels, shape.h, shape.w});
            const RowMat prod =
                lc.col.as_matrix(shape.n * shape.h * shape.w, shape.c * 9) *
                net.weight(li).as_matrix(spec.out_channels, shape.c * 9).transpose();
            const double* bias = net.bias(li).data();
            double* dst = out.data();
            const int plane = shape.h * shape.w;
            for (int n = 0; n < shape.n; ++n) {
                for (int oc = 0; oc < spec.out_channels; ++oc) {
                    for (int p = 0; p < plane; ++p) {
                        dst[(static_cast<std::int64_t>(n) * spec.out_channels + oc) * plane + p] =
                            prod(static_cast<std::int64_t>(n) * plane + p, oc) + bias[oc];
                    }
                }
            }
            current = std::move(out);
            break;
        }
        case LayerSpec::Kind::ReLU: {
            lc.input = current;
            Tensor out = Tensor::zeros_like(current);
            const double* src = current.data();
            double* dst = out.data();
            for (std::int64_t i = 0; i < current.size(); ++i) {
                dst[i] = src[i] > 0.0 ? src[i] : 0.0;
            }
            current = std::move(out);
            break;
        }
        case LayerSpec::Kind::MaxPool2x2: {
            const auto shape = require_4d(current, "max_pool2x2");
            if (shape.h % 2 != 0 || shape.w % 2 != 0) {
                throw ShapeError("max_pool2x2 requires even spatial dims");
            }
            lc.input = current;
            const int oh = shape.h / 2;
            const int ow = shape.w / 2;
            Tensor out({shape.n, shape.c, oh, ow});
            lc.argmax.resize(static_cast<std::size_t>(out.size()));
            const double* src = current.data();
            double* dst = out.data();
            std::int64_t oi = 0;
            for (int n = 0; n < shape.n; ++n) {
                for (int c = 0; c < shape.c; ++c) {
                    const std::int64_t base =
                        (static_cast<std::int64_t>(n) * shape.c + c) * shape.h * shape.w;
                    for (int y = 0; y < oh; ++y) {
                        for (int x = 0; x < ow; ++x) {
                            // Scan the window in row-major order; strict >
                            // keeps the first index on ties.
                            std::int64_t best = base + (2 * y) * shape.w + 2 * x;
                            double best_val = src[best];
                            for (int dy = 0; dy < 2; ++dy) {
                                for (int dx = 0; dx < 2; ++dx) {
                                    const std::int64_t idx =
                                        base + (2 * y + dy) * shape.w + (2 * x + dx);
                                    if (src[idx] > best_val) {
                                        best_val = src[idx];
                                        best = idx;
                                    }
                                }
                            }
                            lc.argmax[static_cast<std::size_t>(oi)] = best;
                            dst[oi++] = best_val;
                        }
                    }
                }
            }
            current = std::move(out);
            break;
        }
        case LayerSpec::Kind::Dropout: {
            lc.input = current;
            if (!training || spec.rate == 0.0) {
                break; // identity; no mask stored, no draws consumed
            }
            const double scale = 1.0 / (1.0 - spec.rate);
            lc.mask.resize(static_cast<std::size_t>(current.size()));
            Tensor out = Tensor::zeros_like(current);
            const double* src = current.data();
            double* dst = out.data();
            for (std::int64_t i = 0; i < current.size(); ++i) {
                const double keep = rng.next_double() >= spec.rate ? scale : 0.0;
                lc.mask[static_cast<std::size_t>(i)] = keep;
                dst[i] = src[i] * keep;
            }
            current = std::move(out);
            break;
        }
        case LayerSpec::Kind::Flatten: {
            if (current.rank() < 2) {
                throw ShapeError("flatten expects a batched input");
            }
            lc.input = current;
            const int n = current.dim(0);
            const int features = static_cast<int>(current.size() / n);
            Tensor out({n, features});
            std::memcpy(out.data(), current.data(),
                        static_cast<std::size_t>(current.size()) * sizeof(double));
            current = std::move(out);
            break;
        }
        case LayerSpec::Kind::Dense: {
            if (current.rank() != 2) {
                throw ShapeError("dense expects a flattened NxF input");
            }
            if (current.dim(1) != spec.in_features) {
                throw ShapeError("dense expects " + std::to_string(spec.in_features) +
                                 " features, got " + std::to_string(current.dim(1)));
            }
            lc.input = current;
            const int n = current.dim(0);
            Tensor out({n, spec.out_features});
            out.as_matrix(n, spec.out_features).noalias() =
                current.as_matrix(n, spec.in_features) *
                net.weight(li).as_matrix(spec.out_features, spec.in_features).transpose();
            out.as_matrix(n, spec.out_features).rowwise() +=
                Eigen::Map<const Eigen::RowVectorXd>(net.bias(li).data(),
                                                     spec.out_features);
            current = std::move(out);
            break;
        }
        }
    }

    cache.logits = std::move(current);
    cache.valid = true;
    return cache;
}

SoftmaxResult softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels) {
    if (logits.rank() != 2) {
        throw ShapeError("softmax_cross_entropy expects NxK logits");
    }
    const int n = logits.dim(0);
    const int k = logits.dim(1);
    if (static_cast<int>(labels.size()) != n) {
        throw ShapeError("label count does not match batch size");
    }

    SoftmaxResult result;
    result.grad_logits = Tensor({n, k});
    const double* src = logits.data();
    double* grad = result.grad_logits.data();
    double total = 0.0;
    for (int row = 0; row < n; ++row) {
        const int label = labels[static_cast<std::size_t>(row)];
        if (label < 0 || label >= k) {
            throw DomainError("label " + std::to_string(label) + " outside [0," +
                              std::to_string(k) + ")");
        }
        const double* l = src + static_cast<std::int64_t>(row) * k;
        double* g = grad + static_cast<std::int64_t>(row) * k;
        const double m = *std::max_element(l, l + k);
        double sum = 0.0;
        for (int i = 0; i < k; ++i) {
            sum += std::exp(l[i] - m);
        }
        total += m + std::log(sum) - l[label];
        for (int i = 0; i < k; ++i) {
            g[i] = (std::exp(l[i] - m) / sum - (i == label ? 1.0 : 0.0)) / n;
        }
    }
    result.loss = total / n;
    return result;
}

std::vector<Tensor> backward(const Network& net, const ForwardCache& cache,
                             const Tensor& grad_logits) {
    if (!cache.valid || cache.layers.size() != net.specs().size()) {
        throw StateError("backward requires the cache of a matching forward call");
    }
    if (!grad_logits.same_shape(cache.logits)) {
        throw StateError("grad_logits shape does not match cached logits");
    }

    std::vector<Tensor> grads(net.parameters().size());
    // Gradients are filled per layer; map layer index -> slot in grads.
    std::vector<int> slot(net.specs().size(), -1);
    int next = 0;
    for (std::size_t i = 0; i < net.specs().size(); ++i) {
        if (net.specs()[i].has_params()) {
            slot[i] = next;
            next += 2;
        }
    }

    Tensor grad = grad_logits;
    for (std::size_t ri = net.specs().size(); ri-- > 0;) {
        const LayerSpec& spec = net.specs()[ri];
        const auto& lc = cache.layers[ri];

        switch (spec.kind) {
        case LayerSpec::Kind::Conv2d: {
            const Shape4 in_shape{lc.input.dim(0), lc.input.dim(1), lc.input.dim(2),
                                  lc.input.dim(3)};
            const int rows = in_shape.n * in_shape.h * in_shape.w;
            const int plane = in_shape.h * in_shape.w;

            // Gather (n,oc,oh,ow) gradients into (row, oc) layout.
            Tensor grad_out_mat({rows, spec.out_channels});
            {
                const double* src = grad.data();
                double* dst = grad_out_mat.data();
                for (int n = 0; n < in_shape.n; ++n) {
                    for (int oc = 0; oc < spec.out_channels; ++oc) {
                        for (int p = 0; p < plane; ++p) {
                            dst[(static_cast<std::int64_t>(n) * plane + p) * spec.out_channels +
                                oc] =
                                src[(static_cast<std::int64_t>(n) * spec.out_channels + oc) *
                                        plane +
                                    p];
                        }
                    }
                }
            }

            Tensor grad_w({spec.out_channels, spec.in_channels, 3, 3});
            Tensor grad_b({spec.out_channels});
            grad_w.as_matrix(spec.out_channels, spec.in_channels * 9).noalias() =
                grad_out_mat.as_matrix(rows, spec.out_channels).transpose() *
                lc.col.as_matrix(rows, spec.in_channels * 9);
            Eigen::Map<Eigen::RowVectorXd>(grad_b.data(), spec.out_channels) =
                grad_out_mat.as_matrix(rows, spec.out_channels).colwise().sum();

            Tensor grad_col({rows, spec.in_channels * 9});
            grad_col.as_matrix(rows, spec.in_channels * 9).noalias() =
                grad_out_mat.as_matrix(rows, spec.out_channels) *
                net.weight(ri).as_matrix(spec.out_channels, spec.in_channels * 9);

            Tensor grad_in = Tensor::zeros_like(lc.input);
            col2im_3x3(grad_col, in_shape, grad_in);

            grads[static_cast<std::size_t>(slot[ri])] = std::move(grad_w);
            grads[static_cast<std::size_t>(slot[ri]) + 1] = std::move(grad_b);
            grad = std::move(grad_in);
            break;
        }
        case LayerSpec::Kind::ReLU: {
            Tensor grad_in = Tensor::zeros_like(lc.input);
            const double* pre = lc.input.data();
            const double* g = grad.data();
            double* dst = grad_in.data();
            for (std::int64_t i = 0; i < grad_in.size(); ++i) {
                dst[i] = pre[i] > 0.0 ? g[i] : 0.0;
            }
            grad = std::move(grad_in);
            break;
        }
        case LayerSpec::Kind::MaxPool2x2: {
            Tensor grad_in = Tensor::zeros_like(lc.input);
            const double* g = grad.data();
            double* dst = grad_in.data();
            for (std::size_t i = 0; i < lc.argmax.size(); ++i) {
                dst[lc.argmax[i]] += g[static_cast<std::int64_t>(i)];
            }
            grad = std::move(grad_in);
            break;
        }
        case LayerSpec::Kind::Dropout: {
            if (lc.mask.empty()) {
                break; // layer was the identity in this pass
            }
            Tensor grad_in = Tensor::zeros_like(lc.input);
            const double* g = grad.data();
            double* dst = grad_in.data();
            for (std::int64_t i = 0; i < grad_in.size(); ++i) {
                dst[i] = g[i] * lc.mask[static_cast<std::size_t>(i)];
            }
            grad = std::move(grad_in);
            break;
        }
        case LayerSpec::Kind::Flatten: {
            Tensor grad_in = Tensor::zeros_like(lc.input);
            std::memcpy(grad_in.data(), grad.data(),
                        static_cast<std::size_t>(grad.size()) * sizeof(double));
            grad = std::move(grad_in);
            break;
        }
        case LayerSpec::Kind::Dense: {
            const int n = lc.input.dim(0);
            Tensor grad_w({spec.out_features, spec.in_features});
            Tensor grad_b({spec.out_features});
            grad_w.as_matrix(spec.out_features, spec.in_features).noalias() =
                grad.as_matrix(n, spec.out_features).transpose() *
                lc.input.as_matrix(n, spec.in_features);
            Eigen::Map<Eigen::RowVectorXd>(grad_b.data(), spec.out_features) =
                grad.as_matrix(n, spec.out_features).colwise().sum();

            Tensor grad_in({n, spec.in_features});
            grad_in.as_matrix(n, spec.in_features).noalias() =
                grad.as_matrix(n, spec.out_features) *
                net.weight(ri).as_matrix(spec.out_features, spec.in_features);

            grads[static_cast<std::size_t>(slot[ri])] = std::move(grad_w);
            grads[static_cast<std::size_t>(slot[ri]) + 1] = std::move(grad_b);
            grad = std::move(grad_in);
            break;
        }
        }
    }
    return grads;
}

SgdMomentum::SgdMomentum(double eta, double alpha) : eta_(eta), alpha_(alpha) {
    if (!(eta >= 0.0)) {
        throw DomainError("learning rate must be non-negative");
    }
    if (!(alpha >= 0.0) || !(alpha < 1.0)) {
        throw DomainError("momentum weight must lie in [0,1)");
    }
}

void SgdMomentum::step(const std::vector<Tensor*>& params,
                       const std::vector<Tensor>& grads) {
    if (params.size() != grads.size()) {
        throw ShapeError("parameter/gradient count mismatch");
    }
    if (velocities_.empty()) {
        velocities_.reserve(params.size());
        for (const Tensor* p : params) {
            velocities_.push_back(Tensor::zeros_like(*p));
        }
    }
    if (velocities_.size() != params.size()) {
        throw ShapeError("optimizer was initialized for a different parameter set");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor& p = *params[i];
        const Tensor& g = grads[i];
        Tensor& v = velocities_[i];
        if (!p.same_shape(g) || !p.same_shape(v)) {
            throw ShapeError("parameter/gradient shape mismatch at index " +
                             std::to_string(i));
        }
        double* pd = p.data();
        const double* gd = g.data();
        double* vd = v.data();
        for (std::int64_t j = 0; j < p.size(); ++j) {
            vd[j] = -eta_ * gd[j] + alpha_ * vd[j];
            pd[j] += vd[j];
        }
    }
}

namespace {

Tensor gather_batch(const Tensor& inputs, const std::vector<int>& labels,
                    const std::vector<std::size_t>& order, std::size_t start,
                    std::size_t count, std::vector<int>& batch_labels) {
    std::vector<int> shape = inputs.shape();
    shape[0] = static_cast<int>(count);
    Tensor batch(shape);
    const std::int64_t sample_size = inputs.size() / inputs.dim(0);
    batch_labels.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t src_row = order[start + i];
        std::memcpy(batch.data() + static_cast<std::int64_t>(i) * sample_size,
                    inputs.data() + static_cast<std::int64_t>(src_row) * sample_size,
                    static_cast<std::size_t>(sample_size) * sizeof(double));
        batch_labels[i] = labels[src_row];
    }
    return batch;
}

int count_correct(const Tensor& logits, const std::vector<int>& labels) {
    const int n = logits.dim(0);
    const int k = logits.dim(1);
    int correct = 0;
    for (int row = 0; row < n; ++row) {
        if (argmax_row(logits.data() + static_cast<std::int64_t>(row) * k, k) ==
            labels[static_cast<std::size_t>(row)]) {
            ++correct;
        }
    }
    return correct;
}

} // namespace

Metrics train_epoch(Network& net, SgdMomentum& opt, const LabeledData& data,
                    int batch_size, SplitMix64& rng) {
    if (data.count() == 0) {
        throw DomainError("train_epoch requires a non-empty dataset");
    }
    if (batch_size < 1) {
        throw DomainError("batch size must be at least 1");
    }
    if (data.inputs.dim(0) != static_cast<int>(data.labels.size())) {
        throw ShapeError("input/label count mismatch");
    }

    const std::size_t n = static_cast<std::size_t>(data.count());
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) {
        order[i] = i;
    }
    rng.shuffle(order);

    const std::vector<Tensor*> params = net.parameters();
    double total_loss = 0.0;
    std::int64_t correct = 0;
    std::vector<int> batch_labels;
    for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(batch_size)) {
        const std::size_t count = std::min(static_cast<std::size_t>(batch_size), n - start);
        const Tensor batch =
            gather_batch(data.inputs, data.labels, order, start, count, batch_labels);
        ForwardCache cache = forward(net, batch, true, rng);
        const SoftmaxResult sm = softmax_cross_entropy(cache.logits, batch_labels);
        const std::vector<Tensor> grads = backward(net, cache, sm.grad_logits);
        opt.step(params, grads);
        total_loss += sm.loss * static_cast<double>(count);
        correct += count_correct(cache.logits, batch_labels);
    }
    return Metrics{total_loss / static_cast<double>(n),
                   static_cast<double>(correct) / static_cast<double>(n)};
}

Metrics evaluate(const Network& net, const LabeledData& data) {
    if (data.count() == 0) {
        throw DomainError("evaluate requires a non-empty dataset");
    }
    if (data.inputs.dim(0) != static_cast<int>(data.labels.size())) {
        throw ShapeError("input/label count mismatch");
    }

    const std::size_t n = static_cast<std::size_t>(data.count());
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) {
        order[i] = i;
    }

    SplitMix64 unused(0);
    constexpr std::size_t kEvalBatch = 256;
    double total_loss = 0.0;
    std::int64_t correct = 0;
    std::vector<int> batch_labels;
    for (std::size_t start = 0; start < n; start += kEvalBatch) {
        const std::size_t count = std::min(kEvalBatch, n - start);
        const Tensor batch =
            gather_batch(data.inputs, data.labels, order, start, count, batch_labels);
        const ForwardCache cache = forward(net, batch, false, unused);
        const SoftmaxResult sm = softmax_cross_entropy(cache.logits, batch_labels);
        total_loss += sm.loss * static_cast<double>(count);
        correct += count_correct(cache.logits, batch_labels);
    }
    return Metrics{total_loss / static_cast<double>(n),
                   static_cast<double>(correct) / static_cast<double>(n)};
}

std::vector<std::uint8_t> checkpoint_bytes(const Network& net) {
    std::uint16_t param_layers = 0;
    for (const LayerSpec& spec : net.specs()) {
        if (spec.has_params()) {
            ++param_layers;
        }
    }

    std::vector<std::uint8_t> out;
    out.insert(out.end(), kCheckpointMagic, kCheckpointMagic + 4);
    append_u16(out, kCheckpointVersion);
    append_u16(out, param_layers);
    for (const Tensor* t : net.parameters()) {
        out.push_back(static_cast<std::uint8_t>(t->rank()));
        for (int d = 0; d < t->rank(); ++d) {
            append_u32(out, static_cast<std::uint32_t>(t->dim(d)));
        }
        for (std::int64_t i = 0; i < t->size(); ++i) {
            append_f64(out, (*t)[i]);
        }
    }
    return out;
}

void restore_checkpoint(Network& net, const std::vector<std::uint8_t>& bytes) {
    ByteReader reader(bytes.data(), bytes.size());
    char magic[4];
    for (char& ch : magic) {
        ch = static_cast<char>(reader.u8());
    }
    if (std::memcmp(magic, kCheckpointMagic, 4) != 0) {
        throw FormatError("bad checkpoint magic");
    }
    const std::uint16_t version = reader.u16();
    if (version != kCheckpointVersion) {
        throw FormatError("unsupported checkpoint version " + std::to_string(version));
    }

    std::uint16_t param_layers = 0;
    for (const LayerSpec& spec : net.specs()) {
        if (spec.has_params()) {
            ++param_layers;
        }
    }
    const std::uint16_t stored_layers = reader.u16();
    if (stored_layers != param_layers) {
        throw FormatError("checkpoint holds " + std::to_string(stored_layers) +
                          " parameterized layers, network has " +
                          std::to_string(param_layers));
    }

    std::vector<Tensor*> params = net.parameters();
    std::vector<Tensor> staged;
    staged.reserve(params.size());
    for (const Tensor* expected : params) {
        const int rank = reader.u8();
        std::vector<int> shape(static_cast<std::size_t>(rank));
        for (int d = 0; d < rank; ++d) {
            const std::uint32_t extent = reader.u32();
            if (extent == 0 || extent > 0x7FFFFFFFu) {
                throw FormatError("invalid tensor extent in checkpoint");
            }
            shape[static_cast<std::size_t>(d)] = static_cast<int>(extent);
        }
        if (shape != expected->shape()) {
            throw FormatError("checkpoint tensor shape " + Tensor::shape_string(shape) +
                              " does not match network shape " +
                              Tensor::shape_string(expected->shape()));
        }
        Tensor t(shape);
        for (std::int64_t i = 0; i < t.size(); ++i) {
            t[i] = reader.f64();
        }
        staged.push_back(std::move(t));
    }
    if (!reader.exhausted()) {
        throw FormatError("trailing bytes after checkpoint payload");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        *params[i] = std::move(staged[i]);
    }
}

void save_checkpoint(const Network& net, const std::string& path) {
    const std::vector<std::uint8_t> bytes = checkpoint_bytes(net);
    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    if (!file) {
        throw IoError("cannot open " + path + " for writing");
    }
    file.write(reinterpret_cast<const char*>(bytes.data()),
               static_cast<std::streamsize>(bytes.size()));
    if (!file) {
        throw IoError("failed writing checkpoint to " + path);
    }
}

void load_checkpoint(Network& net, const std::string& path) {
    std::ifstream file(path, std::ios::binary);
    if (!file) {
        throw IoError("cannot open " + path);
    }
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(file)),
                                    std::istreambuf_iterator<char>());
    restore_checkpoint(net, bytes);
}

} // namespace bdd::nn
