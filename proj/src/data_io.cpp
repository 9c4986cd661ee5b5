#include "bdd/data_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include <zlib.h>

#include "bdd/errors.hpp"
#include "bdd/rng.hpp"

namespace bdd::data {

namespace {

constexpr std::uint32_t kImageMagic = 0x00000803u;
constexpr std::uint32_t kLabelMagic = 0x00000801u;
constexpr int kClasses = 10;
constexpr int kPixelsPerImage = 28 * 28;

std::uint32_t read_be32(const std::uint8_t* p) {
    return (static_cast<std::uint32_t>(p[0]) << 24) |
           (static_cast<std::uint32_t>(p[1]) << 16) |
           (static_cast<std::uint32_t>(p[2]) << 8) | static_cast<std::uint32_t>(p[3]);
}

void append_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>((v >> 16) & 0xFF));
    out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xFF));
    out.push_back(static_cast<std::uint8_t>(v & 0xFF));
}

void require_paired(const Dataset& data) {
    if (data.images.count != data.labels.count) {
        throw SizeError("image count " + std::to_string(data.images.count) +
                        " does not match label count " +
                        std::to_string(data.labels.count));
    }
}

std::vector<std::vector<int>> positions_by_class(const Dataset& data) {
    std::vector<std::vector<int>> by_class(kClasses);
    for (int i = 0; i < data.labels.count; ++i) {
        by_class[data.labels.labels[static_cast<std::size_t>(i)]].push_back(i);
    }
    return by_class;
}

/// Per-class take counts for a fractional share: floor quotas, with the
/// leftover samples granted by largest remainder (ties to the lower
/// class id) until the total equals round(fraction * total).
std::vector<int> largest_remainder_counts(const std::vector<std::vector<int>>& by_class,
                                          double fraction, long long target_total) {
    std::vector<int> take(by_class.size(), 0);
    std::vector<std::pair<double, int>> remainders; // (-remainder, class)
    long long base_total = 0;
    for (std::size_t c = 0; c < by_class.size(); ++c) {
        const double quota = fraction * static_cast<double>(by_class[c].size());
        const double base = std::floor(quota);
        take[c] = static_cast<int>(base);
        base_total += take[c];
        remainders.emplace_back(-(quota - base), static_cast<int>(c));
    }
    std::sort(remainders.begin(), remainders.end());
    long long extras = target_total - base_total;
    for (const auto& [neg_rem, c] : remainders) {
        if (extras <= 0) {
            break;
        }
        if (take[static_cast<std::size_t>(c)] <
            static_cast<int>(by_class[static_cast<std::size_t>(c)].size())) {
            ++take[static_cast<std::size_t>(c)];
            --extras;
        }
    }
    return take;
}

Dataset gather(const Dataset& data, const std::vector<int>& indices) {
    Dataset out;
    out.images.count = static_cast<int>(indices.size());
    out.images.rows = data.images.rows;
    out.images.cols = data.images.cols;
    out.images.pixels.resize(indices.size() * kPixelsPerImage);
    out.labels.count = out.images.count;
    out.labels.labels.resize(indices.size());
    for (std::size_t i = 0; i < indices.size(); ++i) {
        const auto src = static_cast<std::size_t>(indices[i]) * kPixelsPerImage;
        std::copy_n(data.images.pixels.begin() + static_cast<std::ptrdiff_t>(src),
                    kPixelsPerImage,
                    out.images.pixels.begin() +
                        static_cast<std::ptrdiff_t>(i * kPixelsPerImage));
        out.labels.labels[i] = data.labels.labels[static_cast<std::size_t>(indices[i])];
    }
    return out;
}

std::string locate(const std::string& dir, const std::string& base) {
    for (const std::string& candidate : {dir + "/" + base, dir + "/" + base + ".gz"}) {
        if (std::ifstream probe(candidate, std::ios::binary); probe.good()) {
            return candidate;
        }
    }
    throw DataError("dataset file " + base + "[.gz] not found in " + dir);
}

Dataset load_pair(const std::string& dir, const std::string& images_base,
                  const std::string& labels_base) {
    Dataset out;
    out.images = parse_idx_images(read_file(locate(dir, images_base)));
    out.labels = parse_idx_labels(read_file(locate(dir, labels_base)));
    require_paired(out);
    return out;
}

} // namespace

ImageSet parse_idx_images(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 16) {
        throw FormatError("IDX image payload shorter than its header");
    }
    const std::uint32_t magic = read_be32(bytes.data());
    if (magic != kImageMagic) {
        throw FormatError("bad IDX image magic");
    }
    const std::uint32_t count = read_be32(bytes.data() + 4);
    const std::uint32_t rows = read_be32(bytes.data() + 8);
    const std::uint32_t cols = read_be32(bytes.data() + 12);
    if (rows != 28 || cols != 28) {
        throw DimensionError("expected 28x28 images, got " + std::to_string(rows) + "x" +
                             std::to_string(cols));
    }
    const std::uint64_t expected =
        16ull + static_cast<std::uint64_t>(count) * rows * cols;
    if (bytes.size() != expected) {
        throw FormatError("IDX image payload size mismatch: expected " +
                          std::to_string(expected) + " bytes, got " +
                          std::to_string(bytes.size()));
    }
    ImageSet set;
    set.count = static_cast<int>(count);
    set.pixels.assign(bytes.begin() + 16, bytes.end());
    return set;
}

LabelSet parse_idx_labels(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 8) {
        throw FormatError("IDX label payload shorter than its header");
    }
    const std::uint32_t magic = read_be32(bytes.data());
    if (magic != kLabelMagic) {
        throw FormatError("bad IDX label magic");
    }
    const std::uint32_t count = read_be32(bytes.data() + 4);
    if (bytes.size() != 8ull + count) {
        throw FormatError("IDX label payload size mismatch");
    }
    for (std::size_t i = 8; i < bytes.size(); ++i) {
        if (bytes[i] >= kClasses) {
            throw DomainError("label byte " + std::to_string(bytes[i]) +
                              " outside [0,10)");
        }
    }
    LabelSet set;
    set.count = static_cast<int>(count);
    set.labels.assign(bytes.begin() + 8, bytes.end());
    return set;
}

std::vector<std::uint8_t> write_idx_images(const ImageSet& images) {
    std::vector<std::uint8_t> out;
    out.reserve(16 + images.pixels.size());
    append_be32(out, kImageMagic);
    append_be32(out, static_cast<std::uint32_t>(images.count));
    append_be32(out, static_cast<std::uint32_t>(images.rows));
    append_be32(out, static_cast<std::uint32_t>(images.cols));
    out.insert(out.end(), images.pixels.begin(), images.pixels.end());
    return out;
}

std::vector<std::uint8_t> write_idx_labels(const LabelSet& labels) {
    std::vector<std::uint8_t> out;
    out.reserve(8 + labels.labels.size());
    append_be32(out, kLabelMagic);
    append_be32(out, static_cast<std::uint32_t>(labels.count));
    out.insert(out.end(), labels.labels.begin(), labels.labels.end());
    return out;
}

namespace {

std::vector<std::uint8_t> gunzip(const std::vector<std::uint8_t>& raw,
                                 const std::string& path) {
    if (raw.size() < 2 || raw[0] != 0x1F || raw[1] != 0x8B) {
        throw FormatError("not a gzip stream: " + path);
    }
    z_stream zs{};
    if (inflateInit2(&zs, 16 + MAX_WBITS) != Z_OK) {
        throw FormatError("cannot initialize gzip decoder for " + path);
    }
    zs.next_in = const_cast<Bytef*>(raw.data());
    zs.avail_in = static_cast<uInt>(raw.size());

    std::vector<std::uint8_t> out;
    std::uint8_t chunk[1 << 16];
    int status = Z_OK;
    do {
        zs.next_out = chunk;
        zs.avail_out = sizeof(chunk);
        status = inflate(&zs, Z_NO_FLUSH);
        if (status != Z_OK && status != Z_STREAM_END) {
            inflateEnd(&zs);
            throw FormatError("corrupt gzip stream in " + path);
        }
        out.insert(out.end(), chunk, chunk + (sizeof(chunk) - zs.avail_out));
    } while (status != Z_STREAM_END);
    const bool trailing = zs.avail_in != 0;
    inflateEnd(&zs);
    if (trailing) {
        throw FormatError("trailing bytes after gzip stream in " + path);
    }
    return out;
}

} // namespace

std::vector<std::uint8_t> read_file(const std::string& path) {
    std::ifstream file(path, std::ios::binary);
    if (!file) {
        throw IoError("cannot open " + path);
    }
    std::vector<std::uint8_t> raw((std::istreambuf_iterator<char>(file)),
                                  std::istreambuf_iterator<char>());
    if (path.size() > 3 && path.compare(path.size() - 3, 3, ".gz") == 0) {
        return gunzip(raw, path);
    }
    return raw;
}

nn::Tensor normalize(const ImageSet& images) {
    if (images.count == 0) {
        throw DomainError("cannot normalize an empty image set");
    }
    nn::Tensor out({images.count, 1, images.rows, images.cols});
    double* dst = out.data();
    for (std::size_t i = 0; i < images.pixels.size(); ++i) {
        dst[i] = static_cast<double>(images.pixels[i]) / 127.5 - 1.0;
    }
    return out;
}

nn::LabeledData to_labeled(const Dataset& data) {
    require_paired(data);
    nn::LabeledData out;
    out.inputs = normalize(data.images);
    out.labels.assign(data.labels.labels.begin(), data.labels.labels.end());
    return out;
}

Dataset stratified_subset(const Dataset& data, double fraction, std::uint64_t seed) {
    if (!(fraction > 0.0) || fraction > 1.0) {
        throw DomainError("fraction must lie in (0,1], got " + std::to_string(fraction));
    }
    require_paired(data);

    auto by_class = positions_by_class(data);
    const long long target =
        std::llround(fraction * static_cast<double>(data.labels.count));
    const std::vector<int> take = largest_remainder_counts(by_class, fraction, target);

    SplitMix64 rng(seed);
    std::vector<int> chosen;
    chosen.reserve(static_cast<std::size_t>(target));
    for (std::size_t c = 0; c < by_class.size(); ++c) {
        rng.shuffle(by_class[c]);
        chosen.insert(chosen.end(), by_class[c].begin(),
                      by_class[c].begin() + take[c]);
    }
    rng.shuffle(chosen);
    return gather(data, chosen);
}

DatasetBundle split_bundle(const Dataset& train, const Dataset& test,
                           std::uint64_t seed) {
    require_paired(train);
    require_paired(test);

    auto by_class = positions_by_class(train);
    const long long val_target =
        std::llround(0.1 * static_cast<double>(train.labels.count));
    const std::vector<int> val_take = largest_remainder_counts(by_class, 0.1, val_target);

    SplitMix64 rng(seed);
    std::vector<int> val_indices;
    std::vector<int> train_indices;
    for (std::size_t c = 0; c < by_class.size(); ++c) {
        rng.shuffle(by_class[c]);
        val_indices.insert(val_indices.end(), by_class[c].begin(),
                           by_class[c].begin() + val_take[c]);
        train_indices.insert(train_indices.end(), by_class[c].begin() + val_take[c],
                             by_class[c].end());
    }
    rng.shuffle(val_indices);
    rng.shuffle(train_indices);

    DatasetBundle bundle;
    bundle.train = gather(train, train_indices);
    bundle.val = gather(train, val_indices);
    bundle.test = test;
    return bundle;
}

FoldPlan make_folds(const Dataset& data, int k, std::uint64_t seed) {
    if (k < 2) {
        throw DomainError("fold count must be at least 2");
    }
    require_paired(data);

    auto by_class = positions_by_class(data);
    for (std::size_t c = 0; c < by_class.size(); ++c) {
        if (!by_class[c].empty() && static_cast<int>(by_class[c].size()) < k) {
            throw DomainError("class " + std::to_string(c) + " has " +
                              std::to_string(by_class[c].size()) +
                              " samples, fewer than " + std::to_string(k) + " folds");
        }
    }

    FoldPlan plan;
    plan.k = k;
    plan.assignments.assign(static_cast<std::size_t>(data.labels.count), 0);
    SplitMix64 rng(seed);
    for (auto& positions : by_class) {
        rng.shuffle(positions);
        for (std::size_t i = 0; i < positions.size(); ++i) {
            plan.assignments[static_cast<std::size_t>(positions[i])] =
                static_cast<int>(i % static_cast<std::size_t>(k));
        }
    }
    return plan;
}

Dataset select_fold(const Dataset& data, const FoldPlan& plan, int fold, bool in_fold) {
    if (plan.assignments.size() != static_cast<std::size_t>(data.labels.count)) {
        throw SizeError("fold plan does not cover this dataset");
    }
    std::vector<int> indices;
    for (std::size_t i = 0; i < plan.assignments.size(); ++i) {
        if ((plan.assignments[i] == fold) == in_fold) {
            indices.push_back(static_cast<int>(i));
        }
    }
    return gather(data, indices);
}

Dataset synthetic_blobs(int n_per_class, int n_classes, std::uint64_t seed) {
    if (n_per_class < 1) {
        throw DomainError("n_per_class must be at least 1");
    }
    if (n_classes < 1 || n_classes > kClasses) {
        throw DomainError("n_classes must lie in [1,10]");
    }

    const int total = n_per_class * n_classes;
    Dataset out;
    out.images.count = total;
    out.images.pixels.resize(static_cast<std::size_t>(total) * kPixelsPerImage);
    out.labels.count = total;
    out.labels.labels.resize(static_cast<std::size_t>(total));

    SplitMix64 rng(seed);
    constexpr double kSigma = 2.0;
    constexpr double kRadius = 8.0;
    for (int s = 0; s < total; ++s) {
        const int cls = s % n_classes;
        out.labels.labels[static_cast<std::size_t>(s)] = static_cast<std::uint8_t>(cls);
        const double angle = 2.0 * std::numbers::pi * cls / n_classes;
        const double cx = 13.5 + kRadius * std::cos(angle) + (rng.next_double() - 0.5) * 2.0;
        const double cy = 13.5 + kRadius * std::sin(angle) + (rng.next_double() - 0.5) * 2.0;
        std::uint8_t* img =
            out.images.pixels.data() + static_cast<std::size_t>(s) * kPixelsPerImage;
        for (int y = 0; y < 28; ++y) {
            for (int x = 0; x < 28; ++x) {
                const double d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
                const double value = 255.0 * std::exp(-d2 / (2.0 * kSigma * kSigma)) +
                                     (rng.next_double() - 0.5) * 20.0;
                img[y * 28 + x] = static_cast<std::uint8_t>(
                    std::clamp(std::lround(value), 0L, 255L));
            }
        }
    }
    return out;
}

Dataset load_mnist_train(const std::string& dir) {
    return load_pair(dir, "train-images-idx3-ubyte", "train-labels-idx1-ubyte");
}

Dataset load_mnist_test(const std::string& dir) {
    return load_pair(dir, "t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte");
}

} // namespace bdd::data
