#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bdd/nn.hpp"

namespace bdd::data {

/// 28x28 grayscale images, row-major u8 pixels.
struct ImageSet {
    int count = 0;
    int rows = 28;
    int cols = 28;
    std::vector<std::uint8_t> pixels;
};

/// Class ids 0-9, paired with an ImageSet of the same count.
struct LabelSet {
    int count = 0;
    std::vector<std::uint8_t> labels;
};

struct Dataset {
    ImageSet images;
    LabelSet labels;
};

struct DatasetBundle {
    Dataset train;
    Dataset val;
    Dataset test;
};

/// Stratified fold assignment: fold id per sample index.
struct FoldPlan {
    int k = 0;
    std::vector<int> assignments;
};

/// Parses an IDX image payload (magic 0x00000803, big-endian header).
/// Throws FormatError on bad magic/truncation/trailing bytes and
/// DimensionError when rows/cols differ from 28.
ImageSet parse_idx_images(const std::vector<std::uint8_t>& bytes);

/// Parses an IDX label payload (magic 0x00000801). Throws FormatError on
/// container damage and DomainError on a label byte >= 10.
LabelSet parse_idx_labels(const std::vector<std::uint8_t>& bytes);

std::vector<std::uint8_t> write_idx_images(const ImageSet& images);
std::vector<std::uint8_t> write_idx_labels(const LabelSet& labels);

/// Reads a file, transparently gunzipping when the name ends in ".gz".
std::vector<std::uint8_t> read_file(const std::string& path);

/// Maps pixels to [-1, 1] via x/127.5 - 1, shaped N x 1 x 28 x 28.
nn::Tensor normalize(const ImageSet& images);

/// Pairs normalized images with integer labels.
nn::LabeledData to_labeled(const Dataset& data);

/// Draws a stratified subset holding round(fraction * total) samples;
/// per-class counts follow largest-remainder rounding, so every class
/// stays within one sample of its exact share. Selection and output
/// order are seeded shuffles. Throws DomainError for fraction outside
/// (0, 1].
Dataset stratified_subset(const Dataset& data, double fraction, std::uint64_t seed);

/// Stratified 90/10 train/val split; the test set passes through
/// unchanged. Throws SizeError when images and labels disagree in count.
DatasetBundle split_bundle(const Dataset& train, const Dataset& test, std::uint64_t seed);

/// Stratified k-fold assignment. Throws DomainError when k < 2 or some
/// class has fewer than k samples.
FoldPlan make_folds(const Dataset& data, int k, std::uint64_t seed);

/// Selects the samples of one fold (in_fold = true) or its complement.
Dataset select_fold(const Dataset& data, const FoldPlan& plan, int fold, bool in_fold);

/// Deterministic synthetic digits: one Gaussian intensity blob per class
/// at a class-specific center, plus seeded pixel noise. Labels cycle
/// 0..n_classes-1.
Dataset synthetic_blobs(int n_per_class, int n_classes, std::uint64_t seed);

/// Loads train-images/train-labels (resp. t10k-*) from a directory,
/// accepting .gz variants. Throws DataError when files are missing and
/// SizeError when the pair disagrees in count.
Dataset load_mnist_train(const std::string& dir);
Dataset load_mnist_test(const std::string& dir);

} // namespace bdd::data
