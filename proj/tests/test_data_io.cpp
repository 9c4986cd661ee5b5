#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numeric>

#include "bdd/data_io.hpp"
#include "bdd/rng.hpp"

using namespace bdd;
using data::Dataset;

namespace {

std::string data_dir() {
    const char* env = std::getenv("BD_DATA_DIR");
    return env != nullptr && env[0] != '\0' ? env : "data/mnist";
}

data::ImageSet random_images(int count, std::uint64_t seed) {
    data::ImageSet set;
    set.count = count;
    set.pixels.resize(static_cast<std::size_t>(count) * 784);
    SplitMix64 rng(seed);
    for (auto& px : set.pixels) {
        px = static_cast<std::uint8_t>(rng.next_below(256));
    }
    return set;
}

data::LabelSet random_labels(int count, std::uint64_t seed) {
    data::LabelSet set;
    set.count = count;
    set.labels.resize(static_cast<std::size_t>(count));
    SplitMix64 rng(seed);
    for (auto& label : set.labels) {
        label = static_cast<std::uint8_t>(rng.next_below(10));
    }
    return set;
}

// Toy dataset whose images carry their original index in the first two
// pixel bytes, so permutations are easy to verify.
Dataset indexed_dataset(const std::vector<int>& class_counts) {
    Dataset out;
    int index = 0;
    for (std::size_t cls = 0; cls < class_counts.size(); ++cls) {
        for (int i = 0; i < class_counts[cls]; ++i) {
            out.labels.labels.push_back(static_cast<std::uint8_t>(cls));
            std::vector<std::uint8_t> pixels(784, 0);
            pixels[0] = static_cast<std::uint8_t>(index & 0xFF);
            pixels[1] = static_cast<std::uint8_t>((index >> 8) & 0xFF);
            out.images.pixels.insert(out.images.pixels.end(), pixels.begin(),
                                     pixels.end());
            ++index;
        }
    }
    out.images.count = index;
    out.labels.count = index;
    return out;
}

int image_index(const Dataset& d, int row) {
    const std::size_t base = static_cast<std::size_t>(row) * 784;
    return d.images.pixels[base] | (d.images.pixels[base + 1] << 8);
}

std::vector<int> per_class_counts(const Dataset& d) {
    std::vector<int> counts(10, 0);
    for (auto label : d.labels.labels) {
        ++counts[label];
    }
    return counts;
}

} // namespace

TEST_CASE("IDX image parsing validates the container") {
    const data::ImageSet original = random_images(3, 1);
    const auto bytes = data::write_idx_images(original);
    const data::ImageSet parsed = data::parse_idx_images(bytes);
    CHECK(parsed.count == 3);
    CHECK(parsed.pixels == original.pixels);

    SUBCASE("label magic in the image slot") {
        const auto label_bytes = data::write_idx_labels(random_labels(3, 2));
        CHECK_THROWS_AS(data::parse_idx_images(label_bytes), FormatError);
    }

    SUBCASE("truncated and trailing payloads") {
        auto cut = bytes;
        cut.pop_back();
        CHECK_THROWS_AS(data::parse_idx_images(cut), FormatError);
        auto extra = bytes;
        extra.push_back(0);
        CHECK_THROWS_AS(data::parse_idx_images(extra), FormatError);
        CHECK_THROWS_AS(data::parse_idx_images({0, 0, 8}), FormatError);
    }

    SUBCASE("non-28x28 dimensions are rejected") {
        std::vector<std::uint8_t> bad = {0, 0, 8, 3, 0, 0, 0, 1, 0, 0, 0, 16,
                                         0, 0, 0, 16};
        bad.resize(16 + 256, 0);
        CHECK_THROWS_AS(data::parse_idx_images(bad), DimensionError);
    }
}

TEST_CASE("IDX label parsing validates the container and the alphabet") {
    const data::LabelSet original = random_labels(5, 3);
    const auto bytes = data::write_idx_labels(original);
    const data::LabelSet parsed = data::parse_idx_labels(bytes);
    CHECK(parsed.count == 5);
    CHECK(parsed.labels == original.labels);

    SUBCASE("empty set with count 0 is valid") {
        data::LabelSet empty;
        empty.count = 0;
        const auto parsed_empty = data::parse_idx_labels(data::write_idx_labels(empty));
        CHECK(parsed_empty.count == 0);
        CHECK(parsed_empty.labels.empty());
    }

    SUBCASE("label byte 10 is rejected") {
        auto bad = bytes;
        bad[8] = 10;
        CHECK_THROWS_AS(data::parse_idx_labels(bad), DomainError);
    }

    SUBCASE("image magic in the label slot") {
        const auto image_bytes = data::write_idx_images(random_images(1, 4));
        CHECK_THROWS_AS(data::parse_idx_labels(image_bytes), FormatError);
    }
}

TEST_CASE("write-parse identity on random payload sizes") {
    SplitMix64 rng(0xD10);
    for (int round = 0; round < 20; ++round) {
        const int count = static_cast<int>(rng.next_below(1000));
        const data::ImageSet images = random_images(count, rng.next());
        REQUIRE(data::parse_idx_images(data::write_idx_images(images)).pixels ==
                images.pixels);
        const data::LabelSet labels = random_labels(count, rng.next());
        REQUIRE(data::parse_idx_labels(data::write_idx_labels(labels)).labels ==
                labels.labels);
    }
}

TEST_CASE("gzip files are read transparently") {
    const Dataset train = data::load_mnist_train(data_dir());
    CHECK(train.images.count == train.labels.count);
    CHECK(train.images.count >= 1000);
    for (int c : per_class_counts(train)) {
        CHECK(c > 0);
    }

    SUBCASE("corrupt gzip raises FormatError") {
        const std::string path = "/tmp/bdd_corrupt_test.gz";
        std::ofstream file(path, std::ios::binary);
        file << "this is not a gzip stream";
        file.close();
        CHECK_THROWS_AS(data::read_file(path), FormatError);
        std::remove(path.c_str());
    }

    SUBCASE("missing files raise IoError / DataError") {
        CHECK_THROWS_AS(data::read_file("/nonexistent/file.bin"), IoError);
        CHECK_THROWS_AS(data::load_mnist_train("/nonexistent"), DataError);
    }
}

TEST_CASE("normalize maps bytes affinely onto [-1, 1]") {
    data::ImageSet set;
    set.count = 1;
    set.pixels.resize(784, 0);
    set.pixels[0] = 0;
    set.pixels[1] = 255;
    set.pixels[2] = 128;
    const nn::Tensor t = data::normalize(set);
    CHECK(t.shape() == std::vector<int>{1, 1, 28, 28});
    CHECK(t[0] == -1.0);
    CHECK(t[1] == 1.0);
    CHECK(t[2] == doctest::Approx(0.0039215686274509665).epsilon(1e-15));

    // Affine and invertible: rounding the inverse recovers every byte.
    for (int v = 0; v < 256; ++v) {
        const double x = v / 127.5 - 1.0;
        CHECK(static_cast<int>(std::lround((x + 1.0) * 127.5)) == v);
    }

    data::ImageSet empty;
    empty.count = 0;
    CHECK_THROWS_AS(data::normalize(empty), DomainError);
}

TEST_CASE("stratified subset: balanced case is exact") {
    const Dataset toy = indexed_dataset(std::vector<int>(10, 100));
    const Dataset half = data::stratified_subset(toy, 0.5, 7);
    CHECK(half.labels.count == 500);
    for (int c : per_class_counts(half)) {
        CHECK(c == 50);
    }
}

TEST_CASE("stratified subset: fraction 1 is a permutation") {
    const Dataset toy = indexed_dataset({3, 5, 2, 7, 1, 4, 6, 2, 3, 4});
    const Dataset all = data::stratified_subset(toy, 1.0, 11);
    REQUIRE(all.labels.count == toy.labels.count);
    std::vector<int> seen(static_cast<std::size_t>(toy.labels.count), 0);
    for (int i = 0; i < all.labels.count; ++i) {
        ++seen[static_cast<std::size_t>(image_index(all, i))];
    }
    for (int v : seen) {
        REQUIRE(v == 1);
    }
    // Output order is shuffled, not the identity.
    bool moved = false;
    for (int i = 0; i < all.labels.count; ++i) {
        moved = moved || image_index(all, i) != i;
    }
    CHECK(moved);
}

TEST_CASE("stratified subset preserves proportions within one sample") {
    const std::vector<int> counts = {10, 20, 30, 40, 50, 60, 70, 80, 90, 100};
    const Dataset toy = indexed_dataset(counts);
    for (int fi = 1; fi <= 9; ++fi) {
        const double fraction = fi / 10.0;
        for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
            const Dataset sub = data::stratified_subset(toy, fraction, seed);
            REQUIRE(sub.labels.count ==
                    static_cast<int>(std::llround(fraction * toy.labels.count)));
            const auto got = per_class_counts(sub);
            for (int cls = 0; cls < 10; ++cls) {
                REQUIRE(std::abs(got[cls] - fraction * counts[cls]) < 1.0);
            }
            // Labels still pair with their images.
            for (int i = 0; i < sub.labels.count; ++i) {
                const int orig = image_index(sub, i);
                REQUIRE(toy.labels.labels[static_cast<std::size_t>(orig)] ==
                        sub.labels.labels[static_cast<std::size_t>(i)]);
            }
        }
    }

    CHECK_THROWS_AS(data::stratified_subset(toy, 0.0, 1), DomainError);
    CHECK_THROWS_AS(data::stratified_subset(toy, 1.1, 1), DomainError);
}

TEST_CASE("split_bundle produces a stratified 90/10 split") {
    const Dataset toy = indexed_dataset(std::vector<int>(10, 300)); // 3000 samples
    const Dataset test = indexed_dataset(std::vector<int>(10, 10));
    const data::DatasetBundle bundle = data::split_bundle(toy, test, 5);
    CHECK(bundle.train.labels.count == 2700);
    CHECK(bundle.val.labels.count == 300);
    CHECK(bundle.test.labels.count == test.labels.count);
    for (int c : per_class_counts(bundle.val)) {
        CHECK(c == 30);
    }
    // Disjoint and exhaustive.
    std::vector<int> seen(3000, 0);
    for (int i = 0; i < bundle.train.labels.count; ++i) {
        ++seen[static_cast<std::size_t>(image_index(bundle.train, i))];
    }
    for (int i = 0; i < bundle.val.labels.count; ++i) {
        ++seen[static_cast<std::size_t>(image_index(bundle.val, i))];
    }
    for (int v : seen) {
        REQUIRE(v == 1);
    }

    Dataset broken = toy;
    broken.labels.labels.pop_back();
    broken.labels.count -= 1;
    CHECK_THROWS_AS(data::split_bundle(broken, test, 5), SizeError);
}

TEST_CASE("split_bundle keeps the 90/10 ratio on the bundled sample") {
    const Dataset train = data::load_mnist_train(data_dir());
    const Dataset test = data::load_mnist_test(data_dir());
    const data::DatasetBundle bundle = data::split_bundle(train, test, 1);
    CHECK(bundle.train.labels.count == 7200);
    CHECK(bundle.val.labels.count == 800);
    CHECK(bundle.test.labels.count == 2000);
}

TEST_CASE("make_folds assigns stratified, balanced folds") {
    SUBCASE("divisible case: one of each class per fold") {
        const Dataset toy = indexed_dataset(std::vector<int>(10, 10));
        const data::FoldPlan plan = data::make_folds(toy, 10, 3);
        REQUIRE(plan.assignments.size() == 100);
        int counts[10][10] = {};
        for (int i = 0; i < 100; ++i) {
            const int fold = plan.assignments[static_cast<std::size_t>(i)];
            REQUIRE(fold >= 0);
            REQUIRE(fold < 10);
            ++counts[fold][toy.labels.labels[static_cast<std::size_t>(i)]];
        }
        for (auto& row : counts) {
            for (int c : row) {
                REQUIRE(c == 1);
            }
        }
    }

    SUBCASE("remainder case splits 3 as 2 and 1") {
        const Dataset toy = indexed_dataset({3});
        const data::FoldPlan plan = data::make_folds(toy, 2, 4);
        int sizes[2] = {0, 0};
        for (int f : plan.assignments) {
            ++sizes[f];
        }
        CHECK(std::max(sizes[0], sizes[1]) == 2);
        CHECK(std::min(sizes[0], sizes[1]) == 1);
    }

    SUBCASE("per-class fold sizes differ by at most one") {
        const Dataset toy = indexed_dataset({13, 27, 31, 8, 19, 22, 11, 9, 14, 25});
        const data::FoldPlan plan = data::make_folds(toy, 4, 6);
        int counts[4][10] = {};
        for (std::size_t i = 0; i < plan.assignments.size(); ++i) {
            ++counts[plan.assignments[i]][toy.labels.labels[i]];
        }
        for (int cls = 0; cls < 10; ++cls) {
            int lo = counts[0][cls];
            int hi = counts[0][cls];
            for (int f = 1; f < 4; ++f) {
                lo = std::min(lo, counts[f][cls]);
                hi = std::max(hi, counts[f][cls]);
            }
            REQUIRE(hi - lo <= 1);
        }
    }

    SUBCASE("domain errors") {
        const Dataset toy = indexed_dataset({5, 5, 5, 5, 5, 5, 5, 5, 5, 5});
        CHECK_THROWS_AS(data::make_folds(toy, 10, 1), DomainError);
        CHECK_THROWS_AS(data::make_folds(toy, 1, 1), DomainError);
    }
}

TEST_CASE("select_fold partitions the dataset") {
    const Dataset toy = indexed_dataset(std::vector<int>(10, 12));
    const data::FoldPlan plan = data::make_folds(toy, 3, 9);
    int covered = 0;
    for (int f = 0; f < 3; ++f) {
        const Dataset in = data::select_fold(toy, plan, f, true);
        const Dataset out = data::select_fold(toy, plan, f, false);
        CHECK(in.labels.count + out.labels.count == 120);
        covered += in.labels.count;
    }
    CHECK(covered == 120);
}

TEST_CASE("synthetic blobs are deterministic and class-cyclic") {
    const Dataset blobs = data::synthetic_blobs(10, 10, 7);
    REQUIRE(blobs.labels.count == 100);
    const auto counts = per_class_counts(blobs);
    for (int c : counts) {
        CHECK(c == 10);
    }
    const Dataset again = data::synthetic_blobs(10, 10, 7);
    CHECK(blobs.images.pixels == again.images.pixels);
    const Dataset other = data::synthetic_blobs(10, 10, 8);
    CHECK(blobs.images.pixels != other.images.pixels);

    CHECK_THROWS_AS(data::synthetic_blobs(0, 10, 1), DomainError);
    CHECK_THROWS_AS(data::synthetic_blobs(5, 11, 1), DomainError);
}

TEST_CASE("blobs are separable enough for one-epoch learning") {
    // Calibrated on the reference seed: the 28x28 CNN reads the class
    // centers essentially perfectly after a single epoch.
    const auto labeled = data::to_labeled(data::synthetic_blobs(100, 10, 7));
    nn::Network net = nn::build_appendix_cnn(8);
    nn::SgdMomentum opt(0.016, 0.874);
    SplitMix64 rng(9);
    nn::train_epoch(net, opt, labeled, 64, rng);
    CHECK(nn::evaluate(net, labeled).accuracy >= 0.95);
}

TEST_CASE("to_labeled pairs tensors with labels") {
    const Dataset blobs = data::synthetic_blobs(3, 10, 7);
    const nn::LabeledData labeled = data::to_labeled(blobs);
    CHECK(labeled.inputs.shape() == std::vector<int>{30, 1, 28, 28});
    CHECK(labeled.labels.size() == 30);
    Dataset broken = blobs;
    broken.labels.count -= 1;
    broken.labels.labels.pop_back();
    CHECK_THROWS_AS(data::to_labeled(broken), SizeError);
}
