#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "bdd/data_io.hpp"
#include "bdd/grid.hpp"

using namespace bdd;
using grid::CellResult;
using grid::GridReport;
using grid::RunConfig;

namespace {

GridReport report_from_means(const std::vector<double>& etas,
                             const std::vector<double>& alphas,
                             const std::vector<double>& means) {
    GridReport report;
    report.spec.etas = etas;
    report.spec.alphas = alphas;
    std::size_t i = 0;
    for (double eta : etas) {
        for (double alpha : alphas) {
            CellResult cell;
            cell.eta = eta;
            cell.alpha = alpha;
            cell.mean = means[i++];
            cell.fold_accuracies = {cell.mean};
            report.cells.push_back(cell);
        }
    }
    return report;
}

bool contains(const std::vector<std::pair<double, double>>& list, double eta,
              double alpha) {
    return std::any_of(list.begin(), list.end(), [&](const auto& p) {
        return p.first == eta && p.second == alpha;
    });
}

} // namespace

TEST_CASE("default grid matches the reference experiment") {
    const grid::GridSpec spec = grid::default_grid();
    CHECK(spec.etas.size() * spec.alphas.size() == 60);
    CHECK(std::is_sorted(spec.etas.begin(), spec.etas.end()));
    CHECK(std::is_sorted(spec.alphas.begin(), spec.alphas.end()));
    CHECK(std::count(spec.etas.begin(), spec.etas.end(), 0.016) == 1);
    CHECK(std::count(spec.alphas.begin(), spec.alphas.end(), 0.874) == 1);
}

TEST_CASE("config validation") {
    RunConfig config;
    config.grid = grid::default_grid();
    CHECK_NOTHROW(grid::validate(config));

    RunConfig bad = config;
    bad.train_fraction = 0.0;
    CHECK_THROWS_AS(grid::validate(bad), DomainError);
    bad = config;
    bad.folds = 1;
    CHECK_THROWS_AS(grid::validate(bad), DomainError);
    bad = config;
    bad.grid.etas = {0.1, 0.0};
    CHECK_THROWS_AS(grid::validate(bad), DomainError);
    bad = config;
    bad.grid.alphas = {0.5, 1.0};
    CHECK_THROWS_AS(grid::validate(bad), DomainError);
    bad = config;
    bad.grid.alphas.clear();
    CHECK_THROWS_AS(grid::validate(bad), DomainError);
    bad = config;
    bad.dataset = "imagenet";
    CHECK_THROWS_AS(grid::validate(bad), DomainError);
}

TEST_CASE("config parser handles the key=value format") {
    const std::string text =
        "# a comment\n"
        "\n"
        "data_dir = /tmp/somewhere\n"
        "dataset = blobs\n"
        "train_fraction = 0.5\n"
        "epochs = 3\n"
        "folds = 4\n"
        "batch_size = 32\n"
        "seed = 987\n"
        "threads = 2\n"
        "blobs_per_class = 17\n"
        "eta = 0.02\n"
        "alpha = 0.8\n"
        "etas = 0.001,0.016,0.1\n"
        "alphas = 0.6,0.874,0.925\n";
    const RunConfig config = grid::parse_config_text(text);
    CHECK(config.data_dir == "/tmp/somewhere");
    CHECK(config.data_dir_set);
    CHECK(config.dataset == "blobs");
    CHECK(config.train_fraction == 0.5);
    CHECK(config.epochs == 3);
    CHECK(config.folds == 4);
    CHECK(config.batch_size == 32);
    CHECK(config.seed == 987);
    CHECK(config.threads == 2);
    CHECK(config.blobs_per_class == 17);
    CHECK(config.train_eta == 0.02);
    CHECK(config.train_alpha == 0.8);
    CHECK(config.grid.etas == std::vector<double>{0.001, 0.016, 0.1});
    CHECK(config.grid.alphas == std::vector<double>{0.6, 0.874, 0.925});

    CHECK_THROWS_AS(grid::parse_config_text("unknown_key = 1\n"), FormatError);
    CHECK_THROWS_AS(grid::parse_config_text("no equals sign\n"), FormatError);
    CHECK_THROWS_AS(grid::parse_config_text("epochs = banana\n"), FormatError);
    CHECK(grid::parse_config_text("").grid.etas == grid::default_grid().etas);
}

TEST_CASE("rank orders by mean with the documented tie-breaks") {
    SUBCASE("distinct means give a singleton best") {
        auto report = grid::rank(report_from_means({0.1, 0.2}, {0.5, 0.6},
                                                   {0.90, 0.80, 0.95, 0.70}));
        REQUIRE(report.best.size() == 1);
        CHECK(report.best[0] == std::pair{0.2, 0.5});
        REQUIRE(report.top10.size() == 4);
        CHECK(report.top10[0] == std::pair{0.2, 0.5});
        CHECK(report.top10[1] == std::pair{0.1, 0.5});
        CHECK(report.top10[2] == std::pair{0.1, 0.6});
        CHECK(report.top10[3] == std::pair{0.2, 0.6});
    }

    SUBCASE("shared maximum puts every argmax cell into best") {
        auto report = grid::rank(report_from_means({0.1, 0.2}, {0.5, 0.6},
                                                   {0.95, 0.80, 0.95, 0.70}));
        REQUIRE(report.best.size() == 2);
        CHECK(contains(report.best, 0.1, 0.5));
        CHECK(contains(report.best, 0.2, 0.5));
    }

    SUBCASE("total tie floods best and fills top10 by the tie-break order") {
        std::vector<double> means(12, 0.5);
        auto report = grid::rank(report_from_means(
            {0.1, 0.2, 0.3}, {0.4, 0.5, 0.6, 0.7}, means));
        CHECK(report.best.size() == 12);
        CHECK(report.top10.size() == 10);
        // Lowest eta, then lowest alpha, leads the list.
        CHECK(report.top10[0] == std::pair{0.1, 0.4});
        CHECK(report.top10[1] == std::pair{0.1, 0.5});
    }

    SUBCASE("cutoff ties break toward lower eta then lower alpha") {
        // 11 cells at 0.8; only 10 fit. The excluded one must be the
        // largest (eta, alpha) pair.
        std::vector<double> means(12, 0.8);
        means[0] = 0.9; // (0.1, 0.4) wins outright
        auto report = grid::rank(report_from_means(
            {0.1, 0.2, 0.3}, {0.4, 0.5, 0.6, 0.7}, means));
        CHECK(report.top10.size() == 10);
        CHECK_FALSE(contains(report.top10, 0.3, 0.6));
        CHECK_FALSE(contains(report.top10, 0.3, 0.7));
        CHECK(contains(report.top10, 0.3, 0.5));
    }

    SUBCASE("best equals the linear-scan argmax set") {
        SplitMix64 rng(77);
        std::vector<double> means(60);
        for (auto& m : means) {
            m = 0.5 + 0.5 * rng.next_double();
        }
        means[17] = 0.999;
        means[31] = 0.999;
        auto base = report_from_means(grid::default_grid().etas,
                                      grid::default_grid().alphas, means);
        auto report = grid::rank(base);
        double max_mean = 0.0;
        for (const auto& cell : base.cells) {
            max_mean = std::max(max_mean, cell.mean);
        }
        std::vector<std::pair<double, double>> expected;
        for (const auto& cell : base.cells) {
            if (cell.mean == max_mean) {
                expected.emplace_back(cell.eta, cell.alpha);
            }
        }
        REQUIRE(report.best.size() == expected.size());
        for (const auto& [eta, alpha] : expected) {
            CHECK(contains(report.best, eta, alpha));
        }
    }
}

TEST_CASE("csv emission and re-parsing") {
    SUBCASE("single cell, single fold") {
        auto report = grid::rank(report_from_means({0.016}, {0.874}, {0.91234567891}));
        const std::string csv = grid::csv_string(report);
        int detail_rows = 0;
        int summary_rows = 0;
        bool in_summary = false;
        std::size_t pos = 0;
        while (pos < csv.size()) {
            const std::size_t nl = csv.find('\n', pos);
            const std::string line = csv.substr(pos, nl - pos);
            pos = nl + 1;
            if (line == "eta,alpha,mean,std") {
                in_summary = true;
                continue;
            }
            if (line == "eta,alpha,fold,accuracy" || line.empty() || line[0] == '#') {
                continue;
            }
            (in_summary ? summary_rows : detail_rows) += 1;
        }
        CHECK(detail_rows == 1);
        CHECK(summary_rows == 1);
        CHECK(csv.find("# derived-pair,0.016,0.874,rank,1,1") != std::string::npos);

        const auto rows = grid::parse_csv_summary(csv);
        REQUIRE(rows.size() == 1);
        CHECK(rows[0].eta == 0.016);
        CHECK(rows[0].alpha == 0.874);
        CHECK(std::abs(rows[0].mean - 0.91234567891) <= 1e-9);
    }

    SUBCASE("9 significant digits survive the round trip") {
        std::vector<double> means(4);
        means[0] = 0.123456789123;
        means[1] = 0.987654321987;
        means[2] = 1.0 / 3.0;
        means[3] = 0.5;
        auto report = grid::rank(report_from_means({0.1, 0.2}, {0.3, 0.4}, means));
        const auto rows = grid::parse_csv_summary(grid::csv_string(report));
        REQUIRE(rows.size() == 4);
        for (std::size_t i = 0; i < 4; ++i) {
            REQUIRE(std::abs(rows[i].mean - means[i]) <= 1e-9);
        }
    }

    SUBCASE("empty report refuses to emit") {
        GridReport empty;
        CHECK_THROWS_AS(grid::csv_string(empty), FormatError);
        CHECK_THROWS_AS(grid::svg_string(empty), FormatError);
    }
}

TEST_CASE("svg heatmap layout") {
    const auto spec = grid::default_grid();
    std::vector<double> means(60);
    for (std::size_t i = 0; i < 60; ++i) {
        means[i] = 0.5 + static_cast<double>(i) / 200.0;
    }
    auto report = grid::rank(report_from_means(spec.etas, spec.alphas, means));
    const std::string svg = grid::svg_string(report);

    auto count = [&](const std::string& needle) {
        int n = 0;
        std::size_t pos = 0;
        while ((pos = svg.find(needle, pos)) != std::string::npos) {
            ++n;
            pos += needle.size();
        }
        return n;
    };
    CHECK(count("stroke-width") == 60); // one bordered rect per cell
    CHECK(count("stroke=\"green\"") == 9);
    CHECK(count("stroke=\"blue\"") == 1);

    SUBCASE("uniform means fill every cell identically") {
        auto flat = grid::rank(report_from_means(spec.etas, spec.alphas,
                                                 std::vector<double>(60, 0.75)));
        const std::string flat_svg = grid::svg_string(flat);
        std::size_t first = flat_svg.find("fill=\"rgb(");
        const std::string fill = flat_svg.substr(first, flat_svg.find(')', first) - first);
        std::size_t pos = 0;
        int same = 0;
        while ((pos = flat_svg.find(fill, pos)) != std::string::npos) {
            ++same;
            pos += fill.size();
        }
        CHECK(same == 60);
    }

    SUBCASE("missing cells are rejected") {
        auto incomplete = report;
        incomplete.cells.pop_back();
        CHECK_THROWS_AS(grid::svg_string(incomplete), FormatError);
    }
}

TEST_CASE("run_grid on synthetic blobs: shape and determinism") {
    RunConfig config;
    config.dataset = "blobs";
    config.blobs_per_class = 20;
    config.train_fraction = 1.0;
    config.epochs = 1;
    config.folds = 2;
    config.batch_size = 32;
    config.seed = 4242;
    config.threads = 1;
    config.grid.etas = {0.016, 0.1};
    config.grid.alphas = {0.0, 0.874};

    const data::Dataset blobs = data::synthetic_blobs(20, 10, 99);
    const GridReport report = grid::run_grid(config, blobs, nullptr);
    REQUIRE(report.cells.size() == 4);
    for (const auto& cell : report.cells) {
        REQUIRE(cell.fold_accuracies.size() == 2);
        double mean = (cell.fold_accuracies[0] + cell.fold_accuracies[1]) / 2.0;
        REQUIRE(std::abs(cell.mean - mean) <= 1e-12);
        double sq = 0.0;
        for (double a : cell.fold_accuracies) {
            sq += (a - cell.mean) * (a - cell.mean);
        }
        REQUIRE(std::abs(cell.stddev - std::sqrt(sq / 2.0)) <= 1e-12);
    }
    // Cells come out eta-major.
    CHECK(report.cells[0].eta == 0.016);
    CHECK(report.cells[0].alpha == 0.0);
    CHECK(report.cells[1].alpha == 0.874);
    CHECK(report.cells[2].eta == 0.1);

    SUBCASE("same config twice gives byte-identical CSV, any thread count") {
        const std::string csv1 = grid::csv_string(report);
        RunConfig threaded = config;
        threaded.threads = 3;
        const GridReport rerun = grid::run_grid(threaded, blobs, nullptr);
        CHECK(grid::csv_string(rerun) == csv1);
        CHECK(grid::svg_string(rerun) == grid::svg_string(report));
    }
}

TEST_CASE("run_grid resolves datasets from the config") {
    RunConfig config;
    config.dataset = "blobs";
    config.blobs_per_class = 12;
    config.epochs = 1;
    config.folds = 2;
    config.batch_size = 16;
    config.seed = 7;
    config.grid.etas = {0.016};
    config.grid.alphas = {0.874};
    const GridReport report = grid::run_grid(config);
    CHECK(report.cells.size() == 1);

    RunConfig missing = config;
    missing.dataset = "mnist";
    missing.data_dir = "/nonexistent";
    CHECK_THROWS_AS(grid::run_grid(missing), DataError);
}

TEST_CASE("file emitters report byte counts") {
    auto report = grid::rank(report_from_means({0.1}, {0.5}, {0.8}));
    const std::string csv_path = "/tmp/bdd_grid_test.csv";
    const std::string svg_path = "/tmp/bdd_grid_test.svg";
    const std::size_t csv_bytes = grid::emit_csv(report, csv_path);
    const std::size_t svg_bytes = grid::emit_heatmap(report, svg_path);
    std::ifstream csv_file(csv_path, std::ios::binary | std::ios::ate);
    std::ifstream svg_file(svg_path, std::ios::binary | std::ios::ate);
    CHECK(static_cast<std::size_t>(csv_file.tellg()) == csv_bytes);
    CHECK(static_cast<std::size_t>(svg_file.tellg()) == svg_bytes);
    std::remove(csv_path.c_str());
    std::remove(svg_path.c_str());
    CHECK_THROWS_AS(grid::emit_csv(report, "/nonexistent/x.csv"), IoError);
}
