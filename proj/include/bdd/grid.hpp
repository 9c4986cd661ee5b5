#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bdd/data_io.hpp"

namespace bdd::grid {

struct GridSpec {
    std::vector<double> etas;
    std::vector<double> alphas;
};

/// Cross-validated result for one (eta, alpha) cell. Validation-fold
/// accuracy is the ranking metric; test-set accuracy, when a test set
/// was supplied, is recorded alongside for reference.
struct CellResult {
    double eta = 0.0;
    double alpha = 0.0;
    std::vector<double> fold_accuracies;
    double mean = 0.0;
    double stddev = 0.0; // population
    std::vector<double> test_accuracies;
    double test_mean = 0.0;
};

struct GridReport {
    GridSpec spec;
    std::vector<CellResult> cells; // eta-major, alpha-minor order
    std::vector<std::pair<double, double>> top10;
    std::vector<std::pair<double, double>> best;
};

struct RunConfig {
    std::string data_dir = "data/mnist";
    bool data_dir_set = false; // true when the config file named it
    std::string dataset = "mnist"; // "mnist" or "blobs"
    double train_fraction = 1.0;
    int epochs = 1;
    int folds = 2;
    int batch_size = 64;
    std::uint64_t seed = 1;
    int threads = 1;
    int blobs_per_class = 100;
    // Single-run hyperparameters; negative means "use the derived pair".
    double train_eta = -1.0;
    double train_alpha = -1.0;
    GridSpec grid;
};

/// The reference 6x10 grid; both lists ascending, derived pair included.
GridSpec default_grid();

/// Throws DomainError on out-of-range fields.
void validate(const RunConfig& config);

/// Parses line-oriented key=value text. Unknown keys and malformed
/// values raise FormatError.
RunConfig parse_config_text(const std::string& text);
RunConfig parse_config_file(const std::string& path);

/// Cross-validated grid search over the supplied training data (the
/// configured train_fraction is applied as a stratified subset first).
/// Each (cell, fold) trains a freshly initialized reference CNN under a
/// seed mixed from (config.seed, eta index, alpha index, fold index).
/// Cells may be evaluated on a worker pool; results are keyed and
/// ordered deterministically, so the report does not depend on
/// config.threads.
GridReport run_grid(const RunConfig& config, const data::Dataset& train,
                    const data::Dataset* test);

/// Convenience overload resolving the dataset from the config
/// (data_dir for "mnist", synthetic blobs otherwise). Throws DataError
/// when dataset files are missing.
GridReport run_grid(const RunConfig& config);

/// Fills top10 (ten highest means; cutoff ties break toward lower eta,
/// then lower alpha) and best (every cell attaining the maximum mean).
GridReport rank(GridReport report);

/// CSV: detail header eta,alpha,fold,accuracy with one row per
/// (cell, fold), then summary header eta,alpha,mean,std with one row per
/// cell; reals carry 9 significant digits. Reference data (test-set
/// means, the derived pair's rank) rides in trailing # comments. Throws
/// FormatError on an empty report.
std::string csv_string(const GridReport& report);

/// SVG heatmap: one rectangle per grid cell, grayscale fill linear in
/// mean accuracy, green stroke on top-10 cells, blue on best. Requires a
/// grid-complete report (every eta/alpha combination present).
std::string svg_string(const GridReport& report);

/// Writers returning the byte count. Throws IoError on write failure.
std::size_t emit_csv(const GridReport& report, const std::string& path);
std::size_t emit_heatmap(const GridReport& report, const std::string& path);

/// Re-reads the summary section of csv_string output: (eta, alpha,
/// mean, std) per cell.
struct CsvSummaryRow {
    double eta;
    double alpha;
    double mean;
    double stddev;
};
std::vector<CsvSummaryRow> parse_csv_summary(const std::string& csv);

} // namespace bdd::grid
