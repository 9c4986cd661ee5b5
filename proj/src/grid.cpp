#include "bdd/grid.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <fstream>
#include <mutex>
#include <thread>

#include "bdd/nn.hpp"
#include "bdd/rng.hpp"

namespace bdd::grid {

namespace {

// Auxiliary seed lanes; index pairs no real grid can occupy.
constexpr std::uint64_t kAuxLane = 0xFFFFFFFFull;

std::string fmt9(double v) {
    char buf[40];
    const auto result =
        std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 9);
    return std::string(buf, result.ptr);
}

double parse_double(const std::string& text) {
    double value = 0.0;
    const char* begin = text.data();
    const char* end = begin + text.size();
    const auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc() || ptr != end) {
        throw FormatError("malformed number: '" + text + "'");
    }
    return value;
}

long long parse_int(const std::string& text) {
    long long value = 0;
    const char* begin = text.data();
    const char* end = begin + text.size();
    const auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc() || ptr != end) {
        throw FormatError("malformed integer: '" + text + "'");
    }
    return value;
}

std::uint64_t parse_u64(const std::string& text) {
    std::uint64_t value = 0;
    const char* begin = text.data();
    const char* end = begin + text.size();
    const auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc() || ptr != end) {
        throw FormatError("malformed unsigned integer: '" + text + "'");
    }
    return value;
}

std::vector<double> parse_list(const std::string& text) {
    std::vector<double> values;
    std::size_t start = 0;
    while (start <= text.size()) {
        const std::size_t comma = text.find(',', start);
        const std::size_t end = comma == std::string::npos ? text.size() : comma;
        values.push_back(parse_double(text.substr(start, end - start)));
        if (comma == std::string::npos) {
            break;
        }
        start = comma + 1;
    }
    return values;
}

std::string trim(const std::string& s) {
    std::size_t begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) {
        return "";
    }
    std::size_t end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split_lines(const std::string& text) {
    std::vector<std::string> lines;
    std::size_t start = 0;
    while (start <= text.size()) {
        const std::size_t nl = text.find('\n', start);
        const std::size_t end = nl == std::string::npos ? text.size() : nl;
        lines.push_back(text.substr(start, end - start));
        if (nl == std::string::npos) {
            break;
        }
        start = nl + 1;
    }
    return lines;
}

bool is_derived_pair(double eta, double alpha) {
    return std::abs(eta - 0.016) < 1e-12 && std::abs(alpha - 0.874) < 1e-12;
}

std::size_t write_text(const std::string& text, const std::string& path) {
    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    if (!file) {
        throw IoError("cannot open " + path + " for writing");
    }
    file.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!file) {
        throw IoError("failed writing " + path);
    }
    return text.size();
}

} // namespace

GridSpec default_grid() {
    return GridSpec{
        {0.0001, 0.001, 0.01, 0.016, 0.1, 0.2},
        {0.0, 0.2, 0.4, 0.6, 0.8, 0.825, 0.85, 0.874, 0.9, 0.925},
    };
}

void validate(const RunConfig& config) {
    if (!(config.train_fraction > 0.0) || config.train_fraction > 1.0) {
        throw DomainError("train_fraction must lie in (0,1]");
    }
    if (config.epochs < 1 || config.folds < 2 || config.batch_size < 1 ||
        config.threads < 1 || config.blobs_per_class < 1) {
        throw DomainError("epochs/batch_size/threads/blobs_per_class must be >= 1 and folds >= 2");
    }
    if (config.dataset != "mnist" && config.dataset != "blobs") {
        throw DomainError("dataset must be 'mnist' or 'blobs'");
    }
    if (config.grid.etas.empty() || config.grid.alphas.empty()) {
        throw DomainError("grid lists must be non-empty");
    }
    for (double eta : config.grid.etas) {
        if (!(eta > 0.0)) {
            throw DomainError("every learning rate must be positive");
        }
    }
    for (double alpha : config.grid.alphas) {
        if (!(alpha >= 0.0) || !(alpha < 1.0)) {
            throw DomainError("every momentum weight must lie in [0,1)");
        }
    }
    if (config.train_eta >= 0.0 && !(config.train_eta > 0.0)) {
        throw DomainError("eta must be positive");
    }
    if (config.train_alpha >= 0.0 && !(config.train_alpha < 1.0)) {
        throw DomainError("alpha must lie in [0,1)");
    }
}

RunConfig parse_config_text(const std::string& text) {
    RunConfig config;
    config.grid = default_grid();
    for (const std::string& raw : split_lines(text)) {
        const std::string line = trim(raw);
        if (line.empty() || line[0] == '#') {
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw FormatError("config line is not key=value: '" + line + "'");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key == "data_dir") {
            config.data_dir = value;
            config.data_dir_set = true;
        } else if (key == "eta") {
            config.train_eta = parse_double(value);
        } else if (key == "alpha") {
            config.train_alpha = parse_double(value);
        } else if (key == "dataset") {
            config.dataset = value;
        } else if (key == "train_fraction") {
            config.train_fraction = parse_double(value);
        } else if (key == "epochs") {
            config.epochs = static_cast<int>(parse_int(value));
        } else if (key == "folds") {
            config.folds = static_cast<int>(parse_int(value));
        } else if (key == "batch_size") {
            config.batch_size = static_cast<int>(parse_int(value));
        } else if (key == "seed") {
            config.seed = parse_u64(value);
        } else if (key == "threads") {
            config.threads = static_cast<int>(parse_int(value));
        } else if (key == "blobs_per_class") {
            config.blobs_per_class = static_cast<int>(parse_int(value));
        } else if (key == "etas") {
            config.grid.etas = parse_list(value);
        } else if (key == "alphas") {
            config.grid.alphas = parse_list(value);
        } else {
            throw FormatError("unknown config key: '" + key + "'");
        }
    }
    return config;
}

RunConfig parse_config_file(const std::string& path) {
    std::ifstream file(path, std::ios::binary);
    if (!file) {
        throw IoError("cannot open config file " + path);
    }
    std::string text((std::istreambuf_iterator<char>(file)),
                     std::istreambuf_iterator<char>());
    return parse_config_text(text);
}

GridReport run_grid(const RunConfig& config, const data::Dataset& train,
                    const data::Dataset* test) {
    validate(config);

    const data::Dataset subset =
        config.train_fraction < 1.0
            ? data::stratified_subset(train, config.train_fraction,
                                      mix_seed(config.seed, kAuxLane, kAuxLane, 0))
            : train;
    const data::FoldPlan plan =
        data::make_folds(subset, config.folds, mix_seed(config.seed, kAuxLane, kAuxLane, 1));

    // Fold partitions are shared by every cell; normalize them once.
    std::vector<nn::LabeledData> fold_train(static_cast<std::size_t>(config.folds));
    std::vector<nn::LabeledData> fold_val(static_cast<std::size_t>(config.folds));
    for (int f = 0; f < config.folds; ++f) {
        fold_train[static_cast<std::size_t>(f)] =
            data::to_labeled(data::select_fold(subset, plan, f, false));
        fold_val[static_cast<std::size_t>(f)] =
            data::to_labeled(data::select_fold(subset, plan, f, true));
    }
    nn::LabeledData test_labeled;
    if (test != nullptr) {
        test_labeled = data::to_labeled(*test);
    }

    const std::size_t n_etas = config.grid.etas.size();
    const std::size_t n_alphas = config.grid.alphas.size();
    const std::size_t n_cells = n_etas * n_alphas;
    const std::size_t n_items = n_cells * static_cast<std::size_t>(config.folds);

    std::vector<double> val_acc(n_items, 0.0);
    std::vector<double> test_acc(n_items, 0.0);
    std::atomic<std::size_t> cursor{0};
    std::atomic<bool> failed{false};
    std::string failure;
    std::mutex failure_mutex;

    auto worker = [&]() {
        for (;;) {
            const std::size_t item = cursor.fetch_add(1);
            if (item >= n_items || failed.load()) {
                return;
            }
            const std::size_t cell = item / static_cast<std::size_t>(config.folds);
            const int fold = static_cast<int>(item % static_cast<std::size_t>(config.folds));
            const std::size_t ei = cell / n_alphas;
            const std::size_t ai = cell % n_alphas;
            try {
                SplitMix64 seeds(mix_seed(config.seed, ei, ai,
                                          static_cast<std::uint64_t>(fold)));
                nn::Network net = nn::build_appendix_cnn(seeds.next());
                nn::SgdMomentum opt(config.grid.etas[ei], config.grid.alphas[ai]);
                SplitMix64 rng(seeds.next());
                for (int epoch = 0; epoch < config.epochs; ++epoch) {
                    nn::train_epoch(net, opt, fold_train[static_cast<std::size_t>(fold)],
                                    config.batch_size, rng);
                }
                val_acc[item] =
                    nn::evaluate(net, fold_val[static_cast<std::size_t>(fold)]).accuracy;
                if (test != nullptr) {
                    test_acc[item] = nn::evaluate(net, test_labeled).accuracy;
                }
            } catch (const std::exception& e) {
                std::lock_guard<std::mutex> guard(failure_mutex);
                if (!failed.exchange(true)) {
                    failure = "grid cell eta=" + fmt9(config.grid.etas[ei]) +
                              " alpha=" + fmt9(config.grid.alphas[ai]) + " fold=" +
                              std::to_string(fold) + ": " + e.what();
                }
                return;
            }
        }
    };

    if (config.threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(config.threads));
        for (int t = 0; t < config.threads; ++t) {
            pool.emplace_back(worker);
        }
        for (std::thread& t : pool) {
            t.join();
        }
    }
    if (failed.load()) {
        throw Error(failure);
    }

    GridReport report;
    report.spec = config.grid;
    report.cells.reserve(n_cells);
    for (std::size_t ei = 0; ei < n_etas; ++ei) {
        for (std::size_t ai = 0; ai < n_alphas; ++ai) {
            const std::size_t cell = ei * n_alphas + ai;
            CellResult result;
            result.eta = config.grid.etas[ei];
            result.alpha = config.grid.alphas[ai];
            for (int f = 0; f < config.folds; ++f) {
                const std::size_t item =
                    cell * static_cast<std::size_t>(config.folds) +
                    static_cast<std::size_t>(f);
                result.fold_accuracies.push_back(val_acc[item]);
                if (test != nullptr) {
                    result.test_accuracies.push_back(test_acc[item]);
                }
            }
            double sum = 0.0;
            for (double a : result.fold_accuracies) {
                sum += a;
            }
            result.mean = sum / static_cast<double>(config.folds);
            double sq = 0.0;
            for (double a : result.fold_accuracies) {
                sq += (a - result.mean) * (a - result.mean);
            }
            result.stddev = std::sqrt(sq / static_cast<double>(config.folds));
            if (!result.test_accuracies.empty()) {
                double tsum = 0.0;
                for (double a : result.test_accuracies) {
                    tsum += a;
                }
                result.test_mean = tsum / static_cast<double>(config.folds);
            }
            report.cells.push_back(std::move(result));
        }
    }
    return rank(std::move(report));
}

GridReport run_grid(const RunConfig& config) {
    validate(config);
    if (config.dataset == "blobs") {
        const data::Dataset train =
            data::synthetic_blobs(config.blobs_per_class, 10, config.seed ^ 0x5EEDull);
        return run_grid(config, train, nullptr);
    }
    const data::Dataset train = data::load_mnist_train(config.data_dir);
    const data::Dataset test = data::load_mnist_test(config.data_dir);
    return run_grid(config, train, &test);
}

GridReport rank(GridReport report) {
    report.top10.clear();
    report.best.clear();
    if (report.cells.empty()) {
        return report;
    }

    std::vector<std::size_t> order(report.cells.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        order[i] = i;
    }
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const CellResult& ca = report.cells[a];
        const CellResult& cb = report.cells[b];
        if (ca.mean != cb.mean) {
            return ca.mean > cb.mean;
        }
        if (ca.eta != cb.eta) {
            return ca.eta < cb.eta;
        }
        return ca.alpha < cb.alpha;
    });

    const std::size_t top_n = std::min<std::size_t>(10, order.size());
    for (std::size_t i = 0; i < top_n; ++i) {
        const CellResult& cell = report.cells[order[i]];
        report.top10.emplace_back(cell.eta, cell.alpha);
    }
    const double max_mean = report.cells[order[0]].mean;
    for (std::size_t i : order) {
        if (report.cells[i].mean == max_mean) {
            report.best.emplace_back(report.cells[i].eta, report.cells[i].alpha);
        }
    }
    return report;
}

std::string csv_string(const GridReport& report) {
    if (report.cells.empty()) {
        throw FormatError("refusing to emit an empty grid report");
    }
    std::string out;
    out += "# grid search: validation-fold accuracy per cell\n";
    out += "# top-10 cutoff ties break toward lower eta, then lower alpha\n";
    out += "eta,alpha,fold,accuracy\n";
    for (const CellResult& cell : report.cells) {
        for (std::size_t f = 0; f < cell.fold_accuracies.size(); ++f) {
            out += fmt9(cell.eta);
            out += ',';
            out += fmt9(cell.alpha);
            out += ',';
            out += std::to_string(f);
            out += ',';
            out += fmt9(cell.fold_accuracies[f]);
            out += '\n';
        }
    }
    out += "eta,alpha,mean,std\n";
    for (const CellResult& cell : report.cells) {
        out += fmt9(cell.eta);
        out += ',';
        out += fmt9(cell.alpha);
        out += ',';
        out += fmt9(cell.mean);
        out += ',';
        out += fmt9(cell.stddev);
        out += '\n';
    }
    bool has_test = false;
    for (const CellResult& cell : report.cells) {
        if (!cell.test_accuracies.empty()) {
            has_test = true;
            break;
        }
    }
    if (has_test) {
        for (const CellResult& cell : report.cells) {
            out += "# test,";
            out += fmt9(cell.eta);
            out += ',';
            out += fmt9(cell.alpha);
            out += ',';
            out += fmt9(cell.test_mean);
            out += '\n';
        }
    }
    // Informational: where the derived pair landed, when it was in the grid.
    std::vector<std::size_t> order(report.cells.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        order[i] = i;
    }
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const CellResult& ca = report.cells[a];
        const CellResult& cb = report.cells[b];
        if (ca.mean != cb.mean) {
            return ca.mean > cb.mean;
        }
        if (ca.eta != cb.eta) {
            return ca.eta < cb.eta;
        }
        return ca.alpha < cb.alpha;
    });
    for (std::size_t pos = 0; pos < order.size(); ++pos) {
        const CellResult& cell = report.cells[order[pos]];
        if (is_derived_pair(cell.eta, cell.alpha)) {
            out += "# derived-pair,0.016,0.874,rank," + std::to_string(pos + 1) + "," +
                   std::to_string(order.size()) + "\n";
            break;
        }
    }
    return out;
}

std::string svg_string(const GridReport& report) {
    if (report.cells.empty()) {
        throw FormatError("refusing to render an empty grid report");
    }
    const std::vector<double>& etas = report.spec.etas;
    const std::vector<double>& alphas = report.spec.alphas;
    if (etas.empty() || alphas.empty() ||
        report.cells.size() != etas.size() * alphas.size()) {
        throw FormatError("heatmap requires a grid-complete report");
    }

    // Index cells by (eta row, alpha column); every combination must exist.
    std::vector<const CellResult*> lookup(report.cells.size(), nullptr);
    for (const CellResult& cell : report.cells) {
        std::size_t ei = etas.size();
        std::size_t ai = alphas.size();
        for (std::size_t i = 0; i < etas.size(); ++i) {
            if (etas[i] == cell.eta) {
                ei = i;
                break;
            }
        }
        for (std::size_t j = 0; j < alphas.size(); ++j) {
            if (alphas[j] == cell.alpha) {
                ai = j;
                break;
            }
        }
        if (ei == etas.size() || ai == alphas.size() ||
            lookup[ei * alphas.size() + ai] != nullptr) {
            throw FormatError("heatmap requires a grid-complete report");
        }
        lookup[ei * alphas.size() + ai] = &cell;
    }

    double min_mean = report.cells.front().mean;
    double max_mean = min_mean;
    for (const CellResult& cell : report.cells) {
        min_mean = std::min(min_mean, cell.mean);
        max_mean = std::max(max_mean, cell.mean);
    }

    auto in_list = [](const std::vector<std::pair<double, double>>& list, double eta,
                      double alpha) {
        for (const auto& [e, a] : list) {
            if (e == eta && a == alpha) {
                return true;
            }
        }
        return false;
    };

    constexpr int kCellW = 64;
    constexpr int kCellH = 40;
    constexpr int kLeft = 84;
    constexpr int kTop = 16;
    constexpr int kBottom = 48;
    constexpr int kRight = 16;
    const int width = kLeft + kCellW * static_cast<int>(alphas.size()) + kRight;
    const int height = kTop + kCellH * static_cast<int>(etas.size()) + kBottom;

    std::string out;
    out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(width) +
           "\" height=\"" + std::to_string(height) + "\">\n";
    out += "<rect width=\"" + std::to_string(width) + "\" height=\"" +
           std::to_string(height) + "\" fill=\"white\"/>\n";

    for (std::size_t ei = 0; ei < etas.size(); ++ei) {
        for (std::size_t ai = 0; ai < alphas.size(); ++ai) {
            const CellResult& cell = *lookup[ei * alphas.size() + ai];
            const double t = max_mean > min_mean
                                 ? (cell.mean - min_mean) / (max_mean - min_mean)
                                 : 0.5;
            const int gray = static_cast<int>(std::lround(255.0 * t));
            std::string stroke = "#5a5a5a";
            int stroke_width = 1;
            if (in_list(report.best, cell.eta, cell.alpha)) {
                stroke = "blue";
                stroke_width = 3;
            } else if (in_list(report.top10, cell.eta, cell.alpha)) {
                stroke = "green";
                stroke_width = 3;
            }
            const int x = kLeft + static_cast<int>(ai) * kCellW;
            const int y = kTop + static_cast<int>(ei) * kCellH;
            out += "<rect x=\"" + std::to_string(x) + "\" y=\"" + std::to_string(y) +
                   "\" width=\"" + std::to_string(kCellW) + "\" height=\"" +
                   std::to_string(kCellH) + "\" fill=\"rgb(" + std::to_string(gray) +
                   "," + std::to_string(gray) + "," + std::to_string(gray) +
                   ")\" stroke=\"" + stroke + "\" stroke-width=\"" +
                   std::to_string(stroke_width) + "\"/>\n";
        }
    }

    for (std::size_t ei = 0; ei < etas.size(); ++ei) {
        const int y = kTop + static_cast<int>(ei) * kCellH + kCellH / 2 + 4;
        out += "<text x=\"" + std::to_string(kLeft - 6) + "\" y=\"" + std::to_string(y) +
               "\" text-anchor=\"end\" font-family=\"monospace\" font-size=\"12\">" +
               fmt9(etas[ei]) + "</text>\n";
    }
    for (std::size_t ai = 0; ai < alphas.size(); ++ai) {
        const int x = kLeft + static_cast<int>(ai) * kCellW + kCellW / 2;
        const int y = kTop + static_cast<int>(etas.size()) * kCellH + 16;
        out += "<text x=\"" + std::to_string(x) + "\" y=\"" + std::to_string(y) +
               "\" text-anchor=\"middle\" font-family=\"monospace\" font-size=\"12\">" +
               fmt9(alphas[ai]) + "</text>\n";
    }
    out += "<text x=\"" + std::to_string(kLeft / 2) + "\" y=\"" +
           std::to_string(height - 14) +
           "\" font-family=\"monospace\" font-size=\"12\">eta \\ alpha</text>\n";
    out += "</svg>\n";
    return out;
}

std::size_t emit_csv(const GridReport& report, const std::string& path) {
    return write_text(csv_string(report), path);
}

std::size_t emit_heatmap(const GridReport& report, const std::string& path) {
    return write_text(svg_string(report), path);
}

std::vector<CsvSummaryRow> parse_csv_summary(const std::string& csv) {
    std::vector<CsvSummaryRow> rows;
    bool in_summary = false;
    for (const std::string& raw : split_lines(csv)) {
        const std::string line = trim(raw);
        if (line.empty() || line[0] == '#') {
            continue;
        }
        if (line == "eta,alpha,mean,std") {
            in_summary = true;
            continue;
        }
        if (line == "eta,alpha,fold,accuracy") {
            in_summary = false;
            continue;
        }
        if (!in_summary) {
            continue;
        }
        std::vector<std::string> fields;
        std::size_t start = 0;
        while (start <= line.size()) {
            const std::size_t comma = line.find(',', start);
            const std::size_t end = comma == std::string::npos ? line.size() : comma;
            fields.push_back(line.substr(start, end - start));
            if (comma == std::string::npos) {
                break;
            }
            start = comma + 1;
        }
        if (fields.size() != 4) {
            throw FormatError("summary row does not have 4 fields: '" + line + "'");
        }
        rows.push_back(CsvSummaryRow{parse_double(fields[0]), parse_double(fields[1]),
                                     parse_double(fields[2]), parse_double(fields[3])});
    }
    return rows;
}

} // namespace bdd::grid
