#include "bdd/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numbers>

#include <CLI11.hpp>

#include "bdd/bayes.hpp"
#include "bdd/data_io.hpp"
#include "bdd/goldfix.hpp"
#include "bdd/grid.hpp"
#include "bdd/nn.hpp"
#include "bdd/rng.hpp"
#include "bdd/solution_space.hpp"

namespace bdd::cli {

namespace {

std::string fmt9(double v) {
    char buf[40];
    const auto result =
        std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 9);
    return std::string(buf, result.ptr);
}

sol::LogMode resolve_mode(const std::string& mode, double base) {
    if (mode == "fixed") {
        return sol::LogMode::fixed_point();
    }
    if (mode == "explicit") {
        return sol::LogMode::explicit_base(gold::LogBase(base));
    }
    throw DomainError("mode must be 'fixed' or 'explicit', got '" + mode + "'");
}

std::string resolve_data_dir(const std::string& flag_value, const std::string& config_value) {
    if (!flag_value.empty()) {
        return flag_value;
    }
    if (!config_value.empty()) {
        return config_value;
    }
    if (const char* env = std::getenv("BD_DATA_DIR"); env != nullptr && env[0] != '\0') {
        return env;
    }
    return "data/mnist";
}

// ---------------------------------------------------------------- verify

struct VerifyContext {
    std::ostream& out;
    bool all_ok = true;

    void check(const std::string& name, bool ok, const std::string& detail = "") {
        out << (ok ? "ok   " : "FAIL ") << name;
        if (!ok && !detail.empty()) {
            out << " (" << detail << ")";
        }
        out << "\n";
        all_ok = all_ok && ok;
    }
};

int run_verify(std::ostream& out) {
    VerifyContext v{out};

    const auto roots = gold::golden_roots();
    double worst = 0.0;
    for (double p : {roots.p1, roots.p2}) {
        worst = std::max(worst, std::abs(p * p + p - 1.0));
    }
    for (double p : {roots.neg_p1, roots.neg_p2}) {
        worst = std::max(worst, std::abs(p * p - p - 1.0));
    }
    worst = std::max(worst, std::abs(gold::complement_square_residual(roots.p1)));
    worst = std::max(worst, std::abs(gold::complement_square_residual(roots.p2)));
    worst = std::max(worst, std::abs((1.0 - roots.neg_p2) - (-1.0 / roots.neg_p2)));
    worst = std::max(worst, std::abs((1.0 - roots.neg_p1) - (-1.0 / roots.neg_p1)));
    v.check("golden-ratio identities <= 1e-12", worst <= 1e-12, fmt9(worst));

    const double alpha = gold::derive_alpha();
    const double eta = gold::derive_eta(alpha);
    v.check("alpha within 5e-4 of 0.874", std::abs(alpha - 0.874) <= 5e-4, fmt9(alpha));
    v.check("eta within 2e-4 of 0.016", std::abs(eta - 0.016) <= 2e-4, fmt9(eta));

    {
        SplitMix64 rng(0x5EED5EEDull);
        double worst_fixed = 0.0;
        bool ok = true;
        for (int i = 0; i < 1000; ++i) {
            double x = 0.01 + rng.next_double() * 9.99;
            if (x == 1.0) {
                continue;
            }
            const double back = gold::log_base(x, gold::fixed_base(x));
            worst_fixed = std::max(worst_fixed, std::abs(back - x));
        }
        ok = worst_fixed <= 1e-10;
        v.check("fixed-point base identity over 1000 draws", ok, fmt9(worst_fixed));
    }

    {
        const double quarter_pi = sol::inner_solution().phi();
        v.check("inner solution = pi/4 within 1e-10",
                std::abs(quarter_pi - std::numbers::pi / 4.0) <= 1e-10, fmt9(quarter_pi));
    }

    {
        bool ok = true;
        const auto modes = {sol::LogMode::fixed_point(),
                            sol::LogMode::explicit_base(gold::LogBase(2.0))};
        for (const auto& mode : modes) {
            for (int i = 1; i < 200; ++i) {
                const sol::Angle phi((std::numbers::pi / 2.0) * i / 200.0);
                const double fwd = sol::eval_forward(phi, mode);
                const double rev = sol::eval_reverse(sol::mirror_angle(phi), mode);
                if (std::abs(fwd - rev) > 1e-12) {
                    ok = false;
                }
            }
        }
        v.check("mirror symmetry over 199 angles, both modes", ok);
    }

    {
        // Outer equation holds exactly on the diagonal pAgB = pA and
        // nowhere else on a 0.01-step grid.
        bool ok = true;
        for (int bi = 1; bi < 100 && ok; ++bi) {
            for (int gi = 1; gi < 100 && ok; ++gi) {
                const double p_b = bi / 100.0;
                const double p_agb = gi / 100.0;
                const auto s = bayes::make_state(p_b, p_agb);
                const bool zero = std::abs(bayes::outer_residual(s)) <= 1e-9;
                const bool diagonal = std::abs(p_agb - s.p_a()) <= 1e-12;
                if (zero != diagonal) {
                    ok = false;
                }
                if ((std::abs(bayes::product_identity(s) - 1.0) <= 1e-9) != zero) {
                    ok = false;
                }
            }
        }
        v.check("outer residual zero iff posterior equals prior (0.01 grid)", ok);
    }

    {
        bool ok = true;
        for (int a = 0; a < 2; ++a) {
            for (int b = 0; b < 2; ++b) {
                const auto trace = bayes::simulate_dual_exchange(a, b);
                if (trace.final_sender_image != trace.final_receiver_image ||
                    trace.rounds_used > 1) {
                    ok = false;
                }
            }
        }
        v.check("dual exchange converges in <= 1 round (all 4 cases)", ok);
    }

    out << (v.all_ok ? "verification passed\n" : "verification FAILED\n");
    return v.all_ok ? 0 : 1;
}

// ---------------------------------------------------------------- chain

void print_trace(const std::string& title, const sol::ChainTrace& trace,
                 std::ostream& out) {
    out << title << "\n";
    out << "  stage  value\n";
    for (std::size_t i = 0; i < trace.stage_values.size(); ++i) {
        out << "  " << (i + 1) << "      " << fmt9(trace.stage_values[i]) << "\n";
    }
    out << "  residuals (stage i+1 - stage i):";
    for (double r : trace.stage_residuals) {
        out << " " << fmt9(r);
    }
    out << "\n";
    out << "  assumption residuals: complement=" << fmt9(trace.assumption_residuals.complement_prior)
        << " prior-eq-posterior=" << fmt9(trace.assumption_residuals.prior_equals_posterior)
        << " golden=" << fmt9(trace.assumption_residuals.golden_condition) << "\n";
}

// ---------------------------------------------------------------- train

int run_train(const grid::RunConfig& config, std::ostream& out) {
    grid::validate(config);
    const auto derived = gold::derived_hyperparams();
    const double eta = config.train_eta >= 0.0 ? config.train_eta : derived.eta;
    const double alpha = config.train_alpha >= 0.0 ? config.train_alpha : derived.alpha;

    data::Dataset train_set;
    data::Dataset eval_set;
    if (config.dataset == "blobs") {
        train_set = data::synthetic_blobs(config.blobs_per_class, 10, config.seed ^ 0x5EEDull);
        eval_set = data::synthetic_blobs(config.blobs_per_class, 10, config.seed ^ 0xE7A1ull);
    } else {
        train_set = data::load_mnist_train(config.data_dir);
        eval_set = data::load_mnist_test(config.data_dir);
    }
    if (config.train_fraction < 1.0) {
        train_set = data::stratified_subset(train_set, config.train_fraction,
                                            mix_seed(config.seed, 0xFFFFFFFFull, 0xFFFFFFFFull, 0));
    }

    out << "training on " << train_set.labels.count << " samples, eta=" << fmt9(eta)
        << " alpha=" << fmt9(alpha) << " batch=" << config.batch_size << "\n";

    const nn::LabeledData train_labeled = data::to_labeled(train_set);
    const nn::LabeledData eval_labeled = data::to_labeled(eval_set);
    SplitMix64 seeds(config.seed);
    nn::Network net = nn::build_appendix_cnn(seeds.next());
    nn::SgdMomentum opt(eta, alpha);
    SplitMix64 rng(seeds.next());
    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        const nn::Metrics metrics =
            nn::train_epoch(net, opt, train_labeled, config.batch_size, rng);
        out << "epoch " << epoch << " train_loss=" << fmt9(metrics.loss)
            << " train_accuracy=" << fmt9(metrics.accuracy) << "\n";
    }
    const nn::Metrics test = nn::evaluate(net, eval_labeled);
    out << "eval loss=" << fmt9(test.loss) << " accuracy=" << fmt9(test.accuracy) << "\n";
    return 0;
}

// ---------------------------------------------------------------- data

int run_inspect(const std::string& path, std::string kind, std::ostream& out) {
    if (kind.empty()) {
        if (path.find("images") != std::string::npos ||
            path.find("idx3") != std::string::npos) {
            kind = "images";
        } else if (path.find("labels") != std::string::npos ||
                   path.find("idx1") != std::string::npos) {
            kind = "labels";
        }
    }
    const std::vector<std::uint8_t> bytes = data::read_file(path);
    if (kind == "images") {
        const data::ImageSet set = data::parse_idx_images(bytes);
        out << path << ": IDX images, count=" << set.count << " rows=" << set.rows
            << " cols=" << set.cols << "\n";
        return 0;
    }
    if (kind == "labels") {
        const data::LabelSet set = data::parse_idx_labels(bytes);
        int histogram[10] = {0};
        for (std::uint8_t label : set.labels) {
            ++histogram[label];
        }
        out << path << ": IDX labels, count=" << set.count << " per-class=[";
        for (int c = 0; c < 10; ++c) {
            out << (c > 0 ? "," : "") << histogram[c];
        }
        out << "]\n";
        return 0;
    }
    // Kind could not be inferred from the name; report what the magic says.
    if (bytes.size() >= 4 && bytes[0] == 0 && bytes[1] == 0 && bytes[2] == 8 &&
        bytes[3] == 3) {
        return run_inspect(path, "images", out);
    }
    if (bytes.size() >= 4 && bytes[0] == 0 && bytes[1] == 0 && bytes[2] == 8 &&
        bytes[3] == 1) {
        return run_inspect(path, "labels", out);
    }
    throw FormatError("not an IDX payload: " + path);
}

} // namespace

int cli_main(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
    CLI::App app{"double-Bayesian decision toolkit: derived SGD hyperparameters, "
                 "unit-circle solution sweeps, and a desk-scale CNN grid-search harness"};
    app.require_subcommand(1);

    std::string data_dir_flag;
    std::uint64_t seed_flag = 0;
    bool seed_given = false;
    app.add_option("--data-dir", data_dir_flag,
                   "dataset directory (falls back to BD_DATA_DIR, then data/mnist)");
    app.add_option("--seed", seed_flag, "override the run seed")
        ->each([&seed_given](const std::string&) { seed_given = true; });

    auto* cmd_derive = app.add_subcommand("derive", "print the derived (alpha, eta) pair");
    auto* cmd_verify = app.add_subcommand("verify", "run the numeric identity suites");

    auto* cmd_sweep = app.add_subcommand("sweep", "sample the unit-circle solution curve");
    int sweep_n = 100;
    std::string sweep_mode = "fixed";
    double sweep_base = std::numbers::e;
    std::string sweep_out;
    cmd_sweep->add_option("--n", sweep_n, "number of intervals (points = n+1)");
    cmd_sweep->add_option("--mode", sweep_mode, "fixed | explicit");
    cmd_sweep->add_option("--base", sweep_base, "log base for explicit mode (default e)");
    cmd_sweep->add_option("--out", sweep_out, "CSV destination (default stdout)");

    auto* cmd_chain = app.add_subcommand("chain", "evaluate both transformation chains");
    double chain_p = 0.5;
    std::string chain_mode = "fixed";
    double chain_base = std::numbers::e;
    cmd_chain->add_option("--p", chain_p, "probability input in (0,1)")->required();
    cmd_chain->add_option("--mode", chain_mode, "fixed | explicit");
    cmd_chain->add_option("--base", chain_base, "log base for explicit mode (default e)");

    auto* cmd_train = app.add_subcommand("train", "single training run");
    std::string train_config;
    cmd_train->add_option("--config", train_config, "key=value config file")->required();

    auto* cmd_grid = app.add_subcommand("grid", "cross-validated grid search");
    std::string grid_config;
    std::string grid_csv;
    std::string grid_svg;
    cmd_grid->add_option("--config", grid_config, "key=value config file")->required();
    cmd_grid->add_option("--out-csv", grid_csv, "CSV destination");
    cmd_grid->add_option("--out-svg", grid_svg, "SVG heatmap destination");

    auto* cmd_data = app.add_subcommand("data", "dataset utilities");
    cmd_data->require_subcommand(1);
    auto* cmd_inspect = cmd_data->add_subcommand("inspect", "print an IDX header summary");
    std::string inspect_file;
    std::string inspect_kind;
    cmd_inspect->add_option("file", inspect_file, "IDX file, optionally .gz")->required();
    cmd_inspect->add_option("--kind", inspect_kind, "images | labels (default: from name)");

    for (CLI::App* sub : {cmd_derive, cmd_verify, cmd_sweep, cmd_chain, cmd_train,
                          cmd_grid, cmd_data, cmd_inspect}) {
        sub->fallthrough();
    }

    std::reverse(args.begin(), args.end());
    try {
        app.parse(args);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << e.what() << "\n";
        return 2;
    }

    try {
        if (*cmd_derive) {
            const auto hp = gold::derived_hyperparams();
            out << "alpha=" << fmt9(hp.alpha) << " eta=" << fmt9(hp.eta) << "\n";
            return 0;
        }
        if (*cmd_verify) {
            return run_verify(out);
        }
        if (*cmd_sweep) {
            const auto mode = resolve_mode(sweep_mode, sweep_base);
            const std::string csv = sol::sweep_csv(sol::sweep(sweep_n, mode));
            if (sweep_out.empty()) {
                out << csv;
            } else {
                std::ofstream file(sweep_out, std::ios::binary | std::ios::trunc);
                if (!file) {
                    throw IoError("cannot open " + sweep_out + " for writing");
                }
                file << csv;
            }
            return 0;
        }
        if (*cmd_chain) {
            const auto mode = resolve_mode(chain_mode, chain_base);
            print_trace("forward chain at P(B)=" + fmt9(chain_p),
                        sol::chain_eval_forward(chain_p, mode), out);
            print_trace("reverse chain at P(A|B)=" + fmt9(chain_p),
                        sol::chain_eval_reverse(chain_p, mode), out);
            return 0;
        }
        if (*cmd_train) {
            grid::RunConfig config = grid::parse_config_file(train_config);
            config.data_dir = resolve_data_dir(data_dir_flag, config.data_dir_set ? config.data_dir : "");
            if (seed_given) {
                config.seed = seed_flag;
            }
            return run_train(config, out);
        }
        if (*cmd_grid) {
            grid::RunConfig config = grid::parse_config_file(grid_config);
            config.data_dir = resolve_data_dir(data_dir_flag, config.data_dir_set ? config.data_dir : "");
            if (seed_given) {
                config.seed = seed_flag;
            }
            const grid::GridReport report = grid::run_grid(config);
            if (!grid_csv.empty()) {
                grid::emit_csv(report, grid_csv);
            }
            if (!grid_svg.empty()) {
                grid::emit_heatmap(report, grid_svg);
            }
            out << "cells=" << report.cells.size() << " best:";
            for (const auto& [eta, alpha] : report.best) {
                out << " (eta=" << fmt9(eta) << ", alpha=" << fmt9(alpha) << ")";
            }
            out << "\n";
            return 0;
        }
        if (*cmd_inspect) {
            return run_inspect(inspect_file, inspect_kind, out);
        }
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    err << "no subcommand executed\n";
    return 2;
}

} // namespace bdd::cli
