#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "bdd/cli.hpp"
#include "bdd/goldfix.hpp"

using bdd::cli::cli_main;

namespace {

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run invoke(std::vector<std::string> args) {
    std::ostringstream out;
    std::ostringstream err;
    const int code = cli_main(std::move(args), out, err);
    return Run{code, out.str(), err.str()};
}

std::string data_dir() {
    const char* env = std::getenv("BD_DATA_DIR");
    return env != nullptr && env[0] != '\0' ? env : "data/mnist";
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream file(path, std::ios::trunc);
    file << text;
}

} // namespace

TEST_CASE("derive prints the closed-form pair") {
    const Run run = invoke({"derive"});
    REQUIRE(run.code == 0);
    CHECK(run.out == "alpha=0.874032049 eta=0.0158679247\n");

    double alpha = 0.0;
    double eta = 0.0;
    REQUIRE(std::sscanf(run.out.c_str(), "alpha=%lf eta=%lf", &alpha, &eta) == 2);
    CHECK(std::abs(alpha - bdd::gold::derive_alpha()) <= 1e-9);
    CHECK(std::abs(eta - bdd::gold::derive_eta(bdd::gold::derive_alpha())) <= 1e-9);
}

TEST_CASE("verify passes on a correct build") {
    const Run run = invoke({"verify"});
    CHECK(run.code == 0);
    CHECK(run.out.find("verification passed") != std::string::npos);
    CHECK(run.out.find("FAIL") == std::string::npos);
}

TEST_CASE("usage errors exit with code 2") {
    CHECK(invoke({}).code == 2);
    CHECK(invoke({"frobnicate"}).code == 2);
    CHECK(invoke({"sweep", "--bogus-flag"}).code == 2);
    CHECK(invoke({"data"}).code == 2);
}

TEST_CASE("help exits cleanly") {
    const Run run = invoke({"--help"});
    CHECK(run.code == 0);
    CHECK(run.out.find("derive") != std::string::npos);
}

TEST_CASE("sweep writes solution-curve CSV") {
    const std::string path = "/tmp/bdd_cli_sweep.csv";
    const Run run = invoke({"sweep", "--n", "4", "--mode", "fixed", "--out", path});
    REQUIRE(run.code == 0);
    std::ifstream file(path);
    std::string header;
    std::getline(file, header);
    CHECK(header == "phi,forward,reverse");
    int rows = 0;
    std::string line;
    while (std::getline(file, line)) {
        rows += line.empty() ? 0 : 1;
    }
    CHECK(rows == 5);
    std::remove(path.c_str());

    const Run to_stdout = invoke({"sweep", "--n", "2", "--mode", "explicit", "--base", "2"});
    CHECK(to_stdout.code == 0);
    CHECK(to_stdout.out.rfind("phi,forward,reverse\n", 0) == 0);

    CHECK(invoke({"sweep", "--n", "1"}).code == 1);            // precondition
    CHECK(invoke({"sweep", "--mode", "nonsense"}).code == 1);  // domain
}

TEST_CASE("chain prints both traces") {
    const Run run = invoke({"chain", "--p", "0.618034"});
    REQUIRE(run.code == 0);
    CHECK(run.out.find("forward chain at P(B)=0.618034") != std::string::npos);
    CHECK(run.out.find("reverse chain at P(A|B)=0.618034") != std::string::npos);
    CHECK(run.out.find("golden=") != std::string::npos);

    CHECK(invoke({"chain", "--p", "1.5"}).code == 1);
    CHECK(invoke({"chain"}).code == 2); // --p is required
}

TEST_CASE("data inspect summarizes IDX headers") {
    const Run labels = invoke({"data", "inspect",
                               data_dir() + "/train-labels-idx1-ubyte.gz"});
    REQUIRE(labels.code == 0);
    CHECK(labels.out.find("IDX labels") != std::string::npos);
    CHECK(labels.out.find("count=8000") != std::string::npos);

    const Run images = invoke({"data", "inspect",
                               data_dir() + "/t10k-images-idx3-ubyte.gz"});
    REQUIRE(images.code == 0);
    CHECK(images.out.find("IDX images") != std::string::npos);
    CHECK(images.out.find("rows=28") != std::string::npos);

    // A labels payload in an images slot fails with a format error.
    const Run mismatched = invoke({"data", "inspect",
                                   data_dir() + "/train-labels-idx1-ubyte.gz",
                                   "--kind", "images"});
    CHECK(mismatched.code == 1);
    CHECK(mismatched.err.find("magic") != std::string::npos);

    CHECK(invoke({"data", "inspect", "/nonexistent.idx"}).code == 1);
}

TEST_CASE("train runs from a config file") {
    const std::string path = "/tmp/bdd_cli_train.conf";
    write_file(path,
               "dataset = blobs\n"
               "blobs_per_class = 12\n"
               "epochs = 1\n"
               "batch_size = 16\n"
               "seed = 5\n");
    const Run run = invoke({"train", "--config", path});
    REQUIRE(run.code == 0);
    CHECK(run.out.find("epoch 1") != std::string::npos);
    CHECK(run.out.find("eval loss=") != std::string::npos);
    // Defaults to the derived pair.
    CHECK(run.out.find("eta=0.0158679247") != std::string::npos);
    CHECK(run.out.find("alpha=0.874032049") != std::string::npos);
    std::remove(path.c_str());

    CHECK(invoke({"train", "--config", "/nonexistent.conf"}).code == 1);
    CHECK(invoke({"train"}).code == 2);
}

TEST_CASE("grid runs end to end on blobs") {
    const std::string conf = "/tmp/bdd_cli_grid.conf";
    const std::string csv = "/tmp/bdd_cli_grid.csv";
    const std::string svg = "/tmp/bdd_cli_grid.svg";
    write_file(conf,
               "dataset = blobs\n"
               "blobs_per_class = 12\n"
               "epochs = 1\n"
               "folds = 2\n"
               "batch_size = 16\n"
               "seed = 6\n"
               "etas = 0.016\n"
               "alphas = 0.874\n");
    const Run run = invoke({"grid", "--config", conf, "--out-csv", csv,
                            "--out-svg", svg});
    REQUIRE(run.code == 0);
    CHECK(run.out.find("cells=1") != std::string::npos);
    CHECK(run.out.find("best:") != std::string::npos);

    std::ifstream csv_file(csv);
    REQUIRE(csv_file.good());
    std::string text((std::istreambuf_iterator<char>(csv_file)),
                     std::istreambuf_iterator<char>());
    CHECK(text.find("eta,alpha,fold,accuracy") != std::string::npos);
    CHECK(text.find("# derived-pair") != std::string::npos);
    std::ifstream svg_file(svg);
    REQUIRE(svg_file.good());

    std::remove(conf.c_str());
    std::remove(csv.c_str());
    std::remove(svg.c_str());
}

TEST_CASE("the --seed flag overrides the config seed") {
    const std::string conf = "/tmp/bdd_cli_seed.conf";
    write_file(conf,
               "dataset = blobs\n"
               "blobs_per_class = 10\n"
               "epochs = 1\n"
               "batch_size = 16\n"
               "seed = 5\n");
    const Run a = invoke({"train", "--config", conf});
    const Run b = invoke({"--seed", "900", "train", "--config", conf});
    const Run c = invoke({"train", "--config", conf});
    CHECK(a.out == c.out);  // deterministic
    CHECK(a.out != b.out);  // seed override takes effect
    std::remove(conf.c_str());
}
