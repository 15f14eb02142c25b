#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

// End-to-end checks of the spanfuse binary: exit codes, output files,
// config replay and determinism across worker counts.

namespace {

namespace fs = std::filesystem;

const std::string kCli = SPANFUSE_CLI_PATH;

struct Scratch {
    fs::path dir;
    Scratch() {
        dir = fs::temp_directory_path() /
              ("spanfuse_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter()++));
        fs::create_directories(dir);
    }
    ~Scratch() {
        std::error_code ec;
        fs::remove_all(dir, ec);
    }
    static int& counter() {
        static int c = 0;
        return c;
    }
    std::string path(const std::string& name) const { return (dir / name).string(); }
};

int run(const std::string& args, const std::string& log = "/dev/null") {
    const std::string command = kCli + " " + args + " >" + log + " 2>&1";
    const int status = std::system(command.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path);
    out << content;
}

// One small synthetic corpus shared by most cases.
const Scratch& corpus() {
    static Scratch scratch;
    static bool generated = false;
    if (!generated) {
        REQUIRE(run("synth -o " + scratch.path("corpus") +
                    " --examples 60 --systems 4 --seed 17") == 0);
        generated = true;
    }
    return scratch;
}

std::string corpus_gold() { return corpus().path("corpus/gold.jsonl"); }
std::string corpus_systems() { return corpus().path("corpus/systems"); }

}  // namespace

TEST_CASE("synth writes gold, systems and a manifest; same seed, same bytes") {
    Scratch scratch;
    REQUIRE(run("synth -o " + scratch.path("a") + " --examples 40 --systems 3 --seed 5") == 0);
    REQUIRE(run("synth -o " + scratch.path("b") + " --examples 40 --systems 3 --seed 5") == 0);
    CHECK(fs::exists(scratch.path("a/manifest.json")));
    CHECK(fs::exists(scratch.path("a/run_config.json")));
    CHECK(slurp(scratch.path("a/gold.jsonl")) == slurp(scratch.path("b/gold.jsonl")));
    for (int i = 0; i < 3; ++i) {
        const std::string name = "systems/sys0" + std::to_string(i) + ".jsonl";
        CHECK(slurp(scratch.path("a/" + name)) == slurp(scratch.path("b/" + name)));
    }
    REQUIRE(run("synth -o " + scratch.path("c") + " --examples 40 --systems 3 --seed 6") == 0);
    CHECK(slurp(scratch.path("a/gold.jsonl")) != slurp(scratch.path("c/gold.jsonl")));
}

TEST_CASE("synth accepts a full spec as JSON") {
    Scratch scratch;
    write_file(scratch.path("spec.json"),
               R"({"n_examples": 30, "n_systems": 2, "seed": 12, "candidates_per_example": 5})");
    REQUIRE(run("synth -o " + scratch.path("from_spec") + " --spec-json " +
                scratch.path("spec.json")) == 0);
    CHECK(fs::exists(scratch.path("from_spec/systems/sys01.jsonl")));
    // Equivalent flags produce the same corpus bytes.
    REQUIRE(run("synth -o " + scratch.path("from_flags") +
                " --examples 30 --systems 2 --seed 12 --cands 5") == 0);
    CHECK(slurp(scratch.path("from_spec/gold.jsonl")) ==
          slurp(scratch.path("from_flags/gold.jsonl")));
}

TEST_CASE("validate: clean inputs exit 0, usage errors exit 2") {
    CHECK(run("validate --preds-dir " + corpus_systems() + " --gold " + corpus_gold()) == 0);
    CHECK(run("validate --preds-dir " + corpus_systems()) == 2);  // missing --gold
    CHECK(run("definitely-not-a-command") == 2);
}

TEST_CASE("validate: malformed input exits 1 and cites the line") {
    Scratch scratch;
    std::string lines;
    for (int i = 1; i <= 16; ++i) {
        lines += R"({"example_id":"x)" + std::to_string(i) + R"(","long":[],"short":[]})" + "\n";
    }
    lines += "{broken\n";
    write_file(scratch.path("bad.jsonl"), lines);
    const std::string log = scratch.path("log.txt");
    CHECK(run("validate --preds " + scratch.path("bad.jsonl") + " --gold " + corpus_gold(), log) ==
          1);
    CHECK(slurp(log).find(":17") != std::string::npos);
}

TEST_CASE("calibrate: one file per system and answer type, deterministic reruns") {
    Scratch scratch;
    const std::string base = " --preds " + corpus_systems() + "/sys00.jsonl --preds " +
                             corpus_systems() + "/sys01.jsonl --gold " + corpus_gold() +
                             " --answerable-threshold 1 --c-grid 0.1,1,10 --seed 11";
    REQUIRE(run("calibrate" + base + " -o " + scratch.path("cal_a")) == 0);
    REQUIRE(run("calibrate" + base + " -o " + scratch.path("cal_b")) == 0);

    int files = 0;
    for (const auto& entry : fs::directory_iterator(scratch.path("cal_a"))) {
        const std::string name = entry.path().filename().string();
        if (name.rfind("calibrator_", 0) == 0) {
            ++files;
            CHECK(slurp(entry.path()) == slurp(fs::path(scratch.path("cal_b")) / name));
        }
    }
    CHECK(files == 4);  // 2 systems x 2 answer types

    // Three grid points -> three cv_log rows.
    const std::string cal = slurp(fs::path(scratch.path("cal_a")) / "calibrator_sys00_long.json");
    std::size_t rows = 0;
    for (std::size_t at = cal.find('['); at != std::string::npos; at = cal.find('[', at + 1)) {
        ++rows;
    }
    CHECK(rows >= 4);  // cv_log array plus one row per grid point
}

TEST_CASE("calibrate: degenerate single-class data exits 1 naming the system") {
    Scratch scratch;
    // A perfectly accurate noiseless system labels every train example
    // correct, which leaves nothing to calibrate on.
    REQUIRE(run("synth -o " + scratch.path("perfect") +
                " --examples 40 --systems 2 --accuracies 1.0,0.6 --noise 0 --seed 8") == 0);
    const std::string log = scratch.path("log.txt");
    CHECK(run("calibrate --preds-dir " + scratch.path("perfect/systems") + " --gold " +
                  scratch.path("perfect/gold.jsonl") + " --answerable-threshold 1 -o " +
                  scratch.path("cal"),
              log) == 1);
    CHECK(slurp(log).find("sys00") != std::string::npos);
}

TEST_CASE("fuse: predictions, report and replayable run config") {
    Scratch scratch;
    const std::string base = "fuse --preds-dir " + corpus_systems() + " --gold " + corpus_gold() +
                             " --answerable-threshold 1 --eval-split test";
    REQUIRE(run(base + " -o " + scratch.path("out") + " --jobs 1") == 0);
    CHECK(fs::exists(scratch.path("out/predictions.jsonl")));
    CHECK(fs::exists(scratch.path("out/report.json")));

    // Replay from the emitted config at a different worker count.
    REQUIRE(run("fuse --config " + scratch.path("out/run_config.json") + " -o " +
                scratch.path("replay") + " --jobs 8") == 0);
    CHECK(slurp(scratch.path("out/predictions.jsonl")) ==
          slurp(scratch.path("replay/predictions.jsonl")));
    CHECK(slurp(scratch.path("out/report.json")) == slurp(scratch.path("replay/report.json")));
}

TEST_CASE("fuse: single system and the short-within-long mode run clean") {
    Scratch scratch;
    CHECK(run("fuse --preds " + corpus_systems() + "/sys00.jsonl --gold " + corpus_gold() +
              " --answerable-threshold 1") == 0);
    CHECK(run("fuse --preds-dir " + corpus_systems() + " --gold " + corpus_gold() +
              " --answerable-threshold 1 --restrict-short-to-long") == 0);
}

TEST_CASE("fuse: invalid configuration exits 2") {
    CHECK(run("fuse --preds-dir " + corpus_systems() + " --gold " + corpus_gold() +
              " --la-agg noisy-or --la-norm none") == 2);
}

TEST_CASE("search: greedy run, outputs, replay at different worker counts") {
    Scratch scratch;
    REQUIRE(run("search --preds-dir " + corpus_systems() + " --gold " + corpus_gold() +
                " --answerable-threshold 1 --strategy greedy --k 2 --ks 1 -o " +
                scratch.path("out") + " --jobs 1 --seed 3") == 0);
    CHECK(fs::exists(scratch.path("out/search_result.json")));
    CHECK(fs::exists(scratch.path("out/predictions.jsonl")));
    CHECK(fs::exists(scratch.path("out/report_train.json")));
    CHECK(fs::exists(scratch.path("out/report_test.json")));

    REQUIRE(run("search --config " + scratch.path("out/run_config.json") + " -o " +
                scratch.path("replay") + " --jobs 8") == 0);
    for (const std::string name :
         {"search_result.json", "predictions.jsonl", "report_train.json", "report_test.json"}) {
        CHECK(slurp(scratch.path("out/" + name)) == slurp(scratch.path("replay/" + name)));
    }
}

TEST_CASE("search: exhaustive over the budget exits 1 with advice") {
    Scratch scratch;
    REQUIRE(run("synth -o " + scratch.path("big") + " --examples 20 --systems 24 --seed 2") == 0);
    const std::string log = scratch.path("log.txt");
    CHECK(run("search --preds-dir " + scratch.path("big/systems") + " --gold " +
                  scratch.path("big/gold.jsonl") +
                  " --answerable-threshold 1 --strategy exhaustive --k 4 --max-evals 1000",
              log) == 1);
    CHECK(slurp(log).find("pool-top-n") != std::string::npos);
    CHECK(run("search --preds-dir " + scratch.path("big/systems") + " --gold " +
              scratch.path("big/gold.jsonl") +
              " --answerable-threshold 1 --strategy exhaustive --k 4 --pool-top-n 6") == 0);
}

TEST_CASE("search: bad strategy or k exits 2") {
    CHECK(run("search --preds-dir " + corpus_systems() + " --gold " + corpus_gold() +
              " --strategy annealing") == 2);
    CHECK(run("search --preds-dir " + corpus_systems() + " --gold " + corpus_gold() +
              " --k 0") == 2);
}

TEST_CASE("eval agrees with the report fuse wrote") {
    Scratch scratch;
    REQUIRE(run("fuse --preds-dir " + corpus_systems() + " --gold " + corpus_gold() +
                " --answerable-threshold 1 --eval-split all -o " + scratch.path("fused")) == 0);
    REQUIRE(run("eval --pred-file " + scratch.path("fused/predictions.jsonl") + " --gold " +
                corpus_gold() + " --answerable-threshold 1 --eval-split all -o " +
                scratch.path("eval")) == 0);
    CHECK(slurp(scratch.path("fused/report.json")) == slurp(scratch.path("eval/report.json")));
}
