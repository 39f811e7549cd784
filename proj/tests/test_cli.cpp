#include <catch2/catch_amalgamated.hpp>

#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "helpers.hpp"

namespace fs = std::filesystem;

namespace {

struct RunResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

const fs::path& work_dir() {
    static const fs::path dir = [] {
        fs::path d = fs::temp_directory_path() / "cmar_cli_tests";
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

RunResult run(const std::string& args) {
    static int counter = 0;
    const fs::path out = work_dir() / ("stdout_" + std::to_string(counter) + ".txt");
    const fs::path err = work_dir() / ("stderr_" + std::to_string(counter) + ".txt");
    ++counter;
    const std::string cmd =
        std::string(CMAR_CLI_PATH) + " " + args + " > " + out.string() + " 2> " + err.string();
    const int status = std::system(cmd.c_str());
    RunResult r;
    r.exit_code = status < 0 ? status : WEXITSTATUS(status);
    r.out = slurp(out);
    r.err = slurp(err);
    return r;
}

void write_text(const fs::path& p, const std::string& content) {
    std::ofstream out(p, std::ios::binary);
    out << content;
}

// Full round-trip precision so re-emitting a parsed file is the identity.
void write_matrix(const fs::path& p, const Eigen::MatrixXd& m) {
    std::ofstream out(p);
    char buf[40];
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            std::snprintf(buf, sizeof(buf), "%.17g", m(i, j));
            out << (j ? " " : "") << buf;
        }
        out << '\n';
    }
}

const char* kToyFlowsheet = R"(unit uA alpha unit
unit uB beta unit
stream sA transfer
edge uA sA
edge sA uB
var a1 uA measured
var a2 uA measured
var a3 uA measured
var a4 uA manipulated
var b1 uB measured
var b2 uB measured
var b3 uB measured
var b4 uB measured
var b5 uB manipulated
loop a1 a4
loop b1 b5
)";

// Lays out the toy plant fixtures once: flowsheet, columns, training and
// fault data, and the trained model bundle.
struct Fixture {
    fs::path flowsheet = work_dir() / "toy_flowsheet.txt";
    fs::path columns = work_dir() / "toy_columns.txt";
    fs::path train = work_dir() / "toy_train.dat";
    fs::path fault = work_dir() / "toy_fault.dat";
    fs::path normal = work_dir() / "toy_normal.dat";
    fs::path blocks = work_dir() / "toy_blocks.json";
    fs::path models = work_dir() / "toy_models.json";

    Fixture() {
        write_text(flowsheet, kToyFlowsheet);
        write_text(columns, "a1\na2\na3\na4\nb1\nb2\nb3\nb4\nb5\n");

        std::vector<cmar::MonitoringBlock> blocks_def{
            {"uA", {"uA"}, {"a1", "a2", "a3", "a4"}},
            {"uB", {"uB"}, {"b1", "b2", "b3", "b4", "b5"}}};
        std::vector<std::string> cols{"a1", "a2", "a3", "a4", "b1", "b2", "b3", "b4", "b5"};
        std::mt19937_64 rng(20240617);
        const testutil::SyntheticPlant plant(blocks_def, cols, 991);
        write_matrix(train, plant.sample(400, rng));
        write_matrix(normal, plant.sample(300, rng));
        Eigen::MatrixXd faulty = plant.sample(300, rng);
        for (int i = 100; i < 300; ++i) faulty(i, 6) += 8.0;  // b3 step
        write_matrix(fault, faulty);

        REQUIRE(run("decompose --flowsheet " + flowsheet.string() +
                    " --delta 0.01 --out " + blocks.string())
                    .exit_code == 0);
        REQUIRE(run("train --blocks " + blocks.string() + " --data " + train.string() +
                    " --columns " + columns.string() + " --alpha 0.01 --out " + models.string())
                    .exit_code == 0);
    }
};

const Fixture& fixture() {
    static Fixture f;
    return f;
}

}  // namespace

TEST_CASE("help exercises every subcommand") {
    REQUIRE(run("--help").exit_code == 0);
    for (const std::string sub : {"decompose", "train", "monitor", "contrib", "evaluate"}) {
        const RunResult r = run(sub + " --help");
        REQUIRE(r.exit_code == 0);
        REQUIRE(r.out.find("--") != std::string::npos);
    }
    const RunResult mon = run("monitor --help");
    for (const char* flag : {"--models", "--data", "--columns", "--threshold",
                             "--calibration-data", "--calibration-index", "--target-far",
                             "--confirm-run", "--transpose", "--out"})
        REQUIRE(mon.out.find(flag) != std::string::npos);
}

TEST_CASE("missing input file exits 2 and names the path") {
    const RunResult r = run("decompose --flowsheet /definitely/not/here.txt --out x.json");
    REQUIRE(r.exit_code == 2);
    REQUIRE(r.err.find("/definitely/not/here.txt") != std::string::npos);
}

TEST_CASE("decompose reproduces the TEP blocks from the shipped asset") {
    const fs::path out = work_dir() / "tep_blocks.json";
    const RunResult r = run("decompose --flowsheet " + testutil::data_path("tep_flowsheet.txt") +
                            " --delta 0.15 --control-aware --out " + out.string());
    REQUIRE(r.exit_code == 0);
    REQUIRE(r.out.find("mixer+compressor") != std::string::npos);
    const nlohmann::json doc = nlohmann::json::parse(slurp(out));
    REQUIRE(doc.size() == 4);

    const fs::path out7 = work_dir() / "tep_blocks7.json";
    const RunResult r7 = run("decompose --flowsheet " + testutil::data_path("tep_flowsheet.txt") +
                             " --delta 0.001 --out " + out7.string());
    REQUIRE(r7.exit_code == 0);
    REQUIRE(nlohmann::json::parse(slurp(out7)).size() == 7);
}

TEST_CASE("train reports per-block summaries") {
    const Fixture& f = fixture();
    const nlohmann::json bundle = nlohmann::json::parse(slurp(f.models));
    REQUIRE(bundle.size() == 2);
    for (const auto& m : bundle) {
        REQUIRE(m.contains("block_name"));
        REQUIRE(m.contains("loadings"));
        REQUIRE(m.contains("t2_limit"));
    }
}

TEST_CASE("train rejects a constant column naming the tag") {
    const Fixture& f = fixture();
    Eigen::MatrixXd flat = Eigen::MatrixXd::Random(50, 9);
    flat.col(3).setConstant(2.5);  // a4
    const fs::path data = work_dir() / "flat.dat";
    write_matrix(data, flat);
    const RunResult r = run("train --blocks " + f.blocks.string() + " --data " + data.string() +
                            " --columns " + f.columns.string() + " --out " +
                            (work_dir() / "flat_models.json").string());
    REQUIRE(r.exit_code == 1);
    REQUIRE(r.err.find("a4") != std::string::npos);
}

TEST_CASE("monitor writes the CSV and is byte deterministic") {
    const Fixture& f = fixture();
    const fs::path csv1 = work_dir() / "mon1.csv";
    const fs::path csv2 = work_dir() / "mon2.csv";
    const std::string base = "monitor --models " + f.models.string() + " --data " +
                             f.fault.string() + " --columns " + f.columns.string() + " --out ";
    REQUIRE(run(base + csv1.string()).exit_code == 0);
    REQUIRE(run(base + csv2.string()).exit_code == 0);
    const std::string body = slurp(csv1);
    REQUIRE(body == slurp(csv2));
    REQUIRE(body.rfind("sample,time_min,uA_t2,uA_post,uB_t2,uB_post,bic,alarm", 0) == 0);

    SECTION("threshold and calibration flags are mutually exclusive") {
        const RunResult r = run(base + (work_dir() / "mon3.csv").string() +
                                " --threshold 0.5 --calibration-data " + f.normal.string());
        REQUIRE(r.exit_code == 2);
    }
    SECTION("calibrated run reports its threshold") {
        const RunResult r = run(base + (work_dir() / "mon4.csv").string() +
                                " --calibration-data " + f.normal.string() + " --target-far 0.05");
        REQUIRE(r.exit_code == 0);
        REQUIRE(r.out.find("threshold=") != std::string::npos);
    }
    SECTION("calibrating on the monitored file itself keeps FAR at the target") {
        const fs::path csv = work_dir() / "mon5.csv";
        const RunResult r = run("monitor --models " + f.models.string() + " --data " +
                                f.normal.string() + " --columns " + f.columns.string() +
                                " --calibration-data " + f.normal.string() +
                                " --target-far 0.05 --out " + csv.string());
        REQUIRE(r.exit_code == 0);
        const std::string out = r.out;
        const auto pos = out.find("threshold=");
        REQUIRE(pos != std::string::npos);
        const double threshold = std::stod(out.substr(pos + 10));

        std::istringstream lines(slurp(csv));
        std::string line;
        std::getline(lines, line);  // header
        std::size_t exceed = 0, n = 0;
        while (std::getline(lines, line)) {
            const auto last_comma = line.rfind(',');
            const auto prev_comma = line.rfind(',', last_comma - 1);
            const double bic = std::stod(line.substr(prev_comma + 1, last_comma - prev_comma - 1));
            exceed += bic > threshold ? 1 : 0;
            ++n;
        }
        REQUIRE(n == 300);
        REQUIRE(static_cast<double>(exceed) / static_cast<double>(n) <= 0.05 + 1.0 / 300.0);
    }
}

TEST_CASE("monitor rejects an empty data file") {
    const Fixture& f = fixture();
    const fs::path empty = work_dir() / "empty.dat";
    write_text(empty, "");
    const RunResult r = run("monitor --models " + f.models.string() + " --data " +
                            empty.string() + " --columns " + f.columns.string() + " --out " +
                            (work_dir() / "empty.csv").string());
    REQUIRE(r.exit_code == 2);
}

TEST_CASE("contrib exports CSV and SVG for a known block") {
    const Fixture& f = fixture();
    const fs::path csv = work_dir() / "contrib.csv";
    const fs::path svg = work_dir() / "contrib.svg";
    const RunResult r = run("contrib --models " + f.models.string() + " --data " +
                            f.fault.string() + " --columns " + f.columns.string() +
                            " --block uB --from 90 --to 140 --out " + csv.string() + " --svg " +
                            svg.string());
    REQUIRE(r.exit_code == 0);
    const std::string body = slurp(csv);
    REQUIRE(body.rfind("sample,b1,b2,b3,b4,b5", 0) == 0);
    REQUIRE(slurp(svg).find("<svg") == 0);

    SECTION("unknown block exits 2") {
        const RunResult bad = run("contrib --models " + f.models.string() + " --data " +
                                  f.fault.string() + " --columns " + f.columns.string() +
                                  " --block nope --out " + csv.string());
        REQUIRE(bad.exit_code == 2);
        REQUIRE(bad.err.find("nope") != std::string::npos);
    }
}

TEST_CASE("evaluate writes per-fault reports and continues past bad entries") {
    const Fixture& f = fixture();
    const fs::path manifest = work_dir() / "manifest.txt";
    write_text(manifest, "f1 " + f.fault.string() + " 100\n" +      // faulty run
                             "f0 " + f.normal.string() + " -\n" +   // normal run
                             "bad " + f.fault.string() + " 9999\n"  // onset out of range
    );
    const fs::path out_dir = work_dir() / "reports";
    const RunResult r = run("evaluate --models " + f.models.string() + " --manifest " +
                            manifest.string() + " --columns " + f.columns.string() +
                            " --out-dir " + out_dir.string());
    REQUIRE(r.exit_code == 0);

    const nlohmann::json f1 = nlohmann::json::parse(slurp(out_dir / "report_f1.json"));
    REQUIRE(f1.at("fault_id") == "f1");
    REQUIRE(f1.at("fdr_sample").get<double>() > 0.9);
    REQUIRE(f1.at("first_alarm_block") == "uB");

    const nlohmann::json f0 = nlohmann::json::parse(slurp(out_dir / "report_f0.json"));
    REQUIRE(f0.at("far").get<double>() <= 0.08);

    const nlohmann::json bad = nlohmann::json::parse(slurp(out_dir / "report_bad.json"));
    REQUIRE(bad.contains("error"));

    const nlohmann::json agg = nlohmann::json::parse(slurp(out_dir / "aggregate.json"));
    REQUIRE(agg.size() == 3);

    SECTION("empty manifest yields an empty aggregate and exit 0") {
        write_text(manifest, "# nothing\n");
        const RunResult empty = run("evaluate --models " + f.models.string() + " --manifest " +
                                    manifest.string() + " --columns " + f.columns.string() +
                                    " --out-dir " + out_dir.string());
        REQUIRE(empty.exit_code == 0);
        REQUIRE(nlohmann::json::parse(slurp(out_dir / "aggregate.json")).empty());
    }
}

TEST_CASE("transpose flag handles variable-major files") {
    const Fixture& f = fixture();
    // Re-emit the training data variable-major and retrain through the flag.
    std::ifstream in(f.train);
    REQUIRE(in.good());
    const Eigen::MatrixXd m = cmar::load_matrix(in, "train");
    const fs::path tdata = work_dir() / "train_t.dat";
    write_matrix(tdata, m.transpose());
    const fs::path tmodels = work_dir() / "models_t.json";
    const RunResult r = run("train --blocks " + f.blocks.string() + " --data " + tdata.string() +
                            " --transpose --columns " + f.columns.string() + " --out " +
                            tmodels.string());
    REQUIRE(r.exit_code == 0);
    REQUIRE(slurp(tmodels) == slurp(f.models));  // byte-identical bundle
}
