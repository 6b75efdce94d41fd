#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "xferlab/cli.hpp"

using namespace xferlab;
namespace fs = std::filesystem;

namespace {

struct Result {
    int code;
    std::string out, err;
};

Result run(std::vector<std::string> args) {
    args.insert(args.begin(), "xferlab");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("xferlab_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::size_t count_lines(const fs::path& p) {
    std::ifstream in(p);
    std::size_t n = 0;
    for (std::string line; std::getline(in, line);) ++n;
    return n;
}

fs::path write_text(const fs::path& p, const std::string& text) {
    std::ofstream(p) << text;
    return p;
}

const char* kSmallConfig = R"({
  "experiment": "small",
  "ensemble": {"p": 12, "r": 2, "T": 8},
  "sweep": {"axis": "n", "values": [10, 20, 40]},
  "estimators": [{"kind": "standard"}, {"kind": "adv_l2", "epsilon": 0.05}],
  "n_target": 30, "trials": 4, "seed": 5
})";

}  // namespace

TEST(Cli, PresetSweepWritesThreeFiles) {
    const auto dir = scratch("preset");
    const auto r = run({"sweep", "--preset", "lemma1_rate_n", "--trials", "2", "--threads", "2", "--out", dir.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    for (const char* f : {"records.csv", "aggregates.csv", "manifest.json"}) EXPECT_TRUE(fs::exists(dir / f)) << f;
    EXPECT_EQ(count_lines(dir / "records.csv"), 1u + 7u * 2u);
    std::ifstream in(dir / "manifest.json");
    const auto manifest = Json::parse(in);
    EXPECT_EQ(manifest.at("record_count"), 14);
    EXPECT_EQ(manifest.at("root_seed"), 1001);
    EXPECT_EQ(manifest.at("config_digest").get<std::string>().size(), 64u);
}

TEST(Cli, TrialsOverrideScalesRecordCount) {
    const auto cfg = write_text(scratch("trials_cfg") / "c.json", kSmallConfig);
    const auto a = scratch("trials_a"), b = scratch("trials_b");
    ASSERT_EQ(run({"sweep", "--config", cfg.string(), "--trials", "4", "--out", a.string()}).code, 0);
    ASSERT_EQ(run({"sweep", "--config", cfg.string(), "--trials", "2", "--out", b.string()}).code, 0);
    EXPECT_EQ(count_lines(a / "records.csv") - 1, 2 * (count_lines(b / "records.csv") - 1));
}

TEST(Cli, SeedOverrideChangesDigestAndRecords) {
    const auto cfg = write_text(scratch("seed_cfg") / "c.json", kSmallConfig);
    const auto a = scratch("seed_a"), b = scratch("seed_b"), c = scratch("seed_c");
    ASSERT_EQ(run({"sweep", "--config", cfg.string(), "--out", a.string(), "--threads", "1"}).code, 0);
    ASSERT_EQ(run({"sweep", "--config", cfg.string(), "--out", b.string(), "--threads", "4"}).code, 0);
    ASSERT_EQ(run({"sweep", "--config", cfg.string(), "--out", c.string(), "--seed", "6"}).code, 0);
    auto read = [](const fs::path& p) {
        std::ifstream in(p);
        std::stringstream s;
        s << in.rdbuf();
        return s.str();
    };
    EXPECT_EQ(read(a / "aggregates.csv"), read(b / "aggregates.csv"));
    EXPECT_NE(read(a / "aggregates.csv"), read(c / "aggregates.csv"));
    const auto da = Json::parse(read(a / "manifest.json")).at("config_digest");
    const auto db = Json::parse(read(b / "manifest.json")).at("config_digest");
    const auto dc = Json::parse(read(c / "manifest.json")).at("config_digest");
    EXPECT_EQ(da, db);
    EXPECT_NE(da, dc);
}

TEST(Cli, MalformedJsonExitsTwoWithPosition) {
    const auto cfg = write_text(scratch("bad_json") / "c.json", "{\n  \"experiment\": \"x\",\n  \"trials\": ]\n}\n");
    const auto r = run({"sweep", "--config", cfg.string(), "--out", scratch("bad_json_out").string()});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("line 3"), std::string::npos) << r.err;
    EXPECT_NE(r.err.find("column"), std::string::npos) << r.err;
}

TEST(Cli, UnknownKeyExitsTwo) {
    std::string text = kSmallConfig;
    text.replace(text.find("\"trials\""), 8, "\"trails\"");
    const auto cfg = write_text(scratch("unknown_key") / "c.json", text);
    const auto r = run({"sweep", "--config", cfg.string(), "--out", scratch("unknown_key_out").string()});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("trails"), std::string::npos);
}

TEST(Cli, ConfigErrorsExitTwo) {
    const auto out = scratch("cfg_err").string();
    EXPECT_EQ(run({"sweep", "--preset", "thm9", "--out", out}).code, 2);
    EXPECT_EQ(run({"sweep", "--out", out}).code, 2);
    EXPECT_EQ(run({"sweep", "--preset", "verify_closed_forms", "--out", out}).code, 2);
    EXPECT_EQ(run({"sweep", "--config", "/nonexistent/x.json", "--out", out}).code, 2);
    EXPECT_EQ(run({"sweep", "--preset", "thm1_l2_snr", "--threads", "0", "--out", out}).code, 2);
    EXPECT_EQ(run({}).code, 2);
    EXPECT_EQ(run({"frobnicate"}).code, 2);
}

TEST(Cli, UnwritableOutputIsRuntimeError) {
    const auto dir = scratch("blocked");
    const auto cfg = write_text(dir / "c.json", kSmallConfig);
    write_text(dir / "file", "x");
    const auto r = run({"sweep", "--config", cfg.string(), "--out", (dir / "file" / "sub").string()});
    EXPECT_EQ(r.code, 3) << r.err;
}

TEST(Cli, VerifyPassesWithHundredRows) {
    const auto dir = scratch("verify");
    const auto r = run({"verify", "--out", dir.string()});
    EXPECT_EQ(r.code, 0) << r.out << r.err;
    EXPECT_EQ(count_lines(dir / "verify.csv"), 101u);
}

TEST(Cli, VerifyMutationCanaryExitsOne) {
    ClosedFormFitters broken;
    broken.adv_l2 = [](const Vector& m, double e) {
        const double norm = m.norm();
        if (norm < e && norm > 0.0) return FitResult{m / norm, -norm + e, false};
        return FitResult{Vector::Zero(m.size()), 0.0, true};
    };
    std::ostringstream out, err;
    EXPECT_EQ(cli::cmd_verify(scratch("canary").string(), out, err, broken), 1);
}

TEST(Cli, ReportFromSweepRecords) {
    const auto cfg = write_text(scratch("report_cfg") / "c.json", kSmallConfig);
    const auto sweep_dir = scratch("report_sweep"), report_dir = scratch("report_out");
    ASSERT_EQ(run({"sweep", "--config", cfg.string(), "--out", sweep_dir.string()}).code, 0);
    const auto r = run({"report", "--records", (sweep_dir / "records.csv").string(), "--out", report_dir.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(count_lines(report_dir / "slopes.csv"), 1u + 2u * 2u);
    EXPECT_EQ(count_lines(report_dir / "paired.csv"), 1u + 3u);
    EXPECT_EQ(run({"report", "--records", "/nonexistent.csv", "--out", report_dir.string()}).code, 2);
}

TEST(Cli, ThreadsFromEnvironment) {
    setenv("XFERLAB_THREADS", "3", 1);
    EXPECT_EQ(cli::resolve_threads(std::nullopt), 3u);
    EXPECT_EQ(cli::resolve_threads(5), 5u);
    setenv("XFERLAB_THREADS", "zero", 1);
    EXPECT_THROW(cli::resolve_threads(std::nullopt), ConfigError);
    unsetenv("XFERLAB_THREADS");
    EXPECT_GE(cli::resolve_threads(std::nullopt), 1u);
}

TEST(Cli, BinaryExitCodes) {
    const auto dir = scratch("binary");
    const std::string bin = XFERLAB_CLI_PATH;
    auto status = [](const std::string& cmd) {
        const int raw = std::system((cmd + " >/dev/null 2>&1").c_str());
        return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    };
    EXPECT_EQ(status(bin + " verify --out " + (dir / "v").string()), 0);
    EXPECT_EQ(status(bin + " sweep --preset nope --out " + (dir / "s").string()), 2);
    EXPECT_EQ(status(bin + " --help"), 0);
}
