#pragma once

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "xferlab/config.hpp"
#include "xferlab/harness.hpp"
#include "xferlab/io.hpp"
#include "xferlab/presets.hpp"
#include "xferlab/report.hpp"
#include "xferlab/verify.hpp"

namespace xferlab::cli {

enum ExitCode : int { kOk = 0, kVerifyFailed = 1, kConfigError = 2, kRuntimeError = 3 };

struct SweepOptions {
    std::string config_path;
    std::string preset;
    std::optional<std::size_t> trials;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> threads;
    std::string out_dir;
};

/// --threads, else XFERLAB_THREADS, else the number of logical cores.
inline std::size_t resolve_threads(const std::optional<std::size_t>& flag) {
    if (flag) {
        if (*flag < 1) throw ConfigError("--threads must be >= 1");
        return *flag;
    }
    if (const char* env = std::getenv("XFERLAB_THREADS"); env && *env) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (*end != '\0' || v < 1) throw ConfigError("XFERLAB_THREADS must be a positive integer");
        return static_cast<std::size_t>(v);
    }
    return default_parallelism();
}

inline std::vector<SweepConfig> resolve_sweeps(const SweepOptions& opt) {
    if (opt.config_path.empty() == opt.preset.empty()) {
        throw ConfigError("sweep needs exactly one of --config or --preset");
    }
    std::vector<SweepConfig> sweeps;
    if (!opt.preset.empty()) {
        Preset p = preset(opt.preset);
        if (p.sweeps.empty()) throw ConfigError("preset '" + opt.preset + "' is run by `xferlab verify`");
        sweeps = std::move(p.sweeps);
    } else {
        sweeps.push_back(load_sweep_config(opt.config_path));
    }
    for (auto& s : sweeps) {
        if (opt.trials) s.trials = *opt.trials;
        if (opt.seed) s.root_seed = *opt.seed;
        s.validate();
    }
    return sweeps;
}

inline int cmd_sweep(const SweepOptions& opt, std::ostream& out, std::ostream& err) {
    std::vector<SweepConfig> sweeps;
    std::size_t threads = 1;
    try {
        sweeps = resolve_sweeps(opt);
        threads = resolve_threads(opt.threads);
    } catch (const Error& e) {
        err << "config error: " << e.what() << '\n';
        return kConfigError;
    }
    try {
        RunManifest manifest;
        manifest.config_digest = config_digest(sweeps);
        manifest.root_seed = sweeps.front().root_seed;
        manifest.started_at = utc_timestamp(std::chrono::system_clock::now());
        std::vector<TrialRecord> records;
        for (const auto& s : sweeps) {
            out << "sweep " << s.experiment << ": " << s.values.size() << " values x "
                << s.estimators.size() << " estimators x " << s.trials << " trials on " << threads
                << " threads\n";
            auto part = run_sweep(s, threads);
            records.insert(records.end(), std::make_move_iterator(part.begin()),
                           std::make_move_iterator(part.end()));
        }
        manifest.finished_at = utc_timestamp(std::chrono::system_clock::now());
        manifest.record_count = records.size();

        const std::filesystem::path dir(opt.out_dir);
        std::filesystem::create_directories(dir);
        write_file_atomic(dir / "records.csv", records_to_csv(records));
        write_file_atomic(dir / "aggregates.csv", aggregates_to_csv(aggregate(records)));
        write_file_atomic(dir / "manifest.json", to_json(manifest).dump(2) + "\n");
        std::size_t failed = 0;
        for (const auto& r : records) failed += r.ok() ? 0 : 1;
        out << "wrote " << records.size() << " records (" << failed << " failed) to " << dir.string()
            << '\n';
        return kOk;
    } catch (const std::exception& e) {
        err << "runtime error: " << e.what() << '\n';
        return kRuntimeError;
    }
}

inline int cmd_verify(const std::string& out_dir, std::ostream& out, std::ostream& err,
                      const ClosedFormFitters& fitters = {}) {
    try {
        const Preset p = preset("verify_closed_forms");
        const VerifySummary summary = run_verify(*p.verify, fitters);
        const std::filesystem::path dir(out_dir);
        std::filesystem::create_directories(dir);
        write_file_atomic(dir / "verify.csv", verify_to_csv(summary));
        out << "instances: " << summary.rows.size() << '\n'
            << "max objective gap: " << format_double(summary.max_gap) << " (tolerance "
            << kVerifyGapTol << ")\n"
            << "max direction error: " << format_double(summary.max_direction_error) << " over "
            << summary.direction_checks << " checks (tolerance " << kVerifyDirectionTol << ")\n";
        return summary.gaps_ok() ? kOk : kVerifyFailed;
    } catch (const std::exception& e) {
        err << "runtime error: " << e.what() << '\n';
        return kRuntimeError;
    }
}

inline int cmd_report(const std::string& records_path, const std::string& out_dir, std::ostream& out,
                      std::ostream& err) {
    std::vector<TrialRecord> records;
    try {
        records = read_records(records_path);
    } catch (const ConfigError& e) {
        err << "input error: " << e.what() << '\n';
        return kConfigError;
    }
    try {
        write_report(records, out_dir);
        out << "report for " << records.size() << " records written to " << out_dir << '\n';
        return kOk;
    } catch (const std::exception& e) {
        err << "runtime error: " << e.what() << '\n';
        return kRuntimeError;
    }
}

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
    CLI::App app{"Simulation harness for adversarially trained multi-task representations"};
    app.name("xferlab");
    app.set_version_flag("--version", std::string(kToolVersion));
    app.require_subcommand(1);

    SweepOptions sweep_opt;
    std::size_t trials = 0, threads = 0;
    std::uint64_t seed = 0;
    auto* sweep = app.add_subcommand("sweep", "Run a configured or preset sweep");
    sweep->add_option("--config", sweep_opt.config_path, "JSON sweep config");
    sweep->add_option("--preset", sweep_opt.preset, "Named preset")
        ->check(CLI::IsMember(std::vector<std::string>(kPresetNames.begin(), kPresetNames.end())));
    auto* trials_opt = sweep->add_option("--trials", trials, "Override trial count");
    auto* seed_opt = sweep->add_option("--seed", seed, "Override root seed");
    auto* threads_opt = sweep->add_option("--threads", threads, "Worker threads");
    sweep->add_option("--out", sweep_opt.out_dir, "Output directory")->required();

    std::string verify_out;
    auto* verify = app.add_subcommand("verify", "Audit closed-form fits against the oracle");
    verify->add_option("--out", verify_out, "Output directory")->required();

    std::string records_path, report_out;
    auto* report = app.add_subcommand("report", "Slopes, overlays and sign tests from records");
    report->add_option("--records", records_path, "Records CSV")->required();
    report->add_option("--out", report_out, "Output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kOk;
    } catch (const CLI::CallForVersion&) {
        out << kToolVersion << '\n';
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << '\n';
        return kConfigError;
    }

    if (*sweep) {
        if (*trials_opt) sweep_opt.trials = trials;
        if (*seed_opt) sweep_opt.seed = seed;
        if (*threads_opt) sweep_opt.threads = threads;
        return cmd_sweep(sweep_opt, out, err);
    }
    if (*verify) return cmd_verify(verify_out, out, err);
    return cmd_report(records_path, report_out, out, err);
}

}  // namespace xferlab::cli
