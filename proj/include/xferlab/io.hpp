#pragma once

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "xferlab/config.hpp"
#include "xferlab/error.hpp"
#include "xferlab/harness.hpp"
#include "xferlab/verify.hpp"

namespace xferlab {

inline constexpr std::string_view kToolVersion = "0.1.0";

inline constexpr std::string_view kRecordColumns =
    "experiment,axis_value,estimator,trial,seed,p,r,T,n,n_target,n_unlabeled,epsilon,alpha,"
    "support_size,sin_theta,excess_risk,target_accuracy,suppressed_count,wall_ms,status";

/// 17 significant digits, enough to round-trip any double.
inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// Writes to a sibling temp file, then renames over the target.
inline void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open '" + tmp.string() + "' for writing");
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        out.flush();
        if (!out) throw std::runtime_error("write failed for '" + tmp.string() + "'");
    }
    std::filesystem::rename(tmp, path);
}

inline std::string records_to_csv(const std::vector<TrialRecord>& records) {
    std::ostringstream out;
    out << kRecordColumns << '\n';
    for (const auto& r : records) {
        out << r.experiment << ',' << format_double(r.axis_value) << ',' << r.estimator << ','
            << r.trial << ',' << r.seed << ',' << r.p << ',' << r.r << ',' << r.T << ',' << r.n << ','
            << r.n_target << ',' << r.n_unlabeled << ',' << format_double(r.epsilon) << ','
            << format_double(r.alpha) << ',' << r.support_size << ',' << format_double(r.sin_theta)
            << ',' << format_double(r.excess_risk) << ',' << format_double(r.target_accuracy) << ','
            << r.suppressed_count << ',' << format_double(r.wall_ms) << ',' << r.status << '\n';
    }
    return out.str();
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    return fields;
}

inline double parse_double(const std::string& s, std::size_t line) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::out_of_range&) {
        return std::strtod(s.c_str(), nullptr);
    } catch (const std::exception&) {
        throw ConfigError("records line " + std::to_string(line) + ": bad number '" + s + "'");
    }
}

inline std::uint64_t parse_u64(const std::string& s, std::size_t line) {
    try {
        std::size_t used = 0;
        const auto v = std::stoull(s, &used);
        if (used != s.size() || s.front() == '-') throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("records line " + std::to_string(line) + ": bad integer '" + s + "'");
    }
}

}  // namespace detail

inline std::vector<TrialRecord> records_from_csv(std::istream& in) {
    using detail::parse_double;
    using detail::parse_u64;
    std::string line;
    if (!std::getline(in, line)) throw ConfigError("records file is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kRecordColumns) throw ConfigError("records header does not match the expected columns");
    std::vector<TrialRecord> out;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto f = detail::split_csv_line(line);
        if (f.size() != 20) {
            throw ConfigError("records line " + std::to_string(lineno) + ": expected 20 fields");
        }
        TrialRecord r;
        r.experiment = f[0];
        r.axis_value = parse_double(f[1], lineno);
        r.estimator = f[2];
        r.trial = parse_u64(f[3], lineno);
        r.seed = parse_u64(f[4], lineno);
        r.p = parse_u64(f[5], lineno);
        r.r = parse_u64(f[6], lineno);
        r.T = parse_u64(f[7], lineno);
        r.n = parse_u64(f[8], lineno);
        r.n_target = parse_u64(f[9], lineno);
        r.n_unlabeled = parse_u64(f[10], lineno);
        r.epsilon = parse_double(f[11], lineno);
        r.alpha = parse_double(f[12], lineno);
        r.support_size = parse_u64(f[13], lineno);
        r.sin_theta = parse_double(f[14], lineno);
        r.excess_risk = parse_double(f[15], lineno);
        r.target_accuracy = parse_double(f[16], lineno);
        r.suppressed_count = parse_u64(f[17], lineno);
        r.wall_ms = parse_double(f[18], lineno);
        r.status = f[19];
        out.push_back(std::move(r));
    }
    return out;
}

inline std::vector<TrialRecord> read_records(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open records file '" + path.string() + "'");
    return records_from_csv(in);
}

inline std::string aggregates_to_csv(const std::vector<AggregateRecord>& aggs) {
    std::ostringstream out;
    out << "experiment,axis_value,estimator,trial_count,failed_count";
    for (const char* m : {"sin_theta", "excess_risk", "target_accuracy", "suppressed_count"}) {
        out << ',' << m << "_q25," << m << "_median," << m << "_q75";
    }
    out << '\n';
    auto q = [&out](const Quartiles& x) {
        out << ',' << format_double(x.q25) << ',' << format_double(x.median) << ','
            << format_double(x.q75);
    };
    for (const auto& a : aggs) {
        out << a.experiment << ',' << format_double(a.axis_value) << ',' << a.estimator << ','
            << a.trial_count << ',' << a.failed_count;
        q(a.sin_theta);
        q(a.excess_risk);
        q(a.target_accuracy);
        q(a.suppressed_count);
        out << '\n';
    }
    return out.str();
}

inline std::string verify_to_csv(const VerifySummary& summary) {
    std::ostringstream out;
    out << "instance,p,n,epsilon,mean_norm,mean_max_abs";
    for (const char* e : {"standard", "adv_l2", "adv_linf"}) {
        out << ',' << e << "_closed," << e << "_oracle," << e << "_gap," << e << "_direction_error,"
            << e << "_direction_checked";
    }
    out << '\n';
    for (const auto& row : summary.rows) {
        out << row.instance << ',' << row.p << ',' << row.n << ',' << format_double(row.epsilon) << ','
            << format_double(row.mean_norm) << ',' << format_double(row.mean_max_abs);
        for (const auto& c : row.checks) {
            out << ',' << format_double(c.closed_objective) << ',' << format_double(c.oracle_objective)
                << ',' << format_double(c.gap) << ',' << format_double(c.direction_error) << ','
                << (c.direction_checked ? 1 : 0);
        }
        out << '\n';
    }
    return out.str();
}

inline std::string utc_timestamp(std::chrono::system_clock::time_point tp) {
    const std::time_t t = std::chrono::system_clock::to_time_t(tp);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

struct RunManifest {
    std::string tool_version{kToolVersion};
    std::string config_digest;
    std::uint64_t root_seed = 0;
    std::string started_at;
    std::string finished_at;
    std::size_t record_count = 0;
};

inline Json to_json(const RunManifest& m) {
    return Json{{"tool_version", m.tool_version}, {"config_digest", m.config_digest},
                {"root_seed", m.root_seed},       {"started_at", m.started_at},
                {"finished_at", m.finished_at},   {"record_count", m.record_count}};
}

}  // namespace xferlab
