#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "xferlab/harness.hpp"
#include "xferlab/io.hpp"
#include "xferlab/metrics.hpp"

namespace xferlab {

/// Median metrics of one (experiment, estimator, axis value) cell, with the
/// reference-rate overlays evaluated at that cell's parameters.
struct ReportCell {
    std::string experiment;
    std::string estimator;
    double axis_value = 0.0;
    std::size_t ok_count = 0;
    std::size_t failed_count = 0;
    double median_sin_theta = std::numeric_limits<double>::quiet_NaN();
    double median_excess_risk = std::numeric_limits<double>::quiet_NaN();
    RateKind reference_kind = RateKind::lemma1_n;
    double reference_rate = std::numeric_limits<double>::quiet_NaN();
    double lower_rate = std::numeric_limits<double>::quiet_NaN();
};

struct ReportSlope {
    std::string experiment;
    std::string estimator;
    std::string metric;
    std::size_t points = 0;
    std::optional<SlopeFit> fit;
    RateKind reference_kind = RateKind::lemma1_n;
    std::optional<double> reference_slope;
    std::string status = "ok";
};

struct PairedCount {
    std::string experiment;
    double axis_value = 0.0;
    std::string estimator;
    std::size_t wins = 0, losses = 0, ties = 0, unpaired = 0;
    double p_value = 1.0;
};

/// P(X >= k) for X ~ Binomial(n, 1/2).
inline double sign_test_p_value(std::size_t k, std::size_t n) {
    if (k == 0) return 1.0;
    if (k > n) return 0.0;
    double total = 0.0;
    const double ln_half_n = static_cast<double>(n) * std::log(0.5);
    for (std::size_t j = k; j <= n; ++j) {
        const double ln_choose = std::lgamma(static_cast<double>(n) + 1.0) -
                                 std::lgamma(static_cast<double>(j) + 1.0) -
                                 std::lgamma(static_cast<double>(n - j) + 1.0);
        total += std::exp(ln_choose + ln_half_n);
    }
    return std::min(1.0, total);
}

namespace detail {

inline RateParams rate_params(const TrialRecord& r) {
    RateParams prm;
    const double n_eff = static_cast<double>(r.n + r.n_unlabeled);
    prm.n = n_eff;
    prm.T = static_cast<double>(r.T);
    prm.p = static_cast<double>(r.p);
    prm.r = static_cast<double>(r.r);
    prm.s = static_cast<double>(r.support_size);
    prm.alpha_T = r.alpha;
    prm.n_tilde = n_eff;
    return prm;
}

inline double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return quantile_sorted(v, 0.5);
}

inline double safe_rate(RateKind k, const RateParams& prm) {
    try {
        return reference_rate(k, prm);
    } catch (const Error&) {
        return std::numeric_limits<double>::quiet_NaN();
    }
}

}  // namespace detail

/// Picks the overlay matching how the records were produced.
inline RateKind reference_kind_for(const std::string& estimator, bool any_unlabeled, bool axis_is_T) {
    if (estimator == "adv_l2") return RateKind::thm1_l2;
    if (estimator == "adv_linf") return RateKind::thm2_linf;
    if (any_unlabeled) return RateKind::thm3_pseudo;
    return axis_is_T ? RateKind::lemma1_T : RateKind::lemma1_n;
}

inline std::vector<ReportCell> report_cells(const std::vector<TrialRecord>& records) {
    using Group = std::pair<std::string, std::string>;
    struct Acc {
        std::vector<double> sin, risk;
        std::size_t failed = 0;
        const TrialRecord* sample = nullptr;
    };
    std::map<Group, std::map<double, Acc>> groups;
    for (const auto& r : records) {
        auto& acc = groups[{r.experiment, r.estimator}][r.axis_value];
        if (!acc.sample) acc.sample = &r;
        if (!r.ok()) {
            ++acc.failed;
            continue;
        }
        acc.sin.push_back(r.sin_theta);
        acc.risk.push_back(r.excess_risk);
    }
    std::vector<ReportCell> out;
    for (auto& [group, cells] : groups) {
        bool any_unlabeled = false, axis_is_T = true;
        for (const auto& [v, acc] : cells) {
            any_unlabeled = any_unlabeled || acc.sample->n_unlabeled > 0;
            axis_is_T = axis_is_T && static_cast<double>(acc.sample->T) == v;
        }
        const RateKind kind = reference_kind_for(group.second, any_unlabeled, axis_is_T);
        for (auto& [v, acc] : cells) {
            ReportCell c;
            c.experiment = group.first;
            c.estimator = group.second;
            c.axis_value = v;
            c.ok_count = acc.sin.size();
            c.failed_count = acc.failed;
            if (!acc.sin.empty()) {
                c.median_sin_theta = detail::median_of(acc.sin);
                c.median_excess_risk = detail::median_of(acc.risk);
            }
            const RateParams prm = detail::rate_params(*acc.sample);
            c.reference_kind = kind;
            c.reference_rate = detail::safe_rate(kind, prm);
            c.lower_rate = detail::safe_rate(RateKind::prop1_lower, prm);
            out.push_back(std::move(c));
        }
    }
    return out;
}

namespace detail {

inline void fit_into(ReportSlope& s, const std::vector<std::pair<double, double>>& pts) {
    s.points = pts.size();
    if (pts.size() < 3) {
        s.status = "too_few_points";
        return;
    }
    try {
        s.fit = fit_loglog_slope(pts);
    } catch (const Error& e) {
        s.status = "error:" + e.tag();
    }
}

}  // namespace detail

/// Log-log slope of each median metric against the axis, per
/// (experiment, estimator), next to the slope of its reference rate.
inline std::vector<ReportSlope> report_slopes(const std::vector<ReportCell>& cells) {
    std::map<std::pair<std::string, std::string>, std::vector<const ReportCell*>> groups;
    for (const auto& c : cells) groups[{c.experiment, c.estimator}].push_back(&c);
    std::vector<ReportSlope> out;
    for (const auto& [key, group] : groups) {
        std::vector<std::pair<double, double>> ref;
        for (const auto* c : group) {
            if (std::isfinite(c->reference_rate)) ref.emplace_back(c->axis_value, c->reference_rate);
        }
        std::optional<double> ref_slope;
        if (ref.size() >= 3) {
            try {
                ref_slope = fit_loglog_slope(ref).slope;
            } catch (const Error&) {
            }
        }
        for (const char* metric : {"sin_theta", "excess_risk"}) {
            ReportSlope s;
            s.experiment = key.first;
            s.estimator = key.second;
            s.metric = metric;
            s.reference_kind = group.front()->reference_kind;
            s.reference_slope = ref_slope;
            std::vector<std::pair<double, double>> pts;
            for (const auto* c : group) {
                const double y = s.metric == "sin_theta" ? c->median_sin_theta : c->median_excess_risk;
                if (std::isfinite(y)) pts.emplace_back(c->axis_value, y);
            }
            detail::fit_into(s, pts);
            out.push_back(std::move(s));
        }
    }
    return out;
}

/// Paired sign test on sin_theta against the standard estimator of the same
/// experiment, matching trials by (axis value, trial, seed).
inline std::vector<PairedCount> paired_sign_tests(const std::vector<TrialRecord>& records,
                                                  const std::string& baseline = "standard") {
    using TrialKey = std::tuple<std::string, double, std::size_t>;
    std::map<TrialKey, const TrialRecord*> base;
    for (const auto& r : records) {
        if (r.estimator == baseline) base[{r.experiment, r.axis_value, r.trial}] = &r;
    }
    std::map<std::tuple<std::string, double, std::string>, PairedCount> counts;
    for (const auto& r : records) {
        if (r.estimator == baseline) continue;
        auto& pc = counts[{r.experiment, r.axis_value, r.estimator}];
        pc.experiment = r.experiment;
        pc.axis_value = r.axis_value;
        pc.estimator = r.estimator;
        const auto it = base.find({r.experiment, r.axis_value, r.trial});
        if (it == base.end() || it->second->seed != r.seed || !r.ok() || !it->second->ok()) {
            ++pc.unpaired;
            continue;
        }
        const double a = r.sin_theta, b = it->second->sin_theta;
        if (a < b) ++pc.wins;
        else if (a > b) ++pc.losses;
        else ++pc.ties;
    }
    std::vector<PairedCount> out;
    for (auto& [key, pc] : counts) {
        pc.p_value = sign_test_p_value(pc.wins, pc.wins + pc.losses);
        out.push_back(pc);
    }
    return out;
}

inline std::string slopes_to_csv(const std::vector<ReportSlope>& slopes) {
    std::ostringstream out;
    out << "experiment,estimator,metric,points,slope,intercept,r_squared,reference_kind,"
           "reference_slope,status\n";
    const std::string nan = "nan";
    for (const auto& s : slopes) {
        out << s.experiment << ',' << s.estimator << ',' << s.metric << ',' << s.points << ','
            << (s.fit ? format_double(s.fit->slope) : nan) << ','
            << (s.fit ? format_double(s.fit->intercept) : nan) << ','
            << (s.fit ? format_double(s.fit->r_squared) : nan) << ',' << to_string(s.reference_kind)
            << ',' << (s.reference_slope ? format_double(*s.reference_slope) : nan) << ','
            << s.status << '\n';
    }
    return out.str();
}

inline std::string overlay_to_csv(const std::vector<ReportCell>& cells) {
    std::ostringstream out;
    out << "experiment,estimator,axis_value,ok_count,failed_count,median_sin_theta,"
           "median_excess_risk,reference_kind,reference_rate,prop1_lower,ratio_to_lower\n";
    for (const auto& c : cells) {
        out << c.experiment << ',' << c.estimator << ',' << format_double(c.axis_value) << ','
            << c.ok_count << ',' << c.failed_count << ',' << format_double(c.median_sin_theta) << ','
            << format_double(c.median_excess_risk) << ',' << to_string(c.reference_kind) << ','
            << format_double(c.reference_rate) << ',' << format_double(c.lower_rate) << ','
            << format_double(c.median_sin_theta / c.lower_rate) << '\n';
    }
    return out.str();
}

inline std::string paired_to_csv(const std::vector<PairedCount>& counts) {
    std::ostringstream out;
    out << "experiment,axis_value,estimator,baseline,wins,losses,ties,unpaired,sign_test_p\n";
    for (const auto& c : counts) {
        out << c.experiment << ',' << format_double(c.axis_value) << ',' << c.estimator
            << ",standard," << c.wins << ',' << c.losses << ',' << c.ties << ',' << c.unpaired << ','
            << format_double(c.p_value) << '\n';
    }
    return out.str();
}

/// Writes slopes.csv, overlay.csv and paired.csv into `dir`.
inline void write_report(const std::vector<TrialRecord>& records, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    const auto cells = report_cells(records);
    write_file_atomic(dir / "slopes.csv", slopes_to_csv(report_slopes(cells)));
    write_file_atomic(dir / "overlay.csv", overlay_to_csv(cells));
    write_file_atomic(dir / "paired.csv", paired_to_csv(paired_sign_tests(records)));
}

}  // namespace xferlab
