#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <limits>
#include <map>
#include <string>
#include <string_view>
#include <thread>
#include <tuple>
#include <vector>

#include "xferlab/datagen.hpp"
#include "xferlab/error.hpp"
#include "xferlab/metrics.hpp"
#include "xferlab/pipeline.hpp"
#include "xferlab/random.hpp"
#include "xferlab/train.hpp"

namespace xferlab {

enum class SweepAxis { n, T, p, epsilon, alpha, n_unlabeled };

inline std::string_view to_string(SweepAxis a) {
    switch (a) {
        case SweepAxis::n: return "n";
        case SweepAxis::T: return "T";
        case SweepAxis::p: return "p";
        case SweepAxis::epsilon: return "epsilon";
        case SweepAxis::alpha: return "alpha";
        case SweepAxis::n_unlabeled: return "n_unlabeled";
    }
    return "unknown";
}

inline SweepAxis sweep_axis_from_string(std::string_view s) {
    if (s == "n") return SweepAxis::n;
    if (s == "T") return SweepAxis::T;
    if (s == "p") return SweepAxis::p;
    if (s == "epsilon") return SweepAxis::epsilon;
    if (s == "alpha") return SweepAxis::alpha;
    if (s == "n_unlabeled") return SweepAxis::n_unlabeled;
    throw ConfigError("unknown sweep axis '" + std::string(s) + "'");
}

/// How an adversarial estimator's budget is chosen in each cell.
///  fixed:       the configured value
///  band_mid:    midpoint of the weak/strong norm band of the cell's ensemble
///  sparse_rate: 2 sqrt(ln p / m), m the per-task sample count (labeled plus
///               pseudo-labeled)
enum class EpsilonRule { fixed, band_mid, sparse_rate };

inline constexpr double kSparseRateScale = 2.0;

struct EstimatorSpec {
    EstimatorKind kind = EstimatorKind::standard;
    EpsilonRule rule = EpsilonRule::fixed;
    double epsilon = 0.0;

    std::string tag() const { return std::string(to_string(kind)); }
};

struct SweepConfig {
    std::string experiment = "custom";
    EnsembleSpec ensemble;
    SweepAxis axis = SweepAxis::n;
    std::vector<double> values;
    std::vector<EstimatorSpec> estimators;
    std::size_t n_source = 100;
    std::size_t n_target = 100;
    std::size_t n_unlabeled = 0;
    std::size_t trials = 50;
    std::uint64_t root_seed = 0;

    void validate() const;
};

struct TrialRecord {
    std::string experiment;
    double axis_value = 0.0;
    std::string estimator;
    std::size_t trial = 0;
    std::uint64_t seed = 0;
    std::size_t p = 0, r = 0, T = 0, n = 0, n_target = 0, n_unlabeled = 0;
    double epsilon = 0.0;
    double alpha = 1.0;
    std::size_t support_size = 0;
    double sin_theta = std::numeric_limits<double>::quiet_NaN();
    double excess_risk = std::numeric_limits<double>::quiet_NaN();
    double target_accuracy = std::numeric_limits<double>::quiet_NaN();
    std::size_t suppressed_count = 0;
    double wall_ms = 0.0;
    std::string status = "ok";

    bool ok() const { return status == "ok"; }
};

namespace detail {

inline bool is_integral(double v) { return std::floor(v) == v; }

inline bool axis_is_count(SweepAxis a) {
    return a == SweepAxis::n || a == SweepAxis::T || a == SweepAxis::p ||
           a == SweepAxis::n_unlabeled;
}

}  // namespace detail

inline void SweepConfig::validate() const {
    if (values.empty()) throw ConfigError("sweep values must be nonempty");
    if (estimators.empty()) throw ConfigError("estimator list must be nonempty");
    if (trials < 1) throw ConfigError("trials must be >= 1");
    if (n_source < 1 || n_target < 1) throw ConfigError("n_source and n_target must be >= 1");
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double v = values[i];
        // An unlabeled-pool sweep may start from the no-augmentation baseline.
        const bool zero_ok = axis == SweepAxis::n_unlabeled && i == 0;
        if (!(v > 0.0 || (zero_ok && v == 0.0))) throw ConfigError("sweep values must be positive");
        if (i > 0 && !(v > values[i - 1])) throw ConfigError("sweep values must be strictly ascending");
        if (detail::axis_is_count(axis) && !detail::is_integral(v)) {
            throw ConfigError("sweep values on axis '" + std::string(to_string(axis)) +
                              "' must be integers");
        }
    }
    if (trials >= 1000) throw ConfigError("trials must be below 1000 for seed splitting");
    if (values.size() >= 1000000) throw ConfigError("too many sweep values");
    std::vector<std::string> tags;
    for (const auto& est : estimators) {
        tags.push_back(est.tag());
        if (est.kind == EstimatorKind::standard) {
            if (est.rule != EpsilonRule::fixed || est.epsilon != 0.0) {
                throw ConfigError("standard estimator requires epsilon = 0");
            }
        } else if (est.rule == EpsilonRule::fixed && axis != SweepAxis::epsilon &&
                   !(est.epsilon > 0.0)) {
            throw ConfigError("adversarial estimator requires epsilon > 0");
        }
        if (est.rule == EpsilonRule::band_mid && ensemble.snr.kind != SnrKind::two_group) {
            throw ConfigError("band_mid epsilon requires a two_group snr profile");
        }
    }
    std::sort(tags.begin(), tags.end());
    if (std::adjacent_find(tags.begin(), tags.end()) != tags.end()) {
        throw ConfigError("estimator kinds must be distinct within a sweep");
    }
    if (axis == SweepAxis::alpha && ensemble.snr.kind != SnrKind::two_group) {
        throw ConfigError("alpha axis requires a two_group snr profile");
    }
    // Every cell's ensemble must be valid; checking the extremes covers the
    // monotone constraints.
    for (double v : {values.front(), values.back()}) {
        EnsembleSpec spec = ensemble;
        if (axis == SweepAxis::T) spec.T = static_cast<std::size_t>(v);
        if (axis == SweepAxis::p) spec.p = static_cast<std::size_t>(v);
        if (axis == SweepAxis::alpha) spec.snr.alpha = v;
        spec.validate();
    }
}

/// Trial-level data seed. Excludes the estimator so every estimator in a
/// cell sees identical data. The root is mixed first: XOR against a raw
/// root only permutes trials between roots that differ in their low bits.
inline std::uint64_t trial_seed(std::uint64_t root_seed, std::size_t axis_index, std::size_t trial) {
    return mix64(mix64(root_seed) ^ (static_cast<std::uint64_t>(axis_index) * 1000000ULL +
                              static_cast<std::uint64_t>(trial)));
}

/// Everything shared by the estimators of one (axis value, trial) cell.
struct CellData {
    EnsembleSpec spec;
    std::size_t n_source = 0;
    std::size_t n_unlabeled = 0;
    std::uint64_t seed = 0;
    TaskEnsemble ensemble;
    Matrix source_means;  // p x T; means of the (possibly augmented) source sets
    Vector target_mean;
};

inline EnsembleSpec cell_spec(const SweepConfig& cfg, double axis_value) {
    EnsembleSpec spec = cfg.ensemble;
    if (cfg.axis == SweepAxis::T) spec.T = static_cast<std::size_t>(axis_value);
    if (cfg.axis == SweepAxis::p) spec.p = static_cast<std::size_t>(axis_value);
    if (cfg.axis == SweepAxis::alpha) spec.snr.alpha = axis_value;
    return spec;
}

/// Draws the ensemble and all datasets of one cell. Task data are generated
/// one task at a time in source order (labeled, then unlabeled), then the
/// target, and reduced to their empirical means so memory stays O(p T).
inline CellData make_cell(const SweepConfig& cfg, std::size_t axis_index, std::size_t trial) {
    const double v = cfg.values.at(axis_index);
    const EnsembleSpec spec = cell_spec(cfg, v);
    const std::size_t n = cfg.axis == SweepAxis::n ? static_cast<std::size_t>(v) : cfg.n_source;
    const std::size_t n_u =
        cfg.axis == SweepAxis::n_unlabeled ? static_cast<std::size_t>(v) : cfg.n_unlabeled;
    const std::uint64_t seed = trial_seed(cfg.root_seed, axis_index, trial);

    Rng rng = make_rng(seed);
    TaskEnsemble ens = make_ensemble(spec, rng);
    Matrix means(static_cast<Eigen::Index>(spec.p), static_cast<Eigen::Index>(spec.T));
    for (std::size_t t = 0; t < spec.T; ++t) {
        const auto labeled = sample_dataset(ens, t, static_cast<Eigen::Index>(n), rng);
        if (n_u > 0) {
            const Matrix pool = sample_unlabeled(ens, t, static_cast<Eigen::Index>(n_u), rng);
            means.col(static_cast<Eigen::Index>(t)) =
                empirical_mean_direction(augment_with_pseudo_labels(labeled, pool));
        } else {
            means.col(static_cast<Eigen::Index>(t)) = empirical_mean_direction(labeled);
        }
    }
    const auto target =
        sample_dataset(ens, ens.target_index(), static_cast<Eigen::Index>(cfg.n_target), rng);
    Vector target_mean = empirical_mean_direction(target);
    return CellData{spec, n, n_u, seed, std::move(ens), std::move(means), std::move(target_mean)};
}

inline double resolve_epsilon(const SweepConfig& cfg, const EstimatorSpec& est, double axis_value,
                              const CellData& cell) {
    if (est.kind == EstimatorKind::standard) return 0.0;
    if (cfg.axis == SweepAxis::epsilon) return axis_value;
    switch (est.rule) {
        case EpsilonRule::fixed: return est.epsilon;
        case EpsilonRule::band_mid: return epsilon_band(cell.ensemble).mid;
        case EpsilonRule::sparse_rate:
            return kSparseRateScale * std::sqrt(std::log(static_cast<double>(cell.spec.p)) /
                                                static_cast<double>(cell.n_source + cell.n_unlabeled));
    }
    throw ConfigError("unknown epsilon rule");
}

inline constexpr std::size_t kMonteCarloAccuracySamples = 20000;

namespace detail {

inline TrialRecord blank_record(const SweepConfig& cfg, std::size_t axis_index,
                                const EstimatorSpec& est, std::size_t trial) {
    const double v = cfg.values.at(axis_index);
    const EnsembleSpec spec = cell_spec(cfg, v);
    TrialRecord rec;
    rec.experiment = cfg.experiment;
    rec.axis_value = v;
    rec.estimator = est.tag();
    rec.trial = trial;
    rec.seed = trial_seed(cfg.root_seed, axis_index, trial);
    rec.p = spec.p;
    rec.r = spec.r;
    rec.T = spec.T;
    rec.n = cfg.axis == SweepAxis::n ? static_cast<std::size_t>(v) : cfg.n_source;
    rec.n_target = cfg.n_target;
    rec.n_unlabeled =
        cfg.axis == SweepAxis::n_unlabeled ? static_cast<std::size_t>(v) : cfg.n_unlabeled;
    rec.epsilon = est.kind == EstimatorKind::standard ? 0.0 : est.epsilon;
    if (est.kind != EstimatorKind::standard && cfg.axis == SweepAxis::epsilon) rec.epsilon = v;
    rec.alpha = spec.snr.kind == SnrKind::two_group ? spec.snr.alpha : 1.0;
    rec.support_size =
        spec.sparsity.kind == SparsityKind::row_sparse ? spec.sparsity.support_size : spec.p;
    return rec;
}

}  // namespace detail

/// Runs one estimator on a prepared cell.
inline TrialRecord evaluate_estimator(const SweepConfig& cfg, std::size_t axis_index,
                                      std::size_t estimator_index, std::size_t trial,
                                      const CellData& cell) {
    const auto& est = cfg.estimators.at(estimator_index);
    TrialRecord rec = detail::blank_record(cfg, axis_index, est, trial);
    try {
        const double eps = resolve_epsilon(cfg, est, rec.axis_value, cell);
        rec.epsilon = eps;
        const auto start = std::chrono::steady_clock::now();
        const TransferOutput out = transfer_from_means(
            cell.source_means, cell.target_mean, static_cast<Eigen::Index>(cell.spec.r),
            EstimatorConfig{est.kind, eps});
        const auto stop = std::chrono::steady_clock::now();
        rec.wall_ms = std::chrono::duration<double, std::milli>(stop - start).count();
        rec.sin_theta = representation_error(out.W1, cell.ensemble);
        rec.excess_risk = excess_risk(out, cell.ensemble);
        if (cell.ensemble.noise_kind == NoiseKind::gaussian) {
            rec.target_accuracy = target_accuracy(out, cell.ensemble, ClosedForm{});
        } else {
            Rng acc_rng = make_rng(cell.seed ^ (0xacc0000ULL + estimator_index));
            rec.target_accuracy = target_accuracy(out.predictor(), cell.ensemble,
                                                  MonteCarlo{kMonteCarloAccuracySamples}, acc_rng);
        }
        rec.suppressed_count = out.suppressed_count();
    } catch (const Error& e) {
        rec.status = "error:" + e.tag();
    }
    return rec;
}

namespace detail {

inline std::vector<TrialRecord> run_cell(const SweepConfig& cfg, std::size_t axis_index,
                                         std::size_t trial) {
    std::vector<TrialRecord> out;
    out.reserve(cfg.estimators.size());
    try {
        const CellData cell = make_cell(cfg, axis_index, trial);
        for (std::size_t e = 0; e < cfg.estimators.size(); ++e) {
            out.push_back(evaluate_estimator(cfg, axis_index, e, trial, cell));
        }
    } catch (const Error& err) {
        out.clear();
        for (const auto& est : cfg.estimators) {
            TrialRecord rec = blank_record(cfg, axis_index, est, trial);
            rec.status = "error:" + err.tag();
            out.push_back(std::move(rec));
        }
    }
    return out;
}

}  // namespace detail

/// One draw of the generative model plus one pipeline run for one estimator.
inline TrialRecord run_trial(const SweepConfig& cfg, std::size_t axis_index,
                             std::size_t estimator_index, std::size_t trial) {
    auto recs = detail::run_cell(cfg, axis_index, trial);
    return recs.at(estimator_index);
}

inline std::size_t default_parallelism() {
    return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

/// Executes every (axis value x estimator x trial) cell on a bounded worker
/// pool. Output is sorted by (axis value, estimator order, trial) and is
/// identical for any `parallelism`.
inline std::vector<TrialRecord> run_sweep(const SweepConfig& cfg, std::size_t parallelism) {
    cfg.validate();
    if (parallelism < 1) throw ConfigError("parallelism must be >= 1");
    const std::size_t cells = cfg.values.size() * cfg.trials;
    std::vector<std::vector<TrialRecord>> slots(cells);
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::atomic<bool> failed{false};

    auto worker = [&] {
        for (;;) {
            const std::size_t job = next.fetch_add(1);
            if (job >= cells || failed.load()) return;
            try {
                slots[job] = detail::run_cell(cfg, job / cfg.trials, job % cfg.trials);
            } catch (...) {
                if (!failed.exchange(true)) failure = std::current_exception();
                return;
            }
        }
    };

    const std::size_t workers = std::min(parallelism, cells);
    if (workers <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (std::size_t i = 0; i < workers; ++i) pool.emplace_back(worker);
    }
    if (failure) std::rethrow_exception(failure);

    std::vector<TrialRecord> records;
    records.reserve(cells * cfg.estimators.size());
    for (std::size_t a = 0; a < cfg.values.size(); ++a) {
        for (std::size_t e = 0; e < cfg.estimators.size(); ++e) {
            for (std::size_t t = 0; t < cfg.trials; ++t) {
                records.push_back(std::move(slots[a * cfg.trials + t][e]));
            }
        }
    }
    return records;
}

struct Quartiles {
    double q25 = 0.0, median = 0.0, q75 = 0.0;
};

/// Linear-interpolation quantile on sorted data.
inline double quantile_sorted(const std::vector<double>& sorted, double q) {
    if (sorted.empty()) return std::numeric_limits<double>::quiet_NaN();
    const double h = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline Quartiles quartiles(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    return Quartiles{quantile_sorted(values, 0.25), quantile_sorted(values, 0.5),
                     quantile_sorted(values, 0.75)};
}

struct AggregateRecord {
    std::string experiment;
    double axis_value = 0.0;
    std::string estimator;
    Quartiles sin_theta, excess_risk, target_accuracy, suppressed_count;
    std::size_t trial_count = 0;
    std::size_t failed_count = 0;
};

/// Per (experiment, axis value, estimator) quartiles over successful trials.
inline std::vector<AggregateRecord> aggregate(const std::vector<TrialRecord>& records) {
    using Key = std::tuple<std::string, double, std::string>;
    struct Bucket {
        std::vector<double> sin, risk, acc, supp;
        std::size_t failed = 0;
    };
    std::map<Key, Bucket> buckets;
    for (const auto& r : records) {
        auto& b = buckets[Key{r.experiment, r.axis_value, r.estimator}];
        if (!r.ok()) {
            ++b.failed;
            continue;
        }
        b.sin.push_back(r.sin_theta);
        b.risk.push_back(r.excess_risk);
        b.acc.push_back(r.target_accuracy);
        b.supp.push_back(static_cast<double>(r.suppressed_count));
    }
    std::vector<AggregateRecord> out;
    out.reserve(buckets.size());
    for (auto& [key, b] : buckets) {
        AggregateRecord agg;
        std::tie(agg.experiment, agg.axis_value, agg.estimator) = key;
        agg.trial_count = b.sin.size();
        agg.failed_count = b.failed;
        agg.sin_theta = quartiles(std::move(b.sin));
        agg.excess_risk = quartiles(std::move(b.risk));
        agg.target_accuracy = quartiles(std::move(b.acc));
        agg.suppressed_count = quartiles(std::move(b.supp));
        out.push_back(std::move(agg));
    }
    return out;
}

}  // namespace xferlab
