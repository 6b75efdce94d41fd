#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "xferlab/datagen.hpp"
#include "xferlab/error.hpp"
#include "xferlab/pipeline.hpp"
#include "xferlab/subspace.hpp"

namespace xferlab {

struct EvalReport {
    double sin_theta = 0.0;
    double excess_risk = 0.0;
    double target_accuracy = 0.5;
    std::size_t suppressed_count = 0;
};

inline double representation_error(const Representation& w1, const TaskEnsemble& ens) {
    return sin_theta_dist(w1, ens.B);
}

/// L(W1, w2) - min L on the target task, i.e. |mu| - <W1 w2, mu>.
inline double excess_risk(const Representation& w1, const Vector& w2, const TaskEnsemble& ens) {
    const Vector mu = ens.mean(ens.target_index());
    return mu.norm() - (w1.basis() * w2).dot(mu);
}

inline double excess_risk(const TransferOutput& out, const TaskEnsemble& ens) {
    return excess_risk(out.W1, out.w2, ens);
}

inline double standard_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

struct ClosedForm {};
struct MonteCarlo {
    std::size_t samples = 100000;
};

/// Probability that sign(<v, x>) matches y under gaussian noise, with v the
/// normalized predictor. Zero predictor scores chance.
inline double target_accuracy(const Vector& predictor, const TaskEnsemble& ens, ClosedForm) {
    if (ens.noise_kind != NoiseKind::gaussian) {
        throw UnsupportedError("closed-form accuracy requires gaussian noise");
    }
    const double norm = predictor.norm();
    if (norm == 0.0) return 0.5;
    const Vector mu = ens.mean(ens.target_index());
    return standard_normal_cdf(predictor.dot(mu) / norm / ens.noise_rho);
}

/// Empirical 0-1 accuracy of sign(<v, x>) on fresh target samples.
inline double target_accuracy(const Vector& predictor, const TaskEnsemble& ens, MonteCarlo mode,
                              Rng& rng) {
    if (mode.samples == 0) throw ContractError("monte-carlo accuracy needs samples > 0");
    if (predictor.norm() == 0.0) return 0.5;
    const auto ds = sample_dataset(ens, ens.target_index(),
                                   static_cast<Eigen::Index>(mode.samples), rng);
    const Vector scores = ds.inputs * predictor;
    std::size_t correct = 0;
    for (Eigen::Index i = 0; i < scores.size(); ++i) {
        const double decision = scores(i) >= 0.0 ? 1.0 : -1.0;
        if (decision == ds.labels(i)) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(mode.samples);
}

inline double target_accuracy(const TransferOutput& out, const TaskEnsemble& ens, ClosedForm m) {
    return target_accuracy(out.predictor(), ens, m);
}

struct SlopeFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
};

/// OLS of ln y on ln x.
inline SlopeFit fit_loglog_slope(std::span<const std::pair<double, double>> points) {
    if (points.size() < 3) throw ContractError("log-log fit needs at least 3 points");
    std::vector<double> lx, ly;
    for (const auto& [x, y] : points) {
        if (!(x > 0.0) || !(y > 0.0)) throw DomainError("log-log fit needs strictly positive points");
        lx.push_back(std::log(x));
        ly.push_back(std::log(y));
    }
    const double n = static_cast<double>(lx.size());
    const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / n;
    const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        sxx += (lx[i] - mx) * (lx[i] - mx);
        sxy += (lx[i] - mx) * (ly[i] - my);
        syy += (ly[i] - my) * (ly[i] - my);
    }
    if (sxx == 0.0) throw DomainError("log-log fit needs at least two distinct x values");
    SlopeFit out;
    out.slope = sxy / sxx;
    out.intercept = my - out.slope * mx;
    // A constant response is fit exactly.
    out.r_squared = syy == 0.0 ? 1.0 : std::clamp(sxy * sxy / (sxx * syy), 0.0, 1.0);
    return out;
}

enum class RateKind { lemma1_n, lemma1_T, thm1_l2, thm2_linf, thm3_pseudo, prop1_lower };

inline std::string_view to_string(RateKind k) {
    switch (k) {
        case RateKind::lemma1_n: return "lemma1_n";
        case RateKind::lemma1_T: return "lemma1_T";
        case RateKind::thm1_l2: return "thm1_l2";
        case RateKind::thm2_linf: return "thm2_linf";
        case RateKind::thm3_pseudo: return "thm3_pseudo";
        case RateKind::prop1_lower: return "prop1_lower";
    }
    return "unknown";
}

struct RateParams {
    std::optional<double> n, T, p, r, s, alpha_T, n_tilde;
};

namespace detail {

inline double need(const std::optional<double>& v, const char* name) {
    if (!v) throw ConfigError(std::string("reference rate needs parameter '") + name + "'");
    if (!(*v > 0.0)) throw DomainError(std::string("reference rate parameter '") + name + "' must be positive");
    return *v;
}

inline double standard_rate(double r, double n, double p, double T) {
    return r * (std::sqrt(1.0 / n) + std::sqrt(p / (n * T)) + std::sqrt(std::log(n) / (n * T)));
}

}  // namespace detail

/// Rate expressions with every hidden constant set to 1. Shape overlays only.
inline double reference_rate(RateKind kind, const RateParams& prm) {
    using detail::need;
    switch (kind) {
        case RateKind::lemma1_n:
        case RateKind::lemma1_T:
            return detail::standard_rate(need(prm.r, "r"), need(prm.n, "n"), need(prm.p, "p"),
                                         need(prm.T, "T"));
        case RateKind::thm1_l2:
            return detail::standard_rate(need(prm.r, "r"), need(prm.n, "n"), need(prm.p, "p"),
                                         need(prm.T, "T")) /
                   need(prm.alpha_T, "alpha_T");
        case RateKind::thm2_linf: {
            const double r = need(prm.r, "r"), n = need(prm.n, "n"), s = need(prm.s, "s");
            const double T = need(prm.T, "T"), p = need(prm.p, "p");
            return r * (std::sqrt(1.0 / n) + std::sqrt(s * s / (n * T))) * std::log(T + p);
        }
        case RateKind::thm3_pseudo:
            return detail::standard_rate(need(prm.r, "r"), need(prm.n_tilde, "n_tilde"),
                                         need(prm.p, "p"), need(prm.T, "T"));
        case RateKind::prop1_lower: {
            const double r = need(prm.r, "r"), p = need(prm.p, "p");
            const double n = need(prm.n, "n"), T = need(prm.T, "T");
            return std::sqrt(r * p / (n * T));
        }
    }
    throw ConfigError("unknown reference rate kind");
}

/// Average ranks (1-based), ties share the mean rank.
inline std::vector<double> average_ranks(std::span<const double> values) {
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(values.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
        const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
        i = j + 1;
    }
    return ranks;
}

inline double pearson(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size() || a.size() < 2) throw ContractError("correlation needs >= 2 paired values");
    const double n = static_cast<double>(a.size());
    const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
    const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    if (saa == 0.0 || sbb == 0.0) return 0.0;
    return sab / std::sqrt(saa * sbb);
}

inline double spearman(std::span<const double> a, std::span<const double> b) {
    const auto ra = average_ranks(a);
    const auto rb = average_ranks(b);
    return pearson(ra, rb);
}

}  // namespace xferlab
