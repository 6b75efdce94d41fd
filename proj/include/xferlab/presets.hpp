#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "xferlab/error.hpp"
#include "xferlab/harness.hpp"
#include "xferlab/verify.hpp"

namespace xferlab {

/// Canonical desk-scale experiments. Most presets are a single sweep; the
/// complementarity preset runs one sweep per attack regime, and the closed
/// form audit is a verify plan rather than a sweep.
struct Preset {
    std::string name;
    std::vector<SweepConfig> sweeps;
    std::optional<VerifyPlan> verify;
};

inline constexpr std::array<std::string_view, 7> kPresetNames = {
    "lemma1_rate_n", "lemma1_rate_T",      "thm1_l2_snr",       "thm2_linf_sparse",
    "thm3_pseudo",   "thm4_pseudo_adv",    "verify_closed_forms"};

namespace detail {

inline SweepConfig base_sweep(std::string experiment, std::uint64_t seed) {
    SweepConfig c;
    c.experiment = std::move(experiment);
    c.ensemble.r = 4;
    c.ensemble.noise_rho = 1.0;
    c.ensemble.noise_kind = NoiseKind::gaussian;
    c.ensemble.target_norm = 1.0;
    c.n_target = 200;
    c.trials = 50;
    c.root_seed = seed;
    c.estimators = {EstimatorSpec{}};
    return c;
}

inline SweepConfig l2_snr_regime(std::string experiment, std::uint64_t seed) {
    SweepConfig c = base_sweep(std::move(experiment), seed);
    c.ensemble.p = 100;
    c.ensemble.T = 80;
    c.ensemble.snr = SnrProfile{SnrKind::two_group, 1.0, 8.0, 0.5};
    c.n_source = 100;
    c.estimators = {EstimatorSpec{},
                    EstimatorSpec{EstimatorKind::adv_l2, EpsilonRule::band_mid, 0.0}};
    return c;
}

inline SweepConfig linf_sparse_regime(std::string experiment, std::uint64_t seed) {
    SweepConfig c = base_sweep(std::move(experiment), seed);
    c.ensemble.p = 512;
    c.ensemble.T = 64;
    c.ensemble.snr.base_norm = 2.0;
    c.ensemble.sparsity = SparsitySpec{SparsityKind::row_sparse, 10};
    c.n_source = 128;
    c.estimators = {EstimatorSpec{},
                    EstimatorSpec{EstimatorKind::adv_linf, EpsilonRule::sparse_rate, 0.0}};
    return c;
}

}  // namespace detail

inline Preset preset(std::string_view name) {
    using detail::base_sweep;
    Preset out{std::string(name), {}, std::nullopt};
    if (name == "lemma1_rate_n") {
        SweepConfig c = base_sweep("lemma1_rate_n", 1001);
        c.ensemble.p = 64;
        c.ensemble.T = 64;
        c.axis = SweepAxis::n;
        c.values = {64, 128, 256, 512, 1024, 2048, 4096};
        out.sweeps.push_back(std::move(c));
    } else if (name == "lemma1_rate_T") {
        SweepConfig c = base_sweep("lemma1_rate_T", 1002);
        c.ensemble.p = 128;
        c.ensemble.T = 64;
        c.n_source = 256;
        c.axis = SweepAxis::T;
        c.values = {16, 32, 64, 128, 256, 512};
        out.sweeps.push_back(std::move(c));
    } else if (name == "thm1_l2_snr") {
        SweepConfig c = detail::l2_snr_regime("thm1_l2_snr", 1003);
        c.axis = SweepAxis::alpha;
        c.values = {4, 8};
        out.sweeps.push_back(std::move(c));
    } else if (name == "thm2_linf_sparse") {
        SweepConfig c = detail::linf_sparse_regime("thm2_linf_sparse", 1004);
        c.axis = SweepAxis::p;
        c.values = {128, 512, 2048};
        out.sweeps.push_back(std::move(c));
    } else if (name == "thm3_pseudo") {
        SweepConfig c = base_sweep("thm3_pseudo", 1005);
        c.ensemble.p = 64;
        c.ensemble.T = 64;
        c.ensemble.snr.base_norm = 4.0;
        c.n_source = 50;
        c.axis = SweepAxis::n_unlabeled;
        c.values = {0, 200, 800};
        out.sweeps.push_back(std::move(c));
    } else if (name == "thm4_pseudo_adv") {
        SweepConfig l2 = detail::l2_snr_regime("thm4_pseudo_adv_l2", 1006);
        l2.axis = SweepAxis::alpha;
        l2.values = {8};
        l2.n_unlabeled = 800;
        SweepConfig linf = detail::linf_sparse_regime("thm4_pseudo_adv_linf", 1007);
        linf.axis = SweepAxis::p;
        linf.values = {512};
        linf.n_unlabeled = 800;
        out.sweeps.push_back(std::move(l2));
        out.sweeps.push_back(std::move(linf));
    } else if (name == "verify_closed_forms") {
        out.verify = VerifyPlan{};
    } else {
        throw ConfigError("unknown preset '" + std::string(name) + "'");
    }
    return out;
}

}  // namespace xferlab
