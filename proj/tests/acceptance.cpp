// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "xferlab/cli.hpp"
#include "xferlab/metrics.hpp"
#include "xferlab/presets.hpp"
#include "xferlab/report.hpp"
#include "xferlab/verify.hpp"

using namespace xferlab;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
    bool pass = true;
    std::ostringstream why;

    void require(bool ok, const std::string& msg) {
        if (!ok) {
            pass = false;
            why << " [" << msg << "]";
        }
    }
};

std::size_t g_threads = 1;
int g_failures = 0;
std::ofstream g_log;

void emit(const std::string& line) {
    std::printf("%s\n", line.c_str());
    std::fflush(stdout);
    if (g_log) g_log << line << '\n' << std::flush;
}

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

void report(int id, const std::string& name, double limit_s, const std::function<void(Outcome&)>& body) {
    Outcome o;
    const auto t0 = Clock::now();
    try {
        body(o);
    } catch (const std::exception& e) {
        o.pass = false;
        o.why << " [exception: " << e.what() << "]";
    }
    const double secs = seconds_since(t0);
    if (secs > limit_s) {
        o.pass = false;
        o.why << " [runtime " << secs << " s over limit " << limit_s << " s]";
    }
    if (!o.pass) ++g_failures;
    char head[256];
    std::snprintf(head, sizeof head, "criterion %d: %s %s (%.1f s)", id, o.pass ? "PASS" : "FAIL", name.c_str(), secs);
    emit(head + o.why.str());
}

std::vector<TrialRecord> run_preset(const std::string& name) {
    std::vector<TrialRecord> out;
    for (const auto& s : preset(name).sweeps) {
        auto recs = run_sweep(s, g_threads);
        out.insert(out.end(), recs.begin(), recs.end());
    }
    return out;
}

std::map<std::string, std::vector<TrialRecord>> g_records;

const ReportCell* find_cell(const std::vector<ReportCell>& cells, const std::string& exp,
                            const std::string& est, double axis) {
    for (const auto& c : cells)
        if (c.experiment == exp && c.estimator == est && c.axis_value == axis) return &c;
    return nullptr;
}

const ReportCell& cell(const std::vector<ReportCell>& cells, const std::string& exp, const std::string& est,
                       double axis) {
    const auto* c = find_cell(cells, exp, est, axis);
    if (!c) throw std::runtime_error("missing cell " + exp + "/" + est);
    return *c;
}

void slope_criterion(Outcome& o, const std::string& name) {
    const auto& recs = g_records[name] = run_preset(name);
    const auto cells = report_cells(recs);
    std::vector<std::pair<double, double>> pts;
    for (const auto& c : cells) pts.emplace_back(c.axis_value, c.median_sin_theta);
    const auto fit = fit_loglog_slope(pts);
    o.why << " slope=" << fit.slope << " r2=" << fit.r_squared;
    o.require(fit.slope >= -0.65 && fit.slope <= -0.35, "slope outside [-0.65, -0.35]");
    if (name == "lemma1_rate_n") o.require(fit.r_squared >= 0.95, "r^2 below 0.95");
}

// Paired wins of `est` over standard at every axis value of one experiment.
void paired_wins(Outcome& o, const std::vector<TrialRecord>& recs, const std::string& exp,
                 const std::string& est, std::optional<double> only_axis = std::nullopt) {
    bool seen = false;
    for (const auto& pc : paired_sign_tests(recs)) {
        if (pc.experiment != exp || pc.estimator != est) continue;
        if (only_axis && pc.axis_value != *only_axis) continue;
        seen = true;
        o.why << " " << exp << "@" << pc.axis_value << " wins=" << pc.wins << "/"
              << (pc.wins + pc.losses + pc.ties + pc.unpaired) << " p=" << pc.p_value;
        o.require(pc.wins >= 40, "fewer than 40 wins at " + std::to_string(pc.axis_value));
        o.require(pc.p_value < 0.01, "sign test p >= 0.01");
    }
    o.require(seen, "no paired counts for " + exp);
}

void criterion1(Outcome& o) {
    const auto s = run_verify(*preset("verify_closed_forms").verify);
    o.why << " rows=" << s.rows.size() << " max_gap=" << s.max_gap << " max_dir_err=" << s.max_direction_error
          << " dir_checks=" << s.direction_checks;
    o.require(s.rows.size() == 100, "expected 100 instances");
    o.require(s.gaps_ok(), "objective gap above 1e-3");
    o.require(s.directions_ok(), "direction error above 1e-2");
}

void criterion4(Outcome& o) {
    const auto& recs = g_records["thm1_l2_snr"] = run_preset("thm1_l2_snr");
    paired_wins(o, recs, "thm1_l2_snr", "adv_l2");
    const auto cells = report_cells(recs);
    auto ratio = [&](double a) {
        return cell(cells, "thm1_l2_snr", "adv_l2", a).median_sin_theta /
               cell(cells, "thm1_l2_snr", "standard", a).median_sin_theta;
    };
    const double r4 = ratio(4), r8 = ratio(8);
    o.why << " ratio@4=" << r4 << " ratio@8=" << r8;
    o.require(r8 < r4, "ratio at alpha 8 not below ratio at alpha 4");
}

void criterion5(Outcome& o) {
    const auto& recs = g_records["thm2_linf_sparse"] = run_preset("thm2_linf_sparse");
    paired_wins(o, recs, "thm2_linf_sparse", "adv_linf", 2048.0);
    const auto cells = report_cells(recs);
    double prev = -1.0;
    for (double p : {128.0, 512.0, 2048.0}) {
        const double ratio = cell(cells, "thm2_linf_sparse", "standard", p).median_sin_theta /
                             cell(cells, "thm2_linf_sparse", "adv_linf", p).median_sin_theta;
        o.why << " std/adv@" << p << "=" << ratio;
        o.require(ratio > prev, "std/adv ratio not strictly increasing at p=" + std::to_string(p));
        prev = ratio;
    }
}

void criterion6(Outcome& o) {
    const auto& recs = g_records["thm3_pseudo"] = run_preset("thm3_pseudo");
    const auto cells = report_cells(recs);
    std::vector<double> med;
    for (double n_u : {0.0, 200.0, 800.0}) {
        med.push_back(cell(cells, "thm3_pseudo", "standard", n_u).median_sin_theta);
        o.why << " median@" << n_u << "=" << med.back();
    }
    o.require(med[1] < med[0] && med[2] < med[1], "median not strictly decreasing");
    o.why << " ratio=" << med[2] / med[0];
    o.require(med[2] <= 0.6 * med[0], "ratio above 0.6");
}

void criterion7(Outcome& o) {
    const auto& recs = g_records["thm4_pseudo_adv"] = run_preset("thm4_pseudo_adv");
    paired_wins(o, recs, "thm4_pseudo_adv_l2", "adv_l2");
    paired_wins(o, recs, "thm4_pseudo_adv_linf", "adv_linf");
}

void criterion8(Outcome& o) {
    std::size_t total = 0, negatives = 0;
    double min_risk = INFINITY;
    std::map<std::pair<std::string, std::string>, std::vector<const TrialRecord*>> groups;
    for (const auto& [name, recs] : g_records) {
        for (const auto& r : recs) {
            if (!r.ok()) continue;
            ++total;
            min_risk = std::min(min_risk, r.excess_risk);
            if (r.excess_risk < -1e-9) ++negatives;
            groups[{r.experiment, r.estimator}].push_back(&r);
        }
    }
    o.why << " records=" << total << " min_risk=" << min_risk;
    o.require(total > 0, "no records from criteria 2-7");
    o.require(negatives == 0, std::to_string(negatives) + " records with excess_risk < -1e-9");
    std::size_t big = 0;
    for (const auto& [key, rs] : groups) {
        if (rs.size() < 200) continue;
        ++big;
        std::vector<double> a, b;
        for (const auto* r : rs) {
            a.push_back(r->sin_theta);
            b.push_back(r->excess_risk);
        }
        const double rho = spearman(a, b);
        o.why << " spearman(" << key.first << "/" << key.second << ")=" << rho;
        o.require(rho >= 0.5, "spearman below 0.5 for " + key.first + "/" + key.second);
    }
    o.require(big > 0, "no cell with at least 200 records");

    SweepConfig smoke;
    smoke.experiment = "noiseless_smoke";
    smoke.ensemble.p = 16;
    smoke.ensemble.r = 2;
    smoke.ensemble.T = 16;
    smoke.ensemble.noise_rho = 1e-12;
    smoke.axis = SweepAxis::n;
    smoke.values = {32};
    smoke.estimators = {EstimatorSpec{}, EstimatorSpec{EstimatorKind::adv_l2, EpsilonRule::fixed, 0.1}};
    smoke.n_target = 32;
    smoke.trials = 5;
    smoke.root_seed = 8;
    double worst = 0.0;
    for (const auto& r : run_sweep(smoke, g_threads)) {
        o.require(r.ok(), "noiseless smoke trial failed: " + r.status);
        worst = std::max(worst, r.excess_risk);
    }
    o.why << " noiseless_max_risk=" << worst;
    o.require(worst <= 1e-8, "noiseless excess risk above 1e-8");
}

void criterion9(Outcome& o) {
    Rng rng = make_rng(99);
    std::normal_distribution<double> g;
    auto gaussian = [&](Eigen::Index r, Eigen::Index c) {
        Matrix m(r, c);
        for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
        return m;
    };
    auto orthogonal = [&](Eigen::Index p) { return random_orthonormal(p, p, rng).basis(); };

    double rot = 0.0, rescale = 0.0, eps0 = 0.0;
    bool support_ok = true;
    for (int rep = 0; rep < 200; ++rep) {
        const Eigen::Index p = 6 + rep % 5, r = 1 + rep % 3;
        const auto e = random_orthonormal(p, r, rng), f = random_orthonormal(p, r, rng);
        const Matrix q = orthogonal(p);
        rot = std::max(rot, std::abs(sin_theta_dist(e, f) -
                                     sin_theta_dist(Representation(q * e.basis()), Representation(q * f.basis()))));

        const Matrix m = e.basis() * gaussian(r, 12);
        const Vector d = (Vector::Random(12).array().abs() + 0.1).matrix();
        rescale = std::max(rescale, sin_theta_dist(top_r_left_singular(m, r),
                                                   top_r_left_singular(m * d.asDiagonal(), r)));

        const Vector mean = gaussian(p, 1).col(0);
        const auto s = fit_standard(mean);
        eps0 = std::max(eps0, (fit_adv_l2(mean, 1e-12).beta - s.beta).norm());
        eps0 = std::max(eps0, (fit_adv_linf(mean, 1e-12).beta - s.beta).norm());

        const double lo = 0.1 + 0.01 * (rep % 7), hi = lo + 0.3;
        const auto a = fit_adv_linf(mean, lo), b = fit_adv_linf(mean, hi);
        for (Eigen::Index j = 0; j < p; ++j)
            if (b.beta(j) != 0.0 && a.beta(j) == 0.0) support_ok = false;
    }
    o.why << " rotation=" << rot << " rescale=" << rescale << " eps0=" << eps0;
    o.require(rot <= 1e-10, "sin_theta not rotation invariant");
    o.require(rescale <= 1e-8, "top-r span moved under column rescaling");
    o.require(eps0 <= 1e-9, "eps->0 reduction failed");
    o.require(support_ok, "l_inf support not monotone in eps");

    auto cfg = preset("thm2_linf_sparse").sweeps.front();
    cfg.values = {128};
    cfg.trials = 6;
    const auto one = run_sweep(cfg, 1), many = run_sweep(cfg, 8);
    bool same = one.size() == many.size();
    for (std::size_t i = 0; same && i < one.size(); ++i)
        same = one[i].seed == many[i].seed && one[i].sin_theta == many[i].sin_theta &&
               one[i].excess_risk == many[i].excess_risk && one[i].target_accuracy == many[i].target_accuracy;
    o.require(same, "records differ between 1 and 8 workers");

    double worst_z = 0.0;
    for (int rep = 0; rep < 10; ++rep) {
        EnsembleSpec spec;
        spec.p = 8;
        spec.r = 2;
        spec.T = 4;
        spec.noise_rho = 0.5 + 0.2 * rep;
        const auto ens = make_ensemble(spec, rng);
        const Vector v = gaussian(8, 1).col(0);
        const double cf = target_accuracy(v, ens, ClosedForm{});
        const MonteCarlo mc{200000};
        const double emp = target_accuracy(v, ens, mc, rng);
        const double se = std::sqrt(std::max(cf * (1 - cf), 1e-12) / static_cast<double>(mc.samples));
        worst_z = std::max(worst_z, std::abs(cf - emp) / se);
    }
    o.why << " accuracy_max_z=" << worst_z;
    o.require(worst_z <= 4.0, "closed-form accuracy disagrees with monte-carlo beyond 4 SE");
}

void criterion10(Outcome& o) {
    const auto it = g_records.find("lemma1_rate_n");
    o.require(it != g_records.end(), "criterion 2 records unavailable");
    if (it == g_records.end()) return;
    const auto cfg = preset("lemma1_rate_n").sweeps.front();
    for (const auto& c : report_cells(it->second)) {
        RateParams prm;
        prm.n = c.axis_value;
        prm.T = static_cast<double>(cfg.ensemble.T);
        prm.p = static_cast<double>(cfg.ensemble.p);
        prm.r = static_cast<double>(cfg.ensemble.r);
        const double lower = reference_rate(RateKind::prop1_lower, prm);
        o.why << " n=" << c.axis_value << ":" << c.median_sin_theta / lower;
        o.require(c.median_sin_theta >= 0.1 * lower, "median below 0.1x lower rate at n=" +
                                                          std::to_string(c.axis_value));
    }
}

}  // namespace

// Optional argument: a file that receives a copy of the criterion lines.
int main(int argc, char** argv) {
    if (argc > 1) g_log.open(argv[1]);
    g_threads = cli::resolve_threads(std::nullopt);
    emit("acceptance: " + std::to_string(g_threads) + " worker thread(s)");
    report(1, "closed-form/oracle equivalence", 60, criterion1);
    report(2, "lemma1 rate in n", 300, [](Outcome& o) { slope_criterion(o, "lemma1_rate_n"); });
    report(3, "lemma1 rate in T", 300, [](Outcome& o) { slope_criterion(o, "lemma1_rate_T"); });
    report(4, "l2 adversarial training under varying snr", 300, criterion4);
    report(5, "l_inf adversarial training under sparsity", 600, criterion5);
    report(6, "pseudo-labeling", 300, criterion6);
    report(7, "pseudo-labeling plus adversarial training", 600, criterion7);
    report(8, "excess-risk properties", 600, criterion8);
    report(9, "invariant suite", 180, criterion9);
    report(10, "lower-bound overlay", 60, criterion10);
    emit("acceptance: " + std::to_string(g_failures) + " criterion failure(s)");
    return g_failures == 0 ? 0 : 1;
}
