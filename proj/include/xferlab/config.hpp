#pragma once

#include <openssl/evp.h>

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "xferlab/error.hpp"
#include "xferlab/harness.hpp"

namespace xferlab {

using Json = nlohmann::json;

namespace detail {

inline void reject_unknown_keys(const Json& obj, std::initializer_list<std::string_view> allowed,
                                std::string_view where) {
    if (!obj.is_object()) throw ConfigError(std::string(where) + " must be a JSON object");
    for (const auto& [key, _] : obj.items()) {
        bool known = false;
        for (auto a : allowed) known = known || key == a;
        if (!known) throw ConfigError("unknown key '" + key + "' in " + std::string(where));
    }
}

template <typename T>
T get_or(const Json& obj, const char* key, T fallback) {
    if (!obj.contains(key)) return fallback;
    return obj.at(key).get<T>();
}

inline std::size_t get_count(const Json& obj, const char* key, std::size_t fallback,
                             std::string_view where) {
    if (!obj.contains(key)) return fallback;
    const auto& v = obj.at(key);
    if (!v.is_number_integer() || v.get<std::int64_t>() < 0) {
        throw ConfigError(std::string(where) + "." + key + " must be a nonnegative integer");
    }
    return v.get<std::size_t>();
}

inline std::size_t require_count(const Json& obj, const char* key, std::string_view where) {
    if (!obj.contains(key)) throw ConfigError("missing key '" + std::string(key) + "' in " + std::string(where));
    return get_count(obj, key, 0, where);
}

inline SnrKind snr_kind_from(std::string_view s) {
    if (s == "uniform") return SnrKind::uniform;
    if (s == "two_group") return SnrKind::two_group;
    throw ConfigError("unknown snr kind '" + std::string(s) + "'");
}

inline SparsityKind sparsity_kind_from(std::string_view s) {
    if (s == "dense") return SparsityKind::dense;
    if (s == "row_sparse") return SparsityKind::row_sparse;
    throw ConfigError("unknown sparsity kind '" + std::string(s) + "'");
}

inline NoiseKind noise_kind_from(std::string_view s) {
    if (s == "gaussian") return NoiseKind::gaussian;
    if (s == "bounded_uniform") return NoiseKind::bounded_uniform;
    throw ConfigError("unknown noise kind '" + std::string(s) + "'");
}

inline EnsembleSpec ensemble_from_json(const Json& j) {
    reject_unknown_keys(j, {"p", "r", "T", "snr", "sparsity", "noise", "target_norm"}, "ensemble");
    EnsembleSpec e;
    e.p = require_count(j, "p", "ensemble");
    e.r = require_count(j, "r", "ensemble");
    e.T = require_count(j, "T", "ensemble");
    if (j.contains("snr")) {
        const auto& s = j.at("snr");
        reject_unknown_keys(s, {"kind", "base_norm", "alpha", "frac_strong"}, "ensemble.snr");
        e.snr.kind = snr_kind_from(get_or<std::string>(s, "kind", "uniform"));
        e.snr.base_norm = get_or<double>(s, "base_norm", 1.0);
        e.snr.alpha = get_or<double>(s, "alpha", 1.0);
        e.snr.frac_strong = get_or<double>(s, "frac_strong", 0.5);
    }
    if (j.contains("sparsity")) {
        const auto& s = j.at("sparsity");
        reject_unknown_keys(s, {"kind", "support_size"}, "ensemble.sparsity");
        e.sparsity.kind = sparsity_kind_from(get_or<std::string>(s, "kind", "dense"));
        e.sparsity.support_size = get_count(s, "support_size", 0, "ensemble.sparsity");
    }
    if (j.contains("noise")) {
        const auto& s = j.at("noise");
        reject_unknown_keys(s, {"kind", "rho"}, "ensemble.noise");
        e.noise_kind = noise_kind_from(get_or<std::string>(s, "kind", "gaussian"));
        e.noise_rho = get_or<double>(s, "rho", 1.0);
    }
    e.target_norm = get_or<double>(j, "target_norm", 1.0);
    return e;
}

inline EstimatorSpec estimator_from_json(const Json& j) {
    reject_unknown_keys(j, {"kind", "epsilon"}, "estimators[]");
    if (!j.contains("kind")) throw ConfigError("missing key 'kind' in estimators[]");
    EstimatorSpec est;
    est.kind = estimator_kind_from_string(j.at("kind").get<std::string>());
    if (j.contains("epsilon")) {
        const auto& eps = j.at("epsilon");
        if (eps.is_number()) {
            est.epsilon = eps.get<double>();
        } else if (eps.is_string()) {
            const auto rule = eps.get<std::string>();
            if (rule == "band_mid") est.rule = EpsilonRule::band_mid;
            else if (rule == "sparse_rate") est.rule = EpsilonRule::sparse_rate;
            else throw ConfigError("unknown epsilon rule '" + rule + "'");
        } else {
            throw ConfigError("estimators[].epsilon must be a number or a rule name");
        }
    }
    return est;
}

inline std::string_view to_string(SnrKind k) { return k == SnrKind::uniform ? "uniform" : "two_group"; }
inline std::string_view to_string(SparsityKind k) { return k == SparsityKind::dense ? "dense" : "row_sparse"; }
inline std::string_view to_string(NoiseKind k) {
    return k == NoiseKind::gaussian ? "gaussian" : "bounded_uniform";
}

}  // namespace detail

/// Parses and validates a sweep config. Unknown keys at any level are
/// rejected. JSON syntax errors surface with line and column.
inline SweepConfig sweep_config_from_json(const Json& j) {
    using namespace detail;
    try {
        reject_unknown_keys(j, {"experiment", "ensemble", "sweep", "estimators", "n_source",
                                "n_target", "n_unlabeled", "trials", "seed"},
                            "config");
        SweepConfig c;
        c.experiment = get_or<std::string>(j, "experiment", "custom");
        if (c.experiment.empty() || c.experiment.find_first_of(",\"\n\r") != std::string::npos) {
            throw ConfigError("experiment name must be nonempty and free of commas, quotes, newlines");
        }
        if (!j.contains("ensemble")) throw ConfigError("missing key 'ensemble' in config");
        c.ensemble = ensemble_from_json(j.at("ensemble"));
        if (!j.contains("sweep")) throw ConfigError("missing key 'sweep' in config");
        const auto& sw = j.at("sweep");
        reject_unknown_keys(sw, {"axis", "values"}, "sweep");
        if (!sw.contains("axis") || !sw.contains("values")) {
            throw ConfigError("sweep needs 'axis' and 'values'");
        }
        c.axis = sweep_axis_from_string(sw.at("axis").get<std::string>());
        c.values = sw.at("values").get<std::vector<double>>();
        if (!j.contains("estimators") || !j.at("estimators").is_array()) {
            throw ConfigError("config needs an 'estimators' array");
        }
        for (const auto& e : j.at("estimators")) c.estimators.push_back(estimator_from_json(e));
        c.n_source = get_count(j, "n_source", 100, "config");
        c.n_target = get_count(j, "n_target", 200, "config");
        c.n_unlabeled = get_count(j, "n_unlabeled", 0, "config");
        c.trials = get_count(j, "trials", 50, "config");
        if (j.contains("seed")) {
            if (!j.at("seed").is_number_integer()) throw ConfigError("seed must be an integer");
            c.root_seed = j.at("seed").get<std::uint64_t>();
        }
        c.validate();
        return c;
    } catch (const Json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
}

/// Fully resolved (defaults applied) form; the digest is taken over this.
inline Json to_json(const SweepConfig& c) {
    using detail::to_string;
    Json est = Json::array();
    for (const auto& e : c.estimators) {
        Json item{{"kind", std::string(xferlab::to_string(e.kind))}};
        switch (e.rule) {
            case EpsilonRule::fixed: item["epsilon"] = e.epsilon; break;
            case EpsilonRule::band_mid: item["epsilon"] = "band_mid"; break;
            case EpsilonRule::sparse_rate: item["epsilon"] = "sparse_rate"; break;
        }
        est.push_back(std::move(item));
    }
    const auto& en = c.ensemble;
    return Json{
        {"experiment", c.experiment},
        {"ensemble",
         {{"p", en.p},
          {"r", en.r},
          {"T", en.T},
          {"snr",
           {{"kind", std::string(to_string(en.snr.kind))},
            {"base_norm", en.snr.base_norm},
            {"alpha", en.snr.alpha},
            {"frac_strong", en.snr.frac_strong}}},
          {"sparsity",
           {{"kind", std::string(to_string(en.sparsity.kind))},
            {"support_size", en.sparsity.support_size}}},
          {"noise", {{"kind", std::string(to_string(en.noise_kind))}, {"rho", en.noise_rho}}},
          {"target_norm", en.target_norm}}},
        {"sweep", {{"axis", std::string(xferlab::to_string(c.axis))}, {"values", c.values}}},
        {"estimators", std::move(est)},
        {"n_source", c.n_source},
        {"n_target", c.n_target},
        {"n_unlabeled", c.n_unlabeled},
        {"trials", c.trials},
        {"seed", c.root_seed}};
}

inline SweepConfig load_sweep_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    Json j;
    try {
        j = Json::parse(buf.str());
    } catch (const Json::parse_error& e) {
        throw ConfigError("malformed JSON in '" + path + "': " + e.what());
    }
    return sweep_config_from_json(j);
}

inline std::string sha256_hex(std::string_view data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw std::runtime_error("SHA-256 digest failed");
    }
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xf]);
    }
    return out;
}

/// Digest of the resolved configs, in order. Keys are serialized sorted, so
/// it changes iff a resolved field changes.
inline std::string config_digest(const std::vector<SweepConfig>& configs) {
    Json arr = Json::array();
    for (const auto& c : configs) arr.push_back(to_json(c));
    return sha256_hex(arr.dump());
}

}  // namespace xferlab
