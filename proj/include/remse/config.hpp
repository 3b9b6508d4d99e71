#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "remse/common.hpp"
#include "remse/model.hpp"
#include "remse/poisson.hpp"
#include "remse/simulate.hpp"

namespace remse {

using nlohmann::json;

namespace detail {

inline void reject_unknown_keys(const json& obj, const std::set<std::string>& allowed,
                                const std::string& where) {
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (!allowed.count(it.key()))
            throw input_error("unknown key '" + it.key() + "' in " + where);
}

inline const json& require(const json& obj, const std::string& key, const std::string& where) {
    auto it = obj.find(key);
    if (it == obj.end()) throw input_error("missing key '" + key + "' in " + where);
    return *it;
}

inline StatisticSpec parse_stat(const json& j, const std::string& where) {
    if (!j.is_object()) throw input_error(where + ": statistic entries must be objects");
    reject_unknown_keys(j, {"kind", "covariate"}, where);
    StatisticSpec spec;
    spec.kind = StatisticSpec::kind_from_string(
        require(j, "kind", where).get<std::string>());
    if (j.contains("covariate")) spec.covariate = j["covariate"].get<std::string>();
    if (spec.covariate_based() && spec.covariate.empty())
        throw input_error(where + ": statistic '" + StatisticSpec::to_string(spec.kind) +
                          "' needs a covariate name");
    if (!spec.covariate_based() && !spec.covariate.empty())
        throw input_error(where + ": statistic '" + StatisticSpec::to_string(spec.kind) +
                          "' does not take a covariate");
    return spec;
}

}  // namespace detail

struct SplineConfig {
    int k = 10;
    int degree = 3;
    int penalty_order = 2;
};

struct CovariateFileConfig {
    std::string path;
    CovariateDeclaration declaration;
};

struct DyadicCovariateConfig {
    std::string name;
    std::string path;
};

struct ChainSettings {
    int burn_in = 30;
    int draws = 30;
    std::uint64_t seed = 1;
    int parallel_chains = 1;
};

/// Parsed and validated `fit` run configuration.
struct FitRunConfig {
    std::string events_path;
    std::optional<double> horizon;
    std::optional<CovariateFileConfig> covariates;
    std::vector<DyadicCovariateConfig> dyadic_covariates;
    std::vector<StatisticSpec> true_stats;
    std::optional<std::vector<StatisticSpec>> spurious_stats;  // present => REMSE
    SplineConfig spline;
    FitOptions fit_options;
    GammaPolicy gamma;
    ChainSettings chain;
    int baseline_grid = 201;
    json resolved;  // full resolved document, embedded in report.json
};

inline FitRunConfig parse_fit_config(const json& doc) {
    if (!doc.is_object()) throw input_error("fit config must be a JSON object");
    detail::reject_unknown_keys(doc,
                                {"events", "horizon", "covariates", "dyadic_covariates",
                                 "true_model", "spurious_model", "spline", "fit", "chain",
                                 "baseline_grid"},
                                "fit config");
    FitRunConfig cfg;
    cfg.events_path = detail::require(doc, "events", "fit config").get<std::string>();
    if (doc.contains("horizon")) cfg.horizon = doc["horizon"].get<double>();

    if (doc.contains("covariates")) {
        const json& c = doc["covariates"];
        detail::reject_unknown_keys(c, {"path", "continuous", "categorical"}, "covariates");
        CovariateFileConfig f;
        f.path = detail::require(c, "path", "covariates").get<std::string>();
        if (c.contains("continuous"))
            for (const auto& n : c["continuous"]) f.declaration.continuous.push_back(n.get<std::string>());
        if (c.contains("categorical"))
            for (const auto& n : c["categorical"]) f.declaration.categorical.push_back(n.get<std::string>());
        cfg.covariates = std::move(f);
    }
    if (doc.contains("dyadic_covariates")) {
        for (const auto& d : doc["dyadic_covariates"]) {
            detail::reject_unknown_keys(d, {"name", "path"}, "dyadic_covariates");
            cfg.dyadic_covariates.push_back({detail::require(d, "name", "dyadic_covariates").get<std::string>(),
                                             detail::require(d, "path", "dyadic_covariates").get<std::string>()});
        }
    }

    const json& tm = detail::require(doc, "true_model", "fit config");
    detail::reject_unknown_keys(tm, {"stats"}, "true_model");
    if (tm.contains("stats"))
        for (const auto& s : tm["stats"]) cfg.true_stats.push_back(detail::parse_stat(s, "true_model.stats"));

    if (doc.contains("spurious_model")) {
        const json& sm = doc["spurious_model"];
        detail::reject_unknown_keys(sm, {"stats"}, "spurious_model");
        std::vector<StatisticSpec> stats;
        if (sm.contains("stats"))
            for (const auto& s : sm["stats"]) stats.push_back(detail::parse_stat(s, "spurious_model.stats"));
        for (const auto& s : stats)
            for (const auto& t : cfg.true_stats)
                if (s == t)
                    throw input_error("spurious model shares statistic '" + s.name() +
                                      "' with the true model (not identifiable)");
        cfg.spurious_stats = std::move(stats);
    }

    if (doc.contains("spline")) {
        const json& sp = doc["spline"];
        detail::reject_unknown_keys(sp, {"K", "degree", "penalty_order"}, "spline");
        if (sp.contains("K")) cfg.spline.k = sp["K"].get<int>();
        if (sp.contains("degree")) cfg.spline.degree = sp["degree"].get<int>();
        if (sp.contains("penalty_order")) cfg.spline.penalty_order = sp["penalty_order"].get<int>();
    }
    if (doc.contains("fit")) {
        const json& f = doc["fit"];
        detail::reject_unknown_keys(f, {"max_irls_iter", "tol", "gamma"}, "fit");
        if (f.contains("max_irls_iter")) cfg.fit_options.max_iter = f["max_irls_iter"].get<int>();
        if (f.contains("tol")) cfg.fit_options.tol = f["tol"].get<double>();
        if (f.contains("gamma")) {
            const json& g = f["gamma"];
            if (g.is_string()) {
                if (g.get<std::string>() != "auto")
                    throw input_error("fit.gamma must be \"auto\" or a nonnegative number");
                cfg.gamma = GammaPolicy::autoselect();
            } else {
                const double v = g.get<double>();
                if (v < 0) throw input_error("fit.gamma must be nonnegative");
                cfg.gamma = GammaPolicy::fixed(v);
            }
        }
    }
    if (doc.contains("chain")) {
        const json& c = doc["chain"];
        detail::reject_unknown_keys(c, {"burn_in", "draws", "seed", "parallel_chains"}, "chain");
        if (c.contains("burn_in")) cfg.chain.burn_in = c["burn_in"].get<int>();
        if (c.contains("draws")) cfg.chain.draws = c["draws"].get<int>();
        if (c.contains("seed")) cfg.chain.seed = c["seed"].get<std::uint64_t>();
        if (c.contains("parallel_chains")) cfg.chain.parallel_chains = c["parallel_chains"].get<int>();
    }
    if (doc.contains("baseline_grid")) cfg.baseline_grid = doc["baseline_grid"].get<int>();

    if (cfg.spline.k < cfg.spline.degree + 1) throw input_error("spline.K must be >= degree+1");
    if (cfg.spline.penalty_order < 1 || cfg.spline.penalty_order >= cfg.spline.k)
        throw input_error("spline.penalty_order must satisfy 1 <= order < K");
    if (cfg.chain.burn_in < 0 || cfg.chain.draws < 2)
        throw input_error("chain.burn_in must be >= 0 and chain.draws >= 2");
    if (cfg.chain.parallel_chains < 1) throw input_error("chain.parallel_chains must be >= 1");

    cfg.resolved = doc;
    cfg.resolved["spline"] = {{"K", cfg.spline.k},
                              {"degree", cfg.spline.degree},
                              {"penalty_order", cfg.spline.penalty_order}};
    cfg.resolved["fit"] = {{"max_irls_iter", cfg.fit_options.max_iter},
                           {"tol", cfg.fit_options.tol},
                           {"gamma", cfg.gamma.automatic ? json("auto") : json(cfg.gamma.value)}};
    cfg.resolved["chain"] = {{"burn_in", cfg.chain.burn_in},
                             {"draws", cfg.chain.draws},
                             {"seed", cfg.chain.seed},
                             {"parallel_chains", cfg.chain.parallel_chains}};
    cfg.resolved["baseline_grid"] = cfg.baseline_grid;
    return cfg;
}

/// Parsed `simulate` run configuration.
struct SimulateRunConfig {
    GeneratorSpec spec;
    std::uint64_t seed = 1;
    json resolved;
};

inline SimulateRunConfig parse_simulate_config(const json& doc) {
    if (!doc.is_object()) throw input_error("simulate config must be a JSON object");
    detail::reject_unknown_keys(
        doc, {"n_actors", "true_model", "spurious_model", "stop", "covariates", "seed"},
        "simulate config");
    SimulateRunConfig cfg;
    cfg.spec.n_actors = detail::require(doc, "n_actors", "simulate config").get<int>();

    auto parse_intensity = [](const json& j, const std::string& where) {
        detail::reject_unknown_keys(j, {"intercept", "effects"}, where);
        IntensityModel m;
        m.intercept = detail::require(j, "intercept", where).get<double>();
        if (j.contains("effects")) {
            for (const auto& e : j["effects"]) {
                detail::reject_unknown_keys(e, {"kind", "covariate", "coef"}, where + ".effects");
                json stat = e;
                stat.erase("coef");
                EffectTerm term;
                term.stat = detail::parse_stat(stat, where + ".effects");
                term.coef = detail::require(e, "coef", where + ".effects").get<double>();
                m.effects.push_back(std::move(term));
            }
        }
        return m;
    };
    cfg.spec.true_model =
        parse_intensity(detail::require(doc, "true_model", "simulate config"), "true_model");
    if (doc.contains("spurious_model"))
        cfg.spec.spurious_model = parse_intensity(doc["spurious_model"], "spurious_model");

    const json& stop = detail::require(doc, "stop", "simulate config");
    detail::reject_unknown_keys(stop, {"true_events", "horizon"}, "stop");
    if (stop.contains("true_events") == stop.contains("horizon"))
        throw input_error("stop must give exactly one of true_events or horizon");
    if (stop.contains("true_events")) cfg.spec.stop.true_events = stop["true_events"].get<long>();
    if (stop.contains("horizon")) cfg.spec.stop.horizon = stop["horizon"].get<double>();
    if (stop.contains("true_events") && cfg.spec.stop.true_events <= 0)
        throw input_error("stop.true_events must be positive");
    if (stop.contains("horizon") && !(cfg.spec.stop.horizon > 0))
        throw input_error("stop.horizon must be positive");

    if (doc.contains("covariates")) {
        const json& c = doc["covariates"];
        detail::reject_unknown_keys(c, {"continuous", "categorical"}, "covariates");
        if (c.contains("continuous"))
            for (const auto& n : c["continuous"])
                cfg.spec.covariates.continuous.push_back(n.get<std::string>());
        if (c.contains("categorical"))
            for (const auto& e : c["categorical"]) {
                detail::reject_unknown_keys(e, {"name", "levels"}, "covariates.categorical");
                cfg.spec.covariates.categorical.push_back(
                    {detail::require(e, "name", "covariates.categorical").get<std::string>(),
                     e.contains("levels") ? e["levels"].get<int>() : 7});
            }
    }
    if (doc.contains("seed")) cfg.seed = doc["seed"].get<std::uint64_t>();
    cfg.resolved = doc;
    cfg.resolved["seed"] = cfg.seed;
    return cfg;
}

/// Minimal JSON-schema checker covering the subset used by the shipped
/// report schema: type, properties, required, additionalProperties, items,
/// enum.
inline void validate_against_schema(const json& value, const json& schema,
                                    const std::string& path = "$") {
    if (schema.contains("type")) {
        const std::string t = schema["type"].get<std::string>();
        const bool ok = (t == "object" && value.is_object()) ||
                        (t == "array" && value.is_array()) ||
                        (t == "string" && value.is_string()) ||
                        (t == "number" && value.is_number()) ||
                        (t == "integer" && value.is_number_integer()) ||
                        (t == "boolean" && value.is_boolean());
        if (!ok) throw input_error(path + ": expected " + t);
    }
    if (schema.contains("enum")) {
        bool found = false;
        for (const auto& e : schema["enum"]) found = found || e == value;
        if (!found) throw input_error(path + ": value not in enum");
    }
    if (value.is_object()) {
        if (schema.contains("required"))
            for (const auto& k : schema["required"])
                if (!value.contains(k.get<std::string>()))
                    throw input_error(path + ": missing required key " + k.get<std::string>());
        const json props = schema.value("properties", json::object());
        const bool additional = schema.value("additionalProperties", true);
        for (auto it = value.begin(); it != value.end(); ++it) {
            if (props.contains(it.key()))
                validate_against_schema(*it, props[it.key()], path + "." + it.key());
            else if (!additional)
                throw input_error(path + ": unexpected key " + it.key());
        }
    }
    if (value.is_array() && schema.contains("items")) {
        std::size_t i = 0;
        for (const auto& e : value)
            validate_against_schema(e, schema["items"], path + "[" + std::to_string(i++) + "]");
    }
}

}  // namespace remse
