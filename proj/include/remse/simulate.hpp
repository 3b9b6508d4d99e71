#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "remse/common.hpp"
#include "remse/events.hpp"
#include "remse/model.hpp"
#include "remse/netstats.hpp"
#include "remse/rng.hpp"

namespace remse {

struct EffectTerm {
    StatisticSpec stat;
    double coef = 0.0;
};

/// One generating intensity: exp(intercept + sum coef * statistic). Baselines
/// are constant between events, so the superposed process can be sampled
/// exactly with competing exponentials.
struct IntensityModel {
    double intercept = 0.0;
    std::vector<EffectTerm> effects;

    bool endogenous() const {
        for (const auto& e : effects)
            if (e.stat.endogenous()) return true;
        return false;
    }
};

struct StopRule {
    long true_events = 0;  // stop once this many true events were generated
    double horizon = 0.0;  // or stop at this time
    bool by_count() const { return true_events > 0; }
};

struct CovariateRecipe {
    std::vector<std::string> continuous;  // standard normal per actor
    struct Categorical {
        std::string name;
        int levels = 7;
    };
    std::vector<Categorical> categorical;  // uniform over the levels
};

struct GeneratorSpec {
    int n_actors = 0;
    IntensityModel true_model;
    std::optional<IntensityModel> spurious_model;
    StopRule stop;
    CovariateRecipe covariates;
};

struct GenerationMeta {
    long n_events = 0;
    long n_true = 0;
    long n_spurious = 0;
    double realized_pfe_percent = 0.0;
    double realized_horizon = 0.0;
};

namespace detail {

inline ActorTable make_actor_table(const GeneratorSpec& spec, Rng& rng) {
    int width = 1;
    for (int v = spec.n_actors - 1; v >= 10; v /= 10) ++width;
    std::vector<std::string> ids;
    for (int i = 0; i < spec.n_actors; ++i) {
        std::string s = std::to_string(i);
        ids.push_back("a" + std::string(width - s.size(), '0') + s);
    }
    ActorTable table(std::move(ids));
    for (const auto& name : spec.covariates.continuous) {
        std::vector<double> v(spec.n_actors);
        for (auto& x : v) x = rng.normal();
        table.set_continuous(name, std::move(v));
    }
    for (const auto& cat : spec.covariates.categorical) {
        std::vector<int> codes(spec.n_actors);
        std::vector<std::string> levels;
        for (int l = 0; l < cat.levels; ++l) levels.push_back("l" + std::to_string(l));
        for (auto& c : codes) c = rng.uniform_int(cat.levels);
        table.set_categorical(cat.name, std::move(codes), std::move(levels));
    }
    return table;
}

struct RateTable {
    const IntensityModel* model = nullptr;
    std::vector<double> rates;
    double total = 0.0;

    void recompute(const HistoryState& h, const ActorTable& actors, const RiskSet& rs) {
        total = 0.0;
        for (std::size_t k = 0; k < rs.size(); ++k) {
            auto [a, b] = rs.pairs()[k];
            double eta = model->intercept;
            for (const auto& e : model->effects)
                eta += e.coef * stat_value(e.stat, h, actors, a, b);
            rates[k] = std::exp(eta);
            total += rates[k];
        }
    }
};

}  // namespace detail

/// Samples a labeled event stream from the superposition of the true and
/// spurious processes. Between events all intensities are constant, so the
/// next event time is Exponential(sum of rates) and the (dyad, component)
/// is categorical with probabilities proportional to the rates (spurious
/// block scanned first, then true, dyads in risk-set order).
inline EventStream generate(const GeneratorSpec& spec, Rng& rng,
                            GenerationMeta* meta_out = nullptr) {
    if (spec.n_actors < 2) throw input_error("generator needs at least 2 actors");
    if (!spec.stop.by_count() && !(spec.stop.horizon > 0.0))
        throw input_error("generator stop rule must give true_events or a positive horizon");

    EventStream stream;
    stream.actors = detail::make_actor_table(spec, rng);
    stream.has_labels = true;
    RiskSet rs = RiskSet::all_pairs(spec.n_actors);

    HistoryState h0(spec.n_actors), h1(spec.n_actors);
    detail::RateTable rt0, rt1;
    rt1.model = &spec.true_model;
    rt1.rates.assign(rs.size(), 0.0);
    rt1.recompute(h1, stream.actors, rs);
    const bool has_spurious = spec.spurious_model.has_value();
    if (has_spurious) {
        rt0.model = &*spec.spurious_model;
        rt0.rates.assign(rs.size(), 0.0);
        rt0.recompute(h0, stream.actors, rs);
    }

    GenerationMeta meta;
    double t = 0.0;
    const long guard = 1000000;
    while (true) {
        const double total = rt1.total + (has_spurious ? rt0.total : 0.0);
        if (!(total > 0.0)) throw numeric_error("total intensity is zero; nothing can be generated");
        t += rng.exponential(total);
        if (!spec.stop.by_count() && t > spec.stop.horizon) break;

        double u = rng.uniform() * total;
        int component = 1;
        std::size_t dyad = 0;
        if (has_spurious && u < rt0.total) {
            component = 0;
            for (std::size_t k = 0; k < rs.size(); ++k) {
                if (u < rt0.rates[k] || k + 1 == rs.size()) {
                    dyad = k;
                    break;
                }
                u -= rt0.rates[k];
            }
        } else {
            if (has_spurious) u -= rt0.total;
            for (std::size_t k = 0; k < rs.size(); ++k) {
                if (u < rt1.rates[k] || k + 1 == rs.size()) {
                    dyad = k;
                    break;
                }
                u -= rt1.rates[k];
            }
        }

        auto [a, b] = rs.pairs()[dyad];
        stream.events.push_back(Event{a, b, t, static_cast<std::int8_t>(component)});
        ++meta.n_events;
        if (component == 1) {
            ++meta.n_true;
            h1.apply_event(a, b);
            if (spec.true_model.endogenous()) rt1.recompute(h1, stream.actors, rs);
        } else {
            ++meta.n_spurious;
            h0.apply_event(a, b);
            if (spec.spurious_model->endogenous()) rt0.recompute(h0, stream.actors, rs);
        }
        if (spec.stop.by_count() && meta.n_true >= spec.stop.true_events) break;
        if (meta.n_events >= guard)
            throw numeric_error("runaway generation: more than 1e6 events");
    }

    stream.horizon = spec.stop.by_count()
                         ? (stream.events.empty() ? 0.0 : stream.events.back().time)
                         : spec.stop.horizon;
    meta.realized_horizon = stream.horizon;
    meta.realized_pfe_percent =
        meta.n_events > 0 ? 100.0 * static_cast<double>(meta.n_spurious) / meta.n_events : 0.0;
    stream.validate();
    if (meta_out) *meta_out = meta;
    return stream;
}

struct KsResult {
    double statistic = 0.0;
    double p_value = 1.0;
    long n = 0;
};

/// Distributional self-test: draws waiting times under a constant-rate spec
/// and returns the Kolmogorov-Smirnov statistic against Exponential(total
/// rate), with the asymptotic p-value (Stephens' small-sample correction).
inline KsResult interevent_check(const GeneratorSpec& spec, long n_draws, Rng& rng) {
    if (spec.true_model.endogenous() ||
        (spec.spurious_model && spec.spurious_model->endogenous()))
        throw input_error("interevent_check requires a constant-rate spec");

    Rng table_rng = rng.derive(1);
    ActorTable actors = detail::make_actor_table(spec, table_rng);
    RiskSet rs = RiskSet::all_pairs(spec.n_actors);
    HistoryState h(spec.n_actors);
    detail::RateTable rt0, rt1;
    rt1.model = &spec.true_model;
    rt1.rates.assign(rs.size(), 0.0);
    rt1.recompute(h, actors, rs);
    double total = rt1.total;
    if (spec.spurious_model) {
        rt0.model = &*spec.spurious_model;
        rt0.rates.assign(rs.size(), 0.0);
        rt0.recompute(h, actors, rs);
        total += rt0.total;
    }

    std::vector<double> waits(n_draws);
    for (auto& w : waits) w = rng.exponential(total);
    std::sort(waits.begin(), waits.end());
    double d = 0.0;
    for (long i = 0; i < n_draws; ++i) {
        const double f = 1.0 - std::exp(-total * waits[i]);
        d = std::max(d, std::max(f - static_cast<double>(i) / n_draws,
                                 static_cast<double>(i + 1) / n_draws - f));
    }
    const double sqrt_n = std::sqrt(static_cast<double>(n_draws));
    const double lambda = (sqrt_n + 0.12 + 0.11 / sqrt_n) * d;
    double p = 0.0;
    for (int k = 1; k <= 100; ++k)
        p += 2.0 * ((k % 2 == 1) ? 1.0 : -1.0) * std::exp(-2.0 * k * k * lambda * lambda);
    return KsResult{d, std::clamp(p, 0.0, 1.0), n_draws};
}

/// The two data-generating setups of the simulation study, scaled by actor
/// count and target true-event count. Setup 1 adds a constant spurious
/// intensity exp(-2.5); setup 2 has none.
inline GeneratorSpec dg_spec(int dg, int n_actors, long true_events) {
    if (dg != 1 && dg != 2) throw input_error("dg must be 1 or 2");
    GeneratorSpec spec;
    spec.n_actors = n_actors;
    spec.stop.true_events = true_events;
    spec.covariates.continuous = {"x_cont"};
    spec.covariates.categorical = {{"x_cat", 7}};
    spec.true_model.intercept = -5.0;
    spec.true_model.effects = {
        {{StatKind::degree_abs, ""}, 0.2},
        {{StatKind::triangle, ""}, 0.1},
        {{StatKind::repetition_count, ""}, -0.5},
        {{StatKind::sum_cont, "x_cont"}, 2.0},
        {{StatKind::match_cat, "x_cat"}, -2.0},
    };
    if (dg == 1) {
        IntensityModel spurious;
        spurious.intercept = -2.5;
        spec.spurious_model = spurious;
    }
    return spec;
}

}  // namespace remse
