#pragma once

#include <Eigen/Dense>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <thread>
#include <vector>

#include "remse/augment.hpp"
#include "remse/common.hpp"
#include "remse/simulate.hpp"

namespace remse {

/// Vector RMSE across replications: sqrt((1/S) sum ||est_s - truth||^2).
inline double rmse(const std::vector<Eigen::VectorXd>& estimates, const Eigen::VectorXd& truth) {
    if (estimates.empty()) throw input_error("rmse needs at least one estimate");
    double acc = 0.0;
    for (const auto& e : estimates) {
        if (e.size() != truth.size()) throw input_error("rmse: estimate/truth length mismatch");
        acc += (e - truth).squaredNorm();
    }
    return std::sqrt(acc / static_cast<double>(estimates.size()));
}

struct StudyConfig {
    int dg = 1;
    int reps = 100;
    bool paper_scale = false;  // desk scale: n=20, 300 true events; paper: n=40, 500
    std::uint64_t seed = 1;
    int threads = 0;  // 0: hardware concurrency
    int burn_in = 30;
    int draws = 30;
    int spline_k = 10;
    int spline_degree = 3;
    int penalty_order = 2;
};

struct CoefficientSummary {
    std::string name;
    double truth = 0.0;
    // index 0: REMSE, 1: REM
    double ave[2] = {0, 0};
    double rmse[2] = {0, 0};
    double cp[2] = {0, 0};
};

struct StudyResult {
    int dg = 1;
    int reps_requested = 0;
    int reps_completed = 0;
    int failures = 0;
    std::uint64_t seed = 0;
    std::vector<CoefficientSummary> coefficients;
    double vector_rmse[2] = {0, 0};
    double avg_realized_pfe = 0.0;
    double avg_estimated_pfe = 0.0;      // REMSE; the REM pins PFE at zero
    double mean_abs_pfe_error = 0.0;     // mean |estimated - realized| over reps
    std::vector<std::string> failure_messages;
};

namespace detail {

struct RepOutcome {
    bool ok = false;
    std::string error;
    Eigen::VectorXd estimate[2];
    Eigen::VectorXd sd[2];
    double pfe_estimated = 0.0;
    double pfe_realized = 0.0;
};

inline RepOutcome run_replication(const StudyConfig& config, const GeneratorSpec& gen_spec,
                                  const std::vector<std::string>& coef_names, std::uint64_t seed) {
    RepOutcome out;
    Rng rep_rng(seed);
    Rng gen_rng = rep_rng.derive(1);
    GenerationMeta meta;
    EventStream stream = generate(gen_spec, gen_rng, &meta);
    out.pfe_realized = meta.realized_pfe_percent;

    std::vector<StatisticSpec> specs;
    for (const auto& e : gen_spec.true_model.effects) specs.push_back(e.stat);
    SplineBasis basis = SplineBasis::build(stream.horizon, config.spline_k, config.spline_degree);
    PenaltyMatrix penalty = PenaltyMatrix::build(config.spline_k, config.penalty_order);
    ComponentModel truemodel = ComponentModel::with_spline(specs, std::move(basis), std::move(penalty));
    ComponentModel spurious = ComponentModel::constant();
    RiskSet rs = RiskSet::all_pairs(stream.actors.size());

    // REMSE: full augmentation chain
    ChainConfig chain;
    chain.burn_in = config.burn_in;
    chain.draws = config.draws;
    chain.seed = rep_rng.derive(2).seed();
    ChainResult result = run_chain(stream, rs, spurious, truemodel, chain);
    FitReport remse = combine(result.retained, report_names(&spurious, truemodel), chain.burn_in);
    out.pfe_estimated = remse.pfe_percent;

    // REM: all events treated as true, single complete-data fit
    std::vector<std::uint8_t> all_true(stream.events.size(), 1);
    FitResult rem_fit = fit_component(stream, rs, all_true, EventClass::True, truemodel,
                                      make_penalty_blocks(truemodel), chain.fit_options,
                                      chain.gamma_true);
    FitReport rem = single_fit_report(rem_fit, report_names(nullptr, truemodel));

    const FitReport* reports[2] = {&remse, &rem};
    for (int r = 0; r < 2; ++r) {
        out.estimate[r].resize(coef_names.size());
        out.sd[r].resize(coef_names.size());
        for (std::size_t j = 0; j < coef_names.size(); ++j) {
            const int idx = reports[r]->index_of(coef_names[j]);
            if (idx < 0) throw numeric_error("coefficient missing from report: " + coef_names[j]);
            out.estimate[r][j] = reports[r]->mean[idx];
            out.sd[r][j] = std::sqrt(reports[r]->cov(idx, idx));
        }
    }
    out.ok = true;
    return out;
}

}  // namespace detail

/// Runs S replications of generate -> fit (REMSE and REM) and aggregates
/// AVE, per-coefficient RMSE, CP of the 95% normal intervals, the vector
/// RMSE, and realized/estimated PFE. Replications run in parallel with
/// per-replication seeds derived from the master seed; aggregation order is
/// fixed, so the result is a pure function of (dg, reps, scale, seed).
inline StudyResult run_study(const StudyConfig& config) {
    if (config.reps < 10) throw input_error("study needs at least 10 replications");
    const int n_actors = config.paper_scale ? 40 : 20;
    const long true_events = config.paper_scale ? 500 : 300;
    GeneratorSpec gen_spec = dg_spec(config.dg, n_actors, true_events);

    std::vector<std::string> coef_names = {"true:intercept"};
    Eigen::VectorXd truth(1 + gen_spec.true_model.effects.size());
    truth[0] = gen_spec.true_model.intercept;
    for (std::size_t j = 0; j < gen_spec.true_model.effects.size(); ++j) {
        coef_names.push_back("true:" + gen_spec.true_model.effects[j].stat.name());
        truth[1 + j] = gen_spec.true_model.effects[j].coef;
    }

    Rng master(config.seed);
    std::vector<detail::RepOutcome> outcomes(config.reps);
    std::atomic<int> next{0};
    int n_threads = config.threads > 0 ? config.threads
                                       : static_cast<int>(std::thread::hardware_concurrency());
    if (n_threads < 1) n_threads = 1;
    n_threads = std::min(n_threads, config.reps);

    auto worker = [&]() {
        for (int s = next.fetch_add(1); s < config.reps; s = next.fetch_add(1)) {
            const std::uint64_t rep_seed = master.derive(static_cast<std::uint64_t>(s) + 1).seed();
            try {
                outcomes[s] = detail::run_replication(config, gen_spec, coef_names, rep_seed);
            } catch (const std::exception& err) {
                outcomes[s].ok = false;
                outcomes[s].error = "replication " + std::to_string(s) + ": " + err.what();
            }
        }
    };
    std::vector<std::thread> pool;
    for (int t = 1; t < n_threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    StudyResult res;
    res.dg = config.dg;
    res.reps_requested = config.reps;
    res.seed = config.seed;
    const int p = static_cast<int>(coef_names.size());
    res.coefficients.resize(p);
    for (int j = 0; j < p; ++j) {
        res.coefficients[j].name = coef_names[j];
        res.coefficients[j].truth = truth[j];
    }

    std::vector<Eigen::VectorXd> estimates[2];
    double mean_abs_err = 0.0;
    for (const auto& o : outcomes) {
        if (!o.ok) {
            ++res.failures;
            res.failure_messages.push_back(o.error);
            continue;
        }
        ++res.reps_completed;
        res.avg_realized_pfe += o.pfe_realized;
        res.avg_estimated_pfe += o.pfe_estimated;
        mean_abs_err += std::abs(o.pfe_estimated - o.pfe_realized);
        for (int r = 0; r < 2; ++r) {
            estimates[r].push_back(o.estimate[r]);
            for (int j = 0; j < p; ++j) {
                const double err = o.estimate[r][j] - truth[j];
                res.coefficients[j].ave[r] += o.estimate[r][j];
                res.coefficients[j].rmse[r] += err * err;
                res.coefficients[j].cp[r] +=
                    std::abs(err) <= 1.959963984540054 * o.sd[r][j] ? 1.0 : 0.0;
            }
        }
    }
    if (res.reps_completed == 0)
        throw numeric_error("all study replications failed; first error: " +
                            (res.failure_messages.empty() ? std::string("?")
                                                          : res.failure_messages.front()));
    const double s = static_cast<double>(res.reps_completed);
    res.avg_realized_pfe /= s;
    res.avg_estimated_pfe /= s;
    res.mean_abs_pfe_error = mean_abs_err / s;
    for (int r = 0; r < 2; ++r) {
        res.vector_rmse[r] = rmse(estimates[r], truth);
        for (int j = 0; j < p; ++j) {
            res.coefficients[j].ave[r] /= s;
            res.coefficients[j].rmse[r] = std::sqrt(res.coefficients[j].rmse[r] / s);
            res.coefficients[j].cp[r] /= s;
        }
    }
    return res;
}

inline void write_table_csv(const StudyResult& res, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw input_error("cannot write file: " + path);
    out << "dg,model,coefficient,truth,ave,rmse,cp\n";
    const char* models[2] = {"REMSE", "REM"};
    char buf[256];
    for (int r = 0; r < 2; ++r) {
        for (const auto& c : res.coefficients) {
            std::snprintf(buf, sizeof buf, "%d,%s,%s,%.6g,%.6g,%.6g,%.6g\n", res.dg, models[r],
                          c.name.c_str(), c.truth, c.ave[r], c.rmse[r], c.cp[r]);
            out << buf;
        }
        std::snprintf(buf, sizeof buf, "%d,%s,vector_rmse,,%.6g,,\n", res.dg, models[r],
                      res.vector_rmse[r]);
        out << buf;
    }
    std::snprintf(buf, sizeof buf, "%d,REMSE,pfe_percent,%.6g,%.6g,,\n", res.dg,
                  res.avg_realized_pfe, res.avg_estimated_pfe);
    out << buf;
    std::snprintf(buf, sizeof buf, "%d,REM,pfe_percent,%.6g,0,,\n", res.dg, res.avg_realized_pfe);
    out << buf;
}

inline void write_table_md(const StudyResult& res, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw input_error("cannot write file: " + path);
    out << "# Simulation study, DG " << res.dg << " (realized PFE "
        << res.avg_realized_pfe << " %, " << res.reps_completed << "/" << res.reps_requested
        << " replications";
    if (res.failures > 0) out << ", " << res.failures << " failed";
    out << ")\n\n";
    out << "| Coefficient | Truth | REMSE AVE | REMSE RMSE | REMSE CP | REM AVE | REM RMSE | REM CP |\n";
    out << "|---|---|---|---|---|---|---|---|\n";
    char buf[320];
    for (const auto& c : res.coefficients) {
        std::snprintf(buf, sizeof buf, "| %s | %.3g | %.3f | %.3f | %.3f | %.3f | %.3f | %.3f |\n",
                      c.name.c_str(), c.truth, c.ave[0], c.rmse[0], c.cp[0], c.ave[1], c.rmse[1],
                      c.cp[1]);
        out << buf;
    }
    std::snprintf(buf, sizeof buf, "| estimated PFE (%%) |  | %.3f |  |  | 0 |  |  |\n",
                  res.avg_estimated_pfe);
    out << buf;
}

}  // namespace remse
