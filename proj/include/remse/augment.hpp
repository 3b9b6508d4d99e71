#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "remse/common.hpp"
#include "remse/events.hpp"
#include "remse/model.hpp"
#include "remse/netstats.hpp"
#include "remse/poisson.hpp"
#include "remse/rng.hpp"

namespace remse {

/// One retained draw of the augmentation sampler: the latent labels, both
/// component fits (complete-data posterior mean and covariance), and the
/// coefficient samples used to drive the next imputation sweep.
struct PosteriorDraw {
    std::vector<std::uint8_t> labels;
    FitResult fit_spurious;
    FitResult fit_true;
    Eigen::VectorXd sample_spurious;
    Eigen::VectorXd sample_true;

    int spurious_count() const {
        int c = 0;
        for (auto z : labels) c += z == 0;
        return c;
    }
};

/// Imputation sweep: one forward pass over the events. For event m both
/// component intensities are evaluated at t_m on histories built from the
/// draws z_1..z_{m-1} of this sweep, z_m ~ Bernoulli(lambda_1/(lambda_0+lambda_1)),
/// and the drawn component's history advances. Exactly one uniform variate
/// is consumed per event.
inline std::vector<std::uint8_t> istep(const EventStream& stream, const ComponentModel& spurious,
                                       const ComponentModel& truemodel,
                                       const Eigen::VectorXd& theta_spurious,
                                       const Eigen::VectorXd& theta_true, Rng& rng) {
    const int n = stream.actors.size();
    HistoryState h0(n), h1(n);
    std::vector<std::uint8_t> z(stream.events.size());
    for (std::size_t m = 0; m < stream.events.size(); ++m) {
        const Event& e = stream.events[m];
        const double l0 = std::exp(
            spurious.log_intensity(theta_spurious, h0, stream.actors, e.actor_a, e.actor_b, e.time));
        const double l1 = std::exp(
            truemodel.log_intensity(theta_true, h1, stream.actors, e.actor_a, e.actor_b, e.time));
        if (!(l0 + l1 > 0.0))
            throw numeric_error("both component intensities are zero at event " +
                                std::to_string(m + 1));
        const double p = l1 / (l0 + l1);
        z[m] = rng.bernoulli(p) ? 1 : 0;
        (z[m] ? h1 : h0).apply_event(e.actor_a, e.actor_b);
    }
    return z;
}

/// Half-count continuity shape for an intercept-only component that
/// currently holds no events: its rate restarts from Gamma(1/2, exposure).
/// Most draws sit near zero (a clean stream keeps the channel off) while
/// genuine contamination can still re-ignite it.
inline constexpr double kZeroEventShape = 0.5;
inline constexpr double kDigammaZeroShape = -1.9635100260214235;  // psi(1/2)
inline constexpr double kTrigammaZeroShape = 4.934802200544679;   // psi'(1/2)

/// Fit one component's penalized Poisson model given the labels.
/// Zero-event components degenerate: an intercept-only model drops to the
/// rate floor above; a covariate-bearing model takes the half-count
/// corrected intercept log(0.5/exposure) with the remaining coefficients
/// pinned at zero, so the chain can always move away from it.
inline FitResult fit_component(const EventStream& stream, const RiskSet& rs,
                               const std::vector<std::uint8_t>& labels, EventClass component,
                               const ComponentModel& model, const PenaltyBlocks& penalty,
                               const FitOptions& opts, const GammaPolicy& gamma,
                               const Eigen::VectorXd* warm_start = nullptr) {
    PoissonDataset data(stream, rs, model, labels, component);
    const double total_y = data.total_events();
    FitResult r;
    if (total_y <= 0.0 && model.dim() == 1) {
        // log-scale moments of the Gamma(alpha0, exposure) restart posterior
        r.theta_hat = Eigen::VectorXd::Constant(
            1, kDigammaZeroShape - std::log(data.total_exposure()));
        r.covariance = Eigen::MatrixXd::Constant(1, 1, kTrigammaZeroShape);
        r.penalized_loglik = 0.0;
    } else if (total_y <= 0.0) {
        r = fit_intercept_closed_form(0.0, data.total_exposure());
        const int d = model.dim();
        Eigen::VectorXd theta = Eigen::VectorXd::Zero(d);
        theta[0] = r.theta_hat[0];
        Eigen::MatrixXd cov = Eigen::MatrixXd::Identity(d, d) * r.covariance(0, 0);
        r.theta_hat = theta;
        r.covariance = cov;
    } else if (model.dim() == 1) {
        r = fit_intercept_closed_form(total_y, data.total_exposure(),
                                      data.sum_response_log_exposure());
    } else {
        r = fit_penalized_poisson(data, penalty, gamma, opts, warm_start);
    }
    r.events_total = total_y;
    r.exposure_total = data.total_exposure();
    return r;
}

namespace detail {

/// Coefficient draw for one component. An intercept-only model with k events
/// has the exact complete-data posterior exp(theta) ~ Gamma(k, exposure)
/// under the flat prior on theta; sampling it directly avoids the heavy
/// right tail the normal-on-log approximation has at small counts (k = 0 is
/// the switched-off channel). Everything else uses the normal posterior
/// approximation.
inline Eigen::VectorXd sample_component(const FitResult& fit, int model_dim, Rng& rng);

inline Eigen::VectorXd sample_mvn(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov,
                                  Rng& rng) {
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success) {
        Eigen::MatrixXd bumped = cov;
        bumped.diagonal().array() += 1e-10 * (1.0 + cov.diagonal().maxCoeff());
        llt.compute(bumped);
        if (llt.info() != Eigen::Success)
            throw numeric_error("posterior covariance is not positive definite for sampling");
    }
    Eigen::VectorXd standard(mean.size());
    for (int i = 0; i < mean.size(); ++i) standard[i] = rng.normal();
    return mean + llt.matrixL() * standard;
}

inline Eigen::VectorXd sample_component(const FitResult& fit, int model_dim, Rng& rng) {
    if (model_dim == 1 && fit.events_total >= 0.0 && fit.exposure_total > 0.0) {
        const double shape = fit.events_total > 0.0 ? fit.events_total : kZeroEventShape;
        const double rate = rng.gamma(shape) / fit.exposure_total;
        return Eigen::VectorXd::Constant(1, std::log(rate));
    }
    return sample_mvn(fit.theta_hat, fit.covariance, rng);
}

}  // namespace detail

/// Posterior step: reconstruct both component paths from the labels, fit
/// both penalized Poisson models independently, and draw the coefficient
/// samples from their normal posterior approximations (spurious block first).
inline PosteriorDraw pstep(const EventStream& stream, const RiskSet& rs,
                           std::vector<std::uint8_t> labels, const ComponentModel& spurious,
                           const ComponentModel& truemodel, const PenaltyBlocks& pen_spurious,
                           const PenaltyBlocks& pen_true, const FitOptions& opts,
                           const GammaPolicy& gamma_spurious, const GammaPolicy& gamma_true,
                           Rng& rng, const Eigen::VectorXd* warm_spurious = nullptr,
                           const Eigen::VectorXd* warm_true = nullptr) {
    PosteriorDraw draw;
    draw.fit_spurious = fit_component(stream, rs, labels, EventClass::Spurious, spurious,
                                      pen_spurious, opts, gamma_spurious, warm_spurious);
    draw.fit_true = fit_component(stream, rs, labels, EventClass::True, truemodel, pen_true, opts,
                                  gamma_true, warm_true);
    draw.sample_spurious = detail::sample_component(draw.fit_spurious, spurious.dim(), rng);
    draw.sample_true = detail::sample_component(draw.fit_true, truemodel.dim(), rng);
    draw.labels = std::move(labels);
    return draw;
}

struct ChainConfig {
    int burn_in = 30;
    int draws = 30;
    std::uint64_t seed = 0;
    FitOptions fit_options;
    GammaPolicy gamma_true = GammaPolicy::autoselect();
    GammaPolicy gamma_spurious = GammaPolicy::autoselect();
};

struct ChainTrace {
    std::vector<int> iteration;
    std::vector<int> spurious_count;
    std::vector<Eigen::VectorXd> theta_hat;  // vec(theta0_hat, theta1_hat)
};

struct ChainResult {
    std::vector<PosteriorDraw> retained;
    ChainTrace trace;
    int pstep_failures = 0;
};

namespace detail {

inline Eigen::VectorXd stack(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    Eigen::VectorXd out(a.size() + b.size());
    out << a, b;
    return out;
}

}  // namespace detail

/// Data augmentation chain: labels start as fair coin flips, theta^(0) is
/// the posterior mean of that split's P-step, then burn_in + draws
/// alternating I/P iterations. The last `draws` posterior draws are retained.
/// A failed P-step keeps the previous parameters; the chain aborts when more
/// than half of all iterations failed.
inline ChainResult run_chain(const EventStream& stream, const RiskSet& rs,
                             const ComponentModel& spurious, const ComponentModel& truemodel,
                             const ChainConfig& config) {
    if (stream.events.empty()) throw input_error("cannot fit an empty event stream");
    const PenaltyBlocks pen0 = make_penalty_blocks(spurious);
    const PenaltyBlocks pen1 = make_penalty_blocks(truemodel);
    Rng rng(config.seed);

    std::vector<std::uint8_t> z(stream.events.size());
    for (auto& zm : z) zm = rng.bernoulli(0.5) ? 1 : 0;

    ChainResult result;
    GammaPolicy g0 = config.gamma_spurious;
    GammaPolicy g1 = config.gamma_true;
    PosteriorDraw current = pstep(stream, rs, z, spurious, truemodel, pen0, pen1,
                                  config.fit_options, g0, g1, rng);
    // theta^(0): the complete-data posterior means, not the samples
    Eigen::VectorXd theta0 = current.fit_spurious.theta_hat;
    Eigen::VectorXd theta1 = current.fit_true.theta_hat;

    auto record = [&result](int iter, const PosteriorDraw& d) {
        result.trace.iteration.push_back(iter);
        result.trace.spurious_count.push_back(d.spurious_count());
        result.trace.theta_hat.push_back(
            detail::stack(d.fit_spurious.theta_hat, d.fit_true.theta_hat));
    };
    record(0, current);

    const int total = config.burn_in + config.draws;
    for (int d = 1; d <= total; ++d) {
        z = istep(stream, spurious, truemodel, theta0, theta1, rng);
        try {
            if (g0.automatic) g0.hint = current.fit_spurious.gamma > 0
                                            ? std::optional<double>(current.fit_spurious.gamma)
                                            : std::nullopt;
            if (g1.automatic) g1.hint = current.fit_true.gamma > 0
                                            ? std::optional<double>(current.fit_true.gamma)
                                            : std::nullopt;
            current = pstep(stream, rs, std::move(z), spurious, truemodel, pen0, pen1,
                            config.fit_options, g0, g1, rng, &current.fit_spurious.theta_hat,
                            &current.fit_true.theta_hat);
            theta0 = current.sample_spurious;
            theta1 = current.sample_true;
        } catch (const numeric_error& err) {
            ++result.pstep_failures;
            if (d >= 4 && result.pstep_failures * 2 > d)
                throw numeric_error("chain aborted: " + std::to_string(result.pstep_failures) +
                                    " of " + std::to_string(d) + " P-steps failed; last error: " +
                                    err.what());
            warn(std::string("P-step failed, reusing previous draw: ") + err.what());
        }
        record(d, current);
        if (d > config.burn_in) result.retained.push_back(current);
    }
    return result;
}

/// Combined point and interval estimates plus the PFE summary.
struct FitReport {
    std::vector<std::string> names;
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;      // Vbar + Bbar
    Eigen::VectorXd z_values; // mean / sqrt(diag cov)
    Eigen::MatrixXd ci95;     // columns: lower, upper
    double pfe_percent = 0.0;
    int draws_used = 0;
    int burn_in = 0;

    int index_of(const std::string& name) const {
        for (std::size_t i = 0; i < names.size(); ++i)
            if (names[i] == name) return static_cast<int>(i);
        return -1;
    }
};

namespace detail {

inline void finish_report(FitReport& report) {
    const int d = static_cast<int>(report.mean.size());
    report.z_values.resize(d);
    report.ci95.resize(d, 2);
    for (int i = 0; i < d; ++i) {
        const double sd = std::sqrt(report.cov(i, i));
        report.z_values[i] = report.mean[i] / sd;
        report.ci95(i, 0) = report.mean[i] - 1.959963984540054 * sd;
        report.ci95(i, 1) = report.mean[i] + 1.959963984540054 * sd;
    }
}

}  // namespace detail

inline std::vector<std::string> report_names(const ComponentModel* spurious,
                                             const ComponentModel& truemodel) {
    std::vector<std::string> names;
    if (spurious)
        for (const auto& n : spurious->column_names()) names.push_back("spurious:" + n);
    for (const auto& n : truemodel.column_names()) names.push_back("true:" + n);
    return names;
}

/// Rubin combination over the retained draws: mean of complete-data
/// posterior means, total variance Vbar + Bbar with
/// Bbar = (K+1)/(K(K-1)) * sum of outer deviations, and PFE as the average
/// spurious fraction of the retained label draws.
inline FitReport combine(const std::vector<PosteriorDraw>& draws,
                         std::vector<std::string> names, int burn_in) {
    const int k = static_cast<int>(draws.size());
    if (k < 2) throw input_error("MI combination needs at least 2 draws");
    const int d0 = static_cast<int>(draws.front().fit_spurious.theta_hat.size());
    const int d1 = static_cast<int>(draws.front().fit_true.theta_hat.size());
    const int d = d0 + d1;

    FitReport report;
    report.names = std::move(names);
    report.draws_used = k;
    report.burn_in = burn_in;

    Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
    Eigen::MatrixXd vbar = Eigen::MatrixXd::Zero(d, d);
    double pfe = 0.0;
    const double m_events = static_cast<double>(draws.front().labels.size());
    for (const PosteriorDraw& draw : draws) {
        mean += detail::stack(draw.fit_spurious.theta_hat, draw.fit_true.theta_hat);
        vbar.topLeftCorner(d0, d0) += draw.fit_spurious.covariance;
        vbar.bottomRightCorner(d1, d1) += draw.fit_true.covariance;
        pfe += 100.0 * static_cast<double>(draw.spurious_count()) / m_events;
    }
    mean /= k;
    vbar /= k;
    pfe /= k;

    Eigen::MatrixXd bbar = Eigen::MatrixXd::Zero(d, d);
    for (const PosteriorDraw& draw : draws) {
        Eigen::VectorXd dev =
            detail::stack(draw.fit_spurious.theta_hat, draw.fit_true.theta_hat) - mean;
        bbar.selfadjointView<Eigen::Lower>().rankUpdate(dev, 1.0);
    }
    bbar.triangularView<Eigen::Upper>() = bbar.transpose();
    bbar *= static_cast<double>(k + 1) / (static_cast<double>(k) * (k - 1));

    report.mean = mean;
    report.cov = vbar + bbar;
    report.pfe_percent = pfe;
    detail::finish_report(report);
    return report;
}

/// Report for a single complete-data fit (the REM path: no spurious
/// component, every event treated as true, PFE exactly zero).
inline FitReport single_fit_report(const FitResult& fit, std::vector<std::string> names) {
    FitReport report;
    report.names = std::move(names);
    report.mean = fit.theta_hat;
    report.cov = fit.covariance;
    report.pfe_percent = 0.0;
    report.draws_used = 1;
    report.burn_in = 0;
    detail::finish_report(report);
    return report;
}

}  // namespace remse
