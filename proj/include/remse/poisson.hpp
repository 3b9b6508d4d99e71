#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "remse/common.hpp"
#include "remse/events.hpp"
#include "remse/model.hpp"
#include "remse/netstats.hpp"

namespace remse {

enum class EventClass : int { Spurious = 0, True = 1 };

/// Pseudo-Poisson dataset for one component: one row per (dyad, interval),
/// exposure delta_m = t_m - t_{m-1}, response the component's counting
/// process increment (0/1), statistics on the component history at t^- and
/// the spline at the interval midpoint.
///
/// Rows are generated per interval block; `dense` materializes the whole
/// design once (default when it fits in memory) while the lazy mode rebuilds
/// blocks on every pass to bound memory.
class PoissonDataset {
public:
    PoissonDataset(const EventStream& stream, const RiskSet& rs, const ComponentModel& model,
                   std::vector<std::uint8_t> labels, EventClass component,
                   std::optional<bool> dense = {})
        : stream_(&stream), rs_(&rs), model_(&model), labels_(std::move(labels)),
          component_(component), cache_(model.specs(), stream.actors, rs) {
        if (labels_.size() != stream.events.size())
            throw input_error("labels length does not match the event stream");
        const std::size_t m_count = stream.events.size();
        intervals_.reserve(m_count);
        double prev = 0.0;
        for (std::size_t m = 0; m < m_count; ++m) {
            const Event& e = stream.events[m];
            Interval iv;
            iv.delta = e.time - prev;
            if (!(iv.delta > 0.0))
                throw numeric_error("zero-length interval at event " + std::to_string(m + 1));
            iv.midpoint = 0.5 * (prev + e.time);
            iv.dyad = rs.index_of(e.actor_a, e.actor_b);
            if (iv.dyad < 0)
                throw input_error("event " + std::to_string(m + 1) + " outside the risk set");
            iv.response = labels_[m] == static_cast<std::uint8_t>(component_);
            prev = e.time;
            intervals_.push_back(iv);
        }
        if (model.has_spline()) {
            spline_rows_.resize(m_count, model.spline_cols());
            for (std::size_t m = 0; m < m_count; ++m)
                spline_rows_.row(m) = model.basis().eval_constrained(intervals_[m].midpoint);
        }
        const long want_dense_bytes = rows() * static_cast<long>(dim()) * 8L;
        dense_ = dense.value_or(want_dense_bytes < (512L << 20));
        if (dense_) {
            x_.resize(rows(), dim());
            HistoryState history(stream.actors.size());
            std::vector<double> stats(model.specs().size());
            const long r = static_cast<long>(rs.size());
            for (std::size_t m = 0; m < m_count; ++m) {
                auto block = x_.middleRows(static_cast<long>(m) * r, r);
                block.col(0).setOnes();
                if (model.has_spline())
                    block.middleCols(1, model.spline_cols()).rowwise() = spline_rows_.row(m);
                for (long k = 0; k < r; ++k) {
                    cache_.fill(history, static_cast<std::size_t>(k), stats.data());
                    for (std::size_t j = 0; j < stats.size(); ++j)
                        block(k, model.stats_offset() + static_cast<long>(j)) = stats[j];
                }
                advance(history, m);
            }
        }
    }

    long rows() const { return static_cast<long>(intervals_.size()) * static_cast<long>(rs_->size()); }
    int dim() const { return model_->dim(); }
    std::size_t n_intervals() const { return intervals_.size(); }
    bool dense() const { return dense_; }
    const ComponentModel& model() const { return *model_; }
    const RiskSet& risk_set() const { return *rs_; }

    double total_exposure() const {
        double sum = 0.0;
        for (const auto& iv : intervals_) sum += iv.delta;
        return sum * static_cast<double>(rs_->size());
    }

    double total_events() const {
        double sum = 0.0;
        for (const auto& iv : intervals_) sum += iv.response ? 1.0 : 0.0;
        return sum;
    }

    double sum_response_log_exposure() const {
        double sum = 0.0;
        for (const auto& iv : intervals_)
            if (iv.response) sum += std::log(iv.delta);
        return sum;
    }

    /// Visit interval blocks in order: f(X_block, response_row, delta).
    /// X_block is |R| x dim; response_row is the in-block row index of the
    /// y=1 row, or -1 when the interval's event belongs to the other
    /// component.
    template <class F>
    void for_each_block(F&& f) const {
        const long r = static_cast<long>(rs_->size());
        if (dense_) {
            for (std::size_t m = 0; m < intervals_.size(); ++m)
                f(x_.middleRows(static_cast<long>(m) * r, r),
                  intervals_[m].response ? intervals_[m].dyad : -1, intervals_[m].delta);
            return;
        }
        Eigen::MatrixXd block(r, dim());
        HistoryState history(stream_->actors.size());
        std::vector<double> stats(model_->specs().size());
        for (std::size_t m = 0; m < intervals_.size(); ++m) {
            block.col(0).setOnes();
            if (model_->has_spline())
                block.middleCols(1, model_->spline_cols()).rowwise() = spline_rows_.row(m);
            for (long k = 0; k < r; ++k) {
                cache_.fill(history, static_cast<std::size_t>(k), stats.data());
                for (std::size_t j = 0; j < stats.size(); ++j)
                    block(k, model_->stats_offset() + static_cast<long>(j)) = stats[j];
            }
            f(block, intervals_[m].response ? intervals_[m].dyad : -1, intervals_[m].delta);
            advance(history, m);
        }
    }

    /// Dense design matrix (materializes when built lazy); for tests.
    Eigen::MatrixXd materialize() const {
        Eigen::MatrixXd x(rows(), dim());
        long row0 = 0;
        for_each_block([&](const auto& block, int, double) {
            x.middleRows(row0, block.rows()) = block;
            row0 += block.rows();
        });
        return x;
    }

    Eigen::VectorXd responses() const {
        Eigen::VectorXd y = Eigen::VectorXd::Zero(rows());
        const long r = static_cast<long>(rs_->size());
        for (std::size_t m = 0; m < intervals_.size(); ++m)
            if (intervals_[m].response) y[static_cast<long>(m) * r + intervals_[m].dyad] = 1.0;
        return y;
    }

    Eigen::VectorXd exposures() const {
        Eigen::VectorXd d(rows());
        const long r = static_cast<long>(rs_->size());
        for (std::size_t m = 0; m < intervals_.size(); ++m)
            d.segment(static_cast<long>(m) * r, r).setConstant(intervals_[m].delta);
        return d;
    }

private:
    struct Interval {
        double delta;
        double midpoint;
        int dyad;
        bool response;
    };

    void advance(HistoryState& history, std::size_t m) const {
        if (labels_[m] == static_cast<std::uint8_t>(component_)) {
            const Event& e = stream_->events[m];
            history.apply_event(e.actor_a, e.actor_b);
        }
    }

    const EventStream* stream_;
    const RiskSet* rs_;
    const ComponentModel* model_;
    std::vector<std::uint8_t> labels_;
    EventClass component_;
    StatRowCache cache_;
    std::vector<Interval> intervals_;
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> spline_rows_{0, 0};
    bool dense_ = true;
    Eigen::MatrixXd x_;
};

inline PoissonDataset build_dataset(const EventStream& stream,
                                    const std::vector<std::uint8_t>& labels, EventClass component,
                                    const ComponentModel& model, const RiskSet& rs,
                                    std::optional<bool> dense = {}) {
    return PoissonDataset(stream, rs, model, labels, component, dense);
}

struct FitOptions {
    int max_iter = 50;
    double tol = 1e-8;        // penalized-deviance change stall threshold
    double score_tol = 1e-6;  // required stationarity at convergence
};

struct FitResult {
    Eigen::VectorXd theta_hat;
    Eigen::MatrixXd covariance;  // (X'WX + gamma*Stilde)^-1 at theta_hat
    double gamma = 0.0;
    double penalized_loglik = 0.0;
    int iterations = 0;
    double score_inf_norm = 0.0;
    bool gamma_at_edge = false;
    double events_total = -1.0;    // filled by fit_component
    double exposure_total = -1.0;
};

struct GammaPolicy {
    bool automatic = true;
    double value = 1.0;
    std::optional<double> hint;  // previous optimum; enables local search

    static GammaPolicy fixed(double g) { return GammaPolicy{false, g, {}}; }
    static GammaPolicy autoselect(std::optional<double> hint = {}) {
        return GammaPolicy{true, 1.0, hint};
    }
};

namespace detail {

struct Accum {
    Eigen::MatrixXd xtwx;
    Eigen::VectorXd score;
    double loglik = 0.0;
};

/// One pass over the data at `theta`: log-likelihood and optionally the
/// (unpenalized) score X'(y-mu) and Fisher information X'WX, W = diag(mu).
inline void accumulate(const PoissonDataset& data, const Eigen::VectorXd& theta, bool with_deriv,
                       Accum& acc) {
    const int d = data.dim();
    acc.loglik = 0.0;
    if (with_deriv) {
        acc.xtwx = Eigen::MatrixXd::Zero(d, d);
        acc.score = Eigen::VectorXd::Zero(d);
    }
    Eigen::VectorXd eta, mu, sqw;
    Eigen::MatrixXd xw;
    data.for_each_block([&](const auto& block, int y_row, double delta) {
        eta = block * theta;
        eta.array() += std::log(delta);
        mu = eta.array().exp();
        acc.loglik -= mu.sum();
        if (y_row >= 0) acc.loglik += eta[y_row];
        if (with_deriv) {
            acc.score.noalias() -= block.transpose() * mu;
            if (y_row >= 0) acc.score += block.row(y_row).transpose();
            sqw = mu.array().sqrt();
            xw = sqw.asDiagonal() * block;
            acc.xtwx.template selfadjointView<Eigen::Lower>().rankUpdate(xw.transpose(), 1.0);
        }
    });
    if (with_deriv) acc.xtwx.template triangularView<Eigen::Upper>() = acc.xtwx.transpose();
}

inline double loglik_only(const PoissonDataset& data, const Eigen::VectorXd& theta) {
    Accum a;
    accumulate(data, theta, false, a);
    return a.loglik;
}

inline std::string offending_columns(const Eigen::MatrixXd& xtwx) {
    const double max_diag = xtwx.diagonal().maxCoeff();
    std::string cols;
    for (int j = 0; j < xtwx.rows(); ++j)
        if (xtwx(j, j) <= 1e-12 * std::max(max_diag, 1.0))
            cols += (cols.empty() ? "" : ", ") + std::to_string(j);
    return cols.empty() ? "(none isolated)" : cols;
}

}  // namespace detail

/// Penalized log-likelihood l_p(theta) = l(theta) - gamma * theta' S~ theta.
inline double penalized_loglik(const PoissonDataset& data, const PenaltyBlocks& penalty,
                               double gamma, const Eigen::VectorXd& theta) {
    return detail::loglik_only(data, theta) - gamma * penalty.quad(theta);
}

/// Analytic gradient of l_p: X'(y - mu) - 2 gamma S~ theta.
inline Eigen::VectorXd penalized_score(const PoissonDataset& data, const PenaltyBlocks& penalty,
                                       double gamma, const Eigen::VectorXd& theta) {
    detail::Accum a;
    detail::accumulate(data, theta, true, a);
    return a.score - 2.0 * gamma * (penalty.stilde * theta);
}

/// Penalized Poisson maximum likelihood at fixed gamma via Newton/IRLS with
/// a log-exposure offset and step halving. Converges on the stationarity of
/// l_p; the reported covariance is (X'WX + gamma*S~)^-1.
inline FitResult fit_at_gamma(const PoissonDataset& data, const PenaltyBlocks& penalty,
                              double gamma, const FitOptions& opts = {},
                              const Eigen::VectorXd* warm_start = nullptr) {
    if (data.rows() == 0) throw numeric_error("cannot fit an empty dataset");
    const double total_y = data.total_events();
    if (total_y <= 0.0)
        throw numeric_error("no positive responses in the fitted component");
    const int d = data.dim();

    Eigen::VectorXd theta;
    if (warm_start && warm_start->size() == d) {
        theta = *warm_start;
    } else {
        theta = Eigen::VectorXd::Zero(d);
        theta[0] = std::log((total_y + 0.5) / data.total_exposure());
    }

    detail::Accum acc;
    double lp_prev = std::numeric_limits<double>::quiet_NaN();
    FitResult result;
    result.gamma = gamma;
    bool converged = false;
    for (int it = 0; it < opts.max_iter; ++it) {
        detail::accumulate(data, theta, true, acc);
        const double lp = acc.loglik - gamma * penalty.quad(theta);
        Eigen::VectorXd gp = acc.score - 2.0 * gamma * (penalty.stilde * theta);
        result.score_inf_norm = gp.template lpNorm<Eigen::Infinity>();
        result.iterations = it;
        if (result.score_inf_norm < 0.01 * opts.score_tol ||
            (it > 0 && std::abs(lp - lp_prev) < opts.tol &&
             result.score_inf_norm < opts.score_tol)) {
            converged = true;
            result.penalized_loglik = lp;
            break;
        }
        lp_prev = lp;

        // Jacobi-equilibrated Newton solve with one refinement step; large
        // gamma makes the raw system badly conditioned
        Eigen::MatrixXd hp = acc.xtwx + 2.0 * gamma * penalty.stilde;
        Eigen::VectorXd scale = hp.diagonal().cwiseMax(1e-300).cwiseSqrt().cwiseInverse();
        Eigen::MatrixXd hs = scale.asDiagonal() * hp * scale.asDiagonal();
        Eigen::LDLT<Eigen::MatrixXd> ldlt(hs);
        if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
            throw numeric_error("penalized information matrix is rank deficient; columns: " +
                                detail::offending_columns(acc.xtwx));
        Eigen::VectorXd direction = scale.asDiagonal() * ldlt.solve(scale.asDiagonal() * gp);
        Eigen::VectorXd residual = gp - hp * direction;
        direction += scale.asDiagonal() * ldlt.solve(scale.asDiagonal() * residual);

        double step = 1.0;
        Eigen::VectorXd proposal;
        double lp_new;
        bool stalled = false;
        for (int h = 0;; ++h) {
            proposal = theta + step * direction;
            lp_new = detail::loglik_only(data, proposal) - gamma * penalty.quad(proposal);
            if (std::isfinite(lp_new) && lp_new >= lp - 1e-12) break;
            if (h >= 30) {
                // no float-representable improvement left; fine if stationary
                if (result.score_inf_norm < opts.score_tol) {
                    stalled = true;
                    break;
                }
                throw numeric_error(
                    "IRLS step halving failed to improve the penalized likelihood");
            }
            step *= 0.5;
        }
        if (stalled) {
            converged = true;
            result.penalized_loglik = lp;
            break;
        }
        theta = proposal;
    }
    if (!converged)
        throw numeric_error("IRLS did not converge in " + std::to_string(opts.max_iter) +
                            " iterations (score inf-norm " + std::to_string(result.score_inf_norm) +
                            ")");

    Eigen::MatrixXd info = acc.xtwx + gamma * penalty.stilde;
    Eigen::LLT<Eigen::MatrixXd> llt(info);
    if (llt.info() != Eigen::Success)
        throw numeric_error("posterior covariance is not positive definite");
    result.theta_hat = theta;
    result.covariance = llt.solve(Eigen::MatrixXd::Identity(d, d));
    return result;
}

namespace detail {

/// Laplace-approximate log marginal likelihood of gamma (additive constants
/// dropped): l_p(theta_hat) + (rank/2) log(2 gamma) - (1/2) log|X'WX + 2 gamma S~|.
inline double laplace_score_at(const PoissonDataset& data, const PenaltyBlocks& penalty,
                               double gamma, const FitOptions& opts, Eigen::VectorXd& warm,
                               double& lp_out) {
    FitResult fit = fit_at_gamma(data, penalty, gamma, opts, warm.size() ? &warm : nullptr);
    warm = fit.theta_hat;
    lp_out = fit.penalized_loglik;
    Accum acc;
    accumulate(data, fit.theta_hat, true, acc);
    Eigen::MatrixXd hp = acc.xtwx + 2.0 * gamma * penalty.stilde;
    Eigen::LLT<Eigen::MatrixXd> llt(hp);
    if (llt.info() != Eigen::Success)
        throw numeric_error("Laplace score: Hessian not positive definite");
    const double logdet =
        2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    return fit.penalized_loglik + 0.5 * penalty.rank * std::log(2.0 * gamma) - 0.5 * logdet;
}

}  // namespace detail

struct GammaSelection {
    double gamma = 1.0;
    bool at_edge = false;
    double score = 0.0;
    Eigen::VectorXd theta_warm;
};

/// Laplace-approximate marginal-likelihood score of one gamma (fit included);
/// exposed so the grid selection below can be checked externally.
inline double marginal_score(const PoissonDataset& data, const PenaltyBlocks& penalty,
                             double gamma, const FitOptions& opts = {}) {
    FitOptions scan_opts = opts;
    scan_opts.score_tol = std::max(opts.score_tol, 1e-4);
    Eigen::VectorXd warm;
    double lp;
    return detail::laplace_score_at(data, penalty, gamma, scan_opts, warm, lp);
}

inline std::vector<double> gamma_grid() {
    std::vector<double> grid;
    for (int i = 0; i <= 20; ++i) grid.push_back(std::pow(10.0, -4.0 + 0.5 * i));
    return grid;
}

/// Selects gamma by maximizing the Laplace-approximate marginal likelihood
/// over the log-spaced grid 10^-4..10^6 (21 points), then one golden-section
/// refinement inside the bracketing grid cells. With a `hint`, a warm
/// hill-climb from the nearest grid point replaces the full scan.
inline GammaSelection select_gamma(const PoissonDataset& data, const PenaltyBlocks& penalty,
                                   const FitOptions& opts = {},
                                   std::optional<double> hint = {},
                                   const Eigen::VectorXd* warm_start = nullptr) {
    GammaSelection sel;
    if (penalty.rank == 0) {
        sel.gamma = 1.0;
        return sel;  // no penalized block: gamma is irrelevant
    }
    // scan fits only feed score comparisons; extreme-gamma fits cannot reach
    // the strict stationarity target in floating point
    FitOptions scan_opts = opts;
    scan_opts.score_tol = std::max(opts.score_tol, 1e-4);
    const std::vector<double> grid = gamma_grid();
    const int n = static_cast<int>(grid.size());
    std::vector<double> score(n, std::numeric_limits<double>::quiet_NaN());
    Eigen::VectorXd warm;
    if (warm_start && warm_start->size() == data.dim()) warm = *warm_start;
    double lp;
    auto eval_grid = [&](int i) {
        if (std::isnan(score[i]))
            score[i] = detail::laplace_score_at(data, penalty, grid[i], scan_opts, warm, lp);
        return score[i];
    };

    int best;
    if (hint) {
        int i = 0;
        for (int j = 1; j < n; ++j)
            if (std::abs(std::log10(grid[j]) - std::log10(*hint)) <
                std::abs(std::log10(grid[i]) - std::log10(*hint)))
                i = j;
        eval_grid(i);
        while (i + 1 < n && eval_grid(i + 1) > score[i]) ++i;
        while (i > 0 && eval_grid(i - 1) > score[i]) --i;
        best = i;
    } else {
        for (int i = 0; i < n; ++i) eval_grid(i);
        best = 0;
        for (int i = 1; i < n; ++i)
            if (score[i] > score[best]) best = i;
    }

    if (best == 0 || best == n - 1) {
        warn("gamma selection hit the grid endpoint " + std::to_string(grid[best]));
        sel.gamma = grid[best];
        sel.at_edge = true;
        sel.score = score[best];
        sel.theta_warm = warm;
        return sel;
    }

    // golden-section refinement on log10(gamma) in the bracketing cells
    const double inv_phi = 0.6180339887498949;
    double lo = std::log10(grid[best - 1]), hi = std::log10(grid[best + 1]);
    double best_log = std::log10(grid[best]), best_score = score[best];
    auto eval_log = [&](double lg) {
        const double s =
            detail::laplace_score_at(data, penalty, std::pow(10.0, lg), scan_opts, warm, lp);
        if (s > best_score) {
            best_score = s;
            best_log = lg;
        }
        return s;
    };
    double x1 = hi - inv_phi * (hi - lo);
    double x2 = lo + inv_phi * (hi - lo);
    double f1 = eval_log(x1), f2 = eval_log(x2);
    while (hi - lo > 0.1) {
        if (f1 < f2) {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = eval_log(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = eval_log(x1);
        }
    }
    sel.gamma = std::pow(10.0, best_log);
    sel.score = best_score;
    sel.theta_warm = warm;
    return sel;
}

/// Full fit entry point: resolves the gamma policy, then fits.
inline FitResult fit_penalized_poisson(const PoissonDataset& data, const PenaltyBlocks& penalty,
                                       const GammaPolicy& policy = {},
                                       const FitOptions& opts = {},
                                       const Eigen::VectorXd* warm_start = nullptr) {
    double gamma = policy.value;
    bool at_edge = false;
    Eigen::VectorXd warm;
    if (policy.automatic && penalty.rank > 0) {
        GammaSelection sel = select_gamma(data, penalty, opts, policy.hint, warm_start);
        gamma = sel.gamma;
        at_edge = sel.at_edge;
        warm = sel.theta_warm;
    }
    FitResult fit = fit_at_gamma(data, penalty, gamma, opts,
                                 warm.size() ? &warm : warm_start);
    fit.gamma_at_edge = at_edge;
    return fit;
}

/// Closed-form intercept-only Poisson fit: theta = log(sum_y / exposure),
/// variance 1/sum_y; a half-count continuity correction keeps the zero-event
/// case finite.
inline FitResult fit_intercept_closed_form(double total_events, double total_exposure,
                                           double sum_response_log_exposure = 0.0) {
    if (total_exposure <= 0.0) throw numeric_error("nonpositive total exposure");
    FitResult r;
    const double y = total_events > 0.0 ? total_events : 0.5;
    r.theta_hat = Eigen::VectorXd::Constant(1, std::log(y / total_exposure));
    r.covariance = Eigen::MatrixXd::Constant(1, 1, 1.0 / y);
    r.gamma = 0.0;
    r.iterations = 0;
    r.score_inf_norm = 0.0;
    r.penalized_loglik =
        total_events * r.theta_hat[0] + sum_response_log_exposure - y;
    return r;
}

}  // namespace remse
