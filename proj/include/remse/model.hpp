#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "remse/events.hpp"
#include "remse/netstats.hpp"
#include "remse/splines.hpp"

namespace remse {

/// Structure of one component intensity: a global intercept, an optional
/// sum-to-zero constrained spline log-baseline, and a list of statistics.
/// Coefficient layout: [intercept, spline_1..spline_{K-1}, stats...].
class ComponentModel {
public:
    static ComponentModel constant() { return ComponentModel{}; }

    static ComponentModel with_stats(std::vector<StatisticSpec> specs) {
        ComponentModel m;
        m.specs_ = std::move(specs);
        return m;
    }

    static ComponentModel with_spline(std::vector<StatisticSpec> specs, SplineBasis basis,
                                      PenaltyMatrix penalty) {
        ComponentModel m;
        m.specs_ = std::move(specs);
        m.basis_ = std::move(basis);
        m.penalty_ = std::move(penalty);
        return m;
    }

    bool has_spline() const { return basis_.has_value(); }
    const SplineBasis& basis() const { return *basis_; }
    const PenaltyMatrix& penalty() const { return *penalty_; }
    const std::vector<StatisticSpec>& specs() const { return specs_; }

    int spline_cols() const { return has_spline() ? basis_->constrained_size() : 0; }
    int dim() const { return 1 + spline_cols() + static_cast<int>(specs_.size()); }
    int stats_offset() const { return 1 + spline_cols(); }

    std::vector<std::string> column_names() const {
        std::vector<std::string> names;
        names.emplace_back("intercept");
        for (int j = 1; j <= spline_cols(); ++j) names.push_back("spline_" + std::to_string(j));
        for (const auto& s : specs_) names.push_back(s.name());
        return names;
    }

    /// Full design row for dyad (a,b): statistics on `state` (history at t^-),
    /// spline evaluated at `t_spline`.
    void design_row(const HistoryState& state, const ActorTable& actors, int a, int b,
                    double t_spline, double* out) const {
        out[0] = 1.0;
        if (has_spline()) {
            const Eigen::VectorXd row = basis_->eval_constrained(t_spline);
            for (int j = 0; j < row.size(); ++j) out[1 + j] = row[j];
        }
        stat_row(specs_, state, actors, a, b, out + stats_offset());
    }

    double log_intensity(const Eigen::VectorXd& theta, const HistoryState& state,
                         const ActorTable& actors, int a, int b, double t) const {
        Eigen::VectorXd x(dim());
        design_row(state, actors, a, b, t, x.data());
        return theta.dot(x);
    }

private:
    std::vector<StatisticSpec> specs_;
    std::optional<SplineBasis> basis_;
    std::optional<PenaltyMatrix> penalty_;
};

/// Extended penalty matrix in fit coordinates (zero outside the constrained
/// spline block) together with its rank, needed by the Laplace score.
struct PenaltyBlocks {
    Eigen::MatrixXd stilde;
    int rank = 0;

    double quad(const Eigen::VectorXd& theta) const { return theta.dot(stilde * theta); }
};

inline PenaltyBlocks make_penalty_blocks(const ComponentModel& model) {
    PenaltyBlocks p;
    const int d = model.dim();
    p.stilde = Eigen::MatrixXd::Zero(d, d);
    if (model.has_spline()) {
        Eigen::MatrixXd sc = model.penalty().constrained(model.basis());
        p.stilde.block(1, 1, sc.rows(), sc.cols()) = sc;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sc);
        const double cutoff = 1e-10 * std::max(1.0, es.eigenvalues().maxCoeff());
        p.rank = static_cast<int>((es.eigenvalues().array() > cutoff).count());
    }
    return p;
}

/// Per-dyad statistic rows over a fixed risk set with exogenous values
/// precomputed (they are time-constant); endogenous values are read from the
/// history each call.
class StatRowCache {
public:
    StatRowCache(const std::vector<StatisticSpec>& specs, const ActorTable& actors,
                 const RiskSet& rs)
        : specs_(&specs), actors_(&actors), rs_(&rs) {
        int n_exo = 0;
        slot_.resize(specs.size(), -1);
        for (std::size_t j = 0; j < specs.size(); ++j)
            if (specs[j].covariate_based()) slot_[j] = n_exo++;
        n_exo_ = n_exo;
        exo_.resize(rs.size() * static_cast<std::size_t>(n_exo));
        HistoryState empty(rs.n_actors());
        for (std::size_t k = 0; k < rs.size(); ++k) {
            auto [a, b] = rs.pairs()[k];
            for (std::size_t j = 0; j < specs.size(); ++j)
                if (slot_[j] >= 0)
                    exo_[k * n_exo_ + slot_[j]] = stat_value(specs[j], empty, actors, a, b);
        }
    }

    void fill(const HistoryState& state, std::size_t dyad_index, double* out) const {
        auto [a, b] = rs_->pairs()[dyad_index];
        for (std::size_t j = 0; j < specs_->size(); ++j)
            out[j] = slot_[j] >= 0 ? exo_[dyad_index * n_exo_ + slot_[j]]
                                   : stat_value((*specs_)[j], state, *actors_, a, b);
    }

private:
    const std::vector<StatisticSpec>* specs_;
    const ActorTable* actors_;
    const RiskSet* rs_;
    std::vector<int> slot_;
    std::size_t n_exo_ = 0;
    std::vector<double> exo_;
};

}  // namespace remse
