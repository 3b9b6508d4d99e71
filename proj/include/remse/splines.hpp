#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <vector>

#include "remse/common.hpp"

namespace remse {

/// B-spline basis on [0, horizon] with equidistant interior knots, boundary
/// knots repeated degree+1 times, and a sum-to-zero constraint transform.
///
/// The constraint reparametrizes the K coefficients to K-1 so that the
/// transformed model-matrix columns have zero mean over a fixed dense grid;
/// a separate global intercept then carries the level of the log-baseline.
class SplineBasis {
public:
    static SplineBasis build(double horizon, int num_basis, int degree = 3) {
        if (horizon <= 0) throw input_error("spline horizon must be positive");
        if (degree < 0) throw input_error("spline degree must be nonnegative");
        if (num_basis < degree + 1)
            throw input_error("spline K must be at least degree+1");
        SplineBasis b;
        b.degree_ = degree;
        b.num_basis_ = num_basis;
        b.horizon_ = horizon;
        const int n_knots = num_basis + degree + 1;
        const double h = horizon / static_cast<double>(num_basis - degree);
        b.knots_.resize(n_knots);
        for (int i = 0; i < n_knots; ++i) {
            if (i <= degree)
                b.knots_[i] = 0.0;
            else if (i >= num_basis)
                b.knots_[i] = horizon;
            else
                b.knots_[i] = static_cast<double>(i - degree) * h;
        }
        b.build_constraint();
        return b;
    }

    int degree() const { return degree_; }
    int size() const { return num_basis_; }
    double horizon() const { return horizon_; }
    const std::vector<double>& knots() const { return knots_; }

    /// K x (K-1) transform whose columns are orthonormal and orthogonal to
    /// the vector of grid-mean basis values.
    const Eigen::MatrixXd& constraint_transform() const { return constraint_; }

    /// The fixed grid the constraint is built against.
    const std::vector<double>& constraint_grid() const { return grid_; }

    int constrained_size() const { return num_basis_ - 1; }

    /// All K basis values at t (de Boor's algorithm); nonnegative, summing
    /// to one, at most degree+1 nonzero.
    Eigen::VectorXd eval(double t) const {
        if (t < 0.0 || t > horizon_)
            throw input_error("spline evaluation outside [0, horizon]");
        Eigen::VectorXd out = Eigen::VectorXd::Zero(num_basis_);
        const int p = degree_;
        const int span = find_span(t);
        std::vector<double> N(p + 1), left(p + 1), right(p + 1);
        N[0] = 1.0;
        for (int j = 1; j <= p; ++j) {
            left[j] = t - knots_[span + 1 - j];
            right[j] = knots_[span + j] - t;
            double saved = 0.0;
            for (int r = 0; r < j; ++r) {
                const double temp = N[r] / (right[r + 1] + left[j - r]);
                N[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            N[j] = saved;
        }
        for (int r = 0; r <= p; ++r) out[span - p + r] = N[r];
        return out;
    }

    /// Constrained row: eval(t) mapped through the transform, length K-1.
    Eigen::VectorXd eval_constrained(double t) const {
        return constraint_.transpose() * eval(t);
    }

private:
    int find_span(double t) const {
        // valid spans are [degree, num_basis - 1]; t == horizon maps to the last
        if (t >= knots_[num_basis_]) return num_basis_ - 1;
        int lo = degree_, hi = num_basis_;
        while (hi - lo > 1) {
            const int mid = (lo + hi) / 2;
            (t < knots_[mid]) ? hi = mid : lo = mid;
        }
        return lo;
    }

    void build_constraint() {
        const int G = 1001;
        grid_.resize(G);
        for (int g = 0; g < G; ++g)
            grid_[g] = std::min(
                horizon_, horizon_ * static_cast<double>(g) / static_cast<double>(G - 1));
        Eigen::VectorXd mean = Eigen::VectorXd::Zero(num_basis_);
        for (double t : grid_) mean += eval_unchecked(t);
        mean /= static_cast<double>(G);
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(mean);
        Eigen::MatrixXd q = qr.householderQ();
        constraint_ = q.rightCols(num_basis_ - 1);
    }

    Eigen::VectorXd eval_unchecked(double t) const {
        Eigen::VectorXd out = Eigen::VectorXd::Zero(num_basis_);
        const int p = degree_;
        const int span = find_span(t);
        std::vector<double> N(p + 1), left(p + 1), right(p + 1);
        N[0] = 1.0;
        for (int j = 1; j <= p; ++j) {
            left[j] = t - knots_[span + 1 - j];
            right[j] = knots_[span + j] - t;
            double saved = 0.0;
            for (int r = 0; r < j; ++r) {
                const double temp = N[r] / (right[r + 1] + left[j - r]);
                N[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            N[j] = saved;
        }
        for (int r = 0; r <= p; ++r) out[span - p + r] = N[r];
        return out;
    }

    int degree_ = 3;
    int num_basis_ = 10;
    double horizon_ = 1.0;
    std::vector<double> knots_;
    Eigen::MatrixXd constraint_;
    std::vector<double> grid_;
};

/// Difference penalty S = D_d' D_d on adjacent spline coefficients.
struct PenaltyMatrix {
    int order = 2;
    Eigen::MatrixXd matrix;  // K x K, PSD, rank K - order

    static PenaltyMatrix build(int num_basis, int order) {
        if (order < 1 || order >= num_basis)
            throw input_error("penalty order must satisfy 1 <= order < K");
        Eigen::MatrixXd d = Eigen::MatrixXd::Identity(num_basis, num_basis);
        for (int k = 0; k < order; ++k) {
            const int rows = static_cast<int>(d.rows()) - 1;
            Eigen::MatrixXd d1(rows, d.rows());
            d1.setZero();
            for (int i = 0; i < rows; ++i) {
                d1(i, i) = -1.0;
                d1(i, i + 1) = 1.0;
            }
            d = (d1 * d).eval();
        }
        PenaltyMatrix p;
        p.order = order;
        p.matrix = d.transpose() * d;
        return p;
    }

    /// Penalty in constrained coordinates: C' S C for transform C.
    Eigen::MatrixXd constrained(const SplineBasis& basis) const {
        const Eigen::MatrixXd& c = basis.constraint_transform();
        return c.transpose() * matrix * c;
    }
};

}  // namespace remse
