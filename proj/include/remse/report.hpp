#pragma once

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "remse/augment.hpp"
#include "remse/common.hpp"
#include "remse/model.hpp"

namespace remse {

inline json report_to_json(const FitReport& report, const std::string& model_kind,
                           std::uint64_t seed, const json& resolved_config) {
    json coefficients = json::array();
    for (std::size_t i = 0; i < report.names.size(); ++i) {
        coefficients.push_back({{"name", report.names[i]},
                                {"estimate", report.mean[static_cast<long>(i)]},
                                {"sd", std::sqrt(report.cov(i, i))},
                                {"z", report.z_values[static_cast<long>(i)]},
                                {"ci95", {report.ci95(i, 0), report.ci95(i, 1)}}});
    }
    json cov = json::array();
    for (long i = 0; i < report.cov.rows(); ++i) {
        json row = json::array();
        for (long j = 0; j < report.cov.cols(); ++j) row.push_back(report.cov(i, j));
        cov.push_back(row);
    }
    json mean = json::array();
    for (long i = 0; i < report.mean.size(); ++i) mean.push_back(report.mean[i]);
    return json{{"model", model_kind},
                {"seed", seed},
                {"burn_in", report.burn_in},
                {"draws_used", report.draws_used},
                {"pfe_percent", report.pfe_percent},
                {"coefficients", coefficients},
                {"posterior_mean", mean},
                {"posterior_covariance", cov},
                {"config", resolved_config}};
}

inline void write_json_file(const json& doc, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw input_error("cannot write file: " + path);
    out << doc.dump(2) << '\n';
}

inline void write_trace_csv(const ChainTrace& trace, const std::vector<std::string>& names,
                            const std::string& path) {
    std::ofstream out(path);
    if (!out) throw input_error("cannot write file: " + path);
    out << "iteration,spurious_count";
    for (const auto& n : names) out << ',' << n;
    out << '\n';
    char buf[64];
    for (std::size_t i = 0; i < trace.iteration.size(); ++i) {
        out << trace.iteration[i] << ',' << trace.spurious_count[i];
        for (long j = 0; j < trace.theta_hat[i].size(); ++j) {
            std::snprintf(buf, sizeof buf, "%.10g", trace.theta_hat[i][j]);
            out << ',' << buf;
        }
        out << '\n';
    }
}

/// Fitted baseline exp(f(t)) with pointwise 95% bands on a regular t-grid.
/// `block_offset` is the position of the true-component intercept inside the
/// combined coefficient vector.
inline void write_baseline_csv(const FitReport& report, const ComponentModel& truemodel,
                               int block_offset, int grid_points, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw input_error("cannot write file: " + path);
    out << "t,baseline,lower95,upper95\n";
    if (!truemodel.has_spline()) {
        // constant baseline: single coefficient
        const double f = report.mean[block_offset];
        const double sd = std::sqrt(report.cov(block_offset, block_offset));
        char buf[160];
        std::snprintf(buf, sizeof buf, "0,%.10g,%.10g,%.10g\n", std::exp(f),
                      std::exp(f - 1.959963984540054 * sd), std::exp(f + 1.959963984540054 * sd));
        out << buf;
        return;
    }
    const SplineBasis& basis = truemodel.basis();
    const int kc = basis.constrained_size();
    char buf[200];
    for (int g = 0; g < grid_points; ++g) {
        const double t = std::min(
            basis.horizon(), basis.horizon() * static_cast<double>(g) / (grid_points - 1));
        Eigen::VectorXd row = Eigen::VectorXd::Zero(report.mean.size());
        row[block_offset] = 1.0;
        row.segment(block_offset + 1, kc) = basis.eval_constrained(t);
        const double f = row.dot(report.mean);
        const double sd = std::sqrt(row.dot(report.cov * row));
        std::snprintf(buf, sizeof buf, "%.10g,%.10g,%.10g,%.10g\n", t, std::exp(f),
                      std::exp(f - 1.959963984540054 * sd), std::exp(f + 1.959963984540054 * sd));
        out << buf;
    }
}

/// Human-readable summary in the Coef/CI + Z-value layout.
inline void print_summary(std::ostream& out, const FitReport& report,
                          const std::string& model_kind) {
    out << model_kind << " fit (" << report.draws_used << " draws";
    if (report.burn_in > 0) out << " after " << report.burn_in << " burn-in";
    out << ")\n";
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-32s %12s %24s %10s\n", "Coefficient", "Coef.", "CI",
                  "Z Val.");
    out << buf;
    for (std::size_t i = 0; i < report.names.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%-32s %12.3f [%10.3f,%10.3f] %10.3f\n",
                      report.names[i].c_str(), report.mean[static_cast<long>(i)],
                      report.ci95(i, 0), report.ci95(i, 1), report.z_values[static_cast<long>(i)]);
        out << buf;
    }
    std::snprintf(buf, sizeof buf, "%-32s %12.3f\n", "PFE (%)", report.pfe_percent);
    out << buf;
}

}  // namespace remse
