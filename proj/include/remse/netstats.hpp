#pragma once

#include <bit>
#include <cstdint>
#include <string>
#include <vector>

#include "remse/common.hpp"
#include "remse/events.hpp"

namespace remse {

enum class StatKind {
    degree_abs,
    repetition_count,
    first_repetition,
    triangle,
    sim_cont,
    dissim_cont,
    sum_cont,
    match_cat,
    dyadic_network,
};

struct StatisticSpec {
    StatKind kind;
    std::string covariate;  // required iff the kind is covariate-based

    bool covariate_based() const {
        switch (kind) {
            case StatKind::sim_cont:
            case StatKind::dissim_cont:
            case StatKind::sum_cont:
            case StatKind::match_cat:
            case StatKind::dyadic_network:
                return true;
            default:
                return false;
        }
    }

    bool endogenous() const { return !covariate_based(); }

    std::string name() const {
        std::string k = to_string(kind);
        return covariate.empty() ? k : k + ":" + covariate;
    }

    static std::string to_string(StatKind k) {
        switch (k) {
            case StatKind::degree_abs: return "degree_abs";
            case StatKind::repetition_count: return "repetition_count";
            case StatKind::first_repetition: return "first_repetition";
            case StatKind::triangle: return "triangle";
            case StatKind::sim_cont: return "sim_cont";
            case StatKind::dissim_cont: return "dissim_cont";
            case StatKind::sum_cont: return "sum_cont";
            case StatKind::match_cat: return "match_cat";
            case StatKind::dyadic_network: return "dyadic_network";
        }
        return "?";
    }

    static StatKind kind_from_string(const std::string& s) {
        if (s == "degree_abs") return StatKind::degree_abs;
        if (s == "repetition_count") return StatKind::repetition_count;
        if (s == "first_repetition") return StatKind::first_repetition;
        if (s == "triangle") return StatKind::triangle;
        if (s == "sim_cont") return StatKind::sim_cont;
        if (s == "dissim_cont") return StatKind::dissim_cont;
        if (s == "sum_cont") return StatKind::sum_cont;
        if (s == "match_cat") return StatKind::match_cat;
        if (s == "dyadic_network") return StatKind::dyadic_network;
        throw input_error("unknown statistic kind: " + s);
    }
};

inline bool operator==(const StatisticSpec& x, const StatisticSpec& y) {
    return x.kind == y.kind && x.covariate == y.covariate;
}

/// Counting-process state strictly before the evaluation time: per-dyad
/// counts N_ab(t^-), binarized adjacency, and degrees (distinct partners).
class HistoryState {
public:
    HistoryState() = default;

    explicit HistoryState(int n_actors)
        : n_(n_actors),
          words_((n_actors + 63) / 64),
          pair_counts_(static_cast<std::size_t>(n_actors) * (n_actors - 1) / 2, 0),
          degrees_(n_actors, 0),
          adjacency_(static_cast<std::size_t>(n_actors) * words_, 0) {}

    int n_actors() const { return n_; }
    std::uint64_t total_events() const { return total_; }

    std::uint32_t pair_count(int a, int b) const { return pair_counts_[tri_index(a, b)]; }
    int degree(int a) const { return degrees_[a]; }

    bool has_edge(int a, int b) const {
        return (adjacency_[static_cast<std::size_t>(a) * words_ + b / 64] >>
                (b % 64)) & 1u;
    }

    /// Number of distinct third parties linked to both a and b.
    int common_partners(int a, int b) const {
        const std::uint64_t* ra = &adjacency_[static_cast<std::size_t>(a) * words_];
        const std::uint64_t* rb = &adjacency_[static_cast<std::size_t>(b) * words_];
        int c = 0;
        for (int w = 0; w < words_; ++w) c += std::popcount(ra[w] & rb[w]);
        return c;
    }

    void apply_event(int a, int b) {
        auto [x, y] = canonical_dyad(a, b);
        std::uint32_t& cnt = pair_counts_[tri_index(x, y)];
        if (cnt == 0) {
            set_edge(x, y);
            set_edge(y, x);
            ++degrees_[x];
            ++degrees_[y];
        }
        ++cnt;
        ++total_;
    }

private:
    std::size_t tri_index(int a, int b) const {
        auto [x, y] = canonical_dyad(a, b);
        return static_cast<std::size_t>(x) * (2 * n_ - x - 1) / 2 + (y - x - 1);
    }

    void set_edge(int a, int b) {
        adjacency_[static_cast<std::size_t>(a) * words_ + b / 64] |= (1ull << (b % 64));
    }

    int n_ = 0;
    int words_ = 0;
    std::vector<std::uint32_t> pair_counts_;
    std::vector<int> degrees_;
    std::vector<std::uint64_t> adjacency_;
    std::uint64_t total_ = 0;
};

namespace detail {
inline bool& dissim_clamp_warned() {
    static bool warned = false;
    return warned;
}
}  // namespace detail

/// Value of one sufficient statistic for the dyad (a,b) given history at t^-.
/// All statistics are symmetric in (a,b). The counting process is the
/// symmetric adjacency matrix N_ab = N_ba, so the degree sums count each
/// distinct partner twice and the triangle sum counts each shared partner
/// four times.
inline double stat_value(const StatisticSpec& spec, const HistoryState& state,
                         const ActorTable& actors, int a, int b) {
    switch (spec.kind) {
        case StatKind::degree_abs:
            return 2.0 * std::abs(state.degree(a) - state.degree(b));
        case StatKind::repetition_count:
            return static_cast<double>(state.pair_count(a, b));
        case StatKind::first_repetition:
            return state.pair_count(a, b) > 0 ? 1.0 : 0.0;
        case StatKind::triangle:
            return 4.0 * static_cast<double>(state.common_partners(a, b));
        case StatKind::sim_cont:
            return std::abs(actors.continuous(spec.covariate, a) -
                            actors.continuous(spec.covariate, b));
        case StatKind::dissim_cont: {
            double d = std::abs(actors.continuous(spec.covariate, a) -
                                actors.continuous(spec.covariate, b));
            if (d < 1e-6) {
                if (!detail::dissim_clamp_warned()) {
                    detail::dissim_clamp_warned() = true;
                    warn("dissim_cont denominator clamped at 1e-6 (identical covariate values)");
                }
                d = 1e-6;
            }
            return 1.0 / d;
        }
        case StatKind::sum_cont:
            return actors.continuous(spec.covariate, a) + actors.continuous(spec.covariate, b);
        case StatKind::match_cat:
            return actors.categorical(spec.covariate, a) == actors.categorical(spec.covariate, b)
                       ? 1.0
                       : 0.0;
        case StatKind::dyadic_network:
            return actors.dyadic(spec.covariate, a, b);
    }
    throw input_error("unhandled statistic kind");
}

inline void stat_row(const std::vector<StatisticSpec>& specs, const HistoryState& state,
                     const ActorTable& actors, int a, int b, double* out) {
    for (std::size_t j = 0; j < specs.size(); ++j) out[j] = stat_value(specs[j], state, actors, a, b);
}

inline std::vector<double> stat_row(const std::vector<StatisticSpec>& specs,
                                    const HistoryState& state, const ActorTable& actors, int a,
                                    int b) {
    std::vector<double> out(specs.size());
    stat_row(specs, state, actors, a, b, out.data());
    return out;
}

}  // namespace remse
