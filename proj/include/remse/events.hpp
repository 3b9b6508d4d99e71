#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "remse/common.hpp"
#include "remse/csv.hpp"

namespace remse {

/// One undirected dyadic event, stored canonically with actor_a < actor_b
/// under the actor table's index order.
struct Event {
    int actor_a = -1;
    int actor_b = -1;
    double time = 0.0;
    std::int8_t label = -1;  // 1 true, 0 spurious, -1 unknown
};

inline std::pair<int, int> canonical_dyad(int a, int b) {
    return a < b ? std::make_pair(a, b) : std::make_pair(b, a);
}

/// Actor universe plus exogenous covariates. Actor ids are kept sorted so
/// index order gives the fixed total order used for canonicalization.
class ActorTable {
public:
    ActorTable() = default;

    explicit ActorTable(std::vector<std::string> ids) {
        std::sort(ids.begin(), ids.end());
        ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
        ids_ = std::move(ids);
        for (std::size_t i = 0; i < ids_.size(); ++i) index_[ids_[i]] = static_cast<int>(i);
    }

    int size() const { return static_cast<int>(ids_.size()); }
    const std::vector<std::string>& ids() const { return ids_; }
    const std::string& id(int i) const { return ids_[i]; }

    int index_of(const std::string& id) const {
        auto it = index_.find(id);
        return it == index_.end() ? -1 : it->second;
    }

    bool has_continuous(const std::string& name) const { return continuous_.count(name) > 0; }
    bool has_categorical(const std::string& name) const { return categorical_.count(name) > 0; }
    bool has_dyadic(const std::string& name) const { return dyadic_.count(name) > 0; }

    void set_continuous(const std::string& name, std::vector<double> values) {
        if (static_cast<int>(values.size()) != size())
            throw input_error("continuous covariate '" + name + "' not total over actors");
        continuous_[name] = std::move(values);
    }

    void set_categorical(const std::string& name, std::vector<int> codes,
                         std::vector<std::string> levels) {
        if (static_cast<int>(codes.size()) != size())
            throw input_error("categorical covariate '" + name + "' not total over actors");
        categorical_[name] = std::move(codes);
        categorical_levels_[name] = std::move(levels);
    }

    /// Dyadic covariates are stored as given (directed cells) and
    /// symmetrized on read: value(a,b) = (raw(a,b)+raw(b,a))/2.
    void set_dyadic(const std::string& name, std::vector<double> raw_matrix) {
        if (static_cast<long>(raw_matrix.size()) != static_cast<long>(size()) * size())
            throw input_error("dyadic covariate '" + name + "' has wrong dimensions");
        dyadic_[name] = std::move(raw_matrix);
    }

    double continuous(const std::string& name, int actor) const {
        auto it = continuous_.find(name);
        if (it == continuous_.end()) throw input_error("unknown continuous covariate: " + name);
        return it->second[actor];
    }

    int categorical(const std::string& name, int actor) const {
        auto it = categorical_.find(name);
        if (it == categorical_.end()) throw input_error("unknown categorical covariate: " + name);
        return it->second[actor];
    }

    double dyadic(const std::string& name, int a, int b) const {
        auto it = dyadic_.find(name);
        if (it == dyadic_.end()) throw input_error("unknown dyadic covariate: " + name);
        const auto& m = it->second;
        return 0.5 * (m[static_cast<std::size_t>(a) * size() + b] +
                      m[static_cast<std::size_t>(b) * size() + a]);
    }

    const std::map<std::string, std::vector<double>>& continuous_columns() const { return continuous_; }
    const std::map<std::string, std::vector<int>>& categorical_columns() const { return categorical_; }

private:
    std::vector<std::string> ids_;
    std::map<std::string, int> index_;
    std::map<std::string, std::vector<double>> continuous_;
    std::map<std::string, std::vector<int>> categorical_;
    std::map<std::string, std::vector<std::string>> categorical_levels_;
    std::map<std::string, std::vector<double>> dyadic_;  // dense n*n, row-major
};

/// Set of dyads that can ever experience an event. Time-constant.
class RiskSet {
public:
    RiskSet() = default;

    static RiskSet all_pairs(int n_actors) {
        RiskSet rs;
        rs.n_ = n_actors;
        rs.pairs_.reserve(static_cast<std::size_t>(n_actors) * (n_actors - 1) / 2);
        for (int a = 0; a < n_actors; ++a)
            for (int b = a + 1; b < n_actors; ++b) rs.pairs_.emplace_back(a, b);
        rs.build_lookup();
        return rs;
    }

    static RiskSet from_pairs(int n_actors, std::vector<std::pair<int, int>> pairs) {
        RiskSet rs;
        rs.n_ = n_actors;
        for (auto& p : pairs) {
            if (p.first == p.second) throw input_error("risk set contains a self-pair");
            rs.pairs_.push_back(canonical_dyad(p.first, p.second));
        }
        std::sort(rs.pairs_.begin(), rs.pairs_.end());
        rs.pairs_.erase(std::unique(rs.pairs_.begin(), rs.pairs_.end()), rs.pairs_.end());
        rs.build_lookup();
        return rs;
    }

    int n_actors() const { return n_; }
    std::size_t size() const { return pairs_.size(); }
    const std::vector<std::pair<int, int>>& pairs() const { return pairs_; }

    int index_of(int a, int b) const {
        auto [x, y] = canonical_dyad(a, b);
        return lookup_[static_cast<std::size_t>(x) * n_ + y];
    }

    bool contains(int a, int b) const { return index_of(a, b) >= 0; }

private:
    void build_lookup() {
        lookup_.assign(static_cast<std::size_t>(n_) * n_, -1);
        for (std::size_t k = 0; k < pairs_.size(); ++k) {
            auto [a, b] = pairs_[k];
            lookup_[static_cast<std::size_t>(a) * n_ + b] = static_cast<int>(k);
            lookup_[static_cast<std::size_t>(b) * n_ + a] = static_cast<int>(k);
        }
    }

    int n_ = 0;
    std::vector<std::pair<int, int>> pairs_;
    std::vector<int> lookup_;
};

inline std::size_t risk_set_size(const RiskSet& rs) { return rs.size(); }

/// Ordered stream of canonical events over [0, horizon] with its actor table.
struct EventStream {
    std::vector<Event> events;
    double horizon = 0.0;
    ActorTable actors;
    bool has_labels = false;

    std::size_t size() const { return events.size(); }

    void validate() const {
        for (std::size_t m = 0; m < events.size(); ++m) {
            const Event& e = events[m];
            if (e.actor_a == e.actor_b)
                throw input_error("event " + std::to_string(m + 1) + " is a self-loop");
            if (e.actor_a > e.actor_b)
                throw input_error("event " + std::to_string(m + 1) + " not canonicalized");
            if (e.time < 0) throw input_error("event " + std::to_string(m + 1) + " has negative time");
            if (e.time > horizon)
                throw input_error("event " + std::to_string(m + 1) + " beyond the horizon");
            if (m > 0 && !(events[m - 1].time < e.time))
                throw input_error("events " + std::to_string(m) + "/" + std::to_string(m + 1) +
                                  " are not strictly increasing in time");
            if (e.actor_a < 0 || e.actor_b >= actors.size())
                throw input_error("event " + std::to_string(m + 1) + " references an unknown actor");
        }
    }

    /// Re-index events onto a new actor table (same ids, possibly extended).
    void rebind(const ActorTable& table) {
        for (Event& e : events) {
            int a = table.index_of(actors.id(e.actor_a));
            int b = table.index_of(actors.id(e.actor_b));
            if (a < 0 || b < 0) throw input_error("rebind: actor missing from new table");
            auto [x, y] = canonical_dyad(a, b);
            e.actor_a = x;
            e.actor_b = y;
        }
        actors = table;
    }
};

struct EventSchema {
    std::string time = "time";
    std::string actor_a = "actor_a";
    std::string actor_b = "actor_b";
    std::string label = "label";  // optional column
};

struct IngestOptions {
    bool jitter_ties = true;
    std::optional<double> horizon;  // default: max event time
};

namespace detail {

/// Deterministic tie-jitter: the k-th event (k = 0, 1, ...) of a
/// tied group gets +k*eps, eps = 1e-9 * mean inter-event gap, preserving
/// input order inside the group.
inline void resolve_ties(std::vector<Event>& events, bool jitter) {
    if (events.size() < 2) return;
    double span = events.back().time - events.front().time;
    double mean_gap = span / static_cast<double>(events.size() - 1);
    double eps = 1e-9 * mean_gap;
    if (eps <= 0.0) eps = 1e-9 * std::max(1.0, std::abs(events.back().time));

    bool any_tie = false;
    std::size_t i = 0;
    while (i < events.size()) {
        std::size_t j = i + 1;
        while (j < events.size() && events[j].time == events[i].time) ++j;
        if (j - i > 1) {
            any_tie = true;
            if (!jitter) {
                for (std::size_t k = i; k + 1 < j; ++k)
                    for (std::size_t l = k + 1; l < j; ++l)
                        if (events[k].actor_a == events[l].actor_a &&
                            events[k].actor_b == events[l].actor_b)
                            throw input_error("duplicate (dyad, time) at t=" +
                                              std::to_string(events[i].time) +
                                              " with tie-breaking disabled");
                throw input_error("tied event times at t=" + std::to_string(events[i].time) +
                                  " with tie-breaking disabled");
            }
            double next = j < events.size() ? events[j].time : events[j - 1].time + 1.0;
            double step = std::min(eps, (next - events[i].time) / static_cast<double>(j - i + 1));
            for (std::size_t k = i + 1; k < j; ++k)
                events[k].time = events[i].time + static_cast<double>(k - i) * step;
        }
        i = j;
    }
    if (any_tie && jitter) warn("tied event times were jittered deterministically");
}

}  // namespace detail

inline EventStream ingest_events(const std::string& path, const EventSchema& schema = {},
                                 const IngestOptions& options = {}) {
    csv::Table t = csv::read_file(path);
    const int ct = t.column(schema.time);
    const int ca = t.column(schema.actor_a);
    const int cb = t.column(schema.actor_b);
    const int cl = t.column(schema.label);
    if (ct < 0 || ca < 0 || cb < 0)
        throw input_error(path + ": missing required column(s) '" + schema.time + "', '" +
                          schema.actor_a + "', '" + schema.actor_b + "'");

    struct RawEvent {
        std::string a, b;
        double time;
        std::int8_t label;
        std::size_t row;
    };
    std::vector<RawEvent> raw;
    std::vector<std::string> ids;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& row = t.rows[r];
        const std::string where = path + " row " + std::to_string(r + 2);
        RawEvent e;
        e.a = row[ca];
        e.b = row[cb];
        e.time = csv::parse_double(row[ct], where);
        e.row = r + 2;
        if (e.a.empty() || e.b.empty()) throw input_error(where + ": empty actor id");
        if (e.a == e.b) throw input_error(where + ": self-loop event (" + e.a + ")");
        if (!std::isfinite(e.time)) throw input_error(where + ": non-finite event time");
        if (e.time < 0) throw input_error(where + ": negative event time");
        e.label = -1;
        if (cl >= 0) {
            double v = csv::parse_double(row[cl], where);
            if (v != 0.0 && v != 1.0) throw input_error(where + ": label must be 0 or 1");
            e.label = static_cast<std::int8_t>(v);
        }
        ids.push_back(e.a);
        ids.push_back(e.b);
        raw.push_back(std::move(e));
    }

    EventStream s;
    s.actors = ActorTable(std::move(ids));
    s.has_labels = cl >= 0;
    s.events.reserve(raw.size());
    for (const auto& e : raw) {
        auto [a, b] = canonical_dyad(s.actors.index_of(e.a), s.actors.index_of(e.b));
        s.events.push_back(Event{a, b, e.time, e.label});
    }
    std::stable_sort(s.events.begin(), s.events.end(),
                     [](const Event& x, const Event& y) { return x.time < y.time; });
    detail::resolve_ties(s.events, options.jitter_ties);

    double tmax = s.events.empty() ? 0.0 : s.events.back().time;
    s.horizon = options.horizon.value_or(tmax);
    if (s.horizon < tmax) throw input_error("horizon is smaller than the last event time");
    s.validate();
    return s;
}

inline void write_events(const EventStream& s, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw input_error("cannot write file: " + path);
    out << (s.has_labels ? "time,actor_a,actor_b,label\n" : "time,actor_a,actor_b\n");
    char buf[64];
    for (const Event& e : s.events) {
        std::snprintf(buf, sizeof buf, "%.17g", e.time);
        out << buf << ',' << s.actors.id(e.actor_a) << ',' << s.actors.id(e.actor_b);
        if (s.has_labels) out << ',' << static_cast<int>(e.label);
        out << '\n';
    }
}

struct CovariateDeclaration {
    std::vector<std::string> continuous;
    std::vector<std::string> categorical;
};

/// Reads the per-actor covariate file (header: actor,<name>,...) and returns
/// a table over the union of `actors` and the file's actors with total
/// covariate maps. Every actor already in `actors` must appear in the file.
inline ActorTable ingest_covariates(const std::string& path, const ActorTable& actors,
                                    const CovariateDeclaration& decl) {
    csv::Table t = csv::read_file(path);
    const int cactor = t.column("actor");
    if (cactor < 0) throw input_error(path + ": missing 'actor' column");

    std::vector<std::string> ids;
    std::set<std::string> seen;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const std::string& id = t.rows[r][cactor];
        if (!seen.insert(id).second)
            throw input_error(path + ": duplicate actor row '" + id + "'");
        ids.push_back(id);
    }
    for (const std::string& id : actors.ids())
        if (!seen.count(id))
            throw input_error(path + ": actor '" + id + "' appears in events but not in the covariate file");
    for (const std::string& id : actors.ids()) ids.push_back(id);

    ActorTable merged(ids);

    for (const std::string& name : decl.continuous) {
        const int c = t.column(name);
        if (c < 0) throw input_error(path + ": missing declared continuous column '" + name + "'");
        std::vector<double> values(merged.size());
        for (std::size_t r = 0; r < t.rows.size(); ++r)
            values[merged.index_of(t.rows[r][cactor])] =
                csv::parse_double(t.rows[r][c], path + " row " + std::to_string(r + 2) +
                                                    " column '" + name + "'");
        merged.set_continuous(name, std::move(values));
    }
    for (const std::string& name : decl.categorical) {
        const int c = t.column(name);
        if (c < 0) throw input_error(path + ": missing declared categorical column '" + name + "'");
        std::vector<std::string> levels;
        for (const auto& row : t.rows) levels.push_back(row[c]);
        std::sort(levels.begin(), levels.end());
        levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
        std::vector<int> codes(merged.size());
        for (const auto& row : t.rows) {
            int code = static_cast<int>(
                std::lower_bound(levels.begin(), levels.end(), row[c]) - levels.begin());
            codes[merged.index_of(row[cactor])] = code;
        }
        merged.set_categorical(name, std::move(codes), std::move(levels));
    }
    return merged;
}

/// Dyadic covariate file: header actor_a,actor_b,value; missing pairs are 0.
inline void ingest_dyadic_covariate(const std::string& path, const std::string& name,
                                    ActorTable& actors) {
    csv::Table t = csv::read_file(path);
    const int ca = t.column("actor_a");
    const int cb = t.column("actor_b");
    const int cv = t.column("value");
    if (ca < 0 || cb < 0 || cv < 0)
        throw input_error(path + ": expected header actor_a,actor_b,value");
    const int n = actors.size();
    std::vector<double> m(static_cast<std::size_t>(n) * n, 0.0);
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const std::string where = path + " row " + std::to_string(r + 2);
        int a = actors.index_of(t.rows[r][ca]);
        int b = actors.index_of(t.rows[r][cb]);
        if (a < 0 || b < 0) throw input_error(where + ": unknown actor id");
        m[static_cast<std::size_t>(a) * n + b] = csv::parse_double(t.rows[r][cv], where);
    }
    actors.set_dyadic(name, std::move(m));
}

}  // namespace remse
