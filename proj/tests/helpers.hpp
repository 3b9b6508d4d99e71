#pragma once

#include <string>
#include <utility>
#include <vector>

#include "remse/events.hpp"
#include "remse/model.hpp"
#include "remse/rng.hpp"

namespace testutil {

inline remse::ActorTable table_with_covariates(int n, remse::Rng& rng) {
    std::vector<std::string> ids;
    for (int i = 0; i < n; ++i) ids.push_back("n" + std::to_string(100 + i));
    remse::ActorTable t(ids);
    std::vector<double> x(n);
    std::vector<int> g(n);
    for (int i = 0; i < n; ++i) {
        x[i] = rng.normal();
        g[i] = rng.uniform_int(3);
    }
    t.set_continuous("x", x);
    t.set_categorical("g", g, {"0", "1", "2"});
    return t;
}

/// Random canonical stream with increasing times and random labels.
inline remse::EventStream random_stream(int n_actors, int n_events, remse::Rng& rng,
                                        double mean_gap = 0.1) {
    remse::EventStream s;
    s.actors = table_with_covariates(n_actors, rng);
    double t = 0.0;
    for (int m = 0; m < n_events; ++m) {
        int a = rng.uniform_int(n_actors);
        int b = rng.uniform_int(n_actors - 1);
        if (b >= a) ++b;
        auto [x, y] = remse::canonical_dyad(a, b);
        t += rng.exponential(1.0 / mean_gap);
        s.events.push_back(remse::Event{x, y, t, static_cast<std::int8_t>(rng.bernoulli(0.6))});
    }
    s.horizon = t;
    s.has_labels = true;
    return s;
}

inline std::vector<std::uint8_t> labels_of(const remse::EventStream& s) {
    std::vector<std::uint8_t> z;
    for (const auto& e : s.events) z.push_back(e.label == 1 ? 1 : 0);
    return z;
}

}  // namespace testutil
