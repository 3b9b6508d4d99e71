#include <catch2/catch.hpp>
#include <cmath>
#include <map>

#include "helpers.hpp"
#include "remse/poisson.hpp"
#include "remse/simulate.hpp"

using namespace remse;

TEST_CASE("equal constant rates spread events evenly over dyads") {
    GeneratorSpec spec;
    spec.n_actors = 3;
    spec.true_model.intercept = 0.0;
    spec.stop.true_events = 10000;
    Rng rng(5);
    EventStream s = generate(spec, rng);
    std::map<std::pair<int, int>, int> counts;
    for (const auto& e : s.events) ++counts[{e.actor_a, e.actor_b}];
    REQUIRE(counts.size() == 3);
    const double se = std::sqrt((1.0 / 3) * (2.0 / 3) / 10000);
    for (const auto& [dyad, c] : counts)
        CHECK(std::abs(c / 10000.0 - 1.0 / 3) < 3.0 * se);
}

TEST_CASE("setup 1 realizes a small spurious fraction at full scale") {
    double mean_pfe = 0.0;
    const int reps = 4;
    for (int r = 0; r < reps; ++r) {
        GeneratorSpec spec = dg_spec(1, 40, 500);
        Rng rng(400 + r);
        GenerationMeta meta;
        generate(spec, rng, &meta);
        mean_pfe += meta.realized_pfe_percent / reps;
    }
    CHECK(mean_pfe > 0.2);
    CHECK(mean_pfe < 6.0);
}

TEST_CASE("setup 2 generates no spurious labels") {
    GeneratorSpec spec = dg_spec(2, 12, 150);
    Rng rng(7);
    GenerationMeta meta;
    EventStream s = generate(spec, rng, &meta);
    CHECK(meta.n_spurious == 0);
    for (const auto& e : s.events) CHECK(e.label == 1);
}

TEST_CASE("generation is reproducible from the seed") {
    GeneratorSpec spec = dg_spec(1, 10, 60);
    Rng a(11), b(11), c(12);
    EventStream sa = generate(spec, a);
    EventStream sb = generate(spec, b);
    EventStream sc = generate(spec, c);
    REQUIRE(sa.size() == sb.size());
    for (std::size_t m = 0; m < sa.size(); ++m) {
        CHECK(sa.events[m].time == sb.events[m].time);
        CHECK(sa.events[m].actor_a == sb.events[m].actor_a);
        CHECK(sa.events[m].label == sb.events[m].label);
    }
    CHECK(sc.events[0].time != sa.events[0].time);
}

TEST_CASE("labels are exact ground truth for the component histories") {
    GeneratorSpec spec = dg_spec(1, 12, 120);
    Rng rng(13);
    GenerationMeta meta;
    EventStream s = generate(spec, rng, &meta);
    RiskSet rs = RiskSet::all_pairs(12);
    ComponentModel constant = ComponentModel::constant();
    std::vector<std::uint8_t> z;
    for (const auto& e : s.events) z.push_back(e.label);
    PoissonDataset data(s, rs, constant, z, EventClass::True);
    CHECK(data.total_events() == static_cast<double>(meta.n_true));
    HistoryState h(12);
    for (const auto& e : s.events)
        if (e.label == 1) h.apply_event(e.actor_a, e.actor_b);
    CHECK(h.total_events() == static_cast<std::uint64_t>(meta.n_true));
}

TEST_CASE("thinning consistency: merged generation matches analytic attribution") {
    GeneratorSpec spec;
    spec.n_actors = 3;
    spec.true_model.intercept = std::log(0.4);
    IntensityModel spurious;
    spurious.intercept = std::log(0.2);
    spec.spurious_model = spurious;
    spec.stop.horizon = 5.0;
    const double p_true = 0.4 / 0.6;
    const double rate_total = 3 * 0.6;  // three dyads

    long total = 0, total_true = 0;
    Rng rng(17);
    for (int rep = 0; rep < 200; ++rep) {
        GenerationMeta meta;
        Rng rep_rng = rng.derive(rep);
        generate(spec, rep_rng, &meta);
        total += meta.n_events;
        total_true += meta.n_true;
    }
    const double expected_count = rate_total * 5.0 * 200;
    CHECK(std::abs(total - expected_count) < 3.0 * std::sqrt(expected_count));
    const double se = std::sqrt(p_true * (1 - p_true) / static_cast<double>(total));
    CHECK(std::abs(static_cast<double>(total_true) / total - p_true) < 3.0 * se);
}

TEST_CASE("interevent waiting times pass the KS check") {
    GeneratorSpec spec;
    spec.n_actors = 2;
    spec.true_model.intercept = 0.0;  // single dyad, total rate 1
    spec.stop.horizon = 1.0;
    Rng rng(19);
    int ok = 0;
    for (int rep = 0; rep < 20; ++rep) {
        Rng check_rng = rng.derive(rep);
        KsResult ks = interevent_check(spec, 10000, check_rng);
        ok += ks.p_value > 0.01;
    }
    CHECK(ok >= 19);
}

TEST_CASE("doubling the rate doubles counts over a fixed horizon") {
    GeneratorSpec one;
    one.n_actors = 2;
    one.true_model.intercept = 0.0;
    one.stop.horizon = 2000.0;
    GeneratorSpec two = one;
    two.true_model.intercept = std::log(2.0);
    Rng ra(23), rb(23);
    GenerationMeta ma, mb;
    generate(one, ra, &ma);
    generate(two, rb, &mb);
    CHECK(std::abs(ma.n_events - 2000.0) < 3.0 * std::sqrt(2000.0));
    CHECK(std::abs(mb.n_events - 4000.0) < 3.0 * std::sqrt(4000.0));
}

TEST_CASE("generator error paths") {
    GeneratorSpec spec;
    spec.n_actors = 1;
    spec.stop.horizon = 1.0;
    Rng rng(1);
    CHECK_THROWS_AS(generate(spec, rng), input_error);

    spec.n_actors = 3;
    spec.stop = {};
    CHECK_THROWS_AS(generate(spec, rng), input_error);

    spec.stop.horizon = 1.0;
    spec.true_model.intercept = -std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(generate(spec, rng), numeric_error);
}

TEST_CASE("interevent_check rejects endogenous specs") {
    GeneratorSpec spec = dg_spec(1, 6, 10);
    Rng rng(3);
    CHECK_THROWS_AS(interevent_check(spec, 100, rng), input_error);
}
