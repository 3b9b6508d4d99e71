#include <catch2/catch.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "helpers.hpp"
#include "remse/config.hpp"
#include "remse/report.hpp"
#include "remse/simulate.hpp"

using namespace remse;
namespace fs = std::filesystem;

namespace {

json minimal_fit_config() {
    return json::parse(R"({
        "events": "events.csv",
        "true_model": {"stats": [{"kind": "degree_abs"},
                                 {"kind": "sum_cont", "covariate": "x"}]},
        "spurious_model": {"stats": []},
        "spline": {"K": 6, "degree": 3, "penalty_order": 2},
        "fit": {"gamma": "auto"},
        "chain": {"burn_in": 3, "draws": 4, "seed": 9}
    })");
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int run_cli(const std::string& args) {
    const int rc = std::system((std::string(REMSE_CLI_PATH) + " " + args).c_str());
    return WEXITSTATUS(rc);
}

}  // namespace

TEST_CASE("fit config parses and validates") {
    FitRunConfig cfg = parse_fit_config(minimal_fit_config());
    CHECK(cfg.events_path == "events.csv");
    CHECK(cfg.true_stats.size() == 2);
    REQUIRE(cfg.spurious_stats.has_value());
    CHECK(cfg.spline.k == 6);
    CHECK(cfg.chain.burn_in == 3);
    CHECK(cfg.gamma.automatic);

    json fixed = minimal_fit_config();
    fixed["fit"]["gamma"] = 2.5;
    CHECK_FALSE(parse_fit_config(fixed).gamma.automatic);
    CHECK(parse_fit_config(fixed).gamma.value == 2.5);
}

TEST_CASE("unknown keys are rejected everywhere") {
    json bad = minimal_fit_config();
    bad["typo_key"] = 1;
    CHECK_THROWS_WITH(parse_fit_config(bad), Catch::Contains("typo_key"));

    json bad2 = minimal_fit_config();
    bad2["chain"]["burnin"] = 10;
    CHECK_THROWS_WITH(parse_fit_config(bad2), Catch::Contains("burnin"));

    json bad3 = minimal_fit_config();
    bad3["true_model"]["stats"][0]["extra"] = true;
    CHECK_THROWS_AS(parse_fit_config(bad3), input_error);
}

TEST_CASE("shared statistics between components are rejected") {
    json bad = minimal_fit_config();
    bad["spurious_model"]["stats"] = {{{"kind", "degree_abs"}}};
    CHECK_THROWS_WITH(parse_fit_config(bad), Catch::Contains("identifiable"));
}

TEST_CASE("statistic spec validation") {
    json bad = minimal_fit_config();
    bad["true_model"]["stats"] = {{{"kind", "sum_cont"}}};  // missing covariate
    CHECK_THROWS_AS(parse_fit_config(bad), input_error);
    bad["true_model"]["stats"] = {{{"kind", "triangle"}, {"covariate", "x"}}};
    CHECK_THROWS_AS(parse_fit_config(bad), input_error);
    bad["true_model"]["stats"] = {{{"kind", "not_a_stat"}}};
    CHECK_THROWS_AS(parse_fit_config(bad), input_error);
}

TEST_CASE("spline and chain bounds are validated") {
    json bad = minimal_fit_config();
    bad["spline"]["K"] = 2;
    CHECK_THROWS_AS(parse_fit_config(bad), input_error);
    json bad2 = minimal_fit_config();
    bad2["spline"]["penalty_order"] = 6;
    CHECK_THROWS_AS(parse_fit_config(bad2), input_error);
    json bad3 = minimal_fit_config();
    bad3["chain"]["draws"] = 1;
    CHECK_THROWS_AS(parse_fit_config(bad3), input_error);
    json bad4 = minimal_fit_config();
    bad4["fit"]["gamma"] = "automagic";
    CHECK_THROWS_AS(parse_fit_config(bad4), input_error);
}

TEST_CASE("simulate config parses") {
    json doc = json::parse(R"({
        "n_actors": 8,
        "true_model": {"intercept": -3,
                       "effects": [{"kind": "sum_cont", "covariate": "x", "coef": 1.5}]},
        "spurious_model": {"intercept": -2},
        "stop": {"true_events": 50},
        "covariates": {"continuous": ["x"], "categorical": [{"name": "g", "levels": 4}]},
        "seed": 77
    })");
    SimulateRunConfig cfg = parse_simulate_config(doc);
    CHECK(cfg.spec.n_actors == 8);
    CHECK(cfg.spec.true_model.effects.size() == 1);
    CHECK(cfg.spec.spurious_model.has_value());
    CHECK(cfg.spec.stop.true_events == 50);
    CHECK(cfg.seed == 77);

    json bad = doc;
    bad["stop"] = {{"true_events", 50}, {"horizon", 2.0}};
    CHECK_THROWS_AS(parse_simulate_config(bad), input_error);
    json bad2 = doc;
    bad2["stop"] = json::object();
    CHECK_THROWS_AS(parse_simulate_config(bad2), input_error);
}

TEST_CASE("mini schema validator accepts and rejects") {
    json schema = json::parse(R"({
        "type": "object",
        "required": ["a"],
        "additionalProperties": false,
        "properties": {
            "a": {"type": "number"},
            "b": {"type": "array", "items": {"type": "string"}}
        }
    })");
    validate_against_schema(json::parse(R"({"a": 1, "b": ["x"]})"), schema);
    CHECK_THROWS_AS(validate_against_schema(json::parse(R"({"b": []})"), schema), input_error);
    CHECK_THROWS_AS(validate_against_schema(json::parse(R"({"a": "s"})"), schema), input_error);
    CHECK_THROWS_AS(validate_against_schema(json::parse(R"({"a": 1, "c": 2})"), schema),
                    input_error);
    CHECK_THROWS_AS(validate_against_schema(json::parse(R"({"a": 1, "b": [2]})"), schema),
                    input_error);
}

TEST_CASE("cli fit produces a valid, reproducible report") {
    auto dir = fs::temp_directory_path() / "remse_cli_test";
    fs::remove_all(dir);
    fs::create_directories(dir);

    // generate a small labeled dataset and write it as the CLI inputs
    GeneratorSpec gen = dg_spec(1, 10, 80);
    Rng rng(21);
    EventStream s = generate(gen, rng);
    s.has_labels = false;  // the fit does not see labels
    write_events(s, (dir / "events.csv").string());
    {
        std::ofstream out(dir / "actors.csv");
        out << "actor,x_cont,x_cat\n";
        for (int i = 0; i < s.actors.size(); ++i)
            out << s.actors.id(i) << ',' << s.actors.continuous("x_cont", i) << ','
                << s.actors.categorical("x_cat", i) << '\n';
    }
    json cfg = json::parse(R"({
        "events": "",
        "covariates": {"path": "", "continuous": ["x_cont"], "categorical": ["x_cat"]},
        "true_model": {"stats": [{"kind": "degree_abs"},
                                 {"kind": "sum_cont", "covariate": "x_cont"},
                                 {"kind": "match_cat", "covariate": "x_cat"}]},
        "spurious_model": {"stats": []},
        "spline": {"K": 5, "degree": 3, "penalty_order": 2},
        "chain": {"burn_in": 2, "draws": 3, "seed": 5}
    })");
    cfg["events"] = (dir / "events.csv").string();
    cfg["covariates"]["path"] = (dir / "actors.csv").string();
    {
        std::ofstream out(dir / "config.json");
        out << cfg.dump(2);
    }

    const std::string base = "fit --config " + (dir / "config.json").string();
    REQUIRE(run_cli(base + " --out " + (dir / "out1").string() + " --quiet") == 0);
    REQUIRE(run_cli(base + " --out " + (dir / "out2").string() + " --quiet") == 0);

    CHECK(fs::exists(dir / "out1" / "report.json"));
    CHECK(fs::exists(dir / "out1" / "trace.csv"));
    CHECK(fs::exists(dir / "out1" / "baseline.csv"));

    // byte-identical reports under the same seed/config/data
    CHECK(slurp(dir / "out1" / "report.json") == slurp(dir / "out2" / "report.json"));

    // schema validation of the emitted report
    json report = json::parse(slurp(dir / "out1" / "report.json"));
    json schema = json::parse(slurp(fs::path(REMSE_SOURCE_DIR) / "docs" / "report.schema.json"));
    validate_against_schema(report, schema);
    CHECK(report["model"] == "remse");

    // a different seed changes the report
    REQUIRE(run_cli(base + " --out " + (dir / "out3").string() + " --seed 6 --quiet") == 0);
    CHECK(slurp(dir / "out1" / "report.json") != slurp(dir / "out3" / "report.json"));

    // REM path: no spurious block, PFE exactly zero
    json rem = cfg;
    rem.erase("spurious_model");
    {
        std::ofstream out(dir / "config_rem.json");
        out << rem.dump(2);
    }
    REQUIRE(run_cli("fit --config " + (dir / "config_rem.json").string() + " --out " +
                    (dir / "out_rem").string() + " --quiet") == 0);
    json rem_report = json::parse(slurp(dir / "out_rem" / "report.json"));
    CHECK(rem_report["model"] == "rem");
    CHECK(rem_report["pfe_percent"] == 0.0);
    validate_against_schema(rem_report, schema);
}

TEST_CASE("cli input errors exit with code 2") {
    auto dir = fs::temp_directory_path() / "remse_cli_err";
    fs::create_directories(dir);
    json cfg = minimal_fit_config();
    cfg["events"] = (dir / "missing.csv").string();
    {
        std::ofstream out(dir / "config.json");
        out << cfg.dump();
    }
    CHECK(run_cli("fit --config " + (dir / "config.json").string() + " --quiet") == 2);
    CHECK(run_cli("fit --config " + (dir / "nonexistent.json").string() + " --quiet") == 2);
}

TEST_CASE("cli simulate writes events, covariates and metadata") {
    auto dir = fs::temp_directory_path() / "remse_cli_sim";
    fs::remove_all(dir);
    fs::create_directories(dir);
    json cfg = json::parse(R"({
        "n_actors": 6,
        "true_model": {"intercept": -2,
                       "effects": [{"kind": "sum_cont", "covariate": "x", "coef": 1.0}]},
        "spurious_model": {"intercept": -3},
        "stop": {"true_events": 40},
        "covariates": {"continuous": ["x"]},
        "seed": 3
    })");
    {
        std::ofstream out(dir / "sim.json");
        out << cfg.dump();
    }
    REQUIRE(run_cli("simulate --config " + (dir / "sim.json").string() + " --out " +
                    dir.string() + " --quiet") == 0);
    CHECK(fs::exists(dir / "events.csv"));
    CHECK(fs::exists(dir / "actors.csv"));
    json meta = json::parse(slurp(dir / "meta.json"));
    CHECK(meta["n_true"] == 40);
    CHECK(meta["seed"] == 3);

    EventStream back = ingest_events((dir / "events.csv").string());
    CHECK(back.has_labels);
    CHECK(back.size() == meta["n_events"].get<std::size_t>());
}
