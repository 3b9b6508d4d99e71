#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "remse/augment.hpp"
#include "remse/config.hpp"
#include "remse/events.hpp"
#include "remse/report.hpp"
#include "remse/simulate.hpp"
#include "remse/study.hpp"

namespace fs = std::filesystem;
using remse::json;

namespace {

json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw remse::input_error("cannot open config file: " + path);
    json doc;
    try {
        in >> doc;
    } catch (const std::exception& e) {
        throw remse::input_error("config parse error in " + path + ": " + e.what());
    }
    return doc;
}

void check_covariate_references(const std::vector<remse::StatisticSpec>& specs,
                                const remse::ActorTable& actors) {
    for (const auto& s : specs) {
        switch (s.kind) {
            case remse::StatKind::sim_cont:
            case remse::StatKind::dissim_cont:
            case remse::StatKind::sum_cont:
                if (!actors.has_continuous(s.covariate))
                    throw remse::input_error("statistic " + s.name() +
                                             " references an unknown continuous covariate");
                break;
            case remse::StatKind::match_cat:
                if (!actors.has_categorical(s.covariate))
                    throw remse::input_error("statistic " + s.name() +
                                             " references an unknown categorical covariate");
                break;
            case remse::StatKind::dyadic_network:
                if (!actors.has_dyadic(s.covariate))
                    throw remse::input_error("statistic " + s.name() +
                                             " references an unknown dyadic covariate");
                break;
            default:
                break;
        }
    }
}

int cmd_fit(const std::string& config_path, std::optional<std::uint64_t> seed_override,
            const std::string& out_dir, bool quiet) {
    remse::FitRunConfig cfg = remse::parse_fit_config(load_json(config_path));
    if (seed_override) {
        cfg.chain.seed = *seed_override;
        cfg.resolved["chain"]["seed"] = *seed_override;
    }
    fs::create_directories(out_dir);

    remse::IngestOptions opts;
    opts.horizon = cfg.horizon;
    remse::EventStream stream = remse::ingest_events(cfg.events_path, {}, opts);
    if (cfg.covariates) {
        remse::ActorTable merged =
            remse::ingest_covariates(cfg.covariates->path, stream.actors, cfg.covariates->declaration);
        stream.rebind(merged);
    }
    for (const auto& d : cfg.dyadic_covariates)
        remse::ingest_dyadic_covariate(d.path, d.name, stream.actors);
    if (stream.events.empty()) throw remse::numeric_error("no events to fit");

    check_covariate_references(cfg.true_stats, stream.actors);
    if (cfg.spurious_stats) check_covariate_references(*cfg.spurious_stats, stream.actors);

    remse::RiskSet rs = remse::RiskSet::all_pairs(stream.actors.size());
    remse::SplineBasis basis =
        remse::SplineBasis::build(stream.horizon, cfg.spline.k, cfg.spline.degree);
    remse::PenaltyMatrix penalty = remse::PenaltyMatrix::build(cfg.spline.k, cfg.spline.penalty_order);
    remse::ComponentModel truemodel =
        remse::ComponentModel::with_spline(cfg.true_stats, std::move(basis), std::move(penalty));

    remse::FitReport report;
    remse::ChainTrace trace;
    std::string model_kind;
    int true_block_offset = 0;

    if (cfg.spurious_stats) {
        model_kind = "remse";
        remse::ComponentModel spurious = remse::ComponentModel::with_stats(*cfg.spurious_stats);
        true_block_offset = spurious.dim();
        remse::ChainConfig chain_cfg;
        chain_cfg.burn_in = cfg.chain.burn_in;
        chain_cfg.draws = cfg.chain.draws;
        chain_cfg.fit_options = cfg.fit_options;
        chain_cfg.gamma_true = cfg.gamma;
        chain_cfg.gamma_spurious = cfg.gamma;
        auto names = remse::report_names(&spurious, truemodel);

        if (cfg.chain.parallel_chains == 1) {
            chain_cfg.seed = cfg.chain.seed;
            remse::ChainResult result = remse::run_chain(stream, rs, spurious, truemodel, chain_cfg);
            report = remse::combine(result.retained, names, chain_cfg.burn_in);
            trace = std::move(result.trace);
        } else {
            remse::Rng master(cfg.chain.seed);
            std::vector<remse::PosteriorDraw> pooled;
            for (int c = 0; c < cfg.chain.parallel_chains; ++c) {
                chain_cfg.seed = master.derive(static_cast<std::uint64_t>(c) + 1).seed();
                remse::ChainResult result =
                    remse::run_chain(stream, rs, spurious, truemodel, chain_cfg);
                remse::FitReport chain_report =
                    remse::combine(result.retained, names, chain_cfg.burn_in);
                remse::write_json_file(
                    remse::report_to_json(chain_report, model_kind, chain_cfg.seed, cfg.resolved),
                    (fs::path(out_dir) / ("report_chain" + std::to_string(c + 1) + ".json")).string());
                for (auto& d : result.retained) pooled.push_back(std::move(d));
                if (c == 0) trace = std::move(result.trace);
            }
            report = remse::combine(pooled, names, chain_cfg.burn_in);
        }
    } else {
        model_kind = "rem";
        std::vector<std::uint8_t> all_true(stream.events.size(), 1);
        remse::FitResult fit =
            remse::fit_component(stream, rs, all_true, remse::EventClass::True, truemodel,
                                 remse::make_penalty_blocks(truemodel), cfg.fit_options, cfg.gamma);
        report = remse::single_fit_report(fit, remse::report_names(nullptr, truemodel));
        trace.iteration.push_back(0);
        trace.spurious_count.push_back(0);
        trace.theta_hat.push_back(fit.theta_hat);
    }

    remse::write_json_file(remse::report_to_json(report, model_kind, cfg.chain.seed, cfg.resolved),
                           (fs::path(out_dir) / "report.json").string());
    remse::write_trace_csv(trace,
                           cfg.spurious_stats
                               ? report.names
                               : truemodel.column_names(),
                           (fs::path(out_dir) / "trace.csv").string());
    remse::write_baseline_csv(report, truemodel, true_block_offset, cfg.baseline_grid,
                              (fs::path(out_dir) / "baseline.csv").string());
    if (!quiet) remse::print_summary(std::cout, report, model_kind);
    return 0;
}

int cmd_simulate(const std::string& config_path, std::optional<std::uint64_t> seed_override,
                 const std::string& out_dir, bool quiet) {
    remse::SimulateRunConfig cfg = remse::parse_simulate_config(load_json(config_path));
    if (seed_override) {
        cfg.seed = *seed_override;
        cfg.resolved["seed"] = *seed_override;
    }
    fs::create_directories(out_dir);

    remse::Rng rng(cfg.seed);
    remse::GenerationMeta meta;
    remse::EventStream stream = remse::generate(cfg.spec, rng, &meta);
    remse::write_events(stream, (fs::path(out_dir) / "events.csv").string());

    // actor covariates as generated
    {
        std::ofstream out(fs::path(out_dir) / "actors.csv");
        out << "actor";
        for (const auto& [name, _] : stream.actors.continuous_columns()) out << ',' << name;
        for (const auto& [name, _] : stream.actors.categorical_columns()) out << ',' << name;
        out << '\n';
        char buf[64];
        for (int i = 0; i < stream.actors.size(); ++i) {
            out << stream.actors.id(i);
            for (const auto& [name, values] : stream.actors.continuous_columns()) {
                std::snprintf(buf, sizeof buf, "%.17g", values[i]);
                out << ',' << buf;
            }
            for (const auto& [name, codes] : stream.actors.categorical_columns())
                out << ',' << codes[i];
            out << '\n';
        }
    }

    json meta_json{{"seed", cfg.seed},
                   {"spec", cfg.resolved},
                   {"n_events", meta.n_events},
                   {"n_true", meta.n_true},
                   {"n_spurious", meta.n_spurious},
                   {"realized_pfe_percent", meta.realized_pfe_percent},
                   {"realized_horizon", meta.realized_horizon}};
    remse::write_json_file(meta_json, (fs::path(out_dir) / "meta.json").string());
    if (!quiet)
        std::cout << "generated " << meta.n_events << " events (" << meta.n_spurious
                  << " spurious, PFE " << meta.realized_pfe_percent << " %), horizon "
                  << meta.realized_horizon << "\n";
    return 0;
}

int cmd_study(int dg, int reps, const std::string& scale, std::uint64_t seed,
              const std::string& out_dir, int threads, bool quiet) {
    remse::StudyConfig cfg;
    cfg.dg = dg;
    cfg.reps = reps;
    if (scale != "desk" && scale != "paper")
        throw remse::input_error("--scale must be desk or paper");
    cfg.paper_scale = scale == "paper";
    cfg.seed = seed;
    cfg.threads = threads;
    fs::create_directories(out_dir);
    remse::StudyResult res = remse::run_study(cfg);
    remse::write_table_csv(res, (fs::path(out_dir) / "table1.csv").string());
    remse::write_table_md(res, (fs::path(out_dir) / "table1.md").string());
    if (!quiet) {
        std::ifstream in(fs::path(out_dir) / "table1.md");
        std::cout << in.rdbuf();
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"relational event models with a spurious-event component"};
    app.require_subcommand(1);

    std::string config_path, out_dir = ".";
    std::optional<std::uint64_t> seed_override;
    bool quiet = false;

    auto add_common = [&](CLI::App* sub, bool needs_config) {
        if (needs_config)
            sub->add_option("--config", config_path, "JSON config file")->required();
        sub->add_option("--seed", seed_override, "override the config seed");
        sub->add_option("--out", out_dir, "output directory");
        sub->add_flag("--quiet", quiet, "suppress console output");
    };

    CLI::App* fit = app.add_subcommand("fit", "fit a REM or REMSE to an event stream");
    add_common(fit, true);

    CLI::App* simulate = app.add_subcommand("simulate", "generate a labeled event stream");
    add_common(simulate, true);

    int dg = 1, reps = 100, threads = 0;
    std::uint64_t study_seed = 1;
    std::string scale = "desk";
    CLI::App* study = app.add_subcommand("study", "run the simulation study");
    study->add_option("--dg", dg, "data-generating setup (1 or 2)")->check(CLI::Range(1, 2));
    study->add_option("--reps", reps, "number of replications");
    study->add_option("--scale", scale, "desk (n=20, 300 events) or paper (n=40, 500)");
    study->add_option("--seed", study_seed, "master seed");
    study->add_option("--out", out_dir, "output directory");
    study->add_option("--threads", threads, "worker threads (0 = hardware)");
    study->add_flag("--quiet", quiet, "suppress console output");

    CLI11_PARSE(app, argc, argv);
    remse::set_quiet(quiet);

    try {
        if (fit->parsed()) return cmd_fit(config_path, seed_override, out_dir, quiet);
        if (simulate->parsed()) return cmd_simulate(config_path, seed_override, out_dir, quiet);
        if (study->parsed()) return cmd_study(dg, reps, scale, study_seed, out_dir, threads, quiet);
    } catch (const remse::input_error& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return 2;
    } catch (const remse::numeric_error& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
