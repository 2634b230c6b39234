#pragma once

// Command-line driver: simulate / fit / volvol / validate / pipeline.
//
// Exit status: 0 success, 1 usage or configuration error, 2 data or
// convergence error. Error messages name the failing stage.

#include <CLI11.hpp>

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "volest/data_io.hpp"
#include "volest/estimate.hpp"
#include "volest/simulate.hpp"

namespace volest {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

struct CliInvocation {
    RunMode mode = RunMode::Fit;
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> output;
    bool verbose = false;
};

namespace detail {

/// Raised once the report is written when a fit failed to converge.
struct NotConverged {
    std::string stage;
};

class Runner {
public:
    Runner(const CliInvocation& inv, RunConfig cfg, std::ostream& out)
        : inv_(inv), cfg_(std::move(cfg)), out_(out) {
        if (inv_.seed) cfg_.seed = *inv_.seed;
        if (inv_.output) cfg_.output = *inv_.output;
    }

    std::string stage = "config";

    void run() {
        cfg_.require_for(inv_.mode);
        switch (inv_.mode) {
            case RunMode::Simulate: return simulate();
            case RunMode::Fit: return fit();
            case RunMode::VolVol: return volvol();
            case RunMode::Validate: return validate();
            case RunMode::Pipeline: return pipeline();
        }
    }

private:
    Dataset generate() {
        stage = "simulate";
        auto data = generate_synthetic_dataset(cfg_.generation_spec(), cfg_.seed, cfg_.threads);
        out_ << "simulate: generated " << data.size() << " rows (" << to_string(data.metadata().mode)
             << ", seed " << cfg_.seed << ")\n";
        return data;
    }

    Dataset read_input() {
        stage = "read";
        auto data = read_dataset(*cfg_.input);
        out_ << "read: " << data.size() << " rows from " << *cfg_.input << "\n";
        return data;
    }

    void print_fit(const char* name, const FitResult& fit) {
        const auto v = fit.param_vector();
        const char* const* labels = fit.is_stage1() ? kStage1Names : kStage2Names;
        out_ << name << ": " << (fit.converged ? "converged" : "NOT converged") << " ("
             << to_string(fit.termination) << ", " << fit.iterations << " iterations)\n";
        for (std::size_t j = 0; j < 3; ++j) out_ << "  " << labels[j] << "_hat = " << format_number(v[j]) << "\n";
        out_ << "  residual_norm = " << format_number(fit.residual_norm) << "\n";
        if (!fit.diagnostics.empty()) out_ << "  diagnostics: " << diagnostics_list(fit.diagnostics) << "\n";
        if (inv_.verbose) {
            for (std::size_t k = 0; k < fit.trace.size(); ++k) {
                out_ << "  step " << k + 1 << ": rss = " << format_number(fit.trace[k].residual_norm) << " params =";
                for (double p : fit.trace[k].params) out_ << " " << format_number(p);
                out_ << "\n";
            }
        }
    }

    FitResult stage1(const Dataset& data, ReportContent& report) {
        stage = "stage1";
        auto fit = fit_volatility(data, cfg_.solver);
        print_fit("stage1", fit);
        report.stage1 = fit;
        return fit;
    }

    void stage2_and_rho(const Dataset& data, const FitResult& s1, ReportContent& report) {
        stage = "stage2";
        const auto& b = s1.stage1();
        const double b3 = cfg_.beta3_hat.value_or(b.beta3);
        auto fit = fit_vol_of_vol(data, b3, GaugeRule::from_stage1(cfg_.gauge, b), cfg_.solver);
        print_fit("stage2", fit);
        out_ << "  gauge = " << to_string(cfg_.gauge) << ", gamma_hat = " << format_number(fit.stage2().beta4)
             << "\n";
        report.stage2 = fit;

        std::optional<double> ratio = cfg_.alpha_ratio;
        if (!ratio && cfg_.policy) ratio = cfg_.policy->alpha_ratio();
        if (ratio) {
            stage = "rho";
            RhoBlock block{b.beta2, fit.stage2().beta4, *ratio, std::nullopt, {}};
            try {
                block.estimate = estimate_rho(block.beta2_hat, block.gamma_hat, block.alpha_ratio);
                out_ << "rho: rho_hat = " << format_number(block.estimate->rho)
                     << (block.estimate->in_range ? "" : " (RHO_OUT_OF_RANGE)") << "\n";
            } catch (const InvalidArgument& ex) {
                block.error = ex.what();
                out_ << "rho: not estimated: " << block.error << "\n";
            }
            report.rho = block;
        }
    }

    void emit(const ReportContent& report) {
        stage = "report";
        write_report(report, *cfg_.output);
        out_ << "report: wrote " << *cfg_.output << "\n";
    }

    void check(const ReportContent& report) {
        if (report.stage1 && !report.stage1->converged) throw NotConverged{"stage1"};
        if (report.stage2 && !report.stage2->converged) throw NotConverged{"stage2"};
    }

    void simulate() {
        const auto data = generate();
        stage = "write";
        write_dataset(data, *cfg_.output);
        out_ << "simulate: wrote " << *cfg_.output << "\n";
    }

    void fit() {
        const auto data = read_input();
        ReportContent report;
        report.dataset_source = *cfg_.input;
        report.dataset_rows = data.size();
        stage1(data, report);
        emit(report);
        check(report);
    }

    void volvol() {
        const auto data = read_input();
        ReportContent report;
        report.dataset_source = *cfg_.input;
        report.dataset_rows = data.size();
        const auto s1 = stage1(data, report);
        if (s1.converged || cfg_.beta3_hat) stage2_and_rho(data, s1, report);
        emit(report);
        check(report);
    }

    void validate() {
        stage = "validate";
        ValidationOptions opts;
        opts.replications = cfg_.replications;
        opts.seed = cfg_.seed;
        opts.stage2 = cfg_.validate_stage2;
        opts.gauge = cfg_.gauge;
        opts.threads = cfg_.threads;
        opts.solver = cfg_.solver;
        ReportContent report;
        report.validation = monte_carlo_validation(cfg_.generation_spec(), opts);
        const auto& v = *report.validation;
        out_ << "validate: " << v.stage1_converged << "/" << v.replications << " stage-1 fits converged\n";
        for (const auto& s : v.stage1)
            out_ << "  " << s.name << ": mean = " << format_number(s.mean) << ", bias = "
                 << format_number(s.truth ? std::optional<double>(s.bias) : std::nullopt) << "\n";
        if (v.scale)
            out_ << "  beta3_hat is closer to the " << v.scale->closer() << " (sigma_bar = "
                 << format_number(v.scale->sigma_bar) << ", sqrt = " << format_number(v.scale->sqrt_sigma_bar)
                 << ")\n";
        emit(report);
    }

    void pipeline() {
        const auto data = generate();
        const std::string dataset_path = cfg_.dataset.value_or(*cfg_.output + ".csv");
        stage = "write";
        write_dataset(data, dataset_path);
        out_ << "simulate: wrote " << dataset_path << "\n";

        ReportContent report;
        report.dataset_source = data.metadata().source;
        report.dataset_rows = data.size();
        const auto s1 = stage1(data, report);
        if (cfg_.generation == GenerationKind::Structural && cfg_.heston) {
            report.stage1_scale = compare_scale(s1.stage1().beta3, cfg_.heston->sigma_bar);
            out_ << "  beta3_hat is closer to the " << report.stage1_scale->closer() << " scale\n";
        }
        if (s1.converged) stage2_and_rho(data, s1, report);
        emit(report);
        check(report);
    }

    static constexpr const char* kStage1Names[] = {"beta1", "beta2", "beta3"};
    static constexpr const char* kStage2Names[] = {"beta4", "beta5", "beta6"};

    CliInvocation inv_;
    RunConfig cfg_;
    std::ostream& out_;
};

}  // namespace detail

/// Runs the CLI with argv-style arguments (args[0] is the program name).
inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Estimate portfolio volatility and vol-of-vol from observed positions", "volest"};
    app.require_subcommand(1);

    CliInvocation inv;
    std::uint64_t seed = 0;
    std::string output;
    struct Sub {
        RunMode mode;
        const char* description;
    };
    const Sub subs[] = {
        {RunMode::Simulate, "Generate a synthetic dataset CSV"},
        {RunMode::Fit, "Fit the stage-1 volatility regression"},
        {RunMode::VolVol, "Fit stage 1 then the stage-2 vol-of-vol regression"},
        {RunMode::Validate, "Monte Carlo validation of the estimators"},
        {RunMode::Pipeline, "simulate -> fit -> volvol -> report in one pass"},
    };
    std::vector<std::pair<CLI::App*, RunMode>> commands;
    for (const auto& s : subs) {
        auto* sub = app.add_subcommand(std::string(to_string(s.mode)), s.description);
        sub->add_option("--config", inv.config_path, "Run configuration file")->required();
        sub->add_option("--seed", seed, "Override the generation seed");
        sub->add_option("--output", output, "Override the output path");
        sub->add_flag("--verbose", inv.verbose, "Print solver traces");
        commands.emplace_back(sub, s.mode);
    }
    auto* help = app.add_subcommand("help", "Show this help");
    // Rendered before parsing: afterwards CLI11 shows the selected subcommand's help.
    const std::string usage = app.help();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    if (!reversed.empty()) reversed.pop_back();
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& ex) {
        err << "volest: usage error: " << ex.what() << "\n\n" << usage;
        return kExitUsage;
    }
    if (help->parsed()) {
        out << usage;
        return kExitOk;
    }

    for (const auto& [sub, mode] : commands) {
        if (!sub->parsed()) continue;
        inv.mode = mode;
        if (sub->count("--seed")) inv.seed = seed;
        if (sub->count("--output")) inv.output = output;
    }

    std::string stage = "config";
    try {
        RunConfig cfg = parse_config(inv.config_path);
        if (cfg.mode && *cfg.mode != inv.mode)
            throw ConfigError("config mode '" + std::string(to_string(*cfg.mode)) + "' does not match subcommand '" +
                              std::string(to_string(inv.mode)) + "'");
        detail::Runner runner(inv, std::move(cfg), out);
        try {
            runner.run();
        } catch (...) {
            stage = runner.stage;
            throw;
        }
    } catch (const ConfigError& ex) {
        err << "volest " << to_string(inv.mode) << ": config error: " << ex.what() << "\n";
        return kExitUsage;
    } catch (const detail::NotConverged& nc) {
        err << "volest " << to_string(inv.mode) << ": " << nc.stage << " did not converge\n";
        return kExitData;
    } catch (const std::exception& ex) {
        err << "volest " << to_string(inv.mode) << ": " << stage << " failed: " << ex.what() << "\n";
        return kExitData;
    }
    return kExitOk;
}

inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    return run_cli(std::vector<std::string>(argv, argv + argc), out, err);
}

}  // namespace volest
