#pragma once

// CSV datasets, run configuration files and result reports.
//
// Dataset CSV: UTF-8, header line, comma separated, '.' decimals; columns
// `label` (optional), `pi_star`, `mu`, `r` in any order. A label column marks
// the dataset as a time series.
//
// Config: `key = value` lines with `[section]` headers; '#' starts a
// comment line. Unknown keys are errors.
//
// Report: `[section]` / `[section.sub]` blocks of `key = value` lines in a
// fixed order. Numbers are printed with 17 significant digits; absent or
// non-finite values print as `null`.

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "volest/estimate.hpp"
#include "volest/model_core.hpp"
#include "volest/nls.hpp"
#include "volest/simulate.hpp"

namespace volest {

/// Malformed or incomplete configuration file.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr std::string_view kNullToken = "null";

inline std::string format_number(double x) {
    if (!std::isfinite(x)) return std::string(kNullToken);
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline std::string format_number(const std::optional<double>& x) {
    return x ? format_number(*x) : std::string(kNullToken);
}

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

inline std::optional<double> parse_double(std::string_view s) {
    s = trim(s);
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty() || !std::isfinite(v)) return std::nullopt;
    return v;
}

inline std::optional<std::uint64_t> parse_u64(std::string_view s) {
    s = trim(s);
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
    return v;
}

inline std::vector<std::string_view> split(std::string_view line, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(sep, start);
        out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path + "' for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open '" + path + "' for writing");
    out << content;
    out.flush();
    if (!out) throw DataError("write failed for '" + path + "'");
}

inline std::vector<std::string_view> lines_of(std::string_view text) {
    auto lines = split(text, '\n');
    for (auto& l : lines)
        if (!l.empty() && l.back() == '\r') l.remove_suffix(1);
    while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
    return lines;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Datasets
// ---------------------------------------------------------------------------

inline Dataset parse_dataset(std::string_view text, std::string source = "<memory>") {
    const auto lines = detail::lines_of(text);
    if (lines.empty()) throw DataError(source + ": empty dataset (no header)");

    std::string_view header = lines[0];
    if (header.starts_with("\xEF\xBB\xBF")) header.remove_prefix(3);
    const auto names = detail::split(header, ',');
    std::map<std::string, std::size_t, std::less<>> column;
    for (std::size_t j = 0; j < names.size(); ++j) {
        const std::string name(detail::trim(names[j]));
        if (name != "label" && name != "pi_star" && name != "mu" && name != "r")
            throw DataError(source + ": unknown column: " + name);
        if (!column.emplace(name, j).second) throw DataError(source + ": duplicate column: " + name);
    }
    for (const char* required : {"pi_star", "mu", "r"})
        if (!column.contains(required)) throw DataError(source + ": missing column: " + required);
    const bool has_label = column.contains("label");

    std::vector<MarketObservation> rows;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const std::size_t line_no = i + 1;
        const auto fields = detail::split(lines[i], ',');
        if (fields.size() != names.size())
            throw DataError(source + ": row parse error at row " + std::to_string(line_no) + ": expected " +
                            std::to_string(names.size()) + " fields, got " + std::to_string(fields.size()));
        auto number = [&](const char* name) {
            const auto raw = fields[column.find(name)->second];
            const auto v = detail::parse_double(raw);
            if (!v)
                throw DataError(source + ": row parse error at row " + std::to_string(line_no) + ", field " + name +
                                ": cannot parse '" + std::string(raw) + "'");
            return *v;
        };
        std::optional<std::string> label;
        if (has_label) label = std::string(detail::trim(fields[column.find("label")->second]));
        rows.emplace_back(number("pi_star"), number("mu"), number("r"), std::move(label));
    }
    if (rows.empty()) throw DataError(source + ": empty dataset (no rows)");
    return Dataset(std::move(rows), {std::move(source), has_label ? DatasetMode::TimeSeries : DatasetMode::CrossSection});
}

inline Dataset read_dataset(const std::string& path) { return parse_dataset(detail::read_file(path), path); }

inline std::string render_dataset(const Dataset& data) {
    bool with_label = data.metadata().mode == DatasetMode::TimeSeries;
    for (const auto& row : data.rows()) with_label = with_label || row.label().has_value();
    std::string out = with_label ? "label,pi_star,mu,r\n" : "pi_star,mu,r\n";
    for (const auto& row : data.rows()) {
        if (with_label) out += row.label().value_or("") + ",";
        out += format_number(row.pi_star()) + "," + format_number(row.mu()) + "," + format_number(row.r()) + "\n";
    }
    return out;
}

inline void write_dataset(const Dataset& data, const std::string& path) { detail::write_file(path, render_dataset(data)); }

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

struct RhoBlock {
    double beta2_hat = 0.0;
    double gamma_hat = 0.0;
    double alpha_ratio = 0.0;
    std::optional<RhoEstimate> estimate;
    std::string error;  // set when the inversion was rejected
};

struct ReportContent {
    std::optional<std::string> dataset_source;
    std::optional<std::size_t> dataset_rows;
    std::optional<FitResult> stage1;
    std::optional<FitResult> stage2;
    std::optional<ScaleComparison> stage1_scale;
    std::optional<RhoBlock> rho;
    std::optional<ValidationReport> validation;
};

namespace detail {

class ReportWriter {
public:
    void section(std::string_view name) {
        if (!out_.empty()) out_ += "\n";
        out_ += "[";
        out_ += name;
        out_ += "]\n";
    }
    void kv(std::string_view key, std::string_view value) {
        out_ += key;
        out_ += " = ";
        out_ += value;
        out_ += "\n";
    }
    void num(std::string_view key, double v) { kv(key, format_number(v)); }
    void num(std::string_view key, const std::optional<double>& v) { kv(key, format_number(v)); }
    void count(std::string_view key, std::size_t v) { kv(key, std::to_string(v)); }
    void flag(std::string_view key, bool v) { kv(key, v ? "true" : "false"); }
    std::string str() && { return std::move(out_); }

private:
    std::string out_;
};

inline std::string diagnostics_list(const std::vector<Diagnostic>& ds) {
    if (ds.empty()) return "none";
    std::vector<std::string> names;
    for (auto d : ds) names.emplace_back(to_string(d));
    return join(names, ", ");
}

inline void write_fit(ReportWriter& w, const FitResult& fit) {
    w.flag("converged", fit.converged);
    w.kv("termination", to_string(fit.termination));
    w.count("iterations", static_cast<std::size_t>(fit.iterations));
    w.count("observations", fit.observations);
    w.num("residual_norm", fit.residual_norm);
    const auto v = fit.param_vector();
    const char* const* names = nullptr;
    static const char* const s1[] = {"beta1", "beta2", "beta3"};
    static const char* const s2[] = {"beta4", "beta5", "beta6"};
    names = fit.is_stage1() ? s1 : s2;
    for (std::size_t j = 0; j < 3; ++j) w.num(names[j], v[j]);
    for (std::size_t j = 0; j < 3; ++j)
        w.num(std::string("se_") + names[j], j < fit.standard_errors.size() ? fit.standard_errors[j] : std::nullopt);
}

inline void write_scale(ReportWriter& w, const ScaleComparison& s) {
    w.num("beta3_hat", s.beta3_hat);
    w.num("sigma_bar", s.sigma_bar);
    w.num("sqrt_sigma_bar", s.sqrt_sigma_bar);
    w.num("rel_diff_variance", s.rel_diff_variance);
    w.num("rel_diff_volatility", s.rel_diff_volatility);
    w.kv("closer", s.closer());
}

inline void write_summary(ReportWriter& w, const ParameterSummary& s) {
    w.num("truth", s.truth);
    w.num("mean", s.mean);
    w.num("median", s.median);
    w.num("bias", s.truth ? std::optional<double>(s.bias) : std::nullopt);
    w.num("rmse", s.truth ? std::optional<double>(s.rmse) : std::nullopt);
    w.count("with_standard_error", s.with_standard_error);
    w.count("covered_95", s.covered);
}

}  // namespace detail

inline std::string render_report(const ReportContent& c) {
    detail::ReportWriter w;
    if (c.dataset_source || c.dataset_rows) {
        w.section("dataset");
        if (c.dataset_source) w.kv("source", *c.dataset_source);
        if (c.dataset_rows) w.count("rows", *c.dataset_rows);
    }
    if (c.stage1) {
        w.section("stage1");
        detail::write_fit(w, *c.stage1);
        if (c.stage1_scale) {
            w.section("stage1.scale");
            detail::write_scale(w, *c.stage1_scale);
        }
    }
    if (c.stage2) {
        w.section("stage2");
        const GaugeRule g = c.stage2->gauge.value_or(GaugeRule::free());
        w.kv("gauge", to_string(g.kind));
        w.num("pin_value", g.kind == GaugeKind::Free ? std::nullopt : std::optional<double>(g.pin_value));
        w.num("beta3_hat", c.stage2->beta3_hat);
        detail::write_fit(w, *c.stage2);
        w.num("gamma_hat", c.stage2->stage2().beta4);
    }
    if (c.rho) {
        w.section("rho");
        w.num("beta2_hat", c.rho->beta2_hat);
        w.num("gamma_hat", c.rho->gamma_hat);
        w.num("alpha_ratio", c.rho->alpha_ratio);
        if (c.rho->estimate) {
            w.num("rho_hat", c.rho->estimate->rho);
            w.flag("in_range", c.rho->estimate->in_range);
        } else {
            w.num("rho_hat", std::nullopt);
            w.kv("error", c.rho->error);
        }
    }
    if (c.stage1 || c.stage2 || c.rho) {
        w.section("diagnostics");
        if (c.stage1) w.kv("stage1", detail::diagnostics_list(c.stage1->diagnostics));
        if (c.stage2) w.kv("stage2", detail::diagnostics_list(c.stage2->diagnostics));
        if (c.rho && c.rho->estimate) w.kv("rho", detail::diagnostics_list(c.rho->estimate->diagnostics));
    }
    if (c.validation) {
        const auto& v = *c.validation;
        w.section("validation");
        w.count("replications", v.replications);
        w.count("stage1_converged", v.stage1_converged);
        w.num("convergence_rate", v.convergence_rate());
        w.count("stage2_converged", v.stage2_converged);
        w.count("failures", v.failures);
        for (const auto& s : v.stage1) {
            w.section("validation.stage1." + s.name);
            detail::write_summary(w, s);
        }
        for (const auto& s : v.stage2) {
            w.section("validation.stage2." + s.name);
            detail::write_summary(w, s);
        }
        if (v.scale) {
            w.section("validation.scale");
            detail::write_scale(w, *v.scale);
        }
    }
    return std::move(w).str();
}

inline void write_report(const ReportContent& content, const std::string& path) {
    detail::write_file(path, render_report(content));
}

/// Parses a report back into {"section.key": value} for tests and tooling.
inline std::map<std::string, std::string> parse_report(std::string_view text) {
    std::map<std::string, std::string> out;
    std::string section;
    for (auto line : detail::lines_of(text)) {
        line = detail::trim(line);
        if (line.empty()) continue;
        if (line.front() == '[' && line.back() == ']') {
            section = std::string(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find(" = ");
        if (eq == std::string_view::npos) throw DataError("malformed report line: " + std::string(line));
        out[section + "." + std::string(line.substr(0, eq))] = std::string(line.substr(eq + 3));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Run configuration
// ---------------------------------------------------------------------------

enum class RunMode { Simulate, Fit, VolVol, Validate, Pipeline };

inline std::string_view to_string(RunMode m) {
    switch (m) {
        case RunMode::Simulate: return "simulate";
        case RunMode::Fit: return "fit";
        case RunMode::VolVol: return "volvol";
        case RunMode::Validate: return "validate";
        case RunMode::Pipeline: return "pipeline";
    }
    return "fit";
}

inline std::optional<RunMode> parse_run_mode(std::string_view s) {
    for (auto m : {RunMode::Simulate, RunMode::Fit, RunMode::VolVol, RunMode::Validate, RunMode::Pipeline})
        if (to_string(m) == s) return m;
    return std::nullopt;
}

enum class GenerationKind { ModelImplied, Structural };

struct RunConfig {
    std::optional<RunMode> mode;
    std::optional<std::string> input;
    std::optional<std::string> output;
    std::optional<std::string> dataset;  // CSV written by simulate/pipeline
    unsigned threads = 1;

    std::optional<HestonParams> heston;
    std::optional<PolicyCoefficients> policy;
    std::optional<PathConfig> path;
    double x0 = 1.0;

    GenerationKind generation = GenerationKind::ModelImplied;
    ModelImpliedSpec model_implied;
    bool has_truth = false;
    std::uint64_t seed = 0;

    SolverOptions solver;
    GaugeKind gauge = GaugeKind::PinBeta5;
    std::optional<double> beta3_hat;
    std::size_t replications = 100;
    bool validate_stage2 = false;
    std::optional<double> alpha_ratio;

    /// Throws ConfigError when a block required by `m` is absent.
    void require_for(RunMode m) const {
        auto missing = [&](const std::string& key) {
            throw ConfigError("missing required key for mode " + std::string(to_string(m)) + ": " + key);
        };
        const bool generates = m == RunMode::Simulate || m == RunMode::Validate || m == RunMode::Pipeline;
        if ((m == RunMode::Fit || m == RunMode::VolVol) && !input) missing("input");
        if (!output) missing("output");
        if (generates) {
            if (generation == GenerationKind::Structural) {
                if (!heston) missing("[heston]");
                if (!policy) missing("[policy]");
                if (!path) missing("[path]");
            } else if (!has_truth) {
                missing("[generation] beta1, beta2, beta3");
            }
        }
    }

    GenerationSpec generation_spec() const {
        if (generation == GenerationKind::ModelImplied) return model_implied;
        if (!heston || !policy || !path) throw ConfigError("structural generation needs [heston], [policy] and [path]");
        return StructuralSpec{*heston, *policy, *path, x0};
    }
};

namespace detail {

class ConfigReader {
public:
    ConfigReader(std::string_view text, std::string source) : source_(std::move(source)) {
        std::string section;
        std::size_t line_no = 0;
        for (auto raw : lines_of(text)) {
            ++line_no;
            const auto line = trim(raw);
            if (line.empty() || line.front() == '#' || line.front() == ';') continue;
            if (line.front() == '[') {
                if (line.back() != ']') fail(line_no, "malformed section header");
                section = std::string(trim(line.substr(1, line.size() - 2)));
                if (!kKnown.contains(section)) throw ConfigError(source_ + ": unknown section: [" + section + "]");
                continue;
            }
            const auto eq = line.find('=');
            if (eq == std::string_view::npos) fail(line_no, "expected 'key = value'");
            const std::string key(trim(line.substr(0, eq)));
            const std::string value(trim(line.substr(eq + 1)));
            const std::string full = section.empty() ? key : section + "." + key;
            if (!kKnown.at(section).contains(key)) throw ConfigError("unknown key: " + full);
            if (!values_.emplace(full, value).second) fail(line_no, "duplicate key: " + full);
        }
    }

    bool has(const std::string& key) const { return values_.contains(key); }
    bool has_section(const std::string& s) const {
        const auto it = values_.lower_bound(s + ".");
        return it != values_.end() && it->first.starts_with(s + ".");
    }

    std::optional<std::string> text(const std::string& key) const {
        const auto it = values_.find(key);
        if (it == values_.end()) return std::nullopt;
        if (it->second.empty()) type_error(key, "a non-empty string", it->second);
        return it->second;
    }

    /// Real-valued key; `check` names the accepted range in errors.
    std::optional<double> real(const std::string& key, bool (*ok)(double) = nullptr,
                               const char* expected = "a finite real") const {
        const auto it = values_.find(key);
        if (it == values_.end()) return std::nullopt;
        const auto v = parse_double(it->second);
        if (!v || (ok && !ok(*v))) type_error(key, expected, it->second);
        return v;
    }

    std::optional<std::uint64_t> u64(const std::string& key, std::uint64_t min = 0) const {
        const auto it = values_.find(key);
        if (it == values_.end()) return std::nullopt;
        const auto v = parse_u64(it->second);
        if (!v || *v < min)
            type_error(key, min ? ("an integer >= " + std::to_string(min)).c_str() : "a nonnegative integer",
                       it->second);
        return v;
    }

    std::optional<bool> boolean(const std::string& key) const {
        const auto it = values_.find(key);
        if (it == values_.end()) return std::nullopt;
        if (it->second == "true") return true;
        if (it->second == "false") return false;
        type_error(key, "true or false", it->second);
    }

    [[noreturn]] void type_error(const std::string& key, const std::string& expected, const std::string& got) const {
        throw ConfigError("type error: key '" + key + "' expects " + expected + ", got '" + got + "'");
    }

private:
    [[noreturn]] void fail(std::size_t line_no, const std::string& what) const {
        throw ConfigError(source_ + ":" + std::to_string(line_no) + ": " + what);
    }

    inline static const std::map<std::string, std::set<std::string>> kKnown = {
        {"", {"mode", "input", "output", "dataset", "threads"}},
        {"heston", {"mu", "r", "alpha", "beta", "gamma", "rho", "sigma_bar"}},
        {"policy", {"alpha0", "alpha1", "alpha2"}},
        {"path", {"horizon", "dt", "n_paths", "x0"}},
        {"generation", {"kind", "n", "noise", "e_min", "e_max", "r", "seed", "beta1", "beta2", "beta3"}},
        {"solver", {"max_iterations", "g_tol", "x_tol", "lambda0", "lambda_factor"}},
        {"volvol", {"gauge", "beta3_hat"}},
        {"validation", {"replications", "stage2"}},
        {"rho", {"alpha_ratio"}},
    };

    std::string source_;
    std::map<std::string, std::string> values_;
};

inline bool positive(double x) { return x > 0.0; }
inline bool nonnegative(double x) { return x >= 0.0; }
inline bool open_unit(double x) { return std::abs(x) < 1.0; }
inline bool negative(double x) { return x < 0.0; }
inline bool nonzero(double x) { return x != 0.0; }

}  // namespace detail

inline RunConfig parse_config_text(std::string_view text, std::string source = "<memory>") {
    using namespace detail;
    const ConfigReader in(text, source);
    RunConfig c;

    if (const auto m = in.text("mode")) {
        c.mode = parse_run_mode(*m);
        if (!c.mode) in.type_error("mode", "one of simulate, fit, volvol, validate, pipeline", *m);
    }
    c.input = in.text("input");
    c.output = in.text("output");
    c.dataset = in.text("dataset");
    if (const auto t = in.u64("threads")) c.threads = static_cast<unsigned>(*t);

    if (in.has_section("heston")) {
        auto need = [&](const char* k, bool (*ok)(double), const char* expected) {
            const std::string key = std::string("heston.") + k;
            const auto v = in.real(key, ok, expected);
            if (!v) throw ConfigError("missing required key: " + key);
            return *v;
        };
        HestonParams p;
        p.mu = need("mu", nullptr, "a finite real");
        p.r = need("r", nullptr, "a finite real");
        p.alpha = need("alpha", nonnegative, "a real >= 0");
        p.beta_rev = need("beta", positive, "a real > 0");
        p.gamma = need("gamma", nonnegative, "a real >= 0");
        p.rho = need("rho", open_unit, "a real with |rho| < 1");
        p.sigma_bar = need("sigma_bar", nonnegative, "a real >= 0");
        c.heston = p;
    }
    if (in.has_section("policy")) {
        const auto a0 = in.real("policy.alpha0");
        const auto a1 = in.real("policy.alpha1", negative, "a real < 0");
        const auto a2 = in.real("policy.alpha2");
        if (!a0 || !a1 || !a2) throw ConfigError("missing required key: [policy] needs alpha0, alpha1, alpha2");
        c.policy = PolicyCoefficients(*a0, *a1, *a2);
    }
    if (in.has_section("path")) {
        PathConfig p;
        p.horizon = in.real("path.horizon", positive, "a real > 0").value_or(p.horizon);
        p.dt = in.real("path.dt", positive, "a real > 0").value_or(p.dt);
        p.n_paths = in.u64("path.n_paths", 1).value_or(p.n_paths);
        c.x0 = in.real("path.x0").value_or(c.x0);
        try {
            p.validate();
        } catch (const InvalidArgument& ex) {
            throw ConfigError(std::string("[path]: ") + ex.what());
        }
        c.path = p;
    }

    if (const auto k = in.text("generation.kind")) {
        if (*k == "model-implied") c.generation = GenerationKind::ModelImplied;
        else if (*k == "structural") c.generation = GenerationKind::Structural;
        else in.type_error("generation.kind", "model-implied or structural", *k);
    }
    auto& m = c.model_implied;
    m.n = in.u64("generation.n", 1).value_or(m.n);
    m.noise = in.real("generation.noise", nonnegative, "a real >= 0").value_or(m.noise);
    m.e_min = in.real("generation.e_min").value_or(m.e_min);
    m.e_max = in.real("generation.e_max").value_or(m.e_max);
    m.r = in.real("generation.r").value_or(m.r);
    c.seed = in.u64("generation.seed").value_or(c.seed);
    const auto b1 = in.real("generation.beta1");
    const auto b2 = in.real("generation.beta2");
    const auto b3 = in.real("generation.beta3", positive, "a real > 0");
    if (b1 || b2 || b3) {
        if (!b1 || !b2 || !b3) throw ConfigError("missing required key: [generation] needs beta1, beta2 and beta3 together");
        m.truth = {*b1, *b2, *b3};
        c.has_truth = true;
    }
    if (c.generation == GenerationKind::ModelImplied) {
        try {
            m.validate();
        } catch (const InvalidArgument& ex) {
            throw ConfigError(std::string("[generation]: ") + ex.what());
        }
    }

    auto& s = c.solver;
    if (const auto v = in.u64("solver.max_iterations", 1)) s.max_iterations = static_cast<int>(*v);
    s.g_tol = in.real("solver.g_tol", positive, "a real > 0").value_or(s.g_tol);
    s.x_tol = in.real("solver.x_tol", positive, "a real > 0").value_or(s.x_tol);
    s.lambda0 = in.real("solver.lambda0", positive, "a real > 0").value_or(s.lambda0);
    s.lambda_factor =
        in.real("solver.lambda_factor", [](double x) { return x > 1.0; }, "a real > 1").value_or(s.lambda_factor);

    if (const auto g = in.text("volvol.gauge")) {
        try {
            c.gauge = parse_gauge(*g);
        } catch (const InvalidArgument&) {
            in.type_error("volvol.gauge", "one of free, pin-beta5, pin-beta6", *g);
        }
    }
    c.beta3_hat = in.real("volvol.beta3_hat", positive, "a real > 0");
    c.replications = in.u64("validation.replications", 2).value_or(c.replications);
    c.validate_stage2 = in.boolean("validation.stage2").value_or(false);
    c.alpha_ratio = in.real("rho.alpha_ratio", nonzero, "a nonzero real");

    if (c.mode) c.require_for(*c.mode);
    return c;
}

inline RunConfig parse_config(const std::string& path) {
    std::string text;
    try {
        text = detail::read_file(path);
    } catch (const DataError& ex) {
        throw ConfigError(ex.what());
    }
    return parse_config_text(text, path);
}

}  // namespace volest
