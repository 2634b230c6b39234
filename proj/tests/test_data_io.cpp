#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "volest/data_io.hpp"

using namespace volest;
namespace fs = std::filesystem;

namespace {

class TempDir : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() /
               ("volest_io_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    std::string path(const std::string& name) const { return (dir_ / name).string(); }

    std::string write(const std::string& name, const std::string& content) const {
        std::ofstream(path(name), std::ios::binary) << content;
        return path(name);
    }

    static std::string slurp(const std::string& p) {
        std::ifstream in(p, std::ios::binary);
        return {std::istreambuf_iterator<char>(in), {}};
    }

    fs::path dir_;
};

using DatasetIo = TempDir;
using ReportIo = TempDir;
using ConfigIo = TempDir;

}  // namespace

TEST_F(DatasetIo, ReadsLabelledRows) {
    const auto p = write("d.csv", "label,pi_star,mu,r\nt0,1.5,0.08,0.02\nt1,-2.25e-1,0.07,0.02\nt2,3,0.1,0.03\n");
    const auto d = read_dataset(p);
    ASSERT_EQ(d.size(), 3u);
    EXPECT_EQ(d.metadata().mode, DatasetMode::TimeSeries);
    EXPECT_EQ(d.metadata().source, p);
    EXPECT_EQ(d[1].pi_star(), -0.225);
    EXPECT_EQ(d[2].label().value(), "t2");
}

TEST_F(DatasetIo, ColumnOrderIsFreeAndLabelOptional) {
    const auto d = parse_dataset("r,mu,pi_star\r\n0.02,0.08,1.5\r\n\r\n");
    ASSERT_EQ(d.size(), 1u);
    EXPECT_EQ(d[0].mu(), 0.08);
    EXPECT_EQ(d.metadata().mode, DatasetMode::CrossSection);
}

TEST_F(DatasetIo, MalformedFieldNamesRowAndColumn) {
    try {
        parse_dataset("label,pi_star,mu,r\nt0,abc,0.08,0.02\n", "x.csv");
        FAIL();
    } catch (const DataError& ex) {
        const std::string msg = ex.what();
        EXPECT_NE(msg.find("row parse error at row 2"), std::string::npos) << msg;
        EXPECT_NE(msg.find("field pi_star"), std::string::npos) << msg;
    }
}

TEST_F(DatasetIo, SchemaErrors) {
    auto message = [](const std::string& text) {
        try {
            parse_dataset(text);
        } catch (const DataError& ex) {
            return std::string(ex.what());
        }
        return std::string("no error");
    };
    EXPECT_NE(message("pi_star,mu\n1,0.1\n").find("missing column: r"), std::string::npos);
    EXPECT_NE(message("pi_star,mu,r,volume\n1,0.1,0.02,5\n").find("unknown column: volume"), std::string::npos);
    EXPECT_NE(message("pi_star,mu,r\n").find("empty dataset"), std::string::npos);
    EXPECT_NE(message("").find("empty dataset"), std::string::npos);
    EXPECT_NE(message("pi_star,mu,r\n1,0.1\n").find("row 2"), std::string::npos);
    EXPECT_NE(message("pi_star,mu,r\n1,0.1,inf\n").find("field r"), std::string::npos);
    EXPECT_THROW(read_dataset(path("missing.csv")), DataError);
}

TEST_F(DatasetIo, RoundTripIsBitExact) {
    std::mt19937_64 gen(51);
    std::uniform_real_distribution<double> u(-1e3, 1e3);
    std::uniform_int_distribution<int> ex(-300, 300);
    for (int trial = 0; trial < 20; ++trial) {
        const bool labelled = trial % 2 == 0;
        std::vector<MarketObservation> rows;
        for (int i = 0; i < 50; ++i) {
            const double pi = std::ldexp(u(gen), ex(gen) / 3);
            rows.emplace_back(pi, u(gen) * 1e-3, std::nextafter(0.02, 1.0),
                              labelled ? std::optional<std::string>("t" + std::to_string(i)) : std::nullopt);
        }
        const Dataset d(rows, {"x", labelled ? DatasetMode::TimeSeries : DatasetMode::CrossSection});
        write_dataset(d, path("rt.csv"));
        const auto back = read_dataset(path("rt.csv"));
        EXPECT_EQ(back.rows(), d.rows());
        EXPECT_EQ(back.metadata().mode, d.metadata().mode);
    }
}

TEST_F(ReportIo, Stage1OnlyReport) {
    ModelImpliedSpec spec;
    const auto data = generate_synthetic_dataset(spec, 1);
    ReportContent c;
    c.stage1 = fit_volatility(data);
    write_report(c, path("r.txt"));
    const auto kv = parse_report(slurp(path("r.txt")));
    EXPECT_TRUE(kv.contains("stage1.beta1"));
    EXPECT_TRUE(kv.contains("stage1.beta3"));
    EXPECT_TRUE(kv.contains("stage1.se_beta3"));
    EXPECT_EQ(kv.at("stage1.converged"), "true");
    EXPECT_EQ(kv.at("diagnostics.stage1"), "none");
    for (const auto& [k, v] : kv) EXPECT_FALSE(k.starts_with("stage2.")) << k;
    EXPECT_NEAR(std::stod(kv.at("stage1.beta3")), 0.04, 1e-8);
}

TEST_F(ReportIo, IdenticalContentGivesIdenticalBytes) {
    ModelImpliedSpec spec;
    spec.noise = 0.01;
    const auto data = generate_synthetic_dataset(spec, 2);
    ReportContent c;
    c.stage1 = fit_volatility(data);
    write_report(c, path("a.txt"));
    write_report(c, path("b.txt"));
    EXPECT_EQ(slurp(path("a.txt")), slurp(path("b.txt")));
}

TEST_F(ReportIo, FreeGaugeWarningIsRenderedVerbatim) {
    ModelImpliedSpec spec;
    spec.noise = 0.01;
    const auto data = generate_synthetic_dataset(spec, 3);
    ReportContent c;
    c.stage1 = fit_volatility(data);
    c.stage2 = fit_vol_of_vol(data, c.stage1->stage1().beta3, GaugeRule::free());
    const auto text = render_report(c);
    const auto kv = parse_report(text);
    EXPECT_NE(kv.at("diagnostics.stage2").find("GAUGE_UNIDENTIFIED"), std::string::npos);
    EXPECT_EQ(kv.at("stage2.gauge"), "free");
    EXPECT_EQ(kv.at("stage2.pin_value"), "null");
}

TEST_F(ReportIo, NonFiniteAndAbsentValuesRenderAsNull) {
    FitResult f;
    f.params = Stage1Params{1.0, 2.0, std::numeric_limits<double>::infinity()};
    f.standard_errors = {0.1, std::nullopt, std::nan("")};
    ReportContent c;
    c.stage1 = f;
    const auto kv = parse_report(render_report(c));
    EXPECT_EQ(kv.at("stage1.beta3"), "null");
    EXPECT_EQ(kv.at("stage1.se_beta2"), "null");
    EXPECT_EQ(kv.at("stage1.se_beta3"), "null");
    EXPECT_EQ(kv.at("stage1.se_beta1"), "0.10000000000000001");
    const auto text = render_report(c);
    EXPECT_EQ(text.find("inf"), std::string::npos);
    EXPECT_EQ(text.find("nan"), std::string::npos);
}

TEST_F(ReportIo, WriteFailureNamesThePath) {
    ReportContent c;
    const std::string bad = path("no/such/dir/r.txt");
    try {
        write_report(c, bad);
        FAIL();
    } catch (const DataError& ex) {
        EXPECT_NE(std::string(ex.what()).find(bad), std::string::npos);
    }
}

TEST_F(ConfigIo, MinimalFitConfigGetsSolverDefaults) {
    const auto p = write("c.cfg", "# fit only\nmode = fit\ninput = data.csv\noutput = report.txt\n");
    const auto c = parse_config(p);
    EXPECT_EQ(c.mode, RunMode::Fit);
    EXPECT_EQ(c.input.value(), "data.csv");
    EXPECT_EQ(c.solver.max_iterations, 200);
    EXPECT_EQ(c.solver.g_tol, 1e-10);
    EXPECT_EQ(c.solver.x_tol, 1e-12);
    EXPECT_EQ(c.solver.lambda0, 1e-3);
    EXPECT_EQ(c.solver.lambda_factor, 10.0);
    EXPECT_EQ(c.gauge, GaugeKind::PinBeta5);
}

TEST_F(ConfigIo, NegativeGammaIsATypeError) {
    const std::string text =
        "mode = simulate\noutput = d.csv\n[heston]\nmu = 0.08\nr = 0.02\nalpha = 0.04\nbeta = 2\ngamma = -0.1\n"
        "rho = 0\nsigma_bar = 0.04\n";
    try {
        parse_config_text(text);
        FAIL();
    } catch (const ConfigError& ex) {
        EXPECT_NE(std::string(ex.what()).find("type error: key 'heston.gamma'"), std::string::npos) << ex.what();
    }
}

TEST_F(ConfigIo, UnknownKeyIsRejected) {
    try {
        parse_config_text("mode = fit\ninput = a\noutput = b\nbetta3 = 0.04\n");
        FAIL();
    } catch (const ConfigError& ex) {
        EXPECT_STREQ(ex.what(), "unknown key: betta3");
    }
    EXPECT_THROW(parse_config_text("[generation]\nbetta3 = 1\n"), ConfigError);
    EXPECT_THROW(parse_config_text("[gen]\n"), ConfigError);
}

TEST_F(ConfigIo, MissingRequiredKeyForMode) {
    try {
        parse_config_text("mode = fit\noutput = b\n");
        FAIL();
    } catch (const ConfigError& ex) {
        EXPECT_NE(std::string(ex.what()).find("missing required key for mode fit: input"), std::string::npos);
    }
    EXPECT_THROW(parse_config_text("mode = pipeline\noutput = r\n[generation]\nkind = structural\n"), ConfigError);
}

TEST_F(ConfigIo, FullPipelineConfig) {
    const std::string text = R"(mode = pipeline
output = report.txt
dataset = data.csv
threads = 2

[generation]
kind = model-implied
n = 80
noise = 0.005
e_min = 0.02
e_max = 0.2
seed = 17
beta1 = 1.5
beta2 = 0.25
beta3 = 0.03

[solver]
max_iterations = 50
g_tol = 1e-9

[volvol]
gauge = pin-beta6

[rho]
alpha_ratio = -0.25
)";
    const auto c = parse_config_text(text);
    EXPECT_EQ(c.threads, 2u);
    EXPECT_EQ(c.seed, 17u);
    EXPECT_EQ(c.model_implied.n, 80u);
    EXPECT_EQ(c.model_implied.truth, (Stage1Params{1.5, 0.25, 0.03}));
    EXPECT_EQ(c.solver.max_iterations, 50);
    EXPECT_EQ(c.solver.g_tol, 1e-9);
    EXPECT_EQ(c.gauge, GaugeKind::PinBeta6);
    EXPECT_EQ(c.alpha_ratio.value(), -0.25);
    EXPECT_TRUE(std::holds_alternative<ModelImpliedSpec>(c.generation_spec()));
}

TEST_F(ConfigIo, OtherTypeErrors) {
    EXPECT_THROW(parse_config_text("threads = two\n"), ConfigError);
    EXPECT_THROW(parse_config_text("[validation]\nstage2 = yes\n"), ConfigError);
    EXPECT_THROW(parse_config_text("[volvol]\ngauge = pinned\n"), ConfigError);
    EXPECT_THROW(parse_config_text("mode = fitt\n"), ConfigError);
    EXPECT_THROW(parse_config_text("[policy]\nalpha0 = 1\nalpha1 = 2\nalpha2 = 0\n"), ConfigError);
    EXPECT_THROW(parse_config_text("[heston]\nmu = 0.08\nrho = 1.0\n"), ConfigError);
    EXPECT_THROW(parse_config_text("mode = fit\nmode = fit\n"), ConfigError);
    EXPECT_THROW(parse_config(path("absent.cfg")), ConfigError);
}
