#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "peakinf/errors.hpp"
#include "peakinf/harness.hpp"

using namespace peakinf;
namespace fs = std::filesystem;

namespace {

// Small local window around a single bump; fast enough for unit tests.
const char* kSmall = R"({
  "grid": {"lo": [-0.5, -0.5], "hi": [0.5, 0.5], "counts": [41, 41]},
  "signal": {"kind": "single_bump", "center": [0, 0]},
  "sweep": {"mu0": [8], "u_offsets": [0, 2]},
  "methods": ["standard", "carve", "split"],
  "replicates": 40,
  "seed": 3
})";

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::string> lines(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream in(s);
    for (std::string l; std::getline(in, l);) out.push_back(l);
    return out;
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::istringstream in(line);
    for (std::string f; std::getline(in, f, ',');) out.push_back(f);
    return out;
}

fs::path scratch(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("peakinf_test_" + name);
    fs::remove_all(p);
    return p;
}

ErrorCode code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no exception";
    return ErrorCode::io;
}

}  // namespace

TEST(Config, PresetsValidateAndRoundTrip) {
    for (const char* name : {"exp1", "exp2", "exp3", "custom"}) {
        const auto c = make_config(name);
        EXPECT_NO_THROW(c.validate()) << name;
        const auto text = config_to_json(c);
        EXPECT_EQ(config_to_json(config_from_json(text)), text) << name;
    }
    EXPECT_EQ(make_config("exp1").mu0.size(), 9u);
    EXPECT_EQ(make_config("exp2").methods.size(), 3u);
    EXPECT_EQ(make_config("exp3").bumps.size(), 9u);
    EXPECT_THROW((void)make_config("exp4"), Error);
}

TEST(Config, OverridesMerge) {
    const auto c = make_config("exp1", R"({"replicates": 17, "grid": {"counts": [40, 40]}, "detection": {"v": 0.5}})");
    EXPECT_EQ(c.replicates, 17u);
    EXPECT_EQ(c.counts, (std::vector<int>{40, 40}));
    ASSERT_TRUE(c.v.has_value());
    EXPECT_EQ(*c.v, 0.5);
    EXPECT_EQ(c.kernel.length_scale, 0.15);  // untouched
}

TEST(Config, SchemaErrors) {
    const auto bad = [](const std::string& patch) {
        return code_of([&] { (void)make_config("exp1", patch); });
    };
    EXPECT_EQ(bad(R"({"replicate": 3})"), ErrorCode::configuration);
    EXPECT_EQ(bad(R"({"grid": {"count": [4, 4]}})"), ErrorCode::configuration);
    EXPECT_EQ(bad(R"({"replicates": "many"})"), ErrorCode::configuration);
    EXPECT_EQ(bad(R"({"replicates": 0})"), ErrorCode::configuration);
    EXPECT_EQ(bad(R"({"methods": ["bootstrap"]})"), ErrorCode::configuration);
    EXPECT_EQ(bad(R"({"detection": {"mode": "fdr"}})"), ErrorCode::configuration);
    EXPECT_EQ(bad(R"({"gamma": -1})"), ErrorCode::configuration);
    EXPECT_EQ(bad(R"({"inference": {"alpha": 1.5}})"), ErrorCode::configuration);
    EXPECT_EQ(bad(R"({"kernel": {"length_scale": 0}})"), ErrorCode::configuration);
    EXPECT_THROW((void)config_from_json("{not json"), Error);
    EXPECT_THROW((void)config_from_json("[1, 2]"), Error);
}

TEST(Plan, OffsetCells) {
    const auto plan = make_plan(make_config("custom", kSmall));
    ASSERT_EQ(plan.cells.size(), 2u);
    for (const auto& c : plan.cells) {
        EXPECT_EQ(c.mu0, 8.0);
        EXPECT_EQ(c.u, 8.0 + c.u_offset);
        EXPECT_EQ(c.v, c.u);
        EXPECT_EQ(c.u_sel, c.u);
        ASSERT_EQ(c.truth.size(), 1u);
        ASSERT_EQ(c.ctx.size(), 1u);
        EXPECT_NEAR(c.ctx[0].u_bar, std::max(c.u, 8.0), 1e-12);
    }
    EXPECT_EQ(plan.cells[0].signal_index, plan.cells[1].signal_index);
}

TEST(Plan, TgCellsScaleSelectionThreshold) {
    const auto plan = make_plan(make_config("exp3", R"({"replicates": 1})"));
    ASSERT_EQ(plan.cells.size(), 1u);
    const auto& c = plan.cells[0];
    EXPECT_NEAR(c.u, tg_threshold(0.1, 3.0, 2), 1e-12);
    EXPECT_NEAR(c.u_sel, std::sqrt(2.0) * c.u, 1e-12);
    EXPECT_NEAR(c.v_sel, std::sqrt(2.0) * 3.0, 1e-12);
    EXPECT_EQ(c.truth.size(), 9u);
    EXPECT_TRUE(std::isnan(c.mu0));
}

TEST(Replicate, Deterministic) {
    const auto plan = make_plan(make_config("custom", kSmall));
    const auto a = run_replicate(plan, 5);
    const auto b = run_replicate(plan, 5);
    ASSERT_EQ(a.cells.size(), b.cells.size());
    for (std::size_t c = 0; c < a.cells.size(); ++c)
        for (int m = 0; m < kMethodCount; ++m) {
            const auto& x = a.cells[c].methods[m];
            const auto& y = b.cells[c].methods[m];
            EXPECT_EQ(x.counts.discoveries, y.counts.discoveries);
            EXPECT_EQ(x.counts.prethresholded, y.counts.prethresholded);
            ASSERT_EQ(x.conditioned.size(), y.conditioned.size());
            for (std::size_t t = 0; t < x.conditioned.size(); ++t) {
                ASSERT_EQ(x.conditioned[t].has_value(), y.conditioned[t].has_value());
                if (x.conditioned[t]) EXPECT_EQ(x.conditioned[t]->statistics, y.conditioned[t]->statistics);
            }
        }
}

TEST(Replicate, StandardOnlySkipsRandomizedMethods) {
    const auto plan = make_plan(make_config("custom", R"({
      "grid": {"lo": [-0.5, -0.5], "hi": [0.5, 0.5], "counts": [41, 41]},
      "sweep": {"mu0": [8], "u_offsets": [0]}, "replicates": 3})"));
    const auto r = run_replicate(plan, 0);
    EXPECT_TRUE(r.cells[0].methods[0].enabled);
    EXPECT_FALSE(r.cells[0].methods[1].enabled);
    EXPECT_FALSE(r.cells[0].methods[2].enabled);
}

// Output bytes do not depend on the worker count.
TEST(Experiment, ThreadCountInvariant) {
    std::string a, b;
    for (int threads : {1, 3}) {
        const auto dir = scratch("threads" + std::to_string(threads));
        auto c = make_config("custom", kSmall);
        c.threads = threads;
        c.output_dir = dir.string();
        const auto res = run_experiment(c);
        EXPECT_FALSE(res.failed) << res.failure_reason;
        write_outputs(res);
        const auto text = slurp(dir / "pivots.csv") + slurp(dir / "coverage.csv") + slurp(dir / "rates.csv");
        (threads == 1 ? a : b) = text;
        fs::remove_all(dir);
    }
    EXPECT_FALSE(a.empty());
    EXPECT_EQ(a, b);
}

TEST(Experiment, CsvSchemas) {
    const auto dir = scratch("schema");
    auto c = make_config("custom", kSmall);
    c.output_dir = dir.string();
    write_outputs(run_experiment(c));
    const std::pair<const char*, const char*> expected[] = {
        {"pivots", "mu0,u_offset,u,method,replicate,peak,statistic,value"},
        {"coverage", "mu0,u_offset,u,method,peak,target,coverage,se,width,width_se,n,discovery_rate"},
        {"rates",
         "mu0,u_offset,u,v,method,replicates,n_prethresholded,n_discoveries,pcer0,pcer0_se,eps_pcer,eps_pcer_se,"
         "pcmr_height,pcmr_height_se,pcmr_location,pcmr_location_se,degenerate,failed_match,numerical_failures"},
    };
    for (auto [name, header] : expected) {
        const auto ls = lines(slurp(dir / (std::string(name) + ".csv")));
        ASSERT_GE(ls.size(), 3u) << name;
        EXPECT_EQ(ls[0], std::string("# peakinf-csv schema=") + name + " version=1");
        EXPECT_EQ(ls[1], header);
        const auto width = split_csv(header).size();
        for (std::size_t i = 2; i < ls.size(); ++i) EXPECT_EQ(split_csv(ls[i]).size(), width) << name << i;
    }
    // Two cells times three methods.
    EXPECT_EQ(lines(slurp(dir / "rates.csv")).size(), 2u + 6u);
    const auto cfg = nlohmann::json::parse(slurp(dir / "config.json"));
    EXPECT_EQ(cfg["replicates"], 40);
    fs::remove_all(dir);
}

TEST(Experiment, FieldCsv) {
    const auto plan = make_plan(make_config("custom", kSmall));
    const auto y = sample_field(*plan.factor, plan.signals.front(), NoiseKey{1, 0, kNoiseStream, 0});
    const auto dir = scratch("field");
    fs::create_directories(dir);
    write_field_csv(y, dir / "field.csv");
    const auto ls = lines(slurp(dir / "field.csv"));
    ASSERT_EQ(ls.size(), 2u + 41u * 41u);
    EXPECT_EQ(ls[1], "x0,x1,y,mu");
    fs::remove_all(dir);
}

namespace {

void compare_with_golden(const std::string& preset, const fs::path& golden) {
    const auto report = lines(theory_report(make_config(preset)));
    const auto gold = lines(slurp(golden));
    ASSERT_GE(report.size(), 3u);
    EXPECT_EQ(report[0], "# peakinf theory config=" + preset);
    EXPECT_EQ(report[1].rfind("u_tg,alpha=0.1,v=3,d=2,", 0), 0u);
    ASSERT_EQ(report.size() - 2, gold.size());
    EXPECT_EQ(report[2], gold[0]);
    for (std::size_t i = 1; i < gold.size(); ++i) {
        const auto a = split_csv(report[i + 2]);
        const auto b = split_csv(gold[i]);
        ASSERT_EQ(a.size(), b.size());
        for (std::size_t k = 0; k < a.size(); ++k) {
            if (b[k] == "nan") {
                EXPECT_EQ(a[k], "nan");
                continue;
            }
            const double x = std::stod(a[k]), y = std::stod(b[k]);
            EXPECT_NEAR(x, y, 1e-10 * std::max(1.0, std::abs(y))) << preset << " row " << i << " col " << k;
        }
    }
}

}  // namespace

TEST(Theory, ReportMatchesGolden) {
    const fs::path dir = PEAKINF_TEST_DATA_DIR;
    compare_with_golden("exp1", dir / "theory_exp1.csv");
    compare_with_golden("exp3", dir / "theory_exp3.csv");
}

// With almost no randomization the selection field is the data itself.
TEST(Integration, TinyGammaSelectsLikeStandard) {
    const auto plan = make_plan(make_config("custom", R"({
      "grid": {"lo": [-0.5, -0.5], "hi": [0.5, 0.5], "counts": [41, 41]},
      "sweep": {"mu0": [6], "u_offsets": [0]}, "methods": ["standard", "carve"],
      "gamma": 1e-6, "replicates": 200})"));
    int same = 0;
    for (std::uint32_t r = 0; r < 200; ++r) {
        const auto out = run_replicate(plan, r);
        const auto& m = out.cells[0].methods;
        same += m[0].counts.discoveries == m[1].counts.discoveries &&
                m[0].counts.prethresholded == m[1].counts.prethresholded;
    }
    EXPECT_GE(same, 190);
}

TEST(Integration, OraclePivotRoughlyUniform) {
    const auto res = run_experiment(make_config("custom", R"({
      "grid": {"lo": [-0.5, -0.5], "hi": [0.5, 0.5], "counts": [41, 41]},
      "sweep": {"mu0": [11], "u_offsets": [0]}, "replicates": 1500, "seed": 99})"));
    ASSERT_FALSE(res.failed);
    const auto p = res.cells[0].methods[0].statistic(0, Method::standard, Statistic::tg_oracle);
    ASSERT_GE(p.size(), 400u);
    EXPECT_LT(ks_statistic(p, [](double x) { return std::clamp(x, 0.0, 1.0); }), 1.63 / std::sqrt(p.size()));
}
