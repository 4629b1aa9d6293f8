#include "ustat_cli.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

using namespace ustat;
namespace fs = std::filesystem;

namespace {

const fs::path data_dir = USTAT_DATA_DIR;

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result run(std::vector<std::string> args) {
    std::ostringstream out;
    std::ostringstream err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

std::string data(const std::string& name) { return (data_dir / name).string(); }

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

class TempDir {
public:
    TempDir() {
        static int counter = 0;
        path_ = fs::temp_directory_path() /
                ("ustat-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        fs::create_directories(path_);
    }
    ~TempDir() { fs::remove_all(path_); }
    [[nodiscard]] const fs::path& path() const { return path_; }
    [[nodiscard]] std::string write(const std::string& name, const std::string& text) const {
        std::ofstream(path_ / name, std::ios::binary) << text;
        return (path_ / name).string();
    }

private:
    fs::path path_;
};

io::Json parse(const std::string& s) { return io::Json::parse(s); }

} // namespace

TEST(CliNorm, IdentityNorms) {
    auto r = run({"norm", data("identity-2x2.json"), "{1}|{2}"});
    ASSERT_EQ(r.code, cli::exit_pass) << r.err;
    EXPECT_NEAR(parse(r.out)["value"].get<double>(), 1.0, 1e-12);
    r = run({"norm", data("identity-2x2.json"), "{1,2}"});
    ASSERT_EQ(r.code, cli::exit_pass);
    EXPECT_NEAR(parse(r.out)["value"].get<double>(), std::sqrt(2.0), 1e-12);
    r = run({"norm", data("identity-2x2.json"), "{1}|{2}", "--method", "alternating"});
    ASSERT_EQ(r.code, cli::exit_pass);
    EXPECT_NEAR(parse(r.out)["value"].get<double>(), 1.0, 1e-9);
}

TEST(CliNorm, InputErrors) {
    EXPECT_EQ(run({"norm", data("identity-2x2.json"), "{1}"}).code, cli::exit_input_error);
    EXPECT_EQ(run({"norm", data("identity-2x2.json"), "{1,2"}).code, cli::exit_input_error);
    EXPECT_EQ(run({"norm", data("no-such-file.json"), "{1,2}"}).code, cli::exit_input_error);
    EXPECT_EQ(run({"norm", data("identity-2x2.json"), "{1}|{2}", "--method", "magic"}).code, cli::exit_input_error);
    EXPECT_EQ(run({"frobnicate"}).code, cli::exit_input_error);
    EXPECT_EQ(run({}).code, cli::exit_input_error);
    const auto r = run({"norm", data("no-such-file.json"), "{1,2}"});
    EXPECT_NE(r.err.find("error:"), std::string::npos);
}

TEST(CliNorm, HelpExitsCleanly) {
    const auto r = run({"--help"});
    EXPECT_EQ(r.code, cli::exit_pass);
    EXPECT_NE(r.out.find("verify"), std::string::npos);
}

TEST(CliCanonicalize, RemovesLowerOrderParts) {
    TempDir dir;
    const auto out_file = (dir.path() / "canon.json").string();
    const auto r = run({"canonicalize", data("rademacher-x-plus-y-plus-xy.json"), "--out", out_file});
    ASSERT_EQ(r.code, cli::exit_pass) << r.err;
    const auto j = parse(r.out);
    EXPECT_TRUE(j["canonical"].get<bool>());
    EXPECT_GT(j["inputMaxConditionalMean"].get<double>(), 0.5);
    const auto table = j["kernel"]["table"].get<std::vector<double>>();
    const std::vector<double> want{1.0, -1.0, -1.0, 1.0};
    ASSERT_EQ(table.size(), 4u);
    for (std::size_t k = 0; k < 4; ++k) {
        EXPECT_NEAR(table[k], want[k], 1e-12);
    }
    const auto back = io::kernel_from_json(io::read_json_file(out_file));
    EXPECT_TRUE(is_canonical(back.ensemble));
}

TEST(CliBound, MomentExample) {
    const auto r = run({"bound", data("rademacher-sum.json"), "--theorem", "6", "--p", "4"});
    ASSERT_EQ(r.code, cli::exit_pass) << r.err;
    EXPECT_NEAR(parse(r.out)["reports"][0]["total"].get<double>(), 320.0, 1e-9);
}

TEST(CliBound, RejectsNonCanonicalKernel) {
    const auto r = run({"bound", data("rademacher-x-plus-y-plus-xy.json"), "--theorem", "6", "--p", "2"});
    EXPECT_EQ(r.code, cli::exit_not_canonical);
    EXPECT_NE(r.err.find("not canonical"), std::string::npos);
    EXPECT_NE(r.err.find("axis j="), std::string::npos);
    const auto ok = run({"bound", data("rademacher-x-plus-y-plus-xy.json"), "--theorem", "7", "--t", "1",
                         "--allow-noncanonical"});
    ASSERT_EQ(ok.code, cli::exit_pass) << ok.err;
    EXPECT_FALSE(parse(ok.out)["reports"][0]["warnings"].empty());
}

TEST(CliBound, IidAtRangeOneEqualsGeneral) {
    TempDir dir;
    const auto one = dir.write("xy1.json", R"({"d": 2, "n": 1, "space": {"atoms": [-1, 1], "probs": [0.5, 0.5]},
                                              "kernelTable": [1, -1, -1, 1]})");
    for (const char* t : {"0.5", "3", "9"}) {
        const auto a = run({"bound", data("rademacher-xy.json"), "--theorem", "cor3", "--n", "1", "--t", t});
        const auto b = run({"bound", one, "--theorem", "7", "--t", t});
        ASSERT_EQ(a.code, cli::exit_pass) << a.err;
        ASSERT_EQ(b.code, cli::exit_pass) << b.err;
        EXPECT_DOUBLE_EQ(parse(a.out)["reports"][0]["probability"].get<double>(),
                         parse(b.out)["reports"][0]["probability"].get<double>());
    }
}

TEST(CliBound, WritesCsvFiles) {
    TempDir dir;
    const auto csv = (dir.path() / "b.csv").string();
    const auto terms = (dir.path() / "terms.csv").string();
    const auto r = run({"bound", data("rademacher-xy.json"), "--theorem", "7", "--t", "1,2,4", "--csv", csv,
                        "--terms-csv", terms});
    ASSERT_EQ(r.code, cli::exit_pass) << r.err;
    const auto text = slurp(csv);
    EXPECT_EQ(text.rfind("t,exponent,dominant_I,dominant_J,total,bound", 0), 0u) << text;
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 4);
    EXPECT_FALSE(slurp(terms).empty());
}

TEST(CliBound, ThresholdForStepKernel) {
    const auto r = run({"bound", data("step-unit.json"), "--theorem", "8", "--p", "2"});
    ASSERT_EQ(r.code, cli::exit_pass) << r.err;
    EXPECT_NEAR(parse(r.out)["reports"][0]["total"].get<double>(), 2.0 + std::sqrt(2.0), 1e-12);
    EXPECT_EQ(run({"bound", data("step-unit.json"), "--theorem", "5", "--p", "2"}).code, cli::exit_input_error);
}

TEST(CliPoisson, ReportsNormsAndThreshold) {
    const auto r = run({"poisson", data("step-unit.json"), "--p", "2", "--samples", "1000"});
    ASSERT_EQ(r.code, cli::exit_pass) << r.err;
    const auto j = parse(r.out);
    EXPECT_EQ(j["norms"].size(), 2u);
    EXPECT_NEAR(j["reports"][0]["total"].get<double>(), 2.0 + std::sqrt(2.0), 1e-12);
    EXPECT_EQ(j["samples"]["N"].get<std::size_t>(), 1000u);
}

TEST(CliVerify, BundledConfigsPass) {
    for (const char* cfg : {"configs/rademacher-d2.json", "configs/poisson-unit.json"}) {
        const auto r = run({"verify", data(cfg)});
        EXPECT_EQ(r.code, cli::exit_pass) << cfg << "\n" << r.err;
        EXPECT_TRUE(parse(r.out)["pass"].get<bool>());
    }
}

TEST(CliVerify, SmallRunsReportUnresolvableRows) {
    TempDir dir;
    const auto cfg = dir.write("small.json", R"({
      "schemaVersion": 1, "experiment": "tail", "theorem": "cor3",
      "kernel": ")" + data("rademacher-xy.json") + R"(",
      "tGrid": [0, 400, 800],
      "calibration": {"source": "exact", "ranges": [1, 3]},
      "validation": {"seed": 1, "N": 100, "ranges": [2]}
    })");
    const auto r = run({"verify", cfg});
    EXPECT_EQ(r.code, cli::exit_pass) << r.err;
    EXPECT_NE(r.err.find("unresolvable"), std::string::npos);
    const auto rows = parse(r.out)["validation"][0]["rows"];
    EXPECT_EQ(rows[0]["status"], "vacuous");
    EXPECT_EQ(rows[1]["status"], "unresolvable");
}

TEST(CliVerify, SchemaViolationsAreInputErrors) {
    TempDir dir;
    const auto extra = dir.write("extra.json", R"({"schemaVersion": 1, "experiment": "tail", "bogus": 1,
      "kernel": ")" + data("rademacher-xy.json") + R"(", "tGrid": [1], "constant": 1,
      "validation": {"seed": 1, "N": 10}})");
    EXPECT_EQ(run({"verify", extra}).code, cli::exit_input_error);
    const auto version = dir.write("version.json", R"({"schemaVersion": 2, "experiment": "tail"})");
    EXPECT_EQ(run({"verify", version}).code, cli::exit_input_error);
    const auto kind = dir.write("kind.json", R"({"schemaVersion": 1, "experiment": "party"})");
    EXPECT_EQ(run({"verify", kind}).code, cli::exit_input_error);
    const auto broken = dir.write("broken.json", "{ not json");
    EXPECT_EQ(run({"verify", broken}).code, cli::exit_input_error);
}

TEST(CliVerify, FailingConstantExitsOne) {
    TempDir dir;
    const auto cfg = dir.write("tight.json", R"({
      "schemaVersion": 1, "experiment": "tail", "theorem": "cor3",
      "kernel": ")" + data("rademacher-xy.json") + R"(",
      "tGrid": [1], "constant": 0.25,
      "validation": {"seed": 3, "N": 20000, "ranges": [2]}
    })");
    EXPECT_EQ(run({"verify", cfg}).code, cli::exit_verify_failed);
}

TEST(CliVerify, OutputsAreByteIdentical) {
    TempDir dir;
    const auto a = dir.path() / "a";
    const auto b = dir.path() / "b";
    const auto c = dir.path() / "c";
    const auto cfg = data("configs/rademacher-d2.json");
    const auto ra = run({"--seed", "5", "verify", cfg, "--out-dir", a.string()});
    const auto rb = run({"--seed", "5", "verify", cfg, "--out-dir", b.string()});
    const auto rc = run({"--seed", "5", "--threads", "8", "verify", cfg, "--out-dir", c.string()});
    ASSERT_EQ(ra.code, cli::exit_pass) << ra.err;
    EXPECT_EQ(ra.out, rb.out);
    EXPECT_EQ(ra.out, rc.out);
    for (const char* f : {"tail.csv", "report.json", "plots.json"}) {
        EXPECT_FALSE(slurp(a / f).empty()) << f;
        EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
        EXPECT_EQ(slurp(a / f), slurp(c / f)) << f;
    }
}

TEST(Io, ArrayRoundTrip) {
    const auto a = ustat::testing::random_array({2, 3, 2}, 4);
    const auto back = io::array_from_json(io::parse_json(io::to_json(a).dump()));
    EXPECT_EQ(back.shape(), a.shape());
    EXPECT_TRUE(std::equal(a.values().begin(), a.values().end(), back.values().begin()));
    EXPECT_THROW(io::array_from_json(io::parse_json(R"({"shape": [2], "values": [1]})")), Error);
    EXPECT_THROW(io::array_from_json(io::parse_json(R"({"shape": [1], "values": [1], "x": 0})")), SchemaError);
}

TEST(Io, KernelRoundTrip) {
    const auto k = ustat::testing::random_canonical_kernel(2, 2, 3, 8);
    const auto back = io::kernel_from_json(io::parse_json(io::to_json(k).dump())).ensemble;
    EXPECT_EQ(back.order(), k.order());
    EXPECT_EQ(back.range(), k.range());
    EXPECT_TRUE(std::equal(k.table().begin(), k.table().end(), back.table().begin()));
    for (int j = 0; j < 2; ++j) {
        for (std::size_t i = 0; i < 2; ++i) {
            EXPECT_EQ(back.space(j, i).probs, k.space(j, i).probs);
        }
    }
}

TEST(Io, KernelRejectsUnknownFields) {
    EXPECT_THROW(io::kernel_from_json(io::parse_json(
                     R"({"d": 1, "n": 1, "space": {"atoms": [0, 1], "probs": [0.5, 0.5]}, "kernelTable": [1, 2],
                         "colour": "red"})")),
                 SchemaError);
    EXPECT_THROW(io::kernel_from_json(io::parse_json(
                     R"({"d": 1, "n": 1, "space": {"atoms": [0, 1], "probs": [0.5, 0.6]}, "kernelTable": [1, 2]})")),
                 SchemaError);
    EXPECT_THROW(io::kernel_from_json(io::parse_json(
                     R"({"d": 1, "n": 1, "space": {"atoms": [0, 1], "probs": [0.5, 0.5]}, "kernelTable": [1]})")),
                 Error);
}

TEST(Io, StepKernelAndProcessRoundTrip) {
    const StepKernel h({{0.0, 0.5, 2.0}, {0.0, 1.0}}, MultiIndexArray({2, 1}, {1.5, -2.0}));
    const auto back = io::stepkernel_from_json(io::parse_json(io::to_json(h).dump()));
    EXPECT_EQ(back.grids(), h.grids());
    EXPECT_TRUE(std::equal(h.coefficients().values().begin(), h.coefficients().values().end(),
                           back.coefficients().values().begin()));
    const auto spec = ProcessSpec::homogeneous_poisson(h, 2.0);
    const auto sback = io::process_from_json(io::parse_json(io::to_json(spec).dump()));
    EXPECT_EQ(sback.lambda_increments, spec.lambda_increments);
    EXPECT_EQ(sback.variance_increments, spec.variance_increments);
    EXPECT_EQ(sback.kind, spec.kind);
}

TEST(Io, NumbersSurviveTextRoundTrip) {
    for (double v : {0.1, 1.0 / 3.0, 2.0 + std::sqrt(2.0), 1e-300, 6.02e23}) {
        EXPECT_EQ(std::stod(io::csv_number(v)), v);
        EXPECT_EQ(io::parse_json(io::number(v).dump()).get<double>(), v);
    }
}
