#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "qvfv/serialization.hpp"

using namespace qvfv;
namespace fs = std::filesystem;

namespace {

const fs::path& workdir() {
    static const fs::path dir = [] {
        fs::path d = fs::temp_directory_path() / ("qvfv_cli_" + std::to_string(::getpid()));
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

std::string path(const std::string& name) { return (workdir() / name).string(); }

std::string slurp(const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct CliRun {
    int code = -1;
    std::string err;
};

CliRun cli(const std::string& args, const std::string& env = "") {
    const std::string err = path("stderr.txt");
    const std::string cmd = env + " " + QVFV_CLI_PATH + " " + args + " 2> " + err;
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(err)};
}

void write(const std::string& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

json tetra_file(const std::vector<std::int64_t>& counts, std::int64_t shots) {
    json recs = json::array();
    const char* ids[] = {"T0", "T1", "T2", "T3"};
    for (std::size_t k = 0; k < 4; ++k) {
        recs.push_back({{"state_id", "q0"}, {"basis_id", ids[k]}, {"shots", shots}, {"count", counts[k]}});
    }
    return {{"schema_version", "qvfv-records/1"}, {"catalog", tetrahedral_catalog()}, {"records", recs},
            {"provenance", {{"device", "test"}}}};
}

std::size_t count(const std::string& doc, const std::string& needle) {
    std::size_t n = 0;
    for (std::size_t p = doc.find(needle); p != std::string::npos; p = doc.find(needle, p + 1)) ++n;
    return n;
}

} // namespace

TEST(CliScan, TwoHundredRowsAndDeterminism) {
    ASSERT_EQ(cli("scan --states 200 --shots 20000 --catalog tetrahedral --seed 7 --out " + path("a.json")).code, 0);
    ASSERT_EQ(cli("scan --states 200 --shots 20000 --catalog tetrahedral --seed 7 --threads 3 --out " +
                  path("b.json")).code,
              0);
    const std::string a = slurp(path("a.json"));
    EXPECT_EQ(a, slurp(path("b.json")));
    const ScanResult r = parse<ScanResult>(a);
    EXPECT_EQ(r.rows.size(), 200u);
    EXPECT_GE(r.summary.mean_purity, 0.998);
}

TEST(CliScan, SeedFromEnvironment) {
    ASSERT_EQ(cli("scan --states 10 --seed 7 --out " + path("flag.json")).code, 0);
    ASSERT_EQ(cli("scan --states 10 --out " + path("env.json"), "SQT_SEED=7 SQT_THREADS=2").code, 0);
    EXPECT_EQ(slurp(path("flag.json")), slurp(path("env.json")));
    EXPECT_EQ(cli("scan --states 10 --out " + path("x.json"), "SQT_SEED=seven").code, 2);
}

TEST(CliScan, PauliSingleState) {
    ASSERT_EQ(cli("scan --catalog pauli --states 1 --out " + path("p.json")).code, 0);
    const ScanResult r = parse<ScanResult>(slurp(path("p.json")));
    ASSERT_EQ(r.rows.size(), 1u);
    EXPECT_EQ(r.rows[0].records.size(), 3u);
}

TEST(CliScan, UsageErrors) {
    CliRun r = cli("scan --states 0 --out " + path("bad.json"));
    EXPECT_EQ(r.code, 2);
    EXPECT_EQ(json::parse(r.err)["error"]["kind"], "InvalidArgument");
    r = cli("scan --catalog cube");
    EXPECT_EQ(r.code, 2);
    EXPECT_EQ(json::parse(r.err)["error"]["kind"], "UsageError");
    EXPECT_EQ(cli("").code, 2);
    EXPECT_EQ(cli("scan --noise depolarizing_p=2 --out " + path("bad.json")).code, 2);
    EXPECT_EQ(cli("scan --noise nonsense_key=0.1 --out " + path("bad.json")).code, 2);
}

TEST(CliScan, NoiseForms) {
    write(path("noise.json"), R"({"depolarizing_p": 0.03})");
    ASSERT_EQ(cli("scan --states 20 --seed 1 --noise " + path("noise.json") + " --out " + path("n1.json")).code, 0);
    ASSERT_EQ(cli("scan --states 20 --seed 1 --noise depolarizing_p=0.03 --out " + path("n2.json")).code, 0);
    ASSERT_EQ(
        cli("scan --states 20 --seed 1 --noise '{\"depolarizing_p\":0.03}' --out " + path("n3.json")).code, 0);
    EXPECT_EQ(slurp(path("n1.json")), slurp(path("n2.json")));
    EXPECT_EQ(slurp(path("n1.json")), slurp(path("n3.json")));
    EXPECT_EQ(parse<ScanResult>(slurp(path("n1.json"))).config.noise.depolarizing_p, 0.03);
}

TEST(CliReconstruct, PureZeroFromTetrahedralProbabilities) {
    write(path("z.json"), tetra_file({3000, 1000, 1000, 1000}, 3000).dump());
    ASSERT_EQ(cli("reconstruct --in " + path("z.json") + " --estimator both --out " + path("zr.json")).code, 0);
    const ScanResult r = parse<ScanResult>(slurp(path("zr.json")));
    ASSERT_EQ(r.rows.size(), 1u);
    ASSERT_TRUE(r.rows[0].result_mle && r.rows[0].result_lr);
    for (const auto* res : {&*r.rows[0].result_mle, &*r.rows[0].result_lr}) {
        EXPECT_NEAR(res->estimate.x, 0.0, 1e-6);
        EXPECT_NEAR(res->estimate.y, 0.0, 1e-6);
        EXPECT_NEAR(res->estimate.z, 1.0, 1e-6);
    }
    EXPECT_FALSE(r.rows[0].fidelity.has_value());
}

TEST(CliReconstruct, HalfCountsGiveMaximallyMixed) {
    write(path("m.json"), tetra_file({500, 500, 500, 500}, 1000).dump());
    ASSERT_EQ(cli("reconstruct --in " + path("m.json") + " --out " + path("mr.json")).code, 0);
    const ScanResult r = parse<ScanResult>(slurp(path("mr.json")));
    EXPECT_NEAR(norm(r.rows[0].result_mle->estimate), 0.0, 1e-9);
    EXPECT_FALSE(r.rows[0].result_lr.has_value());
}

TEST(CliReconstruct, SchemaViolationReportsIndex) {
    json f = tetra_file({3000, 1000, 1000, 1000}, 3000);
    f["records"][2]["count"] = 4000;
    write(path("bad_rec.json"), f.dump());
    const CliRun r = cli("reconstruct --in " + path("bad_rec.json"));
    EXPECT_EQ(r.code, 2);
    const json err = json::parse(r.err)["error"];
    EXPECT_EQ(err["kind"], "SchemaError");
    EXPECT_EQ(err["index"], 2);
}

TEST(CliReconstruct, ScanRecordsRoundTrip) {
    ASSERT_EQ(cli("scan --states 15 --seed 3 --estimator both --out " + path("s15.json") + " --records " +
                  path("r15.json")).code,
              0);
    ASSERT_EQ(cli("reconstruct --in " + path("r15.json") + " --estimator both --out " + path("s15r.json")).code, 0);
    const ScanResult a = parse<ScanResult>(slurp(path("s15.json")));
    const ScanResult b = parse<ScanResult>(slurp(path("s15r.json")));
    ASSERT_EQ(a.rows.size(), b.rows.size());
    for (std::size_t i = 0; i < a.rows.size(); ++i) {
        EXPECT_EQ(a.rows[i].result_mle, b.rows[i].result_mle);
        EXPECT_EQ(a.rows[i].result_lr, b.rows[i].result_lr);
        EXPECT_EQ(a.rows[i].distance, b.rows[i].distance);
    }
}

TEST(CliStudy, WarningAndDeterminism) {
    const CliRun r = cli("study --trials 50 --states 3 --seed 5 --out " + path("st1.json"));
    EXPECT_EQ(r.code, 0);
    EXPECT_NE(r.err.find("unreliable"), std::string::npos);
    ASSERT_EQ(cli("study --trials 50 --states 3 --seed 5 --threads 4 --out " + path("st2.json")).code, 0);
    EXPECT_EQ(slurp(path("st1.json")), slurp(path("st2.json")));
    const StudyResult s = parse<StudyResult>(slurp(path("st1.json")));
    EXPECT_EQ(s.series.size(), 2u);
    EXPECT_EQ(s.series[0].per_state.size(), 3u);
    EXPECT_EQ(cli("study --mode agreement --estimator mle --out " + path("x.json")).code, 2);
}

TEST(CliRender, IdealCorruptedAndGolden) {
    ASSERT_EQ(cli("scan --seed 7 --out " + path("ideal.json")).code, 0);
    ASSERT_EQ(cli("render --in " + path("ideal.json") + " --out " + path("ideal.svg")).code, 0);
    EXPECT_EQ(count(slurp(path("ideal.svg")), "class=\"arrow\""), 0u);
    ASSERT_EQ(cli("render --in " + path("ideal.json") + " --style defaults --out " + path("ideal2.svg")).code, 0);
    EXPECT_EQ(slurp(path("ideal.svg")), slurp(path("ideal2.svg")));

    ASSERT_EQ(cli("scan --seed 7 --rot-error-scale 0.08 --out " + path("rot.json")).code, 0);
    write(path("style.json"), R"({"colormap": "gray", "marker_radius": 0.05})");
    ASSERT_EQ(cli("render --in " + path("rot.json") + " --style " + path("style.json") + " --out " +
                  path("rot.svg")).code,
              0);
    EXPECT_GT(count(slurp(path("rot.svg")), "class=\"arrow\""), 0u);
    EXPECT_EQ(cli("render --in " + path("rot.json") + " --style '{\"width\": 3}'").code, 2);
}

TEST(CliRender, FailedScanExitsOne) {
    ScanResult s;
    s.rows.resize(2);
    s.rows[0].error = s.rows[1].error = "NonSpanningBases: x";
    s.summary = summarize(s.rows);
    write(path("failed.json"), emit(s));
    const CliRun r = cli("render --in " + path("failed.json") + " --out " + path("f.svg"));
    EXPECT_EQ(r.code, 1);
    EXPECT_EQ(json::parse(r.err)["error"]["kind"], "EmptyScan");
}

TEST(CliCompare, DetectorBehaviour) {
    ASSERT_EQ(cli("scan --seed 7 --estimator both --out " + path("cb.json")).code, 0);
    ASSERT_EQ(cli("scan --seed 7 --estimator both --rot-error-scale 0.08 --out " + path("cr.json")).code, 0);
    ASSERT_EQ(cli("compare --in " + path("cb.json") + " --out " + path("cmp_b.json")).code, 0);
    ASSERT_EQ(cli("compare --in " + path("cr.json") + " --out " + path("cmp_r.json") + " --svg " +
                  path("flagged.svg")).code,
              0);
    const auto clean = parse<CompareReport>(slurp(path("cmp_b.json")));
    const auto dirty = parse<CompareReport>(slurp(path("cmp_r.json")));
    EXPECT_LE(clean.flagged_fraction, 0.01);
    EXPECT_GT(dirty.flagged_fraction, clean.flagged_fraction);
    EXPECT_EQ(count(slurp(path("flagged.svg")), "<circle"), dirty.flagged.size());

    ASSERT_EQ(cli("compare --in " + path("cr.json") + " --threshold 1.5 --out " + path("cmp_t.json")).code, 0);
    EXPECT_TRUE(parse<CompareReport>(slurp(path("cmp_t.json"))).flagged.empty());

    ASSERT_EQ(cli("scan --states 5 --out " + path("mle_only.json")).code, 0);
    const CliRun r = cli("compare --in " + path("mle_only.json"));
    EXPECT_EQ(r.code, 2);
    EXPECT_EQ(json::parse(r.err)["error"]["kind"], "MissingEstimator");
}
