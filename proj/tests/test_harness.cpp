#include "hps/harness.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace hps;

namespace {

std::string temp_path(const std::string& name) { return (std::filesystem::temp_directory_path() / name).string(); }

ExperimentConfig small_speed() {
    ExperimentConfig c = default_config("speed");
    c.n_values = {2, 4};
    c.repetitions = 1;
    return c;
}

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) out.push_back(cell);
    return out;
}

}  // namespace

TEST(Csv, HeaderIsStable) {
    std::ostringstream os;
    write_csv(os, {});
    EXPECT_EQ(os.str(), "N,p,q,n,n_ref,build_seconds,solve_seconds,memory_floats,linf_error,mode\n");
}

TEST(Csv, RowsCarryEveryColumn) {
    const ExperimentResult r = run_experiment(small_speed());
    ASSERT_TRUE(r.ok());
    std::ostringstream os;
    write_csv(os, r.rows);
    std::istringstream in(os.str());
    std::string line;
    std::getline(in, line);
    const std::size_t columns = split(line).size();
    int rows = 0;
    while (std::getline(in, line)) {
        const auto cells = split(line);
        ASSERT_EQ(cells.size(), columns);
        EXPECT_EQ(cells.back(), "stored");
        ++rows;
    }
    EXPECT_EQ(rows, 2);
    EXPECT_EQ(r.rows[1].N, chebyshev_dof_count(build_uniform_tree(Rect{Interval(0, 1), Interval(0, 1)}, 4), 9));
}

TEST(Csv, FailedRowIsNaN) {
    std::ostringstream os;
    ResultRow row;
    row.p = 9;
    write_csv(os, {row});
    EXPECT_NE(os.str().find(",nan,"), std::string::npos);
}

TEST(Runs, Deterministic) {
    const ExperimentResult a = run_experiment(small_speed());
    const ExperimentResult b = run_experiment(small_speed());
    ASSERT_EQ(a.rows.size(), b.rows.size());
    for (std::size_t i = 0; i < a.rows.size(); ++i) {
        EXPECT_EQ(a.rows[i].linf_error, b.rows[i].linf_error);
        EXPECT_EQ(a.rows[i].memory_floats, b.rows[i].memory_floats);
    }
}

TEST(Runs, SolverFailureYieldsNaNRowAndDiagnostic) {
    ExperimentConfig c = default_config("concentrated");
    c.p = 8;
    c.q = 7;  // odd q cannot resolve the refined interfaces
    c.n_values = {4};
    c.n_ref_values = {0, 1};
    c.target = {0.1, 0.1};
    c.reference = Discretization{12, 11, 8, 0, {}};
    const ExperimentResult r = run_experiment(c);
    ASSERT_EQ(r.rows.size(), 2u);
    EXPECT_FALSE(std::isnan(r.rows[0].linf_error));
    EXPECT_TRUE(std::isnan(r.rows[1].linf_error));
    ASSERT_EQ(r.failures.size(), 1u);
    EXPECT_NE(r.failures[0].find("n_ref=1"), std::string::npos);
}

TEST(Runs, ReferenceBudgetMustExceedExperiment) {
    ExperimentConfig c = default_config("discontinuous");
    c.p = 9;
    c.n_values = {4};
    c.reference = Discretization{9, 8, 4, 0, {}};
    const ExperimentResult r = run_experiment(c);
    ASSERT_EQ(r.rows.size(), 1u);
    EXPECT_TRUE(std::isnan(r.rows[0].linf_error));
    ASSERT_EQ(r.failures.size(), 1u);
    EXPECT_NE(r.failures[0].find("reference budget"), std::string::npos);
}

TEST(Runs, ParabolicRowPerStep) {
    ExperimentConfig c = default_config("parabolic");
    c.p = 9;
    c.n_values = {2};
    c.k_values = {0.02, 0.01};
    c.trajectory_out = temp_path("hps_test_traj.csv");
    const ExperimentResult r = run_experiment(c);
    ASSERT_TRUE(r.ok());
    ASSERT_EQ(r.rows.size(), 2u);
    EXPECT_LT(r.rows[1].linf_error, r.rows[0].linf_error);
    EXPECT_TRUE(std::filesystem::exists(c.trajectory_out));
    std::filesystem::remove(c.trajectory_out);
}

TEST(Runs, SaveOperatorsWritesALoadableArchive) {
    ExperimentConfig c = small_speed();
    c.mode = OperatorMode::Econ;
    c.save_operators = temp_path("hps_test_saved.bin");
    ASSERT_TRUE(run_experiment(c).ok());
    const FactorizedSolver s = load_operators(c.save_operators);
    EXPECT_EQ(s.mode(), OperatorMode::Econ);
    EXPECT_EQ(s.leaf_count(), 16u);
    std::filesystem::remove(c.save_operators);
}

TEST(Errors, AgainstItselfAndOffset) {
    const FactorizedSolver s = build_stage(build_uniform_tree(Rect{Interval(0, 1), Interval(0, 1)}, 2),
                                           catalog("poisson_sine"), 9, 8);
    const SolveState st = s.solve();
    EXPECT_LE(linf_error(s, st, [&](Point x) { return evaluate(s, st, x); }), 1e-14);
    EXPECT_NEAR(linf_error(s, st, [&](Point x) { return evaluate(s, st, x) + 0.25; }), 0.25, 1e-14);
}

TEST(Errors, LogLogSlope) {
    EXPECT_NEAR(loglog_slope({1, 2, 4, 8}, {3, 12, 48, 192}), 2.0, 1e-12);
    EXPECT_THROW((void)loglog_slope({1}, {1}), std::invalid_argument);
    EXPECT_DOUBLE_EQ(median({3.0, 1.0, 2.0}), 2.0);
    EXPECT_DOUBLE_EQ(median({4.0, 1.0}), 2.5);
}

TEST(Config, DefaultsValidate) {
    for (const auto& name : experiment_names()) EXPECT_NO_THROW(validate(default_config(name))) << name;
    EXPECT_THROW((void)default_config("nonsense"), std::invalid_argument);
}

TEST(Config, JsonOverlay) {
    ExperimentConfig c = default_config("varcoef");
    apply_json(c, Json::parse(R"({"p": 13, "n": 8, "q_values": [6, 12], "mode": "econ",
                                  "params": {"kappa": 20}, "reference": {"n": 16, "q": 16}})"));
    EXPECT_EQ(c.p, 13);
    EXPECT_EQ(c.n_values, std::vector<int>{8});
    EXPECT_EQ(c.q_values, (std::vector<int>{6, 12}));
    EXPECT_EQ(c.mode, OperatorMode::Econ);
    EXPECT_EQ(c.params.at("kappa"), 20.0);
    ASSERT_TRUE(c.reference.has_value());
    EXPECT_EQ(c.reference->n, 16);
    EXPECT_EQ(c.reference->p, 17);
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
    ExperimentConfig c = default_config("speed");
    EXPECT_THROW(apply_json(c, Json::parse(R"({"leaves": 4})")), std::invalid_argument);
    EXPECT_THROW(apply_json(c, Json::parse(R"({"mode": "compressed"})")), std::invalid_argument);
    c.n_values = {3};
    EXPECT_THROW(validate(c), std::invalid_argument);
    c = default_config("speed");
    c.q = 9;
    EXPECT_THROW(validate(c), std::invalid_argument);
}

TEST(Config, ReadsFileWithComments) {
    const std::string path = temp_path("hps_test_config.json");
    std::ofstream(path) << "{\n  // coarse run\n  \"p\": 7,\n  \"n_values\": [2]\n}\n";
    ExperimentConfig c = default_config("speed");
    apply_json(c, read_json_file(path));
    EXPECT_EQ(c.p, 7);
    EXPECT_EQ(c.order(), 6);
    std::filesystem::remove(path);
    EXPECT_THROW((void)read_json_file(path), std::runtime_error);
}

TEST(MeshJson, RoundTrip) {
    const MeshDescription m = lshape_mesh(0.25, 2);
    const MeshDescription back = mesh_from_json(Json::parse(to_json(m).dump()));
    ASSERT_EQ(back.pieces.size(), m.pieces.size());
    EXPECT_EQ(back.merges, m.merges);
    const DomainTree a = build_mesh(m);
    const DomainTree b = build_mesh(back);
    EXPECT_EQ(a.size(), b.size());
    EXPECT_EQ(a.leaves().size(), b.leaves().size());
}

TEST(MeshJson, CustomMeshDrivesAnExperiment) {
    ExperimentConfig c = small_speed();
    apply_json(c, Json::parse(R"({"mesh": {"pieces": [{"domain": [0, 1, 0, 1], "n": 2,
                                   "refinements": [{"target": [0.25, 0.25], "levels": 1}]}]}})"));
    c.n_values = {2};
    const ExperimentResult r = run_experiment(c);
    ASSERT_TRUE(r.ok());
    EXPECT_LE(r.rows[0].linf_error, 1e-3);
}

TEST(MeshJson, RejectsMalformedInput) {
    EXPECT_ANY_THROW((void)rect_from_json(Json::parse("[0, 1, 0]")));
    EXPECT_ANY_THROW((void)mesh_from_json(Json::parse(R"({"pieces": [{"domain": [0, 1, 0, 1]}], "merges": [[0]]})")));
    EXPECT_ANY_THROW((void)refinement_from_json(Json::parse(R"({"target": [0.5, 0.5], "levels": -1})")));
}
