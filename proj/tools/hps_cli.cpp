// hps: command-line driver for the experiment suite.
//
//   hps <subcommand> [--config FILE] [--out CSV] [--mode stored|econ] [--p P] [--n N] [--nref R]

#include "hps/harness.hpp"
#include "hps/verify.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

namespace {

struct Overrides {
    std::string config;
    std::string out;
    std::string mode;
    std::optional<int> p;
    std::optional<int> q;
    std::optional<int> n;
    std::optional<int> nref;
    std::optional<int> repetitions;
    std::string save_operators;
    std::string trajectory_out;
};

void add_common(CLI::App* cmd, Overrides& o) {
    cmd->add_option("--config", o.config, "JSON configuration file")->check(CLI::ExistingFile);
    cmd->add_option("--out", o.out, "CSV output path (stdout when omitted)");
    cmd->add_option("--mode", o.mode, "operator storage")->check(CLI::IsMember({"stored", "econ"}));
    cmd->add_option("--p", o.p, "Chebyshev points per leaf side");
    cmd->add_option("--q", o.q, "Gauss points per leaf edge (default p - 1)");
    cmd->add_option("--n", o.n, "leaves per side of the uniform base mesh");
    cmd->add_option("--nref", o.nref, "refinement levels");
    cmd->add_option("--repetitions", o.repetitions, "timing repetitions");
    cmd->add_option("--save-operators", o.save_operators, "write the operator archive of the last case");
}

hps::ExperimentConfig resolve(const std::string& experiment, const Overrides& o) {
    hps::ExperimentConfig c = hps::default_config(experiment);
    if (!o.config.empty()) hps::apply_json(c, hps::read_json_file(o.config));
    if (!o.out.empty()) c.out = o.out;
    if (!o.mode.empty()) c.mode = hps::parse_mode(o.mode);
    if (o.p) {
        c.p = *o.p;
        if (!o.q) c.q.reset();
    }
    if (o.q) {
        c.q = *o.q;
        if (!c.q_values.empty()) c.q_values = {*o.q};
    }
    if (o.n) c.n_values = {*o.n};
    if (o.nref) c.n_ref_values = {*o.nref};
    if (o.repetitions) c.repetitions = *o.repetitions;
    if (!o.save_operators.empty()) c.save_operators = o.save_operators;
    if (!o.trajectory_out.empty()) c.trajectory_out = o.trajectory_out;
    return c;
}

int run(const hps::ExperimentConfig& c) {
    const hps::ExperimentResult result = hps::run_experiment(c);
    if (c.out.empty()) {
        hps::write_csv(std::cout, result.rows);
    } else {
        hps::write_csv(c.out, result.rows);
    }
    for (const auto& f : result.failures) std::cerr << "error: " << f << '\n';
    return result.ok() ? 0 : 2;
}

int verify() {
    int failed = 0;
    for (const auto& r : hps::run_invariant_suite()) {
        std::printf("%s %s (value %.3e, tolerance %.1e)%s%s\n", r.pass ? "PASS" : "FAIL", r.name.c_str(), r.value,
                    r.tolerance, r.detail.empty() ? "" : ": ", r.detail.c_str());
        failed += r.pass ? 0 : 1;
    }
    return failed == 0 ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Hierarchical spectral-collocation direct solver experiments"};
    app.require_subcommand(1);

    Overrides o;
    std::string selected;
    for (const auto& name : hps::experiment_names()) {
        CLI::App* cmd = app.add_subcommand(name, "run the " + name + " experiment");
        add_common(cmd, o);
        if (name == "parabolic") cmd->add_option("--trajectory", o.trajectory_out, "CSV snapshots of the finest run");
        cmd->callback([&selected, name] { selected = name; });
    }
    app.add_subcommand("verify", "run the invariant suite")->callback([&selected] { selected = "verify"; });

    CLI11_PARSE(app, argc, argv);
    try {
        if (selected == "verify") return verify();
        return run(resolve(selected, o));
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
