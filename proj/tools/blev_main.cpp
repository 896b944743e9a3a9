// blev: batch laboratory for branching Levy processes.
//
// Commands:
//   analyze   spectral table, theta_*, p_*(theta), condition verdicts
//   simulate  snapshot dump (CSV: replica,time,position)
//   verify    run one statistical experiment, write report, exit 0/1
//   report    re-render an existing report JSON
//
// Exit codes: 0 pass, 1 statistical fail, 2 precondition/config error,
// 3 explosion.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "blev/experiments.hpp"
#include "blev/model_io.hpp"
#include "blev/simulator.hpp"
#include "blev/spectral.hpp"

namespace sp = blev::spectral;

namespace {

constexpr std::uint64_t kDefaultSeed = 0x5EED;

std::string num(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", x);
    return buf;
}

std::uint64_t resolve_seed(const CLI::Option* seed_opt, std::uint64_t flag_value) {
    if (seed_opt->count() > 0) return flag_value;
    if (const char* env = std::getenv("BLEV_SEED")) {
        try {
            return std::stoull(env);
        } catch (...) {
            throw blev::ConfigError("BLEV_SEED is not a valid integer: " + std::string(env));
        }
    }
    return kDefaultSeed;
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) throw blev::ConfigError("cannot write " + path);
    out << content;
}

void print_report(const blev::mc::ExperimentReport& rep) {
    for (const auto& [name, e] : rep.estimates)
        std::cout << "estimate " << name << " = " << num(e.value) << " (se " << num(e.stderr_)
                  << ")\n";
    for (const auto& [name, t] : rep.tests) {
        std::cout << "test " << name << ": statistic=" << num(t.statistic);
        if (t.p_value) std::cout << " p=" << num(*t.p_value);
        std::cout << ' ' << (t.passed ? "PASS" : "FAIL") << " (" << t.criterion << ")\n";
    }
    std::cout << "verdict: " << (rep.pass ? "pass" : "fail")
              << " (seed=" << rep.provenance.seed << " digest=" << rep.provenance.config_digest
              << " replicas=" << rep.provenance.replicas
              << " wall_ms=" << num(rep.provenance.wall_ms) << ")\n";
}

int cmd_analyze(const std::string& model_path, std::vector<double> thetas, double p,
                const std::string& out_dir, bool echo_model) {
    const blev::BranchingModel model = blev::io::load_model_file(model_path);
    if (echo_model) {
        std::cout << blev::io::model_to_json(model);
        return 0;
    }

    const auto dom = sp::theta_domain(model);
    if (thetas.empty()) {
        const double hi = std::isfinite(dom.theta_plus) ? 0.95 * dom.theta_plus : 3.0;
        for (int i = 1; i <= 24; ++i) thetas.push_back(hi * i / 24.0);
    }
    const auto profile = sp::build_profile(model, thetas);

    std::ostringstream table;
    table << "theta,kappa,kappa_prime,kappa_double_prime\n";
    for (std::size_t i = 0; i < thetas.size(); ++i)
        table << num(thetas[i]) << ',' << num(profile.kappa[i]) << ',' << num(profile.kappa1[i])
              << ',' << num(profile.kappa2[i]) << '\n';

    std::ostringstream conds;
    conds << "condition,theta,p,holds,detail\n";
    auto add = [&](sp::ConditionId id, sp::ConditionParams params) {
        const auto v = sp::check_condition(model, id, params);
        conds << v.condition_id << ',' << (params.theta ? num(*params.theta) : "") << ','
              << (params.p ? num(*params.p) : "") << ',' << (v.holds ? "true" : "false") << ",\""
              << v.detail << "\"\n";
    };
    for (double th : thetas) {
        add(sp::ConditionId::UI, {th, {}, {}});
        add(sp::ConditionId::H2, {th, {}, {}});
        add(sp::ConditionId::Lp, {th, p, {}});
        add(sp::ConditionId::Tail, {th, p, {}});
    }
    add(sp::ConditionId::DerivMart, {});
    add(sp::ConditionId::H3, {});

    std::filesystem::create_directories(out_dir);
    write_file(out_dir + "/spectral_profile.csv", table.str());
    write_file(out_dir + "/conditions.csv", conds.str());

    std::cout << "theta_plus: " << num(dom.theta_plus)
              << (dom.endpoint_in_domain ? " (closed)" : " (open)") << " -- " << dom.description
              << '\n';
    std::cout << "theta_star: " << (profile.theta_star ? num(*profile.theta_star) : "none")
              << '\n';
    for (double th : thetas) {
        const auto ps = sp::find_p_star(model, th);
        std::cout << "p_star(theta=" << num(th) << "): " << (ps ? num(*ps) : "none") << '\n';
    }
    std::cout << "wrote " << out_dir << "/spectral_profile.csv and conditions.csv\n";
    return 0;
}

int cmd_simulate(const std::string& model_path, const std::vector<double>& times,
                 std::uint64_t replicas, std::uint64_t seed, unsigned threads,
                 std::uint64_t max_particles, const std::string& out_path) {
    const blev::BranchingModel model = blev::io::load_model_file(model_path);
    blev::SimConfig cfg;
    cfg.snapshot_times = times;
    cfg.max_particles = max_particles;
    validate(cfg);

    const auto rows = blev::mc::run_replicas_extract<std::string>(
        model, cfg, replicas, seed, threads,
        [&](std::uint64_t r, const blev::TreeRealization& tree) {
            std::string chunk;
            blev::append_snapshot_csv(chunk, r, tree);
            return chunk;
        });

    std::string csv = "replica,time,position\n";
    for (const auto& chunk : rows) csv += chunk;
    write_file(out_path, csv);
    std::cout << "wrote " << out_path << " (" << replicas << " replicas, seed " << seed << ")\n";
    return 0;
}

int cmd_verify(const std::string& model_path, const std::string& experiment_id,
               blev::mc::ExperimentParams params, std::uint64_t seed, unsigned threads,
               const std::string& out_dir, const std::string& format) {
    blev::mc::ExperimentSpec spec;
    spec.experiment_id = experiment_id;
    spec.model = blev::io::load_model_file(model_path);
    spec.params = std::move(params);
    spec.seed = seed;

    const auto report = blev::mc::run_experiment(spec, threads);
    print_report(report);

    std::filesystem::create_directories(out_dir);
    const std::string stem = out_dir + "/" + experiment_id + "_report";
    if (format == "json" || format == "both")
        write_file(stem + ".json", blev::mc::report_to_json(report));
    if (format == "csv" || format == "both")
        write_file(stem + ".csv", blev::mc::report_to_csv(report));
    return report.pass ? 0 : 1;
}

int cmd_report(const std::string& in_path, const std::string& format,
               const std::string& out_dir) {
    std::ifstream in(in_path);
    if (!in) throw blev::ConfigError("cannot open report: " + in_path);
    nlohmann::ordered_json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw blev::ConfigError("report parse error: " + std::string(e.what()));
    }
    blev::mc::ExperimentReport rep;
    rep.experiment_id = j.at("experiment_id").get<std::string>();
    rep.pass = j.at("verdict").get<std::string>() == "pass";
    for (const auto& [name, e] : j.at("estimates").items())
        rep.estimates.emplace_back(
            name, blev::mc::Estimate{e.at("value").get<double>(), e.at("stderr").get<double>()});
    for (const auto& [name, t] : j.at("tests").items()) {
        blev::mc::TestResult tr;
        tr.statistic = t.at("statistic").get<double>();
        if (t.contains("p_value")) tr.p_value = t.at("p_value").get<double>();
        tr.criterion = t.at("criterion").get<std::string>();
        tr.passed = t.at("passed").get<bool>();
        rep.tests.emplace_back(name, tr);
    }
    const auto& prov = j.at("provenance");
    rep.provenance.seed = prov.at("seed").get<std::uint64_t>();
    rep.provenance.config_digest = prov.at("config_digest").get<std::string>();
    rep.provenance.replicas = prov.at("replicas").get<std::uint64_t>();
    rep.provenance.wall_ms = prov.at("wall_ms").get<double>();

    print_report(rep);
    if (format == "csv" || format == "both") {
        std::filesystem::create_directories(out_dir);
        const std::string path = out_dir + "/" + rep.experiment_id + "_report.csv";
        write_file(path, blev::mc::report_to_csv(rep));
        std::cout << "wrote " << path << '\n';
    }
    return rep.pass ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"branching Levy process laboratory"};
    app.require_subcommand(1);

    std::string model_path, out = ".", format = "both", experiment_id, in_path;
    std::vector<double> thetas, times;
    std::uint64_t seed = kDefaultSeed, replicas = 0, max_particles = 1'000'000;
    unsigned threads = 0;
    double p = 1.5;
    bool echo_model = false;
    blev::mc::ExperimentParams params;
    double theta_flag = 0.0, t_flag = 0.0, T_flag = 0.0, theta0_flag = 0.0;

    auto* analyze = app.add_subcommand("analyze", "spectral functions and condition table");
    analyze->add_option("--model", model_path, "model JSON file")->required();
    analyze->add_option("--theta", thetas, "theta grid (repeatable or comma list)")->delimiter(',');
    analyze->add_option("--p", p, "exponent for Lp/Tail verdict rows");
    analyze->add_option("--out", out, "output directory");
    analyze->add_flag("--echo-model", echo_model, "print canonical model JSON and exit");

    auto* simulate = app.add_subcommand("simulate", "dump snapshots to CSV");
    simulate->add_option("--model", model_path, "model JSON file")->required();
    simulate->add_option("--t", times, "snapshot times")->required()->delimiter(',');
    simulate->add_option("--replicas", replicas, "replica count (default 1)");
    auto* sim_seed = simulate->add_option("--seed", seed, "master seed");
    simulate->add_option("--threads", threads, "worker cap (default: hardware)");
    simulate->add_option("--max-particles", max_particles, "live particle cap");
    simulate->add_option("--out", out, "output CSV path (default snapshots.csv)");

    auto* verify = app.add_subcommand("verify", "run a statistical experiment");
    verify->add_option("--model", model_path, "model JSON file")->required();
    verify
        ->add_option("--experiment", experiment_id,
                     "one of: mean_one growth variance normal_clt critical_clt stable_clt "
                     "tail_index boundary_rate max_centering rightmost_decay")
        ->required();
    auto* v_theta = verify->add_option("--theta", theta_flag, "tilt parameter");
    verify->add_option("--thetas", params.thetas, "theta list (mean_one)")->delimiter(',');
    auto* v_theta0 = verify->add_option("--theta0", theta0_flag, "rightmost_decay parameter");
    auto* v_p = verify->add_option("--p", p, "tail exponent");
    auto* v_t = verify->add_option("--t", t_flag, "observation time");
    verify->add_option("--t-list", params.t_list, "time list")->delimiter(',');
    auto* v_T = verify->add_option("--T", T_flag, "limit-proxy time");
    verify->add_option("--replicas", replicas, "replica count");
    auto* ver_seed = verify->add_option("--seed", seed, "master seed");
    verify->add_option("--threads", threads, "worker cap (default: hardware)");
    verify->add_option("--format", format, "json | csv | both")
        ->check(CLI::IsMember({"json", "csv", "both"}));
    verify->add_option("--b-mode", params.b_mode, "stable_clt: unit | critical | derivative");
    verify->add_option("--max-particles", params.max_particles, "live particle cap");
    verify->add_option("--out", out, "report directory");

    auto* report = app.add_subcommand("report", "re-render an existing report JSON");
    report->add_option("--in", in_path, "report JSON path")->required();
    report->add_option("--format", format, "text | csv | both")
        ->check(CLI::IsMember({"text", "csv", "both"}));
    report->add_option("--out", out, "output directory for CSV");

    CLI11_PARSE(app, argc, argv);

    try {
        if (analyze->parsed()) return cmd_analyze(model_path, thetas, p, out, echo_model);
        if (simulate->parsed()) {
            const std::string path = out == "." ? "snapshots.csv" : out;
            return cmd_simulate(model_path, times, replicas == 0 ? 1 : replicas,
                                resolve_seed(sim_seed, seed), threads, max_particles, path);
        }
        if (verify->parsed()) {
            if (v_theta->count()) params.theta = theta_flag;
            if (v_theta0->count()) params.theta0 = theta0_flag;
            if (v_p->count()) params.p = p;
            if (v_t->count()) params.t = t_flag;
            if (v_T->count()) params.T = T_flag;
            params.replicas = replicas;
            return cmd_verify(model_path, experiment_id, std::move(params),
                              resolve_seed(ver_seed, seed), threads, out, format);
        }
        return cmd_report(in_path, format, out);
    } catch (const blev::ExplosionError& e) {
        std::cerr << "explosion: " << e.what() << '\n';
        return 3;
    } catch (const blev::InsufficientSamples& e) {
        std::cerr << "insufficient samples: " << e.what() << '\n';
        return 2;
    } catch (const blev::ConditionError& e) {
        std::cerr << "precondition: " << e.what() << '\n';
        return 2;
    } catch (const blev::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
}
