// Command-line harness for the experiment suite. Each subcommand writes CSV
// output plus a JSON summary of its qualitative checks into --out.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "mlsa/experiments.hpp"
#include "mlsa/verification.hpp"

namespace {

nlohmann::json load_config(const std::string& path) {
    if (path.empty()) return nlohmann::json::object();
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open config file: " + path);
    nlohmann::json j;
    is >> j;
    return j;
}

void write_summary(const std::filesystem::path& out_dir, const mlsa::ExperimentReport& report) {
    std::filesystem::create_directories(out_dir);
    std::ofstream os(out_dir / (report.experiment + "_summary.json"));
    os << report.to_json().dump(2) << "\n";
    for (const auto& c : report.checks)
        std::cout << (c.pass ? "PASS" : "FAIL") << "  " << c.name
                  << (c.detail.empty() ? "" : "  (" + c.detail + ")") << "\n";
    std::cout << (report.all_pass() ? "all checks passed" : "SOME CHECKS FAILED") << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"numerical laboratory for in-context learning of Markov chains with linear "
                 "self-attention"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir = "out";
    std::uint64_t seed = 0;
    bool seed_set = false;
    int threads = 1;
    long long mc_samples = 0;
    app.add_option("--config", config_path, "JSON config file");
    app.add_option("--out", out_dir, "output directory")->capture_default_str();
    auto* seed_opt = app.add_option("--seed", seed, "master seed override");
    app.add_option("--threads", threads, "worker threads")->capture_default_str();
    app.add_option("--mc-samples", mc_samples, "Monte Carlo sample override");

    auto* gap = app.add_subcommand("gap", "oracle-vs-LSA accuracy gap across dimensions");
    auto* layers = app.add_subcommand("layers", "accuracy vs depth across state-space sizes");
    auto* moo = app.add_subcommand("moo", "multi-objective trajectory of a trained deep model");
    auto* landscape = app.add_subcommand("landscape", "Monte Carlo loss slices through X*");
    auto* variants = app.add_subcommand("variants", "sparse vs dense parameterization training");
    auto* reduce = app.add_subcommand("reduce", "worked separability-reduction demo");
    auto* verify = app.add_subcommand("verify", "run the verification property suites");
    for (auto* sub : {gap, layers, moo, landscape, variants, reduce, verify}) sub->fallthrough();

    CLI11_PARSE(app, argc, argv);
    seed_set = seed_opt->count() > 0;

    try {
        nlohmann::json cfg_json = load_config(config_path);
        mlsa::ExperimentReport report;
        if (gap->parsed()) {
            auto cfg = mlsa::GapConfig::from_json(cfg_json);
            if (seed_set) cfg.master_seed = seed;
            cfg.threads = threads;
            mlsa::run_gap(cfg, out_dir, &report);
        } else if (layers->parsed()) {
            auto cfg = mlsa::LayersConfig::from_json(cfg_json);
            if (seed_set) cfg.master_seed = seed;
            cfg.threads = threads;
            mlsa::run_layers(cfg, out_dir, &report);
        } else if (moo->parsed()) {
            auto cfg = mlsa::MooConfig::from_json(cfg_json);
            if (seed_set) cfg.master_seed = seed;
            cfg.threads = threads;
            if (mc_samples > 0) cfg.front_samples = static_cast<int>(mc_samples);
            mlsa::run_moo(cfg, out_dir, &report);
        } else if (landscape->parsed()) {
            auto cfg = mlsa::LandscapeConfig::from_json(cfg_json);
            if (seed_set) cfg.master_seed = seed;
            cfg.threads = threads;
            if (mc_samples > 0) cfg.mc_prompts = static_cast<int>(mc_samples);
            mlsa::run_landscape(cfg, out_dir, &report);
        } else if (variants->parsed()) {
            auto cfg = mlsa::VariantsConfig::from_json(cfg_json);
            if (seed_set) cfg.master_seed = seed;
            mlsa::run_variants(cfg, out_dir, &report);
        } else if (reduce->parsed()) {
            auto cfg = mlsa::ReductionDemoConfig::from_json(cfg_json);
            if (seed_set) cfg.master_seed = seed;
            mlsa::run_reduction_demo(cfg, out_dir, &report);
        } else if (verify->parsed()) {
            auto cfg = mlsa::VerificationConfig::from_json(cfg_json);
            if (seed_set) cfg.master_seed = seed;
            cfg.threads = threads;
            if (mc_samples > 0) cfg.mc_scale = mc_samples;
            cfg.scratch_dir = std::filesystem::path(out_dir) / "verify";
            report = mlsa::run_verification(cfg);
        }
        write_summary(out_dir, report);
        return report.all_pass() ? 0 : 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
