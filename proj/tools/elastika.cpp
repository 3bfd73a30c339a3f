// elastika command line front end.

#include "elastika/pipeline.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <map>
#include <string>

namespace {

using elastika::PipelineConfig;
namespace fs = std::filesystem;

/// Flag values given on the command line, keyed by config key.
using Overrides = std::map<std::string, std::string>;

void flag(CLI::App* app, Overrides& ov, const std::string& name, const std::string& key, const std::string& help) {
    app->add_option_function<std::string>(name, [&ov, key](const std::string& v) { ov[key] = v; }, help);
}

void align_flags(CLI::App* app, Overrides& ov) {
    flag(app, ov, "--lambda", "lambda", "elasticity penalty weight");
    flag(app, ov, "--bins", "bins", "alignment lattice bins per axis");
    flag(app, ov, "--slope-window", "slope_window", "largest step component on the lattice");
    flag(app, ov, "--penalty-form", "penalty_form", "squared_second_diff or literal_second_diff");
    flag(app, ov, "--max-iters", "max_iters", "Karcher mean iteration cap");
    flag(app, ov, "--tol", "tol", "relative objective tolerance");
}

fs::path file_or_dir(const std::string& out, const char* default_name) {
    const fs::path p(out);
    return p.has_extension() ? p : p / default_name;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"elastika: elastic shape analysis of multichannel curves"};
    app.require_subcommand(1);
    app.fallthrough();

    Overrides ov;
    std::string config_path;
    app.add_option("--config", config_path, "key=value configuration file")->check(CLI::ExistingFile);
    flag(&app, ov, "--seed", "seed", "random seed");
    flag(&app, ov, "--threads", "threads", "worker threads");
    flag(&app, ov, "--out", "out_dir", "output file or directory");

    auto* synth = app.add_subcommand("synth", "generate a synthetic GRF corpus with ground truth and traits");
    flag(synth, ov, "--subjects", "synth_subjects", "number of subjects");
    flag(synth, ov, "--trials", "synth_trials", "trials per subject");
    flag(synth, ov, "--template", "synth_template", "two_peak, unimodal or mixed");
    flag(synth, ov, "--grid", "grid_length", "grid length");
    flag(synth, ov, "--warp-strength", "warp_strength", "sup norm of the random warp perturbation");
    flag(synth, ov, "--amplitude-sd", "amplitude_sd", "sd of amplitude factors");
    flag(synth, ov, "--noise-sd", "noise_sd", "sd of smooth noise");
    flag(synth, ov, "--atypical-fraction", "atypical_fraction", "share of unimodal subjects (mixed template)");

    std::string dump_srvf;
    auto* pre = app.add_subcommand("preprocess", "trim, normalize and resample raw trials");
    flag(pre, ov, "--input", "input", "raw trial file");
    flag(pre, ov, "--format", "input_format", "csv or jsonl");
    flag(pre, ov, "--grid", "grid_length", "grid length");
    flag(pre, ov, "--zero-tol", "zero_tol", "zero threshold for trimming");
    flag(pre, ov, "--reference-channel", "reference_channel", "channel used to find stance onset and offset");
    pre->add_option("--dump-srvf", dump_srvf, "also write SRVFs in the long CSV format");

    auto* align = app.add_subcommand("align", "elastic Karcher mean alignment");
    flag(align, ov, "--input", "input", "preprocessed dataset");
    align_flags(align, ov);

    auto* sweep = app.add_subcommand("sweep", "alignment diagnostics over a lambda grid");
    flag(sweep, ov, "--input", "input", "preprocessed dataset");
    flag(sweep, ov, "--lambdas", "sweep_lambdas", "comma separated lambda values");
    align_flags(sweep, ov);

    std::string aligned_dir;
    auto* modes = app.add_subcommand("modes", "amplitude PCA and phase PNS modes");
    modes->add_option("--aligned", aligned_dir, "directory written by align")->required();
    flag(modes, ov, "--k", "k_modes", "modes per block");
    flag(modes, ov, "--pns-restarts", "pns_restarts", "random restarts per nested-sphere axis fit");

    auto* lm = app.add_subcommand("landmarks", "discrete landmark extraction");
    flag(lm, ov, "--input", "input", "preprocessed dataset");
    flag(lm, ov, "--convention", "landmark_convention", "windowed or full_range");

    std::string scores_path, landmarks_path;
    auto* cmp = app.add_subcommand("compare", "full-curve vs landmark regression comparison");
    cmp->add_option("--scores", scores_path, "mode score CSV")->required()->check(CLI::ExistingFile);
    cmp->add_option("--landmarks", landmarks_path, "landmark CSV")->required()->check(CLI::ExistingFile);
    flag(cmp, ov, "--traits", "traits", "trait CSV");
    flag(cmp, ov, "--dependent", "dependents", "trait name, comma list, or all");
    flag(cmp, ov, "--n-boot", "n_boot", "bootstrap replicates");
    flag(cmp, ov, "--bootstrap-null", "bootstrap_null", "imposed or percentile");
    flag(cmp, ov, "--impute", "impute", "traits to mean-impute (comma list, all, none)");
    flag(cmp, ov, "--convention", "landmark_convention", "landmark convention recorded in the reports");

    bool resume = false;
    auto* pipe = app.add_subcommand("pipeline", "run every stage and write a manifest");
    pipe->add_flag("--resume", resume, "reuse stages whose recorded inputs and outputs are unchanged");
    flag(pipe, ov, "--input", "input", "raw trial file (default: synthesized)");
    flag(pipe, ov, "--format", "input_format", "csv or jsonl");
    flag(pipe, ov, "--traits", "traits", "trait CSV (default: synthesized)");
    flag(pipe, ov, "--lambda", "lambda", "elasticity penalty weight");
    flag(pipe, ov, "--k", "k_modes", "modes per block");
    flag(pipe, ov, "--n-boot", "n_boot", "bootstrap replicates");
    flag(pipe, ov, "--subjects", "synth_subjects", "synthetic subjects");

    CLI11_PARSE(app, argc, argv);

    PipelineConfig cfg;
    try {
        if (!config_path.empty()) cfg = elastika::load_config(config_path);
        for (const auto& [key, value] : ov) elastika::set_config_value(cfg, key, value);
        cfg.validate();
    } catch (const elastika::Error& e) {
        std::cerr << "elastika: invalid configuration: " << e.what() << "\n";
        return 2;
    }

    auto need_input = [&](const char* what) {
        if (cfg.input.empty()) throw elastika::ConfigError(std::string("--input is required for ") + what);
        return fs::path(cfg.input);
    };

    std::string stage = app.get_subcommands().front()->get_name();
    try {
        if (*synth) {
            elastika::stages::synth(cfg, cfg.out_dir);
        } else if (*pre) {
            elastika::stages::preprocess(cfg, need_input("preprocess"), elastika::parse_file_format(cfg.input_format),
                                         file_or_dir(cfg.out_dir, "dataset.csv"), dump_srvf);
        } else if (*align) {
            elastika::stages::align(cfg, need_input("align"), cfg.out_dir);
        } else if (*sweep) {
            elastika::stages::sweep(cfg, need_input("sweep"), file_or_dir(cfg.out_dir, "sweep.csv"));
        } else if (*modes) {
            elastika::stages::modes(cfg, aligned_dir, cfg.out_dir);
        } else if (*lm) {
            elastika::stages::landmarks(cfg, need_input("landmarks"), file_or_dir(cfg.out_dir, "landmarks.csv"));
        } else if (*cmp) {
            if (cfg.traits.empty()) throw elastika::ConfigError("--traits is required for compare");
            elastika::stages::compare(cfg, scores_path, landmarks_path, cfg.traits, cfg.out_dir);
        } else if (*pipe) {
            const auto outcome = elastika::run_pipeline(cfg, resume, std::cerr);
            for (const auto& s : outcome.stages) std::cout << s.name << ": " << s.action << "\n";
            return outcome.status;
        }
    } catch (const elastika::ConfigError& e) {
        std::cerr << "elastika " << stage << ": " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "elastika " << stage << ": " << e.what() << "\n";
        return 1;
    }
    return 0;
}
