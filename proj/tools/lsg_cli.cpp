// Command-line front end: single experiments, hyperparameter sweeps, the
// engine-vs-reference fuzz check, and KL trace export.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>

#include <CLI11.hpp>

#include "lsg/lsg.hpp"
#include "lsg/testing/oracle_check.hpp"

namespace {

int cmd_run(const std::string& config_path) {
    const lsg::ExperimentConfig cfg = lsg::load_config(config_path);
    const lsg::ExperimentReport report = lsg::run_experiment(cfg);
    std::cout << lsg::summary_header() << "\n"
              << lsg::summary_row(report.config, report.agg) << "\n";
    for (const auto& s : report.samples)
        if (!s.ok) std::cerr << "sample " << s.id << " failed: " << s.error << "\n";
    if (!cfg.report_path.empty())
        std::cerr << "report written to " << cfg.report_path << ".{samples.jsonl,summary.tsv}\n";
    return report.agg.failed == 0 ? 0 : 1;
}

int cmd_sweep(const std::string& config_path, const std::string& grid_path) {
    const lsg::KvMap base = lsg::parse_kv_file(config_path);
    const auto grid = lsg::parse_grid(grid_path);
    const auto rows = lsg::sweep(base, grid);
    const std::string table = lsg::sweep_table_tsv(rows);
    std::cout << table;
    if (auto it = base.find("report"); it != base.end()) {
        const std::string path = it->second + ".sweep.tsv";
        const auto parent = std::filesystem::path(path).parent_path();
        if (!parent.empty()) std::filesystem::create_directories(parent);
        std::ofstream out(path);
        out << table;
        std::cerr << "sweep table written to " << path << "\n";
    }
    for (const auto& row : rows)
        if (row.agg.failed > 0) return 1;
    return 0;
}

int cmd_oracle_check(std::uint64_t seed, int cases) {
    int mismatches = 0;
    for (int c = 0; c < cases; ++c) {
        const auto fuzz = lsg::testing::make_fuzz_case(seed + static_cast<std::uint64_t>(c));
        if (auto why = lsg::testing::oracle_mismatch(fuzz)) {
            ++mismatches;
            std::cerr << "case " << c << " (seed " << seed + c << "): " << *why << "\n";
        }
    }
    std::cout << "oracle-check: " << cases << " cases, " << mismatches << " mismatches\n";
    return mismatches == 0 ? 0 : 1;
}

int cmd_trace(const std::string& config_path, const std::string& sample_id,
              const std::string& out_path) {
    const lsg::ExperimentConfig cfg = lsg::load_config(config_path);
    const auto corpus = lsg::load_corpus(cfg.corpus_path);
    const lsg::Sample* sample = nullptr;
    for (const auto& s : corpus)
        if (s.id == sample_id) sample = &s;
    if (!sample) {
        std::cerr << "sample " << sample_id << " not found in " << cfg.corpus_path << "\n";
        return 2;
    }

    std::shared_ptr<lsg::TableProvider> table;
    std::unique_ptr<lsg::GeneratorContract> owned;
    lsg::GeneratorContract* provider = nullptr;
    switch (cfg.provider) {
        case lsg::ProviderKind::Table:
            table = lsg::table_provider_from_json(cfg.table_file);
            provider = table.get();
            break;
        case lsg::ProviderKind::Lag:
            owned = std::make_unique<lsg::LagLanguageProvider>(
                lsg::make_lag_spec(sample->source.elements(), cfg.lag_pi, cfg.lag_eta));
            provider = owned.get();
            break;
        case lsg::ProviderKind::External: {
            std::ifstream in(cfg.vocab_file);
            if (!in) throw lsg::ParseError("cannot open vocab file: " + cfg.vocab_file);
            std::vector<std::string> tokens;
            std::string tok;
            while (std::getline(in, tok))
                if (!tok.empty()) tokens.push_back(tok);
            owned = std::make_unique<lsg::ExternalProvider>(
                lsg::Vocabulary::with_eos(std::move(tokens)), cfg.external);
            provider = owned.get();
            break;
        }
    }

    lsg::DecodeResult result;
    switch (cfg.policy) {
        case lsg::PolicyKind::Lsg:
            result = lsg::decode_stream(*provider, sample->source, cfg.hp, cfg.limits, cfg.engine);
            break;
        case lsg::PolicyKind::WaitK:
            result = lsg::decode_wait_k(*provider, sample->source, cfg.hp.k, cfg.limits,
                                        cfg.engine);
            break;
        case lsg::PolicyKind::Offline:
            result = lsg::decode_wait_k(*provider, sample->source, sample->source.length(),
                                        cfg.limits, cfg.engine);
            result.trace.steps.clear();
            break;
    }

    const std::string tsv = lsg::kl_trace_tsv(lsg::export_kl_trace(result));
    if (out_path.empty()) {
        std::cout << tsv;
    } else {
        std::ofstream out(out_path);
        if (!out) throw lsg::Error("cannot write " + out_path);
        out << tsv;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"streaming simultaneous-generation experiments"};
    app.require_subcommand(1);

    std::string config_path, grid_path, sample_id, out_path;
    std::uint64_t seed = 1;
    int cases = 1000;

    auto* run = app.add_subcommand("run", "run a single experiment");
    run->add_option("--config", config_path, "experiment config file")->required();

    auto* sw = app.add_subcommand("sweep", "run a hyperparameter sweep");
    sw->add_option("--config", config_path, "base experiment config file")->required();
    sw->add_option("--grid", grid_path, "grid file, one key=value row per line")->required();

    auto* oc = app.add_subcommand("oracle-check", "fuzz the engine against the reference decoder");
    oc->add_option("--seed", seed, "base seed");
    oc->add_option("--cases", cases, "number of cases");

    auto* tr = app.add_subcommand("trace", "export the KL trace for one sample");
    tr->add_option("--config", config_path, "experiment config file")->required();
    tr->add_option("--sample", sample_id, "sample id")->required();
    tr->add_option("--out", out_path, "output file (default stdout)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return cmd_run(config_path);
        if (sw->parsed()) return cmd_sweep(config_path, grid_path);
        if (oc->parsed()) return cmd_oracle_check(seed, cases);
        if (tr->parsed()) return cmd_trace(config_path, sample_id, out_path);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
