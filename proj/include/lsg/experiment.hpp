#pragma once

// Experiment orchestration: flat key=value configs, provider construction,
// per-sample decoding with metrics, deterministic report files, hyperparameter
// sweeps, and KL-trace export for policy diagnostics.

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "lsg/core.hpp"
#include "lsg/corpus.hpp"
#include "lsg/engine.hpp"
#include "lsg/errors.hpp"
#include "lsg/external_provider.hpp"
#include "lsg/metrics.hpp"
#include "lsg/providers.hpp"

namespace lsg {

enum class PolicyKind { Lsg, WaitK, Offline };
enum class ProviderKind { Table, Lag, External };

inline const char* to_string(PolicyKind p) {
    switch (p) {
        case PolicyKind::Lsg:     return "lsg";
        case PolicyKind::WaitK:   return "waitk";
        case PolicyKind::Offline: return "offline";
    }
    return "?";
}

inline const char* to_string(ProviderKind p) {
    switch (p) {
        case ProviderKind::Table:    return "table";
        case ProviderKind::Lag:      return "lag";
        case ProviderKind::External: return "external";
    }
    return "?";
}

struct ClockConfig {
    bool enabled = false;
    bool use_measured = false;   // replay measured call durations instead of a constant
    double compute_ms = 0.0;     // injected per-consultation duration
    double text_arrival_ms = 0.0;
};

struct ExperimentConfig {
    PolicyKind policy = PolicyKind::Lsg;
    ProviderKind provider = ProviderKind::Lag;
    std::string corpus_path;
    std::string report_path;  // prefix for .samples.jsonl / .summary.tsv / .runtime.txt
    std::optional<std::string> preset_name;
    HyperParams hp;
    DecodeLimits limits;
    EngineOptions engine;
    ClockConfig clock;
    int workers = 1;
    // lag provider
    double lag_eta = 0.0;
    std::string lag_pi = "identity";
    // table provider
    std::string table_file;
    // external provider
    ExternalProviderConfig external;
    std::string vocab_file;
};

// ---------------------------------------------------------------------------
// Config parsing

using KvMap = std::map<std::string, std::string>;

/// Flat "key = value" lines; '#' starts a comment.
inline KvMap parse_kv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open config file: " + path);
    KvMap kv;
    std::string line;
    int line_no = 0;
    auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t\r");
        const auto e = s.find_last_not_of(" \t\r");
        return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ParseError(path + ":" + std::to_string(line_no) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        if (key.empty() || val.empty())
            throw ParseError(path + ":" + std::to_string(line_no) + ": empty key or value");
        kv[key] = val;
    }
    return kv;
}

namespace detail {

inline int to_int(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const int n = std::stoi(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return n;
    } catch (const std::exception&) {
        throw ParseError("config key " + key + " wants an integer, got " + v);
    }
}

inline double to_double(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const double d = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ParseError("config key " + key + " wants a number, got " + v);
    }
}

inline bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "on" || v == "1") return true;
    if (v == "false" || v == "off" || v == "0") return false;
    throw ParseError("config key " + key + " wants a boolean, got " + v);
}

}  // namespace detail

inline ExperimentConfig build_config(const KvMap& kv) {
    ExperimentConfig cfg;
    std::map<std::string, bool> seen;
    auto get = [&](const std::string& key) -> std::optional<std::string> {
        auto it = kv.find(key);
        if (it == kv.end()) return std::nullopt;
        seen[key] = true;
        return it->second;
    };
    auto require = [&](const std::string& key) {
        auto v = get(key);
        if (!v) throw ParseError("config is missing required key: " + key);
        return *v;
    };

    const std::string policy = require("policy");
    if (policy == "lsg") cfg.policy = PolicyKind::Lsg;
    else if (policy == "waitk") cfg.policy = PolicyKind::WaitK;
    else if (policy == "offline") cfg.policy = PolicyKind::Offline;
    else throw ParseError("policy must be lsg | waitk | offline, got " + policy);

    const std::string provider = require("provider");
    if (provider == "table") cfg.provider = ProviderKind::Table;
    else if (provider == "lag") cfg.provider = ProviderKind::Lag;
    else if (provider == "external") cfg.provider = ProviderKind::External;
    else throw ParseError("provider must be table | lag | external, got " + provider);

    cfg.corpus_path = require("corpus");
    if (auto v = get("report")) cfg.report_path = *v;

    bool have_delta = false, have_alpha = false, have_L = false, have_U = false, have_k = false;
    if (auto v = get("preset")) {
        cfg.preset_name = *v;
        const HyperParams p = preset(*v);
        cfg.hp.delta = p.delta;
        cfg.hp.alpha = p.alpha;
        cfg.hp.segment_ms = p.segment_ms;
        have_delta = have_alpha = true;
    }
    if (auto v = get("delta")) { cfg.hp.delta = detail::to_double("delta", *v); have_delta = true; }
    if (auto v = get("alpha")) { cfg.hp.alpha = detail::to_double("alpha", *v); have_alpha = true; }
    if (auto v = get("L")) { cfg.hp.L = detail::to_int("L", *v); have_L = true; }
    if (auto v = get("U")) { cfg.hp.U = detail::to_int("U", *v); have_U = true; }
    if (auto v = get("k")) { cfg.hp.k = detail::to_int("k", *v); have_k = true; }
    if (auto v = get("segment_ms")) cfg.hp.segment_ms = detail::to_int("segment_ms", *v);

    if (cfg.policy == PolicyKind::Lsg && !(have_delta && have_alpha && have_L && have_U))
        throw ParseError("policy lsg requires delta, alpha, L, U (preset covers delta/alpha)");
    if (cfg.policy == PolicyKind::WaitK && !have_k)
        throw ParseError("policy waitk requires k");

    if (auto v = get("max_target_len")) cfg.limits.max_target_len = detail::to_int("max_target_len", *v);
    if (auto v = get("max_source_len")) cfg.limits.max_source_len = detail::to_int("max_source_len", *v);
    if (cfg.limits.max_target_len < 1 || cfg.limits.max_source_len < 1)
        throw ParseError("decode limits must be >= 1");
    if (auto v = get("mask_eos")) cfg.engine.mask_eos = detail::to_bool("mask_eos", *v);
    if (auto v = get("retain_diagnostics"))
        cfg.engine.retain_diagnostics = detail::to_bool("retain_diagnostics", *v);
    if (auto v = get("workers")) cfg.workers = detail::to_int("workers", *v);
    if (cfg.workers < 1) throw ParseError("workers must be >= 1");

    if (auto v = get("clock")) cfg.clock.enabled = detail::to_bool("clock", *v);
    if (auto v = get("compute_ms")) {
        if (*v == "measured") cfg.clock.use_measured = true;
        else cfg.clock.compute_ms = detail::to_double("compute_ms", *v);
    }
    if (auto v = get("text_arrival_ms"))
        cfg.clock.text_arrival_ms = detail::to_double("text_arrival_ms", *v);
    if (cfg.clock.enabled && !cfg.engine.retain_diagnostics)
        throw ParseError("clock simulation needs retain_diagnostics = true");

    if (auto v = get("lag_eta")) cfg.lag_eta = detail::to_double("lag_eta", *v);
    if (auto v = get("lag_pi")) cfg.lag_pi = *v;
    if (auto v = get("table_file")) cfg.table_file = *v;
    if (cfg.provider == ProviderKind::Table && cfg.table_file.empty())
        throw ParseError("provider table requires table_file");

    if (auto v = get("endpoint")) cfg.external.endpoint = *v;
    if (auto v = get("timeout_ms")) cfg.external.timeout_ms = detail::to_int("timeout_ms", *v);
    if (auto v = get("top_k")) cfg.external.top_k = detail::to_int("top_k", *v);
    if (auto v = get("rest_mass")) cfg.external.rest_mass = rest_mass_policy_from_string(*v);
    if (auto v = get("vocab_file")) cfg.vocab_file = *v;
    if (cfg.provider == ProviderKind::External) {
        if (cfg.external.endpoint.empty()) throw ParseError("provider external requires endpoint");
        if (cfg.vocab_file.empty()) throw ParseError("provider external requires vocab_file");
    }

    for (const auto& [key, value] : kv)
        if (!seen.count(key)) throw ParseError("unknown config key: " + key);

    cfg.hp.validate();
    return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
    return build_config(parse_kv_file(path));
}

/// Grid file: one grid point per line, space-separated key=value overrides.
inline std::vector<KvMap> parse_grid(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open grid file: " + path);
    std::vector<KvMap> grid;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream row(line);
        KvMap overrides;
        std::string item;
        while (row >> item) {
            const auto eq = item.find('=');
            if (eq == std::string::npos || eq == 0 || eq + 1 == item.size())
                throw ParseError(path + ":" + std::to_string(line_no) +
                                 ": expected key=value, got " + item);
            overrides[item.substr(0, eq)] = item.substr(eq + 1);
        }
        if (!overrides.empty()) grid.push_back(std::move(overrides));
    }
    return grid;
}

// ---------------------------------------------------------------------------
// Reports

struct TriggerCounts {
    int kl = 0;
    int confidence = 0;
    int forced_upper_bound = 0;
    int source_exhausted = 0;
};

struct SampleOutcome {
    std::string id;
    bool ok = false;
    std::string error;
    std::vector<std::string> tokens;
    std::vector<int> g;
    TriggerCounts triggers;
    int consultations = 0;
    MetricReport metrics;
    int edit_dist = 0;      // corpus WER is micro-averaged from these
    int reference_len = 0;
};

struct Aggregates {
    int samples = 0;
    int failed = 0;
    std::optional<double> mean_al;
    std::optional<double> mean_al_ca;
    std::optional<double> corpus_bleu;
    std::optional<double> corpus_wer;
    std::optional<double> mean_sufficiency;
};

struct ExperimentReport {
    ExperimentConfig config;
    std::vector<SampleOutcome> samples;  // sorted by id
    Aggregates agg;
    double wall_ms = 0.0;  // segregated into the runtime file, never the report
};

namespace detail {

inline std::string fmt_g(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

inline std::string fmt_opt(const std::optional<double>& v) {
    return v ? fmt_g(*v) : std::string("-");
}

inline std::unique_ptr<GeneratorContract> make_lag_provider(const ExperimentConfig& cfg,
                                                            const Sample& sample) {
    LagLanguageSpec spec =
        make_lag_spec(sample.source.elements(), cfg.lag_pi, cfg.lag_eta);
    return std::make_unique<LagLanguageProvider>(std::move(spec));
}

}  // namespace detail

/// Loads {"tokens": [...], "eos": "</s>"?, "entries": [{"j", "prefix", "weights"}]}.
inline std::shared_ptr<TableProvider> table_provider_from_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open table file: " + path);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const std::exception& e) {
        throw ParseError(path + ": invalid JSON: " + e.what());
    }
    try {
        auto tokens = doc.at("tokens").get<std::vector<std::string>>();
        Vocabulary vocab = Vocabulary::with_eos(std::move(tokens), doc.value("eos", "</s>"));
        auto provider = std::make_shared<TableProvider>(vocab);
        for (const auto& e : doc.at("entries")) {
            std::vector<TokenId> prefix;
            for (const auto& t : e.at("prefix").get<std::vector<std::string>>()) {
                auto id = vocab.find(t);
                if (!id) throw ParseError("prefix token not in vocabulary: " + t);
                prefix.push_back(*id);
            }
            provider->add_entry(e.at("j").get<int>(), std::move(prefix),
                                e.at("weights").get<std::vector<double>>());
        }
        return provider;
    } catch (const Error&) {
        throw;
    } catch (const std::exception& e) {
        throw ParseError(path + ": bad table spec: " + e.what());
    }
}

/// One sample end to end: decode with the configured policy, compute every
/// applicable metric. Throws on provider failure; the caller records markers.
inline SampleOutcome decode_sample(const ExperimentConfig& cfg, const Sample& sample,
                                   GeneratorContract& provider) {
    SampleOutcome out;
    out.id = sample.id;
    const int J = sample.source.length();

    DecodeResult result;
    bool offline = false;
    switch (cfg.policy) {
        case PolicyKind::Lsg:
            result = decode_stream(provider, sample.source, cfg.hp, cfg.limits, cfg.engine);
            break;
        case PolicyKind::WaitK:
            result = decode_wait_k(provider, sample.source, cfg.hp.k, cfg.limits, cfg.engine);
            break;
        case PolicyKind::Offline:
            result = decode_wait_k(provider, sample.source, J, cfg.limits, cfg.engine);
            offline = true;
            break;
    }
    if (result.tokens.empty()) throw Error("empty hypothesis");

    const Vocabulary& vocab = provider.vocabulary();
    for (TokenId t : result.tokens) out.tokens.push_back(vocab.token(t));
    out.g = result.trace.g;

    const bool speech = sample.source.kind() == SourceKind::Speech;
    const int segment_ms = speech ? *sample.source.segment_ms() : 0;
    out.metrics.al = speech ? average_lagging_speech(out.g, segment_ms, J)
                            : average_lagging_text(out.g, J);
    if (speech && cfg.clock.enabled) {
        ClockModel clock;
        if (!cfg.clock.use_measured) clock.constant_compute_ms = cfg.clock.compute_ms;
        const auto timeline = simulate_clock(result, sample.source, clock);
        out.metrics.al_ca = computation_aware_al(timeline, out.g, J,
                                                 static_cast<double>(J) * segment_ms);
    }

    if (offline) result.trace.steps.clear();  // no streaming decisions to report
    out.consultations = static_cast<int>(result.trace.steps.size());
    for (const auto& st : result.trace.steps) {
        if (st.action != Action::Write) continue;
        switch (st.trigger) {
            case Trigger::Kl:               ++out.triggers.kl; break;
            case Trigger::Confidence:       ++out.triggers.confidence; break;
            case Trigger::ForcedUpperBound: ++out.triggers.forced_upper_bound; break;
            case Trigger::SourceExhausted:  ++out.triggers.source_exhausted; break;
            case Trigger::AwaitingInput:    break;
        }
    }
    out.metrics.bleu = corpus_bleu({sample.reference}, {out.tokens});
    out.metrics.wer = word_error_rate(sample.reference, out.tokens);
    out.edit_dist = edit_distance(sample.reference, out.tokens);
    out.reference_len = static_cast<int>(sample.reference.size());
    if (sample.alignment && sample.alignment->size() == out.g.size())
        out.metrics.sufficiency = sufficiency_rate(*sample.alignment, out.g);
    out.ok = true;
    return out;
}

/// Decodes every sample with the configured policy and aggregates metrics.
/// Failing samples get an error marker and are excluded from aggregates;
/// nothing is silently dropped. No files are written (see run_experiment).
inline ExperimentReport run_experiment_core(const ExperimentConfig& cfg) {
    detail::StepTimer timer;
    ExperimentReport report;
    report.config = cfg;

    const std::vector<Sample> corpus = load_corpus(cfg.corpus_path);
    std::shared_ptr<TableProvider> table;
    if (cfg.provider == ProviderKind::Table) table = table_provider_from_json(cfg.table_file);

    std::shared_ptr<Vocabulary> external_vocab;
    if (cfg.provider == ProviderKind::External) {
        std::ifstream in(cfg.vocab_file);
        if (!in) throw ParseError("cannot open vocab file: " + cfg.vocab_file);
        std::vector<std::string> tokens;
        std::string tok;
        while (std::getline(in, tok))
            if (!tok.empty()) tokens.push_back(tok);
        external_vocab = std::make_shared<Vocabulary>(Vocabulary::with_eos(std::move(tokens)));
    }

    std::vector<SampleOutcome> outcomes(corpus.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        std::unique_ptr<GeneratorContract> ext;  // one connection per worker
        for (;;) {
            const std::size_t idx = next.fetch_add(1);
            if (idx >= corpus.size()) break;
            const Sample& sample = corpus[idx];
            try {
                GeneratorContract* provider = nullptr;
                std::unique_ptr<GeneratorContract> local;
                switch (cfg.provider) {
                    case ProviderKind::Table:
                        provider = table.get();
                        break;
                    case ProviderKind::Lag:
                        local = detail::make_lag_provider(cfg, sample);
                        provider = local.get();
                        break;
                    case ProviderKind::External:
                        if (!ext) ext = std::make_unique<ExternalProvider>(*external_vocab,
                                                                           cfg.external);
                        provider = ext.get();
                        break;
                }
                outcomes[idx] = decode_sample(cfg, sample, *provider);
            } catch (const std::exception& e) {
                outcomes[idx].id = sample.id;
                outcomes[idx].ok = false;
                outcomes[idx].error = e.what();
            }
        }
    };

    const int n_workers = std::max(1, std::min<int>(cfg.workers,
                                                    static_cast<int>(corpus.size())));
    if (n_workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < n_workers; ++w) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    // aggregates over successful samples; BLEU/WER at corpus level
    std::vector<std::vector<std::string>> refs, hyps;
    double al_sum = 0.0, al_ca_sum = 0.0, suff_sum = 0.0;
    long long edits = 0, ref_len = 0;
    int n_ok = 0, n_al_ca = 0, n_suff = 0;
    for (std::size_t idx = 0; idx < corpus.size(); ++idx) {
        const SampleOutcome& out = outcomes[idx];
        if (!out.ok) {
            ++report.agg.failed;
            continue;
        }
        ++n_ok;
        al_sum += out.metrics.al;
        if (out.metrics.al_ca) { al_ca_sum += *out.metrics.al_ca; ++n_al_ca; }
        if (out.metrics.sufficiency) { suff_sum += *out.metrics.sufficiency; ++n_suff; }
        edits += out.edit_dist;
        ref_len += out.reference_len;
        refs.push_back(corpus[idx].reference);
        hyps.push_back(out.tokens);
    }
    report.agg.samples = static_cast<int>(corpus.size());
    if (n_ok > 0) {
        report.agg.mean_al = al_sum / n_ok;
        report.agg.corpus_bleu = corpus_bleu(refs, hyps);
        report.agg.corpus_wer = static_cast<double>(edits) / static_cast<double>(ref_len);
        if (n_al_ca > 0) report.agg.mean_al_ca = al_ca_sum / n_al_ca;
        if (n_suff > 0) report.agg.mean_sufficiency = suff_sum / n_suff;
    }

    report.samples = std::move(outcomes);
    std::sort(report.samples.begin(), report.samples.end(),
              [](const SampleOutcome& a, const SampleOutcome& b) { return a.id < b.id; });
    report.wall_ms = timer.elapsed_ms();
    return report;
}

inline nlohmann::json sample_outcome_json(const SampleOutcome& out) {
    nlohmann::json rec;
    rec["id"] = out.id;
    rec["ok"] = out.ok;
    if (!out.ok) {
        rec["error"] = out.error;
        return rec;
    }
    rec["g"] = out.g;
    rec["tokens"] = out.tokens;
    rec["consultations"] = out.consultations;
    rec["triggers"] = {{"kl", out.triggers.kl},
                       {"confidence", out.triggers.confidence},
                       {"forced_upper_bound", out.triggers.forced_upper_bound},
                       {"source_exhausted", out.triggers.source_exhausted}};
    rec["al"] = out.metrics.al;
    if (out.metrics.al_ca) rec["al_ca"] = *out.metrics.al_ca; else rec["al_ca"] = nullptr;
    rec["bleu"] = out.metrics.bleu;
    rec["wer"] = out.metrics.wer;
    if (out.metrics.sufficiency) rec["sufficiency"] = *out.metrics.sufficiency;
    else rec["sufficiency"] = nullptr;
    return rec;
}

inline std::string summary_header() {
    return "policy\tprovider\tpreset\tdelta\talpha\tL\tU\tk\tsamples\tfailed\tmean_al\t"
           "mean_al_ca\tcorpus_bleu\tcorpus_wer\tmean_sufficiency";
}

inline std::string summary_row(const ExperimentConfig& cfg, const Aggregates& agg) {
    std::ostringstream row;
    row << to_string(cfg.policy) << '\t' << to_string(cfg.provider) << '\t'
        << (cfg.preset_name ? *cfg.preset_name : "-") << '\t' << detail::fmt_g(cfg.hp.delta)
        << '\t' << detail::fmt_g(cfg.hp.alpha) << '\t' << cfg.hp.L << '\t' << cfg.hp.U << '\t'
        << cfg.hp.k << '\t' << agg.samples << '\t' << agg.failed << '\t'
        << detail::fmt_opt(agg.mean_al) << '\t' << detail::fmt_opt(agg.mean_al_ca) << '\t'
        << detail::fmt_opt(agg.corpus_bleu) << '\t' << detail::fmt_opt(agg.corpus_wer) << '\t'
        << detail::fmt_opt(agg.mean_sufficiency);
    return row.str();
}

/// Writes <prefix>.samples.jsonl, <prefix>.summary.tsv and, separately, the
/// wall-clock stats as <prefix>.runtime.txt. The first two are deterministic
/// for identical config + corpus + in-process provider.
inline void write_report_files(const ExperimentReport& report, const std::string& prefix) {
    const std::filesystem::path parent = std::filesystem::path(prefix).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);

    std::ofstream samples(prefix + ".samples.jsonl");
    if (!samples) throw Error("cannot write report file: " + prefix + ".samples.jsonl");
    for (const auto& out : report.samples) samples << sample_outcome_json(out).dump() << "\n";

    std::ofstream summary(prefix + ".summary.tsv");
    summary << summary_header() << "\n" << summary_row(report.config, report.agg) << "\n";

    std::ofstream runtime(prefix + ".runtime.txt");
    long long consultations = 0;
    for (const auto& out : report.samples) consultations += out.consultations;
    runtime << "wall_ms " << report.wall_ms << "\n"
            << "consultations " << consultations << "\n";
}

/// run_experiment_core plus report emission at the configured path.
inline ExperimentReport run_experiment(const ExperimentConfig& cfg) {
    ExperimentReport report = run_experiment_core(cfg);
    if (!cfg.report_path.empty()) write_report_files(report, cfg.report_path);
    return report;
}

// ---------------------------------------------------------------------------
// Sweeps

struct SweepRow {
    KvMap overrides;
    ExperimentConfig config;
    Aggregates agg;
};

/// One experiment per grid point (base config with that row's overrides).
inline std::vector<SweepRow> sweep(const KvMap& base, const std::vector<KvMap>& grid) {
    if (grid.empty()) throw EmptyGrid("sweep grid has no rows");
    std::vector<SweepRow> rows;
    rows.reserve(grid.size());
    for (const auto& overrides : grid) {
        KvMap merged = base;
        for (const auto& [key, value] : overrides) merged[key] = value;
        merged.erase("report");  // per-row sample files are not emitted
        SweepRow row;
        row.overrides = overrides;
        row.config = build_config(merged);
        row.agg = run_experiment_core(row.config).agg;
        rows.push_back(std::move(row));
    }
    return rows;
}

inline std::string sweep_table_tsv(const std::vector<SweepRow>& rows) {
    std::ostringstream out;
    out << summary_header() << "\n";
    for (const auto& row : rows) out << summary_row(row.config, row.agg) << "\n";
    return out.str();
}

// ---------------------------------------------------------------------------
// KL trace export

struct KlTraceRow {
    int i = 0;
    int j = 0;
    std::optional<double> kl;
    double max_prob = 0.0;
    Action action = Action::Read;
    Trigger trigger = Trigger::AwaitingInput;
};

/// One row per provider consultation, for plotting how the divergence against
/// the baseline evolves as the source grows.
inline std::vector<KlTraceRow> export_kl_trace(const DecodeResult& result) {
    if (!result.diagnostics_retained)
        throw MissingDiagnostics("decode was run without retain_diagnostics");
    std::vector<KlTraceRow> rows;
    rows.reserve(result.trace.steps.size());
    for (const auto& st : result.trace.steps)
        rows.push_back({st.i, st.j, st.kl, st.max_prob, st.action, st.trigger});
    return rows;
}

inline std::string kl_trace_tsv(const std::vector<KlTraceRow>& rows) {
    std::ostringstream out;
    out << "i\tj\tkl\tmax_prob\taction\ttrigger\n";
    for (const auto& r : rows) {
        out << r.i << '\t' << r.j << '\t' << (r.kl ? detail::fmt_g(*r.kl) : std::string("-"))
            << '\t' << detail::fmt_g(r.max_prob) << '\t' << to_string(r.action) << '\t'
            << to_string(r.trigger) << "\n";
    }
    return out.str();
}

}  // namespace lsg
