#pragma once

// Corpus ingestion: line-delimited JSON records with pre-tokenized source and
// reference, optional pharaoh-format word alignments, and text/speech kinds.

#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "lsg/core.hpp"
#include "lsg/errors.hpp"

namespace lsg {

struct Sample {
    std::string id;
    SourceSequence source;
    std::vector<std::string> reference;
    std::optional<std::vector<int>> alignment;  // a_i, 1-based source index; 0 = unaligned
};

/// Parses whitespace-separated "src-tgt" pairs (0-based) into the alignment
/// sequence a: a_i = 1 + the largest source index aligned to target word i,
/// or 0 when the word is unaligned.
inline std::vector<int> parse_pharaoh(const std::string& s, int I, int J) {
    std::vector<int> a(static_cast<std::size_t>(I), 0);
    std::istringstream in(s);
    std::string pair;
    while (in >> pair) {
        const auto dash = pair.find('-');
        if (dash == std::string::npos || dash == 0 || dash + 1 == pair.size())
            throw ParseError("bad alignment pair: " + pair);
        int src = 0, tgt = 0;
        try {
            std::size_t used = 0;
            src = std::stoi(pair.substr(0, dash), &used);
            if (used != dash) throw std::invalid_argument(pair);
            tgt = std::stoi(pair.substr(dash + 1), &used);
            if (used != pair.size() - dash - 1) throw std::invalid_argument(pair);
        } catch (const std::exception&) {
            throw ParseError("bad alignment pair: " + pair);
        }
        if (src < 0 || src >= J)
            throw ParseError("alignment source index " + std::to_string(src) +
                             " out of range for J=" + std::to_string(J));
        if (tgt < 0 || tgt >= I)
            throw ParseError("alignment target index " + std::to_string(tgt) +
                             " out of range for I=" + std::to_string(I));
        a[static_cast<std::size_t>(tgt)] = std::max(a[static_cast<std::size_t>(tgt)], src + 1);
    }
    return a;
}

/// One JSON record per line:
///   {"id": ..., "source": [...], "reference": [...], "kind": "text"|"speech",
///    "alignment": "0-0 1-1 ...",    // optional
///    "segment_ms": 640}             // speech only; defaults to 640
inline std::vector<Sample> load_corpus(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open corpus file: " + path);

    std::vector<Sample> samples;
    std::unordered_set<std::string> seen_ids;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const std::string where = path + ":" + std::to_string(line_no);
        nlohmann::json rec;
        try {
            rec = nlohmann::json::parse(line);
        } catch (const std::exception& e) {
            throw ParseError(where + ": invalid JSON: " + e.what());
        }
        try {
            const std::string id = rec.at("id").get<std::string>();
            if (!seen_ids.insert(id).second)
                throw DuplicateId(where + ": duplicate sample id: " + id);

            const auto source_tokens = rec.at("source").get<std::vector<std::string>>();
            const auto reference = rec.at("reference").get<std::vector<std::string>>();
            if (reference.empty()) throw ParseError("empty reference");
            const std::string kind = rec.value("kind", "text");

            std::optional<SourceSequence> source;
            if (kind == "text") {
                if (rec.contains("segment_ms")) throw ParseError("segment_ms on a text record");
                source = SourceSequence::text(source_tokens);
            } else if (kind == "speech") {
                source = SourceSequence::speech(source_tokens, rec.value("segment_ms", 640));
            } else {
                throw ParseError("kind must be \"text\" or \"speech\", got " + kind);
            }

            std::optional<std::vector<int>> alignment;
            if (rec.contains("alignment"))
                alignment = parse_pharaoh(rec.at("alignment").get<std::string>(),
                                          static_cast<int>(reference.size()), source->length());

            samples.push_back({id, std::move(*source), reference, std::move(alignment)});
        } catch (const DuplicateId&) {
            throw;
        } catch (const Error& e) {
            throw ParseError(where + ": " + e.what());
        } catch (const std::exception& e) {
            throw ParseError(where + ": bad record: " + e.what());
        }
    }
    return samples;
}

/// Writes samples back out in the load_corpus format (alignments are emitted
/// as minimal pharaoh strings: one a_i-to-i pair per aligned word).
inline void write_corpus(const std::string& path, const std::vector<Sample>& samples) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write corpus file: " + path);
    for (const auto& s : samples) {
        nlohmann::json rec;
        rec["id"] = s.id;
        rec["source"] = s.source.elements();
        rec["reference"] = s.reference;
        rec["kind"] = s.source.kind() == SourceKind::Speech ? "speech" : "text";
        if (s.source.segment_ms()) rec["segment_ms"] = *s.source.segment_ms();
        if (s.alignment) {
            std::string pharaoh;
            for (std::size_t i = 0; i < s.alignment->size(); ++i) {
                const int a = (*s.alignment)[i];
                if (a == 0) continue;
                if (!pharaoh.empty()) pharaoh += ' ';
                pharaoh += std::to_string(a - 1) + "-" + std::to_string(i);
            }
            rec["alignment"] = pharaoh;
        }
        out << rec.dump() << "\n";
    }
}

}  // namespace lsg
