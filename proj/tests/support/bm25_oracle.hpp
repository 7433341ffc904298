#pragma once

// Brute-force BM25 evaluator for tests. It re-tokenizes every document for
// every query and evaluates the scoring formula directly, sharing no code
// with the index implementation.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <string>
#include <vector>

namespace msqa::testing {

struct OracleDoc {
    std::string id;
    std::string text;
};

struct OracleHit {
    std::string id;
    double score;
};

inline std::vector<std::string> oracle_terms(const std::string& text) {
    std::string cleaned;
    for (char ch : text) {
        const auto c = static_cast<unsigned char>(ch);
        const bool word = std::isalnum(c) || c == '_' || c >= 0x80;
        cleaned.push_back(word ? (c < 0x80 ? static_cast<char>(std::tolower(c)) : ch) : ' ');
    }
    std::vector<std::string> out;
    std::string cur;
    for (char ch : cleaned) {
        if (ch == ' ') {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

inline std::vector<OracleHit> brute_force_bm25(const std::vector<OracleDoc>& docs, const std::string& query, std::size_t k,
                                               double k1 = 1.2, double b = 0.75) {
    std::vector<std::vector<std::string>> doc_terms;
    double total = 0;
    for (const auto& d : docs) {
        doc_terms.push_back(oracle_terms(d.text));
        total += static_cast<double>(doc_terms.back().size());
    }
    const double n = static_cast<double>(docs.size());
    const double avg = total / n;
    const auto q_terms = oracle_terms(query);
    std::vector<OracleHit> hits;
    for (std::size_t i = 0; i < docs.size(); ++i) {
        double score = 0.0;
        bool matched = false;
        for (const auto& term : q_terms) {
            const double tf = static_cast<double>(std::count(doc_terms[i].begin(), doc_terms[i].end(), term));
            if (tf == 0) continue;
            double df = 0;
            for (const auto& terms : doc_terms) df += std::find(terms.begin(), terms.end(), term) != terms.end() ? 1 : 0;
            const double idf = std::log((n - df + 0.5) / (df + 0.5) + 1.0);
            const double len = static_cast<double>(doc_terms[i].size());
            score += idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * len / avg));
            matched = true;
        }
        if (matched) hits.push_back({docs[i].id, score});
    }
    std::sort(hits.begin(), hits.end(), [](const OracleHit& x, const OracleHit& y) {
        return x.score != y.score ? x.score > y.score : x.id < y.id;
    });
    if (hits.size() > k) hits.resize(k);
    return hits;
}

// Small random corpora over a narrow vocabulary so that term overlap, repeated
// terms and exact duplicates (ties) are common.
template <typename Rng>
std::vector<OracleDoc> random_oracle_corpus(Rng& rng, std::size_t n_docs) {
    static const std::vector<std::string> vocab{"azure", "vm",      "disk",  "Network", "portal", "backup", "key",
                                                "vault", "storage", "blob",  "price",   "region", "sql",    "cosmos",
                                                "error", "deploy",  "ARM",   "quota",   "the",    "a",      "is"};
    std::vector<OracleDoc> docs;
    for (std::size_t i = 0; i < n_docs; ++i) {
        std::string id = "doc" + std::string(i < 10 ? "0" : "") + std::to_string(i);
        if (i > 0 && rng() % 6 == 0) {
            docs.push_back({id, docs[rng() % docs.size()].text});
            continue;
        }
        std::string text;
        const std::size_t len = 1 + rng() % 25;
        for (std::size_t w = 0; w < len; ++w) {
            text += vocab[rng() % vocab.size()];
            text += (rng() % 5 == 0) ? ", " : " ";
        }
        docs.push_back({id, text});
    }
    return docs;
}

template <typename Rng>
std::string random_oracle_query(Rng& rng) {
    static const std::vector<std::string> words{"azure", "VM",    "disk", "backup", "price", "the",
                                                "quota", "blob?", "sql",  "vault",  "missing"};
    std::string q;
    const std::size_t len = 1 + rng() % 4;
    for (std::size_t i = 0; i < len; ++i) q += words[rng() % words.size()] + " ";
    return q;
}

}  // namespace msqa::testing
