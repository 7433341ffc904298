#include "msqa/bm25.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "msqa/errors.hpp"
#include "msqa/markdown.hpp"
#include "msqa/tokenizer.hpp"

namespace msqa {

namespace {

struct Atom {
    std::size_t begin;  // byte offsets into the section body
    std::size_t end;
    std::size_t tokens;
};

struct Section {
    std::vector<std::string> trail;
    std::string body;
};

// "## Title ##" -> level 2, "Title". Returns level 0 for non-headings.
int heading_level(std::string_view line, std::string& title) {
    std::size_t i = 0;
    while (i < line.size() && i < 3 && line[i] == ' ') ++i;
    std::size_t hashes = 0;
    while (i + hashes < line.size() && line[i + hashes] == '#') ++hashes;
    if (hashes == 0 || hashes > 6) return 0;
    const std::size_t rest = i + hashes;
    if (rest < line.size() && line[rest] != ' ' && line[rest] != '\t') return 0;
    std::string_view t = line.substr(rest);
    while (!t.empty() && (t.back() == ' ' || t.back() == '\t' || t.back() == '\r')) t.remove_suffix(1);
    while (!t.empty() && t.back() == '#') t.remove_suffix(1);
    while (!t.empty() && (t.front() == ' ' || t.front() == '\t')) t.remove_prefix(1);
    while (!t.empty() && (t.back() == ' ' || t.back() == '\t')) t.remove_suffix(1);
    title = std::string(t);
    return static_cast<int>(hashes);
}

std::string_view strip_front_matter(std::string_view text) {
    if (!text.starts_with("---\n") && !text.starts_with("---\r\n")) return text;
    const std::size_t close = text.find("\n---", 3);
    if (close == std::string_view::npos) return text;
    std::size_t after = text.find('\n', close + 4);
    return after == std::string_view::npos ? std::string_view{} : text.substr(after + 1);
}

std::vector<Section> split_sections(std::string_view text) {
    std::vector<Section> sections;
    std::vector<std::pair<int, std::string>> stack;
    Section current;
    for (const auto& seg : markdown::split_fences(text).segments) {
        if (seg.fenced) {
            current.body.append(seg.text);
            continue;
        }
        std::size_t pos = 0;
        while (pos < seg.text.size()) {
            std::size_t nl = seg.text.find('\n', pos);
            const std::size_t line_end = nl == std::string_view::npos ? seg.text.size() : nl + 1;
            std::string_view line = seg.text.substr(pos, line_end - pos);
            std::string title;
            const int level = heading_level(line.substr(0, line.find('\n')), title);
            if (level > 0) {
                sections.push_back(std::move(current));
                while (!stack.empty() && stack.back().first >= level) stack.pop_back();
                stack.emplace_back(level, title);
                current = Section{};
                for (const auto& [lvl, name] : stack) current.trail.push_back(name);
            } else {
                current.body.append(line);
            }
            pos = line_end;
        }
    }
    sections.push_back(std::move(current));
    return sections;
}

std::vector<Atom> atomize(std::string_view body) {
    std::vector<Atom> atoms;
    const WhitespaceTokenizer ws;
    std::size_t offset = 0;
    for (const auto& seg : markdown::split_fences(body).segments) {
        if (seg.fenced) {
            atoms.push_back({offset, offset + seg.text.size(), std::max<std::size_t>(1, ws.count(seg.text))});
        } else {
            std::size_t i = 0;
            while (i < seg.text.size()) {
                while (i < seg.text.size() && is_space_byte(static_cast<unsigned char>(seg.text[i]))) ++i;
                const std::size_t start = i;
                while (i < seg.text.size() && !is_space_byte(static_cast<unsigned char>(seg.text[i]))) ++i;
                if (i > start) atoms.push_back({offset + start, offset + i, 1});
            }
        }
        offset += seg.text.size();
    }
    return atoms;
}

std::string pad_index(std::size_t i) {
    std::string s = std::to_string(i);
    if (s.size() < 4) s.insert(0, 4 - s.size(), '0');
    return s;
}

}  // namespace

Chunking chunk_docs(std::span<const MarkdownDoc> docs, const ChunkOptions& options) {
    if (options.target_tokens <= options.overlap_tokens)
        throw ValidationError("chunk target_tokens must exceed overlap_tokens");
    Chunking result;
    const WhitespaceTokenizer ws;
    for (const auto& doc : docs) {
        std::size_t seq = 0;
        for (const auto& section : split_sections(strip_front_matter(doc.text))) {
            const auto atoms = atomize(section.body);
            const std::size_t n = atoms.size();
            if (n == 0) continue;
            std::vector<std::size_t> offset(n + 1, 0);
            for (std::size_t i = 0; i < n; ++i) offset[i + 1] = offset[i] + atoms[i].tokens;

            std::size_t s = 0;
            while (s < n) {
                std::size_t e = s;
                while (e < n && offset[e + 1] - offset[s] <= options.target_tokens) ++e;
                if (e == s) {
                    e = s + 1;
                    result.warnings.push_back(doc.path + ": block of " + std::to_string(atoms[s].tokens) +
                                              " tokens exceeds the chunk target and is emitted whole");
                }
                Chunk chunk;
                chunk.chunk_id = doc.path + "#" + pad_index(seq++);
                chunk.doc_path = doc.path;
                chunk.heading_trail = section.trail;
                chunk.body = section.body.substr(atoms[s].begin, atoms[e - 1].end - atoms[s].begin);
                chunk.token_count = ws.count(chunk.body);
                result.chunks.push_back(std::move(chunk));
                if (e == n) break;
                const std::size_t next_start = offset[e] >= options.overlap_tokens ? offset[e] - options.overlap_tokens : 0;
                std::size_t ns = s + 1;
                while (ns < e && offset[ns] < next_start) ++ns;
                s = ns;
            }
        }
    }
    return result;
}

std::vector<MarkdownDoc> load_markdown_tree(const std::filesystem::path& root) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(root)) throw ValidationError("docs path is not a directory: " + root.string());
    std::vector<MarkdownDoc> docs;
    for (const auto& entry : fs::recursive_directory_iterator(root)) {
        if (!entry.is_regular_file()) continue;
        const auto ext = entry.path().extension().string();
        if (ext != ".md" && ext != ".markdown") continue;
        std::ifstream in(entry.path(), std::ios::binary);
        std::ostringstream buf;
        buf << in.rdbuf();
        docs.push_back({fs::relative(entry.path(), root).generic_string(), buf.str()});
    }
    std::sort(docs.begin(), docs.end(), [](const MarkdownDoc& a, const MarkdownDoc& b) { return a.path < b.path; });
    return docs;
}

Bm25Index Bm25Index::build(std::span<const Chunk> chunks, Bm25Params params) {
    if (chunks.empty()) throw ValidationError("cannot build a BM25 index from zero chunks");
    if (!(params.k1 > 0.0)) throw ValidationError("BM25 k1 must be positive");
    if (!(params.b >= 0.0 && params.b <= 1.0)) throw ValidationError("BM25 b must lie in [0, 1]");
    Bm25Index index;
    index.params_ = params;
    std::size_t total = 0;
    for (const auto& chunk : chunks) {
        const auto terms = normalized_terms(chunk.body);
        if (!index.doc_lengths_.emplace(chunk.chunk_id, terms.size()).second)
            throw ValidationError("duplicate chunk id '" + chunk.chunk_id + "'");
        total += terms.size();
        std::map<std::string, std::uint32_t> tf;
        for (const auto& t : terms) ++tf[t];
        for (const auto& [term, count] : tf) index.postings_[term].push_back({chunk.chunk_id, count});
    }
    for (auto& [term, list] : index.postings_) {
        std::sort(list.begin(), list.end(), [](const Posting& a, const Posting& b) { return a.chunk_id < b.chunk_id; });
    }
    index.avg_doc_length_ = static_cast<double>(total) / static_cast<double>(chunks.size());
    return index;
}

double Bm25Index::idf(std::string_view term) const {
    auto it = postings_.find(std::string(term));
    const double df = it == postings_.end() ? 0.0 : static_cast<double>(it->second.size());
    const double n = static_cast<double>(doc_count());
    return std::log((n - df + 0.5) / (df + 0.5) + 1.0);
}

std::vector<SearchHit> Bm25Index::search(std::string_view query, std::size_t k) const {
    if (k == 0) throw ValidationError("search k must be at least 1");
    std::map<std::string, double> scores;
    for (const auto& term : normalized_terms(query)) {
        auto it = postings_.find(term);
        if (it == postings_.end()) continue;
        const double term_idf = idf(term);
        for (const auto& p : it->second) {
            const double tf = p.term_frequency;
            const double len = static_cast<double>(doc_lengths_.at(p.chunk_id));
            const double norm = params_.k1 * (1.0 - params_.b + params_.b * len / avg_doc_length_);
            scores[p.chunk_id] += term_idf * tf * (params_.k1 + 1.0) / (tf + norm);
        }
    }
    std::vector<SearchHit> hits;
    hits.reserve(scores.size());
    for (auto& [id, score] : scores) hits.push_back({id, score});
    const auto by_rank = [](const SearchHit& a, const SearchHit& b) {
        return a.score != b.score ? a.score > b.score : a.chunk_id < b.chunk_id;
    };
    if (hits.size() > k) {
        std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(k), hits.end(), by_rank);
        hits.resize(k);
    } else {
        std::sort(hits.begin(), hits.end(), by_rank);
    }
    return hits;
}

nlohmann::json Bm25Index::to_json() const {
    nlohmann::json postings = nlohmann::json::object();
    for (const auto& [term, list] : postings_) {
        nlohmann::json entries = nlohmann::json::array();
        for (const auto& p : list) entries.push_back(nlohmann::json::array({p.chunk_id, p.term_frequency}));
        postings[term] = std::move(entries);
    }
    return nlohmann::json{{"k1", params_.k1},
                          {"b", params_.b},
                          {"doc_count", doc_count()},
                          {"avg_doc_length", avg_doc_length_},
                          {"doc_lengths", doc_lengths_},
                          {"postings", postings}};
}

Bm25Index Bm25Index::from_json(const nlohmann::json& j) {
    try {
        Bm25Index index;
        index.params_ = {j.at("k1").get<double>(), j.at("b").get<double>()};
        index.doc_lengths_ = j.at("doc_lengths").get<std::map<std::string, std::size_t>>();
        index.avg_doc_length_ = j.at("avg_doc_length").get<double>();
        for (const auto& [term, entries] : j.at("postings").items()) {
            auto& list = index.postings_[term];
            for (const auto& e : entries) {
                Posting p{e.at(0).get<std::string>(), e.at(1).get<std::uint32_t>()};
                if (index.doc_lengths_.count(p.chunk_id) == 0)
                    throw ValidationError("posting references unknown chunk '" + p.chunk_id + "'");
                list.push_back(std::move(p));
            }
        }
        if (j.at("doc_count").get<std::size_t>() != index.doc_lengths_.size())
            throw ValidationError("index doc_count disagrees with doc_lengths");
        return index;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed BM25 index: ") + e.what());
    }
}

const Chunk& RetrievalStore::chunk(std::string_view chunk_id) const {
    auto it = std::lower_bound(chunks.begin(), chunks.end(), chunk_id,
                               [](const Chunk& c, std::string_view id) { return c.chunk_id < id; });
    if (it == chunks.end() || it->chunk_id != chunk_id) throw ValidationError("unknown chunk '" + std::string(chunk_id) + "'");
    return *it;
}

RetrievalStore build_store(std::span<const MarkdownDoc> docs, const ChunkOptions& chunking, Bm25Params params,
                           std::vector<std::string>* warnings) {
    auto result = chunk_docs(docs, chunking);
    if (warnings != nullptr) warnings->insert(warnings->end(), result.warnings.begin(), result.warnings.end());
    std::sort(result.chunks.begin(), result.chunks.end(), [](const Chunk& a, const Chunk& b) { return a.chunk_id < b.chunk_id; });
    auto index = Bm25Index::build(result.chunks, params);
    return RetrievalStore{std::move(result.chunks), std::move(index), chunking};
}

std::string serialize_store(const RetrievalStore& store) {
    nlohmann::json chunks = nlohmann::json::array();
    for (const auto& c : store.chunks) {
        chunks.push_back({{"chunk_id", c.chunk_id},
                          {"doc_path", c.doc_path},
                          {"heading_trail", c.heading_trail},
                          {"body", c.body},
                          {"token_count", c.token_count}});
    }
    nlohmann::json doc{{"format_version", kIndexFormatVersion},
                       {"tokenizer", "normalized_terms"},
                       {"chunking", {{"target_tokens", store.chunking.target_tokens}, {"overlap_tokens", store.chunking.overlap_tokens}}},
                       {"chunks", chunks},
                       {"index", store.index.to_json()}};
    return doc.dump();
}

RetrievalStore deserialize_store(std::string_view text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("index file is not valid JSON: ") + e.what());
    }
    if (!j.contains("format_version") || j["format_version"] != kIndexFormatVersion)
        throw ValidationError("unsupported index format version");
    try {
        RetrievalStore store;
        for (const auto& c : j.at("chunks")) {
            store.chunks.push_back({c.at("chunk_id").get<std::string>(), c.at("doc_path").get<std::string>(),
                                    c.at("heading_trail").get<std::vector<std::string>>(), c.at("body").get<std::string>(),
                                    c.at("token_count").get<std::size_t>()});
        }
        store.chunking = {j.at("chunking").at("target_tokens").get<std::size_t>(),
                          j.at("chunking").at("overlap_tokens").get<std::size_t>()};
        store.index = Bm25Index::from_json(j.at("index"));
        return store;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed index file: ") + e.what());
    }
}

void save_store(const std::filesystem::path& path, const RetrievalStore& store) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot write index file " + path.string());
    out << serialize_store(store);
}

RetrievalStore load_store(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open index file " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return deserialize_store(buf.str());
}

}  // namespace msqa
