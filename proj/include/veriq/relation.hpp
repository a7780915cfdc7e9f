#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "veriq/embed.hpp"
#include "veriq/text.hpp"
#include "veriq/value.hpp"

namespace veriq {

struct AttrDecl {
    std::string name;
    AttrType type = AttrType::Text;
    std::string description;
};

// Declared attribute set of a relation. Attribute order is the declaration
// order and is used wherever a stable iteration order matters.
struct Schema {
    std::string relation_name;
    std::vector<AttrDecl> attrs;

    const AttrDecl* find(const std::string& name) const {
        for (const auto& a : attrs)
            if (a.name == name) return &a;
        return nullptr;
    }

    std::vector<std::string> text_attrs() const {
        std::vector<std::string> out;
        for (const auto& a : attrs)
            if (a.type == AttrType::Text) out.push_back(a.name);
        return out;
    }

    static Schema from_json(const nlohmann::json& j) {
        Schema s;
        s.relation_name = j.value("name", "df");
        for (const auto& a : j.at("attributes")) {
            AttrDecl d;
            d.name = a.at("name").get<std::string>();
            auto t = attr_type_from_name(a.at("type").get<std::string>());
            if (!t) throw Error("schema: unknown attribute type for '" + d.name + "'");
            d.type = *t;
            d.description = a.value("description", "");
            s.attrs.push_back(std::move(d));
        }
        return s;
    }

    nlohmann::json to_json() const {
        nlohmann::json attrs_j = nlohmann::json::array();
        for (const auto& a : attrs)
            attrs_j.push_back({{"name", a.name},
                               {"type", attr_type_name(a.type)},
                               {"description", a.description}});
        return {{"name", relation_name}, {"attributes", attrs_j}};
    }
};

struct TupleRow {
    std::int64_t row_id = 0;
    std::map<std::string, AttrValue> attrs;
    std::vector<std::string> sentences;       // from every text attribute, in schema order
    std::vector<Embedding> sentence_embeddings;
    Embedding doc_embedding;

    const AttrValue& attr(const std::string& name) const {
        auto it = attrs.find(name);
        if (it == attrs.end()) throw Error("row " + std::to_string(row_id) + ": no attribute '" + name + "'");
        return it->second;
    }
};

// Immutable ingested table. Safe to share across concurrent executions.
struct Relation {
    Schema schema;
    std::vector<TupleRow> rows;

    std::size_t row_count() const { return rows.size(); }
};

namespace detail {

inline AttrValue attr_from_json(const nlohmann::json& v, const AttrDecl& decl, size_t line_no) {
    auto fail = [&](const char* want) -> AttrValue {
        throw Error("ingest: line " + std::to_string(line_no) + ": attribute '" + decl.name +
                    "' is not " + want);
    };
    switch (decl.type) {
        case AttrType::Text:
            if (!v.is_string()) return fail("a string");
            return AttrValue::text(v.get<std::string>());
        case AttrType::Categorical:
            if (!v.is_string()) return fail("a string");
            return AttrValue::categorical(v.get<std::string>());
        case AttrType::Int:
            if (!v.is_number_integer()) return fail("an integer");
            return AttrValue::integer(v.get<std::int64_t>());
        case AttrType::Real:
            if (!v.is_number()) return fail("a number");
            return AttrValue::real(v.get<double>());
        case AttrType::Bool:
            if (!v.is_boolean()) return fail("a boolean");
            return AttrValue::boolean(v.get<bool>());
    }
    return fail("a supported type");
}

}  // namespace detail

// Reads line-delimited JSON records, validates them against the schema and
// materializes sentence and document embeddings. Row ids are assigned in
// input order starting at 0.
inline Relation ingest(std::istream& in, const Schema& schema, const Embedder& embedder) {
    Relation rel;
    rel.schema = schema;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        nlohmann::json rec = nlohmann::json::parse(line, nullptr, false);
        if (rec.is_discarded() || !rec.is_object())
            throw Error("ingest: line " + std::to_string(line_no) + ": not a valid record");

        TupleRow row;
        row.row_id = static_cast<std::int64_t>(rel.rows.size());
        for (const auto& decl : schema.attrs) {
            auto it = rec.find(decl.name);
            if (it == rec.end())
                throw Error("ingest: line " + std::to_string(line_no) + ": missing attribute '" +
                            decl.name + "'");
            row.attrs.emplace(decl.name, detail::attr_from_json(*it, decl, line_no));
        }
        for (auto it = rec.begin(); it != rec.end(); ++it) {
            if (!schema.find(it.key()))
                throw Error("ingest: line " + std::to_string(line_no) + ": attribute '" + it.key() +
                            "' is not in the schema");
        }

        std::string all_text;
        for (const auto& decl : schema.attrs) {
            if (decl.type != AttrType::Text) continue;
            const std::string& t = row.attrs.at(decl.name).as_string();
            if (!all_text.empty()) all_text += " ";
            all_text += t;
            for (auto& s : segment_sentences(t)) row.sentences.push_back(std::move(s));
        }
        try {
            for (const auto& s : row.sentences) row.sentence_embeddings.push_back(embedder.embed(s));
            row.doc_embedding = embedder.embed(all_text);
        } catch (const std::exception& e) {
            throw Error("ingest: line " + std::to_string(line_no) + ": embedder failed: " + e.what());
        }
        rel.rows.push_back(std::move(row));
    }
    return rel;
}

// ---- materialized relation serialization (CLI `ingest` output) ----

inline nlohmann::json row_to_json(const TupleRow& row, const Schema& schema) {
    nlohmann::json attrs = nlohmann::json::object();
    for (const auto& decl : schema.attrs) {
        const AttrValue& v = row.attrs.at(decl.name);
        switch (decl.type) {
            case AttrType::Text:
            case AttrType::Categorical: attrs[decl.name] = v.as_string(); break;
            case AttrType::Int: attrs[decl.name] = v.as_int(); break;
            case AttrType::Real: attrs[decl.name] = v.as_real(); break;
            case AttrType::Bool: attrs[decl.name] = v.as_bool(); break;
        }
    }
    return {{"row_id", row.row_id},
            {"attrs", attrs},
            {"sentences", row.sentences},
            {"sentence_embeddings", row.sentence_embeddings},
            {"doc_embedding", row.doc_embedding}};
}

inline void save_relation(std::ostream& out, const Relation& rel) {
    out << nlohmann::json({{"schema", rel.schema.to_json()}}).dump() << "\n";
    for (const auto& row : rel.rows) out << row_to_json(row, rel.schema).dump() << "\n";
}

inline Relation load_relation(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw Error("relation file: empty");
    nlohmann::json header = nlohmann::json::parse(line);
    Relation rel;
    rel.schema = Schema::from_json(header.at("schema"));
    size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded())
            throw Error("relation file: line " + std::to_string(line_no) + ": bad record");
        TupleRow row;
        row.row_id = j.at("row_id").get<std::int64_t>();
        const auto& attrs = j.at("attrs");
        for (const auto& decl : rel.schema.attrs) {
            row.attrs.emplace(decl.name, detail::attr_from_json(attrs.at(decl.name), decl, line_no));
        }
        row.sentences = j.at("sentences").get<std::vector<std::string>>();
        row.sentence_embeddings = j.at("sentence_embeddings").get<std::vector<Embedding>>();
        row.doc_embedding = j.at("doc_embedding").get<Embedding>();
        rel.rows.push_back(std::move(row));
    }
    return rel;
}

}  // namespace veriq
