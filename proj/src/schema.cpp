#include "ifaq/schema.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace ifaq {

using nlohmann::json;

const Attribute* RelationSchema::findAttr(const std::string& a) const {
    for (const auto& at : attrs)
        if (at.name == a) return &at;
    return nullptr;
}

std::vector<std::string> JoinTree::childrenOf(const std::string& node) const {
    std::vector<std::string> out;
    for (const auto& e : edges)
        if (e.parent == node) out.push_back(e.child);
    return out;
}

const JoinTreeEdge* JoinTree::edgeTo(const std::string& child) const {
    for (const auto& e : edges)
        if (e.child == child) return &e;
    return nullptr;
}

std::vector<std::string> JoinTree::nodes() const {
    std::vector<std::string> out{root};
    for (const auto& e : edges)
        if (std::find(out.begin(), out.end(), e.child) == out.end()) out.push_back(e.child);
    return out;
}

const RelationSchema* Schema::findRelation(const std::string& name) const {
    for (const auto& r : relations)
        if (r.name == name) return &r;
    return nullptr;
}

std::vector<std::string> Schema::relationsWithAttr(const std::string& attr) const {
    std::vector<std::string> out;
    for (const auto& r : relations)
        if (r.findAttr(attr)) out.push_back(r.name);
    return out;
}

std::optional<long long> Schema::distinctCount(const std::string& attr) const {
    std::optional<long long> best;
    for (const auto& r : relations)
        if (r.findAttr(attr) && (!best || r.cardinality < *best)) best = r.cardinality;
    return best;
}

namespace {

ScalarType scalarTypeFromString(const std::string& s) {
    if (s == "int") return ScalarType::Int;
    if (s == "real") return ScalarType::Real;
    if (s == "string") return ScalarType::String;
    if (s == "bool") return ScalarType::Bool;
    throw std::runtime_error("unknown attribute type: " + s);
}

const char* scalarTypeName(ScalarType t) {
    switch (t) {
        case ScalarType::Int: return "int";
        case ScalarType::Real: return "real";
        case ScalarType::String: return "string";
        case ScalarType::Bool: return "bool";
    }
    return "int";
}

}  // namespace

Schema schemaFromJsonText(const std::string& text) {
    json j = json::parse(text);
    Schema s;
    for (const auto& jr : j.at("relations")) {
        RelationSchema r;
        r.name = jr.at("name").get<std::string>();
        for (const auto& ja : jr.at("attrs")) {
            Attribute a;
            a.name = ja.at("name").get<std::string>();
            a.type = scalarTypeFromString(ja.at("type").get<std::string>());
            r.attrs.push_back(std::move(a));
        }
        r.cardinality = jr.value("cardinality", 0LL);
        s.relations.push_back(std::move(r));
    }
    if (j.contains("featureSets"))
        for (const auto& [name, jl] : j.at("featureSets").items())
            s.featureSets[name] = jl.get<std::vector<std::string>>();
    s.label = j.value("label", std::string{});
    if (j.contains("joinTree")) {
        JoinTree jt;
        const auto& jj = j.at("joinTree");
        jt.root = jj.at("root").get<std::string>();
        if (jj.contains("edges"))
            for (const auto& je : jj.at("edges")) {
                JoinTreeEdge e;
                e.parent = je.at("parent").get<std::string>();
                e.child = je.at("child").get<std::string>();
                e.attrs = je.at("attrs").get<std::vector<std::string>>();
                jt.edges.push_back(std::move(e));
            }
        validateJoinTree(s, jt);
        s.joinTree = std::move(jt);
    }
    return s;
}

std::string schemaToJsonText(const Schema& s) {
    nlohmann::ordered_json j;
    j["relations"] = json::array();
    for (const auto& r : s.relations) {
        nlohmann::ordered_json jr;
        jr["name"] = r.name;
        jr["attrs"] = json::array();
        for (const auto& a : r.attrs)
            jr["attrs"].push_back({{"name", a.name}, {"type", scalarTypeName(a.type)}});
        jr["cardinality"] = r.cardinality;
        j["relations"].push_back(std::move(jr));
    }
    j["featureSets"] = nlohmann::ordered_json::object();
    for (const auto& [name, attrs] : s.featureSets) j["featureSets"][name] = attrs;
    j["label"] = s.label;
    if (s.joinTree) {
        nlohmann::ordered_json jj;
        jj["root"] = s.joinTree->root;
        jj["edges"] = json::array();
        for (const auto& e : s.joinTree->edges)
            jj["edges"].push_back(
                {{"parent", e.parent}, {"child", e.child}, {"attrs", e.attrs}});
        j["joinTree"] = std::move(jj);
    }
    return j.dump(2);
}

Schema loadSchemaFile(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open schema file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return schemaFromJsonText(buf.str());
}

void validateJoinTree(const Schema& s, const JoinTree& jt) {
    if (!s.findRelation(jt.root))
        throw std::runtime_error("join tree root is not a relation: " + jt.root);
    std::set<std::string> seen{jt.root};
    // Edges must attach a fresh child to an already-seen parent; a single pass
    // suffices because edges are listed parent-first.
    for (const auto& e : jt.edges) {
        if (!seen.count(e.parent))
            throw std::runtime_error("join tree edge parent not reachable: " + e.parent);
        if (seen.count(e.child))
            throw std::runtime_error("join tree has a cycle or duplicate child: " + e.child);
        const RelationSchema* pr = s.findRelation(e.parent);
        const RelationSchema* cr = s.findRelation(e.child);
        if (!cr) throw std::runtime_error("join tree edge child is not a relation: " + e.child);
        if (e.attrs.empty())
            throw std::runtime_error("join tree edge has no join attributes");
        for (const auto& a : e.attrs) {
            if (!pr->findAttr(a) || !cr->findAttr(a))
                throw std::runtime_error("join attribute " + a + " missing from " + e.parent +
                                         " or " + e.child);
        }
        seen.insert(e.child);
    }
    for (const auto& r : s.relations)
        if (!seen.count(r.name))
            throw std::runtime_error("relation not covered by join tree: " + r.name);
}

}  // namespace ifaq
