#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ifaq/value.hpp"

namespace ifaq {

enum class ScalarType { Int, Real, String, Bool };

struct Attribute {
    std::string name;
    ScalarType type = ScalarType::Int;
};

struct RelationSchema {
    std::string name;
    std::vector<Attribute> attrs;
    long long cardinality = 0;  // declared tuple count, feeds loop scheduling

    const Attribute* findAttr(const std::string& a) const;
};

struct JoinTreeEdge {
    std::string parent;
    std::string child;
    std::vector<std::string> attrs;
};

// Rooted join tree, supplied as input in the schema file.
struct JoinTree {
    std::string root;
    std::vector<JoinTreeEdge> edges;

    std::vector<std::string> childrenOf(const std::string& node) const;
    const JoinTreeEdge* edgeTo(const std::string& child) const;
    std::vector<std::string> nodes() const;
};

struct Schema {
    std::vector<RelationSchema> relations;
    std::map<std::string, std::vector<std::string>> featureSets;
    std::string label;
    std::optional<JoinTree> joinTree;

    const RelationSchema* findRelation(const std::string& name) const;
    // Relations containing the attribute, in declaration order.
    std::vector<std::string> relationsWithAttr(const std::string& attr) const;
    // Estimated distinct count of an attribute: smallest cardinality among
    // relations declaring it. nullopt when the attribute is unknown.
    std::optional<long long> distinctCount(const std::string& attr) const;
};

// Database: relation name -> dictionary from tuple record to multiplicity.
using Database = std::map<std::string, Value>;

Schema schemaFromJsonText(const std::string& text);
std::string schemaToJsonText(const Schema& s);
Schema loadSchemaFile(const std::string& path);

// Validates the join tree against the schema: connected, acyclic, edge
// attributes present in both endpoint relations. Throws std::runtime_error.
void validateJoinTree(const Schema& s, const JoinTree& jt);

}  // namespace ifaq
