#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "ifaq/ast.hpp"
#include "ifaq/schema.hpp"

namespace ifaq {

// Type lattice. Hot is carried for completeness but nothing constructs it.
struct IfaqType {
    enum class Kind {
        Int, Real, String, Bool, Field, Enum, Hot,
        Record, Variant, Dict, Set,
        Error  // poison type: unifies with everything, suppresses cascades
    };

    Kind kind = Kind::Error;
    std::vector<std::pair<std::string, IfaqType>> fields;  // Record / Variant
    std::vector<IfaqType> args;  // Dict: {key, value}; Set: {elem}; Hot: {base}
    long long hotWidth = 0;

    static IfaqType scalar(Kind k) { return IfaqType{k, {}, {}, 0}; }
    static IfaqType record(std::vector<std::pair<std::string, IfaqType>> fs) {
        return IfaqType{Kind::Record, std::move(fs), {}, 0};
    }
    static IfaqType variant(std::vector<std::pair<std::string, IfaqType>> fs) {
        return IfaqType{Kind::Variant, std::move(fs), {}, 0};
    }
    static IfaqType dict(IfaqType k, IfaqType v) {
        return IfaqType{Kind::Dict, {}, {std::move(k), std::move(v)}, 0};
    }
    static IfaqType set(IfaqType e) { return IfaqType{Kind::Set, {}, {std::move(e)}, 0}; }
    static IfaqType error() { return IfaqType{}; }

    bool isError() const { return kind == Kind::Error; }
    bool isNumeric() const { return kind == Kind::Int || kind == Kind::Real; }
};

bool typeEqual(const IfaqType& a, const IfaqType& b);
std::string typeToString(const IfaqType& t);

struct TypeError {
    int line = 0;
    int col = 0;
    std::string message;
    std::string snippet;  // offending expression, pretty-printed
};

// Per-node annotations keyed by node identity; programs are shared_ptr trees
// so the keys stay valid as long as the program does.
struct TypedProgram {
    Program program;
    std::map<const Expr*, IfaqType> types;
    IfaqType resultType;
};

struct TypecheckResult {
    bool ok = false;
    TypedProgram typed;
    std::vector<TypeError> errors;
};

// S-IFAQ check: collections homogeneous, lookups keyed correctly, static
// field access only, no residual dynamic access. Expects p alpha-renamed.
TypecheckResult typecheck(const Program& p, const Schema& s);

// Relation type as seen by programs: Dict(Record{attrs}, Int).
IfaqType relationType(const RelationSchema& r);

}  // namespace ifaq
