#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

namespace ifaq {

// Runtime values. Collections keep a canonical order: set elements and
// dictionary keys are sorted ascending under compareValues, so evaluation is
// deterministic regardless of construction order.
struct Value {
    enum class Kind { Int, Real, Bool, Str, Field, Record, Variant, Set, Dict };

    Kind kind = Kind::Int;
    long long i = 0;
    double r = 0.0;
    bool b = false;
    std::string s;  // Str / Field / variant field name
    std::vector<std::pair<std::string, Value>> rec;   // Record (declared order)
    Value* variantVal() { return rec.empty() ? nullptr : &rec.front().second; }
    const Value* variantVal() const { return rec.empty() ? nullptr : &rec.front().second; }
    std::vector<Value> set;                           // Set, sorted
    std::vector<std::pair<Value, Value>> dict;        // Dict, sorted by key
    bool baseTuples = false;  // dict holds database-relation tuples

    static Value integer(long long v);
    static Value real(double v);
    static Value boolean(bool v);
    static Value str(std::string v);
    static Value field(std::string v);
    static Value record(std::vector<std::pair<std::string, Value>> fs);
    static Value variant(std::string f, Value v);
    static Value makeSet(std::vector<Value> elems);                       // sorts, dedups
    static Value makeDict(std::vector<std::pair<Value, Value>> entries);  // sorts; keys must be distinct

    bool isNumeric() const { return kind == Kind::Int || kind == Kind::Real; }
    double asReal() const { return kind == Kind::Int ? double(i) : r; }
};

// Total order: numeric < bool < string < field < record < variant < set < dict.
// Records compare by field name then value, fields taken in name order.
int compareValues(const Value& a, const Value& b);
bool operator==(const Value& a, const Value& b);
inline bool operator!=(const Value& a, const Value& b) { return !(a == b); }
bool valueLess(const Value& a, const Value& b);

struct EvalError;  // interp.hpp
struct CostStats;  // stats.hpp

// Ring addition: numbers add, dicts merge (shared keys add, rest union),
// sets union, records add fieldwise. Throws EvalError on incompatible kinds.
// When stats is given, scalar additions and dictionary entry writes are
// counted.
Value ringAdd(const Value& a, const Value& b, CostStats* stats = nullptr);
// Ring multiplication: numbers multiply (bools as 0/1); a scalar scales the
// values of a dict or the fields of a record recursively; records multiply
// fieldwise.
Value ringMul(const Value& a, const Value& b, CostStats* stats = nullptr);
// Additive identity matching the shape of v.
Value ringZeroLike(const Value& v);

nlohmann::json valueToJson(const Value& v);
std::string valueToString(const Value& v);

}  // namespace ifaq
