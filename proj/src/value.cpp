#include "ifaq/value.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

#include "ifaq/interp.hpp"
#include "ifaq/stats.hpp"

namespace ifaq {

Value Value::integer(long long v) {
    Value x;
    x.kind = Kind::Int;
    x.i = v;
    return x;
}

Value Value::real(double v) {
    Value x;
    x.kind = Kind::Real;
    x.r = v;
    return x;
}

Value Value::boolean(bool v) {
    Value x;
    x.kind = Kind::Bool;
    x.b = v;
    return x;
}

Value Value::str(std::string v) {
    Value x;
    x.kind = Kind::Str;
    x.s = std::move(v);
    return x;
}

Value Value::field(std::string v) {
    Value x;
    x.kind = Kind::Field;
    x.s = std::move(v);
    return x;
}

Value Value::record(std::vector<std::pair<std::string, Value>> fs) {
    Value x;
    x.kind = Kind::Record;
    x.rec = std::move(fs);
    return x;
}

Value Value::variant(std::string f, Value v) {
    Value x;
    x.kind = Kind::Variant;
    x.s = std::move(f);
    x.rec.emplace_back(x.s, std::move(v));
    return x;
}

Value Value::makeSet(std::vector<Value> elems) {
    Value x;
    x.kind = Kind::Set;
    std::sort(elems.begin(), elems.end(), valueLess);
    elems.erase(std::unique(elems.begin(), elems.end(),
                            [](const Value& a, const Value& b) { return a == b; }),
                elems.end());
    x.set = std::move(elems);
    return x;
}

Value Value::makeDict(std::vector<std::pair<Value, Value>> entries) {
    Value x;
    x.kind = Kind::Dict;
    std::sort(entries.begin(), entries.end(),
              [](const auto& a, const auto& b) { return valueLess(a.first, b.first); });
    for (std::size_t k = 1; k < entries.size(); ++k)
        if (entries[k - 1].first == entries[k].first)
            throw EvalError("dictionary literal with duplicate key");
    x.dict = std::move(entries);
    return x;
}

namespace {

int kindRank(Value::Kind k) {
    switch (k) {
        case Value::Kind::Int:
        case Value::Kind::Real: return 0;
        case Value::Kind::Bool: return 1;
        case Value::Kind::Str: return 2;
        case Value::Kind::Field: return 3;
        case Value::Kind::Record: return 4;
        case Value::Kind::Variant: return 5;
        case Value::Kind::Set: return 6;
        case Value::Kind::Dict: return 7;
    }
    return 8;
}

int cmp3(double a, double b) { return a < b ? -1 : (a > b ? 1 : 0); }

}  // namespace

int compareValues(const Value& a, const Value& b) {
    int ra = kindRank(a.kind), rb = kindRank(b.kind);
    if (ra != rb) return ra < rb ? -1 : 1;
    switch (a.kind) {
        case Value::Kind::Int:
            if (b.kind == Value::Kind::Int)
                return a.i < b.i ? -1 : (a.i > b.i ? 1 : 0);
            return cmp3(a.asReal(), b.asReal());
        case Value::Kind::Real: return cmp3(a.asReal(), b.asReal());
        case Value::Kind::Bool: return int(a.b) - int(b.b);
        case Value::Kind::Str:
        case Value::Kind::Field: return a.s.compare(b.s) < 0 ? -1 : (a.s == b.s ? 0 : 1);
        case Value::Kind::Record: {
            // Compare as if sorted by field name.
            auto order = [](const Value& v) {
                std::vector<std::size_t> idx(v.rec.size());
                for (std::size_t k = 0; k < idx.size(); ++k) idx[k] = k;
                std::sort(idx.begin(), idx.end(), [&](std::size_t x, std::size_t y) {
                    return v.rec[x].first < v.rec[y].first;
                });
                return idx;
            };
            auto ia = order(a), ib = order(b);
            std::size_t n = std::min(ia.size(), ib.size());
            for (std::size_t k = 0; k < n; ++k) {
                const auto& fa = a.rec[ia[k]];
                const auto& fb = b.rec[ib[k]];
                if (fa.first != fb.first) return fa.first < fb.first ? -1 : 1;
                if (int c = compareValues(fa.second, fb.second)) return c;
            }
            if (ia.size() != ib.size()) return ia.size() < ib.size() ? -1 : 1;
            return 0;
        }
        case Value::Kind::Variant: {
            if (a.s != b.s) return a.s < b.s ? -1 : 1;
            return compareValues(a.rec.front().second, b.rec.front().second);
        }
        case Value::Kind::Set: {
            std::size_t n = std::min(a.set.size(), b.set.size());
            for (std::size_t k = 0; k < n; ++k)
                if (int c = compareValues(a.set[k], b.set[k])) return c;
            if (a.set.size() != b.set.size()) return a.set.size() < b.set.size() ? -1 : 1;
            return 0;
        }
        case Value::Kind::Dict: {
            std::size_t n = std::min(a.dict.size(), b.dict.size());
            for (std::size_t k = 0; k < n; ++k) {
                if (int c = compareValues(a.dict[k].first, b.dict[k].first)) return c;
                if (int c = compareValues(a.dict[k].second, b.dict[k].second)) return c;
            }
            if (a.dict.size() != b.dict.size()) return a.dict.size() < b.dict.size() ? -1 : 1;
            return 0;
        }
    }
    return 0;
}

bool operator==(const Value& a, const Value& b) { return compareValues(a, b) == 0; }
bool valueLess(const Value& a, const Value& b) { return compareValues(a, b) < 0; }

namespace {

// Bools participate in arithmetic as 0/1.
bool scalarLike(const Value& v) { return v.isNumeric() || v.kind == Value::Kind::Bool; }
Value numOf(const Value& v) {
    return v.kind == Value::Kind::Bool ? Value::integer(v.b ? 1 : 0) : v;
}

}  // namespace

Value ringAdd(const Value& a, const Value& b, CostStats* stats) {
    if (scalarLike(a) && scalarLike(b)) {
        if (stats) ++stats->arithmeticOps;
        Value x = numOf(a), y = numOf(b);
        if (x.kind == Value::Kind::Int && y.kind == Value::Kind::Int)
            return Value::integer(x.i + y.i);
        return Value::real(x.asReal() + y.asReal());
    }
    if (a.kind == Value::Kind::Dict && b.kind == Value::Kind::Dict) {
        std::vector<std::pair<Value, Value>> out;
        std::size_t ia = 0, ib = 0;
        while (ia < a.dict.size() || ib < b.dict.size()) {
            if (stats) ++stats->dictInserts;
            if (ib == b.dict.size()) {
                out.push_back(a.dict[ia++]);
            } else if (ia == a.dict.size()) {
                out.push_back(b.dict[ib++]);
            } else {
                int c = compareValues(a.dict[ia].first, b.dict[ib].first);
                if (c < 0) out.push_back(a.dict[ia++]);
                else if (c > 0) out.push_back(b.dict[ib++]);
                else {
                    out.emplace_back(a.dict[ia].first,
                                     ringAdd(a.dict[ia].second, b.dict[ib].second, stats));
                    ++ia;
                    ++ib;
                }
            }
        }
        Value v;
        v.kind = Value::Kind::Dict;
        v.dict = std::move(out);
        return v;
    }
    if (a.kind == Value::Kind::Set && b.kind == Value::Kind::Set) {
        std::vector<Value> elems = a.set;
        elems.insert(elems.end(), b.set.begin(), b.set.end());
        return Value::makeSet(std::move(elems));
    }
    if (a.kind == Value::Kind::Record && b.kind == Value::Kind::Record) {
        if (a.rec.size() != b.rec.size())
            throw EvalError("record addition with mismatched fields");
        std::vector<std::pair<std::string, Value>> fs;
        fs.reserve(a.rec.size());
        for (std::size_t k = 0; k < a.rec.size(); ++k) {
            const auto& fa = a.rec[k];
            const Value* vb = nullptr;
            if (b.rec[k].first == fa.first) {
                vb = &b.rec[k].second;
            } else {
                for (const auto& fb : b.rec)
                    if (fb.first == fa.first) { vb = &fb.second; break; }
            }
            if (!vb) throw EvalError("record addition with mismatched fields");
            fs.emplace_back(fa.first, ringAdd(fa.second, *vb, stats));
        }
        return Value::record(std::move(fs));
    }
    throw EvalError("incompatible addition operands: " + valueToString(a) + " + " + valueToString(b));
}

namespace {
bool isScalarNum(const Value& v) { return v.isNumeric() || v.kind == Value::Kind::Bool; }

Value scalarOf(const Value& v) {
    if (v.kind == Value::Kind::Bool) return Value::integer(v.b ? 1 : 0);
    return v;
}

Value scaleBy(const Value& scalar, const Value& v, CostStats* stats) {
    if (isScalarNum(v)) return ringMul(scalar, v, stats);
    if (v.kind == Value::Kind::Dict) {
        Value out;
        out.kind = Value::Kind::Dict;
        out.dict.reserve(v.dict.size());
        for (const auto& [k, x] : v.dict) out.dict.emplace_back(k, scaleBy(scalar, x, stats));
        return out;
    }
    if (v.kind == Value::Kind::Record) {
        std::vector<std::pair<std::string, Value>> fs;
        fs.reserve(v.rec.size());
        for (const auto& [f, x] : v.rec) fs.emplace_back(f, scaleBy(scalar, x, stats));
        return Value::record(std::move(fs));
    }
    throw EvalError("cannot scale value: " + valueToString(v));
}
}  // namespace

Value ringMul(const Value& a, const Value& b, CostStats* stats) {
    if (isScalarNum(a) && isScalarNum(b)) {
        if (stats) ++stats->arithmeticOps;
        Value x = scalarOf(a), y = scalarOf(b);
        if (x.kind == Value::Kind::Int && y.kind == Value::Kind::Int)
            return Value::integer(x.i * y.i);
        return Value::real(x.asReal() * y.asReal());
    }
    if (isScalarNum(a)) return scaleBy(scalarOf(a), b, stats);
    if (isScalarNum(b)) return scaleBy(scalarOf(b), a, stats);
    if (a.kind == Value::Kind::Record && b.kind == Value::Kind::Record) {
        if (a.rec.size() != b.rec.size())
            throw EvalError("record multiplication with mismatched fields");
        std::vector<std::pair<std::string, Value>> fs;
        fs.reserve(a.rec.size());
        for (std::size_t k = 0; k < a.rec.size(); ++k) {
            const auto& fa = a.rec[k];
            const Value* vb = nullptr;
            if (b.rec[k].first == fa.first) {
                vb = &b.rec[k].second;
            } else {
                for (const auto& fb : b.rec)
                    if (fb.first == fa.first) { vb = &fb.second; break; }
            }
            if (!vb) throw EvalError("record multiplication with mismatched fields");
            fs.emplace_back(fa.first, ringMul(fa.second, *vb, stats));
        }
        return Value::record(std::move(fs));
    }
    throw EvalError("incompatible multiplication operands: " + valueToString(a) + " * " +
                    valueToString(b));
}

Value ringZeroLike(const Value& v) {
    switch (v.kind) {
        case Value::Kind::Int: return Value::integer(0);
        case Value::Kind::Real: return Value::real(0.0);
        case Value::Kind::Bool: return Value::integer(0);
        case Value::Kind::Dict: {
            Value z;
            z.kind = Value::Kind::Dict;
            return z;
        }
        case Value::Kind::Set: {
            Value z;
            z.kind = Value::Kind::Set;
            return z;
        }
        case Value::Kind::Record: {
            std::vector<std::pair<std::string, Value>> fs;
            for (const auto& [f, x] : v.rec) fs.emplace_back(f, ringZeroLike(x));
            return Value::record(std::move(fs));
        }
        default: throw EvalError("no additive identity for value: " + valueToString(v));
    }
}

nlohmann::json valueToJson(const Value& v) {
    using json = nlohmann::json;
    json j;
    switch (v.kind) {
        case Value::Kind::Int: return json(v.i);
        case Value::Kind::Real: return json(v.r);
        case Value::Kind::Bool: return json(v.b);
        case Value::Kind::Str: return json(v.s);
        case Value::Kind::Field: {
            j["field"] = v.s;
            return j;
        }
        case Value::Kind::Record: {
            json o = json::object();
            for (const auto& [f, x] : v.rec) o[f] = valueToJson(x);
            return o;
        }
        case Value::Kind::Variant: {
            j["variant"] = v.s;
            j["value"] = valueToJson(v.rec.front().second);
            return j;
        }
        case Value::Kind::Set: {
            json arr = json::array();
            for (const auto& x : v.set) arr.push_back(valueToJson(x));
            j["set"] = arr;
            return j;
        }
        case Value::Kind::Dict: {
            // Field-keyed dictionaries are the unspecialized representation
            // of records; serialize them alike so results stay comparable
            // across optimization levels.
            bool fieldKeyed = !v.dict.empty();
            for (const auto& [k, x] : v.dict)
                if (k.kind != Value::Kind::Field) {
                    fieldKeyed = false;
                    break;
                }
            if (fieldKeyed) {
                json o = json::object();
                for (const auto& [k, x] : v.dict) o[k.s] = valueToJson(x);
                return o;
            }
            json arr = json::array();
            for (const auto& [k, x] : v.dict) arr.push_back(json::array({valueToJson(k), valueToJson(x)}));
            j["dict"] = arr;
            return j;
        }
    }
    return j;
}

std::string valueToString(const Value& v) { return valueToJson(v).dump(); }

}  // namespace ifaq
