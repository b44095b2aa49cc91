#include "ifaq/interp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ifaq/frontend.hpp"

namespace ifaq {

namespace {

bool isRecordIntDict(const Value& v) {
    if (v.kind != Value::Kind::Dict) return false;
    if (v.baseTuples) return true;
    if (v.dict.empty()) return false;
    for (const auto& [k, x] : v.dict)
        if (k.kind != Value::Kind::Record || x.kind != Value::Kind::Int) return false;
    return true;
}

// A tuple bag is a set of records or a record-keyed dict with integer
// multiplicities; iterating one counts as a scan.
bool isTupleBag(const Value& v) {
    if (v.kind == Value::Kind::Set) {
        if (v.set.empty()) return false;
        for (const auto& x : v.set)
            if (x.kind != Value::Kind::Record) return false;
        return true;
    }
    return isRecordIntDict(v);
}

bool truthy(const Value& v) {
    switch (v.kind) {
        case Value::Kind::Bool: return v.b;
        case Value::Kind::Int: return v.i != 0;
        case Value::Kind::Real: return v.r != 0.0;
        default: throw EvalError("condition is not a boolean");
    }
}

}  // namespace

Value Interpreter::eval(const ExprPtr& e) {
    switch (e->kind) {
        case Expr::Kind::Const:
            switch (e->constant.tag) {
                case Constant::Tag::Int: return Value::integer(e->constant.i);
                case Constant::Tag::Real: return Value::real(e->constant.r);
                case Constant::Tag::Bool: return Value::boolean(e->constant.b);
                case Constant::Tag::String: return Value::str(e->constant.text);
                case Constant::Tag::Field: return Value::field(e->constant.text);
            }
            throw EvalError("bad constant");
        case Expr::Kind::Var: {
            const Value* v = env_.find(e->name);
            if (!v) throw EvalError("unbound variable: " + e->name);
            return *v;
        }
        case Expr::Kind::Add:
            return ringAdd(eval(e->a), eval(e->b), &stats_);
        case Expr::Kind::Mul:
            return ringMul(eval(e->a), eval(e->b), &stats_);
        case Expr::Kind::Neg:
            return ringMul(Value::integer(-1), eval(e->a), &stats_);
        case Expr::Kind::UnOp: {
            Value v = eval(e->a);
            if (!v.isNumeric()) throw EvalError("unary op on non-numeric value");
            ++stats_.arithmeticOps;
            switch (e->uop) {
                case UnOpKind::Sqrt: {
                    double x = v.asReal();
                    if (x < 0) throw EvalError("sqrt of negative number");
                    return Value::real(std::sqrt(x));
                }
                case UnOpKind::Abs:
                    return v.kind == Value::Kind::Int ? Value::integer(std::llabs(v.i))
                                                     : Value::real(std::fabs(v.r));
                case UnOpKind::Ln: {
                    double x = v.asReal();
                    if (x <= 0) throw EvalError("ln of non-positive number");
                    return Value::real(std::log(x));
                }
            }
            throw EvalError("bad unary op");
        }
        case Expr::Kind::BinOp:
            return evalBinOp(e);
        case Expr::Kind::Sum: {
            Value coll = eval(e->a);
            return evalSum(e->name, coll, e->b);
        }
        case Expr::Kind::DictBuild: {
            Value keys = eval(e->a);
            if (keys.kind != Value::Kind::Set)
                throw EvalError("dictionary builder over a non-set");
            if (isTupleBag(keys)) stats_.tuplesScanned += (long long)keys.set.size();
            std::vector<std::pair<Value, Value>> out;
            out.reserve(keys.set.size());
            for (const auto& k : keys.set) {
                env_.push(e->name, k);
                out.emplace_back(k, eval(e->b));
                env_.pop();
                ++stats_.dictInserts;
            }
            return Value::makeDict(std::move(out));
        }
        case Expr::Kind::DictLit: {
            std::vector<std::pair<Value, Value>> out;
            out.reserve(e->pairs.size());
            for (const auto& [ke, ve] : e->pairs) {
                out.emplace_back(eval(ke), eval(ve));
                ++stats_.dictInserts;
            }
            return Value::makeDict(std::move(out));
        }
        case Expr::Kind::SetLit: {
            std::vector<Value> elems;
            elems.reserve(e->items.size());
            for (const auto& it : e->items) elems.push_back(eval(it));
            return Value::makeSet(std::move(elems));
        }
        case Expr::Kind::Dom: {
            Value v = eval(e->a);
            // An empty aggregation collapses to its additive identity; its
            // domain is empty rather than an error, mirroring the default
            // rule for lookups into identity placeholders.
            if (v.isNumeric()) return Value::makeSet({});
            if (v.kind == Value::Kind::Set) return v;
            if (v.kind == Value::Kind::Dict) {
                std::vector<Value> keys;
                keys.reserve(v.dict.size());
                for (const auto& [k, x] : v.dict) keys.push_back(k);
                return Value::makeSet(std::move(keys));
            }
            throw EvalError("dom of non-collection value");
        }
        case Expr::Kind::Lookup:
            return evalLookup(e);
        case Expr::Kind::RecordLit: {
            std::vector<std::pair<std::string, Value>> fs;
            fs.reserve(e->fields.size());
            for (const auto& [f, fe] : e->fields) fs.emplace_back(f, eval(fe));
            return Value::record(std::move(fs));
        }
        case Expr::Kind::VariantLit:
            return Value::variant(e->name, eval(e->a));
        case Expr::Kind::FieldStatic: {
            Value v = eval(e->a);
            // Projecting out of an empty aggregation's additive identity
            // yields the identity, as with Dom and defaulted lookups.
            if (v.isNumeric()) return v;
            if (v.kind == Value::Kind::Record) {
                for (const auto& [f, x] : v.rec)
                    if (f == e->name) return x;
                throw EvalError("record has no field " + e->name);
            }
            if (v.kind == Value::Kind::Variant) {
                if (v.s == e->name) return *v.variantVal();
                throw EvalError("variant tag mismatch: " + v.s + " vs " + e->name);
            }
            throw EvalError("field access on non-record value");
        }
        case Expr::Kind::FieldDyn: {
            Value v = eval(e->a);
            Value f = eval(e->b);
            if (f.kind != Value::Kind::Field)
                throw EvalError("dynamic field selector is not a field value");
            if (v.kind != Value::Kind::Record)
                throw EvalError("field access on non-record value");
            for (const auto& [fn, x] : v.rec)
                if (fn == f.s) return x;
            throw EvalError("record has no field " + f.s);
        }
        case Expr::Kind::Let: {
            Value bound = eval(e->a);
            env_.push(e->name, std::move(bound));
            Value out = eval(e->b);
            env_.pop();
            return out;
        }
        case Expr::Kind::If:
            return truthy(eval(e->a)) ? eval(e->b) : eval(e->c);
    }
    throw EvalError("bad expression kind");
}

Value Interpreter::evalBinOp(const ExprPtr& e) {
    // And/Or short-circuit; the rest are strict.
    if (e->bop == BinOpKind::And) {
        Value a = eval(e->a);
        ++stats_.arithmeticOps;
        return truthy(a) ? Value::boolean(truthy(eval(e->b))) : Value::boolean(false);
    }
    if (e->bop == BinOpKind::Or) {
        Value a = eval(e->a);
        ++stats_.arithmeticOps;
        return truthy(a) ? Value::boolean(true) : Value::boolean(truthy(eval(e->b)));
    }
    Value a = eval(e->a);
    Value b = eval(e->b);
    ++stats_.arithmeticOps;
    switch (e->bop) {
        case BinOpKind::Eq: return Value::boolean(compareValues(a, b) == 0);
        case BinOpKind::Neq: return Value::boolean(compareValues(a, b) != 0);
        case BinOpKind::Lt: return Value::boolean(compareValues(a, b) < 0);
        case BinOpKind::Le: return Value::boolean(compareValues(a, b) <= 0);
        case BinOpKind::Min:
            if (!a.isNumeric() || !b.isNumeric())
                throw EvalError("min of non-numeric values");
            return compareValues(a, b) <= 0 ? a : b;
        case BinOpKind::Div: {
            if (!a.isNumeric() || !b.isNumeric())
                throw EvalError("division of non-numeric values");
            double d = b.asReal();
            if (d == 0.0) throw EvalError("division by zero");
            return Value::real(a.asReal() / d);
        }
        default: throw EvalError("bad binary op");
    }
}

Value Interpreter::evalLookup(const ExprPtr& e) {
    // Probing a named dictionary must not copy it: resolve in place.
    const Value* dp = nullptr;
    Value owned;
    if (e->a->kind == Expr::Kind::Var) {
        dp = env_.find(e->a->name);
        if (!dp) throw EvalError("unbound variable: " + e->a->name);
    } else {
        owned = eval(e->a);
        dp = &owned;
    }
    const Value& d = *dp;
    Value k = eval(e->b);
    // Optimizer-introduced probes may hit an additive-identity placeholder
    // where a child view is absent; fall through to the default.
    if (d.isNumeric() && e->missingDefault) return eval(e->missingDefault);
    if (d.kind == Value::Kind::Record && k.kind == Value::Kind::Field) {
        for (const auto& [f, x] : d.rec)
            if (f == k.s) return x;
        throw EvalError("record has no field " + k.s);
    }
    if (d.kind != Value::Kind::Dict) throw EvalError("lookup into non-dictionary value");
    ++stats_.dictLookups;
    auto it = std::lower_bound(d.dict.begin(), d.dict.end(), k,
                               [](const auto& entry, const Value& key) {
                                   return compareValues(entry.first, key) < 0;
                               });
    if (it != d.dict.end() && compareValues(it->first, k) == 0) return it->second;
    if (e->missingDefault) return eval(e->missingDefault);
    throw EvalError("key not found in dictionary: " + valueToString(k));
}

Value Interpreter::evalSum(const std::string& binder, const Value& collection,
                           const ExprPtr& body, SumMonoid monoid) {
    const std::vector<Value>* elems = nullptr;
    std::vector<Value> keys;
    if (collection.kind == Value::Kind::Set) {
        elems = &collection.set;
    } else if (collection.kind == Value::Kind::Dict) {
        keys.reserve(collection.dict.size());
        for (const auto& [k, x] : collection.dict) keys.push_back(k);
        elems = &keys;
    } else {
        throw EvalError("sum over a non-collection value");
    }
    if (isTupleBag(collection)) stats_.tuplesScanned += (long long)elems->size();

    bool first = true;
    Value acc = Value::integer(0);
    for (const auto& x : *elems) {
        env_.push(binder, x);
        Value v = eval(body);
        env_.pop();
        if (first) {
            acc = std::move(v);
            first = false;
        } else if (monoid == SumMonoid::RingAdd) {
            acc = ringAdd(acc, v, &stats_);
        } else {
            ++stats_.arithmeticOps;
            if (compareValues(v, acc) < 0) acc = std::move(v);
        }
    }
    if (first && monoid == SumMonoid::Min) throw EvalError("min over an empty collection");
    return acc;
}

std::pair<Value, CostStats> Interpreter::run(const Program& p, const IterationPolicy& policy) {
    std::size_t pushed = 0;
    for (const auto& [name, e] : p.prelude) {
        env_.push(name, eval(e));
        ++pushed;
    }
    if (p.loop) {
        Value state = eval(p.loop->init);
        env_.push(p.loop->var, state);
        ++pushed;
        for (long long iter = 0; iter < policy.maxIters; ++iter) {
            if (!truthy(eval(p.loop->cond))) break;
            Value next = eval(p.loop->step);
            ++stats_.loopIterations;
            bool converged =
                policy.epsilon && maxAbsDelta(next, state) < *policy.epsilon;
            state = std::move(next);
            env_.frames[env_.frames.size() - 1].second = state;
            if (converged) break;
        }
    }
    Value out = eval(p.result);
    while (pushed--) env_.pop();
    return {std::move(out), stats_};
}

std::pair<Value, CostStats> eval(const Program& p, const Database& db,
                                 const IterationPolicy& policy) {
    Interpreter in(db);
    return in.run(p, policy);
}

double maxAbsDelta(const Value& a, const Value& b) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    if (a.isNumeric() && b.isNumeric()) return std::fabs(a.asReal() - b.asReal());
    if (a.kind != b.kind) return inf;
    switch (a.kind) {
        case Value::Kind::Bool: return a.b == b.b ? 0.0 : inf;
        case Value::Kind::Str:
        case Value::Kind::Field: return a.s == b.s ? 0.0 : inf;
        case Value::Kind::Record: {
            if (a.rec.size() != b.rec.size()) return inf;
            double d = 0.0;
            for (std::size_t i = 0; i < a.rec.size(); ++i) {
                if (a.rec[i].first != b.rec[i].first) return inf;
                d = std::max(d, maxAbsDelta(a.rec[i].second, b.rec[i].second));
            }
            return d;
        }
        case Value::Kind::Variant:
            if (a.s != b.s) return inf;
            return maxAbsDelta(*a.variantVal(), *b.variantVal());
        case Value::Kind::Set:
            return a == b ? 0.0 : inf;
        case Value::Kind::Dict: {
            double d = 0.0;
            std::size_t ia = 0, ib = 0;
            while (ia < a.dict.size() || ib < b.dict.size()) {
                if (ib == b.dict.size()) {
                    d = std::max(d, maxAbsDelta(a.dict[ia].second,
                                                ringZeroLike(a.dict[ia].second)));
                    ++ia;
                } else if (ia == a.dict.size()) {
                    d = std::max(d, maxAbsDelta(b.dict[ib].second,
                                                ringZeroLike(b.dict[ib].second)));
                    ++ib;
                } else {
                    int c = compareValues(a.dict[ia].first, b.dict[ib].first);
                    if (c == 0) {
                        d = std::max(d, maxAbsDelta(a.dict[ia].second, b.dict[ib].second));
                        ++ia;
                        ++ib;
                    } else if (c < 0) {
                        d = std::max(d, maxAbsDelta(a.dict[ia].second,
                                                    ringZeroLike(a.dict[ia].second)));
                        ++ia;
                    } else {
                        d = std::max(d, maxAbsDelta(b.dict[ib].second,
                                                    ringZeroLike(b.dict[ib].second)));
                        ++ib;
                    }
                }
            }
            return d;
        }
        default: return inf;
    }
}

}  // namespace ifaq
