#include "ifaq/exec.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <sstream>

#include "ifaq/frontend.hpp"
#include "ifaq/ir_ops.hpp"

namespace ifaq {

const char* layoutName(LayoutKind k) {
    switch (k) {
        case LayoutKind::HashDict: return "hash-dict";
        case LayoutKind::SortedDict: return "sorted-dict";
        case LayoutKind::SortedTrie: return "sorted-trie";
        case LayoutKind::ArrayRelation: return "array";
    }
    return "?";
}

const char* probeName(ProbeKind k) {
    switch (k) {
        case ProbeKind::Hash: return "hash";
        case ProbeKind::Binary: return "binary";
        case ProbeKind::Merge: return "merge";
        case ProbeKind::Iterated: return "iterated";
    }
    return "?";
}

namespace {

bool allMultiplicityOne(const Value& rel) {
    if (rel.kind != Value::Kind::Dict) return false;
    for (const auto& [k, m] : rel.dict)
        if (!(m.kind == Value::Kind::Int && m.i == 1)) return false;
    return true;
}

// Recognizes the nested single-entry dict literal a trie build emits:
// {{ x.a1 -> {{ x.a2 -> ... -> 1 }} }}. Returns the level attributes.
bool trieShape(const ExprPtr& e, const std::string& binder,
               std::vector<std::string>& order) {
    if (e->kind != Expr::Kind::DictLit || e->pairs.size() != 1) return false;
    const auto& [k, v] = e->pairs.front();
    if (k->kind != Expr::Kind::FieldStatic || k->a->kind != Expr::Kind::Var ||
        k->a->name != binder)
        return false;
    order.push_back(k->name);
    if (v->kind == Expr::Kind::DictLit) return trieShape(v, binder, order);
    return true;
}

struct Planner {
    const Schema& schema;
    PhysicalPlan& plan;

    struct SumCtx {
        const Expr* site;
        ExprPtr domOperand;  // X in sum(b in dom(X)), null otherwise
        std::string binder;
    };
    std::vector<SumCtx> sums;

    bool sortedLayout(const std::string& name) const {
        auto it = plan.layouts.find(name);
        return it != plan.layouts.end() && (it->second.kind == LayoutKind::SortedDict ||
                                            it->second.kind == LayoutKind::SortedTrie);
    }

    void classify(const ExprPtr& e) {
        const PlanOptions& o = plan.options;
        // Self-probe: the lookup fetches the entry of the collection the
        // enclosing summation is iterating.
        if (o.sortedMerge && e->b->kind == Expr::Kind::Var) {
            for (auto it = sums.rbegin(); it != sums.rend(); ++it) {
                if (it->domOperand && it->binder == e->b->name &&
                    exprEqual(e->a, it->domOperand)) {
                    plan.probes[e.get()] = ProbeKind::Iterated;
                    plan.probeSum[e.get()] = it->site;
                    plan.probeList.emplace_back(printExpr(e->a), ProbeKind::Iterated);
                    return;
                }
            }
        }
        // Merge: single-attribute record key over an iteration binder,
        // probing a sorted collection.
        if (o.sortedMerge && e->a->kind == Expr::Kind::Var &&
            sortedLayout(e->a->name) && e->b->kind == Expr::Kind::RecordLit &&
            e->b->fields.size() == 1 &&
            e->b->fields[0].second->kind == Expr::Kind::Var) {
            const std::string& kv = e->b->fields[0].second->name;
            for (const auto& sc : sums)
                if (sc.binder == kv) {
                    plan.probes[e.get()] = ProbeKind::Merge;
                    plan.probeList.emplace_back(e->a->name, ProbeKind::Merge);
                    return;
                }
        }
        if (e->a->kind == Expr::Kind::Var && plan.layouts.count(e->a->name)) {
            ProbeKind k = sortedLayout(e->a->name) ? ProbeKind::Binary : ProbeKind::Hash;
            plan.probes[e.get()] = k;
            plan.probeList.emplace_back(e->a->name, k);
        }
        // Anonymous lookups (loop state, record probes) default to hash.
    }

    void walk(const ExprPtr& e) {
        if (e->kind == Expr::Kind::Sum) {
            walk(e->a);
            ExprPtr domOp = e->a->kind == Expr::Kind::Dom ? e->a->a : nullptr;
            sums.push_back({e.get(), domOp, e->name});
            walk(e->b);
            sums.pop_back();
            return;
        }
        if (e->kind == Expr::Kind::Lookup) classify(e);
        for (const auto& k : children(e)) walk(k);
    }
};

}  // namespace

PhysicalPlan chooseLayouts(const Program& p, const Schema& s, const Database& db,
                           const PlanOptions& opts) {
    PhysicalPlan plan;
    plan.program = p;
    plan.options = opts;

    for (const auto& r : s.relations) {
        LayoutChoice lc;
        auto it = db.find(r.name);
        if (opts.arrayRelation && it != db.end() && allMultiplicityOne(it->second))
            lc.kind = LayoutKind::ArrayRelation;
        else
            lc.kind = LayoutKind::HashDict;
        plan.layouts[r.name] = lc;
    }

    for (const auto& [name, rhs] : p.prelude) {
        if (rhs->kind != Expr::Kind::Sum || rhs->b->kind != Expr::Kind::Mul) continue;
        auto fs = flattenMul(rhs->b);
        if (fs.size() != 2) continue;
        const ExprPtr& payload = fs[1];
        LayoutChoice lc;
        std::vector<std::string> order;
        if (trieShape(payload, rhs->name, order) && !order.empty()) {
            lc.kind = opts.sortedTrie ? LayoutKind::SortedTrie : LayoutKind::HashDict;
            lc.trieOrder = std::move(order);
            plan.layouts[name] = lc;
            continue;
        }
        if (payload->kind == Expr::Kind::DictLit && payload->pairs.size() == 1 &&
            payload->pairs[0].first->kind == Expr::Kind::RecordLit) {
            lc.kind = LayoutKind::SortedDict;
            lc.singleFieldKeyRemoved = payload->pairs[0].first->fields.size() == 1;
            lc.recordFlattened =
                payload->pairs[0].second->kind == Expr::Kind::RecordLit ||
                (payload->pairs[0].second->kind == Expr::Kind::Let);
            plan.layouts[name] = lc;
        }
    }

    Planner pl{s, plan};
    for (const auto& [n, e] : p.prelude) pl.walk(e);
    if (p.loop) {
        pl.walk(p.loop->init);
        pl.walk(p.loop->cond);
        pl.walk(p.loop->step);
    }
    pl.walk(p.result);

    // Sanity: merge probing expects a sorted producer.
    for (const auto& [site, kind] : plan.probes) {
        if (kind != ProbeKind::Merge) continue;
        const Expr* l = site;
        if (l->a->kind == Expr::Kind::Var && !pl.sortedLayout(l->a->name))
            throw PlanError("merge probe into unsorted collection " + l->a->name);
    }
    return plan;
}

namespace {

bool isRecordIntDict(const Value& v) {
    if (v.kind != Value::Kind::Dict) return false;
    if (v.baseTuples) return true;
    if (v.dict.empty()) return false;
    for (const auto& [k, x] : v.dict)
        if (k.kind != Value::Kind::Record || x.kind != Value::Kind::Int) return false;
    return true;
}

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

struct ValueLess {
    bool operator()(const Value& a, const Value& b) const {
        return compareValues(a, b) < 0;
    }
};

// Binding stack with reference stability: the engine iterates collections in
// place, so values resolved from here must survive later pushes. A deque
// keeps existing elements pinned.
struct EngineEnv {
    std::deque<std::pair<std::string, Value>> frames;
    const Database* db = nullptr;

    const Value* find(const std::string& name) const {
        for (auto it = frames.rbegin(); it != frames.rend(); ++it)
            if (it->first == name) return &it->second;
        if (db) {
            auto d = db->find(name);
            if (d != db->end()) return &d->second;
        }
        return nullptr;
    }
    void push(const std::string& name, Value v) {
        frames.emplace_back(name, std::move(v));
    }
    void pop() { frames.pop_back(); }
};

// The layout-aware evaluator. Same observable semantics as the interpreter;
// differs in accumulation strategy and probe counting.
class Engine {
public:
    Engine(const PhysicalPlan& plan, const Database& db) : plan_(plan) {
        env_.db = &db;
    }

    std::pair<Value, CostStats> run(const IterationPolicy& policy) {
        const Program& p = plan_.program;
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

private:
    struct Scope {
        const Expr* site;
        const Value* dict = nullptr;  // set when iterating a dictionary
        std::size_t idx = 0;
        std::map<const Expr*, std::size_t> cursors;
        std::map<const Expr*, Value> lastKeys;
    };

    const PhysicalPlan& plan_;
    EngineEnv env_;
    CostStats stats_;
    std::vector<Scope> scopes_;

    // Resolves an expression to a value without copying named collections.
    const Value* evalRef(const ExprPtr& e, Value& owned) {
        if (e->kind == Expr::Kind::Var) {
            const Value* v = env_.find(e->name);
            if (!v) throw EvalError("unbound variable: " + e->name);
            return v;
        }
        owned = eval(e);
        return &owned;
    }

    Value eval(const ExprPtr& e) {
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
                        return v.kind == Value::Kind::Int
                                   ? Value::integer(std::llabs(v.i))
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
            case Expr::Kind::Sum:
                return evalSum(e);
            case Expr::Kind::DictBuild: {
                Value keys = eval(e->a);
                if (keys.kind != Value::Kind::Set)
                    throw EvalError("dictionary builder over a non-set");
                if (isTupleBag(keys))
                    stats_.tuplesScanned += (long long)keys.set.size();
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
                // Identity placeholder: the domain of an empty aggregation.
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
                // Identity placeholder, as in the Dom case.
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

    Value evalBinOp(const ExprPtr& e) {
        if (e->bop == BinOpKind::And) {
            Value a = eval(e->a);
            ++stats_.arithmeticOps;
            return truthy(a) ? Value::boolean(truthy(eval(e->b)))
                             : Value::boolean(false);
        }
        if (e->bop == BinOpKind::Or) {
            Value a = eval(e->a);
            ++stats_.arithmeticOps;
            return truthy(a) ? Value::boolean(true)
                             : Value::boolean(truthy(eval(e->b)));
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

    Value evalLookup(const ExprPtr& e) {
        auto probeIt = plan_.probes.find(e.get());
        if (probeIt != plan_.probes.end() && probeIt->second == ProbeKind::Iterated) {
            const Expr* sumSite = plan_.probeSum.at(e.get());
            for (auto it = scopes_.rbegin(); it != scopes_.rend(); ++it)
                if (it->site == sumSite && it->dict)
                    return it->dict->dict[it->idx].second;
            // The annotated summation is not iterating a dictionary here;
            // fall through to a counted probe.
        }

        Value owned;
        const Value* dp = evalRef(e->a, owned);
        const Value& d = *dp;
        Value k = eval(e->b);
        if (d.isNumeric() && e->missingDefault) return eval(e->missingDefault);
        if (d.kind == Value::Kind::Record && k.kind == Value::Kind::Field) {
            for (const auto& [f, x] : d.rec)
                if (f == k.s) return x;
            throw EvalError("record has no field " + k.s);
        }
        if (d.kind != Value::Kind::Dict)
            throw EvalError("lookup into non-dictionary value");

        if (probeIt != plan_.probes.end() && probeIt->second == ProbeKind::Merge &&
            !scopes_.empty()) {
            Scope& sc = scopes_.back();
            std::size_t& cur = sc.cursors[e.get()];
            if (plan_.options.checkMergeMonotonic) {
                auto last = sc.lastKeys.find(e.get());
                if (last != sc.lastKeys.end() && compareValues(k, last->second) < 0)
                    throw PlanError("merge cursor moved backward");
                sc.lastKeys[e.get()] = k;
            }
            while (cur < d.dict.size() && compareValues(d.dict[cur].first, k) < 0)
                ++cur;
            if (cur < d.dict.size() && compareValues(d.dict[cur].first, k) == 0)
                return d.dict[cur].second;
            if (e->missingDefault) return eval(e->missingDefault);
            throw EvalError("key not found in dictionary: " + valueToString(k));
        }

        ++stats_.dictLookups;
        auto it = std::lower_bound(d.dict.begin(), d.dict.end(), k,
                                   [](const auto& entry, const Value& key) {
                                       return compareValues(entry.first, key) < 0;
                                   });
        if (it != d.dict.end() && compareValues(it->first, k) == 0) return it->second;
        if (e->missingDefault) return eval(e->missingDefault);
        throw EvalError("key not found in dictionary: " + valueToString(k));
    }

    Value evalSum(const ExprPtr& e) {
        // Iterate dictionaries in place: sum(x in dom(D)) walks D's entries
        // directly, which keeps the payload at hand for iterated probes.
        Value owned;
        bool viaDom = e->a->kind == Expr::Kind::Dom;
        const Value* collp = evalRef(viaDom ? e->a->a : e->a, owned);
        Value emptyDom;
        if (viaDom && collp->isNumeric()) {
            // Same identity-placeholder rule as the Dom case above.
            emptyDom = Value::makeSet({});
            collp = &emptyDom;
        }
        const Value& coll = *collp;
        if (coll.kind != Value::Kind::Set && coll.kind != Value::Kind::Dict)
            throw EvalError(viaDom ? "dom of non-collection value"
                                   : "sum over a non-collection value");

        // Scan accounting matches the plain evaluator: iterating a tuple bag,
        // or the key set of a record-keyed dictionary, counts its size.
        bool countScan;
        if (coll.kind == Value::Kind::Dict && viaDom) {
            countScan = !coll.dict.empty();
            for (const auto& [k, x] : coll.dict)
                if (k.kind != Value::Kind::Record) {
                    countScan = false;
                    break;
                }
        } else {
            countScan = isTupleBag(coll);
        }

        // Nested sums grow the scope stack; address our frame by index.
        std::size_t self = scopes_.size();
        scopes_.push_back({e.get()});

        bool first = true;
        Value acc = Value::integer(0);
        // Mutable fold for dictionary-valued bodies: one insert per key.
        std::map<Value, Value, ValueLess> dictAcc;
        bool dictMode = false;

        auto feed = [&](Value v) {
            if (first && v.kind == Value::Kind::Dict) {
                dictMode = true;
                first = false;
            }
            if (dictMode) {
                if (v.kind != Value::Kind::Dict)
                    throw EvalError("incompatible addition operands in sum");
                for (auto& [k, x] : v.dict) {
                    auto [it, inserted] = dictAcc.try_emplace(k, x);
                    if (inserted)
                        ++stats_.dictInserts;
                    else
                        it->second = ringAdd(it->second, x, &stats_);
                }
                return;
            }
            if (first) {
                acc = std::move(v);
                first = false;
            } else {
                acc = ringAdd(acc, std::move(v), &stats_);
            }
        };

        if (coll.kind == Value::Kind::Set) {
            if (countScan) stats_.tuplesScanned += (long long)coll.set.size();
            for (std::size_t i = 0; i < coll.set.size(); ++i) {
                scopes_[self].idx = i;
                env_.push(e->name, coll.set[i]);
                Value v = eval(e->b);
                env_.pop();
                feed(std::move(v));
            }
        } else {
            if (countScan) stats_.tuplesScanned += (long long)coll.dict.size();
            scopes_[self].dict = &coll;
            for (std::size_t i = 0; i < coll.dict.size(); ++i) {
                scopes_[self].idx = i;
                env_.push(e->name, coll.dict[i].first);
                Value v = eval(e->b);
                env_.pop();
                feed(std::move(v));
            }
        }
        scopes_.pop_back();

        if (dictMode) {
            std::vector<std::pair<Value, Value>> out(dictAcc.begin(), dictAcc.end());
            return Value::makeDict(std::move(out));
        }
        return acc;
    }
};

}  // namespace

std::pair<Value, CostStats> execute(const PhysicalPlan& plan, const Database& db,
                                    const IterationPolicy& policy) {
    Engine en(plan, db);
    return en.run(policy);
}

std::string explain(const PhysicalPlan& plan) {
    std::ostringstream os;
    bool any = false;
    for (const auto& [name, rhs] : plan.program.prelude) {
        if (rhs->kind != Expr::Kind::Sum) continue;
        auto it = plan.layouts.find(name);
        os << "scan " << name << ": layout=";
        if (it == plan.layouts.end()) {
            os << "hash-dict";
        } else {
            os << layoutName(it->second.kind);
            if (!it->second.trieOrder.empty()) {
                os << '(';
                for (std::size_t i = 0; i < it->second.trieOrder.size(); ++i)
                    os << (i ? "," : "") << it->second.trieOrder[i];
                os << ')';
            }
            if (it->second.singleFieldKeyRemoved) os << " single-field-key";
            if (it->second.recordFlattened) os << " flattened-records";
        }
        os << " accumulation=mutable-fold\n";
        any = true;
    }
    for (const auto& [what, kind] : plan.probeList) {
        os << "probe " << what << ": " << probeName(kind) << "\n";
        any = true;
    }
    if (!any) return "no operators\n";
    return os.str();
}

}  // namespace ifaq
