#include "ifaq/rewrite.hpp"

#include <algorithm>
#include <functional>
#include <set>

#include "json.hpp"

#include "ifaq/frontend.hpp"
#include "ifaq/ir_ops.hpp"

namespace ifaq {

std::string RewriteTrace::toJsonLines() const {
    std::string out;
    for (const auto& s : steps) {
        nlohmann::ordered_json j;
        j["pass"] = s.pass;
        j["rule"] = s.rule;
        j["path"] = s.path;
        j["before"] = s.before;
        j["after"] = s.after;
        out += j.dump();
        out += '\n';
    }
    return out;
}

namespace {

// Shared driver state for one pass over one expression.
struct Rw {
    RewriteTrace* trace = nullptr;
    const char* pass = "";
    std::string path;
    long long budget = 0;
    bool changed = false;

    ExprPtr hit(const char* rule, const ExprPtr& before, ExprPtr after) {
        changed = true;
        --budget;
        if (trace)
            trace->steps.push_back({pass, rule, path, printExpr(before), printExpr(after)});
        return after;
    }
    bool exhausted() const { return budget <= 0; }
};

long long budgetFor(const ExprPtr& e) { return 64 * (long long)exprSize(e) + 256; }

using LocalRule = std::function<ExprPtr(const ExprPtr&, Rw&)>;

ExprPtr bottomUp(const ExprPtr& e, Rw& rw, const LocalRule& local) {
    auto kids = children(e);
    bool kidChanged = false;
    for (auto& k : kids) {
        ExprPtr t = bottomUp(k, rw, local);
        if (t != k) kidChanged = true;
        k = t;
    }
    ExprPtr cur = kidChanged ? rebuild(e, kids) : e;
    while (!rw.exhausted()) {
        ExprPtr t = local(cur, rw);
        if (t == cur) break;
        cur = t;
    }
    return cur;
}

ExprPtr runFix(ExprPtr e, Rw& rw, const LocalRule& local) {
    for (;;) {
        rw.changed = false;
        e = bottomUp(e, rw, local);
        if (!rw.changed || rw.exhausted()) return e;
    }
}

bool mentions(const ExprPtr& e, const std::string& name) {
    return freeVars(e).count(name) != 0;
}

bool isConstInt(const ExprPtr& e, long long v) {
    return e->kind == Expr::Kind::Const && e->constant.tag == Constant::Tag::Int &&
           e->constant.i == v;
}

bool isFieldConst(const ExprPtr& e) {
    return e->kind == Expr::Kind::Const && e->constant.tag == Constant::Tag::Field;
}

int freshCounter = 0;
std::string freshBinder(const std::string& base) {
    return base + "_r" + std::to_string(++freshCounter);
}

// ---------------------------------------------------------------- normalize

ExprPtr normalizeRule(const ExprPtr& e, Rw& rw) {
    if (e->kind == Expr::Kind::Neg) {
        if (e->a->kind == Expr::Kind::Neg)
            return rw.hit("neg-neg", e, e->a->a);
        if (e->a->kind == Expr::Kind::Add)
            return rw.hit("neg-add", e, add(neg(e->a->a), neg(e->a->b)));
    }
    if (e->kind == Expr::Kind::Mul) {
        auto fs = flattenMul(e);
        // Pull negations out of products.
        bool negOdd = false;
        bool anyNeg = false;
        for (auto& f : fs)
            if (f->kind == Expr::Kind::Neg) {
                anyNeg = true;
                negOdd = !negOdd;
                f = f->a;
            }
        if (anyNeg) {
            ExprPtr m = rebuildMul(fs);
            return rw.hit("mul-neg", e, negOdd ? neg(m) : m);
        }
        // Distribute over the first additive factor.
        for (std::size_t i = 0; i < fs.size(); ++i) {
            if (fs[i]->kind == Expr::Kind::Add) {
                auto terms = flattenAdd(fs[i]);
                std::vector<ExprPtr> sum;
                for (const auto& t : terms) {
                    auto copy = fs;
                    copy[i] = t;
                    sum.push_back(rebuildMul(copy));
                }
                return rw.hit("distribute", e, rebuildAdd(sum));
            }
        }
        // Push the factors that follow a summation into it.
        for (std::size_t i = 0; i + 1 < fs.size(); ++i) {
            if (fs[i]->kind == Expr::Kind::Sum) {
                std::vector<ExprPtr> tail(fs.begin() + i + 1, fs.end());
                ExprPtr tailM = rebuildMul(tail);
                ExprPtr s = fs[i];
                std::string b = s->name;
                ExprPtr body = s->b;
                if (mentions(tailM, b)) {
                    std::string nb = freshBinder(b);
                    body = substitute(body, b, var(nb));
                    b = nb;
                }
                ExprPtr newSum = sum(b, s->a, mul(body, tailM));
                std::vector<ExprPtr> head(fs.begin(), fs.begin() + i);
                head.push_back(newSum);
                return rw.hit("push-into-sum", e, rebuildMul(head));
            }
        }
    }
    if (e->kind == Expr::Kind::Sum) {
        if (e->b->kind == Expr::Kind::Add)
            return rw.hit("sum-linearity", e,
                          add(sum(e->name, e->a, e->b->a), sum(e->name, e->a, e->b->b)));
        if (e->b->kind == Expr::Kind::Neg)
            return rw.hit("sum-neg", e, neg(sum(e->name, e->a, e->b->a)));
    }
    return e;
}

// ------------------------------------------------------------- scheduling

std::optional<long long> estimate(const ExprPtr& coll, const CardEnv& env) {
    switch (coll->kind) {
        case Expr::Kind::SetLit:
            return (long long)coll->items.size();
        case Expr::Kind::DictLit:
            return (long long)coll->pairs.size();
        case Expr::Kind::Var: {
            auto it = env.setSize.find(coll->name);
            if (it != env.setSize.end()) return it->second;
            return std::nullopt;
        }
        case Expr::Kind::Dom: {
            if (coll->a->kind == Expr::Kind::Var) {
                auto it = env.dictSize.find(coll->a->name);
                if (it != env.dictSize.end()) return it->second;
            }
            return estimate(coll->a, env);
        }
        default:
            return std::nullopt;
    }
}

ExprPtr scheduleRule(const ExprPtr& e, Rw& rw, const CardEnv& env) {
    if (e->kind != Expr::Kind::Sum) return e;
    auto fs = flattenMul(e->b);
    if (fs.empty() || fs.back()->kind != Expr::Kind::Sum) return e;
    ExprPtr inner = fs.back();
    auto outerEst = estimate(e->a, env);
    auto innerEst = estimate(inner->a, env);
    if (!outerEst || !innerEst || *outerEst <= *innerEst) return e;
    if (mentions(inner->a, e->name)) return e;          // inner domain depends on outer var
    if (mentions(e->a, inner->name)) return e;          // capture (cannot happen when renamed)
    std::vector<ExprPtr> pre(fs.begin(), fs.end() - 1);
    pre.push_back(inner->b);
    ExprPtr swapped = sum(inner->name, inner->a, sum(e->name, e->a, rebuildMul(pre)));
    return rw.hit("swap-loops", e, swapped);
}

// ------------------------------------------------------------- factorize

ExprPtr factorizeRule(const ExprPtr& e, Rw& rw) {
    if (e->kind == Expr::Kind::Sum) {
        auto fs = flattenMul(e->b);
        std::vector<ExprPtr> hoisted, kept;
        for (const auto& f : fs) {
            if (!mentions(f, e->name) && !isConstInt(f, 1))
                hoisted.push_back(f);
            else
                kept.push_back(f);
        }
        if (!hoisted.empty()) {
            hoisted.push_back(sum(e->name, e->a, rebuildMul(kept)));
            return rw.hit("hoist-from-sum", e, rebuildMul(hoisted));
        }
    }
    if (e->kind == Expr::Kind::Add) {
        auto terms = flattenAdd(e);
        if (terms.size() < 2) return e;
        struct Term {
            bool negd;
            std::vector<ExprPtr> fs;
        };
        std::vector<Term> ts;
        for (const auto& t : terms) {
            bool n = t->kind == Expr::Kind::Neg;
            ts.push_back({n, flattenMul(n ? t->a : t)});
        }
        // Find the first factor shared (exprEqual) by at least two terms.
        // Constants are not candidates: factoring them out of themselves
        // (1 + 1 -> 1 * (1 + 1)) diverges, and folding them is partial
        // evaluation's job anyway.
        for (std::size_t i = 0; i < ts.size(); ++i) {
            for (const auto& cand : ts[i].fs) {
                if (cand->kind == Expr::Kind::Const) continue;
                std::vector<std::size_t> with;
                for (std::size_t j = 0; j < ts.size(); ++j)
                    for (const auto& f : ts[j].fs)
                        if (exprEqual(f, cand)) {
                            with.push_back(j);
                            break;
                        }
                if (with.size() < 2) continue;
                std::vector<ExprPtr> residuals;
                for (std::size_t j : with) {
                    auto fs = ts[j].fs;
                    for (auto it = fs.begin(); it != fs.end(); ++it)
                        if (exprEqual(*it, cand)) {
                            fs.erase(it);
                            break;
                        }
                    ExprPtr r = rebuildMul(fs);
                    residuals.push_back(ts[j].negd ? neg(r) : r);
                }
                ExprPtr grouped = mul(cand, rebuildAdd(residuals));
                std::vector<ExprPtr> rest;
                bool placed = false;
                std::set<std::size_t> withSet(with.begin(), with.end());
                for (std::size_t j = 0; j < ts.size(); ++j) {
                    if (withSet.count(j)) {
                        if (!placed) {
                            rest.push_back(grouped);
                            placed = true;
                        }
                        continue;
                    }
                    ExprPtr r = rebuildMul(ts[j].fs);
                    rest.push_back(ts[j].negd ? neg(r) : r);
                }
                return rw.hit("common-factor", e, rebuildAdd(rest));
            }
        }
    }
    return e;
}

// --------------------------------------------------------- static memoization

struct StaticBinder {
    std::string name;
    ExprPtr coll;
};

bool isStaticColl(const ExprPtr& c, const std::set<std::string>& staticSets) {
    if (c->kind == Expr::Kind::SetLit) return true;
    return c->kind == Expr::Kind::Var && staticSets.count(c->name) != 0;
}

struct Memoizer {
    const std::set<std::string>& staticSets;
    NameSupply& supply;
    Rw& rw;
    std::vector<std::pair<std::string, ExprPtr>> lets;

    ExprPtr walk(const ExprPtr& e, std::vector<StaticBinder>& stack,
                 std::set<std::string>& forbidden) {
        bool staticLoop = (e->kind == Expr::Kind::Sum || e->kind == Expr::Kind::DictBuild) &&
                          isStaticColl(e->a, staticSets);
        if (staticLoop) {
            stack.push_back({e->name, e->a});
            ExprPtr body = walk(e->b, stack, forbidden);
            stack.pop_back();
            return body == e->b ? e : rebuild(e, {e->a, body});
        }
        if (e->kind == Expr::Kind::Sum && !stack.empty()) {
            auto fv = freeVars(e);
            bool bad = false;
            for (const auto& v : fv)
                if (forbidden.count(v)) bad = true;
            if (!bad) {
                std::vector<StaticBinder> used;
                for (const auto& sb : stack)
                    if (fv.count(sb.name)) used.push_back(sb);
                std::string z = supply.fresh("m");
                ExprPtr rhs = e;
                for (auto it = used.rbegin(); it != used.rend(); ++it)
                    rhs = dictBuild(it->name, it->coll, rhs);
                lets.emplace_back(z, rhs);
                ExprPtr repl = var(z);
                for (const auto& sb : used) repl = lookup(repl, var(sb.name));
                return rw.hit("memoize", e, repl);
            }
        }
        // Any other binder blocks memoization of sums mentioning it.
        if (e->kind == Expr::Kind::Sum || e->kind == Expr::Kind::DictBuild ||
            e->kind == Expr::Kind::Let) {
            ExprPtr a = walk(e->a, stack, forbidden);
            bool inserted = forbidden.insert(e->name).second;
            ExprPtr b = walk(e->b, stack, forbidden);
            if (inserted) forbidden.erase(e->name);
            if (a == e->a && b == e->b) return e;
            if (e->kind == Expr::Kind::Let) return let(e->name, a, b);
            return rebuild(e, {a, b});
        }
        auto kids = children(e);
        bool ch = false;
        for (auto& k : kids) {
            ExprPtr t = walk(k, stack, forbidden);
            if (t != k) ch = true;
            k = t;
        }
        return ch ? rebuild(e, kids) : e;
    }
};

// Finds maximal static-loop nests and wraps the generated lets around them.
ExprPtr memoizeTop(const ExprPtr& e, const std::set<std::string>& staticSets,
                   NameSupply& supply, std::set<std::string>& forbidden, Rw& rw) {
    if ((e->kind == Expr::Kind::Sum || e->kind == Expr::Kind::DictBuild) &&
        isStaticColl(e->a, staticSets)) {
        Memoizer m{staticSets, supply, rw, {}};
        std::vector<StaticBinder> stack;
        ExprPtr inner = m.walk(e, stack, forbidden);
        for (auto it = m.lets.rbegin(); it != m.lets.rend(); ++it)
            inner = let(it->first, it->second, inner);
        return inner;
    }
    auto kids = children(e);
    bool ch = false;
    std::set<std::string> forb = forbidden;
    if (e->kind == Expr::Kind::Sum || e->kind == Expr::Kind::DictBuild ||
        e->kind == Expr::Kind::Let)
        forb.insert(e->name);
    for (std::size_t i = 0; i < kids.size(); ++i) {
        // The binder is not in scope in the collection / bound expression.
        auto& scope = (i == 0 && (e->kind == Expr::Kind::Sum ||
                                  e->kind == Expr::Kind::DictBuild ||
                                  e->kind == Expr::Kind::Let))
                          ? forbidden
                          : forb;
        ExprPtr t = memoizeTop(kids[i], staticSets, supply, scope, rw);
        if (t != kids[i]) ch = true;
        kids[i] = t;
    }
    return ch ? rebuild(e, kids) : e;
}

std::set<std::string> staticSetVars(const Program& p, const Schema& s) {
    std::set<std::string> out;
    for (const auto& [name, attrs] : s.featureSets) out.insert(name);
    for (const auto& [name, rhs] : p.prelude)
        if (rhs->kind == Expr::Kind::SetLit) out.insert(name);
    return out;
}

// ----------------------------------------------------------------- LICM

ExprPtr licmRule(const ExprPtr& e, Rw& rw) {
    if ((e->kind == Expr::Kind::Sum || e->kind == Expr::Kind::DictBuild) &&
        e->b->kind == Expr::Kind::Let && !mentions(e->b->a, e->name)) {
        const ExprPtr& l = e->b;
        return rw.hit("let-out-of-loop", e,
                      let(l->name, l->a, rebuild(e, {e->a, l->b})));
    }
    return e;
}

// ------------------------------------------------------------ partial eval

ExprPtr foldConst(const ExprPtr& e) {
    auto isConst = [](const ExprPtr& x) { return x->kind == Expr::Kind::Const; };
    auto numVal = [](const ExprPtr& x) -> double {
        const Constant& c = x->constant;
        if (c.tag == Constant::Tag::Int) return double(c.i);
        if (c.tag == Constant::Tag::Real) return c.r;
        if (c.tag == Constant::Tag::Bool) return c.b ? 1.0 : 0.0;
        return 0.0;
    };
    auto numeric = [](const ExprPtr& x) {
        auto t = x->constant.tag;
        return t == Constant::Tag::Int || t == Constant::Tag::Real ||
               t == Constant::Tag::Bool;
    };
    auto bothInt = [](const ExprPtr& x, const ExprPtr& y) {
        auto ok = [](const ExprPtr& v) {
            return v->constant.tag == Constant::Tag::Int ||
                   v->constant.tag == Constant::Tag::Bool;
        };
        return ok(x) && ok(y);
    };
    auto intVal = [](const ExprPtr& x) -> long long {
        return x->constant.tag == Constant::Tag::Bool ? (x->constant.b ? 1 : 0)
                                                      : x->constant.i;
    };
    switch (e->kind) {
        case Expr::Kind::Add:
            if (isConst(e->a) && isConst(e->b) && numeric(e->a) && numeric(e->b)) {
                if (bothInt(e->a, e->b)) return intLit(intVal(e->a) + intVal(e->b));
                return realLit(numVal(e->a) + numVal(e->b));
            }
            if (isConstInt(e->a, 0)) return e->b;
            if (isConstInt(e->b, 0)) return e->a;
            break;
        case Expr::Kind::Mul:
            if (isConst(e->a) && isConst(e->b) && numeric(e->a) && numeric(e->b)) {
                if (bothInt(e->a, e->b)) return intLit(intVal(e->a) * intVal(e->b));
                return realLit(numVal(e->a) * numVal(e->b));
            }
            if (isConstInt(e->a, 1)) return e->b;
            if (isConstInt(e->b, 1)) return e->a;
            break;
        case Expr::Kind::Neg:
            if (isConst(e->a) && numeric(e->a)) {
                if (e->a->constant.tag == Constant::Tag::Real)
                    return realLit(-e->a->constant.r);
                return intLit(-intVal(e->a));
            }
            break;
        case Expr::Kind::If:
            if (isConst(e->a) && e->a->constant.tag == Constant::Tag::Bool)
                return e->a->constant.b ? e->b : e->c;
            break;
        case Expr::Kind::BinOp: {
            if (!isConst(e->a) || !isConst(e->b)) break;
            const Constant& ca = e->a->constant;
            const Constant& cb = e->b->constant;
            bool comparable = ca.tag == cb.tag || (numeric(e->a) && numeric(e->b));
            if (!comparable) break;
            auto cmp = [&]() -> int {
                if (numeric(e->a)) {
                    double x = numVal(e->a), y = numVal(e->b);
                    return x < y ? -1 : x > y ? 1 : 0;
                }
                if (ca.tag == Constant::Tag::String || ca.tag == Constant::Tag::Field)
                    return ca.text.compare(cb.text);
                return 0;
            };
            switch (e->bop) {
                case BinOpKind::Eq: return boolLit(cmp() == 0);
                case BinOpKind::Neq: return boolLit(cmp() != 0);
                case BinOpKind::Lt: return boolLit(cmp() < 0);
                case BinOpKind::Le: return boolLit(cmp() <= 0);
                case BinOpKind::And:
                    if (ca.tag == Constant::Tag::Bool && cb.tag == Constant::Tag::Bool)
                        return boolLit(ca.b && cb.b);
                    break;
                case BinOpKind::Or:
                    if (ca.tag == Constant::Tag::Bool && cb.tag == Constant::Tag::Bool)
                        return boolLit(ca.b || cb.b);
                    break;
                case BinOpKind::Min:
                    if (numeric(e->a) && numeric(e->b)) return cmp() <= 0 ? e->a : e->b;
                    break;
                case BinOpKind::Div:
                    if (numeric(e->a) && numeric(e->b) && numVal(e->b) != 0.0)
                        return realLit(numVal(e->a) / numVal(e->b));
                    break;
            }
            break;
        }
        default:
            break;
    }
    return e;
}

bool distinctLiterals(const std::vector<ExprPtr>& items) {
    for (std::size_t i = 0; i < items.size(); ++i)
        for (std::size_t j = i + 1; j < items.size(); ++j)
            if (exprEqual(items[i], items[j])) return false;
    return true;
}

ExprPtr partialEvalRule(const ExprPtr& e, Rw& rw) {
    // Loop unrolling over set literals.
    if (e->kind == Expr::Kind::Sum && e->a->kind == Expr::Kind::SetLit &&
        distinctLiterals(e->a->items)) {
        std::vector<ExprPtr> terms;
        for (const auto& it : e->a->items) terms.push_back(substitute(e->b, e->name, it));
        return rw.hit("unroll-sum", e, rebuildAdd(terms));
    }
    if (e->kind == Expr::Kind::DictBuild && e->a->kind == Expr::Kind::SetLit &&
        distinctLiterals(e->a->items)) {
        std::vector<std::pair<ExprPtr, ExprPtr>> entries;
        for (const auto& it : e->a->items)
            entries.emplace_back(it, substitute(e->b, e->name, it));
        return rw.hit("unroll-lambda", e, dictLit(std::move(entries)));
    }
    // Keywise merge of dictionary literal additions with decidable keys.
    if (e->kind == Expr::Kind::Add && e->a->kind == Expr::Kind::DictLit &&
        e->b->kind == Expr::Kind::DictLit) {
        auto allConstKeys = [](const ExprPtr& d) {
            for (const auto& [k, v] : d->pairs)
                if (k->kind != Expr::Kind::Const) return false;
            return true;
        };
        if (allConstKeys(e->a) && allConstKeys(e->b)) {
            auto entries = e->a->pairs;
            for (const auto& [k, v] : e->b->pairs) {
                bool merged = false;
                for (auto& [k0, v0] : entries)
                    if (exprEqual(k0, k)) {
                        v0 = add(v0, v);
                        merged = true;
                        break;
                    }
                if (!merged) entries.emplace_back(k, v);
            }
            return rw.hit("merge-dicts", e, dictLit(std::move(entries)));
        }
    }
    ExprPtr folded = foldConst(e);
    if (folded != e) return rw.hit("fold-const", e, folded);
    return e;
}

// -------------------------------------------------------- schema specialization

ExprPtr specializeRule(const ExprPtr& e, Rw& rw) {
    if (e->kind == Expr::Kind::FieldDyn && isFieldConst(e->b))
        return rw.hit("dyn-to-static", e, fieldStatic(e->a, e->b->constant.text));
    if (e->kind == Expr::Kind::Lookup && isFieldConst(e->b) && !e->missingDefault)
        return rw.hit("lookup-to-access", e, fieldStatic(e->a, e->b->constant.text));
    if (e->kind == Expr::Kind::DictLit && !e->pairs.empty()) {
        bool allFields = true;
        for (const auto& [k, v] : e->pairs)
            if (!isFieldConst(k)) allFields = false;
        if (allFields) {
            std::vector<std::pair<std::string, ExprPtr>> fs;
            for (const auto& [k, v] : e->pairs) fs.emplace_back(k->constant.text, v);
            return rw.hit("dict-to-record", e, recordLit(std::move(fs)));
        }
    }
    if (e->kind == Expr::Kind::DictBuild && e->a->kind == Expr::Kind::SetLit &&
        !e->a->items.empty()) {
        bool allFields = true;
        for (const auto& it : e->a->items)
            if (!isFieldConst(it)) allFields = false;
        if (allFields) {
            std::vector<std::pair<std::string, ExprPtr>> fs;
            for (const auto& it : e->a->items)
                fs.emplace_back(it->constant.text, substitute(e->b, e->name, it));
            return rw.hit("lambda-to-record", e, recordLit(std::move(fs)));
        }
    }
    return e;
}

void checkResidualDynAccess(const ExprPtr& e) {
    if (e->kind == Expr::Kind::FieldDyn)
        throw SpecializeError(e->line, e->col,
                              "dynamic field access not resolvable statically: " +
                                  printExpr(e));
    for (const auto& k : children(e)) checkResidualDynAccess(k);
}

// ------------------------------------------------------------- loop fusion

int countUses(const ExprPtr& e, const std::string& name) {
    if (e->kind == Expr::Kind::Var) return e->name == name ? 1 : 0;
    if ((e->kind == Expr::Kind::Sum || e->kind == Expr::Kind::DictBuild ||
         e->kind == Expr::Kind::Let) &&
        e->name == name) {
        // Shadowing cannot occur in renamed programs, but stay safe.
        return countUses(e->a, name);
    }
    int n = 0;
    for (const auto& k : children(e)) n += countUses(k, name);
    return n;
}

bool usedUnderBinder(const ExprPtr& e, const std::string& name, bool under) {
    if (e->kind == Expr::Kind::Var) return under && e->name == name;
    bool binder = e->kind == Expr::Kind::Sum || e->kind == Expr::Kind::DictBuild;
    auto kids = children(e);
    for (std::size_t i = 0; i < kids.size(); ++i) {
        bool u = under || (binder && i == 1);
        if (usedUnderBinder(kids[i], name, u)) return true;
    }
    return false;
}

ExprPtr fuseRule(const ExprPtr& e, Rw& rw) {
    if (e->kind != Expr::Kind::Let || e->a->kind != Expr::Kind::Sum) return e;
    if (e->b->kind != Expr::Kind::Let || e->b->a->kind != Expr::Kind::Sum) return e;
    const ExprPtr& s1 = e->a;
    const ExprPtr& s2 = e->b->a;
    if (!exprEqual(s1->a, s2->a)) return e;
    if (mentions(s2, e->name)) return e;  // second sum depends on the first binder
    const std::string& n1 = e->name;
    const std::string& n2 = e->b->name;
    ExprPtr body2 = substitute(s2->b, s2->name, var(s1->name));
    std::vector<std::pair<std::string, ExprPtr>> fields;
    if (s1->b->kind == Expr::Kind::RecordLit) {
        fields = s1->b->fields;  // grow a previous fusion
    } else {
        fields.emplace_back(n1, s1->b);
    }
    if (body2->kind == Expr::Kind::RecordLit) {
        // Splice a previously fused record flat instead of nesting it.
        for (const auto& f : body2->fields) fields.push_back(f);
    } else {
        fields.emplace_back(n2, body2);
    }
    std::string t = freshBinder("w");
    ExprPtr fused = sum(s1->name, s1->a, recordLit(fields));
    ExprPtr rest = e->b->b;
    if (s1->b->kind == Expr::Kind::RecordLit) {
        rest = substitute(rest, n1, var(t));
    } else {
        rest = substitute(rest, n1, fieldStatic(var(t), n1));
    }
    if (body2->kind == Expr::Kind::RecordLit) {
        rest = substitute(rest, n2, var(t));
    } else {
        rest = substitute(rest, n2, fieldStatic(var(t), n2));
    }
    return rw.hit("fuse-sums", e, let(t, fused, rest));
}

// ------------------------------------------------------------ generic opts

bool trivialRhs(const ExprPtr& e) {
    switch (e->kind) {
        case Expr::Kind::Const:
        case Expr::Kind::Var:
            return true;
        case Expr::Kind::FieldStatic:
            return trivialRhs(e->a);
        default:
            return false;
    }
}

ExprPtr cseReplace(const ExprPtr& e, const ExprPtr& rhs,
                   const std::set<std::string>& protect, const std::string& with,
                   int& count) {
    if (exprEqual(e, rhs)) {
        ++count;
        return var(with);
    }
    bool binder = e->kind == Expr::Kind::Sum || e->kind == Expr::Kind::DictBuild ||
                  e->kind == Expr::Kind::Let;
    auto kids = children(e);
    bool ch = false;
    for (std::size_t i = 0; i < kids.size(); ++i) {
        // Stop where a binder shadows a name the replacement depends on.
        if (binder && i == 1 && protect.count(e->name)) continue;
        ExprPtr t = cseReplace(kids[i], rhs, protect, with, count);
        if (t != kids[i]) ch = true;
        kids[i] = t;
    }
    return ch ? rebuild(e, kids) : e;
}

ExprPtr genericRule(const ExprPtr& e, Rw& rw) {
    if (e->kind != Expr::Kind::Let) return e;
    // let-flattening
    if (e->a->kind == Expr::Kind::Let && !mentions(e->b, e->a->name))
        return rw.hit("flatten-let", e,
                      let(e->a->name, e->a->a, let(e->name, e->a->b, e->b)));
    int uses = countUses(e->b, e->name);
    if (uses == 0) return rw.hit("dead-let", e, e->b);
    if (trivialRhs(e->a))
        return rw.hit("inline-let", e, substitute(e->b, e->name, e->a));
    // CSE first: a copy of the RHS below reuses this binder, which would be
    // lost if the used-once inline fired beforehand.
    std::set<std::string> protect = freeVars(e->a);
    protect.insert(e->name);
    int copies = 0;
    ExprPtr nb = cseReplace(e->b, e->a, protect, e->name, copies);
    if (copies > 0) return rw.hit("cse-let", e, let(e->name, e->a, nb));
    if (uses == 1 && !usedUnderBinder(e->b, e->name, false))
        return rw.hit("inline-let", e, substitute(e->b, e->name, e->a));
    return e;
}

}  // namespace

CardEnv cardEnvFor(const Program& p, const Schema& s) {
    CardEnv env;
    for (const auto& r : s.relations) env.dictSize[r.name] = r.cardinality;
    for (const auto& [name, attrs] : s.featureSets)
        env.setSize[name] = (long long)attrs.size();
    for (const auto& [name, rhs] : p.prelude) {
        if (rhs->kind == Expr::Kind::SetLit) {
            env.setSize[name] = (long long)rhs->items.size();
            continue;
        }
        // Join-style bindings: bound above by the product of the referenced
        // relation cardinalities.
        long long prod = 1;
        bool any = false;
        for (const auto& v : freeVars(rhs)) {
            auto it = env.dictSize.find(v);
            if (it != env.dictSize.end()) {
                prod *= std::max<long long>(it->second, 1);
                any = true;
            }
        }
        if (any) env.dictSize[name] = prod;
    }
    return env;
}

std::optional<long long> estimateCollection(const ExprPtr& coll, const CardEnv& env) {
    return estimate(coll, env);
}

ExprPtr normalize(ExprPtr e, RewriteTrace* trace, const std::string& path) {
    Rw rw{trace, "normalize", path, budgetFor(e)};
    return runFix(std::move(e), rw, normalizeRule);
}

ExprPtr scheduleLoops(ExprPtr e, const CardEnv& env, RewriteTrace* trace,
                      const std::string& path) {
    Rw rw{trace, "schedule", path, budgetFor(e)};
    return runFix(std::move(e), rw,
                  [&env](const ExprPtr& x, Rw& r) { return scheduleRule(x, r, env); });
}

ExprPtr factorize(ExprPtr e, RewriteTrace* trace, const std::string& path) {
    Rw rw{trace, "factorize", path, budgetFor(e)};
    return runFix(std::move(e), rw, factorizeRule);
}

Program staticMemoize(const Program& p, const Schema& s, RewriteTrace* trace) {
    std::set<std::string> statics = staticSetVars(p, s);
    NameSupply supply;
    for (const auto& v : freeVarsProgram(p)) supply.reserve(v);
    for (const auto& [n, e] : p.prelude) supply.reserve(n);
    if (p.loop) supply.reserve(p.loop->var);

    Program out = p;
    auto apply = [&](const ExprPtr& e, const std::string& path) {
        Rw rw{trace, "memoize", path, budgetFor(e)};
        std::set<std::string> forbidden;
        if (p.loop) forbidden.insert(p.loop->var);
        return memoizeTop(e, statics, supply, forbidden, rw);
    };
    if (out.loop) out.loop->step = apply(out.loop->step, "loop.step");
    out.result = apply(out.result, "result");
    return out;
}

Program hoistLoopInvariants(const Program& p, RewriteTrace* trace) {
    Program out = mapProgram(p, [&](const ExprPtr& e, const std::string& path) {
        Rw rw{trace, "licm", path, budgetFor(e)};
        return runFix(e, rw, licmRule);
    });
    if (out.loop) {
        while (out.loop->step->kind == Expr::Kind::Let &&
               !mentions(out.loop->step->a, out.loop->var)) {
            const ExprPtr l = out.loop->step;
            if (trace)
                trace->steps.push_back({"licm", "let-out-of-while", "loop.step",
                                        printExpr(l), printExpr(l->b)});
            out.prelude.emplace_back(l->name, l->a);
            out.loop->step = l->b;
        }
    }
    return out;
}

ExprPtr partialEvalExpr(ExprPtr e, RewriteTrace* trace, const std::string& path) {
    Rw rw{trace, "partial-eval", path, budgetFor(e)};
    return runFix(std::move(e), rw, partialEvalRule);
}

Program partialEval(const Program& p, RewriteTrace* trace) {
    // Substitute static set bindings at use sites first, so loops over
    // prelude-named feature sets unroll too.
    std::vector<std::pair<std::string, ExprPtr>> sets;
    auto substSets = [&](ExprPtr e) {
        for (const auto& [n, rhs] : sets) e = substitute(e, n, rhs);
        return e;
    };
    Program out;
    for (const auto& [n, rhs] : p.prelude) {
        ExprPtr r = partialEvalExpr(substSets(rhs), trace, "prelude." + n);
        if (r->kind == Expr::Kind::SetLit) sets.emplace_back(n, r);
        out.prelude.emplace_back(n, r);
    }
    if (p.loop) {
        Program::Loop l;
        l.var = p.loop->var;
        l.init = partialEvalExpr(substSets(p.loop->init), trace, "loop.init");
        l.cond = partialEvalExpr(substSets(p.loop->cond), trace, "loop.cond");
        l.step = partialEvalExpr(substSets(p.loop->step), trace, "loop.step");
        out.loop = std::move(l);
    }
    out.result = partialEvalExpr(substSets(p.result), trace, "result");
    return out;
}

ExprPtr specializeSchema(ExprPtr e, const Schema& s, RewriteTrace* trace,
                         const std::string& path) {
    (void)s;
    Rw rw{trace, "specialize", path, budgetFor(e)};
    ExprPtr out = runFix(std::move(e), rw, specializeRule);
    checkResidualDynAccess(out);
    return out;
}

ExprPtr fuseLoops(ExprPtr e, RewriteTrace* trace, const std::string& path) {
    Rw rw{trace, "fuse", path, budgetFor(e)};
    return runFix(std::move(e), rw, fuseRule);
}

ExprPtr genericOptsExpr(ExprPtr e, RewriteTrace* trace, const std::string& path) {
    Rw rw{trace, "generic", path, budgetFor(e)};
    return runFix(std::move(e), rw, genericRule);
}

Program genericOpts(const Program& p, RewriteTrace* trace) {
    Program out = p;
    bool changed = true;
    int guard = 0;
    while (changed && ++guard < 100) {
        changed = false;
        out = mapProgram(out, [&](const ExprPtr& e, const std::string& path) {
            ExprPtr r = genericOptsExpr(e, trace, path);
            if (r != e) changed = true;
            return r;
        });
        // Dead and duplicate prelude bindings.
        auto usesAfter = [&](std::size_t idx, const std::string& name) {
            for (std::size_t j = idx + 1; j < out.prelude.size(); ++j)
                if (countUses(out.prelude[j].second, name)) return true;
            if (out.loop &&
                (countUses(out.loop->init, name) || countUses(out.loop->cond, name) ||
                 countUses(out.loop->step, name)))
                return true;
            return countUses(out.result, name) > 0;
        };
        for (std::size_t i = 0; i < out.prelude.size(); ++i) {
            const auto& [name, rhs] = out.prelude[i];
            if (!usesAfter(i, name)) {
                if (trace)
                    trace->steps.push_back(
                        {"generic", "dead-let", "prelude." + name, printExpr(rhs), ""});
                out.prelude.erase(out.prelude.begin() + i);
                changed = true;
                break;
            }
            // CSE across prelude bindings.
            bool merged = false;
            for (std::size_t j = 0; j < i; ++j) {
                if (exprEqual(out.prelude[j].second, rhs)) {
                    std::string keep = out.prelude[j].first;
                    std::string drop = name;
                    out.prelude.erase(out.prelude.begin() + i);
                    out = mapProgram(out, [&](const ExprPtr& e, const std::string&) {
                        return substitute(e, drop, var(keep));
                    });
                    if (trace)
                        trace->steps.push_back({"generic", "cse-let", "prelude." + drop,
                                                drop, keep});
                    changed = true;
                    merged = true;
                    break;
                }
            }
            if (merged) break;
            // Trivial prelude bindings are inlined everywhere.
            if (trivialRhs(rhs)) {
                std::string n = name;
                ExprPtr r = rhs;
                out.prelude.erase(out.prelude.begin() + i);
                out = mapProgram(out, [&](const ExprPtr& e, const std::string&) {
                    return substitute(e, n, r);
                });
                if (trace)
                    trace->steps.push_back(
                        {"generic", "inline-let", "prelude." + n, printExpr(r), ""});
                changed = true;
                break;
            }
        }
    }
    return out;
}

Program fuseLoopsProgram(const Program& p, RewriteTrace* trace) {
    Program out = mapProgram(p, [&](const ExprPtr& e, const std::string& path) {
        return fuseLoops(e, trace, path);
    });
    // Fuse prelude-level sums over exprEqual collections.
    bool changed = true;
    int guard = 0;
    while (changed && ++guard < 50) {
        changed = false;
        for (std::size_t i = 0; i < out.prelude.size() && !changed; ++i) {
            const ExprPtr& s1 = out.prelude[i].second;
            if (s1->kind != Expr::Kind::Sum) continue;
            for (std::size_t j = i + 1; j < out.prelude.size() && !changed; ++j) {
                const ExprPtr& s2 = out.prelude[j].second;
                if (s2->kind != Expr::Kind::Sum) continue;
                if (!exprEqual(s1->a, s2->a)) continue;
                // Moving s2 up to position i must not skip a binder it uses.
                bool blocked = false;
                auto fv = freeVars(s2);
                for (std::size_t k = i; k < j; ++k)
                    if (fv.count(out.prelude[k].first)) blocked = true;
                if (blocked) continue;
                std::string n1 = out.prelude[i].first;
                std::string n2 = out.prelude[j].first;
                std::vector<std::pair<std::string, ExprPtr>> fields;
                ExprPtr use1;
                std::string t = freshBinder("w");
                if (s1->b->kind == Expr::Kind::RecordLit) {
                    fields = s1->b->fields;
                    use1 = var(t);
                } else {
                    fields.emplace_back(n1, s1->b);
                    use1 = fieldStatic(var(t), n1);
                }
                fields.emplace_back(n2, substitute(s2->b, s2->name, var(s1->name)));
                ExprPtr fused = sum(s1->name, s1->a, recordLit(fields));
                if (trace)
                    trace->steps.push_back({"fuse", "fuse-sums", "prelude." + n1,
                                            printExpr(s1), printExpr(fused)});
                out.prelude[i] = {t, fused};
                out.prelude.erase(out.prelude.begin() + j);
                auto fix = [&](const ExprPtr& e) {
                    ExprPtr r = substitute(e, n1, use1);
                    return substitute(r, n2, fieldStatic(var(t), n2));
                };
                for (std::size_t k = i + 1; k < out.prelude.size(); ++k)
                    out.prelude[k].second = fix(out.prelude[k].second);
                if (out.loop) {
                    out.loop->init = fix(out.loop->init);
                    out.loop->cond = fix(out.loop->cond);
                    out.loop->step = fix(out.loop->step);
                }
                out.result = fix(out.result);
                changed = true;
            }
        }
    }
    return out;
}

PipelineResult runHighLevelPipeline(const Program& p, const Schema& s,
                                    RewriteTrace* trace) {
    PipelineResult res;
    Program cur = alphaRename(p);
    auto snap = [&](const char* name) {
        res.stages.emplace_back(name, cur);
        if (trace) trace->states.push_back(printProgram(cur));
    };

    CardEnv env = cardEnvFor(cur, s);
    cur = mapProgram(cur, [&](const ExprPtr& e, const std::string& path) {
        return normalize(e, trace, path);
    });
    snap("normalize");
    cur = mapProgram(cur, [&](const ExprPtr& e, const std::string& path) {
        return scheduleLoops(e, env, trace, path);
    });
    snap("schedule");
    cur = mapProgram(cur, [&](const ExprPtr& e, const std::string& path) {
        return factorize(e, trace, path);
    });
    snap("factorize");
    cur = staticMemoize(cur, s, trace);
    snap("memoize");
    cur = hoistLoopInvariants(cur, trace);
    snap("licm");
    cur = partialEval(cur, trace);
    snap("partial-eval");
    cur = mapProgram(cur, [&](const ExprPtr& e, const std::string& path) {
        return specializeSchema(e, s, trace, path);
    });
    snap("specialize");
    cur = genericOpts(cur, trace);
    snap("generic");
    res.final = cur;
    return res;
}

}  // namespace ifaq
