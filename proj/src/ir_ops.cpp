#include "ifaq/ir_ops.hpp"

#include <algorithm>
#include <map>
#include <sstream>

namespace ifaq {

namespace {

void freeVarsInto(const ExprPtr& e, std::set<std::string>& bound, std::set<std::string>& out) {
    switch (e->kind) {
        case Expr::Kind::Var:
            if (!bound.count(e->name)) out.insert(e->name);
            return;
        case Expr::Kind::Sum:
        case Expr::Kind::DictBuild: {
            freeVarsInto(e->a, bound, out);
            bool inserted = bound.insert(e->name).second;
            freeVarsInto(e->b, bound, out);
            if (inserted) bound.erase(e->name);
            return;
        }
        case Expr::Kind::Let: {
            freeVarsInto(e->a, bound, out);
            bool inserted = bound.insert(e->name).second;
            freeVarsInto(e->b, bound, out);
            if (inserted) bound.erase(e->name);
            return;
        }
        default:
            for (const auto& c : children(e)) freeVarsInto(c, bound, out);
            return;
    }
}

}  // namespace

std::set<std::string> freeVars(const ExprPtr& e) {
    std::set<std::string> bound, out;
    freeVarsInto(e, bound, out);
    return out;
}

std::set<std::string> freeVarsProgram(const Program& p) {
    std::set<std::string> bound, out;
    for (const auto& [name, rhs] : p.prelude) {
        freeVarsInto(rhs, bound, out);
        bound.insert(name);
    }
    if (p.loop) {
        freeVarsInto(p.loop->init, bound, out);
        bound.insert(p.loop->var);
        freeVarsInto(p.loop->cond, bound, out);
        freeVarsInto(p.loop->step, bound, out);
    }
    freeVarsInto(p.result, bound, out);
    return out;
}

std::string NameSupply::fresh(const std::string& base) {
    if (used_.insert(base).second) return base;
    for (int k = 1;; ++k) {
        std::string cand = base + "_" + std::to_string(k);
        if (used_.insert(cand).second) return cand;
    }
}

namespace {

ExprPtr renameWith(const ExprPtr& e, std::map<std::string, std::string>& env, NameSupply& supply) {
    switch (e->kind) {
        case Expr::Kind::Var: {
            auto it = env.find(e->name);
            if (it != env.end() && it->second != e->name) return var(it->second);
            return e;
        }
        case Expr::Kind::Sum:
        case Expr::Kind::DictBuild:
        case Expr::Kind::Let: {
            ExprPtr a = renameWith(e->a, env, supply);
            std::string nn = supply.fresh(e->name);
            auto saved = env.find(e->name) != env.end()
                             ? std::optional<std::string>(env[e->name])
                             : std::nullopt;
            env[e->name] = nn;
            ExprPtr b = renameWith(e->b, env, supply);
            if (saved) env[e->name] = *saved; else env.erase(e->name);
            auto n = std::make_shared<Expr>(*e);
            n->name = nn;
            n->a = a;
            n->b = b;
            return n;
        }
        default: {
            auto kids = children(e);
            for (auto& k : kids) k = renameWith(k, env, supply);
            return rebuild(e, kids);
        }
    }
}

}  // namespace

ExprPtr alphaRenameExpr(const ExprPtr& e, NameSupply& supply) {
    std::map<std::string, std::string> env;
    return renameWith(e, env, supply);
}

Program alphaRename(const Program& p) {
    NameSupply supply;
    for (const auto& v : freeVarsProgram(p)) supply.reserve(v);
    for (const auto& [name, rhs] : p.prelude) supply.reserve(name);
    if (p.loop) supply.reserve(p.loop->var);
    std::map<std::string, std::string> env;
    Program out;
    for (const auto& [name, rhs] : p.prelude)
        out.prelude.emplace_back(name, renameWith(rhs, env, supply));
    if (p.loop) {
        Program::Loop l;
        l.var = p.loop->var;
        l.init = renameWith(p.loop->init, env, supply);
        l.cond = renameWith(p.loop->cond, env, supply);
        l.step = renameWith(p.loop->step, env, supply);
        out.loop = std::move(l);
    }
    out.result = renameWith(p.result, env, supply);
    return out;
}

ExprPtr substitute(const ExprPtr& e, const std::string& name, const ExprPtr& replacement) {
    switch (e->kind) {
        case Expr::Kind::Var:
            return e->name == name ? replacement : e;
        case Expr::Kind::Sum:
        case Expr::Kind::DictBuild:
        case Expr::Kind::Let: {
            ExprPtr a = substitute(e->a, name, replacement);
            if (e->name == name) {
                if (a == e->a) return e;
                auto n = std::make_shared<Expr>(*e);
                n->a = a;
                return n;
            }
            ExprPtr body = e->b;
            std::string binder = e->name;
            if (freeVars(replacement).count(binder)) {
                NameSupply supply;
                for (const auto& v : freeVars(e->b)) supply.reserve(v);
                for (const auto& v : freeVars(replacement)) supply.reserve(v);
                supply.reserve(name);
                std::string nn = supply.fresh(binder);
                body = substitute(body, binder, var(nn));
                binder = nn;
            }
            body = substitute(body, name, replacement);
            auto n = std::make_shared<Expr>(*e);
            n->a = a;
            n->b = body;
            n->name = binder;
            return n;
        }
        default: {
            auto kids = children(e);
            bool changed = false;
            for (auto& k : kids) {
                ExprPtr nk = substitute(k, name, replacement);
                changed = changed || nk != k;
                k = nk;
            }
            return changed ? rebuild(e, kids) : e;
        }
    }
}

namespace {
void flattenInto(const ExprPtr& e, Expr::Kind k, std::vector<ExprPtr>& out) {
    if (e->kind == k) {
        flattenInto(e->a, k, out);
        flattenInto(e->b, k, out);
    } else {
        out.push_back(e);
    }
}
}  // namespace

std::vector<ExprPtr> flattenAdd(const ExprPtr& e) {
    std::vector<ExprPtr> out;
    flattenInto(e, Expr::Kind::Add, out);
    return out;
}

std::vector<ExprPtr> flattenMul(const ExprPtr& e) {
    std::vector<ExprPtr> out;
    flattenInto(e, Expr::Kind::Mul, out);
    return out;
}

ExprPtr rebuildAdd(const std::vector<ExprPtr>& terms) {
    if (terms.empty()) return intLit(0);
    ExprPtr acc = terms.front();
    for (std::size_t k = 1; k < terms.size(); ++k) acc = add(acc, terms[k]);
    return acc;
}

ExprPtr rebuildMul(const std::vector<ExprPtr>& factors) {
    if (factors.empty()) return intLit(1);
    ExprPtr acc = factors.front();
    for (std::size_t k = 1; k < factors.size(); ++k) acc = mul(acc, factors[k]);
    return acc;
}

namespace {

// Canonical key: alpha-invariant (binders become indices) and invariant under
// commutativity/associativity of + and * (operand keys sorted).
std::string canonKey(const ExprPtr& e, std::map<std::string, int>& env, int& next) {
    std::ostringstream os;
    switch (e->kind) {
        case Expr::Kind::Add:
        case Expr::Kind::Mul: {
            auto parts = e->kind == Expr::Kind::Add ? flattenAdd(e) : flattenMul(e);
            std::vector<std::string> keys;
            keys.reserve(parts.size());
            for (const auto& p : parts) keys.push_back(canonKey(p, env, next));
            std::sort(keys.begin(), keys.end());
            os << (e->kind == Expr::Kind::Add ? "(+ " : "(* ");
            for (const auto& k : keys) os << k << ' ';
            os << ')';
            return os.str();
        }
        case Expr::Kind::Neg:
            return "(neg " + canonKey(e->a, env, next) + ")";
        case Expr::Kind::UnOp:
            return std::string("(") + unOpName(e->uop) + " " + canonKey(e->a, env, next) + ")";
        case Expr::Kind::BinOp:
            return std::string("(") + binOpName(e->bop) + " " + canonKey(e->a, env, next) + " " +
                   canonKey(e->b, env, next) + ")";
        case Expr::Kind::Const:
            switch (e->constant.tag) {
                case Constant::Tag::Field: return "`" + e->constant.text + "`";
                case Constant::Tag::String: return "\"" + e->constant.text + "\"";
                case Constant::Tag::Int: return std::to_string(e->constant.i);
                case Constant::Tag::Real: {
                    os << "r" << e->constant.r;
                    return os.str();
                }
                case Constant::Tag::Bool: return e->constant.b ? "true" : "false";
            }
            return "?";
        case Expr::Kind::Sum:
        case Expr::Kind::DictBuild:
        case Expr::Kind::Let: {
            const char* tag = e->kind == Expr::Kind::Sum ? "sum"
                              : e->kind == Expr::Kind::DictBuild ? "lam"
                                                                 : "let";
            std::string a = canonKey(e->a, env, next);
            auto saved = env.count(e->name) ? std::optional<int>(env[e->name]) : std::nullopt;
            env[e->name] = next++;
            std::string b = canonKey(e->b, env, next);
            --next;
            if (saved) env[e->name] = *saved; else env.erase(e->name);
            return std::string("(") + tag + " " + a + " " + b + ")";
        }
        case Expr::Kind::DictLit: {
            std::vector<std::string> keys;
            for (const auto& [k, v] : e->pairs)
                keys.push_back(canonKey(k, env, next) + "->" + canonKey(v, env, next));
            std::sort(keys.begin(), keys.end());
            os << "(dict ";
            for (const auto& k : keys) os << k << ' ';
            os << ')';
            return os.str();
        }
        case Expr::Kind::SetLit: {
            std::vector<std::string> keys;
            for (const auto& it : e->items) keys.push_back(canonKey(it, env, next));
            std::sort(keys.begin(), keys.end());
            os << "(set ";
            for (const auto& k : keys) os << k << ' ';
            os << ')';
            return os.str();
        }
        case Expr::Kind::Dom:
            return "(dom " + canonKey(e->a, env, next) + ")";
        case Expr::Kind::Lookup:
            return "(get " + canonKey(e->a, env, next) + " " + canonKey(e->b, env, next) + ")";
        case Expr::Kind::RecordLit: {
            std::vector<std::string> keys;
            for (const auto& [f, v] : e->fields) keys.push_back(f + "=" + canonKey(v, env, next));
            std::sort(keys.begin(), keys.end());
            os << "(rec ";
            for (const auto& k : keys) os << k << ' ';
            os << ')';
            return os.str();
        }
        case Expr::Kind::VariantLit:
            return "(var<" + e->name + "> " + canonKey(e->a, env, next) + ")";
        case Expr::Kind::FieldStatic:
            return "(." + e->name + " " + canonKey(e->a, env, next) + ")";
        case Expr::Kind::FieldDyn:
            return "(.[] " + canonKey(e->a, env, next) + " " + canonKey(e->b, env, next) + ")";
        case Expr::Kind::Var: {
            auto it = env.find(e->name);
            if (it != env.end()) return "$" + std::to_string(it->second);
            return e->name;
        }
        case Expr::Kind::If:
            return "(if " + canonKey(e->a, env, next) + " " + canonKey(e->b, env, next) + " " +
                   canonKey(e->c, env, next) + ")";
    }
    return "?";
}

}  // namespace

bool exprEqual(const ExprPtr& a, const ExprPtr& b) {
    std::map<std::string, int> ea, eb;
    int na = 0, nb = 0;
    return canonKey(a, ea, na) == canonKey(b, eb, nb);
}

bool programEqual(const Program& a, const Program& b) {
    if (a.prelude.size() != b.prelude.size()) return false;
    if (bool(a.loop) != bool(b.loop)) return false;
    // Prelude binders are treated as binders: wrap everything in lets and
    // compare the single expressions.
    auto wrap = [](const Program& p) {
        ExprPtr body = p.result;
        if (p.loop) {
            // Encode the loop structurally: binder semantics via DictBuild is
            // not right; use nested lets with a marker record.
            body = recordLit({{"_init", p.loop->init},
                             {"_cond", let(p.loop->var, p.loop->init, p.loop->cond)},
                             {"_step", let(p.loop->var, p.loop->init, p.loop->step)},
                             {"_res", let(p.loop->var, p.loop->init, p.result)}});
        }
        for (auto it = p.prelude.rbegin(); it != p.prelude.rend(); ++it)
            body = let(it->first, it->second, body);
        return body;
    };
    return exprEqual(wrap(a), wrap(b));
}

std::size_t exprSize(const ExprPtr& e) {
    std::size_t n = 1;
    for (const auto& c : children(e)) n += exprSize(c);
    return n;
}

}  // namespace ifaq
