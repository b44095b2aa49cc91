#include "ifaq/typecheck.hpp"

#include <algorithm>
#include <sstream>

#include "ifaq/frontend.hpp"

namespace ifaq {

bool typeEqual(const IfaqType& a, const IfaqType& b) {
    if (a.kind == IfaqType::Kind::Error || b.kind == IfaqType::Kind::Error) return true;
    if (a.kind != b.kind) return false;
    if (a.fields.size() != b.fields.size() || a.args.size() != b.args.size()) return false;
    for (std::size_t i = 0; i < a.fields.size(); ++i)
        if (a.fields[i].first != b.fields[i].first ||
            !typeEqual(a.fields[i].second, b.fields[i].second))
            return false;
    for (std::size_t i = 0; i < a.args.size(); ++i)
        if (!typeEqual(a.args[i], b.args[i])) return false;
    return true;
}

std::string typeToString(const IfaqType& t) {
    using K = IfaqType::Kind;
    switch (t.kind) {
        case K::Int: return "int";
        case K::Real: return "real";
        case K::String: return "string";
        case K::Bool: return "bool";
        case K::Field: return "field";
        case K::Enum: return "enum";
        case K::Hot: return "hot(" + std::to_string(t.hotWidth) + ")";
        case K::Error: return "?";
        case K::Record:
        case K::Variant: {
            std::ostringstream os;
            os << (t.kind == K::Record ? '{' : '<');
            for (std::size_t i = 0; i < t.fields.size(); ++i) {
                if (i) os << ", ";
                os << t.fields[i].first << ": " << typeToString(t.fields[i].second);
            }
            os << (t.kind == K::Record ? '}' : '>');
            return os.str();
        }
        case K::Dict:
            return "dict(" + typeToString(t.args[0]) + ", " + typeToString(t.args[1]) + ")";
        case K::Set:
            return "set(" + typeToString(t.args[0]) + ")";
    }
    return "?";
}

IfaqType relationType(const RelationSchema& r) {
    std::vector<std::pair<std::string, IfaqType>> fs;
    for (const auto& a : r.attrs) {
        IfaqType::Kind k;
        switch (a.type) {
            case ScalarType::Int: k = IfaqType::Kind::Int; break;
            case ScalarType::Real: k = IfaqType::Kind::Real; break;
            case ScalarType::String: k = IfaqType::Kind::String; break;
            case ScalarType::Bool: k = IfaqType::Kind::Bool; break;
        }
        fs.emplace_back(a.name, IfaqType::scalar(k));
    }
    return IfaqType::dict(IfaqType::record(std::move(fs)),
                          IfaqType::scalar(IfaqType::Kind::Int));
}

namespace {

using K = IfaqType::Kind;

class Checker {
public:
    explicit Checker(const Schema& s) {
        for (const auto& r : s.relations) env_.emplace_back(r.name, relationType(r));
        for (const auto& [name, attrs] : s.featureSets)
            env_.emplace_back(name, IfaqType::set(IfaqType::scalar(K::Field)));
    }

    TypecheckResult run(const Program& p) {
        TypecheckResult out;
        out.typed.program = p;
        for (const auto& [name, e] : p.prelude) env_.emplace_back(name, check(e));
        if (p.loop) {
            IfaqType st = check(p.loop->init);
            env_.emplace_back(p.loop->var, st);
            IfaqType ct = check(p.loop->cond);
            if (!ct.isError() && ct.kind != K::Bool)
                report(p.loop->cond, "loop condition has type " + typeToString(ct) +
                                         ", expected bool");
            IfaqType stepT = check(p.loop->step);
            if (!typeEqual(join(st, stepT), st) && !typeEqual(st, stepT))
                report(p.loop->step, "loop step type " + typeToString(stepT) +
                                         " does not match state type " + typeToString(st));
        }
        out.typed.resultType = check(p.result);
        out.typed.types = std::move(types_);
        out.errors = std::move(errors_);
        out.ok = out.errors.empty();
        return out;
    }

private:
    std::vector<std::pair<std::string, IfaqType>> env_;
    std::map<const Expr*, IfaqType> types_;
    std::vector<TypeError> errors_;

    void report(const ExprPtr& e, std::string msg) {
        std::string snip = printExpr(e);
        if (snip.size() > 60) snip = snip.substr(0, 57) + "...";
        errors_.push_back({e->line, e->col, std::move(msg), std::move(snip)});
    }

    const IfaqType* lookupVar(const std::string& name) const {
        for (auto it = env_.rbegin(); it != env_.rend(); ++it)
            if (it->first == name) return &it->second;
        return nullptr;
    }

    // Least upper bound for numeric widening; error poisons silently.
    static IfaqType join(const IfaqType& a, const IfaqType& b) {
        if (a.isError()) return b;
        if (b.isError()) return a;
        if (a.isNumeric() && b.isNumeric())
            return (a.kind == K::Real || b.kind == K::Real) ? IfaqType::scalar(K::Real) : a;
        return a;
    }

    static bool compatible(const IfaqType& a, const IfaqType& b) {
        if (a.isNumeric() && b.isNumeric()) return true;
        return typeEqual(a, b);
    }

    IfaqType check(const ExprPtr& e) {
        IfaqType t = checkInner(e);
        types_[e.get()] = t;
        return t;
    }

    IfaqType additive(const ExprPtr& e, const IfaqType& a, const IfaqType& b) {
        if (a.isError()) return b;
        if (b.isError()) return a;
        if ((a.isNumeric() || a.kind == K::Bool) && (b.isNumeric() || b.kind == K::Bool)) {
            IfaqType na = a.kind == K::Bool ? IfaqType::scalar(K::Int) : a;
            IfaqType nb = b.kind == K::Bool ? IfaqType::scalar(K::Int) : b;
            return join(na, nb);
        }
        if (a.kind == b.kind &&
            (a.kind == K::Dict || a.kind == K::Set || a.kind == K::Record)) {
            if (!typeEqual(a, b) && !compatibleContainers(a, b)) {
                report(e, "operands of + have incompatible types " + typeToString(a) +
                              " and " + typeToString(b));
                return IfaqType::error();
            }
            return a;
        }
        report(e, "cannot add " + typeToString(a) + " and " + typeToString(b));
        return IfaqType::error();
    }

    static bool compatibleContainers(const IfaqType& a, const IfaqType& b) {
        if (a.kind != b.kind) return false;
        if (a.kind == K::Dict)
            return compatible(a.args[0], b.args[0]) && compatible(a.args[1], b.args[1]);
        if (a.kind == K::Set) return compatible(a.args[0], b.args[0]);
        if (a.kind == K::Record) {
            if (a.fields.size() != b.fields.size()) return false;
            for (std::size_t i = 0; i < a.fields.size(); ++i)
                if (a.fields[i].first != b.fields[i].first ||
                    !compatible(a.fields[i].second, b.fields[i].second))
                    return false;
            return true;
        }
        return false;
    }

    IfaqType multiplicative(const ExprPtr& e, const IfaqType& a, const IfaqType& b) {
        if (a.isError() || b.isError()) return IfaqType::error();
        auto scalarish = [](const IfaqType& t) { return t.isNumeric() || t.kind == K::Bool; };
        if (scalarish(a) && scalarish(b)) {
            IfaqType na = a.kind == K::Bool ? IfaqType::scalar(K::Int) : a;
            IfaqType nb = b.kind == K::Bool ? IfaqType::scalar(K::Int) : b;
            return join(na, nb);
        }
        // Scalar scales the payload; the payload type is unchanged.
        if (scalarish(a)) return b;
        if (scalarish(b)) return a;
        if (a.kind == K::Record && b.kind == K::Record && compatibleContainers(a, b)) return a;
        report(e, "cannot multiply " + typeToString(a) + " and " + typeToString(b));
        return IfaqType::error();
    }

    IfaqType checkInner(const ExprPtr& e) {
        switch (e->kind) {
            case Expr::Kind::Const:
                switch (e->constant.tag) {
                    case Constant::Tag::Int: return IfaqType::scalar(K::Int);
                    case Constant::Tag::Real: return IfaqType::scalar(K::Real);
                    case Constant::Tag::Bool: return IfaqType::scalar(K::Bool);
                    case Constant::Tag::String: return IfaqType::scalar(K::String);
                    case Constant::Tag::Field: return IfaqType::scalar(K::Field);
                }
                return IfaqType::error();
            case Expr::Kind::Var: {
                if (const IfaqType* t = lookupVar(e->name)) return *t;
                report(e, "unbound variable " + e->name);
                return IfaqType::error();
            }
            case Expr::Kind::Add:
                return additive(e, check(e->a), check(e->b));
            case Expr::Kind::Mul:
                return multiplicative(e, check(e->a), check(e->b));
            case Expr::Kind::Neg: {
                IfaqType t = check(e->a);
                if (t.kind == K::Bool) return IfaqType::scalar(K::Int);
                if (!t.isError() && !t.isNumeric() && t.kind != K::Dict &&
                    t.kind != K::Record)
                    report(e, "cannot negate " + typeToString(t));
                return t;
            }
            case Expr::Kind::UnOp: {
                IfaqType t = check(e->a);
                if (!t.isError() && !t.isNumeric())
                    report(e, "numeric operand required, got " + typeToString(t));
                if (e->uop == UnOpKind::Abs) return t;  // abs preserves int
                return IfaqType::scalar(K::Real);
            }
            case Expr::Kind::BinOp: {
                IfaqType a = check(e->a);
                IfaqType b = check(e->b);
                switch (e->bop) {
                    case BinOpKind::Eq:
                    case BinOpKind::Neq:
                        if (!compatible(a, b))
                            report(e, "comparison of unrelated types " + typeToString(a) +
                                          " and " + typeToString(b));
                        return IfaqType::scalar(K::Bool);
                    case BinOpKind::Lt:
                    case BinOpKind::Le:
                        if (!compatible(a, b))
                            report(e, "ordering of unrelated types " + typeToString(a) +
                                          " and " + typeToString(b));
                        return IfaqType::scalar(K::Bool);
                    case BinOpKind::And:
                    case BinOpKind::Or:
                        if ((!a.isError() && a.kind != K::Bool) ||
                            (!b.isError() && b.kind != K::Bool))
                            report(e, "boolean operands required");
                        return IfaqType::scalar(K::Bool);
                    case BinOpKind::Min:
                        if ((!a.isError() && !a.isNumeric()) ||
                            (!b.isError() && !b.isNumeric()))
                            report(e, "numeric operands required for min");
                        return join(a, b);
                    case BinOpKind::Div:
                        if ((!a.isError() && !a.isNumeric()) ||
                            (!b.isError() && !b.isNumeric()))
                            report(e, "numeric operands required for /");
                        return IfaqType::scalar(K::Real);
                }
                return IfaqType::error();
            }
            case Expr::Kind::Sum:
            case Expr::Kind::DictBuild: {
                IfaqType coll = check(e->a);
                IfaqType elem = IfaqType::error();
                if (coll.kind == K::Set) elem = coll.args[0];
                else if (coll.kind == K::Dict && e->kind == Expr::Kind::Sum)
                    elem = coll.args[0];
                else if (!coll.isError())
                    report(e->a, (e->kind == Expr::Kind::Sum
                                      ? std::string("sum ranges over ")
                                      : std::string("lambda ranges over ")) +
                                     typeToString(coll) + ", expected a collection");
                env_.emplace_back(e->name, elem);
                IfaqType body = check(e->b);
                env_.pop_back();
                if (e->kind == Expr::Kind::DictBuild) return IfaqType::dict(elem, body);
                return body;
            }
            case Expr::Kind::DictLit: {
                if (e->pairs.empty()) {
                    report(e, "cannot infer the type of an empty dictionary literal");
                    return IfaqType::error();
                }
                IfaqType kt = check(e->pairs[0].first);
                IfaqType vt = check(e->pairs[0].second);
                for (std::size_t i = 1; i < e->pairs.size(); ++i) {
                    IfaqType k2 = check(e->pairs[i].first);
                    IfaqType v2 = check(e->pairs[i].second);
                    if (!compatible(kt, k2))
                        report(e->pairs[i].first,
                               "heterogeneous dictionary keys: " + typeToString(kt) +
                                   " vs " + typeToString(k2));
                    if (!compatible(vt, v2))
                        report(e->pairs[i].second,
                               "heterogeneous dictionary values: " + typeToString(vt) +
                                   " vs " + typeToString(v2));
                    kt = join(kt, k2);
                    vt = join(vt, v2);
                }
                return IfaqType::dict(kt, vt);
            }
            case Expr::Kind::SetLit: {
                if (e->items.empty()) {
                    report(e, "cannot infer the type of an empty set literal");
                    return IfaqType::error();
                }
                IfaqType et = check(e->items[0]);
                for (std::size_t i = 1; i < e->items.size(); ++i) {
                    IfaqType e2 = check(e->items[i]);
                    if (!compatible(et, e2))
                        report(e->items[i], "heterogeneous set elements: " +
                                                typeToString(et) + " vs " + typeToString(e2));
                    et = join(et, e2);
                }
                return IfaqType::set(et);
            }
            case Expr::Kind::Dom: {
                IfaqType t = check(e->a);
                if (t.kind == K::Dict) return IfaqType::set(t.args[0]);
                if (t.kind == K::Set) return t;
                if (!t.isError()) report(e, "dom of non-collection " + typeToString(t));
                return IfaqType::error();
            }
            case Expr::Kind::Lookup: {
                IfaqType d = check(e->a);
                IfaqType k = check(e->b);
                if (e->missingDefault) check(e->missingDefault);
                if (d.kind == K::Dict) {
                    if (!compatible(d.args[0], k))
                        report(e, "lookup key type " + typeToString(k) +
                                      " does not match dictionary key type " +
                                      typeToString(d.args[0]));
                    return d.args[1];
                }
                if (!d.isError())
                    report(e, "lookup into non-dictionary " + typeToString(d));
                return IfaqType::error();
            }
            case Expr::Kind::RecordLit: {
                std::vector<std::pair<std::string, IfaqType>> fs;
                for (const auto& [f, fe] : e->fields) fs.emplace_back(f, check(fe));
                return IfaqType::record(std::move(fs));
            }
            case Expr::Kind::VariantLit:
                return IfaqType::variant({{e->name, check(e->a)}});
            case Expr::Kind::FieldStatic: {
                IfaqType t = check(e->a);
                if (t.kind == K::Record || t.kind == K::Variant) {
                    for (const auto& [f, ft] : t.fields)
                        if (f == e->name) return ft;
                    report(e, typeToString(t) + " has no field " + e->name);
                    return IfaqType::error();
                }
                if (!t.isError())
                    report(e, "static field access on non-record " + typeToString(t));
                return IfaqType::error();
            }
            case Expr::Kind::FieldDyn:
                check(e->a);
                check(e->b);
                report(e, "dynamic field access is not available after schema "
                          "specialization");
                return IfaqType::error();
            case Expr::Kind::Let: {
                IfaqType bound = check(e->a);
                env_.emplace_back(e->name, bound);
                IfaqType t = check(e->b);
                env_.pop_back();
                return t;
            }
            case Expr::Kind::If: {
                IfaqType c = check(e->a);
                if (!c.isError() && c.kind != K::Bool)
                    report(e->a, "condition has type " + typeToString(c) + ", expected bool");
                IfaqType t1 = check(e->b);
                IfaqType t2 = check(e->c);
                if (!compatible(t1, t2) && !compatibleContainers(t1, t2))
                    report(e, "branches have different types " + typeToString(t1) + " and " +
                                  typeToString(t2));
                return join(t1, t2);
            }
        }
        return IfaqType::error();
    }
};

}  // namespace

TypecheckResult typecheck(const Program& p, const Schema& s) {
    Checker c(s);
    return c.run(p);
}

}  // namespace ifaq
