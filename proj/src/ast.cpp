#include "ifaq/ast.hpp"

#include <stdexcept>

namespace ifaq {

const char* unOpName(UnOpKind k) {
    switch (k) {
        case UnOpKind::Sqrt: return "sqrt";
        case UnOpKind::Abs: return "abs";
        case UnOpKind::Ln: return "ln";
    }
    return "?";
}

const char* binOpName(BinOpKind k) {
    switch (k) {
        case BinOpKind::Eq: return "==";
        case BinOpKind::Neq: return "!=";
        case BinOpKind::Lt: return "<";
        case BinOpKind::Le: return "<=";
        case BinOpKind::And: return "&&";
        case BinOpKind::Or: return "||";
        case BinOpKind::Min: return "min";
        case BinOpKind::Div: return "/";
    }
    return "?";
}

bool operator==(const Constant& a, const Constant& b) {
    if (a.tag != b.tag) return false;
    switch (a.tag) {
        case Constant::Tag::Field:
        case Constant::Tag::String: return a.text == b.text;
        case Constant::Tag::Int: return a.i == b.i;
        case Constant::Tag::Real: return a.r == b.r;
        case Constant::Tag::Bool: return a.b == b.b;
    }
    return false;
}

namespace {
std::shared_ptr<Expr> node(Expr::Kind k) {
    auto e = std::make_shared<Expr>();
    e->kind = k;
    return e;
}
}  // namespace

ExprPtr add(ExprPtr a, ExprPtr b) {
    auto e = node(Expr::Kind::Add);
    e->a = std::move(a);
    e->b = std::move(b);
    return e;
}

ExprPtr sub(ExprPtr a, ExprPtr b) { return add(std::move(a), neg(std::move(b))); }

ExprPtr mul(ExprPtr a, ExprPtr b) {
    auto e = node(Expr::Kind::Mul);
    e->a = std::move(a);
    e->b = std::move(b);
    return e;
}

ExprPtr neg(ExprPtr a) {
    auto e = node(Expr::Kind::Neg);
    e->a = std::move(a);
    return e;
}

ExprPtr unop(UnOpKind k, ExprPtr a) {
    auto e = node(Expr::Kind::UnOp);
    e->uop = k;
    e->a = std::move(a);
    return e;
}

ExprPtr binop(BinOpKind k, ExprPtr a, ExprPtr b) {
    auto e = node(Expr::Kind::BinOp);
    e->bop = k;
    e->a = std::move(a);
    e->b = std::move(b);
    return e;
}

ExprPtr lit(Constant c) {
    auto e = node(Expr::Kind::Const);
    e->constant = std::move(c);
    return e;
}

ExprPtr intLit(long long v) { return lit(Constant::integer(v)); }
ExprPtr realLit(double v) { return lit(Constant::real(v)); }
ExprPtr boolLit(bool v) { return lit(Constant::boolean(v)); }
ExprPtr fieldLit(std::string f) { return lit(Constant::field(std::move(f))); }
ExprPtr stringLit(std::string s) { return lit(Constant::str(std::move(s))); }

ExprPtr sum(std::string v, ExprPtr coll, ExprPtr body) {
    auto e = node(Expr::Kind::Sum);
    e->name = std::move(v);
    e->a = std::move(coll);
    e->b = std::move(body);
    return e;
}

ExprPtr dictBuild(std::string v, ExprPtr keys, ExprPtr body) {
    auto e = node(Expr::Kind::DictBuild);
    e->name = std::move(v);
    e->a = std::move(keys);
    e->b = std::move(body);
    return e;
}

ExprPtr dictLit(std::vector<std::pair<ExprPtr, ExprPtr>> entries) {
    auto e = node(Expr::Kind::DictLit);
    e->pairs = std::move(entries);
    return e;
}

ExprPtr setLit(std::vector<ExprPtr> elems) {
    auto e = node(Expr::Kind::SetLit);
    e->items = std::move(elems);
    return e;
}

ExprPtr dom(ExprPtr x) {
    auto e = node(Expr::Kind::Dom);
    e->a = std::move(x);
    return e;
}

ExprPtr lookup(ExprPtr d, ExprPtr k) {
    auto e = node(Expr::Kind::Lookup);
    e->a = std::move(d);
    e->b = std::move(k);
    return e;
}

ExprPtr lookupOrDefault(ExprPtr d, ExprPtr k, ExprPtr deflt) {
    auto e = node(Expr::Kind::Lookup);
    e->a = std::move(d);
    e->b = std::move(k);
    e->missingDefault = std::move(deflt);
    return e;
}

ExprPtr recordLit(std::vector<std::pair<std::string, ExprPtr>> fs) {
    auto e = node(Expr::Kind::RecordLit);
    e->fields = std::move(fs);
    return e;
}

ExprPtr variantLit(std::string field, ExprPtr v) {
    auto e = node(Expr::Kind::VariantLit);
    e->name = std::move(field);
    e->a = std::move(v);
    return e;
}

ExprPtr fieldStatic(ExprPtr x, std::string field) {
    auto e = node(Expr::Kind::FieldStatic);
    e->a = std::move(x);
    e->name = std::move(field);
    return e;
}

ExprPtr fieldDyn(ExprPtr x, ExprPtr field) {
    auto e = node(Expr::Kind::FieldDyn);
    e->a = std::move(x);
    e->b = std::move(field);
    return e;
}

ExprPtr let(std::string v, ExprPtr bound, ExprPtr body) {
    auto e = node(Expr::Kind::Let);
    e->name = std::move(v);
    e->a = std::move(bound);
    e->b = std::move(body);
    return e;
}

ExprPtr var(std::string name) {
    auto e = node(Expr::Kind::Var);
    e->name = std::move(name);
    return e;
}

ExprPtr ifThenElse(ExprPtr cond, ExprPtr then, ExprPtr els) {
    auto e = node(Expr::Kind::If);
    e->a = std::move(cond);
    e->b = std::move(then);
    e->c = std::move(els);
    return e;
}

std::vector<ExprPtr> children(const ExprPtr& e) {
    std::vector<ExprPtr> out;
    if (e->a) out.push_back(e->a);
    if (e->b) out.push_back(e->b);
    if (e->c) out.push_back(e->c);
    for (const auto& [k, v] : e->pairs) {
        out.push_back(k);
        out.push_back(v);
    }
    for (const auto& it : e->items) out.push_back(it);
    for (const auto& [f, v] : e->fields) out.push_back(v);
    if (e->missingDefault) out.push_back(e->missingDefault);
    return out;
}

ExprPtr rebuild(const ExprPtr& e, const std::vector<ExprPtr>& kids) {
    auto n = std::make_shared<Expr>(*e);
    std::size_t idx = 0;
    auto next = [&]() -> ExprPtr {
        if (idx >= kids.size()) throw std::logic_error("rebuild: child count mismatch");
        return kids[idx++];
    };
    if (n->a) n->a = next();
    if (n->b) n->b = next();
    if (n->c) n->c = next();
    for (auto& [k, v] : n->pairs) {
        k = next();
        v = next();
    }
    for (auto& it : n->items) it = next();
    for (auto& [f, v] : n->fields) v = next();
    if (n->missingDefault) n->missingDefault = next();
    if (idx != kids.size()) throw std::logic_error("rebuild: child count mismatch");
    return n;
}

}  // namespace ifaq
