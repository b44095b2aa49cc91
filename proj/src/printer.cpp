#include <sstream>

#include "ifaq/frontend.hpp"

namespace ifaq {

namespace {

// Precedence levels, higher binds tighter.
enum Prec { PrecOr = 1, PrecAnd, PrecCmp, PrecAdd, PrecMul, PrecUnary, PrecPostfix, PrecAtom };

int precOf(const ExprPtr& e) {
    switch (e->kind) {
        case Expr::Kind::Add: return PrecAdd;
        case Expr::Kind::Mul: return PrecMul;
        case Expr::Kind::Neg: return PrecUnary;
        case Expr::Kind::BinOp:
            switch (e->bop) {
                case BinOpKind::Or: return PrecOr;
                case BinOpKind::And: return PrecAnd;
                case BinOpKind::Div: return PrecMul;
                case BinOpKind::Min: return PrecAtom;
                default: return PrecCmp;
            }
        case Expr::Kind::Lookup:
        case Expr::Kind::FieldStatic:
        case Expr::Kind::FieldDyn:
        case Expr::Kind::Dom: return PrecPostfix;
        case Expr::Kind::Sum:
        case Expr::Kind::DictBuild:
        case Expr::Kind::Let:
        case Expr::Kind::If: return PrecOr;  // always parenthesize as operands
        default: return PrecAtom;
    }
}

void emit(std::ostream& os, const ExprPtr& e, int minPrec);

void emitChild(std::ostream& os, const ExprPtr& e, int minPrec) {
    bool paren = precOf(e) < minPrec;
    if (paren) os << '(';
    emit(os, e, paren ? PrecOr : minPrec);
    if (paren) os << ')';
}

void emitReal(std::ostream& os, double r) {
    std::ostringstream t;
    t.precision(17);
    t << r;
    std::string s = t.str();
    if (s.find('.') == std::string::npos && s.find('e') == std::string::npos &&
        s.find("inf") == std::string::npos && s.find("nan") == std::string::npos)
        s += ".0";
    os << s;
}

void emit(std::ostream& os, const ExprPtr& e, int minPrec) {
    switch (e->kind) {
        case Expr::Kind::Add: {
            // Render a + (-b) as a - b.
            emitChild(os, e->a, PrecAdd);
            if (e->b->kind == Expr::Kind::Neg) {
                os << " - ";
                emitChild(os, e->b->a, PrecAdd + 1);
            } else {
                os << " + ";
                emitChild(os, e->b, PrecAdd + 1);
            }
            return;
        }
        case Expr::Kind::Mul:
            emitChild(os, e->a, PrecMul);
            os << " * ";
            emitChild(os, e->b, PrecMul + 1);
            return;
        case Expr::Kind::Neg:
            os << '-';
            // Parenthesize a nested negation; "--" would lex as a comment.
            if (e->a->kind == Expr::Kind::Neg) {
                os << '(';
                emit(os, e->a, PrecOr);
                os << ')';
            } else {
                emitChild(os, e->a, PrecUnary);
            }
            return;
        case Expr::Kind::UnOp:
            os << unOpName(e->uop) << '(';
            emit(os, e->a, PrecOr);
            os << ')';
            return;
        case Expr::Kind::BinOp:
            if (e->bop == BinOpKind::Min) {
                os << "min(";
                emit(os, e->a, PrecOr);
                os << ", ";
                emit(os, e->b, PrecOr);
                os << ')';
                return;
            }
            {
                int p = precOf(e);
                emitChild(os, e->a, p + (e->bop == BinOpKind::Div ? 0 : 1));
                os << ' ' << binOpName(e->bop) << ' ';
                emitChild(os, e->b, p + 1);
            }
            return;
        case Expr::Kind::Const:
            switch (e->constant.tag) {
                case Constant::Tag::Field: os << '`' << e->constant.text << '`'; return;
                case Constant::Tag::String: os << '"' << e->constant.text << '"'; return;
                case Constant::Tag::Int: os << e->constant.i; return;
                case Constant::Tag::Real: emitReal(os, e->constant.r); return;
                case Constant::Tag::Bool: os << (e->constant.b ? "true" : "false"); return;
            }
            return;
        case Expr::Kind::Sum:
            os << "sum(" << e->name << " in ";
            emit(os, e->a, PrecOr);
            os << ") ";
            emit(os, e->b, PrecOr);
            return;
        case Expr::Kind::DictBuild:
            os << "lambda(" << e->name << " in ";
            emit(os, e->a, PrecOr);
            os << ") ";
            emit(os, e->b, PrecOr);
            return;
        case Expr::Kind::DictLit: {
            os << "{{";
            bool first = true;
            for (const auto& [k, v] : e->pairs) {
                if (!first) os << ", ";
                first = false;
                emit(os, k, PrecOr);
                os << " -> ";
                emit(os, v, PrecOr);
            }
            os << "}}";
            return;
        }
        case Expr::Kind::SetLit: {
            os << "[[";
            bool first = true;
            for (const auto& it : e->items) {
                if (!first) os << ", ";
                first = false;
                emit(os, it, PrecOr);
            }
            os << "]]";
            return;
        }
        case Expr::Kind::Dom:
            os << "dom(";
            emit(os, e->a, PrecOr);
            os << ')';
            return;
        case Expr::Kind::Lookup:
            emitChild(os, e->a, PrecPostfix);
            os << '(';
            emit(os, e->b, PrecOr);
            os << ')';
            return;
        case Expr::Kind::RecordLit: {
            os << '{';
            bool first = true;
            for (const auto& [f, v] : e->fields) {
                if (!first) os << ", ";
                first = false;
                os << f << " = ";
                emit(os, v, PrecOr);
            }
            os << '}';
            return;
        }
        case Expr::Kind::VariantLit:
            os << '<' << e->name << " = ";
            emit(os, e->a, PrecOr);
            os << '>';
            return;
        case Expr::Kind::FieldStatic:
            emitChild(os, e->a, PrecPostfix);
            os << '.' << e->name;
            return;
        case Expr::Kind::FieldDyn:
            emitChild(os, e->a, PrecPostfix);
            os << '[';
            emit(os, e->b, PrecOr);
            os << ']';
            return;
        case Expr::Kind::Let:
            os << "let " << e->name << " = ";
            emit(os, e->a, PrecOr);
            os << " in\n";
            emit(os, e->b, PrecOr);
            return;
        case Expr::Kind::Var:
            os << e->name;
            return;
        case Expr::Kind::If:
            os << "if ";
            emit(os, e->a, PrecOr);
            os << " then ";
            emit(os, e->b, PrecOr);
            os << " else ";
            emit(os, e->c, PrecOr);
            return;
    }
}

}  // namespace

std::string printExpr(const ExprPtr& e) {
    std::ostringstream os;
    emit(os, e, PrecOr);
    return os.str();
}

std::string printProgram(const Program& p) {
    std::ostringstream os;
    for (const auto& [name, rhs] : p.prelude)
        os << "let " << name << " = " << printExpr(rhs) << " in\n";
    if (p.loop) {
        os << p.loop->var << " <- " << printExpr(p.loop->init) << ";\n";
        os << "while (" << printExpr(p.loop->cond) << ") {\n";
        os << "  " << p.loop->var << " = " << printExpr(p.loop->step) << "\n}\n";
    }
    os << printExpr(p.result) << "\n";
    return os.str();
}

}  // namespace ifaq
