#include <cctype>
#include <cstdlib>
#include <vector>

#include "ifaq/frontend.hpp"

namespace ifaq {

namespace {

struct Token {
    enum class Kind { Ident, Int, Real, String, Field, Punct, End } kind;
    std::string text;
    long long i = 0;
    double r = 0.0;
    int line = 1, col = 1;
};

class Lexer {
public:
    explicit Lexer(const std::string& src) : src_(src) { advance(); }

    const Token& peek() const { return tok_; }
    Token take() {
        Token t = tok_;
        advance();
        return t;
    }

private:
    void advance() {
        skipWs();
        tok_ = Token{Token::Kind::End, "", 0, 0.0, line_, col_};
        if (pos_ >= src_.size()) return;
        char c = src_[pos_];
        int line = line_, col = col_;
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::string id;
            while (pos_ < src_.size() &&
                   (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
                id += get();
            tok_ = Token{Token::Kind::Ident, id, 0, 0.0, line, col};
            return;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) ||
            (c == '.' && pos_ + 1 < src_.size() &&
             std::isdigit(static_cast<unsigned char>(src_[pos_ + 1])))) {
            std::string num;
            bool real = false;
            while (pos_ < src_.size() &&
                   (std::isdigit(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '.' ||
                    src_[pos_] == 'e' || src_[pos_] == 'E' ||
                    ((src_[pos_] == '+' || src_[pos_] == '-') && !num.empty() &&
                     (num.back() == 'e' || num.back() == 'E')))) {
                if (src_[pos_] == '.' || src_[pos_] == 'e' || src_[pos_] == 'E') real = true;
                num += get();
            }
            if (real)
                tok_ = Token{Token::Kind::Real, num, 0, std::strtod(num.c_str(), nullptr), line, col};
            else
                tok_ = Token{Token::Kind::Int, num, std::strtoll(num.c_str(), nullptr, 10), 0.0,
                             line, col};
            return;
        }
        if (c == '"') {
            get();
            std::string s;
            while (pos_ < src_.size() && src_[pos_] != '"') s += get();
            if (pos_ >= src_.size()) throw ParseError(line, col, "unterminated string literal");
            get();
            tok_ = Token{Token::Kind::String, s, 0, 0.0, line, col};
            return;
        }
        if (c == '`') {
            get();
            std::string s;
            while (pos_ < src_.size() && src_[pos_] != '`') s += get();
            if (pos_ >= src_.size()) throw ParseError(line, col, "unterminated field literal");
            get();
            tok_ = Token{Token::Kind::Field, s, 0, 0.0, line, col};
            return;
        }
        // multi-char punctuation
        static const char* two[] = {"<-", "->", "==", "!=", "<=", "&&", "||"};
        for (const char* t : two) {
            if (src_.compare(pos_, 2, t) == 0) {
                get();
                get();
                tok_ = Token{Token::Kind::Punct, t, 0, 0.0, line, col};
                return;
            }
        }
        get();
        tok_ = Token{Token::Kind::Punct, std::string(1, c), 0, 0.0, line, col};
    }

    char get() {
        char c = src_[pos_++];
        if (c == '\n') {
            ++line_;
            col_ = 1;
        } else {
            ++col_;
        }
        return c;
    }

    void skipWs() {
        while (pos_ < src_.size()) {
            char c = src_[pos_];
            if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
                get();
            } else if (c == '-' && pos_ + 1 < src_.size() && src_[pos_ + 1] == '-') {
                while (pos_ < src_.size() && src_[pos_] != '\n') get();
            } else {
                break;
            }
        }
    }

    const std::string& src_;
    std::size_t pos_ = 0;
    int line_ = 1, col_ = 1;
    Token tok_;
};

bool isReserved(const std::string& id) {
    static const char* words[] = {"let", "in",  "sum",  "lambda", "dom",  "if",  "then",
                                  "else", "while", "true", "false",  "sqrt", "abs", "ln",
                                  "min"};
    for (const char* w : words)
        if (id == w) return true;
    return false;
}

class Parser {
public:
    explicit Parser(const std::string& src) : lex_(src) {}

    Program program() {
        Program p;
        while (peekIdent("let")) {
            lex_.take();
            std::string name = ident();
            expect("=");
            ExprPtr rhs = expr();
            expectIdent("in");
            p.prelude.emplace_back(name, rhs);
        }
        if (lex_.peek().kind == Token::Kind::Ident && !isReserved(lex_.peek().text)) {
            // Lookahead for "x <- ...".
            Token save = lex_.peek();
            std::string name = save.text;
            Lexer probe = lex_;
            probe.take();
            if (probe.peek().kind == Token::Kind::Punct && probe.peek().text == "<-") {
                lex_.take();
                lex_.take();
                Program::Loop l;
                l.var = name;
                l.init = expr();
                expect(";");
                expectIdent("while");
                expect("(");
                l.cond = expr();
                expect(")");
                expect("{");
                std::string v2 = ident();
                if (v2 != name)
                    throw ParseError(save.line, save.col,
                                     "loop body must assign the loop variable '" + name + "'");
                expect("=");
                l.step = expr();
                expect("}");
                p.loop = std::move(l);
            }
        }
        p.result = expr();
        if (lex_.peek().kind != Token::Kind::End)
            throw ParseError(lex_.peek().line, lex_.peek().col, "trailing input after program");
        return p;
    }

    ExprPtr expression() {
        ExprPtr e = expr();
        if (lex_.peek().kind != Token::Kind::End)
            throw ParseError(lex_.peek().line, lex_.peek().col, "trailing input after expression");
        return e;
    }

private:
    bool peekPunct(const std::string& t) {
        return lex_.peek().kind == Token::Kind::Punct && lex_.peek().text == t;
    }
    bool peekIdent(const std::string& t) {
        return lex_.peek().kind == Token::Kind::Ident && lex_.peek().text == t;
    }
    void expect(const std::string& t) {
        if (!peekPunct(t))
            throw ParseError(lex_.peek().line, lex_.peek().col,
                             "expected '" + t + "', got '" + lex_.peek().text + "'");
        lex_.take();
    }
    void expectIdent(const std::string& t) {
        if (!peekIdent(t))
            throw ParseError(lex_.peek().line, lex_.peek().col,
                             "expected '" + t + "', got '" + lex_.peek().text + "'");
        lex_.take();
    }
    std::string ident() {
        if (lex_.peek().kind != Token::Kind::Ident)
            throw ParseError(lex_.peek().line, lex_.peek().col, "expected identifier");
        if (isReserved(lex_.peek().text))
            throw ParseError(lex_.peek().line, lex_.peek().col,
                             "reserved word '" + lex_.peek().text + "' used as identifier");
        return lex_.take().text;
    }

    ExprPtr withLoc(ExprPtr e, const Token& t) {
        auto n = std::const_pointer_cast<Expr>(e);
        n->line = t.line;
        n->col = t.col;
        return n;
    }

    ExprPtr expr() { return orExpr(); }

    ExprPtr orExpr() {
        ExprPtr e = andExpr();
        while (peekPunct("||")) {
            Token t = lex_.take();
            e = withLoc(binop(BinOpKind::Or, e, andExpr()), t);
        }
        return e;
    }

    ExprPtr andExpr() {
        ExprPtr e = cmpExpr();
        while (peekPunct("&&")) {
            Token t = lex_.take();
            e = withLoc(binop(BinOpKind::And, e, cmpExpr()), t);
        }
        return e;
    }

    ExprPtr cmpExpr() {
        ExprPtr e = addExpr();
        if (peekPunct("==") || peekPunct("!=") || peekPunct("<=") || peekPunct("<")) {
            Token t = lex_.take();
            std::string op = t.text;
            ExprPtr rhs = addExpr();
            BinOpKind k = op == "==" ? BinOpKind::Eq
                          : op == "!=" ? BinOpKind::Neq
                          : op == "<=" ? BinOpKind::Le
                                       : BinOpKind::Lt;
            e = withLoc(binop(k, e, rhs), t);
        }
        return e;
    }

    ExprPtr addExpr() {
        ExprPtr e = mulExpr();
        while (peekPunct("+") || peekPunct("-")) {
            Token t = lex_.take();
            ExprPtr rhs = mulExpr();
            e = withLoc(t.text == "+" ? add(e, rhs) : sub(e, rhs), t);
        }
        return e;
    }

    ExprPtr mulExpr() {
        ExprPtr e = unary();
        while (peekPunct("*") || peekPunct("/")) {
            Token t = lex_.take();
            ExprPtr rhs = unary();
            e = withLoc(t.text == "*" ? mul(e, rhs) : binop(BinOpKind::Div, e, rhs), t);
        }
        return e;
    }

    ExprPtr unary() {
        if (peekPunct("-")) {
            Token t = lex_.take();
            return withLoc(neg(unary()), t);
        }
        return postfix();
    }

    ExprPtr postfix() {
        ExprPtr e = primary();
        for (;;) {
            if (peekPunct("(")) {
                Token t = lex_.take();
                ExprPtr key = expr();
                expect(")");
                e = withLoc(lookup(e, key), t);
            } else if (peekPunct(".")) {
                Token t = lex_.take();
                if (lex_.peek().kind != Token::Kind::Ident)
                    throw ParseError(lex_.peek().line, lex_.peek().col, "expected field name");
                e = withLoc(fieldStatic(e, lex_.take().text), t);
            } else if (peekPunct("[")) {
                Token t = lex_.take();
                ExprPtr f = expr();
                expect("]");
                e = withLoc(fieldDyn(e, f), t);
            } else {
                return e;
            }
        }
    }

    ExprPtr primary() {
        Token t = lex_.peek();
        switch (t.kind) {
            case Token::Kind::Int: lex_.take(); return withLoc(intLit(t.i), t);
            case Token::Kind::Real: lex_.take(); return withLoc(realLit(t.r), t);
            case Token::Kind::String: lex_.take(); return withLoc(stringLit(t.text), t);
            case Token::Kind::Field: lex_.take(); return withLoc(fieldLit(t.text), t);
            case Token::Kind::Ident: {
                if (t.text == "true") { lex_.take(); return withLoc(boolLit(true), t); }
                if (t.text == "false") { lex_.take(); return withLoc(boolLit(false), t); }
                if (t.text == "sum" || t.text == "lambda") {
                    lex_.take();
                    expect("(");
                    std::string v = ident();
                    expectIdent("in");
                    ExprPtr coll = expr();
                    expect(")");
                    ExprPtr body = expr();
                    ExprPtr e = t.text == "sum" ? sum(v, coll, body) : dictBuild(v, coll, body);
                    return withLoc(e, t);
                }
                if (t.text == "dom") {
                    lex_.take();
                    expect("(");
                    ExprPtr e = expr();
                    expect(")");
                    return withLoc(dom(e), t);
                }
                if (t.text == "sqrt" || t.text == "abs" || t.text == "ln") {
                    lex_.take();
                    expect("(");
                    ExprPtr e = expr();
                    expect(")");
                    UnOpKind k = t.text == "sqrt" ? UnOpKind::Sqrt
                                 : t.text == "abs" ? UnOpKind::Abs
                                                   : UnOpKind::Ln;
                    return withLoc(unop(k, e), t);
                }
                if (t.text == "min") {
                    lex_.take();
                    expect("(");
                    ExprPtr a = expr();
                    expect(",");
                    ExprPtr b = expr();
                    expect(")");
                    return withLoc(binop(BinOpKind::Min, a, b), t);
                }
                if (t.text == "let") {
                    lex_.take();
                    std::string v = ident();
                    expect("=");
                    ExprPtr bound = expr();
                    expectIdent("in");
                    ExprPtr body = expr();
                    return withLoc(let(v, bound, body), t);
                }
                if (t.text == "if") {
                    lex_.take();
                    ExprPtr c = expr();
                    expectIdent("then");
                    ExprPtr th = expr();
                    expectIdent("else");
                    ExprPtr el = expr();
                    return withLoc(ifThenElse(c, th, el), t);
                }
                if (isReserved(t.text))
                    throw ParseError(t.line, t.col, "unexpected keyword '" + t.text + "'");
                lex_.take();
                return withLoc(var(t.text), t);
            }
            case Token::Kind::Punct: {
                if (t.text == "(") {
                    lex_.take();
                    ExprPtr e = expr();
                    expect(")");
                    return e;
                }
                if (t.text == "{") {
                    lex_.take();
                    if (peekPunct("{")) {  // dictionary literal
                        lex_.take();
                        std::vector<std::pair<ExprPtr, ExprPtr>> entries;
                        if (!peekPunct("}")) {
                            for (;;) {
                                ExprPtr k = expr();
                                expect("->");
                                ExprPtr v = expr();
                                entries.emplace_back(k, v);
                                if (peekPunct(",")) { lex_.take(); continue; }
                                break;
                            }
                        }
                        expect("}");
                        expect("}");
                        return withLoc(dictLit(std::move(entries)), t);
                    }
                    std::vector<std::pair<std::string, ExprPtr>> fs;
                    if (!peekPunct("}")) {
                        for (;;) {
                            std::string f = ident();
                            expect("=");
                            fs.emplace_back(f, expr());
                            if (peekPunct(",")) { lex_.take(); continue; }
                            break;
                        }
                    }
                    expect("}");
                    return withLoc(recordLit(std::move(fs)), t);
                }
                if (t.text == "[") {
                    lex_.take();
                    expect("[");
                    std::vector<ExprPtr> items;
                    if (!peekPunct("]")) {
                        for (;;) {
                            items.push_back(expr());
                            if (peekPunct(",")) { lex_.take(); continue; }
                            break;
                        }
                    }
                    expect("]");
                    expect("]");
                    return withLoc(setLit(std::move(items)), t);
                }
                if (t.text == "<") {
                    lex_.take();
                    std::string f = ident();
                    expect("=");
                    ExprPtr e = expr();
                    expect(">");
                    return withLoc(variantLit(f, e), t);
                }
                break;
            }
            case Token::Kind::End: break;
        }
        throw ParseError(t.line, t.col, "unexpected token '" + t.text + "'");
    }

    Lexer lex_;
};

}  // namespace

Program parseProgram(const std::string& src) { return Parser(src).program(); }
ExprPtr parseExpr(const std::string& src) { return Parser(src).expression(); }

}  // namespace ifaq
