#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <functional>
#include <set>

#include "ifaq/frontend.hpp"
#include "ifaq/ir_ops.hpp"

using namespace ifaq;

TEST_CASE("free variables") {
    auto e = parseExpr("sum(x in dom(Q)) Q(x) * x.f + y");
    auto fv = freeVars(e);
    CHECK(fv == std::set<std::string>{"Q", "y"});

    auto l = parseExpr("let a = b in a + a");
    CHECK(freeVars(l) == std::set<std::string>{"b"});
}

TEST_CASE("substitution avoids capture") {
    // Substituting y := x under a binder for x must rename the binder.
    auto e = parseExpr("sum(x in s) x + y");
    auto r = substitute(e, "y", var("x"));
    CHECK(freeVars(r) == std::set<std::string>{"s", "x"});
    CHECK(r->kind == Expr::Kind::Sum);
    CHECK(r->name != "x");
}

TEST_CASE("substitution replaces free occurrences only") {
    auto e = parseExpr("x + (let x = 1 in x)");
    auto r = substitute(e, "x", intLit(7));
    CHECK(exprEqual(r, parseExpr("7 + (let x = 1 in x)")));
}

TEST_CASE("flatten and rebuild n-ary chains") {
    auto e = parseExpr("a * b * c * d");
    auto fs = flattenMul(e);
    CHECK(fs.size() == 4);
    CHECK(exprEqual(rebuildMul(fs), e));

    auto s = parseExpr("a + b + c");
    CHECK(flattenAdd(s).size() == 3);
    CHECK(exprEqual(rebuildAdd({}), intLit(0)));
    CHECK(exprEqual(rebuildMul({}), intLit(1)));
}

TEST_CASE("exprEqual is commutative for + and *") {
    CHECK(exprEqual(parseExpr("a * b + c"), parseExpr("c + b * a")));
    CHECK(exprEqual(parseExpr("a * (b + c)"), parseExpr("(c + b) * a")));
    CHECK_FALSE(exprEqual(parseExpr("a - b"), parseExpr("b - a")));
}

TEST_CASE("exprEqual is alpha-blind") {
    CHECK(exprEqual(parseExpr("sum(x in s) x.f"), parseExpr("sum(t in s) t.f")));
    CHECK(exprEqual(parseExpr("lambda(x in s) {{x -> 1}}"),
                    parseExpr("lambda(y in s) {{y -> 1}}")));
    CHECK_FALSE(exprEqual(parseExpr("sum(x in s) x.f"), parseExpr("sum(x in s) x.g")));
}

TEST_CASE("exprEqual distinguishes non-associative structure") {
    CHECK_FALSE(exprEqual(parseExpr("a / b"), parseExpr("b / a")));
    CHECK_FALSE(exprEqual(parseExpr("min(a, b)"), parseExpr("a")));
    CHECK(exprEqual(parseExpr("min(a, b)"), parseExpr("min(a, b)")));
}

TEST_CASE("alphaRename makes binders distinct") {
    Program p = parseProgram(
        "let Q = sum(x in s) x in\n"
        "sum(x in s) (sum(x in t) x) + Q");
    Program r = alphaRename(p);
    // Collect all binder names.
    std::vector<std::string> binders;
    std::function<void(const ExprPtr&)> walk = [&](const ExprPtr& e) {
        if (e->kind == Expr::Kind::Sum || e->kind == Expr::Kind::DictBuild ||
            e->kind == Expr::Kind::Let)
            binders.push_back(e->name);
        for (const auto& k : children(e)) walk(k);
    };
    for (auto& [n, e] : r.prelude) {
        binders.push_back(n);
        walk(e);
    }
    walk(r.result);
    std::set<std::string> uniq(binders.begin(), binders.end());
    CHECK(uniq.size() == binders.size());
    CHECK(programEqual(p, r));
}

TEST_CASE("NameSupply is deterministic") {
    NameSupply ns;
    ns.reserve("v");
    CHECK(ns.fresh("v") == "v_1");
    CHECK(ns.fresh("v") == "v_2");
    CHECK(ns.fresh("w") == "w");
}

TEST_CASE("exprSize counts nodes") {
    CHECK(exprSize(intLit(1)) == 1);
    CHECK(exprSize(parseExpr("a + b")) == 3);
    CHECK(exprSize(parseExpr("sum(x in s) x")) == 3);
}
