// End-to-end acceptance gate. Each criterion prints exactly one PASS/FAIL
// line; the process exits nonzero when any criterion fails.
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "ifaq/aggopt.hpp"
#include "ifaq/apps.hpp"
#include "ifaq/data.hpp"
#include "ifaq/exec.hpp"
#include "ifaq/frontend.hpp"
#include "ifaq/interp.hpp"
#include "ifaq/ir_ops.hpp"
#include "ifaq/rewrite.hpp"
#include "ifaq/rng.hpp"

using namespace ifaq;

namespace {

struct CheckFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void check(bool cond, const std::string& what) {
    if (!cond) throw CheckFailure(what);
}

using Clock = std::chrono::steady_clock;

double secondsSince(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

// ---------------------------------------------------------------------------
// Shared fixtures.

const char* kBgdSource =
    "let F = [[`i`, `s`, `c`, `p`]] in\n"
    "theta <- {{`i` -> 0.0, `s` -> 0.0, `c` -> 0.0, `p` -> 0.0}};\n"
    "while (true) {\n"
    "  theta = lambda(f1 in F) (theta(f1) -\n"
    "    sum(x in dom(Q)) (Q(x) * sum(f2 in F) theta(f2) * x[f2]) * x[f1])\n"
    "}\n"
    "theta";

Schema bgdSchema() {
    Schema s;
    s.relations = {{"Q",
                    {{"i", ScalarType::Int},
                     {"s", ScalarType::Int},
                     {"c", ScalarType::Int},
                     {"p", ScalarType::Int},
                     {"u", ScalarType::Int}},
                    1000}};
    s.label = "u";
    return s;
}

Schema toySchema() {
    Schema sc;
    sc.relations = {{"S",
                     {{"i", ScalarType::Int},
                      {"s", ScalarType::Int},
                      {"u", ScalarType::Int}},
                     1000},
                    {"R", {{"s", ScalarType::Int}, {"c", ScalarType::Int}}, 100},
                    {"I", {{"i", ScalarType::Int}, {"p", ScalarType::Int}}, 50}};
    sc.label = "u";
    sc.featureSets["features"] = {"i", "s", "c", "p"};
    JoinTree jt;
    jt.root = "S";
    jt.edges = {{"S", "R", {"s"}}, {"S", "I", {"i"}}};
    sc.joinTree = jt;
    return sc;
}

Value tuple(std::vector<std::pair<std::string, long long>> fs) {
    std::vector<std::pair<std::string, Value>> rec;
    for (auto& [k, v] : fs) rec.emplace_back(k, Value::integer(v));
    return Value::record(std::move(rec));
}

Database toyDb() {
    Database db;
    db["S"] = Value::makeDict({{tuple({{"i", 1}, {"s", 1}, {"u", 2}}), Value::integer(1)},
                               {tuple({{"i", 1}, {"s", 2}, {"u", 4}}), Value::integer(1)}});
    db["R"] = Value::makeDict({{tuple({{"s", 1}, {"c", 10}}), Value::integer(1)},
                               {tuple({{"s", 2}, {"c", 20}}), Value::integer(1)}});
    db["I"] = Value::makeDict({{tuple({{"i", 1}, {"p", 5}}), Value::integer(1)}});
    return db;
}

Database randomStarDb(SplitMix64& rng) {
    Database db;
    auto makeRel = [&](std::vector<std::string> attrs, int n, long long range) {
        std::vector<std::pair<Value, Value>> rel;
        for (int k = 0; k < n; ++k) {
            std::vector<std::pair<std::string, long long>> fs;
            for (const auto& a : attrs)
                fs.emplace_back(a, (long long)rng.below(range) - range / 2);
            Value t = tuple(std::move(fs));
            bool found = false;
            for (auto& [kk, vv] : rel)
                if (kk == t) {
                    vv = Value::integer(vv.i + 1);
                    found = true;
                }
            if (!found) rel.emplace_back(std::move(t), Value::integer(1 + rng.below(2)));
        }
        return Value::makeDict(std::move(rel));
    };
    db["S"] = makeRel({"i", "s", "u"}, 3 + (int)rng.below(15), 6);
    db["R"] = makeRel({"s", "c"}, 1 + (int)rng.below(5), 6);
    db["I"] = makeRel({"i", "p"}, 1 + (int)rng.below(5), 6);
    return db;
}

struct JoinedTuple {
    std::map<std::string, double> a;
    double mult;
};

double fieldOf(const Value& rec, const std::string& f) {
    for (const auto& [k, v] : rec.rec)
        if (k == f) return v.asReal();
    throw CheckFailure("missing field " + f);
}

std::vector<JoinedTuple> bruteJoin(const Database& db) {
    std::vector<JoinedTuple> out;
    for (const auto& [ts, ms] : db.at("S").dict)
        for (const auto& [tr, mr] : db.at("R").dict)
            for (const auto& [ti, mi] : db.at("I").dict) {
                if (fieldOf(ts, "s") != fieldOf(tr, "s")) continue;
                if (fieldOf(ts, "i") != fieldOf(ti, "i")) continue;
                JoinedTuple t;
                t.a["i"] = fieldOf(ts, "i");
                t.a["s"] = fieldOf(ts, "s");
                t.a["u"] = fieldOf(ts, "u");
                t.a["c"] = fieldOf(tr, "c");
                t.a["p"] = fieldOf(ti, "p");
                t.mult = ms.asReal() * mr.asReal() * mi.asReal();
                out.push_back(std::move(t));
            }
    return out;
}

double recField(const Value& v, const std::string& f) {
    check(v.kind == Value::Kind::Record, "expected a record result");
    for (const auto& [k, x] : v.rec)
        if (k == f) return x.asReal();
    throw CheckFailure("missing record field " + f);
}

std::pair<Value, CostStats> runOptimized(const Program& p, const Schema& s,
                                         const Database& db, const IterationPolicy& pol,
                                         const PlanOptions& opts = {}) {
    Program hl = runHighLevelPipeline(p, s).final;
    Program opt = applyAggOpt(hl, s);
    return execute(chooseLayouts(opt, s, db, opts), db, pol);
}

// ---------------------------------------------------------------------------
// Criterion 1: the golden rewrite chain.

ExprPtr stageStep(const PipelineResult& r, const std::string& stage) {
    for (const auto& [name, p] : r.stages)
        if (name == stage) {
            check(p.loop.has_value(), "stage " + stage + " lost the loop");
            return p.loop->step;
        }
    throw CheckFailure("missing stage " + stage);
}

Program stageProgram(const PipelineResult& r, const std::string& stage) {
    for (const auto& [name, p] : r.stages)
        if (name == stage) return p;
    throw CheckFailure("missing stage " + stage);
}

void criterion1() {
    auto t0 = Clock::now();
    Program p = parseProgram(kBgdSource);
    PipelineResult r = runHighLevelPipeline(p, bgdSchema());

    auto expectStep = [&](const std::string& stage, const std::string& want) {
        check(exprEqual(stageStep(r, stage), parseExpr(want)),
              "stage " + stage + " diverged from the golden form");
    };
    expectStep("normalize",
               "lambda(f1 in F) (theta(f1) - sum(x in dom(Q)) Q(x) * "
               "(sum(f2 in F) theta(f2) * x[f2] * x[f1]))");
    expectStep("schedule",
               "lambda(f1 in F) (theta(f1) - sum(f2 in F) sum(x in dom(Q)) "
               "Q(x) * theta(f2) * x[f2] * x[f1])");
    expectStep("factorize",
               "lambda(f1 in F) (theta(f1) - sum(f2 in F) theta(f2) * "
               "(sum(x in dom(Q)) Q(x) * x[f2] * x[f1]))");
    expectStep("memoize",
               "let m = lambda(f1 in F) lambda(f2 in F) "
               "sum(x in dom(Q)) Q(x) * x[f2] * x[f1] in "
               "lambda(f1 in F) (theta(f1) - sum(f2 in F) theta(f2) * m(f1)(f2))");

    Program licm = parseProgram(
        "let F = [[`i`, `s`, `c`, `p`]] in\n"
        "let m = lambda(f1 in F) lambda(f2 in F) "
        "sum(x in dom(Q)) Q(x) * x[f1] * x[f2] in\n"
        "theta <- {{`i` -> 0.0, `s` -> 0.0, `c` -> 0.0, `p` -> 0.0}};\n"
        "while (true) {\n"
        "  theta = lambda(f1 in F) (theta(f1) - sum(f2 in F) theta(f2) * m(f1)(f2))\n"
        "}\n"
        "theta");
    check(programEqual(stageProgram(r, "licm"), licm),
          "licm stage diverged from the golden form");

    // Final specialized record program.
    auto cov = [](const std::string& f1, const std::string& f2) {
        return "sum(x in dom(Q)) Q(x) * x." + f1 + " * x." + f2;
    };
    std::vector<std::string> fs = {"i", "s", "c", "p"};
    std::string m = "let m = {";
    for (std::size_t i = 0; i < fs.size(); ++i) {
        m += fs[i] + " = {";
        for (std::size_t j = 0; j < fs.size(); ++j) {
            m += fs[j] + " = " + cov(fs[i], fs[j]);
            if (j + 1 < fs.size()) m += ", ";
        }
        m += "}";
        if (i + 1 < fs.size()) m += ", ";
    }
    m += "} in\n";
    std::string step = "  theta = {";
    for (std::size_t i = 0; i < fs.size(); ++i) {
        step += fs[i] + " = theta." + fs[i] + " - (";
        for (std::size_t j = 0; j < fs.size(); ++j) {
            step += "theta." + fs[j] + " * m." + fs[i] + "." + fs[j];
            if (j + 1 < fs.size()) step += " + ";
        }
        step += ")";
        if (i + 1 < fs.size()) step += ", ";
    }
    step += "}\n";
    Program want = parseProgram(
        m + "theta <- {i = 0.0, s = 0.0, c = 0.0, p = 0.0};\nwhile (true) {\n" + step +
        "}\ntheta");
    check(programEqual(r.final, want), "final specialized program diverged");
    check(secondsSince(t0) < 1.0, "golden chain exceeded 1s");
}

// ---------------------------------------------------------------------------
// Criterion 2: randomized rule soundness, >= 1000 expressions per family.

struct GenCtx {
    SplitMix64& rng;
    std::vector<std::string> tupleVars;
    std::vector<std::string> fieldVars;
    std::vector<std::string> scalarVars;
    int nextId = 0;

    std::string fresh(const std::string& base) {
        return base + std::to_string(nextId++);
    }
};

ExprPtr genScalar(GenCtx& g, int depth);

ExprPtr genAtom(GenCtx& g) {
    int pick = (int)g.rng.below(4);
    if (pick == 0 && !g.tupleVars.empty()) {
        const auto& v = g.tupleVars[g.rng.below((long long)g.tupleVars.size())];
        if (!g.fieldVars.empty() && g.rng.below(2) == 0) {
            const auto& f = g.fieldVars[g.rng.below((long long)g.fieldVars.size())];
            return fieldDyn(var(v), var(f));
        }
        return fieldStatic(var(v), g.rng.below(2) == 0 ? "a" : "b");
    }
    if (pick == 1 && !g.scalarVars.empty())
        return var(g.scalarVars[g.rng.below((long long)g.scalarVars.size())]);
    return intLit(g.rng.below(7) - 3);
}

ExprPtr genScalar(GenCtx& g, int depth) {
    if (depth <= 0) return genAtom(g);
    switch (g.rng.below(8)) {
        case 0:
            return add(genScalar(g, depth - 1), genScalar(g, depth - 1));
        case 1:
            return mul(genScalar(g, depth - 1), genScalar(g, depth - 1));
        case 2:
            return neg(genScalar(g, depth - 1));
        case 3: {
            std::string x = g.fresh("t");
            g.tupleVars.push_back(x);
            ExprPtr body = genScalar(g, depth - 1);
            if (g.rng.below(2) == 0) body = mul(lookup(var("Q"), var(x)), body);
            g.tupleVars.pop_back();
            return sum(x, dom(var("Q")), body);
        }
        case 4: {
            std::string f = g.fresh("f");
            g.fieldVars.push_back(f);
            ExprPtr body = genScalar(g, depth - 1);
            g.fieldVars.pop_back();
            return sum(f, setLit({fieldLit("a"), fieldLit("b")}), body);
        }
        case 5: {
            std::string y = g.fresh("v");
            ExprPtr bound = genScalar(g, depth - 1);
            g.scalarVars.push_back(y);
            ExprPtr body = genScalar(g, depth - 1);
            g.scalarVars.pop_back();
            return let(y, bound, body);
        }
        case 6: {
            ExprPtr c = binop(g.rng.below(2) == 0 ? BinOpKind::Lt : BinOpKind::Le,
                              genScalar(g, depth - 1), genScalar(g, depth - 1));
            return ifThenElse(c, genScalar(g, depth - 1), genScalar(g, depth - 1));
        }
        default:
            return genAtom(g);
    }
}

Database randomExprDb(SplitMix64& rng) {
    int n = 1 + (int)rng.below(5);
    std::vector<std::pair<Value, Value>> tuples;
    for (int i = 0; i < n; ++i) {
        Value rec = Value::record({{"a", Value::integer(rng.below(5))},
                                   {"b", Value::integer(rng.below(5))}});
        bool dup = false;
        for (auto& [k, v] : tuples)
            if (k == rec) dup = true;
        if (!dup) tuples.emplace_back(std::move(rec), Value::integer(1 + rng.below(3)));
    }
    Database db;
    db["Q"] = Value::makeDict(std::move(tuples));
    return db;
}

void criterion2() {
    auto t0 = Clock::now();
    SplitMix64 rng(0x1234abcd5678ef00ull);
    CardEnv env;
    env.dictSize["Q"] = 100;
    Schema s;
    s.relations = {{"Q", {{"a", ScalarType::Int}, {"b", ScalarType::Int}}, 100}};
    const int kRounds = 1000;  // every rule family sees each expression
    for (int iter = 0; iter < kRounds; ++iter) {
        GenCtx g{rng, {}, {}, {}};
        ExprPtr e = genScalar(g, 3);
        Database db = randomExprDb(rng);
        Interpreter base(db);
        Value want = base.eval(e);

        auto expectSame = [&](const ExprPtr& rewritten, const char* family) {
            Interpreter in(db);
            if (!(in.eval(rewritten) == want))
                throw CheckFailure(std::string(family) + " changed the value of " +
                                   printExpr(e));
        };
        expectSame(normalize(e), "normalize");
        expectSame(scheduleLoops(e, env), "schedule");
        expectSame(factorize(e), "factorize");
        expectSame(partialEvalExpr(e), "partial-eval");
        expectSame(genericOptsExpr(e), "generic");
        expectSame(fuseLoops(e), "fuse");
        expectSame(specializeSchema(partialEvalExpr(e), s), "specialize");

        Program pr;
        pr.result = e;
        Program hh = hoistLoopInvariants(staticMemoize(pr, s));
        IterationPolicy pol;
        if (!(eval(hh, db, pol).first == want))
            throw CheckFailure(std::string("memoize+licm changed the value of ") +
                               printExpr(e));
    }
    check(secondsSince(t0) < 60.0, "soundness sweep exceeded 60s");
}

// ---------------------------------------------------------------------------
// Criterion 3: view-tree covariance vs the brute-force join.

void criterion3() {
    Schema sc = toySchema();
    IterationPolicy pol;
    LRConfig cfg;

    // Worked toy numbers.
    Program opt = applyAggOpt(buildCovarProgram(sc, cfg), sc);
    Database toy = toyDb();
    Value v = execute(chooseLayouts(opt, sc, toy), toy, pol).first;
    check(recField(v, "s_c_p") == 150.0, "toy s_c_p != 150");
    check(recField(v, "s_c_c") == 500.0, "toy s_c_c != 500");
    check(recField(v, "n") == 2.0, "toy n != 2");

    SplitMix64 rng(2024);
    std::vector<std::string> feats = {"i", "s", "c", "p"};
    for (int iter = 0; iter < 100; ++iter) {
        Database db = randomStarDb(rng);
        Value got = execute(chooseLayouts(opt, sc, db), db, pol).first;
        auto q = bruteJoin(db);
        for (std::size_t j = 0; j < feats.size(); ++j)
            for (std::size_t k = j; k < feats.size(); ++k) {
                double want = 0;
                for (const auto& t : q)
                    want += t.mult * t.a.at(feats[j]) * t.a.at(feats[k]);
                if (recField(got, "s_" + feats[j] + "_" + feats[k]) != want)
                    throw CheckFailure("covar mismatch at db " + std::to_string(iter));
            }
        double n = 0, cu = 0;
        for (const auto& t : q) {
            n += t.mult;
            cu += t.mult * t.a.at("c") * t.a.at("u");
        }
        check(recField(got, "n") == n, "count mismatch");
        check(recField(got, "c_c") == cu, "label projection mismatch");
    }
}

// ---------------------------------------------------------------------------
// Criterion 4: factorized scan counts at sales = 10^4.

void criterion4() {
    auto t0 = Clock::now();
    GenSpec spec;
    spec.sales = 10000;
    Schema s = retailSchema(spec);
    Database db = generateRetail(spec);
    IterationPolicy pol;

    LRConfig cfg;
    Program covar = buildCovarProgram(s, cfg);
    Program opt = applyAggOpt(covar, s);
    auto [fast, fstats] = execute(chooseLayouts(opt, s, db), db, pol);
    long long base = 10000 + spec.stores + spec.items;
    check(fstats.tuplesScanned == base,
          "optimized covar scanned " + std::to_string(fstats.tuplesScanned) +
              " tuples, expected " + std::to_string(base));

    // Naive path over the materialized join: each aggregate pass and each
    // gradient iteration rescans all of Q. The join itself is materialized
    // directly (it is data preparation, not the system under test).
    Database dbJoined = db;
    {
        std::map<double, double> storeCity, itemPrice;
        for (const auto& [t, m] : db.at("Stores").dict)
            storeCity[fieldOf(t, "s")] = fieldOf(t, "c");
        for (const auto& [t, m] : db.at("Items").dict)
            itemPrice[fieldOf(t, "i")] = fieldOf(t, "p");
        std::vector<std::pair<Value, Value>> q;
        for (const auto& [t, m] : db.at("Sales").dict) {
            q.emplace_back(
                tuple({{"i", (long long)fieldOf(t, "i")},
                       {"s", (long long)fieldOf(t, "s")},
                       {"c", (long long)storeCity.at(fieldOf(t, "s"))},
                       {"p", (long long)itemPrice.at(fieldOf(t, "i"))},
                       {"u", (long long)fieldOf(t, "u")}}),
                m);
        }
        dbJoined["Q"] = Value::makeDict(std::move(q));
    }
    long long qSize = (long long)dbJoined["Q"].dict.size();
    check(qSize == 10000, "materialized join size != |Sales|");

    LRConfig mat = cfg;
    mat.materializedJoin = true;
    auto [naive, nstats] = eval(buildCovarProgram(s, mat), dbJoined, pol);
    check(naive == fast, "naive covar disagrees with the factorized batch");
    check(nstats.tuplesScanned >= qSize, "naive covar scanned fewer than |Q| tuples");

    // Per-iteration rescan on the gradient loop (single feature keeps the
    // naive interpreter affordable at this scale).
    LRConfig lr = mat;
    lr.features = {"c"};
    auto scans = [&](long long iters) {
        LRConfig c = lr;
        c.policy.maxIters = iters;
        return eval(buildLinearRegressionProgram(s, c), dbJoined, c.policy)
            .second.tuplesScanned;
    };
    long long one = scans(1), two = scans(2);
    check(two - one >= qSize, "naive gradient iteration rescans fewer than |Q| tuples");
    check(secondsSince(t0) < 10.0, "criterion 4 exceeded 10s");
}

// ---------------------------------------------------------------------------
// Criterion 5: loop-invariant batch, iteration cost independent of data size.

void criterion5() {
    auto statsFor = [&](long long sales, std::vector<std::string> feats,
                        long long iters) {
        GenSpec spec;
        spec.sales = sales;
        Schema s = retailSchema(spec);
        Database db = generateRetail(spec);
        LRConfig cfg;
        cfg.features = std::move(feats);
        cfg.policy.maxIters = iters;
        return runOptimized(buildLinearRegressionProgram(s, cfg), s, db, cfg.policy)
            .second;
    };

    for (long long sales : {200LL, 2000LL}) {
        CostStats a = statsFor(sales, {}, 1);
        CostStats b = statsFor(sales, {}, 50);
        check(a.tuplesScanned == b.tuplesScanned,
              "tuplesScanned varies with iteration count at sales=" +
                  std::to_string(sales));
        check(a.loopIterations == 1 && b.loopIterations == 50, "iteration miscount");
    }

    // Per-iteration arithmetic depends on |F| only, not on the data size.
    auto perIter = [&](long long sales, std::vector<std::string> feats) {
        CostStats a = statsFor(sales, feats, 1);
        CostStats b = statsFor(sales, feats, 50);
        check((b.arithmeticOps - a.arithmeticOps) % 49 == 0, "non-uniform iterations");
        return (b.arithmeticOps - a.arithmeticOps) / 49;
    };
    long long full200 = perIter(200, {});
    long long full2000 = perIter(2000, {});
    check(full200 == full2000, "per-iteration arithmetic depends on the data size");
    long long one200 = perIter(200, {"c"});
    check(one200 < full200, "per-iteration arithmetic ignores |F|");
    check(one200 == perIter(2000, {"c"}),
          "single-feature iteration cost depends on the data size");
}

// ---------------------------------------------------------------------------
// Criterion 6: BGD equals the oracle on 20 random databases.

void criterion6() {
    auto t0 = Clock::now();
    Schema sc = toySchema();
    SplitMix64 rng(7);
    std::vector<std::string> feats = {"i", "s", "c", "p"};
    int nonTrivial = 0;
    for (int seed = 0; seed < 20; ++seed) {
        Database db = randomStarDb(rng);
        auto q = bruteJoin(db);
        double total = 0;
        for (const auto& t : q) total += t.mult;
        if (total == 0) {  // 1/|Q| undefined on an empty join
            --seed;
            continue;
        }
        LRConfig cfg;
        cfg.policy.maxIters = 10;
        Program p = buildLinearRegressionProgram(sc, cfg);
        Value got = runOptimized(p, sc, db, cfg.policy).first;

        std::map<std::string, double> theta;
        for (const auto& f : feats) theta[f] = cfg.theta0;
        for (long long it = 0; it < 10; ++it) {
            std::map<std::string, double> next;
            for (const auto& fj : feats) {
                double g = 0;
                for (const auto& t : q) {
                    double pred = 0;
                    for (const auto& fk : feats) pred += theta[fk] * t.a.at(fk);
                    g += t.mult * (pred - t.a.at("u")) * t.a.at(fj);
                }
                next[fj] = theta[fj] - cfg.alpha * g / total;
            }
            theta = std::move(next);
        }
        double norm = 0;
        for (const auto& f : feats) {
            double gotF = recField(got, f);
            double tol = 1e-9 * std::max(1.0, std::fabs(theta[f]));
            if (std::fabs(gotF - theta[f]) > tol)
                throw CheckFailure("theta." + f + " off at seed " + std::to_string(seed));
            norm += std::fabs(theta[f]);
        }
        if (norm > 1e-12) ++nonTrivial;
    }
    check(nonTrivial > 10, "BGD comparison was vacuous");
    check(secondsSince(t0) < 30.0, "criterion 6 exceeded 30s");
}

// ---------------------------------------------------------------------------
// Criterion 7: CART equals the oracle on 20 random databases.

struct OracleTree {
    bool leaf = true;
    double prediction = 0;
    long long count = 0;
    std::string feature;
    double threshold = 0;
    std::unique_ptr<OracleTree> lo, hi;
};

std::unique_ptr<OracleTree> oracleCart(const std::vector<JoinedTuple>& frag,
                                       const std::vector<std::string>& feats,
                                       const std::vector<std::vector<double>>& thr,
                                       int depth, int maxDepth, long long minNodeCount) {
    double cnt = 0, sy = 0, syy = 0;
    for (const auto& t : frag) {
        cnt += t.mult;
        sy += t.mult * t.a.at("u");
        syy += t.mult * t.a.at("u") * t.a.at("u");
    }
    auto node = std::make_unique<OracleTree>();
    node->count = (long long)std::llround(cnt);
    node->prediction = cnt > 0 ? sy / cnt : 0.0;
    if (depth >= maxDepth || cnt <= (double)minNodeCount) return node;

    bool found = false;
    double bestCost = 0;
    std::size_t bestFeat = 0;
    double bestThr = 0;
    for (std::size_t j = 0; j < feats.size(); ++j)
        for (double t : thr[j]) {
            double cl = 0, sl = 0, ssl = 0;
            for (const auto& x : frag)
                if (x.a.at(feats[j]) <= t) {
                    cl += x.mult;
                    sl += x.mult * x.a.at("u");
                    ssl += x.mult * x.a.at("u") * x.a.at("u");
                }
            double cr = cnt - cl, sr = sy - sl, ssr = syy - ssl;
            if (cl <= 0 || cr <= 0) continue;
            double cost = (ssl - sl * sl / cl) + (ssr - sr * sr / cr);
            if (!found || cost < bestCost) {
                found = true;
                bestCost = cost;
                bestFeat = j;
                bestThr = t;
            }
        }
    if (!found) return node;

    node->leaf = false;
    node->feature = feats[bestFeat];
    node->threshold = bestThr;
    std::vector<JoinedTuple> lo, hi;
    for (const auto& x : frag)
        (x.a.at(node->feature) <= bestThr ? lo : hi).push_back(x);
    node->lo = oracleCart(lo, feats, thr, depth + 1, maxDepth, minNodeCount);
    node->hi = oracleCart(hi, feats, thr, depth + 1, maxDepth, minNodeCount);
    return node;
}

void sameTree(const RegressionTree& got, const OracleTree& want) {
    check(got.leaf == want.leaf, "leaf/split shape differs");
    check(got.count == want.count, "node count differs");
    check(std::fabs(got.prediction - want.prediction) <=
              1e-9 * std::max(1.0, std::fabs(want.prediction)),
          "leaf mean differs");
    if (got.leaf) return;
    check(got.feature == want.feature, "split feature differs");
    check(std::fabs(got.threshold - want.threshold) <= 1e-9, "threshold differs");
    sameTree(*got.lo, *want.lo);
    sameTree(*got.hi, *want.hi);
}

void criterion7() {
    Schema sc = toySchema();
    SplitMix64 rng(99);
    std::vector<std::string> feats = {"i", "s", "c", "p"};
    for (int seed = 0; seed < 20; ++seed) {
        Database db = randomStarDb(rng);
        TreeConfig cfg;
        cfg.maxDepth = 4;
        RegressionTree got = buildRegressionTree(sc, db, cfg);

        std::vector<std::vector<double>> thr;
        for (const auto& f : feats) {
            std::string rel = sc.relationsWithAttr(f).front();
            std::set<double> vals;
            for (const auto& [t, m] : db.at(rel).dict) vals.insert(fieldOf(t, f));
            thr.emplace_back(vals.begin(), vals.end());
        }
        auto want = oracleCart(bruteJoin(db), feats, thr, 1, 4, 1);
        sameTree(got, *want);
    }
}

// ---------------------------------------------------------------------------
// Criterion 8: layouts change counters, never values.

void criterion8() {
    GenSpec spec;
    spec.sales = 10000;
    Schema s = retailSchema(spec);
    Database db = generateRetail(spec);
    IterationPolicy pol;
    LRConfig cfg;
    Program opt = applyAggOpt(buildCovarProgram(s, cfg), s);

    Value first;
    long long mergeLookups = -1, hashLookups = -1;
    for (int mask = 0; mask < 16; ++mask) {
        PlanOptions o;
        o.sortedTrie = mask & 1;
        o.arrayRelation = mask & 2;
        o.sortedMerge = mask & 4;
        o.checkMergeMonotonic = mask & 8;
        auto [v, st] = execute(chooseLayouts(opt, s, db, o), db, pol);
        if (mask == 0)
            first = v;
        else
            check(v == first, "layout toggle changed the result value");
        if (o.sortedTrie && o.arrayRelation) {
            if (o.sortedMerge)
                mergeLookups = st.dictLookups;
            else
                hashLookups = st.dictLookups;
        }
    }
    check(mergeLookups >= 0 && hashLookups >= 0, "probe configurations missing");
    check(mergeLookups < hashLookups,
          "merge probing (" + std::to_string(mergeLookups) +
              " lookups) not cheaper than hashing (" + std::to_string(hashLookups) +
              ")");
}

// ---------------------------------------------------------------------------
// Criterion 9: byte-identical artifacts across repeated CLI runs.

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    check(bool(in), "missing artifact " + p.string());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void criterion9() {
    namespace fs = std::filesystem;
    fs::path work = fs::temp_directory_path() / "ifaq_acceptance";
    fs::remove_all(work);
    fs::create_directories(work);

    std::string cli = IFAQ_CLI;
    auto run = [&](const std::string& args) {
        std::string cmd = cli + " " + args + " > /dev/null 2>&1";
        check(std::system(cmd.c_str()) == 0, "CLI failed: " + cmd);
    };

    fs::path prog = work / "bgd.ifaq";
    {
        std::ofstream out(prog, std::ios::binary);
        out << "let Q =\n"
               "  sum(a in dom(Sales)) sum(b in dom(Stores)) sum(c in dom(Items))\n"
               "    Sales(a) * Stores(b) * Items(c) *\n"
               "    (a.s == b.s) * (a.i == c.i) *\n"
               "    {{ {i = a.i, s = a.s, c = b.c, p = c.p, u = a.u} -> 1 }}\n"
               "in\n"
            << std::string(kBgdSource) << "\n";
    }

    for (int round = 0; round < 2; ++round) {
        fs::path d = work / ("round" + std::to_string(round));
        fs::create_directories(d);
        run("gen --sales 500 --dir " + d.string());
        run("run --program " + prog.string() + " --schema " + (d / "schema.json").string() +
            " --db " + d.string() + " --passes all --max-iters 3 --out " +
            (d / "result.json").string() + " --stats " + (d / "stats.json").string());
        run("trace --program " + prog.string() + " --schema " +
            (d / "schema.json").string() + " --out " + (d / "trace.jsonl").string() +
            " --stages " + (d / "stages.txt").string());
    }

    for (const char* f : {"Sales.csv", "Stores.csv", "Items.csv", "schema.json",
                          "result.json", "stats.json", "trace.jsonl", "stages.txt"})
        check(slurp(work / "round0" / f) == slurp(work / "round1" / f),
              std::string(f) + " differs between identical runs");
    check(!slurp(work / "round0" / "trace.jsonl").empty(), "rewrite trace is empty");
}

// ---------------------------------------------------------------------------

struct Criterion {
    const char* label;
    std::function<void()> body;
};

}  // namespace

int main() {
    std::vector<Criterion> all = {
        {"1. golden rewrite chain reproduces the golden stages", criterion1},
        {"2. rewrite rules preserve evaluation on 1000 random expressions per family",
         criterion2},
        {"3. view-tree covariance matches the brute-force join on 100 random stars",
         criterion3},
        {"4. factorized batch scans each base tuple once at sales=10000", criterion4},
        {"5. iteration cost is independent of the data after hoisting", criterion5},
        {"6. BGD matches the oracle within 1e-9 on 20 random databases", criterion6},
        {"7. CART equals the oracle tree on 20 random databases", criterion7},
        {"8. layout toggles never change values; merge probing beats hashing",
         criterion8},
        {"9. repeated CLI runs produce byte-identical artifacts", criterion9},
    };

    int failures = 0;
    for (auto& c : all) {
        try {
            c.body();
            std::cout << "[PASS] " << c.label << std::endl;
        } catch (const std::exception& e) {
            ++failures;
            std::cout << "[FAIL] " << c.label << " -- " << e.what() << std::endl;
        }
    }
    return failures == 0 ? 0 : 1;
}
