#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "ifaq/aggopt.hpp"
#include "ifaq/apps.hpp"
#include "ifaq/exec.hpp"
#include "ifaq/frontend.hpp"
#include "ifaq/interp.hpp"
#include "ifaq/rewrite.hpp"
#include "ifaq/rng.hpp"

using namespace ifaq;

namespace {

Schema toySchema() {
    Schema sc;
    // Declared cardinalities feed loop scheduling; they describe the intended
    // deployment scale, not the toy instances below.
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

// Independent oracle path: nested-loop join, plain double arithmetic.
struct JoinedTuple {
    std::map<std::string, double> a;
    double mult;
};

double fieldOf(const Value& rec, const std::string& f) {
    for (const auto& [k, v] : rec.rec)
        if (k == f) return v.asReal();
    FAIL("missing field ", f);
    return 0;
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

std::map<std::string, double> oracleBgd(const std::vector<JoinedTuple>& q,
                                        const std::vector<std::string>& feats,
                                        const std::string& label, double alpha,
                                        double theta0, long long iters,
                                        bool normalize = true) {
    std::map<std::string, double> theta;
    for (const auto& f : feats) theta[f] = theta0;
    double n = 0;
    for (const auto& t : q) n += t.mult;
    for (long long it = 0; it < iters; ++it) {
        std::map<std::string, double> next;
        for (const auto& fj : feats) {
            double g = 0;
            for (const auto& t : q) {
                double pred = 0;
                for (const auto& fk : feats) pred += theta[fk] * t.a.at(fk);
                g += t.mult * (pred - t.a.at(label)) * t.a.at(fj);
            }
            next[fj] = theta[fj] - alpha * (normalize ? g / n : g);
        }
        theta = std::move(next);
    }
    return theta;
}

// Oracle CART: same candidate thresholds, cost, guards, and tie-breaking as
// the library driver, computed by direct passes over the joined tuples.
struct OracleTree {
    bool leaf = true;
    double prediction = 0;
    long long count = 0;
    std::string feature;
    double threshold = 0;
    std::unique_ptr<OracleTree> lo, hi;
};

std::vector<std::vector<double>> oracleThresholds(const Database& db, const Schema& s,
                                                  const std::vector<std::string>& feats) {
    std::vector<std::vector<double>> out;
    for (const auto& f : feats) {
        std::string rel = s.relationsWithAttr(f).front();
        std::set<double> vals;
        for (const auto& [t, m] : db.at(rel).dict) vals.insert(fieldOf(t, f));
        out.emplace_back(vals.begin(), vals.end());
    }
    return out;
}

std::unique_ptr<OracleTree> oracleCart(const std::vector<JoinedTuple>& frag,
                                       const std::vector<std::string>& feats,
                                       const std::vector<std::vector<double>>& thr,
                                       const std::string& label, int depth, int maxDepth,
                                       long long minNodeCount) {
    double cnt = 0, sy = 0, syy = 0;
    for (const auto& t : frag) {
        cnt += t.mult;
        sy += t.mult * t.a.at(label);
        syy += t.mult * t.a.at(label) * t.a.at(label);
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
                    sl += x.mult * x.a.at(label);
                    ssl += x.mult * x.a.at(label) * x.a.at(label);
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
    node->lo = oracleCart(lo, feats, thr, label, depth + 1, maxDepth, minNodeCount);
    node->hi = oracleCart(hi, feats, thr, label, depth + 1, maxDepth, minNodeCount);
    return node;
}

void checkSameTree(const RegressionTree& got, const OracleTree& want) {
    CHECK(got.leaf == want.leaf);
    CHECK(got.count == want.count);
    CHECK(got.prediction == doctest::Approx(want.prediction).epsilon(1e-9));
    if (got.leaf || want.leaf) return;
    CHECK(got.feature == want.feature);
    CHECK(got.threshold == doctest::Approx(want.threshold).epsilon(1e-9));
    checkSameTree(*got.lo, *want.lo);
    checkSameTree(*got.hi, *want.hi);
}

// Full compiled pipeline: high-level rewrites, aggregate pushdown, layouts.
std::pair<Value, CostStats> runOptimized(const Program& p, const Schema& s,
                                         const Database& db,
                                         const IterationPolicy& pol) {
    Program hl = runHighLevelPipeline(p, s).final;
    Program opt = applyAggOpt(hl, s);
    return execute(chooseLayouts(opt, s, db), db, pol);
}

double recField(const Value& v, const std::string& f) {
    REQUIRE(v.kind == Value::Kind::Record);
    for (const auto& [k, x] : v.rec)
        if (k == f) return x.asReal();
    FAIL("missing field ", f);
    return 0;
}

}  // namespace

TEST_CASE("covar program matches the worked numbers") {
    Schema sc = toySchema();
    Database db = toyDb();
    LRConfig cfg;
    Program p = buildCovarProgram(sc, cfg);
    IterationPolicy pol;
    auto [naive, ns] = eval(p, db, pol);
    CHECK(recField(naive, "s_c_p") == 150.0);
    CHECK(recField(naive, "s_c_c") == 500.0);
    CHECK(recField(naive, "n") == 2.0);

    Program opt = applyAggOpt(p, sc);
    auto [fast, fs] = execute(chooseLayouts(opt, sc, db), db, pol);
    CHECK(fast == naive);
    CHECK(fs.tuplesScanned == 2 + 2 + 1);
}

TEST_CASE("covar matrix is symmetric and matches the brute force") {
    Schema sc = toySchema();
    SplitMix64 rng(42);
    std::vector<std::string> feats = {"i", "s", "c", "p"};
    for (int iter = 0; iter < 25; ++iter) {
        Database db = randomStarDb(rng);
        LRConfig cfg;
        Program opt = applyAggOpt(buildCovarProgram(sc, cfg), sc);
        IterationPolicy pol;
        Value v = execute(chooseLayouts(opt, sc, db), db, pol).first;
        auto q = bruteJoin(db);
        for (std::size_t j = 0; j < feats.size(); ++j)
            for (std::size_t k = j; k < feats.size(); ++k) {
                double want = 0;
                for (const auto& t : q)
                    want += t.mult * t.a.at(feats[j]) * t.a.at(feats[k]);
                CHECK(recField(v, "s_" + feats[j] + "_" + feats[k]) == want);
            }
    }
}

TEST_CASE("linear regression program lowers to the covariance batch") {
    Schema sc = toySchema();
    LRConfig cfg;
    Program p = buildLinearRegressionProgram(sc, cfg);
    Program hl = runHighLevelPipeline(p, sc).final;
    ExtractResult ex = extractAggregates(hl, sc);
    // 4x4 symmetric covar record (10 slots), the label-correlation vector
    // (4), and the tuple count (1).
    CHECK(ex.batch.specs.size() == 15);
    CHECK(ex.diagnostics.empty());
}

TEST_CASE("BGD theta matches the oracle over random databases") {
    Schema sc = toySchema();
    SplitMix64 rng(7);
    std::vector<std::string> feats = {"i", "s", "c", "p"};
    int nonTrivial = 0;
    for (int seed = 0; seed < 20; ++seed) {
        Database db = randomStarDb(rng);
        auto q = bruteJoin(db);
        double total = 0;
        for (const auto& t : q) total += t.mult;
        if (total == 0) {  // 1/|Q| is undefined on an empty join
            --seed;
            continue;
        }
        LRConfig cfg;
        cfg.policy.maxIters = 10;
        Program p = buildLinearRegressionProgram(sc, cfg);
        Value got = runOptimized(p, sc, db, cfg.policy).first;
        auto want = oracleBgd(q, feats, "u", cfg.alpha, cfg.theta0, 10);
        for (const auto& f : feats)
            CHECK(recField(got, f) == doctest::Approx(want[f]).epsilon(1e-9));
        double norm = 0;
        for (const auto& f : feats) norm += std::fabs(want[f]);
        if (norm > 1e-12) ++nonTrivial;
    }
    CHECK(nonTrivial > 10);  // the comparison is not vacuous
}

TEST_CASE("BGD fixed points and edge shapes") {
    Schema sc = toySchema();
    Database db = toyDb();

    // alpha = 0 keeps theta at its start.
    LRConfig still;
    still.alpha = 0.0;
    still.theta0 = 0.25;
    still.policy.maxIters = 5;
    Value v = runOptimized(buildLinearRegressionProgram(sc, still), sc, db,
                           still.policy)
                  .first;
    for (const auto& f : {"i", "s", "c", "p"}) CHECK(recField(v, f) == 0.25);

    // Single feature, normalization off.
    LRConfig one;
    one.features = {"c"};
    one.normalizeByCount = false;
    one.alpha = 0.001;
    one.policy.maxIters = 3;
    Value w = runOptimized(buildLinearRegressionProgram(sc, one), sc, db, one.policy)
                  .first;
    auto want = oracleBgd(bruteJoin(db), {"c"}, "u", 0.001, 0.0, 3, false);
    CHECK(recField(w, "c") == doctest::Approx(want["c"]).epsilon(1e-9));
}

TEST_CASE("regression tree equals the oracle over random databases") {
    Schema sc = toySchema();
    SplitMix64 rng(99);
    std::vector<std::string> feats = {"i", "s", "c", "p"};
    for (int seed = 0; seed < 20; ++seed) {
        Database db = randomStarDb(rng);
        TreeConfig cfg;
        cfg.maxDepth = 4;
        RegressionTree got = buildRegressionTree(sc, db, cfg);
        auto thr = oracleThresholds(db, sc, feats);
        auto want = oracleCart(bruteJoin(db), feats, thr, "u", 1, 4, 1);
        checkSameTree(got, *want);
    }
}

TEST_CASE("CART split choice is invariant under label scaling") {
    Schema sc = toySchema();
    SplitMix64 rng(123);
    Database db = randomStarDb(rng);
    Database scaled = db;
    // u -> 3u in Sales.
    std::vector<std::pair<Value, Value>> s;
    for (const auto& [t, m] : db.at("S").dict) {
        std::vector<std::pair<std::string, Value>> rec;
        for (const auto& [k, v] : t.rec)
            rec.emplace_back(k, k == "u" ? Value::integer(v.i * 3) : v);
        s.emplace_back(Value::record(std::move(rec)), m);
    }
    scaled["S"] = Value::makeDict(std::move(s));

    TreeConfig cfg;
    cfg.maxDepth = 3;
    RegressionTree a = buildRegressionTree(sc, db, cfg);
    RegressionTree b = buildRegressionTree(sc, scaled, cfg);

    std::function<void(const RegressionTree&, const RegressionTree&)> same =
        [&](const RegressionTree& x, const RegressionTree& y) {
            CHECK(x.leaf == y.leaf);
            CHECK(y.prediction == doctest::Approx(3 * x.prediction).epsilon(1e-9));
            if (x.leaf || y.leaf) return;
            CHECK(x.feature == y.feature);
            CHECK(x.threshold == y.threshold);
            same(*x.lo, *y.lo);
            same(*x.hi, *y.hi);
        };
    same(a, b);
}

TEST_CASE("tree prediction and JSON shape") {
    Schema sc = toySchema();
    Database db = toyDb();
    TreeConfig cfg;
    cfg.maxDepth = 2;
    RegressionTree t = buildRegressionTree(sc, db, cfg);
    // Two joined tuples with labels 2 and 4: root mean 3; one split separates
    // them into pure leaves.
    CHECK(t.count == 2);
    if (!t.leaf) {
        CHECK(t.lo->count + t.hi->count == 2);
        CHECK(predictTree(t, tuple({{"i", 1}, {"s", 1}, {"c", 10}, {"p", 5}, {"u", 0}})) ==
              2.0);
        CHECK(predictTree(t, tuple({{"i", 1}, {"s", 2}, {"c", 20}, {"p", 5}, {"u", 0}})) ==
              4.0);
    }
    nlohmann::json j = treeToJson(t);
    CHECK(j["count"] == 2);
    CHECK(j.contains("leaf"));
}

TEST_CASE("empty database yields zero aggregates and a zero-count leaf") {
    Schema sc = toySchema();
    Database db;
    db["S"] = Value::makeDict({});
    db["R"] = Value::makeDict({});
    db["I"] = Value::makeDict({});
    LRConfig cfg;
    IterationPolicy pol;
    Value v = eval(buildCovarProgram(sc, cfg), db, pol).first;
    CHECK(recField(v, "s_c_p") == 0.0);
    CHECK(recField(v, "n") == 0.0);

    TreeConfig tc;
    RegressionTree t = buildRegressionTree(sc, db, tc);
    CHECK(t.leaf);
    CHECK(t.count == 0);
    CHECK(t.prediction == 0.0);
}
