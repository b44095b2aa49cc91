#include "ifaq/apps.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "ifaq/aggopt.hpp"
#include "ifaq/interp.hpp"

namespace ifaq {

namespace {

std::string binderFor(const std::string& rel) { return "x_" + rel; }

std::vector<std::string> resolveFeatures(const Schema& s,
                                         const std::vector<std::string>& given,
                                         const std::string& label) {
    if (!given.empty()) return given;
    auto it = s.featureSets.find("features");
    if (it != s.featureSets.end()) return it->second;
    // Fall back to every attribute except the label, declaration order,
    // deduplicated across relations.
    std::vector<std::string> out;
    std::set<std::string> seen;
    for (const auto& r : s.relations)
        for (const auto& a : r.attrs)
            if (a.name != label && seen.insert(a.name).second) out.push_back(a.name);
    return out;
}

std::string resolveLabel(const Schema& s, const std::string& given) {
    if (!given.empty()) return given;
    if (!s.label.empty()) return s.label;
    throw std::runtime_error("no label attribute configured");
}

// sum(x in dom(Q)) Q(x) * f1 * f2 * ... with factors over the tuple binder.
ExprPtr joinAggregate(const std::string& joinName, const std::vector<ExprPtr>& factors) {
    ExprPtr body = lookup(var(joinName), var("x"));
    for (const auto& f : factors) body = mul(body, f);
    return sum("x", dom(var(joinName)), body);
}

ExprPtr attr(const std::string& a) { return fieldStatic(var("x"), a); }

void addJoinPrelude(Program& p, const Schema& s, bool materialized,
                    const std::string& joinName) {
    if (!materialized) p.prelude.emplace_back(joinName, buildJoinExpr(s));
}

}  // namespace

ExprPtr buildJoinExpr(const Schema& s) {
    if (!s.joinTree) throw std::runtime_error("schema has no join tree");
    const JoinTree& jt = *s.joinTree;
    std::vector<std::string> order = jt.nodes();

    // Tuple record: every attribute once, sourced from the relation nearest
    // the root that declares it.
    std::vector<std::pair<std::string, ExprPtr>> fields;
    std::set<std::string> seen;
    for (const auto& rel : order) {
        const RelationSchema* rs = s.findRelation(rel);
        if (!rs) throw std::runtime_error("join tree references unknown relation " + rel);
        for (const auto& a : rs->attrs)
            if (seen.insert(a.name).second)
                fields.emplace_back(a.name, fieldStatic(var(binderFor(rel)), a.name));
    }

    ExprPtr body = lookup(var(order.front()), var(binderFor(order.front())));
    for (std::size_t i = 1; i < order.size(); ++i)
        body = mul(body, lookup(var(order[i]), var(binderFor(order[i]))));
    for (const auto& e : jt.edges)
        for (const auto& a : e.attrs)
            body = mul(body, binop(BinOpKind::Eq, fieldStatic(var(binderFor(e.parent)), a),
                                   fieldStatic(var(binderFor(e.child)), a)));
    body = mul(body, dictLit({{recordLit(std::move(fields)), intLit(1)}}));

    for (auto it = order.rbegin(); it != order.rend(); ++it)
        body = sum(binderFor(*it), dom(var(*it)), body);
    return body;
}

Program buildCovarProgram(const Schema& s, const LRConfig& cfg) {
    std::string label = resolveLabel(s, cfg.label);
    std::vector<std::string> feats = resolveFeatures(s, cfg.features, label);

    std::vector<std::pair<std::string, ExprPtr>> out;
    for (std::size_t j = 0; j < feats.size(); ++j)
        for (std::size_t k = j; k < feats.size(); ++k)
            out.emplace_back("s_" + feats[j] + "_" + feats[k],
                             joinAggregate(cfg.joinName, {attr(feats[j]), attr(feats[k])}));
    for (const auto& f : feats)
        out.emplace_back("c_" + f, joinAggregate(cfg.joinName, {attr(f), attr(label)}));
    out.emplace_back("n", joinAggregate(cfg.joinName, {}));

    Program p;
    addJoinPrelude(p, s, cfg.materializedJoin, cfg.joinName);
    p.result = recordLit(std::move(out));
    return p;
}

Program buildLinearRegressionProgram(const Schema& s, const LRConfig& cfg) {
    std::string label = resolveLabel(s, cfg.label);
    std::vector<std::string> feats = resolveFeatures(s, cfg.features, label);
    if (feats.empty()) throw std::runtime_error("no features configured");
    for (const auto& f : feats)
        if (f == label) throw std::runtime_error("label used as feature: " + f);

    Program p;
    std::vector<ExprPtr> featFields;
    for (const auto& f : feats) featFields.push_back(fieldLit(f));
    p.prelude.emplace_back("F", setLit(std::move(featFields)));
    addJoinPrelude(p, s, cfg.materializedJoin, cfg.joinName);

    const std::string& q = cfg.joinName;
    ExprPtr inner = sum("f2", var("F"),
                        mul(lookup(var("theta"), var("f2")), fieldDyn(var("x"), var("f2"))));
    ExprPtr residualTerm = sub(inner, fieldDyn(var("x"), fieldLit(label)));
    ExprPtr grad = sum("x", dom(var(q)),
                       mul(mul(lookup(var(q), var("x")), residualTerm),
                           fieldDyn(var("x"), var("f1"))));
    if (cfg.normalizeByCount)
        grad = binop(BinOpKind::Div, grad,
                     sum("x", dom(var(q)), lookup(var(q), var("x"))));
    ExprPtr update = sub(lookup(var("theta"), var("f1")), mul(realLit(cfg.alpha), grad));

    std::vector<std::pair<ExprPtr, ExprPtr>> init;
    for (const auto& f : feats) init.emplace_back(fieldLit(f), realLit(cfg.theta0));

    Program::Loop loop;
    loop.var = "theta";
    loop.init = dictLit(std::move(init));
    loop.cond = boolLit(true);
    loop.step = dictBuild("f1", var("F"), update);
    p.loop = std::move(loop);
    p.result = var("theta");
    return p;
}

std::map<std::string, double> thetaFromValue(const Value& v) {
    if (v.kind != Value::Kind::Record)
        throw std::runtime_error("regression result is not a record");
    std::map<std::string, double> out;
    for (const auto& [f, x] : v.rec) out[f] = x.asReal();
    return out;
}

namespace {

struct PathCond {
    std::string feature;
    double threshold;
    bool lo;  // feature <= threshold, otherwise threshold < feature
};

ExprPtr condFactor(const PathCond& c) {
    if (c.lo) return binop(BinOpKind::Le, attr(c.feature), realLit(c.threshold));
    return binop(BinOpKind::Lt, realLit(c.threshold), attr(c.feature));
}

struct CartBuilder {
    const Schema& schema;
    const Database& db;
    const TreeConfig& cfg;
    std::vector<std::string> feats;
    std::string label;
    std::vector<std::vector<double>> thresholds;  // per feature, ascending

    // Distinct feature values from the relation declaring the feature.
    void collectThresholds() {
        for (const auto& f : feats) {
            auto rels = schema.relationsWithAttr(f);
            if (rels.empty()) throw std::runtime_error("unknown feature " + f);
            std::set<double> vals;
            auto it = db.find(rels.front());
            if (it != db.end())
                for (const auto& [t, m] : it->second.dict)
                    for (const auto& [a, v] : t.rec)
                        if (a == f) vals.insert(v.asReal());
            thresholds.emplace_back(vals.begin(), vals.end());
        }
    }

    // One pass per node: base count / label sum / label square sum plus the
    // same triple under every candidate's left branch.
    std::vector<double> nodeAggregates(const std::vector<PathCond>& path) {
        std::vector<ExprPtr> base;
        for (const auto& c : path) base.push_back(condFactor(c));

        auto agg = [&](std::vector<ExprPtr> extra) {
            std::vector<ExprPtr> fs = base;
            for (auto& e : extra) fs.push_back(std::move(e));
            return joinAggregate(cfg.joinName, fs);
        };

        std::vector<std::pair<std::string, ExprPtr>> out;
        int slot = 0;
        auto triple = [&](std::vector<ExprPtr> extra) {
            out.emplace_back("g" + std::to_string(slot++), agg(extra));
            extra.push_back(attr(label));
            out.emplace_back("g" + std::to_string(slot++), agg(extra));
            extra.push_back(attr(label));
            out.emplace_back("g" + std::to_string(slot++), agg(extra));
        };
        triple({});
        for (std::size_t j = 0; j < feats.size(); ++j)
            for (double t : thresholds[j])
                triple({condFactor({feats[j], t, true})});

        Program p;
        addJoinPrelude2(p);
        p.result = recordLit(std::move(out));
        Program opt = applyAggOpt(p, schema);
        IterationPolicy pol;
        Value v = eval(opt, db, pol).first;
        if (v.kind != Value::Kind::Record)
            throw std::runtime_error("aggregate batch did not produce a record");
        // Records evaluate in declared order; read back positionally.
        std::vector<double> vals;
        vals.reserve(v.rec.size());
        for (const auto& [f, x] : v.rec) vals.push_back(x.asReal());
        return vals;
    }

    void addJoinPrelude2(Program& p) {
        p.prelude.emplace_back(cfg.joinName, buildJoinExpr(schema));
    }

    std::unique_ptr<RegressionTree> build(std::vector<PathCond> path, int depth) {
        std::vector<double> g = nodeAggregates(path);
        double cnt = g[0], sy = g[1], syy = g[2];

        auto node = std::make_unique<RegressionTree>();
        node->count = (long long)std::llround(cnt);
        node->prediction = cnt > 0 ? sy / cnt : 0.0;
        if (depth >= cfg.maxDepth || cnt <= (double)cfg.minNodeCount) return node;

        bool found = false;
        double bestCost = 0.0;
        std::size_t bestFeat = 0;
        double bestThr = 0.0;
        std::size_t idx = 3;
        for (std::size_t j = 0; j < feats.size(); ++j)
            for (double t : thresholds[j]) {
                double cl = g[idx], sl = g[idx + 1], ssl = g[idx + 2];
                idx += 3;
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
        auto pl = path;
        pl.push_back({node->feature, bestThr, true});
        node->lo = build(std::move(pl), depth + 1);
        auto ph = std::move(path);
        ph.push_back({node->feature, bestThr, false});
        node->hi = build(std::move(ph), depth + 1);
        return node;
    }
};

}  // namespace

RegressionTree buildRegressionTree(const Schema& s, const Database& db,
                                   const TreeConfig& cfg) {
    TreeConfig local = cfg;
    CartBuilder b{s, db, local};
    b.label = resolveLabel(s, cfg.label);
    b.feats = resolveFeatures(s, cfg.features, b.label);
    if (b.feats.empty()) throw std::runtime_error("no features configured");
    b.collectThresholds();
    return std::move(*b.build({}, 1));
}

double predictTree(const RegressionTree& t, const Value& rec) {
    const RegressionTree* n = &t;
    while (!n->leaf) {
        double v = 0.0;
        bool got = false;
        for (const auto& [f, x] : rec.rec)
            if (f == n->feature) {
                v = x.asReal();
                got = true;
                break;
            }
        if (!got) throw std::runtime_error("tuple lacks feature " + n->feature);
        n = v <= n->threshold ? n->lo.get() : n->hi.get();
    }
    return n->prediction;
}

nlohmann::json treeToJson(const RegressionTree& t) {
    nlohmann::json j;
    j["count"] = t.count;
    j["prediction"] = t.prediction;
    if (t.leaf) {
        j["leaf"] = true;
    } else {
        j["leaf"] = false;
        j["feature"] = t.feature;
        j["threshold"] = t.threshold;
        j["lo"] = treeToJson(*t.lo);
        j["hi"] = treeToJson(*t.hi);
    }
    return j;
}

}  // namespace ifaq
