#include "ifaq/aggopt.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <set>
#include <stdexcept>

#include "json.hpp"

#include "ifaq/frontend.hpp"
#include "ifaq/ir_ops.hpp"

namespace ifaq {

namespace {

int countUses(const ExprPtr& e, const std::string& name) {
    if (e->kind == Expr::Kind::Var) return e->name == name ? 1 : 0;
    int n = 0;
    for (const auto& k : children(e)) n += countUses(k, name);
    return n;
}

int countUsesProgram(const Program& p, const std::string& name,
                     const std::string& skipBinding) {
    int n = 0;
    for (const auto& [b, e] : p.prelude)
        if (b != skipBinding) n += countUses(e, name);
    if (p.loop)
        n += countUses(p.loop->init, name) + countUses(p.loop->cond, name) +
             countUses(p.loop->step, name);
    return n + countUses(p.result, name);
}

// Collects the attributes a factor reads off the tuple binder. Fails when the
// binder is used any other way (bare, dynamic access, rebound).
bool collectAttrs(const ExprPtr& e, const std::string& binder,
                  std::set<std::string>& attrs) {
    if (e->kind == Expr::Kind::FieldStatic && e->a->kind == Expr::Kind::Var &&
        e->a->name == binder) {
        attrs.insert(e->name);
        return true;
    }
    if (e->kind == Expr::Kind::Var && e->name == binder) return false;
    bool rebinds = (e->kind == Expr::Kind::Sum || e->kind == Expr::Kind::DictBuild ||
                    e->kind == Expr::Kind::Let) &&
                   e->name == binder;
    if (rebinds) return false;
    for (const auto& k : children(e))
        if (!collectAttrs(k, binder, attrs)) return false;
    return true;
}

// Rewrites binder.attr accesses into per-attribute variables (trie levels).
ExprPtr substAttrAccess(const ExprPtr& e, const std::string& binder,
                        const std::map<std::string, std::string>& levelVar) {
    if (e->kind == Expr::Kind::FieldStatic && e->a->kind == Expr::Kind::Var &&
        e->a->name == binder) {
        auto it = levelVar.find(e->name);
        if (it != levelVar.end()) return var(it->second);
    }
    auto kids = children(e);
    bool ch = false;
    for (auto& k : kids) {
        ExprPtr t = substAttrAccess(k, binder, levelVar);
        if (t != k) ch = true;
        k = t;
    }
    return ch ? rebuild(e, kids) : e;
}

std::vector<std::string> nodeAttrs(const Schema& s, const std::string& rel) {
    std::vector<std::string> out;
    if (const RelationSchema* r = s.findRelation(rel))
        for (const auto& a : r->attrs) out.push_back(a.name);
    return out;
}

struct Extractor {
    const Schema& schema;
    std::string joinVar;
    std::string aggVar;
    std::vector<AggregateSpec> specs;
    std::vector<std::string> diagnostics;
    // Join-tree nodes in breadth-first order with their attribute sets, for
    // the single-node provenance check.
    std::vector<std::pair<std::string, std::set<std::string>>> nodes;

    bool factorFitsSomeNode(const std::set<std::string>& attrs) const {
        for (const auto& [rel, as] : nodes) {
            bool ok = true;
            for (const auto& a : attrs)
                if (!as.count(a)) {
                    ok = false;
                    break;
                }
            if (ok) return true;
        }
        return false;
    }

    ExprPtr tryExtract(const ExprPtr& e) {
        if (e->kind != Expr::Kind::Sum || e->a->kind != Expr::Kind::Dom ||
            e->a->a->kind != Expr::Kind::Var || e->a->a->name != joinVar)
            return e;
        const std::string& x = e->name;
        ExprPtr weight = lookup(var(joinVar), var(x));
        auto fs = flattenMul(e->b);
        std::vector<ExprPtr> measure;
        bool sawWeight = false;
        for (const auto& f : fs) {
            if (!sawWeight && exprEqual(f, weight)) {
                sawWeight = true;
                continue;
            }
            measure.push_back(f);
        }
        if (!sawWeight) {
            diagnostics.push_back("sum over dom(" + joinVar + ") without " + joinVar +
                                  "(" + x + ") weight left unextracted");
            return e;
        }
        std::vector<ExprPtr> canon;
        for (const auto& f : measure) {
            std::set<std::string> fv = freeVars(f);
            fv.erase(x);
            std::set<std::string> attrs;
            if (!fv.empty() || !collectAttrs(f, x, attrs)) {
                diagnostics.push_back("aggregate factor " + printExpr(f) +
                                      " is not a field expression over " + x +
                                      "; sum left unextracted");
                return e;
            }
            if (!factorFitsSomeNode(attrs)) {
                diagnostics.push_back("aggregate factor " + printExpr(f) +
                                      " spans join-tree nodes; sum left unextracted");
                return e;
            }
            canon.push_back(substitute(f, x, var("x")));
        }
        // Identical aggregates share a slot.
        for (const auto& sp : specs)
            if (exprEqual(rebuildMul(canon), rebuildMul(sp.factors)))
                return fieldStatic(var(aggVar), sp.id);
        std::string id = "m" + std::to_string(specs.size());
        specs.push_back({id, canon, e});
        return fieldStatic(var(aggVar), id);
    }

    ExprPtr walk(const ExprPtr& e) {
        auto kids = children(e);
        bool ch = false;
        for (auto& k : kids) {
            ExprPtr t = walk(k);
            if (t != k) ch = true;
            k = t;
        }
        return tryExtract(ch ? rebuild(e, kids) : e);
    }
};

}  // namespace

ExtractResult extractAggregates(const Program& p, const Schema& s) {
    ExtractResult out;
    out.residual = p;
    if (!s.joinTree) return out;

    // The join dictionary: a prelude binding built from the join-tree
    // relations (its definition mentions dom of at least one of them).
    std::set<std::string> rels;
    for (const auto& n : s.joinTree->nodes()) rels.insert(n);
    std::string joinVar;
    for (const auto& [name, rhs] : p.prelude) {
        std::set<std::string> fv = freeVars(rhs);
        for (const auto& r : rels)
            if (fv.count(r)) {
                joinVar = name;
                break;
            }
        if (!joinVar.empty()) break;
    }
    if (joinVar.empty()) return out;

    NameSupply supply;
    for (const auto& v : freeVarsProgram(p)) supply.reserve(v);
    for (const auto& [n, e] : p.prelude) supply.reserve(n);
    if (p.loop) supply.reserve(p.loop->var);
    for (const auto& r : rels) supply.reserve(r);

    Extractor ex{s, joinVar, supply.fresh("magg")};
    for (const auto& rel : s.joinTree->nodes()) {
        std::set<std::string> as;
        for (const auto& a : nodeAttrs(s, rel)) as.insert(a);
        ex.nodes.emplace_back(rel, std::move(as));
    }

    Program res;
    for (const auto& [n, e] : p.prelude)
        res.prelude.emplace_back(n, n == joinVar ? e : ex.walk(e));
    if (p.loop) {
        Program::Loop l;
        l.var = p.loop->var;
        l.init = ex.walk(p.loop->init);
        l.cond = ex.walk(p.loop->cond);
        l.step = ex.walk(p.loop->step);
        res.loop = std::move(l);
    }
    res.result = ex.walk(p.result);

    out.batch.specs = std::move(ex.specs);
    out.batch.joinVar = joinVar;
    out.residual = std::move(res);
    out.aggVar = ex.aggVar;
    out.diagnostics = std::move(ex.diagnostics);
    return out;
}

namespace {

ViewNode buildNode(const JoinTree& jt, const std::string& rel,
                   const std::vector<std::string>& key) {
    ViewNode n;
    n.relation = rel;
    n.key = key;
    for (const auto& c : jt.childrenOf(rel))
        n.children.push_back(buildNode(jt, c, jt.edgeTo(c)->attrs));
    return n;
}

void fillEntries(ViewNode& n, const AggregateBatch& batch,
                 const std::map<std::string, std::map<std::string, std::vector<ExprPtr>>>&
                     ownFactors) {
    for (const auto& sp : batch.specs) {
        ViewEntry e;
        e.name = sp.id;
        auto nodeIt = ownFactors.find(sp.id);
        if (nodeIt != ownFactors.end()) {
            auto it = nodeIt->second.find(n.relation);
            if (it != nodeIt->second.end()) e.own = it->second;
        }
        for (const auto& c : n.children) e.childRefs.emplace_back(c.relation, sp.id);
        n.entries.push_back(std::move(e));
    }
    for (auto& c : n.children) fillEntries(c, batch, ownFactors);
}

}  // namespace

ViewTree pushDownAggregates(const AggregateBatch& batch, const JoinTree& jt,
                            const Schema& s) {
    // Nearest-root attribution: breadth-first node order.
    std::vector<std::string> order{jt.root};
    for (std::size_t i = 0; i < order.size(); ++i)
        for (const auto& c : jt.childrenOf(order[i])) order.push_back(c);

    std::map<std::string, std::set<std::string>> attrsByNode;
    for (const auto& rel : order) {
        std::set<std::string> as;
        for (const auto& a : nodeAttrs(s, rel)) as.insert(a);
        attrsByNode[rel] = std::move(as);
    }

    // spec id -> node -> factors computed there.
    std::map<std::string, std::map<std::string, std::vector<ExprPtr>>> own;
    for (const auto& sp : batch.specs) {
        for (const auto& f : sp.factors) {
            std::set<std::string> attrs;
            collectAttrs(f, "x", attrs);
            std::string home;
            for (const auto& rel : order) {
                const auto& as = attrsByNode[rel];
                bool fits = true;
                for (const auto& a : attrs)
                    if (!as.count(a)) {
                        fits = false;
                        break;
                    }
                if (fits) {
                    home = rel;
                    break;
                }
            }
            if (home.empty())
                throw std::runtime_error("aggregate factor " + printExpr(f) +
                                         " fits no join-tree node");
            own[sp.id][home].push_back(f);
        }
    }

    ViewTree vt;
    vt.root = buildNode(jt, jt.root, {});
    fillEntries(vt.root, batch, own);
    return vt;
}

namespace {

ViewNode mergeNode(const ViewNode& n, bool isRoot,
                   std::map<std::string, std::string>& rename) {
    ViewNode out;
    out.relation = n.relation;
    out.key = n.key;
    std::map<std::string, std::map<std::string, std::string>> childRename;
    for (const auto& c : n.children)
        out.children.push_back(mergeNode(c, false, childRename[c.relation]));

    for (const auto& e : n.entries) {
        ViewEntry cur;
        cur.name = e.name;
        cur.own = e.own;
        for (const auto& [rel, slot] : e.childRefs)
            cur.childRefs.emplace_back(rel, childRename[rel].at(slot));
        bool dup = false;
        for (const auto& kept : out.entries) {
            if (kept.childRefs == cur.childRefs &&
                exprEqual(rebuildMul(kept.own), rebuildMul(cur.own))) {
                rename[e.name] = kept.name;
                dup = true;
                break;
            }
        }
        if (dup) continue;
        if (!isRoot) cur.name = "v" + std::to_string(out.entries.size());
        rename[e.name] = cur.name;
        out.entries.push_back(std::move(cur));
    }
    return out;
}

}  // namespace

ViewTree mergeViews(const ViewTree& vt) {
    std::map<std::string, std::string> rename;
    ViewTree out;
    out.root = mergeNode(vt.root, true, rename);
    return out;
}

namespace {

std::string viewBindingName(const std::string& rel) { return "W_" + rel; }
std::string probeBinderName(const std::string& rel) { return "w_" + rel; }

ExprPtr zeroRecordFor(const ViewNode& n) {
    std::vector<std::pair<std::string, ExprPtr>> fs;
    for (const auto& e : n.entries) fs.emplace_back(e.name, intLit(0));
    return recordLit(fs);
}

// Child probe, key built from binder.attr accesses: W_C({s = x.s}, zero).
ExprPtr probeExpr(const ViewNode& child, const std::string& binder) {
    std::vector<std::pair<std::string, ExprPtr>> key;
    for (const auto& a : child.key) key.emplace_back(a, fieldStatic(var(binder), a));
    return lookupOrDefault(var(viewBindingName(child.relation)), recordLit(key),
                           zeroRecordFor(child));
}

// The payload record of a node: entry products over its binder, reading
// child slots through the probe binders.
ExprPtr payloadRecord(const ViewNode& n, const std::string& binder) {
    std::vector<std::pair<std::string, ExprPtr>> fs;
    for (const auto& e : n.entries) {
        std::vector<ExprPtr> factors;
        for (const auto& f : e.own) factors.push_back(substitute(f, "x", var(binder)));
        for (const auto& [rel, slot] : e.childRefs)
            factors.push_back(fieldStatic(var(probeBinderName(rel)), slot));
        fs.emplace_back(e.name, rebuildMul(factors));
    }
    return recordLit(fs);
}

void lowerNode(const ViewNode& n, bool isRoot, const std::string& aggVar, Fragment& out) {
    for (const auto& c : n.children) lowerNode(c, false, aggVar, out);

    std::string binder = "x_" + n.relation;
    ExprPtr body = payloadRecord(n, binder);
    for (auto it = n.children.rbegin(); it != n.children.rend(); ++it)
        body = let(probeBinderName(it->relation), probeExpr(*it, binder), body);

    if (!isRoot) {
        std::vector<std::pair<std::string, ExprPtr>> key;
        for (const auto& a : n.key) key.emplace_back(a, fieldStatic(var(binder), a));
        body = dictLit({{recordLit(key), body}});
    }
    ExprPtr rhs = sum(binder, dom(var(n.relation)),
                      mul(lookup(var(n.relation), var(binder)), body));
    out.emplace_back(isRoot ? aggVar : viewBindingName(n.relation), rhs);
}

}  // namespace

Fragment lowerMultiAggregate(const ViewTree& vt, const std::string& aggVar) {
    Fragment out;
    lowerNode(vt.root, true, aggVar, out);
    return out;
}

namespace {

// Trie levels for a relation scan: parent-edge attributes of each child in
// join-tree child order, then the remaining referenced attributes
// alphabetically. Unreferenced attributes are aggregated away.
std::vector<std::string> trieLevels(const JoinTree& jt, const std::string& rel,
                                    const std::set<std::string>& referenced) {
    std::vector<std::string> levels;
    auto push = [&](const std::string& a) {
        if (std::find(levels.begin(), levels.end(), a) == levels.end())
            levels.push_back(a);
    };
    for (const auto& c : jt.childrenOf(rel))
        for (const auto& a : jt.edgeTo(c)->attrs) push(a);
    for (const auto& a : referenced) push(a);  // std::set: alphabetical
    return levels;
}

struct ProbeLet {
    std::string name;
    ExprPtr bound;
};

// Deepest trie level an expression depends on; 0 when it references none.
std::size_t levelOf(const ExprPtr& e, const std::vector<std::string>& levelVars,
                    const std::map<std::string, std::size_t>& probeLevel) {
    std::size_t lvl = 0;
    std::set<std::string> fv = freeVars(e);
    for (std::size_t i = 0; i < levelVars.size(); ++i)
        if (fv.count(levelVars[i])) lvl = std::max(lvl, i + 1);
    for (const auto& [name, pl] : probeLevel)
        if (fv.count(name)) lvl = std::max(lvl, pl);
    return lvl;
}

ExprPtr convertScan(const std::string& rel, const ExprPtr& rhs, const JoinTree& jt,
                    Fragment& pre) {
    const std::string& binder = rhs->name;
    ExprPtr weight = lookup(var(rel), var(binder));
    auto fs = flattenMul(rhs->b);
    std::vector<ExprPtr> rest;
    bool sawWeight = false;
    for (const auto& f : fs) {
        if (!sawWeight && exprEqual(f, weight)) {
            sawWeight = true;
            continue;
        }
        rest.push_back(f);
    }
    if (!sawWeight || rest.size() != 1) return rhs;
    ExprPtr inner = rest[0];
    // Attributes the payload actually reads; the weight lookup uses the
    // binder bare, so only the payload side is scanned.
    std::set<std::string> referenced;
    collectAttrs(inner, binder, referenced);

    // Peel the probe lets down to the payload record.
    std::vector<ProbeLet> probes;
    while (inner->kind == Expr::Kind::Let) {
        probes.push_back({inner->name, inner->a});
        inner = inner->b;
    }
    if (inner->kind != Expr::Kind::RecordLit) return rhs;
    if (probes.empty()) return rhs;

    std::vector<std::string> levels = trieLevels(jt, rel, referenced);
    if (levels.size() <= 1) return rhs;

    // Build the trie from the relation: one scan, unreferenced attributes
    // summed out into the leaf multiplicity.
    std::string trieName = rel + "_trie";
    ExprPtr trieEntry = intLit(1);
    for (auto it = levels.rbegin(); it != levels.rend(); ++it)
        trieEntry = dictLit({{fieldStatic(var(binder), *it), trieEntry}});
    pre.emplace_back(trieName,
                     sum(binder, dom(var(rel)),
                         mul(lookup(var(rel), var(binder)), trieEntry)));

    std::map<std::string, std::string> levelVarOf;  // attr -> level binder
    std::vector<std::string> levelVars;
    for (const auto& a : levels) {
        levelVars.push_back("x_" + a);
        levelVarOf[a] = levelVars.back();
    }

    std::map<std::string, std::size_t> probeLevel;
    std::vector<ProbeLet> converted;
    for (const auto& p : probes) {
        ExprPtr bound = substAttrAccess(p.bound, binder, levelVarOf);
        probeLevel[p.name] = levelOf(bound, levelVars, {});
        converted.push_back({p.name, bound});
    }

    // Per-field factors partitioned by the deepest level they need.
    std::size_t last = levels.size();
    std::vector<std::vector<std::pair<std::string, ExprPtr>>> fieldsAt(last + 1);
    for (const auto& [fname, fexpr] : inner->fields) {
        std::map<std::size_t, std::vector<ExprPtr>> parts;
        for (const auto& f : flattenMul(fexpr)) {
            ExprPtr cf = substAttrAccess(f, binder, levelVarOf);
            parts[levelOf(cf, levelVars, probeLevel)].push_back(cf);
        }
        for (std::size_t l = 1; l <= last; ++l) {
            auto it = parts.find(l);
            // Level-0 (constant) factors ride along at the innermost level.
            std::vector<ExprPtr> here = it == parts.end() ? std::vector<ExprPtr>{}
                                                          : it->second;
            if (l == last) {
                auto c0 = parts.find(0);
                if (c0 != parts.end())
                    here.insert(here.end(), c0->second.begin(), c0->second.end());
            }
            fieldsAt[l].emplace_back(fname, rebuildMul(here));
        }
    }
    auto allOnes = [](const std::vector<std::pair<std::string, ExprPtr>>& fs) {
        for (const auto& [n, e] : fs)
            if (!(e->kind == Expr::Kind::Const &&
                  e->constant.tag == Constant::Tag::Int && e->constant.i == 1))
                return false;
        return true;
    };

    // Multiplicity access trie(x_a1)(x_a2)...(x_ak).
    ExprPtr mult = var(trieName);
    for (const auto& v : levelVars) mult = lookup(mult, var(v));

    // Innermost body first, then wrap outward level by level.
    ExprPtr body;
    for (std::size_t l = last; l >= 1; --l) {
        ExprPtr levelRec = recordLit(fieldsAt[l]);
        if (l == last) {
            body = mul(mult, levelRec);
        } else {
            if (allOnes(fieldsAt[l]))
                body = body;  // skip the neutral record
            else
                body = mul(levelRec, body);
        }
        for (auto it = converted.rbegin(); it != converted.rend(); ++it)
            if (probeLevel[it->name] == l) body = let(it->name, it->bound, body);
        // Collection for this level: trie prefix indexed by outer binders.
        ExprPtr coll = var(trieName);
        for (std::size_t i = 0; i + 1 < l; ++i) coll = lookup(coll, var(levelVars[i]));
        body = sum(levelVars[l - 1], dom(coll), body);
        if (l == 1) break;
    }
    return body;
}

}  // namespace

Fragment dictToTrie(const Fragment& frag, const JoinTree& jt, const Schema& s) {
    Fragment out;
    for (const auto& [name, rhs] : frag) {
        bool probedScan = rhs->kind == Expr::Kind::Sum &&
                          rhs->a->kind == Expr::Kind::Dom &&
                          rhs->a->a->kind == Expr::Kind::Var &&
                          s.findRelation(rhs->a->a->name) != nullptr &&
                          !jt.childrenOf(rhs->a->a->name).empty();
        if (!probedScan) {
            out.emplace_back(name, rhs);
            continue;
        }
        Fragment pre;
        ExprPtr converted = convertScan(rhs->a->a->name, rhs, jt, pre);
        for (auto& b : pre) out.push_back(std::move(b));
        out.emplace_back(name, converted);
    }
    return out;
}

std::string viewTreeToJson(const ViewTree& vt) {
    using nlohmann::ordered_json;
    std::function<ordered_json(const ViewNode&)> conv = [&](const ViewNode& n) {
        ordered_json j;
        j["node"] = n.relation;
        j["key"] = n.key;
        j["payload"] = ordered_json::array();
        for (const auto& e : n.entries) {
            std::vector<ExprPtr> factors = e.own;
            for (const auto& [rel, slot] : e.childRefs)
                factors.push_back(fieldStatic(var(probeBinderName(rel)), slot));
            j["payload"].push_back(
                {{"name", e.name}, {"expr", printExpr(rebuildMul(factors))}});
        }
        j["children"] = ordered_json::array();
        for (const auto& c : n.children) j["children"].push_back(conv(c));
        return j;
    };
    return conv(vt.root).dump(2);
}

Program applyAggOpt(const Program& p, const Schema& s,
                    std::vector<std::string>* diagnostics) {
    if (!s.joinTree) return p;
    ExtractResult ex = extractAggregates(p, s);
    if (diagnostics)
        diagnostics->insert(diagnostics->end(), ex.diagnostics.begin(),
                            ex.diagnostics.end());
    if (ex.batch.specs.empty()) return p;

    ViewTree vt = mergeViews(pushDownAggregates(ex.batch, *s.joinTree, s));
    Fragment frag = lowerMultiAggregate(vt, ex.aggVar);
    frag = dictToTrie(frag, *s.joinTree, s);

    // Keep fragment names clear of everything the program already uses.
    NameSupply supply;
    for (const auto& v : freeVarsProgram(ex.residual)) supply.reserve(v);
    for (const auto& [n, e] : ex.residual.prelude) supply.reserve(n);
    if (ex.residual.loop) supply.reserve(ex.residual.loop->var);
    for (const auto& r : s.relations) supply.reserve(r.name);
    for (std::size_t i = 0; i < frag.size(); ++i) {
        // The batch record keeps its name: the residual already refers to it.
        if (frag[i].first == ex.aggVar) continue;
        std::string fresh = supply.fresh(frag[i].first);
        if (fresh == frag[i].first) continue;
        for (std::size_t j = i; j < frag.size(); ++j)
            frag[j].second = substitute(frag[j].second, frag[i].first, var(fresh));
        frag[i].first = fresh;
    }

    bool joinStillUsed =
        countUsesProgram(ex.residual, ex.batch.joinVar, ex.batch.joinVar) > 0;

    Program out;
    for (const auto& [n, e] : ex.residual.prelude) {
        if (n == ex.batch.joinVar) {
            if (joinStillUsed) out.prelude.emplace_back(n, e);
            for (const auto& b : frag) out.prelude.push_back(b);
        } else {
            out.prelude.emplace_back(n, e);
        }
    }
    out.loop = ex.residual.loop;
    out.result = ex.residual.result;
    return out;
}

}  // namespace ifaq
