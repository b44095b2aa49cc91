#pragma once

#include <string>
#include <vector>

#include "ifaq/ast.hpp"
#include "ifaq/schema.hpp"

namespace ifaq {

// One aggregate Sum(x in dom(Q)) Q(x) * f1 * f2 * ... lifted out of a
// program. Factors are stored over the canonical tuple binder "x".
struct AggregateSpec {
    std::string id;               // output slot in the batch record
    std::vector<ExprPtr> factors; // measure factors, each over "x" only
    ExprPtr original;             // the replaced Sum, for diagnostics/tests
};

struct AggregateBatch {
    std::vector<AggregateSpec> specs;
    std::string joinVar;  // prelude name of the join dictionary (usually Q)
};

struct ExtractResult {
    AggregateBatch batch;
    Program residual;    // aggregate sums replaced by <aggVar>.<spec id>
    std::string aggVar;  // name the lowered batch record will be bound to
    std::vector<std::string> diagnostics;  // sums left for direct evaluation
};

ExtractResult extractAggregates(const Program& p, const Schema& s);

// Per-node view payload entry: the node-local measure factors (over the
// canonical binder "x") times one payload slot of every child view.
struct ViewEntry {
    std::string name;
    std::vector<ExprPtr> own;  // node-local factors; empty product = 1
    std::vector<std::pair<std::string, std::string>> childRefs;  // (child relation, entry)
};

struct ViewNode {
    std::string relation;
    std::vector<std::string> key;  // parent-edge join attributes; empty at root
    std::vector<ViewEntry> entries;
    std::vector<ViewNode> children;
};

struct ViewTree {
    ViewNode root;
};

// Decomposes each spec into one view entry per join-tree node. Factors are
// attributed to the nearest-root node whose relation declares all their
// attributes. Throws std::runtime_error when a factor fits no node.
ViewTree pushDownAggregates(const AggregateBatch& batch, const JoinTree& jt,
                            const Schema& s);

// One view per node: payload entries deduplicated (exprEqual on factors and
// child slots), renamed v0, v1, ... in view-tree order; root entries keep
// their spec ids.
ViewTree mergeViews(const ViewTree& vt);

// Prelude bindings computing the batch, leaf to root; the last binding is
// aggVar, a record with one field per spec. Each relation is scanned by
// exactly one Sum; child-view probes carry additive-identity defaults.
using Fragment = std::vector<std::pair<std::string, ExprPtr>>;
Fragment lowerMultiAggregate(const ViewTree& vt, const std::string& aggVar);

// Converts probed relation scans to nested per-attribute summations over a
// trie built from the relation, placing every child-view probe and payload
// factor at the shallowest level that binds it.
Fragment dictToTrie(const Fragment& frag, const JoinTree& jt, const Schema& s);

std::string viewTreeToJson(const ViewTree& vt);

// The whole pipeline: extract, push down, merge, lower, trie-convert, splice
// the fragment where the join binding was, drop the join binding when dead.
// Programs without a join tree or without extractable sums pass through.
Program applyAggOpt(const Program& p, const Schema& s,
                    std::vector<std::string>* diagnostics = nullptr);

}  // namespace ifaq
