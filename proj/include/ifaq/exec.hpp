#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ifaq/ast.hpp"
#include "ifaq/interp.hpp"
#include "ifaq/schema.hpp"
#include "ifaq/stats.hpp"
#include "ifaq/value.hpp"

namespace ifaq {

struct PlanError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class LayoutKind { HashDict, SortedDict, SortedTrie, ArrayRelation };
enum class ProbeKind { Hash, Binary, Merge, Iterated };

const char* layoutName(LayoutKind k);
const char* probeName(ProbeKind k);

struct LayoutChoice {
    LayoutKind kind = LayoutKind::HashDict;
    std::vector<std::string> trieOrder;  // SortedTrie level attributes
    bool singleFieldKeyRemoved = false;  // {a = v} keys probed as bare v
    bool recordFlattened = false;        // payload fields held as plan slots
};

// Layout toggles; flipping any of them must never change result Values,
// only CostStats.
struct PlanOptions {
    bool sortedTrie = true;      // trie builds as sorted tries vs hash dicts
    bool arrayRelation = true;   // all-multiplicity-1 relations as arrays
    bool sortedMerge = true;     // merge / iterated probing on sorted data
    bool checkMergeMonotonic = true;  // assert merge cursors never back up
};

struct PhysicalPlan {
    Program program;
    PlanOptions options;
    std::map<std::string, LayoutChoice> layouts;  // collection name -> layout
    std::map<const Expr*, ProbeKind> probes;      // Lookup sites
    std::map<const Expr*, const Expr*> probeSum;  // Iterated probe -> its Sum
    // (dict shown, probe kind) in discovery order, for explain.
    std::vector<std::pair<std::string, ProbeKind>> probeList;
};

// Structural layout policy over the optimized program: trie builds become
// sorted tries, all-1-multiplicity relations arrays, view probes merge
// candidates when their key is the enclosing iteration binder.
PhysicalPlan chooseLayouts(const Program& p, const Schema& s, const Database& db,
                           const PlanOptions& opts = {});

// Evaluates the plan. Values are identical to interp's eval of the same
// program; counters reflect the chosen layouts (merge and iterated probes
// are free, mutable fold accumulation inserts each key once).
std::pair<Value, CostStats> execute(const PhysicalPlan& plan, const Database& db,
                                    const IterationPolicy& policy);

std::string explain(const PhysicalPlan& plan);

}  // namespace ifaq
