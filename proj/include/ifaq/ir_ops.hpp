#pragma once

#include <set>
#include <string>
#include <vector>

#include "ifaq/ast.hpp"

namespace ifaq {

// Variables occurring free in e. Requires no shadowing for sensible results
// on programs, but is correct on any tree.
std::set<std::string> freeVars(const ExprPtr& e);
std::set<std::string> freeVarsProgram(const Program& p);

// Deterministic fresh-name scheme: base, base_1, base_2, ...
class NameSupply {
public:
    std::string fresh(const std::string& base);
    void reserve(const std::string& name) { used_.insert(name); }

private:
    std::set<std::string> used_;
};

// Alpha-renames so every binder in the program is distinct and no binder
// shadows a prelude binding, the loop variable, or another binder.
Program alphaRename(const Program& p);
ExprPtr alphaRenameExpr(const ExprPtr& e, NameSupply& supply);

// Capture-avoiding substitution of a variable by an expression.
ExprPtr substitute(const ExprPtr& e, const std::string& name, const ExprPtr& replacement);

// Flattened n-ary view of Add / Mul chains.
std::vector<ExprPtr> flattenAdd(const ExprPtr& e);
std::vector<ExprPtr> flattenMul(const ExprPtr& e);
ExprPtr rebuildAdd(const std::vector<ExprPtr>& terms);   // empty -> 0
ExprPtr rebuildMul(const std::vector<ExprPtr>& factors); // empty -> 1

// Structural equality up to alpha-equivalence and commutativity of + and *
// (n-ary chains are flattened and canonically sorted before comparison).
bool exprEqual(const ExprPtr& a, const ExprPtr& b);
bool programEqual(const Program& a, const Program& b);

// Number of nodes, used by termination bounds in tests.
std::size_t exprSize(const ExprPtr& e);

}  // namespace ifaq
