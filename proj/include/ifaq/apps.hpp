#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"

#include "ifaq/ast.hpp"
#include "ifaq/interp.hpp"
#include "ifaq/schema.hpp"
#include "ifaq/value.hpp"

namespace ifaq {

// Natural join of the join-tree relations as a sum of products: one summation
// per relation, equality factors per edge, a unit-multiplicity dictionary
// entry per matching combination.
ExprPtr buildJoinExpr(const Schema& s);

struct LRConfig {
    std::vector<std::string> features;  // defaults to featureSets["features"]
    std::string label;                  // defaults to schema label
    double alpha = 0.1;
    double theta0 = 0.0;
    bool normalizeByCount = true;
    IterationPolicy policy{10, std::nullopt};
    // When set, the join result is read from the database under joinName
    // instead of being defined by a prelude binding. Used to benchmark the
    // unoptimized plan without rematerializing the join per run.
    bool materializedJoin = false;
    std::string joinName = "Q";
};

// Record of covariance aggregates over the join: s_<f>_<g>, label projections
// c_<f>, and the tuple count n.
Program buildCovarProgram(const Schema& s, const LRConfig& cfg);

// Batch gradient descent for least squares in its source form: theta is a
// dictionary over the feature-field set F and each iteration applies
//   theta = lambda(f1 in F)
//     theta(f1) - alpha * (sum(x in dom(Q)) Q(x) *
//       (sum(f2 in F) theta(f2) * x[f2] - x[label]) * x[f1]) / |Q|
// (the final |Q| division only with normalizeByCount). The high-level
// rewrite pipeline specializes this to the record form and the aggregate
// optimizer then hoists the covariance batch out of the loop.
Program buildLinearRegressionProgram(const Schema& s, const LRConfig& cfg);

// Feature -> coefficient from the record the regression program returns.
std::map<std::string, double> thetaFromValue(const Value& v);

struct TreeConfig {
    std::vector<std::string> features;
    std::string label;
    int maxDepth = 4;            // root counts as depth 1
    long long minNodeCount = 1;  // do not split nodes at or below this size
    std::string joinName = "Q";
};

struct RegressionTree {
    bool leaf = true;
    double prediction = 0.0;
    long long count = 0;
    std::string feature;     // split condition: rec.feature <= threshold
    double threshold = 0.0;
    std::unique_ptr<RegressionTree> lo, hi;
};

// CART for regression: each node evaluates one aggregate batch over the join
// (count, label sum, label square sum per candidate split) and keeps the
// split minimizing summed variance cost. Candidate thresholds are the
// distinct values of each feature in its declaring relation. Ties break on
// the lowest feature index, then the lowest threshold.
RegressionTree buildRegressionTree(const Schema& s, const Database& db,
                                   const TreeConfig& cfg);

double predictTree(const RegressionTree& t, const Value& rec);
nlohmann::json treeToJson(const RegressionTree& t);

}  // namespace ifaq
