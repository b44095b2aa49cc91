#pragma once

#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ifaq/ast.hpp"
#include "ifaq/schema.hpp"
#include "ifaq/stats.hpp"
#include "ifaq/value.hpp"

namespace ifaq {

struct EvalError : std::runtime_error {
    explicit EvalError(const std::string& msg) : std::runtime_error(msg) {}
};

struct IterationPolicy {
    long long maxIters = 1;
    std::optional<double> epsilon;  // stop when Linf norm of state delta < epsilon
};

struct Env {
    std::vector<std::pair<std::string, Value>> frames;
    const Database* db = nullptr;

    const Value* find(const std::string& name) const {
        for (auto it = frames.rbegin(); it != frames.rend(); ++it)
            if (it->first == name) return &it->second;
        if (db) {
            auto d = db->find(name);
            if (d != db->end()) return &d->second;
        }
        return nullptr;
    }
    void push(const std::string& name, Value v) { frames.emplace_back(name, std::move(v)); }
    void pop() { frames.pop_back(); }
};

// Monoid choice for evalSum; Sum expressions always use ring addition, the
// alternatives exist for monoid-generic folds.
enum class SumMonoid { RingAdd, Min };

class Interpreter {
public:
    explicit Interpreter(const Database& db) { env_.db = &db; }

    Value eval(const ExprPtr& e);
    std::pair<Value, CostStats> run(const Program& p, const IterationPolicy& policy);

    Value evalSum(const std::string& binder, const Value& collection, const ExprPtr& body,
                  SumMonoid monoid = SumMonoid::RingAdd);

    const CostStats& stats() const { return stats_; }
    Env& env() { return env_; }

private:
    Value evalLookup(const ExprPtr& e);
    Value evalBinOp(const ExprPtr& e);

    Env env_;
    CostStats stats_;
};

// Convenience wrapper: evaluate a full program against a database.
std::pair<Value, CostStats> eval(const Program& p, const Database& db,
                                 const IterationPolicy& policy);

// Linf distance between two states of the same shape; used by the epsilon
// stopping rule.
double maxAbsDelta(const Value& a, const Value& b);

}  // namespace ifaq
